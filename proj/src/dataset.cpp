#include "tdrl/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "tdrl/parallel.hpp"

namespace fs = std::filesystem;

namespace tdrl {

namespace {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

MatrixXd slice_seq(const Tensor& t, int s) {
  const int T = static_cast<int>(t.shape[1]);
  const int n = static_cast<int>(t.shape[2]);
  MatrixXd m(T, n);
  const double* p = t.f64() + static_cast<size_t>(s) * T * n;
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = p[static_cast<size_t>(i) * n + j];
  return m;
}

}  // namespace

MatrixXd Dataset::sequence_x(int s) const { return slice_seq(x, s); }
MatrixXd Dataset::sequence_z(int s) const { return slice_seq(z, s); }

Dataset build_dataset(const GeneratorSpec& spec, int mixing_depth) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  auto trajs = simulate(spec);
  ds.transition = *trajs.front().transition;
  ds.mixing = make_random_mixing(spec.n, mixing_depth, spec.seed);

  const int S = static_cast<int>(trajs.size());
  const int T = spec.T;
  const int n = spec.n;
  ds.z = Tensor::zeros(Dtype::f64, {static_cast<uint32_t>(S), static_cast<uint32_t>(T), static_cast<uint32_t>(n)});
  ds.x = Tensor::zeros(Dtype::f64, {static_cast<uint32_t>(S), static_cast<uint32_t>(T), static_cast<uint32_t>(n)});
  ds.u = Tensor::zeros(Dtype::i32, {static_cast<uint32_t>(S)});
  parallel_for(S, [&](std::ptrdiff_t s) {
    const MatrixXd& z = trajs[static_cast<size_t>(s)].z;
    const MatrixXd x = apply_mixing(ds.mixing, z);
    double* zp = ds.z.f64() + static_cast<size_t>(s) * T * n;
    double* xp = ds.x.f64() + static_cast<size_t>(s) * T * n;
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < n; ++j) {
        zp[static_cast<size_t>(i) * n + j] = z(i, j);
        xp[static_cast<size_t>(i) * n + j] = x(i, j);
      }
    ds.u.i32()[s] = trajs[static_cast<size_t>(s)].domain;
  });
  ds.adjacency = Tensor::zeros(Dtype::u8, {static_cast<uint32_t>(n), static_cast<uint32_t>(n), static_cast<uint32_t>(spec.L)});
  std::copy(ds.transition.adjacency.data.begin(), ds.transition.adjacency.data.end(), ds.adjacency.u8());
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir);

  std::vector<std::pair<std::string, const Tensor*>> arrays = {
      {"x", &ds.x}, {"z", &ds.z}, {"u", &ds.u}, {"adjacency", &ds.adjacency}};

  std::vector<uint8_t> payload;
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  for (const auto& [name, t] : arrays) {
    const auto rec = tensor_record_bytes(*t);
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["dtype"] = static_cast<int>(t->dtype);
    entry["shape"] = t->shape;
    entry["offset"] = payload.size();
    entry["bytes"] = rec.size();
    entry["fnv1a64"] = hex64(fnv1a64(rec.data(), rec.size()));
    index.push_back(std::move(entry));
    payload.insert(payload.end(), rec.begin(), rec.end());
  }

  nlohmann::ordered_json manifest;
  manifest["format_version"] = kDatasetFormatVersion;
  manifest["kind"] = "dataset";
  manifest["generator_spec"] = ds.spec.to_json();
  manifest["mixing"] = ds.mixing.to_json();
  manifest["transition"] = ds.transition.to_json();
  manifest["arrays"] = std::move(index);

  write_file_bytes(dir + "/payload.bin", payload);
  write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::string& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest parse error in " + dir + ": " + e.what());
  }
  if (manifest.value("format_version", -1) != kDatasetFormatVersion)
    throw IoError("unsupported dataset format version in " + dir);

  Dataset ds;
  ds.spec = GeneratorSpec::from_json(manifest.at("generator_spec"));
  ds.mixing = MixingFunction::from_json(manifest.at("mixing"));
  ds.transition = TransitionRecord::from_json(manifest.at("transition"));

  const auto payload = read_file_bytes(dir + "/payload.bin");
  for (const auto& entry : manifest.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const size_t offset = entry.at("offset").get<size_t>();
    const size_t bytes = entry.at("bytes").get<size_t>();
    if (offset + bytes > payload.size()) throw IoError("payload truncated for array " + name);
    const uint64_t sum = fnv1a64(payload.data() + offset, bytes);
    if (hex64(sum) != entry.at("fnv1a64").get<std::string>())
      throw IoError("checksum mismatch for array " + name);
    std::istringstream is(std::string(reinterpret_cast<const char*>(payload.data() + offset), bytes));
    Tensor t = read_tensor(is);
    const auto shape = entry.at("shape").get<std::vector<uint32_t>>();
    if (t.shape != shape) throw IoError("shape mismatch for array " + name);
    if (name == "x") ds.x = std::move(t);
    else if (name == "z") ds.z = std::move(t);
    else if (name == "u") ds.u = std::move(t);
    else if (name == "adjacency") ds.adjacency = std::move(t);
  }
  if (ds.x.bytes.empty() || ds.z.bytes.empty() || ds.u.bytes.empty() || ds.adjacency.bytes.empty())
    throw IoError("dataset missing required arrays in " + dir);
  return ds;
}

const Tensor& Pack::get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw IoError("pack: missing tensor " + name);
}

void write_pack(const Pack& pack, const std::string& path) {
  nlohmann::ordered_json header;
  header["meta"] = pack.meta;
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  std::vector<uint8_t> payload;
  for (const auto& [name, t] : pack.tensors) {
    const auto rec = tensor_record_bytes(t);
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["offset"] = payload.size();
    entry["bytes"] = rec.size();
    entry["fnv1a64"] = hex64(fnv1a64(rec.data(), rec.size()));
    index.push_back(std::move(entry));
    payload.insert(payload.end(), rec.begin(), rec.end());
  }
  header["arrays"] = std::move(index);
  const std::string json = header.dump();

  std::vector<uint8_t> out;
  const char magic[8] = {'T', 'D', 'R', 'L', 'P', 'A', 'C', 'K'};
  out.insert(out.end(), magic, magic + 8);
  uint64_t len = json.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((len >> (8 * i)) & 0xff));
  out.insert(out.end(), json.begin(), json.end());
  out.insert(out.end(), payload.begin(), payload.end());
  write_file_bytes(path, out);
}

Pack read_pack(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 16 || std::string(bytes.begin(), bytes.begin() + 8) != "TDRLPACK")
    throw IoError("not a pack file: " + path);
  uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<uint64_t>(bytes[8 + i]) << (8 * i);
  if (16 + len > bytes.size()) throw IoError("pack header truncated: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("pack header parse error: ") + e.what());
  }
  Pack pack;
  pack.meta = header.at("meta");
  const size_t base = 16 + len;
  for (const auto& entry : header.at("arrays")) {
    const size_t offset = base + entry.at("offset").get<size_t>();
    const size_t sz = entry.at("bytes").get<size_t>();
    if (offset + sz > bytes.size()) throw IoError("pack payload truncated: " + path);
    if (hex64(fnv1a64(bytes.data() + offset, sz)) != entry.at("fnv1a64").get<std::string>())
      throw IoError("pack checksum mismatch for " + entry.at("name").get<std::string>());
    std::istringstream is(std::string(reinterpret_cast<const char*>(bytes.data() + offset), sz));
    pack.tensors.emplace_back(entry.at("name").get<std::string>(), read_tensor(is));
  }
  return pack;
}

}  // namespace tdrl
