#include "tdrl/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace tdrl {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(std::istream& is) {
  uint8_t b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("tensor read: truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

Tensor Tensor::zeros(Dtype dt, std::vector<uint32_t> shp) {
  Tensor t;
  t.dtype = dt;
  t.shape = std::move(shp);
  t.bytes.assign(t.count() * dtype_size(dt), 0);
  return t;
}

Tensor Tensor::from_matrix(const MatrixXd& m) {
  Tensor t = zeros(Dtype::f64, {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())});
  double* p = t.f64();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) *p++ = m(i, j);
  return t;
}

MatrixXd Tensor::to_matrix() const {
  if (dtype != Dtype::f64 || shape.size() != 2) throw IoError("to_matrix: need rank-2 f64 tensor");
  MatrixXd m(shape[0], shape[1]);
  const double* p = f64();
  for (uint32_t i = 0; i < shape[0]; ++i)
    for (uint32_t j = 0; j < shape[1]; ++j) m(i, j) = *p++;
  return m;
}

uint64_t fnv1a64(const uint8_t* data, size_t len) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<uint8_t> tensor_record_bytes(const Tensor& t) {
  std::vector<uint8_t> out;
  out.reserve(13 + 4 * t.shape.size() + t.bytes.size());
  out.push_back('T');
  out.push_back('D');
  out.push_back('R');
  out.push_back('L');
  put_u32(out, kTensorFormatVersion);
  put_u32(out, static_cast<uint32_t>(t.shape.size()));
  for (uint32_t d : t.shape) put_u32(out, d);
  out.push_back(static_cast<uint8_t>(t.dtype));
  // This writer only targets little-endian hosts; payload is raw memory.
  out.insert(out.end(), t.bytes.begin(), t.bytes.end());
  return out;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  auto rec = tensor_record_bytes(t);
  os.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  if (!os) throw IoError("tensor write failed");
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "TDRL", 4) != 0) throw IoError("tensor read: bad magic");
  const uint32_t version = get_u32(is);
  if (version != kTensorFormatVersion) throw IoError("tensor read: unsupported format version");
  const uint32_t rank = get_u32(is);
  if (rank > 16) throw IoError("tensor read: implausible rank");
  Tensor t;
  t.shape.resize(rank);
  for (uint32_t i = 0; i < rank; ++i) t.shape[i] = get_u32(is);
  uint8_t tag = 0;
  is.read(reinterpret_cast<char*>(&tag), 1);
  if (!is || tag > 4) throw IoError("tensor read: bad dtype tag");
  t.dtype = static_cast<Dtype>(tag);
  t.bytes.resize(t.count() * dtype_size(t.dtype));
  is.read(reinterpret_cast<char*>(t.bytes.data()), static_cast<std::streamsize>(t.bytes.size()));
  if (!is) throw IoError("tensor read: truncated payload");
  return t;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  f.seekg(0, std::ios::end);
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw IoError("read failed: " + path);
  return bytes;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f << text;
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace tdrl
