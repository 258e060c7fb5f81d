#pragma once

#include <string>

#include "tdrl/generator.hpp"
#include "tdrl/mixing.hpp"
#include "tdrl/tensor_io.hpp"

namespace tdrl {

// A generated dataset directory: manifest.json plus payload.bin holding the
// tensor records (x, z, u, adjacency) at recorded offsets with per-payload
// checksums. The manifest embeds the generator spec, the mixing weights and
// the sampled transition record so datasets are self-describing.
struct Dataset {
  GeneratorSpec spec;
  MixingFunction mixing;
  TransitionRecord transition;
  Tensor x;          // [S, T, n] f64 observations
  Tensor z;          // [S, T, n] f64 ground-truth latents
  Tensor u;          // [S] i32 domain label per sequence
  Tensor adjacency;  // [n, n, L] u8

  int num_sequences() const { return static_cast<int>(x.shape[0]); }
  int seq_len() const { return static_cast<int>(x.shape[1]); }
  int dim() const { return static_cast<int>(x.shape[2]); }

  MatrixXd sequence_x(int s) const;
  MatrixXd sequence_z(int s) const;
  int domain_of(int s) const { return u.i32()[s]; }
};

constexpr int kDatasetFormatVersion = 1;

Dataset build_dataset(const GeneratorSpec& spec, int mixing_depth = 3);

void write_dataset(const Dataset& ds, const std::string& dir);
Dataset read_dataset(const std::string& dir);

// Pack container for checkpoints: one file holding a JSON meta document plus
// named tensor records.
struct Pack {
  nlohmann::ordered_json meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& get(const std::string& name) const;
};

void write_pack(const Pack& pack, const std::string& path);
Pack read_pack(const std::string& path);

}  // namespace tdrl
