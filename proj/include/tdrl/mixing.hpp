#pragma once

#include <vector>

#include "json.hpp"
#include "tdrl/common.hpp"

namespace tdrl {

// Invertible LeakyReLU MLP from latents to observations. Each layer is
// y = lrelu(W h + b); weights are orthogonal-times-diagonal so every layer
// keeps its singular values in [0.5, 2] and the map stays well conditioned.
struct MixingFunction {
  std::vector<MatrixXd> W;
  std::vector<VectorXd> b;
  double slope = 0.2;

  int depth() const { return static_cast<int>(W.size()); }
  int dim() const { return static_cast<int>(W.front().rows()); }

  nlohmann::ordered_json to_json() const;
  static MixingFunction from_json(const nlohmann::json& j);
};

MixingFunction make_random_mixing(int n, int depth, uint64_t seed);

// Row-wise application to a T x n latent matrix.
MatrixXd apply_mixing(const MixingFunction& g, const MatrixXd& z);

// Exact layer-wise inverse: inverse LeakyReLU, then solve the linear system.
MatrixXd invert_mixing(const MixingFunction& g, const MatrixXd& x);

}  // namespace tdrl
