#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tdrl {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Exit-code contract: 0 success, 2 config/validation, 3 IO, 4 numerical failure.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 2;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 3;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 4;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }

inline double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }
inline double leaky_relu_inv(double y, double slope) { return y >= 0.0 ? y : y / slope; }

}  // namespace tdrl
