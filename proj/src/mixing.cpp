#include "tdrl/mixing.hpp"

#include "tdrl/parallel.hpp"
#include "tdrl/rng.hpp"

namespace tdrl {

namespace {

constexpr uint64_t kSaltMixing = 0x6d6978;

nlohmann::ordered_json matrix_to_json(const MatrixXd& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.size();
  const auto cols = rows ? j.at(0).size() : 0;
  MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i)
    for (size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j.at(i).at(c).get<double>();
  return m;
}

}  // namespace

nlohmann::ordered_json MixingFunction::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (int l = 0; l < depth(); ++l) {
    nlohmann::ordered_json layer;
    layer["W"] = matrix_to_json(W[l]);
    nlohmann::ordered_json bias = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < b[l].size(); ++i) bias.push_back(b[l](i));
    layer["b"] = std::move(bias);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  j["slope"] = slope;
  return j;
}

MixingFunction MixingFunction::from_json(const nlohmann::json& j) {
  MixingFunction g;
  for (const auto& layer : j.at("layers")) {
    g.W.push_back(matrix_from_json(layer.at("W")));
    const auto& bias = layer.at("b");
    VectorXd b(bias.size());
    for (size_t i = 0; i < bias.size(); ++i) b(static_cast<Eigen::Index>(i)) = bias.at(i).get<double>();
    g.b.push_back(b);
  }
  g.slope = j.at("slope").get<double>();
  return g;
}

MixingFunction make_random_mixing(int n, int depth, uint64_t seed) {
  require(n >= 1, "make_random_mixing: n must be >= 1");
  require(depth >= 1, "make_random_mixing: depth must be >= 1");
  Rng rng(mix_seed(seed, {kSaltMixing}));
  MixingFunction g;
  for (int l = 0; l < depth; ++l) {
    const MatrixXd q = random_orthogonal(n, rng);
    VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = rng.uniform(0.5, 2.0);
    g.W.push_back(q * d.asDiagonal());
    VectorXd bias(n);
    for (int i = 0; i < n; ++i) bias(i) = rng.uniform(-0.1, 0.1);
    g.b.push_back(bias);
  }
  // invariants are construction-guaranteed; keep a cheap sanity check
  for (const auto& w : g.W) {
    Eigen::JacobiSVD<MatrixXd> svd(w);
    const double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
    if (!(cond <= 1e4)) throw NumericalError("make_random_mixing: ill-conditioned layer");
  }
  return g;
}

MatrixXd apply_mixing(const MixingFunction& g, const MatrixXd& z) {
  require(z.cols() == g.dim(), "apply_mixing: column count must equal mixing dimension");
  MatrixXd h = z;
  for (int l = 0; l < g.depth(); ++l) {
    h = (h * g.W[l].transpose()).rowwise() + g.b[l].transpose();
    h = h.unaryExpr([&](double v) { return leaky_relu(v, g.slope); });
  }
  if (!h.allFinite()) throw NumericalError("apply_mixing: non-finite output");
  return h;
}

MatrixXd invert_mixing(const MixingFunction& g, const MatrixXd& x) {
  require(x.cols() == g.dim(), "invert_mixing: column count must equal mixing dimension");
  MatrixXd h = x;
  for (int l = g.depth() - 1; l >= 0; --l) {
    h = h.unaryExpr([&](double v) { return leaky_relu_inv(v, g.slope); });
    h.rowwise() -= g.b[l].transpose();
    Eigen::PartialPivLU<MatrixXd> lu(g.W[l]);
    MatrixXd solved(h.rows(), h.cols());
    parallel_for(h.rows(), [&](std::ptrdiff_t i) {
      solved.row(i) = lu.solve(h.row(i).transpose()).transpose();
    });
    h = std::move(solved);
  }
  if (!h.allFinite()) throw NumericalError("invert_mixing: non-finite output");
  return h;
}

}  // namespace tdrl
