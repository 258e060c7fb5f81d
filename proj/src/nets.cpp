#include "tdrl/nets.hpp"

#include <cmath>

namespace tdrl {

void Linear::init(int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  W = rng.uniform_matrix(out, in, -bound, bound);
  b = rng.uniform_matrix(out, 1, -bound, bound).col(0);
  gW = MatrixXd::Zero(out, in);
  gb = VectorXd::Zero(out);
}

MatrixXd Linear::forward(const MatrixXd& x) {
  x_cache_ = x;
  return (x * W.transpose()).rowwise() + b.transpose();
}

MatrixXd Linear::backward(const MatrixXd& dy) {
  gW.noalias() += dy.transpose() * x_cache_;
  gb.noalias() += dy.colwise().sum().transpose();
  return dy * W;
}

void Linear::zero_grad() {
  gW.setZero();
  gb.setZero();
}

void Linear::collect(std::vector<ParamRef>& out) {
  out.push_back({W.data(), gW.data(), W.size(), true});
  out.push_back({b.data(), gb.data(), b.size(), false});
}

void Mlp::init(const std::vector<int>& dims, double slope, uint64_t seed) {
  slope_ = slope;
  layers.clear();
  Rng rng(mix_seed(seed, {0x6d6c70}));
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    Linear lin;
    lin.init(dims[i], dims[i + 1], rng);
    layers.push_back(std::move(lin));
  }
}

MatrixXd Mlp::forward(const MatrixXd& x) {
  pre_act_.assign(layers.size() > 0 ? layers.size() - 1 : 0, MatrixXd());
  MatrixXd h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) {
      pre_act_[i] = h;
      h = h.unaryExpr([&](double v) { return leaky_relu(v, slope_); });
    }
  }
  return h;
}

MatrixXd Mlp::infer(const MatrixXd& x) const {
  MatrixXd h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = ((h * layers[i].W.transpose()).rowwise() + layers[i].b.transpose()).eval();
    if (i + 1 < layers.size()) h = h.unaryExpr([&](double v) { return leaky_relu(v, slope_); });
  }
  return h;
}

MatrixXd Mlp::backward(const MatrixXd& dy) {
  MatrixXd d = dy;
  for (size_t i = layers.size(); i-- > 0;) {
    if (i + 1 < layers.size()) {
      const MatrixXd& a = pre_act_[i];
      d = d.binaryExpr(a, [&](double g, double v) { return v >= 0.0 ? g : slope_ * g; });
    }
    d = layers[i].backward(d);
  }
  return d;
}

void Mlp::zero_grad() {
  for (auto& l : layers) l.zero_grad();
}

void Mlp::collect(std::vector<ParamRef>& out) {
  for (auto& l : layers) l.collect(out);
}

AdamW::AdamW(std::vector<ParamRef> params, double lr, double weight_decay)
    : params_(std::move(params)), lr_(lr), wd_(weight_decay) {
  for (const auto& p : params_) {
    m_.push_back(VectorXd::Zero(p.size));
    v_.push_back(VectorXd::Zero(p.size));
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    Eigen::Map<VectorXd> w(p.value, p.size);
    Eigen::Map<const VectorXd> g(p.grad, p.size);
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const VectorXd mhat = m_[i] / bc1;
    const VectorXd vhat = v_[i] / bc2;
    VectorXd update = mhat.cwiseQuotient(vhat.cwiseSqrt().array().operator+(eps_).matrix());
    if (p.decay) update += wd_ * w;
    w -= lr_ * update;
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) Eigen::Map<VectorXd>(p.grad, p.size).setZero();
}

}  // namespace tdrl
