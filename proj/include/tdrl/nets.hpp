#pragma once

#include <vector>

#include "tdrl/common.hpp"
#include "tdrl/rng.hpp"

namespace tdrl {

// Flat view of one parameter tensor for the optimizer.
struct ParamRef {
  double* value = nullptr;
  double* grad = nullptr;
  Eigen::Index size = 0;
  bool decay = false;
};

// Fully-connected layer over row-major batches: Y = X * W^T + b.
// forward caches its input; backward accumulates into gW/gb.
class Linear {
 public:
  MatrixXd W;
  VectorXd b;
  MatrixXd gW;
  VectorXd gb;

  void init(int in, int out, Rng& rng);
  MatrixXd forward(const MatrixXd& x);
  MatrixXd backward(const MatrixXd& dy);
  void zero_grad();
  void collect(std::vector<ParamRef>& out);

 private:
  MatrixXd x_cache_;
};

// LeakyReLU MLP with a linear output layer.
class Mlp {
 public:
  std::vector<Linear> layers;

  void init(const std::vector<int>& dims, double slope, uint64_t seed);
  MatrixXd forward(const MatrixXd& x);
  MatrixXd backward(const MatrixXd& dy);
  // forward without touching the gradient caches; safe for concurrent reads
  MatrixXd infer(const MatrixXd& x) const;
  void zero_grad();
  void collect(std::vector<ParamRef>& out);
  double slope() const { return slope_; }

 private:
  std::vector<MatrixXd> pre_act_;
  double slope_ = 0.2;
};

class AdamW {
 public:
  AdamW(std::vector<ParamRef> params, double lr, double weight_decay = 1e-4);
  void step();
  void zero_grad();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  std::vector<ParamRef> params_;
  std::vector<VectorXd> m_, v_;
  double lr_;
  double wd_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace tdrl
