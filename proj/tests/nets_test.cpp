#include <cmath>

#include "doctest.h"
#include "tdrl/nets.hpp"

using namespace tdrl;

namespace {

// scalar loss for gradient checking: sum of squares of the MLP output
double loss_of(Mlp& mlp, const MatrixXd& x) {
  const MatrixXd y = mlp.forward(x);
  return y.squaredNorm();
}

}  // namespace

TEST_CASE("linear layer backward matches finite differences") {
  Rng rng(1);
  Linear lin;
  lin.init(3, 2, rng);
  const MatrixXd x = rng.normal_matrix(5, 3);
  const MatrixXd y = lin.forward(x);
  lin.zero_grad();
  lin.backward(2.0 * y);  // d/dW of ||y||^2

  const double h = 1e-6;
  for (int i = 0; i < lin.W.rows(); ++i)
    for (int j = 0; j < lin.W.cols(); ++j) {
      Linear pert = lin;
      pert.W(i, j) += h;
      const double up = pert.forward(x).squaredNorm();
      pert.W(i, j) -= 2 * h;
      const double dn = pert.forward(x).squaredNorm();
      CHECK(lin.gW(i, j) == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("mlp backward matches finite differences through LeakyReLU layers") {
  Mlp mlp;
  mlp.init({3, 6, 6, 2}, 0.2, 7);
  Rng rng(2);
  const MatrixXd x = rng.normal_matrix(4, 3);
  const MatrixXd y = mlp.forward(x);
  mlp.zero_grad();
  const MatrixXd dx = mlp.backward(2.0 * y);

  std::vector<ParamRef> params;
  mlp.collect(params);
  const double h = 1e-6;
  for (auto& p : params)
    for (Eigen::Index i = 0; i < p.size; ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + h;
      const double up = loss_of(mlp, x);
      p.value[i] = orig - h;
      const double dn = loss_of(mlp, x);
      p.value[i] = orig;
      const double fd = (up - dn) / (2 * h);
      CHECK(p.grad[i] == doctest::Approx(fd).epsilon(1e-4));
    }

  // input gradient as well
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) {
      MatrixXd xp = x, xm = x;
      xp(r, c) += h;
      xm(r, c) -= h;
      const double fd = (loss_of(mlp, xp) - loss_of(mlp, xm)) / (2 * h);
      CHECK(dx(r, c) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("infer matches forward and leaves caches untouched") {
  Mlp mlp;
  mlp.init({4, 8, 3}, 0.2, 11);
  Rng rng(3);
  const MatrixXd x = rng.normal_matrix(6, 4);
  const MatrixXd a = mlp.forward(x);
  const MatrixXd b = mlp.infer(x);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("AdamW descends a quadratic and decays weights") {
  // minimize ||W x - t||^2 for fixed x, t
  Rng rng(5);
  Linear lin;
  lin.init(4, 3, rng);
  const MatrixXd x = rng.normal_matrix(16, 4);
  const MatrixXd t = rng.normal_matrix(16, 3);
  std::vector<ParamRef> params;
  lin.collect(params);
  AdamW opt(params, 0.01, 0.0);
  double prev = 1e300;
  for (int it = 0; it < 200; ++it) {
    lin.zero_grad();
    const MatrixXd y = lin.forward(x);
    const double loss = (y - t).squaredNorm();
    lin.backward(2.0 * (y - t));
    opt.step();
    if (it % 50 == 49) {
      CHECK(loss < prev);
      prev = loss;
    }
  }

  // pure decay shrinks weights when gradients are zero
  Linear lin2;
  lin2.init(2, 2, rng);
  lin2.zero_grad();
  std::vector<ParamRef> p2;
  lin2.collect(p2);
  const double before = lin2.W.cwiseAbs().sum();
  AdamW opt2(p2, 0.1, 0.5);
  opt2.step();
  CHECK(lin2.W.cwiseAbs().sum() < before);
}

TEST_CASE("mlp initialization is deterministic in the seed") {
  Mlp a, b;
  a.init({3, 5, 2}, 0.2, 9);
  b.init({3, 5, 2}, 0.2, 9);
  CHECK((a.layers[0].W - b.layers[0].W).cwiseAbs().maxCoeff() == 0.0);
  Mlp c;
  c.init({3, 5, 2}, 0.2, 10);
  CHECK((a.layers[0].W - c.layers[0].W).cwiseAbs().maxCoeff() > 0.0);
}
