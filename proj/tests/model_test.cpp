#include <cmath>

#include "doctest.h"
#include "support/stats.hpp"
#include "tdrl/model.hpp"
#include "tdrl/trainer.hpp"

using namespace tdrl;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.n = 3;
  cfg.L = 1;
  cfg.n_fix = 1;
  cfg.n_chg = 1;
  cfg.n_obs = 1;
  cfg.m = 2;
  cfg.obs_dim = 3;
  cfg.enc_width = 8;
  cfg.flow_width = 8;
  cfg.theta_dyn_dim = 2;
  cfg.theta_obs_dim = 2;
  return cfg;
}

// force a component's flow to output constant (a, t) regardless of conditioning
void force_constant_flow(TdrlModel& model, int k, double a, double t) {
  auto& flow = model.flows[static_cast<size_t>(k)];
  for (auto& layer : flow.layers) {
    layer.W.setZero();
    layer.b.setZero();
  }
  flow.layers.back().b(0) = a;
  flow.layers.back().b(1) = t;
}

}  // namespace

TEST_CASE("encode factorizes over time steps") {
  ModelConfig cfg = tiny_config();
  TdrlModel model = TdrlModel::build(cfg, 1);
  Rng rng(2);
  const MatrixXd x = rng.normal_matrix(6, 3);
  const PosteriorStats stats = model.encode(x);

  // permuting rows permutes stats identically
  MatrixXd xp(6, 3);
  const std::vector<int> perm = {3, 1, 5, 0, 2, 4};
  for (int i = 0; i < 6; ++i) xp.row(i) = x.row(perm[static_cast<size_t>(i)]);
  const PosteriorStats sp = model.encode(xp);
  for (int i = 0; i < 6; ++i) {
    CHECK((sp.mu.row(i) - stats.mu.row(perm[static_cast<size_t>(i)])).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sp.log_var.row(i) - stats.log_var.row(perm[static_cast<size_t>(i)])).cwiseAbs().maxCoeff() == 0.0);
  }

  // duplicated rows give duplicated stats
  MatrixXd xd = x;
  xd.row(5) = xd.row(0);
  const PosteriorStats sd = model.encode(xd);
  CHECK((sd.mu.row(5) - sd.mu.row(0)).cwiseAbs().maxCoeff() == 0.0);

  // clamp bounds hold even for extreme inputs
  const PosteriorStats se = model.encode(1e6 * x);
  CHECK(se.log_var.maxCoeff() <= cfg.logvar_clip);
  CHECK(se.log_var.minCoeff() >= -cfg.logvar_clip);
}

TEST_CASE("reparameterized sampling identities") {
  PosteriorStats stats;
  Rng rng(3);
  stats.mu = rng.normal_matrix(4, 2);
  stats.log_var = rng.normal_matrix(4, 2);

  CHECK((reparameterized_sample(stats, MatrixXd::Zero(4, 2)) - stats.mu).cwiseAbs().maxCoeff() == 0.0);

  PosteriorStats unit;
  unit.mu = stats.mu;
  unit.log_var = MatrixXd::Zero(4, 2);
  CHECK((reparameterized_sample(unit, MatrixXd::Ones(4, 2)) - (stats.mu.array() + 1.0).matrix())
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // empirical variance of many draws matches exp(log_var) within 2%
  const int draws = 100000;
  MatrixXd acc = MatrixXd::Zero(4, 2), acc2 = MatrixXd::Zero(4, 2);
  for (int d = 0; d < draws; ++d) {
    const MatrixXd z = reparameterized_sample(stats, rng.normal_matrix(4, 2));
    acc += z;
    acc2 += z.cwiseProduct(z);
  }
  const MatrixXd mean = acc / draws;
  const MatrixXd var = acc2 / draws - mean.cwiseProduct(mean);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(var(i, j) == doctest::Approx(std::exp(stats.log_var(i, j))).epsilon(0.02));

  CHECK_THROWS_AS(reparameterized_sample(stats, MatrixXd::Zero(3, 2)), ConfigError);
}

TEST_CASE("decode is per-step and finite") {
  TdrlModel model = TdrlModel::build(tiny_config(), 5);
  Rng rng(7);
  const MatrixXd z = rng.normal_matrix(5, 3);
  const MatrixXd x = model.decode(z);
  CHECK(x.allFinite());
  MatrixXd z2 = z;
  z2.row(3) += VectorXd::Ones(3).transpose();
  const MatrixXd x2 = model.decode(z2);
  CHECK((x2.row(0) - x.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((x2.row(3) - x.row(3)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("identity flow gives standard-normal prior with zero Jacobian") {
  ModelConfig cfg = tiny_config();
  TdrlModel model = TdrlModel::build(cfg, 9);
  for (int k = 0; k < 3; ++k) force_constant_flow(model, k, 0.0, 0.0);
  Rng rng(11);
  const MatrixXd z = rng.normal_matrix(6, 3);
  const PriorOutput out = model.prior_log_density(z, 0);
  CHECK((out.eps_hat - z.bottomRows(5)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.log_jac.cwiseAbs().maxCoeff() == 0.0);
  for (int r = 0; r < 5; ++r) {
    double expect = 0.0;
    for (int k = 0; k < 3; ++k) expect += -0.5 * kLog2Pi - 0.5 * z(r + 1, k) * z(r + 1, k);
    CHECK(out.log_prior(r) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("scaling flow shifts the log-density by log|a| and stays normalized") {
  ModelConfig cfg = tiny_config();
  TdrlModel model = TdrlModel::build(cfg, 13);
  const double a0 = 1.7;
  for (int k = 0; k < 3; ++k) force_constant_flow(model, k, std::log(a0), 0.0);
  Rng rng(15);
  const MatrixXd z = rng.normal_matrix(4, 3);
  const PriorOutput out = model.prior_log_density(z, 0);
  for (int r = 0; r < 3; ++r) {
    double expect = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double s = a0 * z(r + 1, k);
      expect += -0.5 * kLog2Pi - 0.5 * s * s + std::log(a0);
    }
    CHECK(out.log_prior(r) == doctest::Approx(expect).epsilon(1e-12));
  }

  // the per-component conditional density integrates to one
  const double total = teststat::simpson(
      [&](double v) {
        const double eps = a0 * v;
        return std::exp(-0.5 * kLog2Pi - 0.5 * eps * eps + std::log(a0));
      },
      -10.0, 10.0, 20000);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("component flows are normalized densities under random conditioning") {
  ModelConfig cfg = tiny_config();
  TdrlModel model = TdrlModel::build(cfg, 17);
  Rng rng(19);
  for (int k = 0; k < 3; ++k) {
    const VectorXd z_hx = rng.normal_matrix(cfg.n * cfg.L, 1).col(0);
    const auto [a, t] = model.component_flow(k, z_hx, 1);
    const double total = teststat::simpson(
        [&](double v) {
          const double eps = std::exp(a) * v + t;
          return std::exp(-0.5 * kLog2Pi - 0.5 * eps * eps + a);
        },
        -40.0, 40.0, 40000);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("log_prior is the exact sum of component terms (bookkeeping identity)") {
  TdrlModel model = TdrlModel::build(tiny_config(), 21);
  Rng rng(23);
  const MatrixXd z = rng.normal_matrix(7, 3);
  const PriorOutput out = model.prior_log_density(z, 1);
  for (int r = 0; r < out.log_prior.size(); ++r) {
    double sum = 0.0;
    for (int k = 0; k < 3; ++k)
      sum += -0.5 * kLog2Pi - 0.5 * out.eps_hat(r, k) * out.eps_hat(r, k) + out.log_jac(r, k);
    CHECK(out.log_prior(r) == doctest::Approx(sum).epsilon(1e-14));
  }
}

TEST_CASE("exact Jacobian diagonal matches finite differences") {
  TdrlModel model = TdrlModel::build(tiny_config(), 25);
  Rng rng(27);
  const MatrixXd z = rng.normal_matrix(5, 3);
  const PriorOutput out = model.prior_log_density(z, 0);
  const double h = 1e-6;
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 3; ++k) {
      MatrixXd zp = z, zm = z;
      zp(r + 1, k) += h;
      zm(r + 1, k) -= h;
      const double ep = model.prior_log_density(zp, 0).eps_hat(r, k);
      const double em = model.prior_log_density(zm, 0).eps_hat(r, k);
      const double fd = (ep - em) / (2 * h);
      const double exact = std::exp(out.log_jac(r, k));
      CHECK(std::abs(fd - exact) <= 1e-5 * std::max(1.0, std::abs(exact)));
    }
}

TEST_CASE("prior depends on the domain only through the change-factor rows") {
  ModelConfig cfg = tiny_config();
  TdrlModel model = TdrlModel::build(cfg, 29);
  Rng rng(31);
  const MatrixXd z = rng.normal_matrix(6, 3);
  const PriorOutput out0 = model.prior_log_density(z, 0);
  const PriorOutput out1 = model.prior_log_density(z, 1);
  CHECK((out0.log_prior - out1.log_prior).cwiseAbs().maxCoeff() > 0.0);

  // swapping theta rows swaps the outputs exactly
  model.theta_dyn.row(0).swap(model.theta_dyn.row(1));
  model.theta_obs.row(0).swap(model.theta_obs.row(1));
  const PriorOutput swapped0 = model.prior_log_density(z, 0);
  const PriorOutput swapped1 = model.prior_log_density(z, 1);
  CHECK((swapped0.log_prior - out1.log_prior).cwiseAbs().maxCoeff() == 0.0);
  CHECK((swapped1.log_prior - out0.log_prior).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(model.prior_log_density(z, 5), ConfigError);
}

TEST_CASE("standard-normal prior mode ignores history entirely") {
  ModelConfig cfg = tiny_config();
  cfg.prior_mode = PriorMode::standard_normal;
  TdrlModel model = TdrlModel::build(cfg, 33);
  Rng rng(35);
  MatrixXd z = rng.normal_matrix(6, 3);
  const PriorOutput a = model.prior_log_density(z, 0);
  z.topRows(1).setConstant(100.0);  // history change must not matter
  const PriorOutput b = model.prior_log_density(z, 0);
  CHECK((a.log_prior - b.log_prior).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.log_jac.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("every ELBO parameter gradient matches central finite differences") {
  ModelConfig cfg = tiny_config();
  TdrlModel model = TdrlModel::build(cfg, 37);
  Rng rng(39);
  const int T = 5, B = 2;
  std::vector<MatrixXd> xs;
  for (int b = 0; b < B; ++b) xs.push_back(rng.normal_matrix(T, 3));
  std::vector<const MatrixXd*> ptrs = {&xs[0], &xs[1]};
  const std::vector<int> domains = {0, 1};
  const MatrixXd noise = rng.normal_matrix(B * T, 3);
  const double beta = 0.05;

  model.zero_grad();
  model.elbo_batch(ptrs, domains, beta, noise, true);

  // copy analytic grads, then sweep every parameter with the same fixed noise
  std::vector<ParamRef> params = model.params();
  std::vector<VectorXd> analytic;
  for (auto& p : params) analytic.push_back(Eigen::Map<VectorXd>(p.grad, p.size));

  int checked = 0, total = 0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    for (Eigen::Index i = 0; i < p.size; ++i) {
      ++total;
      const double orig = p.value[i];
      const double h = 1e-5 * (1.0 + std::abs(orig));
      p.value[i] = orig + h;
      const double up = model.elbo_batch(ptrs, domains, beta, noise, false).total;
      p.value[i] = orig - h;
      const double dn = model.elbo_batch(ptrs, domains, beta, noise, false).total;
      p.value[i] = orig;
      const double fd = (up - dn) / (2 * h);
      const double an = analytic[pi](i);
      const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
      CHECK(err < 1e-4);
      ++checked;
    }
  }
  CHECK(checked == total);
}

TEST_CASE("checkpoint pack round-trip restores the model exactly") {
  ModelConfig cfg = tiny_config();
  TdrlModel model = TdrlModel::build(cfg, 41);
  Rng rng(43);
  const MatrixXd z = rng.normal_matrix(6, 3);
  const PriorOutput before = model.prior_log_density(z, 1);
  const Pack pack = model.to_pack();
  TdrlModel restored = TdrlModel::from_pack(pack);
  const PriorOutput after = restored.prior_log_density(z, 1);
  CHECK((before.log_prior - after.log_prior).cwiseAbs().maxCoeff() == 0.0);
  const MatrixXd x = rng.normal_matrix(6, 3);
  CHECK((model.encode(x).mu - restored.encode(x).mu).cwiseAbs().maxCoeff() == 0.0);
}
