#include <cmath>

#include "doctest.h"
#include "support/stats.hpp"
#include "tdrl/generator.hpp"

using namespace tdrl;

namespace {

// quadrature oracle for generalized-normal moments: E[x^k] under
// p(x) ∝ exp(-lambda |x|^beta)
double gn_moment_quadrature(double beta, double lambda, int k) {
  const double R = std::pow(60.0 / lambda, 1.0 / beta);
  const auto density = [&](double x) { return std::exp(-lambda * std::pow(std::abs(x), beta)); };
  const double z = 2.0 * teststat::simpson(density, 0.0, R, 20000);
  const auto integrand = [&](double x) { return std::pow(x, k) * density(x); };
  return 2.0 * teststat::simpson(integrand, 0.0, R, 20000) / z;
}

// identity transition: two hidden layers that pass the lag-1 block through
TransitionNet identity_net(int n, int L) {
  TransitionNet net;
  net.slope = 1.0;  // LeakyReLU with slope 1 is linear
  MatrixXd w1 = MatrixXd::Zero(n, n * L);
  w1.leftCols(n) = MatrixXd::Identity(n, n);
  net.W1.push_back(w1);
  net.W2 = MatrixXd::Identity(n, n);
  net.W3 = MatrixXd::Identity(n, n);
  net.b1 = VectorXd::Zero(n);
  net.b2 = VectorXd::Zero(n);
  net.b3 = VectorXd::Zero(n);
  net.mask = MatrixXd::Ones(n, n * L);
  return net;
}

TransitionNet zero_net(int n, int L) {
  TransitionNet net;
  net.W1.push_back(MatrixXd::Zero(n, n * L));
  net.W2 = MatrixXd::Zero(n, n);
  net.W3 = MatrixXd::Zero(n, n);
  net.b1 = VectorXd::Zero(n);
  net.b2 = VectorXd::Zero(n);
  net.b3 = VectorXd::Zero(n);
  net.mask = MatrixXd::Ones(n, n * L);
  return net;
}

GeneratorSpec basic_spec(Family fam, int n, int L, int T) {
  GeneratorSpec spec;
  spec.family = fam;
  spec.n = n;
  spec.L = L;
  spec.T = T;
  spec.n_fix = n;
  spec.n_chg = 0;
  spec.n_obs = 0;
  if (fam == Family::changing_dynamics) {
    spec.n_fix = 0;
    spec.n_chg = n;
    spec.m = 3;
  }
  return spec;
}

}  // namespace

TEST_CASE("generalized normal: closed-form variance agrees with quadrature, then with samples") {
  // oracle first: the Gamma-moment formula is validated by numeric integration
  for (const auto& [beta, lambda] : std::vector<std::pair<double, double>>{{2.0, 0.5}, {4.0, 1.0}, {2.5, 2.0}}) {
    const double formula = generalized_normal_variance(beta, lambda);
    const double quad = gn_moment_quadrature(beta, lambda, 2);
    CHECK(formula == doctest::Approx(quad).epsilon(1e-6));
  }

  // beta=2, lambda=0.5 is the standard normal: empirical variance within 1%
  const VectorXd x = sample_generalized_normal(2.0, 0.5, 1000000, 123);
  CHECK(generalized_normal_variance(2.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(teststat::variance_of(x) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("generalized normal: symmetric mean and sub-Gaussian kurtosis at beta=4") {
  const int n = 1000000;
  const VectorXd x = sample_generalized_normal(4.0, 1.0, n, 77);
  const double var = teststat::variance_of(x);
  const double se = std::sqrt(var / n);
  CHECK(std::abs(teststat::mean_of(x)) < 3.0 * se);

  const double excess = std::tgamma(5.0 / 4.0) * std::tgamma(1.0 / 4.0) /
                            (std::tgamma(3.0 / 4.0) * std::tgamma(3.0 / 4.0)) -
                        3.0;
  CHECK(excess < 0.0);
  const double m2 = x.array().square().mean();
  const double m4 = x.array().pow(4).mean();
  CHECK(m4 / (m2 * m2) - 3.0 < 0.0);
  // empirical matches the Gamma-moment formula
  CHECK(m4 / (m2 * m2) - 3.0 == doctest::Approx(excess).epsilon(0.05));
}

TEST_CASE("generalized normal rejects bad parameters") {
  CHECK_THROWS_AS(sample_generalized_normal(-1.0, 1.0, 10, 0), ConfigError);
  CHECK_THROWS_AS(sample_generalized_normal(2.5, 0.0, 10, 0), ConfigError);
}

TEST_CASE("generalized normal log-density integrates to one") {
  const double beta = 2.5, lambda = 1.3;
  const double total = teststat::simpson(
      [&](double v) { return std::exp(generalized_normal_log_density(v, beta, lambda)); }, -8.0,
      8.0, 20000);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("heteronoise with zero transition and unit coupling is iid standard normal") {
  const int n = 4, L = 2;
  TransitionRecord rec;
  rec.family = Family::heteronoise_fixed;
  rec.n = n;
  rec.L = L;
  rec.fix_net = zero_net(n, L);
  rec.coupling = CouplingMode::unit;
  rec.noise_sigma = VectorXd::Ones(n);
  rec.adjacency = Adjacency(n, L);

  GeneratorSpec spec = basic_spec(Family::heteronoise_fixed, n, L, 5000);
  const MatrixXd z = sample_path(rec, spec, 0, 99);
  for (int k = 0; k < n; ++k) {
    std::vector<double> col(z.col(k).data(), z.col(k).data() + z.rows());
    CHECK(teststat::ks_test_1sample(col, teststat::normal_cdf) > 0.01);
  }
}

TEST_CASE("heteronoise trajectories are deterministic in (spec, seed)") {
  GeneratorSpec spec = basic_spec(Family::heteronoise_fixed, 8, 2, 1000);
  spec.seed = 7;
  const auto a = simulate_fixed_heteronoise(spec, 7);
  const auto b = simulate_fixed_heteronoise(spec, 7);
  CHECK((a.z - b.z).cwiseAbs().maxCoeff() == 0.0);
  const auto c = simulate_fixed_heteronoise(spec, 8);
  CHECK((a.z - c.z).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("heteronoise has significantly nonzero lagged cross-correlation") {
  GeneratorSpec spec = basic_spec(Family::heteronoise_fixed, 8, 2, 2000);
  const auto traj = simulate_fixed_heteronoise(spec, 3);
  const int T = static_cast<int>(traj.z.rows());
  // bootstrap 95% interval for the largest-|corr| lagged pair
  double best = 0.0;
  int bi = 0, bj = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const double c = teststat::pearson(traj.z.col(i).head(T - 1), traj.z.col(j).tail(T - 1));
      if (std::abs(c) > std::abs(best)) {
        best = c;
        bi = i;
        bj = j;
      }
    }
  Rng rng(5);
  int sign_changes = 0;
  const int B = 200;
  for (int b = 0; b < B; ++b) {
    VectorXd xa(T - 1), xb(T - 1);
    for (int t = 0; t < T - 1; ++t) {
      const int idx = rng.uniform_int(0, T - 2);
      xa(t) = traj.z(idx, bi);
      xb(t) = traj.z(idx + 1, bj);
    }
    if ((teststat::pearson(xa, xb) > 0) != (best > 0)) ++sign_changes;
  }
  // 95% bootstrap interval excludes zero
  CHECK(static_cast<double>(sign_changes) / B < 0.025);
}

TEST_CASE("gaussian additive with identity q and zero noise is a frozen state") {
  const int n = 3, L = 1;
  TransitionRecord rec;
  rec.family = Family::gaussian_additive;
  rec.n = n;
  rec.L = L;
  rec.fix_net = identity_net(n, L);
  rec.noise_sigma = VectorXd::Zero(n);
  rec.adjacency = Adjacency(n, L);
  GeneratorSpec spec = basic_spec(Family::gaussian_additive, n, L, 50);
  spec.burn_in = 0;
  const MatrixXd z = sample_path(rec, spec, 0, 5);
  for (int t = 1; t < 50; ++t) CHECK((z.row(t) - z.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gaussian additive residuals are Gaussian and cross-uncorrelated") {
  GeneratorSpec spec = basic_spec(Family::gaussian_additive, 5, 1, 8000);
  spec.noise.sigma = 0.5;
  const auto traj = simulate_gaussian_additive(spec, 21);
  const auto& rec = *traj.transition;
  const int T = static_cast<int>(traj.z.rows());
  MatrixXd resid(T - 1, 5);
  for (int t = 1; t < T; ++t) {
    VectorXd hist = traj.z.row(t - 1);
    resid.row(t - 1) = traj.z.row(t) - rec.predict_mean(hist).transpose();
  }
  for (int k = 0; k < 5; ++k) {
    const double sd = rec.noise_sigma(k);
    std::vector<double> col;
    for (int t = 0; t < T - 1; ++t) col.push_back(resid(t, k) / sd);
    CHECK(teststat::ks_test_1sample(col, teststat::normal_cdf) > 0.01);
  }
  const double se = 1.0 / std::sqrt(static_cast<double>(T - 1));
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j)
      CHECK(std::abs(teststat::pearson(resid.col(i), resid.col(j))) < 3.0 * se);
}

TEST_CASE("linear non-Gaussian: closed-form recursion, nonzero rows, stable spectrum") {
  // C = 0.5 I without noise decays geometrically
  TransitionRecord rec;
  rec.family = Family::linear_nongaussian;
  rec.n = 3;
  rec.L = 1;
  rec.linear_C = 0.5 * MatrixXd::Identity(3, 3);
  VectorXd z0(3);
  z0 << 1.0, -2.0, 0.5;
  VectorXd z = z0;
  for (int t = 1; t <= 10; ++t) {
    z = rec.predict_mean(z);
    CHECK((z - std::pow(0.5, t) * z0).cwiseAbs().maxCoeff() < 1e-15);
  }

  GeneratorSpec spec = basic_spec(Family::linear_nongaussian, 6, 1, 100);
  spec.noise.beta = 4.0;
  spec.noise.lambda = 1.0;
  const auto traj = simulate_linear_nongaussian(spec, 13);
  const MatrixXd& c = traj.transition->linear_C;
  for (int i = 0; i < 6; ++i) CHECK(c.row(i).cwiseAbs().maxCoeff() >= 0.1);
  CHECK(c.eigenvalues().cwiseAbs().maxCoeff() <= 0.95);
}

TEST_CASE("linear non-Gaussian requires beta > 2 and beta != 3") {
  GeneratorSpec spec = basic_spec(Family::linear_nongaussian, 4, 1, 100);
  spec.noise.beta = 3.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.noise.beta = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.noise.beta = 4.0;
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("changing dynamics: per-domain first layer, shared tail, in-range entries") {
  GeneratorSpec spec = basic_spec(Family::changing_dynamics, 6, 2, 300);
  spec.m = 2;
  const auto trajs = simulate_changing_dynamics(spec, 17);
  REQUIRE(trajs.size() == 2);
  const auto& net = *trajs[0].transition->chg_net;
  REQUIRE(net.W1.size() == 2);
  CHECK((net.W1[0] - net.W1[1]).cwiseAbs().maxCoeff() > 0.0);
  CHECK(net.W1[0].cwiseAbs().maxCoeff() <= 1.0);
  CHECK(net.W1[1].cwiseAbs().maxCoeff() <= 1.0);
  // all other weights are shared by construction: single W2/W3 in the record
  CHECK(trajs[0].transition.get() == trajs[1].transition.get());
}

TEST_CASE("changing dynamics: cross-domain predictive MSE exceeds within-domain") {
  GeneratorSpec spec = basic_spec(Family::changing_dynamics, 6, 1, 3000);
  spec.m = 2;
  const auto trajs = simulate_changing_dynamics(spec, 29);
  const auto& rec = *trajs[0].transition;
  const MatrixXd& z1 = trajs[1].z;  // domain 1 data
  double mse_within = 0.0, mse_cross = 0.0;
  const int T = static_cast<int>(z1.rows());
  for (int t = 1; t < T; ++t) {
    const VectorXd hist = z1.row(t - 1);
    mse_within += (z1.row(t).transpose() - rec.predict_mean(hist, 1)).squaredNorm();
    mse_cross += (z1.row(t).transpose() - rec.predict_mean(hist, 0)).squaredNorm();
  }
  CHECK(mse_cross > mse_within);
}

TEST_CASE("modular: obs block matches domain tables, fix block domain-invariant, obs rows empty") {
  GeneratorSpec spec;
  spec.family = Family::modular;
  spec.n = 9;
  spec.L = 2;
  spec.T = 4000;
  spec.m = 2;
  spec.n_fix = 6;
  spec.n_chg = 2;
  spec.n_obs = 1;
  const auto trajs = simulate_modular(spec, 31);
  const auto& rec = *trajs[0].transition;

  for (int r = 0; r < 2; ++r) {
    const double sample_mean = trajs[static_cast<size_t>(r)].z.col(8).mean();
    const double mean = rec.obs_mean(r, 0);
    const double se = std::sqrt(rec.obs_var(r, 0) / spec.T);
    CHECK(std::abs(sample_mean - mean) < 3.0 * se);
  }

  // fix block: same transition, domain-independent noise distribution
  for (int k = 0; k < 6; ++k) {
    std::vector<double> a(trajs[0].z.col(k).data(), trajs[0].z.col(k).data() + spec.T);
    std::vector<double> b(trajs[1].z.col(k).data(), trajs[1].z.col(k).data() + spec.T);
    CHECK(teststat::ks_test_2sample(a, b) > 0.01);
  }

  const Adjacency& adj = rec.adjacency;
  for (int j = 0; j < 9; ++j)
    for (int tau = 0; tau < 2; ++tau) CHECK(adj.at(8, j, tau) == 0);
  // block structure: nothing outside the fix block parents the fix rows
  for (int i = 0; i < 6; ++i)
    for (int j = 6; j < 9; ++j)
      for (int tau = 0; tau < 2; ++tau) CHECK(adj.at(i, j, tau) == 0);
}

TEST_CASE("noise-independence: residuals against the recorded transition are uncorrelated with parents") {
  GeneratorSpec spec = basic_spec(Family::heteronoise_fixed, 6, 2, 6000);
  spec.edge_density = 0.5;
  const auto traj = simulate_fixed_heteronoise(spec, 41);
  const auto& rec = *traj.transition;
  const int T = static_cast<int>(traj.z.rows());
  const int n = 6, L = 2;
  MatrixXd resid(T - L, n);
  MatrixXd hists(T - L, n * L);
  for (int t = L; t < T; ++t) {
    VectorXd hist(n * L);
    for (int tau = 0; tau < L; ++tau) hist.segment(tau * n, n) = traj.z.row(t - 1 - tau);
    hists.row(t - L) = hist;
    resid.row(t - L) = traj.z.row(t) - rec.predict_mean(hist).transpose();
  }
  const double se = 1.0 / std::sqrt(static_cast<double>(T - L));
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n * L; ++j) {
      if (rec.fix_net->mask(k, j) == 0.0) continue;
      CHECK(std::abs(teststat::pearson(resid.col(k), hists.col(j))) < 3.0 * se);
    }
}

TEST_CASE("heteronoise fix-block is stationary across trajectory halves") {
  GeneratorSpec spec = basic_spec(Family::heteronoise_fixed, 6, 2, 60000);
  const auto traj = simulate_fixed_heteronoise(spec, 53);
  const int T = static_cast<int>(traj.z.rows());
  const int half = T / 2;
  for (int k = 0; k < 6; ++k) {
    const VectorXd a = traj.z.col(k).head(half);
    const VectorXd b = traj.z.col(k).tail(half);
    const double sd = std::sqrt(teststat::variance_of(traj.z.col(k)));
    CHECK(std::abs(teststat::mean_of(a) - teststat::mean_of(b)) <
          std::max(0.05 * std::max(std::abs(teststat::mean_of(a)), std::abs(teststat::mean_of(b))),
                   0.05 * sd));
    const double va = teststat::variance_of(a);
    const double vb = teststat::variance_of(b);
    CHECK(std::abs(va - vb) < 0.05 * std::max(va, vb) + 1e-12);
  }
}

TEST_CASE("spec validation names the offending field") {
  GeneratorSpec spec = basic_spec(Family::heteronoise_fixed, 4, 2, 100);
  spec.n_fix = 3;
  try {
    spec.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("partition") != std::string::npos);
  }
  spec.n_fix = 4;
  spec.T = 2;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("sparse parent masks have nonempty distinct rows and match adjacency") {
  GeneratorSpec spec = basic_spec(Family::heteronoise_fixed, 8, 2, 100);
  spec.edge_density = 0.3;
  const auto rec = make_transition(spec, 5);
  const MatrixXd& mask = rec.fix_net->mask;
  for (int i = 0; i < 8; ++i) {
    CHECK(mask.row(i).sum() >= 1.0);
    for (int j = i + 1; j < 8; ++j) CHECK((mask.row(i) - mask.row(j)).cwiseAbs().sum() > 0.0);
  }
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      for (int tau = 0; tau < 2; ++tau)
        CHECK((rec.adjacency.at(i, j, tau) != 0) == (mask(i, tau * 8 + j) != 0.0));
}

TEST_CASE("transition record JSON round-trip preserves the process exactly") {
  GeneratorSpec spec = basic_spec(Family::heteronoise_fixed, 5, 2, 100);
  spec.edge_density = 0.6;
  const auto rec = make_transition(spec, 77);
  const auto back = TransitionRecord::from_json(nlohmann::json::parse(rec.to_json().dump()));
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd hist = rng.normal_matrix(10, 1).col(0);
    CHECK((rec.predict_mean(hist) - back.predict_mean(hist)).cwiseAbs().maxCoeff() == 0.0);
    for (int k = 0; k < 5; ++k) CHECK(rec.cond_sd(k, hist) == back.cond_sd(k, hist));
  }
}
