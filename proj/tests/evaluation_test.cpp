#include <cmath>

#include "doctest.h"
#include "support/stats.hpp"
#include "tdrl/evaluation.hpp"
#include "tdrl/rng.hpp"

using namespace tdrl;

TEST_CASE("mcc is 1 for identical inputs and for permuted monotone transforms") {
  Rng rng(1);
  const MatrixXd z = rng.normal_matrix(2000, 5);
  CHECK(mcc(z, z, CorrMode::pearson).mcc == doctest::Approx(1.0).epsilon(1e-12));

  // permuted, component-wise cubed: spearman is monotone-invariant
  MatrixXd est(2000, 5);
  const std::vector<int> perm = {3, 0, 4, 1, 2};
  for (int j = 0; j < 5; ++j) est.col(perm[static_cast<size_t>(j)]) = z.col(j).array().cube();
  const MCCReport rep = mcc(z, est, CorrMode::spearman);
  CHECK(rep.mcc == doctest::Approx(1.0).epsilon(1e-12));
  for (int j = 0; j < 5; ++j) CHECK(rep.assignment[static_cast<size_t>(j)] == perm[static_cast<size_t>(j)]);
}

TEST_CASE("mcc of independent noise stays small") {
  Rng rng(2);
  const MatrixXd a = rng.normal_matrix(10000, 6);
  const MatrixXd b = rng.normal_matrix(10000, 6);
  CHECK(mcc(a, b, CorrMode::pearson).mcc < 0.3);
}

TEST_CASE("mcc with one component equals the absolute correlation") {
  Rng rng(3);
  const MatrixXd a = rng.normal_matrix(500, 1);
  MatrixXd b = -0.8 * a + 0.2 * rng.normal_matrix(500, 1);
  const double r = std::abs(teststat::pearson(a.col(0), b.col(0)));
  CHECK(mcc(a, b, CorrMode::pearson).mcc == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("mcc invariances: permutation and positive rescaling") {
  Rng rng(4);
  const MatrixXd z = rng.normal_matrix(1500, 4);
  MatrixXd perm(1500, 4);
  perm.col(0) = z.col(2);
  perm.col(1) = z.col(0);
  perm.col(2) = z.col(3);
  perm.col(3) = z.col(1);
  CHECK(mcc(z, perm, CorrMode::pearson).mcc == doctest::Approx(1.0).epsilon(1e-12));

  MatrixXd est = 0.3 * z + 0.1 * rng.normal_matrix(1500, 4);
  const double base = mcc(z, est, CorrMode::pearson).mcc;
  MatrixXd scaled = est;
  for (int j = 0; j < 4; ++j) scaled.col(j) *= (j + 1) * 2.0;
  CHECK(mcc(z, scaled, CorrMode::pearson).mcc == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("constant columns are scored as zero with a warning") {
  Rng rng(5);
  MatrixXd a = rng.normal_matrix(400, 3);
  MatrixXd b = a;
  b.col(1).setConstant(2.5);
  const MCCReport rep = mcc(a, b, CorrMode::pearson);
  CHECK(!rep.degenerate_columns.empty());
  for (int i = 0; i < 3; ++i) CHECK(rep.corr(i, 1) == 0.0);
}

TEST_CASE("assignment solver equals brute force over random instances") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;  // n in 2..6
    const MatrixXd a = rng.normal_matrix(10 * n + 40, n);
    MatrixXd mix = rng.normal_matrix(n, n);
    const MatrixXd b = a * mix + 0.5 * rng.normal_matrix(10 * n + 40, n);
    const MCCReport rep = mcc(a, b, CorrMode::pearson);
    const double brute = brute_force_mcc(a, b, CorrMode::pearson);
    CHECK(rep.mcc == doctest::Approx(brute).epsilon(1e-12));
  }
  CHECK_THROWS_AS(brute_force_mcc(MatrixXd::Zero(100, 9), MatrixXd::Zero(100, 9), CorrMode::pearson),
                  ConfigError);
}

TEST_CASE("rank transform averages ties") {
  VectorXd v(5);
  v << 3.0, 1.0, 3.0, 2.0, 3.0;
  const VectorXd r = rank_transform(v);
  CHECK(r(1) == 1.0);
  CHECK(r(3) == 2.0);
  CHECK(r(0) == doctest::Approx(4.0));
  CHECK(r(2) == doctest::Approx(4.0));
  CHECK(r(4) == doctest::Approx(4.0));
}

TEST_CASE("hier_prox solves the penalized projection (grid-search oracle)") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double v = rng.normal() * 2.0;
    VectorXd u = rng.normal_matrix(4, 1).col(0) * 2.0;
    const double lambda = rng.uniform(0.0, 1.0);
    const double M = rng.uniform(0.5, 10.0);
    double b;
    VectorXd w;
    hier_prox(v, u, lambda, M, b, w);

    // feasibility
    CHECK(w.cwiseAbs().maxCoeff() <= M * std::abs(b) + 1e-12);

    auto objective = [&](double cap) {
      // optimal (b, W) at a given cap M|b| = cap
      const double bb = cap / M;
      double obj = 0.5 * (bb - std::abs(v)) * (bb - std::abs(v)) + lambda * bb;
      for (int i = 0; i < 4; ++i) {
        const double excess = std::max(std::abs(u(i)) - cap, 0.0);
        obj += 0.5 * excess * excess;
      }
      return obj;
    };
    const double got = objective(M * std::abs(b));
    double best = 1e300;
    const double hi = u.cwiseAbs().maxCoeff() + M * (std::abs(v) + 1.0) + 1.0;
    for (double cap = 0.0; cap <= hi; cap += hi / 20000.0) best = std::min(best, objective(cap));
    CHECK(got <= best + 1e-6);
  }
}

namespace {

std::vector<MatrixXd> copy_lag_sequences(uint64_t seed) {
  // z_{t,0} = z_{t-1,2}; remaining components are fresh noise
  Rng rng(seed);
  std::vector<MatrixXd> seqs;
  for (int s = 0; s < 4; ++s) {
    MatrixXd z = rng.normal_matrix(600, 3);
    for (int t = 1; t < 600; ++t) z(t, 0) = z(t - 1, 2);
    seqs.push_back(z);
  }
  return seqs;
}

}  // namespace

TEST_CASE("skeleton: an exactly copied lag dominates the path; noise targets die early") {
  SkeletonOptions opts;
  opts.dense_iters = 150;
  opts.path_iters = 60;
  opts.max_samples = 2000;
  const SkeletonReport rep = recover_skeleton(copy_lag_sequences(8), 1, opts);

  // target 0 depends exactly on lagged component 2
  int argmax = -1;
  double best = -1.0;
  for (int j = 0; j < 3; ++j)
    if (rep.scores(0, j) > best) {
      best = rep.scores(0, j);
      argmax = j;
    }
  CHECK(argmax == 2);
  CHECK(rep.scores(0, 2) > 10.0 * std::max(rep.scores(0, 0), rep.scores(0, 1)));
  CHECK(rep.est_adjacency.at(0, 2, 0) == 1);

  // noise targets: no feature survives past the knee
  for (int j = 0; j < 3; ++j) CHECK(rep.est_adjacency.at(1, j, 0) == 0);
}

TEST_CASE("skeleton recovery reaches F1 >= 0.8 on sparse heteronoise ground truth") {
  GeneratorSpec spec;
  spec.family = Family::heteronoise_fixed;
  spec.n = 6;
  spec.L = 1;
  spec.T = 12000;
  spec.n_fix = 6;
  spec.edge_density = 0.35;
  const auto traj = simulate_fixed_heteronoise(spec, 9);
  SkeletonOptions opts;
  opts.dense_iters = 200;
  opts.path_iters = 80;
  opts.max_samples = 6000;
  const SkeletonReport rep = recover_skeleton({traj.z}, 1, opts);
  std::vector<int> identity = {0, 1, 2, 3, 4, 5};
  const double f1 = compare_skeleton(rep.est_adjacency, traj.adjacency(), identity);
  CHECK(f1 >= 0.8);
}

TEST_CASE("compare_skeleton: exact match, complement, direct-count oracle") {
  Rng rng(10);
  const int n = 5, L = 2;
  Adjacency truth(n, L);
  for (auto& v : truth.data) v = rng.uniform() < 0.3 ? 1 : 0;
  std::vector<int> identity = {0, 1, 2, 3, 4};

  CHECK(compare_skeleton(truth, truth, identity) == doctest::Approx(1.0));

  Adjacency complement = truth;
  for (auto& v : complement.data) v = v ? 0 : 1;
  Adjacency all_true(n, L);
  for (auto& v : all_true.data) v = 1;
  CHECK(compare_skeleton(complement, truth, identity) <
        compare_skeleton(all_true, truth, identity));

  // random estimate at density 0.5: F1 equals the directly counted value
  Adjacency est(n, L);
  for (auto& v : est.data) v = rng.uniform() < 0.5 ? 1 : 0;
  long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < truth.data.size(); ++i) {
    if (truth.data[i] && est.data[i]) ++tp;
    if (!truth.data[i] && est.data[i]) ++fp;
    if (truth.data[i] && !est.data[i]) ++fn;
  }
  const double expected = 2.0 * tp / (2.0 * tp + fp + fn);
  CHECK(compare_skeleton(est, truth, identity) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(compare_skeleton(est, truth, std::vector<int>{0, 1}), ConfigError);
}

TEST_CASE("compare_skeleton is invariant to consistent relabeling") {
  Rng rng(11);
  const int n = 4, L = 1;
  Adjacency truth(n, L), est(n, L);
  for (auto& v : truth.data) v = rng.uniform() < 0.4 ? 1 : 0;
  for (auto& v : est.data) v = rng.uniform() < 0.4 ? 1 : 0;
  std::vector<int> identity = {0, 1, 2, 3};
  const double base = compare_skeleton(est, truth, identity);

  const std::vector<int> perm = {2, 0, 3, 1};  // est' component perm[i] = est component i
  Adjacency relabeled(n, L);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      relabeled.at(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)], 0) = est.at(i, j, 0);
  CHECK(compare_skeleton(relabeled, truth, perm) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("recover_skeleton validates inputs") {
  Rng rng(12);
  const MatrixXd tiny = rng.normal_matrix(10, 3);
  CHECK_THROWS_AS(recover_skeleton({tiny}, 1), ConfigError);
}
