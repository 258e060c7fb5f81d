// The OpenMP kernels must agree with their serial twins: bit-exact where every
// output element is computed independently, and to tight tolerance for the
// GEMM-backed training step.

#include "doctest.h"
#include "tdrl/condition.hpp"
#include "tdrl/mixing.hpp"
#include "tdrl/parallel.hpp"
#include "tdrl/trainer.hpp"

using namespace tdrl;

namespace {

struct ThreadCapGuard {
  ThreadCapGuard() = default;
  ~ThreadCapGuard() {
    set_thread_cap(0);
    Eigen::setNbThreads(0);
  }
};

}  // namespace

TEST_CASE("simulate: serial and parallel paths are bit-identical") {
  ThreadCapGuard guard;
  GeneratorSpec spec;
  spec.family = Family::changing_dynamics;
  spec.n = 6;
  spec.L = 2;
  spec.T = 40;
  spec.num_seqs = 12;
  spec.m = 3;
  spec.n_fix = 0;
  spec.n_chg = 6;
  spec.seed = 3;
  set_thread_cap(1);
  const auto a = simulate(spec);
  set_thread_cap(0);
  const auto b = simulate(spec);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].domain == b[i].domain);
    CHECK((a[i].z - b[i].z).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("invert_mixing: serial and parallel paths are bit-identical") {
  ThreadCapGuard guard;
  const MixingFunction g = make_random_mixing(6, 3, 5);
  Rng rng(7);
  const MatrixXd x = apply_mixing(g, rng.normal_matrix(4000, 6));
  set_thread_cap(1);
  const MatrixXd za = invert_mixing(g, x);
  set_thread_cap(0);
  const MatrixXd zb = invert_mixing(g, x);
  CHECK((za - zb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("condition rows: serial and parallel paths are bit-identical") {
  ThreadCapGuard guard;
  GeneratorSpec spec;
  spec.family = Family::heteronoise_fixed;
  spec.n = 5;
  spec.L = 1;
  spec.T = 500;
  spec.n_fix = 5;
  const auto traj = simulate_fixed_heteronoise(spec, 9);
  const DensityModel dm = density_from_record(*traj.transition);
  const auto probes = draw_history_probes(traj.z, 1, 24, 11);
  const VectorXd z_t = traj.z.row(42);
  set_thread_cap(1);
  const MatrixXd ra = stationary_condition_rows(dm, z_t, probes, 1e-3);
  set_thread_cap(0);
  const MatrixXd rb = stationary_condition_rows(dm, z_t, probes, 1e-3);
  CHECK((ra - rb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("elbo batch: thread count does not change losses beyond 1e-12") {
  ThreadCapGuard guard;
  GeneratorSpec spec;
  spec.family = Family::heteronoise_fixed;
  spec.n = 4;
  spec.L = 1;
  spec.T = 12;
  spec.num_seqs = 32;
  spec.seed = 13;
  spec.n_fix = 4;
  const Dataset ds = build_dataset(spec);
  ModelConfig mcfg;
  mcfg.n = 4;
  mcfg.L = 1;
  mcfg.n_fix = 4;
  mcfg.n_chg = 0;
  mcfg.n_obs = 0;
  mcfg.obs_dim = 4;
  mcfg.enc_width = 16;
  mcfg.flow_width = 8;
  TdrlModel model = TdrlModel::build(mcfg, 15);
  std::vector<MatrixXd> xs;
  std::vector<const MatrixXd*> ptrs;
  std::vector<int> domains;
  for (int s = 0; s < ds.num_sequences(); ++s) {
    xs.push_back(ds.sequence_x(s));
    domains.push_back(ds.domain_of(s));
  }
  for (const auto& x : xs) ptrs.push_back(&x);
  Rng noise_rng(17);
  const MatrixXd noise = noise_rng.normal_matrix(32 * 12, 4);

  set_thread_cap(1);
  Eigen::setNbThreads(1);
  TdrlModel ma = model;
  ma.zero_grad();
  const LossBreakdown la = ma.elbo_batch(ptrs, domains, mcfg.beta, noise, true);

  set_thread_cap(0);
  Eigen::setNbThreads(max_threads());
  TdrlModel mb = model;
  mb.zero_grad();
  const LossBreakdown lb = mb.elbo_batch(ptrs, domains, mcfg.beta, noise, true);

  CHECK(std::abs(la.total - lb.total) <= 1e-12 * std::max(1.0, std::abs(la.total)));
  CHECK(std::abs(la.recon - lb.recon) <= 1e-12);
  CHECK(std::abs(la.kld - lb.kld) <= 1e-12 * std::max(1.0, std::abs(la.kld)));

  // gradients agree to tight tolerance as well
  auto pa = ma.params();
  auto pb = mb.params();
  for (size_t i = 0; i < pa.size(); ++i)
    for (Eigen::Index j = 0; j < pa[i].size; ++j)
      CHECK(std::abs(pa[i].grad[j] - pb[i].grad[j]) <=
            1e-10 * std::max(1.0, std::abs(pa[i].grad[j])));
}
