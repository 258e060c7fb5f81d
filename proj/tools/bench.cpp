// Compares the serial and OpenMP paths of the heavy kernels on representative
// sizes and reports speedup plus max deviation between the two results.

#include <chrono>
#include <cstdio>
#include <functional>

#include "tdrl/condition.hpp"
#include "tdrl/dataset.hpp"
#include "tdrl/evaluation.hpp"
#include "tdrl/mixing.hpp"
#include "tdrl/parallel.hpp"
#include "tdrl/trainer.hpp"

using namespace tdrl;

namespace {

double time_of(const std::function<void()>& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double t_serial, double t_parallel, double deviation) {
  std::printf("%-28s %10.4f s %10.4f s %8.2fx %12.3e\n", name, t_serial, t_parallel,
              t_serial / t_parallel, deviation);
}

}  // namespace

int main() {
  const int threads = max_threads();
  std::printf("threads: serial=1 parallel=%d\n", threads);
  std::printf("%-28s %12s %12s %9s %12s\n", "kernel", "serial", "parallel", "speedup", "max |diff|");

  // sequence simulation
  {
    GeneratorSpec spec;
    spec.family = Family::heteronoise_fixed;
    spec.n = 8;
    spec.L = 2;
    spec.T = 50;
    spec.num_seqs = 400;
    spec.seed = 7;
    std::vector<LatentTrajectory> a, b;
    set_thread_cap(1);
    const double ts = time_of([&] { a = simulate(spec); });
    set_thread_cap(0);
    const double tp = time_of([&] { b = simulate(spec); });
    double dev = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
      dev = std::max(dev, (a[i].z - b[i].z).cwiseAbs().maxCoeff());
    row("simulate (heteronoise)", ts, tp, dev);
  }

  // mixing inversion
  {
    const MixingFunction g = make_random_mixing(8, 3, 3);
    Rng rng(5);
    const MatrixXd z = rng.normal_matrix(20000, 8);
    const MatrixXd x = apply_mixing(g, z);
    MatrixXd za, zb;
    set_thread_cap(1);
    const double ts = time_of([&] { za = invert_mixing(g, x); });
    set_thread_cap(0);
    const double tp = time_of([&] { zb = invert_mixing(g, x); });
    row("invert_mixing", ts, tp, (za - zb).cwiseAbs().maxCoeff());
  }

  // condition rows
  {
    GeneratorSpec spec;
    spec.family = Family::heteronoise_fixed;
    spec.n = 8;
    spec.L = 2;
    spec.T = 400;
    spec.seed = 11;
    const auto traj = simulate_fixed_heteronoise(spec, 11);
    const DensityModel dm = density_from_record(*traj.transition);
    const auto probes = draw_history_probes(traj.z, spec.L, 64, 1);
    const VectorXd z_t = traj.z.row(100);
    MatrixXd ra, rb;
    set_thread_cap(1);
    const double ts = time_of([&] { ra = stationary_condition_rows(dm, z_t, probes, 1e-3); });
    set_thread_cap(0);
    const double tp = time_of([&] { rb = stationary_condition_rows(dm, z_t, probes, 1e-3); });
    row("condition rows", ts, tp, (ra - rb).cwiseAbs().maxCoeff());
  }

  // batch ELBO forward/backward
  {
    GeneratorSpec spec;
    spec.family = Family::heteronoise_fixed;
    spec.n = 8;
    spec.L = 2;
    spec.T = 20;
    spec.num_seqs = 256;
    spec.seed = 3;
    const Dataset ds = build_dataset(spec);
    ModelConfig mcfg;
    mcfg.obs_dim = ds.dim();
    TdrlModel model = TdrlModel::build(mcfg, 1);
    std::vector<MatrixXd> xs;
    std::vector<const MatrixXd*> ptrs;
    std::vector<int> domains;
    for (int s = 0; s < ds.num_sequences(); ++s) {
      xs.push_back(ds.sequence_x(s));
      domains.push_back(ds.domain_of(s));
    }
    for (const auto& x : xs) ptrs.push_back(&x);
    LossBreakdown la{}, lb{};
    auto run = [&] {
      Rng noise(42);
      model.zero_grad();
      return elbo_step(model, ptrs, domains, mcfg.beta, noise, 1, true);
    };
    set_thread_cap(1);
    Eigen::setNbThreads(1);
    const double ts = time_of([&] { la = run(); });
    set_thread_cap(0);
    Eigen::setNbThreads(max_threads());
    const double tp = time_of([&] { lb = run(); });
    row("elbo batch fwd+bwd", ts, tp, std::abs(la.total - lb.total));
  }

  // skeleton path regression
  {
    GeneratorSpec spec;
    spec.family = Family::heteronoise_fixed;
    spec.n = 6;
    spec.L = 1;
    spec.T = 4000;
    spec.edge_density = 0.3;
    spec.seed = 19;
    const auto traj = simulate_fixed_heteronoise(spec, 19);
    SkeletonOptions opts;
    opts.dense_iters = 100;
    opts.path_iters = 40;
    opts.max_samples = 3000;
    SkeletonReport sa, sb;
    set_thread_cap(1);
    const double ts = time_of([&] { sa = recover_skeleton({traj.z}, spec.L, opts); }, 1);
    set_thread_cap(0);
    const double tp = time_of([&] { sb = recover_skeleton({traj.z}, spec.L, opts); }, 1);
    row("skeleton path", ts, tp, (sa.scores - sb.scores).cwiseAbs().maxCoeff());
  }

  set_thread_cap(0);
  return 0;
}
