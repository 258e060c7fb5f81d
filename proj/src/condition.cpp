#include "tdrl/condition.hpp"

#include <cmath>

#include "tdrl/parallel.hpp"
#include "tdrl/rng.hpp"

namespace tdrl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal_density(double x, double mean, double sd) {
  const double t = (x - mean) / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * t * t;
}

struct FdEntries {
  double mixed;   // d^2 eta / dz_k dhist_l
  double third;   // d^3 eta / dz_k^2 dhist_l
};

// 6-point stencil: central difference in hist_l of the own-coordinate first
// and second differences.
FdEntries fd_mixed_third(const DensityModel& dm, const VectorXd& z_t, const VectorXd& hist,
                         int k, int l, double step, int domain) {
  const double h = step * (1.0 + std::abs(z_t(k)));
  const double g = step * (1.0 + std::abs(hist(l)));
  VectorXd zp = z_t, zm = z_t;
  zp(k) += h;
  zm(k) -= h;
  VectorXd hp = hist, hm = hist;
  hp(l) += g;
  hm(l) -= g;
  const double fpp = dm.log_density(zp, hp, domain);
  const double fpm = dm.log_density(zp, hm, domain);
  const double fmp = dm.log_density(zm, hp, domain);
  const double fmm = dm.log_density(zm, hm, domain);
  const double f0p = dm.log_density(z_t, hp, domain);
  const double f0m = dm.log_density(z_t, hm, domain);
  for (double v : {fpp, fpm, fmp, fmm, f0p, f0m})
    if (!std::isfinite(v))
      throw NumericalError("condition rows: non-finite density at probe (k=" + std::to_string(k) +
                           ", l=" + std::to_string(l) + ")");
  FdEntries out;
  out.mixed = (fpp - fpm - fmp + fmm) / (4.0 * h * g);
  const double sp = (fpp - 2.0 * f0p + fmp) / (h * h);
  const double sm = (fpm - 2.0 * f0m + fmm) / (h * h);
  out.third = (sp - sm) / (2.0 * g);
  return out;
}

// own-coordinate first and second derivatives at a fixed history
void fd_own(const DensityModel& dm, const VectorXd& z_t, const VectorXd& hist, int k, double step,
            int domain, double& d1, double& d2) {
  const double h = step * (1.0 + std::abs(z_t(k)));
  VectorXd zp = z_t, zm = z_t;
  zp(k) += h;
  zm(k) -= h;
  const double fp = dm.log_density(zp, hist, domain);
  const double f0 = dm.log_density(z_t, hist, domain);
  const double fm = dm.log_density(zm, hist, domain);
  for (double v : {fp, f0, fm})
    if (!std::isfinite(v)) throw NumericalError("condition rows: non-finite density at probe");
  d1 = (fp - fm) / (2.0 * h);
  d2 = (fp - 2.0 * f0 + fm) / (h * h);
}

}  // namespace

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::independent: return "independent";
    case Verdict::dependent: return "dependent";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

MatrixXd stationary_condition_rows(const DensityModel& dm, const VectorXd& z_t,
                                   const std::vector<VectorXd>& probe_prev, double step, int tau) {
  require(step > 0.0, "stationary_condition_rows: step must be > 0");
  require(!probe_prev.empty(), "stationary_condition_rows: probe_prev must be nonempty");
  const int n = dm.n;
  const int P = static_cast<int>(probe_prev.size());
  MatrixXd rows(2 * n, static_cast<Eigen::Index>(P) * n);
  parallel_for(static_cast<std::ptrdiff_t>(P) * n, [&](std::ptrdiff_t idx) {
    const int p = static_cast<int>(idx / n);
    const int k = static_cast<int>(idx % n);
    const VectorXd& hist = probe_prev[static_cast<size_t>(p)];
    for (int l = 0; l < n; ++l) {
      const FdEntries e = fd_mixed_third(dm, z_t, hist, k, tau * n + l, step, 0);
      rows(2 * k, static_cast<Eigen::Index>(p) * n + l) = e.mixed;
      rows(2 * k + 1, static_cast<Eigen::Index>(p) * n + l) = e.third;
    }
  });
  return rows;
}

MatrixXd nonstationary_condition_rows(const DensityModel& dm, const VectorXd& z_t,
                                      const std::vector<VectorXd>& probe_prev, double step,
                                      int tau) {
  require(dm.m >= 2, "nonstationary_condition_rows: m must be >= 2");
  require(step > 0.0, "nonstationary_condition_rows: step must be > 0");
  require(!probe_prev.empty(), "nonstationary_condition_rows: probe_prev must be nonempty");
  const int n = dm.n;
  const int m = dm.m;
  const int P = static_cast<int>(probe_prev.size());
  const Eigen::Index v_cols = static_cast<Eigen::Index>(P) * n * m;
  const Eigen::Index d_cols = static_cast<Eigen::Index>(P) * (m - 1);
  MatrixXd rows = MatrixXd::Zero(2 * n, v_cols + d_cols);
  parallel_for(static_cast<std::ptrdiff_t>(P) * n, [&](std::ptrdiff_t idx) {
    const int p = static_cast<int>(idx / n);
    const int k = static_cast<int>(idx % n);
    const VectorXd& hist = probe_prev[static_cast<size_t>(p)];
    std::vector<double> d1(m), d2(m);
    for (int r = 0; r < m; ++r) {
      for (int l = 0; l < n; ++l) {
        const FdEntries e = fd_mixed_third(dm, z_t, hist, k, tau * n + l, step, r);
        const Eigen::Index col = (static_cast<Eigen::Index>(r) * P + p) * n + l;
        rows(2 * k, col) = e.mixed;
        rows(2 * k + 1, col) = e.third;
      }
      fd_own(dm, z_t, hist, k, step, r, d1[static_cast<size_t>(r)], d2[static_cast<size_t>(r)]);
    }
    for (int r = 1; r < m; ++r) {
      const Eigen::Index col = v_cols + static_cast<Eigen::Index>(r - 1) * P + p;
      rows(2 * k, col) = d2[static_cast<size_t>(r)] - d2[static_cast<size_t>(r - 1)];
      rows(2 * k + 1, col) = d1[static_cast<size_t>(r)] - d1[static_cast<size_t>(r - 1)];
    }
  });
  return rows;
}

ConditionReport linear_independence_verdict(const MatrixXd& rows, double threshold) {
  require(rows.size() > 0, "linear_independence_verdict: rows must be nonempty");
  if (!rows.allFinite()) throw NumericalError("linear_independence_verdict: non-finite entries");
  ConditionReport rep;
  rep.rows = rows;
  rep.threshold = threshold;
  const double max_abs = rows.cwiseAbs().maxCoeff();
  if (max_abs < 1e-10) {
    rep.all_zero = true;
    rep.singular_values = VectorXd::Zero(rows.rows());
    rep.ratio = 0.0;
    rep.verdict = Verdict::dependent;
    rep.note = "all rows are numerically zero";
    return rep;
  }
  Eigen::JacobiSVD<MatrixXd> svd(rows);
  rep.singular_values = svd.singularValues();
  const double smax = rep.singular_values(0);
  const double smin = rep.singular_values(rep.singular_values.size() - 1);
  rep.ratio = smin / smax;
  if (rep.ratio < threshold) rep.verdict = Verdict::dependent;
  else if (rep.ratio < 10.0 * threshold) rep.verdict = Verdict::inconclusive;
  else rep.verdict = Verdict::independent;
  return rep;
}

std::vector<VectorXd> draw_history_probes(const MatrixXd& pooled_traj, int L, int count,
                                          uint64_t seed) {
  require(pooled_traj.rows() > L, "draw_history_probes: trajectory shorter than lag");
  Rng rng(mix_seed(seed, {0x70726f62}));
  const int n = static_cast<int>(pooled_traj.cols());
  std::vector<VectorXd> probes;
  probes.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int t = rng.uniform_int(L, static_cast<int>(pooled_traj.rows()) - 1);
    VectorXd hist(static_cast<Eigen::Index>(n) * L);
    for (int tau = 0; tau < L; ++tau) hist.segment(static_cast<Eigen::Index>(tau) * n, n) = pooled_traj.row(t - 1 - tau);
    probes.push_back(std::move(hist));
  }
  return probes;
}

ConditionReport check_density(const DensityModel& dm, const MatrixXd& pooled_traj,
                              const CheckOptions& opts) {
  const auto prev_probes = draw_history_probes(pooled_traj, dm.L, opts.num_prev_probes, opts.seed);
  Rng rng(mix_seed(opts.seed, {0x7a74}));
  ConditionReport worst;
  bool first = true;
  for (int i = 0; i < opts.num_zt_probes; ++i) {
    const int t = rng.uniform_int(dm.L, static_cast<int>(pooled_traj.rows()) - 1);
    const VectorXd z_t = pooled_traj.row(t);
    const MatrixXd rows = dm.m >= 2
                              ? nonstationary_condition_rows(dm, z_t, prev_probes, opts.step, opts.tau)
                              : stationary_condition_rows(dm, z_t, prev_probes, opts.step, opts.tau);
    ConditionReport rep = linear_independence_verdict(rows, opts.threshold);
    // finite-difference stability: halve the step on a few probes and compare
    if (i == 0) {
      const std::vector<VectorXd> few(prev_probes.begin(),
                                      prev_probes.begin() + std::min<size_t>(4, prev_probes.size()));
      const MatrixXd a = dm.m >= 2 ? nonstationary_condition_rows(dm, z_t, few, opts.step, opts.tau)
                                   : stationary_condition_rows(dm, z_t, few, opts.step, opts.tau);
      const MatrixXd b = dm.m >= 2
                             ? nonstationary_condition_rows(dm, z_t, few, opts.step / 2.0, opts.tau)
                             : stationary_condition_rows(dm, z_t, few, opts.step / 2.0, opts.tau);
      double stab = 0.0;
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
          const double denom = std::max({std::abs(a(r, c)), std::abs(b(r, c)), 1e-3});
          stab = std::max(stab, std::abs(a(r, c) - b(r, c)) / denom);
        }
      worst.fd_stability = stab;
    }
    if (first || rep.ratio < worst.ratio) {
      const double stab = worst.fd_stability;
      worst = rep;
      worst.fd_stability = stab;
      first = false;
    }
  }
  return worst;
}

MatrixXd gaussian_counterexample_with(const MatrixXd& z, const VectorXd& noise_vars,
                                      const MatrixXd& u, const VectorXd& d1) {
  const int n = static_cast<int>(z.cols());
  require(noise_vars.size() == n, "gaussian_counterexample: noise_vars size mismatch");
  for (int k = 0; k < n; ++k)
    require(noise_vars(k) > 0.0, "gaussian_counterexample: noise variance must be > 0");
  for (int k = 0; k < n; ++k)
    require(d1(k) != 0.0, "gaussian_counterexample: D1 must be non-singular");
  const VectorXd d2 = noise_vars.cwiseSqrt().cwiseInverse();
  const MatrixXd a = d1.asDiagonal() * u * d2.asDiagonal();
  return z * a.transpose();
}

MatrixXd gaussian_counterexample(const MatrixXd& z, const VectorXd& noise_vars, uint64_t seed) {
  const int n = static_cast<int>(z.cols());
  require(noise_vars.size() == n, "gaussian_counterexample: noise_vars size mismatch");
  Rng rng(mix_seed(seed, {0x636578}));
  const MatrixXd u = random_orthogonal(n, rng);
  VectorXd d1(n);
  for (int k = 0; k < n; ++k) d1(k) = rng.sign() * rng.uniform(0.5, 2.0);
  return gaussian_counterexample_with(z, noise_vars, u, d1);
}

MatrixXd conditional_independence_score(const MatrixXd& traj, int lags) {
  const int T = static_cast<int>(traj.rows());
  const int n = static_cast<int>(traj.cols());
  require(lags >= 1, "conditional_independence_score: lags must be >= 1");
  require(T >= 10 * n * lags, "conditional_independence_score: insufficient samples");

  const int N = T - lags;
  const int F = n * lags;

  // standardized base features
  MatrixXd feat(N, F);
  for (int t = 0; t < N; ++t)
    for (int tau = 0; tau < lags; ++tau)
      feat.block(t, tau * n, 1, n) = traj.row(t + lags - 1 - tau);
  for (int j = 0; j < F; ++j) {
    const double mean = feat.col(j).mean();
    double sd = std::sqrt((feat.col(j).array() - mean).square().mean());
    if (sd < 1e-12) sd = 1.0;
    feat.col(j) = (feat.col(j).array() - mean) / sd;
  }

  // per-feature cubic truncated-power spline basis with quantile knots, plus
  // pairwise linear interactions to catch non-additive conditional means
  const std::vector<double> knot_q = {0.1, 0.3, 0.5, 0.7, 0.9};
  const int per = 3 + static_cast<int>(knot_q.size());
  const int D = F * per + F * (F - 1) / 2;
  MatrixXd X(N, D);
  for (int j = 0; j < F; ++j) {
    std::vector<double> sorted(feat.col(j).data(), feat.col(j).data() + N);
    std::sort(sorted.begin(), sorted.end());
    VectorXd knots(knot_q.size());
    for (size_t q = 0; q < knot_q.size(); ++q)
      knots(static_cast<Eigen::Index>(q)) = sorted[static_cast<size_t>(knot_q[q] * (N - 1))];
    for (int t = 0; t < N; ++t) {
      const double v = feat(t, j);
      double* col = X.row(t).data();  // row-major walk below via explicit index
      (void)col;
      X(t, j * per + 0) = v;
      X(t, j * per + 1) = v * v;
      X(t, j * per + 2) = v * v * v;
      for (size_t q = 0; q < knot_q.size(); ++q) {
        const double c = v - knots(static_cast<Eigen::Index>(q));
        X(t, j * per + 3 + static_cast<int>(q)) = c > 0 ? c * c * c : 0.0;
      }
    }
  }
  int col = F * per;
  for (int a = 0; a < F; ++a)
    for (int b = a + 1; b < F; ++b, ++col) X.col(col) = feat.col(a).cwiseProduct(feat.col(b));

  for (int j = 0; j < D; ++j) {
    const double mean = X.col(j).mean();
    double sd = std::sqrt((X.col(j).array() - mean).square().mean());
    if (sd < 1e-12) sd = 1.0;
    X.col(j) = (X.col(j).array() - mean) / sd;
  }

  MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += 1e-6 * N;
  Eigen::LDLT<MatrixXd> solver(gram);

  MatrixXd resid(N, n);
  for (int k = 0; k < n; ++k) {
    VectorXd y = traj.col(k).segment(lags, N);
    const double mean = y.mean();
    y.array() -= mean;
    const VectorXd beta = solver.solve(X.transpose() * y);
    resid.col(k) = y - X * beta;
  }

  MatrixXd corr = MatrixXd::Zero(n, n);
  VectorXd sd(n);
  for (int k = 0; k < n; ++k) sd(k) = std::sqrt(resid.col(k).squaredNorm() / N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double denom = sd(i) * sd(j) * N;
      corr(i, j) = denom > 0 ? std::abs(resid.col(i).dot(resid.col(j)) / denom) : 0.0;
    }
  return corr;
}

DensityModel density_from_record(const TransitionRecord& rec) {
  DensityModel dm;
  dm.n = rec.n;
  dm.L = rec.L;
  dm.m = rec.m;
  TransitionRecord r = rec;  // evaluator owns a copy; re-entrant const access
  dm.log_density = [r](const VectorXd& z_t, const VectorXd& hist, int domain) {
    double total = 0.0;
    if (r.family == Family::linear_nongaussian) {
      const VectorXd mean = r.linear_C * hist.head(r.n);
      for (int k = 0; k < r.n; ++k)
        total += generalized_normal_log_density(z_t(k) - mean(k), r.gn_beta, r.gn_lambda);
      return total;
    }
    const VectorXd mean = r.predict_mean(hist, domain);
    for (int k = 0; k < r.n; ++k) total += log_normal_density(z_t(k), mean(k), r.cond_sd(k, hist, domain));
    return total;
  };
  return dm;
}

DensityModel iid_gaussian_density(int n) {
  DensityModel dm;
  dm.n = n;
  dm.L = 1;
  dm.m = 1;
  dm.log_density = [n](const VectorXd& z_t, const VectorXd&, int) {
    double total = 0.0;
    for (int k = 0; k < n; ++k) total += log_normal_density(z_t(k), 0.0, 1.0);
    return total;
  };
  return dm;
}

}  // namespace tdrl
