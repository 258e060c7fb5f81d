#include "tdrl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "tdrl/parallel.hpp"
#include "tdrl/rng.hpp"

namespace tdrl {

std::string corr_mode_name(CorrMode m) { return m == CorrMode::pearson ? "pearson" : "spearman"; }

VectorXd rank_transform(const VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  VectorXd ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && v(idx[static_cast<size_t>(j + 1)]) == v(idx[static_cast<size_t>(i)])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks(idx[static_cast<size_t>(k)]) = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

// abs Pearson correlation matrix between columns of a and b; constant columns
// get zero correlation and are reported.
MatrixXd abs_corr(const MatrixXd& a, const MatrixXd& b, std::vector<int>* degenerate) {
  const Eigen::Index n = a.cols();
  const Eigen::Index m = b.cols();
  const Eigen::Index T = a.rows();
  MatrixXd ac = a.rowwise() - a.colwise().mean();
  MatrixXd bc = b.rowwise() - b.colwise().mean();
  VectorXd asd = (ac.array().square().colwise().sum() / static_cast<double>(T)).sqrt();
  VectorXd bsd = (bc.array().square().colwise().sum() / static_cast<double>(T)).sqrt();
  MatrixXd corr(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double denom = asd(i) * bsd(j) * static_cast<double>(T);
      corr(i, j) = denom > 1e-300 ? std::abs(ac.col(i).dot(bc.col(j)) / denom) : 0.0;
    }
  if (degenerate) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (asd(i) < 1e-12) degenerate->push_back(static_cast<int>(i));
    for (Eigen::Index j = 0; j < m; ++j)
      if (bsd(j) < 1e-12) degenerate->push_back(static_cast<int>(n + j));
  }
  return corr;
}

MatrixXd corr_matrix(const MatrixXd& z_true, const MatrixXd& z_est, CorrMode mode,
                     std::vector<int>* degenerate) {
  if (mode == CorrMode::pearson) return abs_corr(z_true, z_est, degenerate);
  MatrixXd rt(z_true.rows(), z_true.cols()), re(z_est.rows(), z_est.cols());
  for (Eigen::Index j = 0; j < z_true.cols(); ++j) rt.col(j) = rank_transform(z_true.col(j));
  for (Eigen::Index j = 0; j < z_est.cols(); ++j) re.col(j) = rank_transform(z_est.col(j));
  return abs_corr(rt, re, degenerate);
}

}  // namespace

std::vector<int> solve_assignment_max(const MatrixXd& score) {
  const int n = static_cast<int>(score.rows());
  require(score.cols() == n, "solve_assignment_max: square matrix required");
  const double big = score.maxCoeff();
  // Hungarian algorithm with potentials on the minimization form.
  MatrixXd cost = MatrixXd::Constant(n, n, big) - score;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assignment(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] > 0) assignment[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
  return assignment;
}

MCCReport mcc(const MatrixXd& z_true, const MatrixXd& z_est, CorrMode mode) {
  require(z_true.rows() == z_est.rows() && z_true.cols() == z_est.cols(),
          "mcc: shapes must match");
  require(z_true.rows() >= 10 * z_true.cols(), "mcc: need at least 10n samples");
  MCCReport rep;
  rep.mode = mode;
  rep.corr = corr_matrix(z_true, z_est, mode, &rep.degenerate_columns);
  if (!rep.degenerate_columns.empty())
    std::cerr << "mcc: warning: " << rep.degenerate_columns.size()
              << " constant column(s) scored as zero correlation\n";
  rep.assignment = solve_assignment_max(rep.corr);
  double total = 0.0;
  for (int k = 0; k < rep.corr.rows(); ++k) total += rep.corr(k, rep.assignment[static_cast<size_t>(k)]);
  rep.mcc = total / static_cast<double>(rep.corr.rows());
  return rep;
}

double brute_force_mcc(const MatrixXd& z_true, const MatrixXd& z_est, CorrMode mode) {
  const int n = static_cast<int>(z_true.cols());
  require(n <= 8, "brute_force_mcc: n must be <= 8");
  const MatrixXd corr = corr_matrix(z_true, z_est, mode, nullptr);
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    double total = 0.0;
    for (int k = 0; k < n; ++k) total += corr(k, perm[static_cast<size_t>(k)]);
    best = std::max(best, total / n);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void hier_prox(double v, const VectorXd& u, double lambda, double M, double& b_out,
               VectorXd& w_out) {
  const Eigen::Index K = u.size();
  std::vector<double> absu(static_cast<size_t>(K));
  for (Eigen::Index i = 0; i < K; ++i) absu[static_cast<size_t>(i)] = std::abs(u(i));
  std::vector<double> sorted = absu;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cum = 0.0;
  double w = 0.0;
  for (Eigen::Index m = 0; m <= K; ++m) {
    if (m > 0) cum += sorted[static_cast<size_t>(m - 1)];
    const double upper = m == 0 ? std::numeric_limits<double>::infinity() : sorted[static_cast<size_t>(m - 1)];
    const double lower = m == K ? 0.0 : sorted[static_cast<size_t>(m)];
    const double cand = M * std::max(std::abs(v) - lambda + M * cum, 0.0) /
                        (1.0 + static_cast<double>(m) * M * M);
    if (cand <= upper && cand >= lower) {
      w = cand;
      break;
    }
  }
  const double sign_v = v >= 0.0 ? 1.0 : -1.0;
  b_out = sign_v * w / M;
  w_out.resize(K);
  for (Eigen::Index i = 0; i < K; ++i) {
    const double sign_u = u(i) >= 0.0 ? 1.0 : -1.0;
    w_out(i) = sign_u * std::min(absu[static_cast<size_t>(i)], w);
  }
}

namespace {

struct PathModel {
  VectorXd theta;  // skip connection, one weight per feature
  MatrixXd W1;     // hidden x features
  VectorXd b1;
  VectorXd w2;  // hidden
  double b2 = 0.0;
};

struct PathGrads {
  VectorXd theta;
  MatrixXd W1;
  VectorXd b1;
  VectorXd w2;
  double b2 = 0.0;
};

double forward_mse(const PathModel& m, const MatrixXd& X, const VectorXd& y, double slope,
                   MatrixXd* hidden_pre, VectorXd* resid) {
  MatrixXd pre = (X * m.W1.transpose()).rowwise() + m.b1.transpose();
  MatrixXd act = pre.unaryExpr([&](double v) { return leaky_relu(v, slope); });
  VectorXd pred = X * m.theta + act * m.w2;
  pred.array() += m.b2;
  VectorXd r = pred - y;
  const double mse = r.squaredNorm() / static_cast<double>(X.rows());
  if (hidden_pre) *hidden_pre = std::move(pre);
  if (resid) *resid = std::move(r);
  return mse;
}

void backward_mse(const PathModel& m, const MatrixXd& X, const MatrixXd& pre, const VectorXd& resid,
                  double slope, PathGrads& g) {
  const double scale = 2.0 / static_cast<double>(X.rows());
  const VectorXd dpred = scale * resid;
  g.theta = X.transpose() * dpred;
  MatrixXd dact = dpred * m.w2.transpose();  // N x H
  MatrixXd act = pre.unaryExpr([&](double v) { return leaky_relu(v, slope); });
  g.w2 = act.transpose() * dpred;
  g.b2 = dpred.sum();
  MatrixXd dpre = dact.binaryExpr(pre, [&](double gv, double p) { return p >= 0.0 ? gv : slope * gv; });
  g.W1 = dpre.transpose() * X;
  g.b1 = dpre.colwise().sum().transpose();
}

}  // namespace

SkeletonReport recover_skeleton(const std::vector<MatrixXd>& seqs, int L,
                                const SkeletonOptions& opts) {
  require(!seqs.empty(), "recover_skeleton: no sequences");
  const int n = static_cast<int>(seqs[0].cols());
  const int F = n * L;
  long total_rows = 0;
  for (const auto& s : seqs) {
    require(static_cast<int>(s.cols()) == n, "recover_skeleton: inconsistent dimensions");
    total_rows += std::max<long>(0, static_cast<long>(s.rows()) - L);
  }
  require(total_rows >= 20L * n * L, "recover_skeleton: need at least 20*n*L samples");

  // lagged design, respecting sequence boundaries
  MatrixXd Xall(total_rows, F);
  MatrixXd Yall(total_rows, n);
  long r = 0;
  for (const auto& s : seqs)
    for (Eigen::Index t = L; t < s.rows(); ++t, ++r) {
      for (int tau = 0; tau < L; ++tau) Xall.block(r, tau * n, 1, n) = s.row(t - 1 - tau);
      Yall.row(r) = s.row(t);
    }

  // subsample and split train/val
  Rng rng(mix_seed(opts.seed, {0x736b656c}));
  long N = std::min<long>(total_rows, opts.max_samples);
  std::vector<int> order = rng.permutation(static_cast<int>(total_rows));
  const long val_n = std::max<long>(1, static_cast<long>(static_cast<double>(N) * opts.val_fraction));
  const long train_n = N - val_n;
  MatrixXd Xtr(train_n, F), Xva(val_n, F);
  MatrixXd Ytr(train_n, n), Yva(val_n, n);
  for (long i = 0; i < train_n; ++i) {
    Xtr.row(i) = Xall.row(order[static_cast<size_t>(i)]);
    Ytr.row(i) = Yall.row(order[static_cast<size_t>(i)]);
  }
  for (long i = 0; i < val_n; ++i) {
    Xva.row(i) = Xall.row(order[static_cast<size_t>(train_n + i)]);
    Yva.row(i) = Yall.row(order[static_cast<size_t>(train_n + i)]);
  }

  // standardize features and targets on the training split
  for (int j = 0; j < F; ++j) {
    const double mean = Xtr.col(j).mean();
    double sd = std::sqrt((Xtr.col(j).array() - mean).square().mean());
    if (sd < 1e-12) sd = 1.0;
    Xtr.col(j) = (Xtr.col(j).array() - mean) / sd;
    Xva.col(j) = (Xva.col(j).array() - mean) / sd;
  }
  VectorXd y_mean(n), y_sd(n);
  for (int k = 0; k < n; ++k) {
    y_mean(k) = Ytr.col(k).mean();
    double sd = std::sqrt((Ytr.col(k).array() - y_mean(k)).square().mean());
    if (sd < 1e-12) sd = 1.0;
    y_sd(k) = sd;
    Ytr.col(k) = (Ytr.col(k).array() - y_mean(k)) / sd;
    Yva.col(k) = (Yva.col(k).array() - y_mean(k)) / sd;
  }

  SkeletonReport rep;
  rep.scores = MatrixXd::Zero(n, F);
  rep.val_mse = MatrixXd::Zero(n, opts.path_len);
  rep.est_adjacency = Adjacency(n, L);

  // shared penalty grid, lasso-style critical value from the pooled targets
  double lam_max = 0.0;
  for (int k = 0; k < n; ++k)
    lam_max = std::max(lam_max, (Xtr.transpose() * Ytr.col(k)).cwiseAbs().maxCoeff() /
                                    static_cast<double>(train_n));
  lam_max *= 4.0;
  const double lam_min = lam_max * opts.lambda_min_ratio;
  rep.path = VectorXd(opts.path_len);
  for (int i = 0; i < opts.path_len; ++i)
    rep.path(i) = lam_min * std::pow(lam_max / lam_min, static_cast<double>(i) / (opts.path_len - 1));

  const double slope = 0.2;
  parallel_for(n, [&](std::ptrdiff_t kk) {
    const int k = static_cast<int>(kk);
    const VectorXd y = Ytr.col(k);
    PathModel model;
    Rng prng(mix_seed(opts.seed, {0x70617468, static_cast<uint64_t>(k)}));
    const double bound = 1.0 / std::sqrt(static_cast<double>(F));
    model.theta = VectorXd::Zero(F);
    model.W1 = prng.uniform_matrix(opts.hidden, F, -bound, bound);
    model.b1 = prng.uniform_matrix(opts.hidden, 1, -bound, bound).col(0);
    model.w2 = prng.uniform_matrix(opts.hidden, 1, -bound, bound).col(0);
    model.b2 = 0.0;

    PathGrads g;
    PathGrads vel;
    vel.theta = VectorXd::Zero(F);
    vel.W1 = MatrixXd::Zero(opts.hidden, F);
    vel.b1 = VectorXd::Zero(opts.hidden);
    vel.w2 = VectorXd::Zero(opts.hidden);
    vel.b2 = 0.0;

    auto sgd_step = [&](double lr) {
      MatrixXd pre;
      VectorXd resid;
      forward_mse(model, Xtr, y, slope, &pre, &resid);
      backward_mse(model, Xtr, pre, resid, slope, g);
      vel.theta = opts.momentum * vel.theta - lr * g.theta;
      vel.W1 = opts.momentum * vel.W1 - lr * g.W1;
      vel.b1 = opts.momentum * vel.b1 - lr * g.b1;
      vel.w2 = opts.momentum * vel.w2 - lr * g.w2;
      vel.b2 = opts.momentum * vel.b2 - lr * g.b2;
      model.theta += vel.theta;
      model.W1 += vel.W1;
      model.b1 += vel.b1;
      model.w2 += vel.w2;
      model.b2 += vel.b2;
    };

    for (int it = 0; it < opts.dense_iters; ++it) sgd_step(opts.lr);

    VectorXd w_col(opts.hidden);
    for (int pi = 0; pi < opts.path_len; ++pi) {
      const double lam = rep.path(pi);
      bool any_active = false;
      for (int it = 0; it < opts.path_iters; ++it) {
        sgd_step(opts.lr);
        for (int j = 0; j < F; ++j) {
          double b;
          hier_prox(model.theta(j), model.W1.col(j), lam * opts.lr, opts.hier_M, b, w_col);
          model.theta(j) = b;
          model.W1.col(j) = w_col;
        }
      }
      any_active = false;
      for (int j = 0; j < F; ++j)
        if (model.theta(j) != 0.0) {
          rep.scores(k, j) = lam;
          any_active = true;
        }
      rep.val_mse(k, pi) = forward_mse(model, Xva, Yva.col(k), slope, nullptr, nullptr);
      if (!any_active) {
        // intercept-only from here on; the validation error stays flat
        for (int rest = pi + 1; rest < opts.path_len; ++rest) rep.val_mse(k, rest) = rep.val_mse(k, pi);
        break;
      }
    }
  });

  // threshold: knee of the pooled validation-error path
  double threshold = opts.threshold;
  if (threshold < 0.0) {
    VectorXd pooled = rep.val_mse.colwise().mean();
    const double vmin = pooled.minCoeff();
    threshold = rep.path(0);
    for (int pi = 0; pi < opts.path_len; ++pi)
      if (pooled(pi) <= (1.0 + opts.knee_tolerance) * vmin) threshold = rep.path(pi);
  }
  rep.threshold = threshold;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int tau = 0; tau < L; ++tau)
        rep.est_adjacency.at(i, j, tau) = rep.scores(i, tau * n + j) > threshold ? 1 : 0;
  return rep;
}

double compare_skeleton(const Adjacency& est, const Adjacency& truth,
                        const std::vector<int>& assignment) {
  require(est.n == truth.n && est.L == truth.L, "compare_skeleton: shape mismatch");
  require(static_cast<int>(assignment.size()) == truth.n,
          "compare_skeleton: assignment must be supplied (one entry per true component)");
  long tp = 0, fp = 0, fn = 0;
  for (int i = 0; i < truth.n; ++i)
    for (int j = 0; j < truth.n; ++j)
      for (int tau = 0; tau < truth.L; ++tau) {
        const bool t = truth.at(i, j, tau) != 0;
        const bool e = est.at(assignment[static_cast<size_t>(i)], assignment[static_cast<size_t>(j)], tau) != 0;
        if (t && e) ++tp;
        else if (!t && e) ++fp;
        else if (t && !e) ++fn;
      }
  const double denom = 2.0 * tp + fp + fn;
  return denom > 0 ? 2.0 * tp / denom : 1.0;
}

}  // namespace tdrl
