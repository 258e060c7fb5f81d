#include "tdrl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>

namespace tdrl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

constexpr uint64_t kSaltSplit = 0x73706c69;
constexpr uint64_t kSaltShuffle = 0x73687566;
constexpr uint64_t kSaltNoise = 0x6e6f697a;
constexpr uint64_t kSaltVal = 0x76616c;

}  // namespace

void TrainConfig::validate() const {
  require(lr > 0.0, "train config: lr must be > 0");
  require(batch >= 1, "train config: batch must be >= 1");
  require(max_epochs >= 1, "train config: max_epochs must be >= 1");
  require(patience >= 1, "train config: patience must be >= 1");
  require(mc_samples >= 1, "train config: mc_samples must be >= 1");
  require(val_fraction > 0.0 && val_fraction < 0.5, "train config: val_fraction must be in (0, 0.5)");
  require(test_fraction >= 0.0 && test_fraction < 0.5, "train config: test_fraction must be in [0, 0.5)");
}

SplitIndices split_dataset(int num_seqs, double val_fraction, double test_fraction, uint64_t seed) {
  Rng rng(mix_seed(seed, {kSaltSplit}));
  const std::vector<int> perm = rng.permutation(num_seqs);
  int val_n = std::max(1, static_cast<int>(std::floor(num_seqs * val_fraction)));
  int test_n = static_cast<int>(std::floor(num_seqs * test_fraction));
  if (val_n + test_n >= num_seqs) {
    val_n = std::max(1, num_seqs / 4);
    test_n = std::min(test_n, num_seqs - val_n - 1);
  }
  SplitIndices split;
  split.val.assign(perm.begin(), perm.begin() + val_n);
  split.test.assign(perm.begin() + val_n, perm.begin() + val_n + test_n);
  split.train.assign(perm.begin() + val_n + test_n, perm.end());
  require(!split.train.empty(), "split_dataset: no training sequences left");
  return split;
}

double mc_kld(const PosteriorStats& stats, const PriorOutput& prior, const MatrixXd& z_hat) {
  const int T = static_cast<int>(z_hat.rows());
  const int n = static_cast<int>(z_hat.cols());
  require(stats.mu.rows() == T && stats.mu.cols() == n, "mc_kld: shape mismatch");
  const int L = T - static_cast<int>(prior.eps_hat.rows());
  require(L >= 0, "mc_kld: prior covers more steps than z_hat");

  double lq = 0.0;
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < n; ++k) {
      const double sd2 = std::exp(stats.log_var(t, k));
      const double d = z_hat(t, k) - stats.mu(t, k);
      lq += -0.5 * kLog2Pi - 0.5 * stats.log_var(t, k) - 0.5 * d * d / sd2;
    }
  double lp = prior.log_prior.sum();
  for (int t = 0; t < L; ++t)
    for (int k = 0; k < n; ++k) lp += -0.5 * kLog2Pi - 0.5 * z_hat(t, k) * z_hat(t, k);
  return (lq - lp) / (static_cast<double>(T) * n);
}

LossBreakdown elbo_step(TdrlModel& model, const std::vector<const MatrixXd*>& batch,
                        const std::vector<int>& domains, double beta, Rng& noise_rng,
                        int mc_samples, bool with_grad) {
  const int B = static_cast<int>(batch.size());
  require(B > 0, "elbo_step: empty batch");
  const int T = static_cast<int>(batch[0]->rows());
  const MatrixXd noise =
      noise_rng.normal_matrix(static_cast<Eigen::Index>(mc_samples) * B * T, model.cfg.n);
  return model.elbo_batch(batch, domains, beta, noise, with_grad);
}

namespace {

EpochStats run_epoch(TdrlModel& model, AdamW* opt, const Dataset& ds, const std::vector<int>& order,
                     double beta, int batch_size, int mc_samples, Rng& noise_rng,
                     std::vector<MatrixXd>& seq_cache) {
  EpochStats stats;
  int batches = 0;
  for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(order.size(), pos + static_cast<size_t>(batch_size));
    std::vector<const MatrixXd*> batch;
    std::vector<int> domains;
    for (size_t i = pos; i < end; ++i) {
      const int s = order[i];
      if (seq_cache[static_cast<size_t>(s)].size() == 0)
        seq_cache[static_cast<size_t>(s)] = ds.sequence_x(s);
      batch.push_back(&seq_cache[static_cast<size_t>(s)]);
      domains.push_back(ds.domain_of(s));
    }
    if (opt) {
      model.zero_grad();
      opt->zero_grad();
    }
    const LossBreakdown loss =
        elbo_step(model, batch, domains, beta, noise_rng, mc_samples, opt != nullptr);
    if (opt) opt->step();
    stats.recon += loss.recon;
    stats.kld += loss.kld;
    stats.elbo += loss.total;
    ++batches;
  }
  if (batches > 0) {
    stats.recon /= batches;
    stats.kld /= batches;
    stats.elbo /= batches;
  }
  return stats;
}

}  // namespace

TrainResult train(const Dataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  require(ds.dim() == mcfg.obs_dim, "train: dataset dimension does not match model obs_dim");
  require(ds.seq_len() >= mcfg.L + 2, "train: sequences must have length >= L + 2");
  if (mcfg.n_chg > 0 || mcfg.n_obs > 0) {
    require(ds.spec.m == mcfg.m, "train: dataset domain count does not match model");
    require(ds.spec.m >= 2, "train: chg/obs partition requires domain labels with m >= 2");
  }

  const auto t_start = std::chrono::steady_clock::now();
  TrainResult result;
  result.beta = mcfg.beta;
  result.split = split_dataset(ds.num_sequences(), tcfg.val_fraction, tcfg.test_fraction, tcfg.seed);

  TdrlModel model = TdrlModel::build(mcfg, tcfg.seed);
  AdamW opt(model.params(), tcfg.lr, tcfg.weight_decay);

  std::vector<MatrixXd> seq_cache(static_cast<size_t>(ds.num_sequences()));
  TrainHistory& hist = result.history;
  TdrlModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int since_improve = 0;
  hist.stop_reason = "max_epochs";

  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    std::vector<int> order = result.split.train;
    {
      Rng shuffle_rng(mix_seed(tcfg.seed, {kSaltShuffle, static_cast<uint64_t>(epoch)}));
      const auto perm = shuffle_rng.permutation(static_cast<int>(order.size()));
      std::vector<int> shuffled(order.size());
      for (size_t i = 0; i < order.size(); ++i) shuffled[i] = order[static_cast<size_t>(perm[i])];
      order = std::move(shuffled);
    }
    Rng noise_rng(mix_seed(tcfg.seed, {kSaltNoise, static_cast<uint64_t>(epoch)}));
    const EpochStats train_stats = run_epoch(model, &opt, ds, order, mcfg.beta, tcfg.batch,
                                             tcfg.mc_samples, noise_rng, seq_cache);
    // same validation noise every epoch so epochs are comparable
    Rng val_rng(mix_seed(tcfg.seed, {kSaltVal}));
    const EpochStats val_stats = run_epoch(model, nullptr, ds, result.split.val, mcfg.beta,
                                           tcfg.batch, tcfg.mc_samples, val_rng, seq_cache);
    hist.train.push_back(train_stats);
    hist.val.push_back(val_stats);
    if (tcfg.progress)
      std::printf("%d,%.6f,%.6f,%.6f\n", epoch, train_stats.recon, train_stats.kld, train_stats.elbo);

    if (val_stats.elbo < best_val) {
      best_val = val_stats.elbo;
      hist.best_epoch = epoch;
      best = model;
      since_improve = 0;
    } else {
      ++since_improve;
      if (since_improve >= tcfg.patience) {
        hist.stop_reason = "early_stop";
        break;
      }
    }
  }

  result.model = std::move(best);
  hist.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

BetaSelection select_beta(const Dataset& ds, ModelConfig mcfg, const TrainConfig& tcfg) {
  require(!tcfg.beta_grid.empty(), "select_beta: beta_grid must be nonempty");
  BetaSelection sel;
  sel.grid = tcfg.beta_grid;
  double best_val = std::numeric_limits<double>::infinity();
  int best_idx = -1;
  std::string last_error;
  for (size_t i = 0; i < tcfg.beta_grid.size(); ++i) {
    mcfg.beta = tcfg.beta_grid[i];
    try {
      TrainResult res = train(ds, mcfg, tcfg);
      const double val = res.history.val[static_cast<size_t>(res.history.best_epoch)].elbo;
      sel.histories.push_back(std::move(res.history));
      sel.failed.push_back(false);
      if (val < best_val) {  // strict: ties break toward the first occurrence
        best_val = val;
        best_idx = static_cast<int>(i);
      }
    } catch (const std::exception& e) {
      sel.histories.emplace_back();
      sel.failed.push_back(true);
      last_error = e.what();
      std::cerr << "select_beta: grid point " << tcfg.beta_grid[i] << " failed: " << e.what()
                << "\n";
    }
  }
  if (best_idx < 0) throw NumericalError("select_beta: every grid point failed: " + last_error);
  sel.best_beta = tcfg.beta_grid[static_cast<size_t>(best_idx)];
  return sel;
}

}  // namespace tdrl
