#pragma once

#include <string>
#include <vector>

#include "tdrl/dataset.hpp"
#include "tdrl/model.hpp"

namespace tdrl {

struct TrainConfig {
  double lr = 0.002;
  int batch = 64;
  int max_epochs = 50;
  int patience = 5;
  std::vector<double> beta_grid;  // empty: use the model config's beta
  int mc_samples = 1;
  uint64_t seed = 0;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  double weight_decay = 1e-4;
  bool progress = true;  // epoch,recon,kld,total CSV lines on stdout

  void validate() const;
};

struct EpochStats {
  double recon = 0.0;
  double kld = 0.0;
  double elbo = 0.0;  // loss convention: recon + beta * kld, minimized
};

struct TrainHistory {
  std::vector<EpochStats> train, val;
  int best_epoch = -1;
  double wall_time = 0.0;
  std::string stop_reason;
};

struct SplitIndices {
  std::vector<int> train, val, test;
};

// Seeded per-sequence split into train/val/test.
SplitIndices split_dataset(int num_seqs, double val_fraction, double test_fraction, uint64_t seed);

// Sampled KL estimate: mean over steps and components of
// log q(z_hat | x) - log p(z_hat | history, u). The first L steps, which the
// PriorOutput does not cover, are scored against a standard-normal prior.
double mc_kld(const PosteriorStats& stats, const PriorOutput& prior, const MatrixXd& z_hat);

// One ELBO evaluation over a batch; accumulates gradients when with_grad.
LossBreakdown elbo_step(TdrlModel& model, const std::vector<const MatrixXd*>& batch,
                        const std::vector<int>& domains, double beta, Rng& noise_rng,
                        int mc_samples, bool with_grad);

struct TrainResult {
  TdrlModel model;  // parameters of the best-validation epoch
  TrainHistory history;
  double beta = 0.0;
  SplitIndices split;
};

TrainResult train(const Dataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg);

struct BetaSelection {
  double best_beta = 0.0;
  std::vector<double> grid;
  std::vector<TrainHistory> histories;
  std::vector<bool> failed;
};

BetaSelection select_beta(const Dataset& ds, ModelConfig mcfg, const TrainConfig& tcfg);

}  // namespace tdrl
