#pragma once

#include <utility>
#include <vector>

#include "json.hpp"
#include "tdrl/dataset.hpp"
#include "tdrl/nets.hpp"

namespace tdrl {

enum class PriorMode { flow, standard_normal };

struct ModelConfig {
  int n = 8;
  int L = 2;
  int n_fix = 8, n_chg = 0, n_obs = 0;
  int m = 1;
  int obs_dim = 8;
  int theta_dyn_dim = 2, theta_obs_dim = 2;
  int enc_width = 128, flow_width = 64;
  double beta = 0.002;
  double slope = 0.2;
  double logvar_clip = 10.0;
  PriorMode prior_mode = PriorMode::flow;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct PosteriorStats {
  MatrixXd mu;       // T x n
  MatrixXd log_var;  // T x n, clamped to [-clip, clip]
};

// Per-step factorized transition prior over t = L..T-1.
struct PriorOutput {
  MatrixXd eps_hat;   // (T-L) x n estimated noises
  MatrixXd log_jac;   // (T-L) x n per-component log |d f^-1_k / d z_k|
  VectorXd log_prior; // (T-L), sum over components of log p_eps + log_jac
};

struct LossBreakdown {
  double recon = 0.0;
  double kld = 0.0;
  double total = 0.0;
};

// Encoder/decoder plus per-component conditional-flow transition priors and
// per-domain change-factor embeddings theta_dyn / theta_obs.
//
// Each component k owns an affine flow eps_k = exp(a_k(cond)) * z_k + t_k(cond)
// whose conditioner network sees the flattened lagged latents and, for the
// changing/observation blocks, the domain's change-factor row. The Jacobian
// diagonal is exp(a_k), so log_jac is a_k analytically.
class TdrlModel {
 public:
  ModelConfig cfg;
  Mlp encoder;             // obs_dim -> enc_width^3 -> 2n
  Mlp decoder;             // n -> enc_width^2 -> obs_dim
  std::vector<Mlp> flows;  // one conditioner per component, output (a, t)
  MatrixXd theta_dyn, theta_obs;
  MatrixXd g_theta_dyn, g_theta_obs;

  static TdrlModel build(const ModelConfig& cfg, uint64_t seed);

  // Per-step posterior; rows are independent (the posterior factorizes over t).
  PosteriorStats encode(const MatrixXd& x);
  MatrixXd decode(const MatrixXd& z_hat);
  PriorOutput prior_log_density(const MatrixXd& z_hat, int domain) const;

  // (a, t) of component k's flow at a single conditioning point; test hook for
  // quadrature checks of the conditional density.
  std::pair<double, double> component_flow(int k, const VectorXd& z_hx, int domain) const;

  // Fused ELBO over a batch of equal-length sequences; accumulates parameter
  // gradients when with_grad. noise must have mc_samples * rows(x) rows.
  LossBreakdown elbo_batch(const std::vector<const MatrixXd*>& xs, const std::vector<int>& domains,
                           double beta, const MatrixXd& noise, bool with_grad);

  std::vector<ParamRef> params();
  void zero_grad();

  Pack to_pack() const;
  static TdrlModel from_pack(const Pack& pack);

  int cond_dim(int k) const;
  int block_of(int k) const;  // 0 fix, 1 chg, 2 obs
};

MatrixXd reparameterized_sample(const PosteriorStats& stats, const MatrixXd& noise);

}  // namespace tdrl
