#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tdrl/common.hpp"
#include "tdrl/rng.hpp"

namespace tdrl {

enum class Family {
  heteronoise_fixed,
  gaussian_additive,
  linear_nongaussian,
  changing_dynamics,
  modular,
};

std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct NoiseParams {
  double sigma = 0.1;   // Gaussian noise scale
  double beta = 4.0;    // generalized-normal exponent (needs beta > 2, beta != 3)
  double lambda = 1.0;  // generalized-normal rate
};

struct GeneratorSpec {
  int n = 8;
  int L = 2;
  int T = 20;         // length of each emitted sequence
  int num_seqs = 1;   // sequences per domain
  int m = 1;          // domain count
  int n_fix = 8, n_chg = 0, n_obs = 0;
  Family family = Family::heteronoise_fixed;
  NoiseParams noise;
  uint64_t seed = 0;
  double edge_density = 1.0;  // lagged-parent density for heteronoise transitions
  int hidden = 16;            // transition MLP hidden width
  int burn_in = 50;

  void validate() const;  // throws ConfigError naming the offending field
  nlohmann::ordered_json to_json() const;
  static GeneratorSpec from_json(const nlohmann::json& j);
};

// n x n x L boolean parent structure; at(i, j, tau) is true when
// z_{j, t-(tau+1)} is a parent of z_{i, t}.
struct Adjacency {
  int n = 0, L = 0;
  std::vector<uint8_t> data;  // row-major (i, j, tau)

  Adjacency() = default;
  Adjacency(int n_, int L_) : n(n_), L(L_), data(static_cast<size_t>(n_) * n_ * L_, 0) {}
  uint8_t& at(int i, int j, int tau) { return data[(static_cast<size_t>(i) * n + j) * L + tau]; }
  uint8_t at(int i, int j, int tau) const { return data[(static_cast<size_t>(i) * n + j) * L + tau]; }
  int edge_count() const;
};

// 2-hidden-layer LeakyReLU transition network over the flattened history
// [z_{t-1}, ..., z_{t-L}]. W1 may be per-domain (changing dynamics). Each
// output component sees only its masked parents. squash > 0 bounds the output
// through squash * tanh(mean / squash) so explosive per-domain first layers
// cannot diverge.
struct TransitionNet {
  std::vector<MatrixXd> W1;  // one entry, or one per domain
  MatrixXd W2, W3;
  VectorXd b1, b2, b3;
  MatrixXd mask;  // n_out x n_in, entries 0/1
  double slope = 0.2;
  double squash = 0.0;

  int n_in() const { return static_cast<int>(W1.front().cols()); }
  int n_out() const { return static_cast<int>(W3.rows()); }
  VectorXd forward(const VectorXd& hist, int domain = 0) const;
  double forward_component(int k, const VectorXd& hist, int domain = 0) const;

  nlohmann::ordered_json to_json() const;
  static TransitionNet from_json(const nlohmann::json& j);
};

enum class CouplingMode { parent_mean, unit };

// Everything needed to reconstruct the ground-truth conditional distribution
// p(z_t | history, domain): sampled transition weights, noise scales, the
// parent structure, and per-domain observation-change tables.
struct TransitionRecord {
  Family family = Family::heteronoise_fixed;
  int n = 0, L = 0, m = 1;
  int n_fix = 0, n_chg = 0, n_obs = 0;

  std::optional<TransitionNet> fix_net;  // heteronoise / gaussian_additive, or fix block
  std::optional<TransitionNet> chg_net;  // changing dynamics, or chg block
  MatrixXd linear_C;                     // linear_nongaussian
  VectorXd noise_sigma;                  // per-component Gaussian noise sd
  double gn_beta = 0, gn_lambda = 0;     // generalized-normal params
  MatrixXd obs_mean, obs_var;            // m x n_obs per-domain tables
  CouplingMode coupling = CouplingMode::parent_mean;
  double coupling_floor = 0.05;
  Adjacency adjacency;

  // Conditional mean of z_t given flattened history (lag-1 block first).
  VectorXd predict_mean(const VectorXd& hist, int domain = 0) const;
  // Conditional noise sd of component k (Gaussian families).
  double cond_sd(int k, const VectorXd& hist, int domain = 0) const;
  // Heteronoise coupling value s_k(hist) after the |s| >= coupling_floor clip.
  double coupling_value(int k, const VectorXd& hist) const;

  nlohmann::ordered_json to_json() const;
  static TransitionRecord from_json(const nlohmann::json& j);
};

struct LatentTrajectory {
  MatrixXd z;  // T x n
  int domain = 0;
  std::shared_ptr<const TransitionRecord> transition;

  const Adjacency& adjacency() const { return transition->adjacency; }
};

// i.i.d. draws from p(eps) ∝ exp(-lambda |eps|^beta) via the Gamma transform:
// |eps| = (G / lambda)^(1/beta), G ~ Gamma(1/beta, 1), sign uniform.
VectorXd sample_generalized_normal(double beta, double lambda, int count, uint64_t seed);
double generalized_normal_variance(double beta, double lambda);
double generalized_normal_log_density(double x, double beta, double lambda);

TransitionRecord make_transition(const GeneratorSpec& spec, uint64_t seed);

// One trajectory of spec.T steps after burn-in, noise stream derived from
// noise_seed. Pure function of its arguments.
MatrixXd sample_path(const TransitionRecord& rec, const GeneratorSpec& spec, int domain,
                     uint64_t noise_seed);

LatentTrajectory simulate_fixed_heteronoise(const GeneratorSpec& spec, uint64_t seed);
LatentTrajectory simulate_gaussian_additive(const GeneratorSpec& spec, uint64_t seed);
LatentTrajectory simulate_linear_nongaussian(const GeneratorSpec& spec, uint64_t seed);
std::vector<LatentTrajectory> simulate_changing_dynamics(const GeneratorSpec& spec, uint64_t seed);
std::vector<LatentTrajectory> simulate_modular(const GeneratorSpec& spec, uint64_t seed);

// num_seqs sequences per domain, any family; sequences generated in parallel,
// each from its own (seed, domain, seq) noise stream.
std::vector<LatentTrajectory> simulate(const GeneratorSpec& spec);

}  // namespace tdrl
