#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tdrl/common.hpp"
#include "tdrl/generator.hpp"

namespace tdrl {

// Conditional log-density evaluator log p(z_t | history, domain). history is
// the flattened lag stack [z_{t-1}, ..., z_{t-L}]. The evaluator must be
// re-entrant: probes are differentiated in parallel.
struct DensityModel {
  int n = 0;
  int L = 1;
  int m = 1;
  std::function<double(const VectorXd& z_t, const VectorXd& hist, int domain)> log_density;
};

enum class Verdict { independent, dependent, inconclusive };

std::string verdict_name(Verdict v);

struct ConditionReport {
  MatrixXd rows;
  VectorXd singular_values;  // descending
  double ratio = 0.0;        // sigma_min / sigma_max
  double threshold = 1e-6;
  Verdict verdict = Verdict::inconclusive;
  bool all_zero = false;
  double fd_stability = 0.0;  // max relative change when halving the step
  std::string note;
};

// Second- and third-order mixed partials of the per-component conditional
// log-densities, sampled at the probe histories. Row 2k is the mixed-partial
// family for component k, row 2k+1 the third-order family; columns run over
// (probe, lagged coordinate). tau selects which lag block the lagged
// derivatives are taken against.
MatrixXd stationary_condition_rows(const DensityModel& dm, const VectorXd& z_t,
                                   const std::vector<VectorXd>& probe_prev, double step,
                                   int tau = 0);

// Stacked per-domain families plus cross-domain difference blocks of the
// first/second own-coordinate derivatives.
MatrixXd nonstationary_condition_rows(const DensityModel& dm, const VectorXd& z_t,
                                      const std::vector<VectorXd>& probe_prev, double step,
                                      int tau = 0);

ConditionReport linear_independence_verdict(const MatrixXd& rows, double threshold = 1e-6);

struct CheckOptions {
  int num_prev_probes = 64;
  int num_zt_probes = 8;
  double step = 1e-3;
  double threshold = 1e-6;
  int tau = 0;
  uint64_t seed = 0;
};

// Runs the verdict at several z_t probes and returns the worst-ratio report.
ConditionReport check_density(const DensityModel& dm, const MatrixXd& pooled_traj,
                              const CheckOptions& opts);

// Proposition-1 alternative solution: zhat_t = D1 * U * D2 * z_t with seeded
// random orthogonal U, seeded nonsingular diagonal D1 and
// D2 = diag(Var^{-1/2}(eps_k)).
MatrixXd gaussian_counterexample(const MatrixXd& z, const VectorXd& noise_vars, uint64_t seed);
// deterministic-injection form used by the seeded overload and by tests
MatrixXd gaussian_counterexample_with(const MatrixXd& z, const VectorXd& noise_vars,
                                      const MatrixXd& u, const VectorXd& d1);

// Empirical conditional-independence proxy: spline-basis regression of each
// component on all lagged values; returns absolute residual cross-correlations
// with zero diagonal.
MatrixXd conditional_independence_score(const MatrixXd& traj, int lags);

// Closed-form density of a recorded generator process.
DensityModel density_from_record(const TransitionRecord& rec);
DensityModel iid_gaussian_density(int n);

std::vector<VectorXd> draw_history_probes(const MatrixXd& pooled_traj, int L, int count,
                                          uint64_t seed);

}  // namespace tdrl
