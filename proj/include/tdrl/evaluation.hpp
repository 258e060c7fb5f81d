#pragma once

#include <vector>

#include "tdrl/common.hpp"
#include "tdrl/generator.hpp"

namespace tdrl {

enum class CorrMode { pearson, spearman };

std::string corr_mode_name(CorrMode m);

struct MCCReport {
  MatrixXd corr;                // n x n absolute correlations, true x estimated
  std::vector<int> assignment;  // assignment[k_true] = estimated component
  double mcc = 0.0;
  CorrMode mode = CorrMode::pearson;
  std::vector<int> degenerate_columns;  // constant columns scored as 0
};

// Mean correlation coefficient after optimal one-to-one matching, pooled over
// all rows of the inputs.
MCCReport mcc(const MatrixXd& z_true, const MatrixXd& z_est, CorrMode mode);

// Exhaustive assignment oracle, n <= 8.
double brute_force_mcc(const MatrixXd& z_true, const MatrixXd& z_est, CorrMode mode);

// Maximum-total-score assignment (Hungarian, O(n^3)); returns col per row.
std::vector<int> solve_assignment_max(const MatrixXd& score);

VectorXd rank_transform(const VectorXd& v);  // average ranks on ties

// Proximal operator of the hierarchical penalty used by the sparsity-path
// regression: min 1/2 (b-v)^2 + 1/2 ||W-u||^2 + lambda |b|  s.t. ||W||_inf <= M |b|.
void hier_prox(double v, const VectorXd& u, double lambda, double M, double& b_out, VectorXd& w_out);

struct SkeletonOptions {
  int path_len = 30;
  double lambda_min_ratio = 1e-3;
  int hidden = 32;
  double hier_M = 10.0;
  int dense_iters = 250;
  int path_iters = 120;
  double lr = 0.02;
  double momentum = 0.9;
  double knee_tolerance = 0.05;
  double threshold = -1.0;  // < 0: knee of the validation-error path
  double val_fraction = 0.2;
  int max_samples = 20000;
  uint64_t seed = 0;
};

struct SkeletonReport {
  Adjacency est_adjacency;  // n x n x L
  MatrixXd scores;          // n x (n*L): largest penalty at which the feature survives
  VectorXd path;            // the penalty grid
  MatrixXd val_mse;         // n x path_len validation errors
  double threshold = 0.0;
  double f1 = -1.0;  // filled by compare_skeleton when truth is available
};

// Sparsity-path regression of z_t on its lags with a linear skip connection
// constrained to dominate the first layer (LassoNet-style); feature importance
// is the last penalty at which the feature survives.
SkeletonReport recover_skeleton(const std::vector<MatrixXd>& seqs, int L,
                                const SkeletonOptions& opts = {});

// F1 over edge indicators after relabeling estimated components with the MCC
// assignment (assignment[k_true] = estimated index).
double compare_skeleton(const Adjacency& est, const Adjacency& truth,
                        const std::vector<int>& assignment);

}  // namespace tdrl
