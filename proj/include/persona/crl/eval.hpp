#pragma once

#include <vector>

#include <Eigen/Core>

namespace persona::crl {

/// Minimum-cost assignment of rows to columns (rows <= cols required).
/// Returns the column chosen for each row.
std::vector<int> hungarian_min(const Eigen::MatrixXd& cost);

struct EvalReport {
  double mcc = 0;
  double r2_mean = 0;
  std::vector<double> r2;          // per true latent
  std::vector<int> assignment;     // true latent -> learned column
  Eigen::MatrixXd abs_corr;        // true x learned
};

/// Columns are latents, rows samples. MCC is the mean |Pearson correlation|
/// over the assignment maximizing the total; R^2 regresses each true latent
/// on all learned columns plus an intercept. Throws ValidationError on row
/// mismatch, fewer learned than true columns, or a constant column.
EvalReport eval_recovery(const Eigen::MatrixXd& learned, const Eigen::MatrixXd& truth);

/// g(i, j) = 1 iff j -> i.
using Graph = Eigen::MatrixXi;

/// Learned adjacency thresholded and relabeled into true-latent indices:
/// edge a -> b iff |adj(assignment[b], assignment[a])| > threshold. Truth
/// latents matched to a learned column outside adj (e.g. a shared latent)
/// get no edges. Throws ValidationError without a usable assignment.
Graph extract_graph(const Eigen::MatrixXd& adj, double threshold, const std::vector<int>& assignment);

/// Insertions + deletions + reversals; each unordered pair counts at most once.
int shd(const Graph& g, const Graph& reference);

int edge_count(const Graph& g);

}  // namespace persona::crl
