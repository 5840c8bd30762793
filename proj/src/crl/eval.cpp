#include "persona/crl/eval.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "persona/error.hpp"

namespace persona::crl {

std::vector<int> hungarian_min(const Eigen::MatrixXd& cost) {
  // Shortest augmenting path with potentials, 1-based internally.
  const int n = static_cast<int>(cost.rows()), m = static_cast<int>(cost.cols());
  if (n > m) throw ValidationError("assignment needs rows <= cols");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(m + 1, 0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) out[p[j] - 1] = j - 1;
  }
  return out;
}

namespace {

Eigen::MatrixXd standardized(const Eigen::MatrixXd& x, const char* what) {
  Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    const double norm = c.col(j).norm();
    if (!(norm > 1e-12 * std::sqrt(static_cast<double>(c.rows())))) {
      throw ValidationError(std::string("zero-variance ") + what + " latent column " + std::to_string(j));
    }
    c.col(j) /= norm;
  }
  return c;
}

}  // namespace

EvalReport eval_recovery(const Eigen::MatrixXd& learned, const Eigen::MatrixXd& truth) {
  if (learned.rows() != truth.rows()) throw ValidationError("row count mismatch");
  if (truth.rows() < 3) throw ValidationError("need at least 3 rows");
  if (learned.cols() < truth.cols()) throw ValidationError("fewer learned than true latents");
  if (!learned.allFinite() || !truth.allFinite()) throw ValidationError("non-finite latents");
  const Eigen::MatrixXd a = standardized(truth, "true");
  const Eigen::MatrixXd b = standardized(learned, "learned");
  EvalReport r;
  r.abs_corr = (a.transpose() * b).cwiseAbs();
  r.assignment = hungarian_min(-r.abs_corr);
  for (Eigen::Index t = 0; t < truth.cols(); ++t) r.mcc += r.abs_corr(t, r.assignment[t]);
  r.mcc /= static_cast<double>(truth.cols());

  Eigen::MatrixXd design(learned.rows(), learned.cols() + 1);
  design << learned, Eigen::VectorXd::Ones(learned.rows());
  const auto qr = design.colPivHouseholderQr();
  for (Eigen::Index t = 0; t < truth.cols(); ++t) {
    const Eigen::VectorXd y = truth.col(t);
    const Eigen::VectorXd resid = y - design * qr.solve(y);
    const double tss = (y.array() - y.mean()).square().sum();
    r.r2.push_back(1.0 - resid.squaredNorm() / tss);
    r.r2_mean += r.r2.back();
  }
  r.r2_mean /= static_cast<double>(truth.cols());
  return r;
}

Graph extract_graph(const Eigen::MatrixXd& adj, double threshold, const std::vector<int>& assignment) {
  if (!(threshold > 0)) throw ValidationError("threshold must be > 0");
  if (assignment.empty()) throw ValidationError("no assignment available");
  const int k = static_cast<int>(assignment.size());
  Graph g = Graph::Zero(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      const int la = assignment[a], lb = assignment[b];
      if (a == b || la < 0 || lb < 0 || la >= adj.rows() || lb >= adj.rows()) continue;
      if (std::abs(adj(lb, la)) > threshold) g(b, a) = 1;
    }
  }
  return g;
}

int shd(const Graph& g, const Graph& reference) {
  if (g.rows() != reference.rows() || g.cols() != reference.cols() || g.rows() != g.cols()) {
    throw ValidationError("graph shape mismatch");
  }
  int d = 0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < g.cols(); ++j) {
      if (g(i, j) != reference(i, j) || g(j, i) != reference(j, i)) ++d;
    }
  }
  return d;
}

int edge_count(const Graph& g) { return (g.array() != 0).count(); }

}  // namespace persona::crl
