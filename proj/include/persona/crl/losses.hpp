#pragma once

#include <vector>

#include <Eigen/Core>

namespace persona::crl {

using Matrix = Eigen::MatrixXd;

inline constexpr double kLogVarMin = -10.0, kLogVarMax = 10.0;
inline constexpr double kLogScaleMin = -5.0, kLogScaleMax = 5.0;

/// mu + exp(logvar / 2) * noise.
Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& noise);

/// Sum over measurements of squared error, averaged over rows. `dxhat`
/// (same layout as xhat) receives the gradient when non-null.
double loss_recon(const std::vector<Matrix>& x, const std::vector<Matrix>& xhat,
                  std::vector<Matrix>* dxhat = nullptr);

/// KL(N(mu, diag exp(logvar)) || N(0, I)) summed over columns, averaged
/// over rows.
double kl_standard(const Matrix& mu, const Matrix& logvar, Matrix* dmu = nullptr,
                   Matrix* dlogvar = nullptr);

/// KL of the Gaussian fitted to the rows of `e` (batch mean and covariance,
/// divisor n) against N(0, I). Diagonal covariance unless `full`.
double kl_moment(const Matrix& e, bool full, Matrix* de = nullptr);

/// Sum of |adj| over the mask; `dadj` gets the subgradient sign(adj).
double loss_sparsity(const Matrix& adj, const Matrix& mask, Matrix* dadj = nullptr);

struct LossWeights {
  double recon = 2.0;
  double ind = 1e-2;
  double sparsity = 1e-3;
};

struct LossParts {
  double recon = 0;
  double ind = 0;
  double sparsity = 0;
  double total = 0;
};

double total_loss(const LossParts& parts, const LossWeights& w);

}  // namespace persona::crl
