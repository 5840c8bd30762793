#include "persona/crl/losses.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "persona/error.hpp"

namespace persona::crl {

Matrix reparameterize(const Matrix& mu, const Matrix& logvar, const Matrix& noise) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != noise.rows() ||
      mu.cols() != noise.cols()) {
    throw ValidationError("reparameterize: shape mismatch");
  }
  return mu.array() + (0.5 * logvar.array()).exp() * noise.array();
}

double loss_recon(const std::vector<Matrix>& x, const std::vector<Matrix>& xhat,
                  std::vector<Matrix>* dxhat) {
  if (x.size() != xhat.size()) throw ValidationError("loss_recon: measurement count mismatch");
  if (dxhat) dxhat->resize(x.size());
  double loss = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k].rows() != xhat[k].rows() || x[k].cols() != xhat[k].cols()) {
      throw ValidationError("loss_recon: shape mismatch");
    }
    const double n = static_cast<double>(x[k].rows());
    const Matrix diff = xhat[k] - x[k];
    loss += diff.squaredNorm() / n;
    if (dxhat) (*dxhat)[k] = 2.0 * diff / n;
  }
  return loss;
}

double kl_standard(const Matrix& mu, const Matrix& logvar, Matrix* dmu, Matrix* dlogvar) {
  const double n = static_cast<double>(mu.rows());
  if (n == 0) return 0;
  const auto var = logvar.array().exp();
  const double kl = 0.5 * (mu.array().square() + var - 1.0 - logvar.array()).sum() / n;
  if (dmu) *dmu = mu / n;
  if (dlogvar) *dlogvar = (0.5 * (var - 1.0) / n).matrix();
  return kl;
}

double kl_moment(const Matrix& e, bool full, Matrix* de) {
  const double n = static_cast<double>(e.rows());
  const auto d = static_cast<double>(e.cols());
  if (e.rows() < 2) throw ValidationError("kl_moment: need at least 2 rows");
  const Eigen::RowVectorXd m = e.colwise().mean();
  const Matrix c = e.rowwise() - m;
  if (full) {
    const Matrix s = c.transpose() * c / n;
    const Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw RuntimeFailure("kl_moment: singular batch covariance");
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double kl = 0.5 * (s.trace() + m.squaredNorm() - d - logdet);
    if (de) {
      const Matrix sinv = llt.solve(Matrix::Identity(e.cols(), e.cols()));
      Matrix g = c * (Matrix::Identity(e.cols(), e.cols()) - sinv);
      g.rowwise() += m;
      *de = g / n;
    }
    return kl;
  }
  const Eigen::RowVectorXd v = c.array().square().colwise().sum() / n;
  if ((v.array() <= 0).any()) throw RuntimeFailure("kl_moment: zero batch variance");
  const double kl = 0.5 * (v.array() + m.array().square() - 1.0 - v.array().log()).sum();
  if (de) {
    const Eigen::RowVectorXd scale = 1.0 - v.array().inverse();
    Matrix g = c.array().rowwise() * scale.array();
    g.rowwise() += m;
    *de = g / n;
  }
  return kl;
}

double loss_sparsity(const Matrix& adj, const Matrix& mask, Matrix* dadj) {
  if (adj.rows() != mask.rows() || adj.cols() != mask.cols()) {
    throw ValidationError("loss_sparsity: shape mismatch");
  }
  const Matrix masked = adj.cwiseProduct(mask);
  if (dadj) *dadj = masked.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
  return masked.cwiseAbs().sum();
}

double total_loss(const LossParts& parts, const LossWeights& w) {
  return w.recon * parts.recon + w.ind * parts.ind + w.sparsity * parts.sparsity;
}

}  // namespace persona::crl
