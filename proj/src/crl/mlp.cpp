#include "persona/crl/mlp.hpp"

#include <cmath>

namespace persona::crl {

double act(double x) { return std::tanh(x) + 0.1 * x; }

double act_derivative(double x) {
  const double t = std::tanh(x);
  return 1.1 - t * t;
}

std::size_t Mlp::size() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    n += static_cast<std::size_t>(widths[l + 1]) * static_cast<std::size_t>(widths[l] + 1);
  }
  return n;
}

void Mlp::init(double* params, Rng& rng, bool zero_last) const {
  double* p = params + offset;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    const std::size_t count = static_cast<std::size_t>(out) * static_cast<std::size_t>(in + 1);
    const bool last = l + 2 == widths.size();
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < count; ++i) p[i] = (last && zero_last) ? 0.0 : u(rng);
    p += count;
  }
}

Matrix Mlp::forward(const double* params, const Matrix& in, Cache* cache) const {
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  const double* p = params + offset;
  Matrix h = in;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int nin = widths[l], nout = widths[l + 1];
    Eigen::Map<const Matrix> w(p, nout, nin);
    Eigen::Map<const Eigen::RowVectorXd> b(p + static_cast<std::ptrdiff_t>(nout) * nin, nout);
    p += static_cast<std::ptrdiff_t>(nout) * (nin + 1);
    Matrix z = h * w.transpose();
    z.rowwise() += b;
    if (cache) cache->inputs.push_back(std::move(h));
    if (l + 2 == widths.size()) return z;
    h = z.unaryExpr([](double v) { return act(v); });
    if (cache) cache->pre.push_back(std::move(z));
  }
  return h;
}

Matrix Mlp::backward(const double* params, const Cache& cache, const Matrix& dout,
                     double* grad) const {
  const std::size_t layers = widths.size() - 1;
  std::vector<std::ptrdiff_t> starts(layers);
  std::ptrdiff_t at = static_cast<std::ptrdiff_t>(offset);
  for (std::size_t l = 0; l < layers; ++l) {
    starts[l] = at;
    at += static_cast<std::ptrdiff_t>(widths[l + 1]) * (widths[l] + 1);
  }
  Matrix delta = dout;
  for (std::size_t l = layers; l-- > 0;) {
    const int nin = widths[l], nout = widths[l + 1];
    if (l + 1 < layers) {
      delta.array() *= cache.pre[l].unaryExpr([](double v) { return act_derivative(v); }).array();
    }
    Eigen::Map<const Matrix> w(params + starts[l], nout, nin);
    Eigen::Map<Matrix> gw(grad + starts[l], nout, nin);
    Eigen::Map<Eigen::RowVectorXd> gb(grad + starts[l] + static_cast<std::ptrdiff_t>(nout) * nin, nout);
    gw.noalias() += delta.transpose() * cache.inputs[l];
    gb += delta.colwise().sum();
    delta = delta * w;
  }
  return delta;
}

std::vector<int> mlp_widths(int in, int hidden, int layers, int out) {
  std::vector<int> w{in};
  for (int i = 0; i < layers; ++i) w.push_back(hidden);
  w.push_back(out);
  return w;
}

}  // namespace persona::crl
