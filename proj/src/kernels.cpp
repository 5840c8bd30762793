#include "persona/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "persona/error.hpp"
#include "persona/rng.hpp"
#include "persona/stats.hpp"

namespace persona::kernels {

namespace {

inline double squared_distance(const Matrix& x, Eigen::Index i, Eigen::Index j) {
  double s = 0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double d = x(i, c) - x(j, c);
    s += d * d;
  }
  return s;
}

inline double permuted_sum(const Matrix& a, const Matrix& b, const std::vector<int>& p) {
  const Eigen::Index n = a.rows();
  double total = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* acol = a.col(j).data();
    const double* bcol = b.col(p[static_cast<std::size_t>(j)]).data();
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      s += acol[i] * bcol[p[static_cast<std::size_t>(i)]];
    }
    total += s;
  }
  return total;
}

inline double spectral_draw(std::span<const double> lambda, std::span<const double> mu,
                            std::uint64_t seed, int b) {
  auto rng = make_rng(seed, static_cast<std::uint64_t>(b));
  std::normal_distribution<double> normal(0.0, 1.0);
  double s = 0;
  for (double l : lambda) {
    for (double m : mu) {
      const double z = normal(rng);
      s += l * m * z * z;
    }
  }
  return s;
}

}  // namespace

Matrix gaussian_gram_serial(const Matrix& x, double bandwidth) {
  const Eigen::Index n = x.rows();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  Matrix k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = std::exp(squared_distance(x, i, j) * scale);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Matrix gaussian_gram(const Matrix& x, double bandwidth) {
  const Eigen::Index n = x.rows();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  Matrix k(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = std::exp(squared_distance(x, i, j) * scale);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

double median_bandwidth(const Matrix& x, int cap) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = std::min<Eigen::Index>(n, cap);
  if (m < 2) throw ValidationError("bandwidth needs at least two rows");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i * n / m;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      d.push_back(std::sqrt(squared_distance(x, idx[a], idx[b])));
    }
  }
  double med = stats::median(d);
  if (med > 0) return med;
  std::vector<double> positive;
  std::copy_if(d.begin(), d.end(), std::back_inserter(positive), [](double v) { return v > 0; });
  if (positive.empty()) {
    throw ValidationError("zero-variance input: bandwidth undefined");
  }
  return stats::median(std::move(positive));
}

Matrix double_center(const Matrix& k) {
  const Eigen::VectorXd col_means = k.colwise().mean().transpose();
  const Eigen::VectorXd row_means = k.rowwise().mean();
  const double grand = k.mean();
  Matrix c = k;
  c.colwise() -= row_means;
  c.rowwise() -= col_means.transpose();
  c.array() += grand;
  return c;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).sum();
}

std::vector<double> permuted_inner_serial(const Matrix& a, const Matrix& b, int count,
                                          std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(t));
    const auto p = random_permutation(rng, static_cast<int>(a.rows()));
    out[static_cast<std::size_t>(t)] = permuted_sum(a, b, p);
  }
  return out;
}

std::vector<double> permuted_inner(const Matrix& a, const Matrix& b, int count,
                                   std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic, 4)
  for (int t = 0; t < count; ++t) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(t));
    const auto p = random_permutation(rng, static_cast<int>(a.rows()));
    out[static_cast<std::size_t>(t)] = permuted_sum(a, b, p);
  }
  return out;
}

std::vector<double> spectral_null_serial(std::span<const double> lambda,
                                         std::span<const double> mu, int draws,
                                         std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(draws));
  for (int b = 0; b < draws; ++b) out[static_cast<std::size_t>(b)] = spectral_draw(lambda, mu, seed, b);
  return out;
}

std::vector<double> spectral_null(std::span<const double> lambda, std::span<const double> mu,
                                  int draws, std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(draws));
#pragma omp parallel for schedule(static)
  for (int b = 0; b < draws; ++b) out[static_cast<std::size_t>(b)] = spectral_draw(lambda, mu, seed, b);
  return out;
}

}  // namespace persona::kernels
