#pragma once

// Data-parallel kernels behind the independence tests. Each has a serial
// reference (`*_serial`) and an OpenMP version; both evaluate every output
// element with the same arithmetic in the same order, so their results are
// bit-identical whatever the worker count. Tests compare the pairs and the
// benchmark target times them.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace persona::kernels {

using Matrix = Eigen::MatrixXd;

/// K(i, j) = exp(-|x_i - x_j|^2 / (2 h^2)) over the rows of `x`.
Matrix gaussian_gram_serial(const Matrix& x, double bandwidth);
Matrix gaussian_gram(const Matrix& x, double bandwidth);

/// Median of pairwise Euclidean distances over an evenly strided subsample
/// of at most `cap` rows. Falls back to the median of the nonzero distances
/// when more than half are zero; throws ValidationError when all are.
double median_bandwidth(const Matrix& x, int cap = 500);

/// H K H with H = I - 11'/n.
Matrix double_center(const Matrix& k);

/// sum_ij a(i, j) * b(i, j).
double frobenius_inner(const Matrix& a, const Matrix& b);

/// For each permutation p_b (b = 0..count-1, drawn from the stream
/// derive_seed(seed, b)): sum_ij a(i, j) * b(p_b(i), p_b(j)).
std::vector<double> permuted_inner_serial(const Matrix& a, const Matrix& b, int count,
                                          std::uint64_t seed);
std::vector<double> permuted_inner(const Matrix& a, const Matrix& b, int count,
                                   std::uint64_t seed);

/// Draws of sum_ij lambda_i * mu_j * chi2_1, one stream per draw.
std::vector<double> spectral_null_serial(std::span<const double> lambda,
                                         std::span<const double> mu, int draws,
                                         std::uint64_t seed);
std::vector<double> spectral_null(std::span<const double> lambda, std::span<const double> mu,
                                  int draws, std::uint64_t seed);

}  // namespace persona::kernels
