#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace persona::itest {

enum class Method { csq, gsq, hsic, rcit, kci };
enum class NullKind { analytic, permutation, spectral };

inline constexpr Method kAllMethods[] = {Method::csq, Method::gsq, Method::hsic, Method::rcit,
                                         Method::kci};

std::string_view to_string(Method m);
std::string_view to_string(NullKind k);
Method method_from_string(std::string_view s);
/// Parses "csq,gsq,hsic" style lists.
std::vector<Method> parse_methods(std::string_view list);

struct TestResult {
  Method method = Method::csq;
  double statistic = 0;
  double p_value = 1;
  std::optional<int> dof;
  NullKind null_kind = NullKind::analytic;
};

/// Observed counts; rows index x categories, columns y categories.
struct ContingencyTable {
  Eigen::MatrixXd counts;
  std::vector<int> row_labels;
  std::vector<int> col_labels;
};

/// Cross-tabulates two equal-length category series and drops all-zero
/// rows/columns. Throws ValidationError on length mismatch or empty input.
ContingencyTable cross_tabulate(std::span<const int> x, std::span<const int> y);

/// Pearson chi-square. Throws ValidationError when fewer than two rows or
/// columns remain after pruning.
TestResult chi_square_test(const ContingencyTable& t);
TestResult chi_square_test(std::span<const int> x, std::span<const int> y);

/// Likelihood-ratio G statistic with the chi-square reference.
TestResult g_square_test(const ContingencyTable& t);
TestResult g_square_test(std::span<const int> x, std::span<const int> y);

enum class HsicNull { permutation, gamma };
enum class KciNull { spectral, permutation };

struct KernelTestOptions {
  std::uint64_t seed = 0;
  int permutations = 1000;
  int bandwidth_cap = 500;
  HsicNull hsic_null = HsicNull::permutation;
  KciNull kci_null = KciNull::spectral;
  int null_draws = 5000;
  double trace_fraction = 0.99;
  int random_features = 100;
  /// Conditioning columns for RCIT; only the empty set is supported.
  Eigen::MatrixXd conditioning;
  /// Use the OpenMP kernels (false selects the serial references).
  bool parallel = true;
};

/// Rows are observations. Throws ValidationError for n < 5, mismatched
/// rows, non-finite entries or a zero-variance input.
TestResult hsic_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     const KernelTestOptions& opts = {});
TestResult rcit_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     const KernelTestOptions& opts = {});
TestResult kci_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                    const KernelTestOptions& opts = {});

/// Dispatch for the kernel methods.
TestResult kernel_test(Method m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                       const KernelTestOptions& opts = {});

/// (1 + #{null >= observed}) / (count + 1).
double permutation_p_value(double observed, std::span<const double> null);

inline Eigen::MatrixXd column(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace persona::itest
