#include "persona/itest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "persona/error.hpp"
#include "persona/kernels.hpp"
#include "persona/rng.hpp"
#include "persona/stats.hpp"

namespace persona::itest {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::csq: return "csq";
    case Method::gsq: return "gsq";
    case Method::hsic: return "hsic";
    case Method::rcit: return "rcit";
    case Method::kci: return "kci";
  }
  return "csq";
}

std::string_view to_string(NullKind k) {
  switch (k) {
    case NullKind::analytic: return "analytic";
    case NullKind::permutation: return "permutation";
    case NullKind::spectral: return "spectral";
  }
  return "analytic";
}

Method method_from_string(std::string_view s) {
  for (Method m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown test '" + std::string(s) + "'");
}

std::vector<Method> parse_methods(std::string_view list) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    auto end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    const auto item = list.substr(start, end - start);
    if (!item.empty()) {
      const Method m = method_from_string(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    start = end + 1;
  }
  if (out.empty()) throw ValidationError("empty test selection");
  return out;
}

ContingencyTable cross_tabulate(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw ValidationError("length mismatch between series");
  if (x.empty()) throw ValidationError("empty series");
  std::map<int, int> rows, cols;
  for (int v : x) rows.emplace(v, 0);
  for (int v : y) cols.emplace(v, 0);
  ContingencyTable t;
  for (auto& [label, idx] : rows) {
    idx = static_cast<int>(t.row_labels.size());
    t.row_labels.push_back(label);
  }
  for (auto& [label, idx] : cols) {
    idx = static_cast<int>(t.col_labels.size());
    t.col_labels.push_back(label);
  }
  t.counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                   static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < x.size(); ++i) t.counts(rows[x[i]], cols[y[i]]) += 1.0;
  return t;
}

namespace {

struct Expected {
  Eigen::MatrixXd observed;
  Eigen::MatrixXd expected;
  int dof = 0;
};

Expected expected_counts(const ContingencyTable& t) {
  if ((t.counts.array() < 0).any()) throw ValidationError("negative count");
  std::vector<Eigen::Index> keep_r, keep_c;
  for (Eigen::Index r = 0; r < t.counts.rows(); ++r) {
    if (t.counts.row(r).sum() > 0) keep_r.push_back(r);
  }
  for (Eigen::Index c = 0; c < t.counts.cols(); ++c) {
    if (t.counts.col(c).sum() > 0) keep_c.push_back(c);
  }
  if (keep_r.size() < 2 || keep_c.size() < 2) {
    throw ValidationError("degenerate table: need at least two non-empty rows and columns");
  }
  Expected e;
  e.observed.resize(static_cast<Eigen::Index>(keep_r.size()), static_cast<Eigen::Index>(keep_c.size()));
  for (std::size_t i = 0; i < keep_r.size(); ++i) {
    for (std::size_t j = 0; j < keep_c.size(); ++j) {
      e.observed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.counts(keep_r[i], keep_c[j]);
    }
  }
  const double n = e.observed.sum();
  const Eigen::VectorXd row = e.observed.rowwise().sum();
  const Eigen::RowVectorXd col = e.observed.colwise().sum();
  e.expected = row * col / n;
  e.dof = static_cast<int>((keep_r.size() - 1) * (keep_c.size() - 1));
  return e;
}

}  // namespace

TestResult chi_square_test(const ContingencyTable& t) {
  const auto e = expected_counts(t);
  const double stat = ((e.observed - e.expected).array().square() / e.expected.array()).sum();
  return {Method::csq, stat, stats::chi2_sf(stat, e.dof), e.dof, NullKind::analytic};
}

TestResult chi_square_test(std::span<const int> x, std::span<const int> y) {
  return chi_square_test(cross_tabulate(x, y));
}

TestResult g_square_test(const ContingencyTable& t) {
  const auto e = expected_counts(t);
  double stat = 0;
  for (Eigen::Index i = 0; i < e.observed.size(); ++i) {
    const double o = e.observed(i);
    if (o > 0) stat += o * std::log(o / e.expected(i));
  }
  // Rounding can leave a tiny negative total when O == E.
  stat = std::max(0.0, 2.0 * stat);
  return {Method::gsq, stat, stats::chi2_sf(stat, e.dof), e.dof, NullKind::analytic};
}

TestResult g_square_test(std::span<const int> x, std::span<const int> y) {
  return g_square_test(cross_tabulate(x, y));
}

double permutation_p_value(double observed, std::span<const double> null) {
  const auto exceed = std::count_if(null.begin(), null.end(), [&](double v) { return v >= observed; });
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(null.size()) + 1.0);
}

namespace {

constexpr int kMinRows = 5;

void check_inputs(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw ValidationError("length mismatch between series");
  if (x.rows() < kMinRows) throw ValidationError("kernel tests need at least 5 rows");
  if (x.cols() < 1 || y.cols() < 1) throw ValidationError("empty variable");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("non-finite input");
}

kernels::Matrix gram(const Eigen::MatrixXd& x, const KernelTestOptions& opts) {
  const double bw = kernels::median_bandwidth(x, opts.bandwidth_cap);
  return opts.parallel ? kernels::gaussian_gram(x, bw) : kernels::gaussian_gram_serial(x, bw);
}

std::vector<double> permuted(const kernels::Matrix& a, const kernels::Matrix& b,
                             const KernelTestOptions& opts, std::uint64_t stream) {
  const auto seed = derive_seed(opts.seed, stream);
  return opts.parallel ? kernels::permuted_inner(a, b, opts.permutations, seed)
                       : kernels::permuted_inner_serial(a, b, opts.permutations, seed);
}

constexpr std::uint64_t kPermStream = 0x5045524d;   // "PERM"
constexpr std::uint64_t kFeatStream = 0x46454154;   // "FEAT"
constexpr std::uint64_t kNullStream = 0x4e554c4c;   // "NULL"

/// Gamma approximation to the null of n * HSIC_b (moment matching).
double hsic_gamma_p(const kernels::Matrix& k, const kernels::Matrix& l, const kernels::Matrix& kc,
                    const kernels::Matrix& lc, double n_hsic) {
  const double n = static_cast<double>(k.rows());
  Eigen::MatrixXd prod = (kc.array() * lc.array() / 6.0).square().matrix();
  const double var_sum = prod.sum() - prod.diagonal().sum();
  double var = var_sum / (n * (n - 1.0));
  var *= 72.0 * (n - 4.0) * (n - 5.0) / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
  const double mu_x = (k.sum() - k.diagonal().sum()) / (n * (n - 1.0));
  const double mu_y = (l.sum() - l.diagonal().sum()) / (n * (n - 1.0));
  const double mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / n;
  if (!(var > 0) || !(mean > 0)) return 1.0;
  const double shape = mean * mean / var;
  const double scale = var * n / mean;
  return stats::gamma_sf(n_hsic, shape, scale);
}

Eigen::MatrixXd random_cos_features(const Eigen::MatrixXd& x, int count, double bandwidth,
                                    Rng rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / bandwidth);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Eigen::MatrixXd w(x.cols(), count);
  for (Eigen::Index j = 0; j < count; ++j) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) w(i, j) = normal(rng);
  }
  Eigen::RowVectorXd b(count);
  for (Eigen::Index j = 0; j < count; ++j) b(j) = phase(rng);
  Eigen::MatrixXd f = ((x * w).rowwise() + b).array().cos().matrix() * std::numbers::sqrt2;
  // Standardize columns; a constant column carries no signal and is zeroed.
  const Eigen::RowVectorXd mean = f.colwise().mean();
  f.rowwise() -= mean;
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const double sd = std::sqrt(f.col(j).squaredNorm() / static_cast<double>(f.rows()));
    if (sd > 1e-12) {
      f.col(j) /= sd;
    } else {
      f.col(j).setZero();
    }
  }
  return f;
}

std::vector<double> top_eigenvalues(const kernels::Matrix& centered, double fraction) {
  const double n = static_cast<double>(centered.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered / n, Eigen::EigenvaluesOnly);
  std::vector<double> ev;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) > 0) ev.push_back(es.eigenvalues()(i));
  }
  std::sort(ev.begin(), ev.end(), std::greater<>());
  double total = 0;
  for (double v : ev) total += v;
  std::vector<double> kept;
  double acc = 0;
  for (double v : ev) {
    if (acc >= fraction * total) break;
    kept.push_back(v);
    acc += v;
  }
  return kept;
}

}  // namespace

TestResult hsic_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     const KernelTestOptions& opts) {
  check_inputs(x, y);
  const double n = static_cast<double>(x.rows());
  const auto k = gram(x, opts);
  const auto l = gram(y, opts);
  const auto kc = kernels::double_center(k);
  const auto lc = kernels::double_center(l);
  const double stat = std::max(0.0, kernels::frobenius_inner(kc, lc) / (n * n));
  TestResult r{Method::hsic, stat, 1.0, std::nullopt, NullKind::permutation};
  if (opts.hsic_null == HsicNull::gamma) {
    r.null_kind = NullKind::analytic;
    r.p_value = std::clamp(hsic_gamma_p(k, l, kc, lc, n * stat), 0.0, 1.0);
  } else {
    auto null = permuted(kc, lc, opts, kPermStream);
    for (double& v : null) v /= n * n;
    r.p_value = permutation_p_value(stat, null);
  }
  return r;
}

TestResult rcit_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     const KernelTestOptions& opts) {
  if (opts.conditioning.size() > 0) {
    throw UnsupportedFeature("rcit: conditioning sets are not supported, only marginal tests");
  }
  check_inputs(x, y);
  const double n = static_cast<double>(x.rows());
  const double bx = kernels::median_bandwidth(x, opts.bandwidth_cap);
  const double by = kernels::median_bandwidth(y, opts.bandwidth_cap);
  const auto fx = random_cos_features(x, opts.random_features, bx, make_rng(opts.seed, kFeatStream, 1));
  const auto fy = random_cos_features(y, opts.random_features, by, make_rng(opts.seed, kFeatStream, 2));
  // n * |Fx'Fy / n|_F^2 == <Fx Fx', Fy Fy'>_F / n; the Gram form makes the
  // permutation null a reindexing of the same two matrices.
  const Eigen::MatrixXd gx = fx * fx.transpose();
  const Eigen::MatrixXd gy = fy * fy.transpose();
  const double stat = std::max(0.0, (fx.transpose() * fy).squaredNorm() / n);
  auto null = permuted(gx, gy, opts, kPermStream);
  for (double& v : null) v /= n;
  return {Method::rcit, stat, permutation_p_value(stat, null), std::nullopt, NullKind::permutation};
}

TestResult kci_test(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                    const KernelTestOptions& opts) {
  check_inputs(x, y);
  const double n = static_cast<double>(x.rows());
  const auto kc = kernels::double_center(gram(x, opts));
  const auto lc = kernels::double_center(gram(y, opts));
  const double stat = std::max(0.0, kernels::frobenius_inner(kc, lc) / n);
  if (opts.kci_null == KciNull::permutation) {
    auto null = permuted(kc, lc, opts, kPermStream);
    for (double& v : null) v /= n;
    return {Method::kci, stat, permutation_p_value(stat, null), std::nullopt, NullKind::permutation};
  }
  const auto lambda = top_eigenvalues(kc, opts.trace_fraction);
  const auto mu = top_eigenvalues(lc, opts.trace_fraction);
  const auto seed = derive_seed(opts.seed, kNullStream);
  const auto null = opts.parallel ? kernels::spectral_null(lambda, mu, opts.null_draws, seed)
                                  : kernels::spectral_null_serial(lambda, mu, opts.null_draws, seed);
  return {Method::kci, stat, permutation_p_value(stat, null), std::nullopt, NullKind::spectral};
}

TestResult kernel_test(Method m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                       const KernelTestOptions& opts) {
  switch (m) {
    case Method::hsic: return hsic_test(x, y, opts);
    case Method::rcit: return rcit_test(x, y, opts);
    case Method::kci: return kci_test(x, y, opts);
    default: throw ValidationError("not a kernel test: " + std::string(to_string(m)));
  }
}

}  // namespace persona::itest
