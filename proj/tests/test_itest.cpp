#include <doctest.h>

#include <cmath>
#include <random>

#include "persona/error.hpp"
#include "persona/io.hpp"
#include "persona/itest.hpp"
#include "persona/kernels.hpp"
#include "persona/rng.hpp"
#include "persona/stats.hpp"

using namespace persona;
using namespace persona::itest;
using Eigen::MatrixXd;

namespace {

ContingencyTable table_of(const MatrixXd& m) {
  ContingencyTable t;
  t.counts = m;
  for (int i = 0; i < m.rows(); ++i) t.row_labels.push_back(i);
  for (int j = 0; j < m.cols(); ++j) t.col_labels.push_back(j);
  return t;
}

// Direct double loops over the table, no matrix expressions.
double naive_chi2(const MatrixXd& o) {
  double n = 0;
  std::vector<double> r(o.rows(), 0.0), c(o.cols(), 0.0);
  for (int i = 0; i < o.rows(); ++i)
    for (int j = 0; j < o.cols(); ++j) {
      r[i] += o(i, j);
      c[j] += o(i, j);
      n += o(i, j);
    }
  double s = 0;
  for (int i = 0; i < o.rows(); ++i)
    for (int j = 0; j < o.cols(); ++j) {
      const double e = r[i] * c[j] / n;
      s += (o(i, j) - e) * (o(i, j) - e) / e;
    }
  return s;
}

double naive_g2(const MatrixXd& o) {
  double n = o.sum();
  double s = 0;
  for (int i = 0; i < o.rows(); ++i)
    for (int j = 0; j < o.cols(); ++j) {
      if (o(i, j) == 0) continue;
      const double e = o.row(i).sum() * o.col(j).sum() / n;
      s += o(i, j) * std::log(o(i, j) / e);
    }
  return 2 * s;
}

MatrixXd gaussian_column(int n, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = standard_normal(rng);
  return x;
}

}  // namespace

TEST_CASE("chi-square and G-square on a 2x2 table") {
  MatrixXd m(2, 2);
  m << 10, 20, 20, 10;
  const auto c = chi_square_test(table_of(m));
  CHECK(c.statistic == doctest::Approx(20.0 / 3.0).epsilon(1e-12));
  CHECK(c.dof == 1);
  CHECK(c.p_value == doctest::Approx(std::erfc(std::sqrt(c.statistic / 2))).epsilon(1e-9));
  CHECK(c.p_value == doctest::Approx(0.00982).epsilon(1e-3));

  const auto g = g_square_test(table_of(m));
  CHECK(g.statistic == doctest::Approx(naive_g2(m)).epsilon(1e-12));
  CHECK(g.statistic == doctest::Approx(6.796).epsilon(1e-3));
  CHECK(g.p_value == doctest::Approx(std::erfc(std::sqrt(g.statistic / 2))).epsilon(1e-9));
}

TEST_CASE("contingency statistics match naive sums on random tables") {
  Rng rng(7);
  std::uniform_int_distribution<int> cnt(1, 40), dim(2, 5);
  for (int rep = 0; rep < 50; ++rep) {
    MatrixXd m(dim(rng), dim(rng));
    for (int i = 0; i < m.size(); ++i) m(i) = cnt(rng);
    const auto c = chi_square_test(table_of(m));
    const auto g = g_square_test(table_of(m));
    REQUIRE(c.statistic == doctest::Approx(naive_chi2(m)).epsilon(1e-10));
    REQUIRE(g.statistic == doctest::Approx(naive_g2(m)).epsilon(1e-10));
    REQUIRE(*c.dof == (m.rows() - 1) * (m.cols() - 1));
    // Transposing swaps the roles of x and y.
    REQUIRE(chi_square_test(table_of(m.transpose())).statistic ==
            doctest::Approx(c.statistic).epsilon(1e-12));
  }
}

TEST_CASE("chi-square tail matches closed forms") {
  for (double x : {0.1, 1.0, 3.84, 10.0}) {
    CHECK(stats::chi2_sf(x, 1) == doctest::Approx(std::erfc(std::sqrt(x / 2))).epsilon(1e-12));
    CHECK(stats::chi2_sf(x, 2) == doctest::Approx(std::exp(-x / 2)).epsilon(1e-12));
  }
}

TEST_CASE("series tests: relabelling, zero cells, degenerate input") {
  const std::vector<int> x{0, 0, 1, 1, 2, 2, 0, 1, 2, 0};
  const std::vector<int> y{5, 5, 7, 7, 5, 7, 5, 5, 7, 7};
  std::vector<int> xr;
  for (int v : x) xr.push_back(10 - 3 * v);
  CHECK(chi_square_test(x, y).statistic == doctest::Approx(chi_square_test(xr, y).statistic));
  CHECK(g_square_test(x, y).statistic == doctest::Approx(g_square_test(xr, y).statistic));
  CHECK(chi_square_test(x, y).statistic == doctest::Approx(chi_square_test(y, x).statistic));

  MatrixXd z(2, 2);
  z << 5, 0, 0, 5;
  CHECK(std::isfinite(g_square_test(table_of(z)).statistic));
  CHECK(g_square_test(table_of(z)).statistic == doctest::Approx(naive_g2(z)));

  MatrixXd pruned(3, 2);
  pruned << 4, 6, 0, 0, 7, 3;
  CHECK(chi_square_test(table_of(pruned)).dof == 1);

  const std::vector<int> constant(10, 1);
  CHECK_THROWS_AS(chi_square_test(constant, y), ValidationError);
  CHECK_THROWS_AS(g_square_test(x, constant), ValidationError);
  CHECK_THROWS_AS(chi_square_test(std::vector<int>{1, 2}, std::vector<int>{1}), ValidationError);
}

TEST_CASE("permutation p-value counts ties and adds one") {
  const std::vector<double> null{1, 2, 3, 4};
  CHECK(permutation_p_value(3, null) == doctest::Approx(3.0 / 5));
  CHECK(permutation_p_value(10, null) == doctest::Approx(1.0 / 5));
}

TEST_CASE("HSIC: identical inputs reach the minimum p-value") {
  const MatrixXd x = gaussian_column(60, 1);
  KernelTestOptions o;
  o.seed = 3;
  const auto r = hsic_test(x, x, o);
  CHECK(r.null_kind == NullKind::permutation);
  CHECK(r.p_value == doctest::Approx(1.0 / 1001));
  CHECK(r.statistic > 0);

  o.hsic_null = HsicNull::gamma;
  const auto g = hsic_test(x, x, o);
  CHECK(g.null_kind == NullKind::analytic);
  CHECK(g.p_value < 1e-3);
}

TEST_CASE("HSIC statistic equals the centred Gram inner product over n^2") {
  const MatrixXd x = gaussian_column(40, 11);
  const MatrixXd y = gaussian_column(40, 12);
  const auto k = kernels::double_center(kernels::gaussian_gram_serial(x, kernels::median_bandwidth(x)));
  const auto l = kernels::double_center(kernels::gaussian_gram_serial(y, kernels::median_bandwidth(y)));
  double s = 0;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) s += k(i, j) * l(i, j);
  CHECK(hsic_test(x, y).statistic == doctest::Approx(s / 1600).epsilon(1e-10));
}

TEST_CASE("kernel tests reject bad input") {
  const MatrixXd x = gaussian_column(30, 2);
  const MatrixXd c = MatrixXd::Constant(30, 1, 2.0);
  for (Method m : {Method::hsic, Method::rcit, Method::kci}) {
    CAPTURE(to_string(m));
    CHECK_THROWS_AS(kernel_test(m, x, c), ValidationError);
    CHECK_THROWS_AS(kernel_test(m, x.topRows(4), x.topRows(4)), ValidationError);
    CHECK_THROWS_AS(kernel_test(m, x, x.topRows(20)), ValidationError);
    MatrixXd bad = x;
    bad(3, 0) = std::nan("");
    CHECK_THROWS_AS(kernel_test(m, bad, x), ValidationError);
  }
  CHECK_THROWS_AS(kernel_test(Method::csq, x, x), ValidationError);
  KernelTestOptions o;
  o.conditioning = gaussian_column(30, 5);
  CHECK_THROWS_AS(rcit_test(x, x, o), UnsupportedFeature);
}

TEST_CASE("RCIT and KCI detect y = x and are deterministic by seed") {
  const MatrixXd x = gaussian_column(80, 4);
  KernelTestOptions o;
  o.seed = 9;
  for (Method m : {Method::rcit, Method::kci}) {
    CAPTURE(to_string(m));
    const auto a = kernel_test(m, x, x, o);
    const auto b = kernel_test(m, x, x, o);
    CHECK(a.p_value < 0.01);
    CHECK(a.statistic == b.statistic);
    CHECK(a.p_value == b.p_value);
  }
  CHECK(kci_test(x, x, o).null_kind == NullKind::spectral);
  o.kci_null = KciNull::permutation;
  CHECK(kci_test(x, x, o).null_kind == NullKind::permutation);
}

TEST_CASE("method names round trip") {
  for (Method m : kAllMethods) CHECK(method_from_string(to_string(m)) == m);
  CHECK(parse_methods("csq,kci").size() == 2);
  CHECK_THROWS_AS(method_from_string("foo"), ValidationError);
}

TEST_CASE("parallel kernels are bit-identical to the serial references") {
  MatrixXd x(70, 2);
  Rng rng(21);
  for (int i = 0; i < x.size(); ++i) x(i) = standard_normal(rng);
  const double h = kernels::median_bandwidth(x);
  const MatrixXd gs = kernels::gaussian_gram_serial(x, h);
  for (int i = 0; i < 70; ++i) CHECK(gs(i, i) == 1.0);
  const MatrixXd a = kernels::double_center(gs);
  const MatrixXd b = kernels::double_center(kernels::gaussian_gram_serial(x.col(0), 1.0));
  const std::vector<double> lam{3, 1, 0.5}, mu{2, 0.25};

  const auto gram_ref = gs;
  const auto perm_ref = kernels::permuted_inner_serial(a, b, 50, 17);
  const auto null_ref = kernels::spectral_null_serial(lam, mu, 200, 17);
  for (int threads : {1, 2, 3}) {
    CAPTURE(threads);
    set_thread_cap(threads);
    CHECK(kernels::gaussian_gram(x, h) == gram_ref);
    CHECK(kernels::permuted_inner(a, b, 50, 17) == perm_ref);
    CHECK(kernels::spectral_null(lam, mu, 200, 17) == null_ref);
  }

  KernelTestOptions par, ser;
  par.seed = ser.seed = 5;
  ser.parallel = false;
  const MatrixXd y = gaussian_column(70, 22);
  for (Method m : {Method::hsic, Method::rcit, Method::kci}) {
    const auto p = kernel_test(m, x, y, par);
    const auto s = kernel_test(m, x, y, ser);
    CHECK(p.statistic == s.statistic);
    CHECK(p.p_value == s.p_value);
  }
  set_thread_cap(1);
}
