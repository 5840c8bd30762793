#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <Eigen/Dense>

#include "persona/crl/eval.hpp"
#include "persona/crl/io.hpp"
#include "persona/crl/losses.hpp"
#include "persona/crl/mlp.hpp"
#include "persona/crl/model.hpp"
#include "persona/crl/train.hpp"
#include "persona/error.hpp"
#include "persona/rng.hpp"
#include "persona/synth.hpp"

using namespace persona;
using namespace persona::crl;

namespace {

Matrix gaussian(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m(i) = standard_normal(rng);
  return m;
}

ModelConfig small_config() {
  ModelConfig c;
  c.shared_dim = 1;
  c.modalities = {{2, 1, 2, 3}, {2, 1, 1, 3}};
  c.hidden = 4;
  c.layers = 2;
  c.flow_hidden = 3;
  c.flow_layers = 1;
  return c;
}

std::vector<Matrix> small_inputs(const ModelConfig& c, int n, Rng& rng) {
  std::vector<Matrix> x;
  for (const auto& d : c.modalities) x.push_back(gaussian(n, d.measurements * d.obs_dim, rng));
  return x;
}

void zero_flows(CrlModel& model) {
  for (const auto* flows : {&model.shift_flows(), &model.scale_flows()})
    for (const auto& f : *flows)
      model.params().segment(static_cast<Eigen::Index>(f.offset), static_cast<Eigen::Index>(f.size())).setZero();
}

double log_normal_pdf(double x, double mu, double var) {
  return -0.5 * (std::log(2 * M_PI * var) + (x - mu) * (x - mu) / var);
}

}  // namespace

TEST_CASE("mlp shapes and parameter layout") {
  const Mlp m{mlp_widths(3, 5, 2, 2), 7};
  CHECK(m.widths == std::vector<int>{3, 5, 5, 2});
  CHECK(m.size() == static_cast<std::size_t>(3 * 5 + 5 + 5 * 5 + 5 + 5 * 2 + 2));
  std::vector<double> p(7 + m.size(), 0.0);
  Rng rng(1);
  m.init(p.data(), rng, true);
  for (int i = 0; i < 7; ++i) CHECK(p[i] == 0);
  Rng r2(2);
  const Matrix in = gaussian(4, 3, r2);
  CHECK(m.forward(p.data(), in, nullptr).isZero());

  // A linear net computes W x + b with W column-major.
  const Mlp lin{{2, 1}, 0};
  const std::vector<double> q{2.0, -1.0, 0.5};
  Matrix x(1, 2);
  x << 3, 4;
  CHECK(lin.forward(q.data(), x, nullptr)(0, 0) == doctest::Approx(2 * 3 - 4 + 0.5));
  CHECK(act(0) == 0);
  CHECK(act_derivative(0) == doctest::Approx(1.1));
}

TEST_CASE("reconstruction loss") {
  Rng rng(3);
  const std::vector<Matrix> x{gaussian(5, 4, rng), gaussian(5, 2, rng)};
  CHECK(loss_recon(x, x) == 0);
  std::vector<Matrix> plus;
  for (const auto& m : x) plus.push_back(m.array() + 1.0);
  CHECK(loss_recon(x, plus) == doctest::Approx(6.0));

  const std::vector<Matrix> y{gaussian(5, 4, rng), gaussian(5, 2, rng)};
  double naive = 0;
  for (std::size_t k = 0; k < x.size(); ++k)
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < x[k].cols(); ++c) naive += (x[k](r, c) - y[k](r, c)) * (x[k](r, c) - y[k](r, c));
  CHECK(std::abs(loss_recon(x, y) - naive / 5) < 1e-10);
  CHECK_THROWS_AS(loss_recon(x, {y[0]}), ValidationError);
}

TEST_CASE("standard KL closed form and Monte Carlo") {
  CHECK(kl_standard(Matrix::Zero(3, 2), Matrix::Zero(3, 2)) == 0);
  Matrix mu(1, 2), lv = Matrix::Zero(1, 2);
  mu << 1, 0;
  CHECK(kl_standard(mu, lv) == doctest::Approx(0.5));

  Matrix m3(1, 3), l3(1, 3);
  m3 << 0.8, -1.2, 0.3;
  l3 << -0.7, 0.4, -1.5;
  const double kl = kl_standard(m3, l3);
  Rng rng(11);
  const int draws = 100000;
  double mc = 0;
  for (int t = 0; t < draws; ++t)
    for (int d = 0; d < 3; ++d) {
      const double var = std::exp(l3(0, d));
      const double v = m3(0, d) + std::sqrt(var) * standard_normal(rng);
      mc += log_normal_pdf(v, m3(0, d), var) - log_normal_pdf(v, 0, 1);
    }
  mc /= draws;
  CHECK(std::abs(mc - kl) / kl < 0.01);

  Rng r2(12);
  for (int i = 0; i < 50; ++i) CHECK(kl_standard(gaussian(4, 3, r2), gaussian(4, 3, r2)) >= 0);
}

TEST_CASE("moment KL matches its closed form") {
  Rng rng(13);
  Matrix e = gaussian(200, 3, rng);
  e.col(1) += 0.5 * e.col(0);
  e.col(2).array() += 0.3;
  const Eigen::RowVectorXd m = e.colwise().mean();
  const Matrix c = e.rowwise() - m;
  const Matrix s = c.transpose() * c / 200.0;
  const double full = 0.5 * (s.trace() + m.squaredNorm() - 3 - std::log(s.determinant()));
  double diag = 0;
  for (int d = 0; d < 3; ++d) diag += 0.5 * (s(d, d) + m(d) * m(d) - 1 - std::log(s(d, d)));
  CHECK(kl_moment(e, true) == doctest::Approx(full).epsilon(1e-10));
  CHECK(kl_moment(e, false) == doctest::Approx(diag).epsilon(1e-10));
  Matrix singular = e;
  singular.col(2) = singular.col(0);
  CHECK_THROWS_AS(kl_moment(singular, true), RuntimeFailure);
}

TEST_CASE("reparameterization") {
  Rng rng(14);
  const Matrix mu = gaussian(3, 2, rng), lv = gaussian(3, 2, rng), noise = gaussian(3, 2, rng);
  CHECK(reparameterize(mu, lv, Matrix::Zero(3, 2)) == mu);
  const Matrix tight = reparameterize(mu, Matrix::Constant(3, 2, kLogVarMin), noise);
  CHECK((tight - mu).cwiseAbs().maxCoeff() <= std::exp(kLogVarMin / 2) * noise.cwiseAbs().maxCoeff() + 1e-15);

  Matrix one_mu(1, 1), one_lv(1, 1);
  one_mu << 0.7;
  one_lv << 0.2;
  for (std::uint64_t seed : {21, 22}) {
    Rng r(seed);
    double sum = 0;
    for (int t = 0; t < 10000; ++t) sum += reparameterize(one_mu, one_lv, gaussian(1, 1, r))(0, 0);
    const double se = std::exp(0.1) / 100.0;
    CHECK(std::abs(sum / 10000 - 0.7) < 3 * se);
  }
}

TEST_CASE("sparsity and total loss") {
  const Matrix mask = (Matrix(3, 3) << 0, 0, 0, 1, 0, 0, 1, 1, 0).finished();
  CHECK(loss_sparsity(Matrix::Zero(3, 3), mask) == 0);
  Matrix a = Matrix::Zero(3, 3);
  a(1, 0) = 0.5;
  a(2, 1) = -0.5;
  a(0, 2) = 9;  // outside the mask
  CHECK(loss_sparsity(a, mask) == doctest::Approx(1.0));
  Rng rng(15);
  const Matrix r = gaussian(3, 3, rng);
  double naive = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (mask(i, j) != 0) naive += std::abs(r(i, j));
  CHECK(loss_sparsity(r, mask) == doctest::Approx(naive).epsilon(1e-14));

  CHECK(total_loss({2, 3, 4, 0}, {1, 0.01, 0.001}) == doctest::Approx(2.034));
  CHECK(total_loss({2, 3, 4, 0}, {2, 0, 0}) == doctest::Approx(4));
}

TEST_CASE("encoder contracts") {
  CrlModel model(small_config());
  model.init(1);
  Rng rng(16);
  auto x = small_inputs(model.config(), 6, rng);
  x[0].row(3) = x[0].row(1);
  x[1].row(3) = x[1].row(1);
  const auto p = model.encode(x);
  REQUIRE(p.mu.size() == 2);
  CHECK(p.mu[0].rows() == 6);
  CHECK(p.mu[0].cols() == 3);
  CHECK(p.s_mu.cols() == 1);
  CHECK(p.mu[0].row(3) == p.mu[0].row(1));
  CHECK(p.s_mu.row(3) == p.s_mu.row(1));
  CHECK(p.latent_means(1, model.config().modalities).cols() == 5);

  model.params().setZero();
  const auto z = model.encode(x);
  CHECK(z.mu[0].isZero());
  CHECK(z.s_mu.isZero());
  CHECK_THROWS_AS(model.encode({x[0]}), ValidationError);
}

TEST_CASE("decoders read only their own latent block") {
  CrlModel model(small_config());
  model.init(2);
  Rng rng(17);
  const Matrix u = gaussian(5, 3, rng);
  const Matrix a = model.decode(0, 0, u);
  const Matrix b = model.decode(0, 1, u);
  CHECK(a.cols() == 3);
  CHECK((a - b).norm() > 0);

  // Perturbing another decoder's weights leaves this one untouched.
  CrlModel other = model;
  const auto& d1 = model.decoders()[0][1];
  other.params().segment(static_cast<Eigen::Index>(d1.offset), static_cast<Eigen::Index>(d1.size())).array() += 1;
  CHECK(other.decode(0, 0, u) == a);
  CHECK(other.decode(0, 1, u) != b);
  CHECK_THROWS_AS(model.decode(0, 0, gaussian(5, 2, rng)), ValidationError);
}

TEST_CASE("flow is the identity at zero parameters and round trips") {
  CrlModel model(small_config());
  model.init(3);
  Rng rng(18);
  const Matrix z = gaussian(10, 4, rng), s = gaussian(10, 1, rng);
  const Matrix back = model.eps_to_z(model.flow_to_eps(z, s).eps, s);
  CHECK((back - z).cwiseAbs().maxCoeff() < 1e-8);

  model.set_adjacency(Matrix::Zero(4, 4));
  zero_flows(model);
  const auto f = model.flow_to_eps(z, s);
  CHECK(f.eps == z);
  CHECK(f.logscale.isZero());

  Matrix full = Matrix::Ones(4, 4);
  model.set_adjacency(full);
  CHECK(model.adjacency() == model.mask());
}

TEST_CASE("flow with generator parameters recovers the generator noise") {
  ModelConfig c;
  c.shared_dim = 1;
  c.modalities = {{3, 0, 1, 3}};
  c.flow_layers = 0;
  CrlModel model(c);
  model.init(4);
  Matrix w = Matrix::Zero(3, 3);
  w(1, 0) = 0.8;
  w(2, 0) = -0.6;
  w(2, 1) = 1.2;
  const std::vector<double> a{0.5, -0.7, 0.9}, sigma{1.0, 0.4, 2.0};
  model.set_adjacency(w);
  for (int i = 0; i < 3; ++i) {
    const auto& sh = model.shift_flows()[static_cast<std::size_t>(i)];
    const auto& sc = model.scale_flows()[static_cast<std::size_t>(i)];
    REQUIRE(sh.widths == std::vector<int>{4, 1});
    double* ps = model.params().data() + sh.offset;
    double* pc = model.params().data() + sc.offset;
    for (int k = 0; k < 3; ++k) ps[k] = 1.0;
    ps[3] = a[static_cast<std::size_t>(i)];
    ps[4] = 0;
    for (int k = 0; k < 4; ++k) pc[k] = 0;
    pc[4] = std::log(sigma[static_cast<std::size_t>(i)]);
  }
  Rng rng(19);
  const int n = 200;
  const Matrix s = gaussian(n, 1, rng), eps = gaussian(n, 3, rng);
  Matrix z(n, 3);
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < 3; ++i) {
      double v = a[static_cast<std::size_t>(i)] * s(r, 0) + sigma[static_cast<std::size_t>(i)] * eps(r, i);
      for (int j = 0; j < i; ++j) v += w(i, j) * z(r, j);
      z(r, i) = v;
    }
  CHECK((model.flow_to_eps(z, s).eps - eps).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((model.eps_to_z(eps, s) - z).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(20);
  CrlModel model(small_config());
  model.init(5);
  REQUIRE(model.parameter_count() <= 1000);
  const auto x = small_inputs(model.config(), 16, rng);
  const Noise noise = model.draw_noise(16, rng);

  ObjectiveConfig full;
  CHECK(gradient_check(model, x, noise, full) < 1e-4);
  ObjectiveConfig moment;
  moment.ind = IndependenceMode::moment;
  CHECK(gradient_check(model, x, noise, moment) < 1e-4);
  moment.full_covariance = false;
  CHECK(gradient_check(model, x, noise, moment) < 1e-4);

  CrlModel plain = model;
  zero_flows(plain);
  ObjectiveConfig recon;
  recon.weights = {2.0, 0.0, 0.0};
  CHECK(gradient_check(plain, x, noise, recon) < 1e-5);

  CHECK(gradient_check(model, x, noise, full, 1e-4, 7) > 1e-1);
}

TEST_CASE("hungarian matches brute force") {
  Rng rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 30; ++rep) {
    Matrix cost(4, 5);
    for (int i = 0; i < cost.size(); ++i) cost(i) = u(rng);
    const auto asg = hungarian_min(cost);
    double got = 0;
    for (int i = 0; i < 4; ++i) got += cost(i, asg[static_cast<std::size_t>(i)]);
    std::vector<int> cols{0, 1, 2, 3, 4};
    double best = 1e9;
    do {
      double c = 0;
      for (int i = 0; i < 4; ++i) c += cost(i, cols[static_cast<std::size_t>(i)]);
      best = std::min(best, c);
    } while (std::next_permutation(cols.begin(), cols.end()));
    REQUIRE(got == doctest::Approx(best).epsilon(1e-12));
    auto sorted = asg;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
  CHECK_THROWS_AS(hungarian_min(Matrix::Zero(3, 2)), ValidationError);
}

TEST_CASE("recovery metrics") {
  Rng rng(24);
  const Matrix truth = gaussian(500, 4, rng);
  const auto exact = eval_recovery(truth, truth);
  CHECK(exact.mcc == doctest::Approx(1.0));
  CHECK(exact.r2_mean == doctest::Approx(1.0));

  Matrix mixed(500, 5);
  mixed.col(0) = -2.0 * truth.col(2);
  mixed.col(1) = 0.5 * truth.col(0).array() + 3.0;
  mixed.col(2) = gaussian(500, 1, rng);
  mixed.col(3) = truth.col(3);
  mixed.col(4) = -truth.col(1);
  const auto rep = eval_recovery(mixed, truth);
  CHECK(rep.mcc == doctest::Approx(1.0));
  CHECK(rep.assignment == std::vector<int>{1, 4, 0, 3});

  Rng r2(25);
  const Matrix t4 = gaussian(1000, 4, r2), l4 = gaussian(1000, 4, r2);
  CHECK(eval_recovery(l4, t4).mcc <= 0.15);

  Matrix flat = truth;
  flat.col(1).setConstant(2.0);
  CHECK_THROWS_AS(eval_recovery(flat, truth), ValidationError);
  CHECK_THROWS_AS(eval_recovery(truth.leftCols(3), truth), ValidationError);
  CHECK_THROWS_AS(eval_recovery(truth.topRows(10), truth), ValidationError);
}

TEST_CASE("graph extraction and structural Hamming distance") {
  const auto spec = default_fig5_spec();
  const Graph truth = spec.adjacency;
  const auto p = draw_params(spec);
  const std::vector<int> id{0, 1, 2, 3};
  CHECK(shd(extract_graph(p.weights, 0.1, id), truth) == 0);
  CHECK(shd(extract_graph(Matrix::Zero(4, 4), 0.1, id), truth) == 3);

  Graph rev = Graph::Zero(4, 4);
  rev(0, 1) = 1;
  rev(2, 0) = 1;
  rev(3, 2) = 1;
  CHECK(shd(rev, truth) == 1);
  Graph both = truth;
  both(0, 1) = 1;
  CHECK(shd(both, truth) == 1);
  CHECK(edge_count(truth) == 3);

  // A latent matched to a column outside adj (the shared latent) gets no edges.
  const auto g = extract_graph(p.weights, 0.1, {0, 1, 4, 3});
  CHECK(g(2, 0) == 0);
  CHECK(g(3, 2) == 0);
  CHECK(g(1, 0) == 1);
  CHECK_THROWS_AS(extract_graph(p.weights, 0.1, {}), ValidationError);
}

TEST_CASE("model save and load round trip") {
  CrlModel model(small_config());
  model.init(6);
  const auto dir = std::filesystem::temp_directory_path() / "persona_crl_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.json";
  save_model(model, path, {{"note", "x"}});
  const CrlModel back = load_model(path);
  CHECK(back.params() == model.params());
  CHECK(back.config().hidden == 4);
  CHECK(back.config().modalities.size() == 2);
  std::filesystem::remove_all(dir);

  TrainConfig t;
  t.learning_rate = 1e-3;
  t.objective.ind = IndependenceMode::moment;
  const auto t2 = train_config_from_json(to_json(t));
  CHECK(t2.learning_rate == 1e-3);
  CHECK(t2.objective.ind == IndependenceMode::moment);
}

TEST_CASE("training is seed-deterministic and reports divergence") {
  Rng rng(26);
  CrlModel base(small_config());
  base.init(7);
  const auto x = small_inputs(base.config(), 40, rng);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = 9;
  CrlModel a = base, b = base;
  const auto ta = train(a, x, cfg);
  const auto tb = train(b, x, cfg);
  REQUIRE(ta.epochs.size() == 3);
  for (int e = 0; e < 3; ++e) CHECK(ta.epochs[e].total == tb.epochs[e].total);
  CHECK(a.params() == b.params());

  CrlModel c = base;
  cfg.learning_rate = 1e308;
  try {
    train(c, x, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch() <= 1);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(train(c, x, cfg), ValidationError);
}

TEST_CASE("reconstruction loss falls on tiny linear data") {
  ModelConfig c;
  c.shared_dim = 1;
  c.modalities = {{1, 0, 1, 3}};
  c.hidden = 8;
  c.layers = 1;
  CrlModel model(c);
  model.init(8);
  Rng rng(27);
  const Matrix z = gaussian(256, 1, rng);
  Matrix x(256, 3);
  x.col(0) = z;
  x.col(1) = 2 * z;
  x.col(2) = -z;
  x += 0.05 * gaussian(256, 3, rng);
  TrainConfig cfg;
  cfg.objective.weights = {2.0, 0.0, 0.0};
  cfg.learning_rate = 1e-2;
  cfg.epochs = 50;
  cfg.batch_size = 64;
  const auto t = train(model, {x}, cfg);
  int rises = 0;
  for (int e = 1; e < 50; ++e) rises += t.epochs[e].recon > t.epochs[e - 1].recon;
  CHECK(t.epochs.back().recon < 0.5 * t.epochs.front().recon);
  CHECK(rises <= 10);
}
