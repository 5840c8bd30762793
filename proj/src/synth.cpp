#include "persona/synth.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "persona/error.hpp"
#include "persona/rng.hpp"

namespace persona {

int SynthSpec::total_latents() const {
  int t = 0;
  for (const auto& m : modalities) t += m.latent_dim;
  return t;
}

int SynthSpec::offset(int m) const {
  int t = 0;
  for (int i = 0; i < m; ++i) t += modalities[static_cast<std::size_t>(i)].latent_dim;
  return t;
}

void validate(const SynthSpec& spec) {
  if (spec.shared_dim < 0) throw ValidationError("shared_dim must be >= 0");
  if (spec.modalities.empty()) throw ValidationError("spec needs at least one modality");
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    const auto& mod = spec.modalities[m];
    const std::string where = "modality " + std::to_string(m) + ": ";
    if (mod.latent_dim < 1) throw ValidationError(where + "latent_dim must be >= 1");
    if (mod.measurements < 1) throw ValidationError(where + "measurements must be >= 1");
    if (mod.obs_dim < mod.latent_dim) throw ValidationError(where + "obs_dim must be >= latent_dim");
  }
  const int z = spec.total_latents();
  if (spec.adjacency.rows() != z || spec.adjacency.cols() != z) {
    throw ValidationError("adjacency must be " + std::to_string(z) + "x" + std::to_string(z));
  }
  for (int i = 0; i < z; ++i) {
    for (int j = 0; j < z; ++j) {
      const int a = spec.adjacency(i, j);
      if (a != 0 && a != 1) throw ValidationError("adjacency must be binary");
      if (a == 1 && j >= i) throw ValidationError("adjacency must be strictly lower triangular");
    }
  }
  if (spec.shared_influence.rows() != z || spec.shared_influence.cols() != spec.shared_dim) {
    throw ValidationError("shared_influence must be total_latents x shared_dim");
  }
  if ((spec.shared_influence.array() != 0 && spec.shared_influence.array() != 1).any()) {
    throw ValidationError("shared_influence must be binary");
  }
  if (!(spec.noise_scale >= 0) || !std::isfinite(spec.noise_scale)) {
    throw ValidationError("noise_scale must be >= 0");
  }
  if (!(spec.measurement_noise >= 0) || !std::isfinite(spec.measurement_noise)) {
    throw ValidationError("measurement_noise must be >= 0");
  }
  if (spec.mixing_layers < 0) throw ValidationError("mixing_layers must be >= 0");
}

double leaky_tanh(double x) { return std::tanh(x) + 0.1 * x; }

double leaky_tanh_derivative(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t + 0.1;
}

double leaky_tanh_inverse(double y) {
  // |y - 0.1x| <= 1 brackets the root; start from the linear branch.
  double x = std::abs(y) > 1.0 ? (y - std::copysign(1.0, y)) / 0.1 : y;
  for (int it = 0; it < 100; ++it) {
    const double step = (leaky_tanh(x) - y) / leaky_tanh_derivative(x);
    x -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

Eigen::MatrixXd MixingMap::apply(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd h = z;
  for (const auto& l : layers) {
    h = (h * l.transpose()).unaryExpr([](double v) { return leaky_tanh(v); });
  }
  return h * lift.transpose();
}

Eigen::MatrixXd MixingMap::invert(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = lift.colPivHouseholderQr().solve(x.transpose()).transpose();
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    h = h.unaryExpr([](double v) { return leaky_tanh_inverse(v); }) * (*it);
  }
  return h;
}

namespace {

constexpr std::uint64_t kParamStream = 0x50415241;  // "PARA"
constexpr double kMinRank = 1e-6;

double bounded_weight(Rng& rng) {
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::bernoulli_distribution sign(0.5);
  const double w = mag(rng);
  return sign(rng) ? w : -w;
}

Eigen::MatrixXd gaussian(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

MixingMap draw_map(Rng& rng, const ModalitySpec& mod, int layers, bool identity) {
  MixingMap map;
  if (identity) {
    map.lift = Eigen::MatrixXd::Zero(mod.obs_dim, mod.latent_dim);
    map.lift.topRows(mod.latent_dim).setIdentity();
    return map;
  }
  for (int l = 0; l < layers; ++l) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rng, mod.latent_dim, mod.latent_dim));
    map.layers.push_back(qr.householderQ() * Eigen::MatrixXd::Identity(mod.latent_dim, mod.latent_dim));
  }
  map.lift = gaussian(rng, mod.obs_dim, mod.latent_dim) / std::sqrt(static_cast<double>(mod.latent_dim));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(map.lift);
  if (svd.singularValues().minCoeff() < kMinRank) {
    throw RuntimeFailure("mixing lift is rank deficient; choose another seed");
  }
  return map;
}

}  // namespace

SynthParams draw_params(const SynthSpec& spec) {
  validate(spec);
  Rng rng = make_rng(spec.seed, kParamStream);
  const int z = spec.total_latents();
  SynthParams p;
  // Draw every slot so weights stay stable when the graph changes.
  p.weights = Eigen::MatrixXd::Zero(z, z);
  for (int i = 0; i < z; ++i) {
    for (int j = 0; j < z; ++j) {
      const double w = bounded_weight(rng);
      if (spec.adjacency(i, j)) p.weights(i, j) = w;
    }
  }
  p.shared_weights = Eigen::MatrixXd::Zero(z, spec.shared_dim);
  for (int i = 0; i < z; ++i) {
    for (int k = 0; k < spec.shared_dim; ++k) {
      const double w = bounded_weight(rng);
      if (spec.shared_influence(i, k)) p.shared_weights(i, k) = w;
    }
  }
  for (const auto& mod : spec.modalities) {
    auto& maps = p.mixing.emplace_back();
    for (int k = 0; k < mod.measurements; ++k) {
      maps.push_back(draw_map(rng, mod, spec.mixing_layers, spec.identity_mixing));
    }
  }
  return p;
}

Eigen::MatrixXd SynthBatch::z_all() const {
  Eigen::Index cols = 0;
  for (const auto& m : z) cols += m.cols();
  Eigen::MatrixXd out(s.rows(), cols);
  Eigen::Index c = 0;
  for (const auto& m : z) {
    out.middleCols(c, m.cols()) = m;
    c += m.cols();
  }
  return out;
}

Eigen::MatrixXd SynthBatch::x_concat(int m) const {
  const auto& xs = x.at(static_cast<std::size_t>(m));
  Eigen::Index cols = 0;
  for (const auto& v : xs) cols += v.cols();
  Eigen::MatrixXd out(s.rows(), cols);
  Eigen::Index c = 0;
  for (const auto& v : xs) {
    out.middleCols(c, v.cols()) = v;
    c += v.cols();
  }
  return out;
}

SynthBatch sample(const SynthSpec& spec, int n, std::uint64_t stream) {
  if (n < 1) throw ValidationError("sample size must be >= 1");
  const SynthParams p = draw_params(spec);
  const int zt = spec.total_latents();
  SynthBatch b;
  b.spec = spec;
  b.s.resize(n, spec.shared_dim);
  b.eps.resize(n, zt);
  Eigen::MatrixXd z(n, zt);
  b.eta.resize(spec.modalities.size());
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    const auto& mod = spec.modalities[m];
    b.eta[m].assign(static_cast<std::size_t>(mod.measurements), Eigen::MatrixXd(n, mod.obs_dim));
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int r = 0; r < n; ++r) {
    Rng rng = make_rng(spec.seed, stream + 1, static_cast<std::uint64_t>(r));
    normal.reset();
    for (int k = 0; k < spec.shared_dim; ++k) b.s(r, k) = normal(rng);
    for (int i = 0; i < zt; ++i) b.eps(r, i) = normal(rng);
    for (auto& per_mod : b.eta) {
      for (auto& e : per_mod) {
        for (Eigen::Index c = 0; c < e.cols(); ++c) e(r, c) = normal(rng);
      }
    }
    // Latents in declared order; parents always precede children.
    for (int i = 0; i < zt; ++i) {
      double pre = 0;
      for (int j = 0; j < i; ++j) pre += p.weights(i, j) * z(r, j);
      for (int k = 0; k < spec.shared_dim; ++k) pre += p.shared_weights(i, k) * b.s(r, k);
      z(r, i) = leaky_tanh(pre) + spec.noise_scale * b.eps(r, i);
    }
  }
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    const auto& mod = spec.modalities[m];
    b.z.push_back(z.middleCols(spec.offset(static_cast<int>(m)), mod.latent_dim));
    auto& xs = b.x.emplace_back();
    for (int k = 0; k < mod.measurements; ++k) {
      xs.push_back(p.mixing[m][static_cast<std::size_t>(k)].apply(b.z.back()) +
                   spec.measurement_noise * b.eta[m][static_cast<std::size_t>(k)]);
    }
  }
  return b;
}

SynthSpec default_fig5_spec() {
  SynthSpec s;
  s.shared_dim = 1;
  s.modalities = {{2, 3, 20}, {2, 1, 20}};
  s.adjacency = Eigen::MatrixXi::Zero(4, 4);
  s.adjacency(1, 0) = 1;
  s.adjacency(2, 0) = 1;
  s.adjacency(3, 2) = 1;
  s.shared_influence = Eigen::MatrixXi::Ones(4, 1);
  s.noise_scale = 1.0;
  s.measurement_noise = 0.1;
  s.mixing_layers = 2;
  s.seed = 1;
  return s;
}

Eigen::MatrixXi latent_markov_oracle(const SynthSpec& spec) {
  const SynthParams p = draw_params(spec);
  const int z = spec.total_latents();
  const Eigen::MatrixXd iw = Eigen::MatrixXd::Identity(z, z) - p.weights;
  const Eigen::MatrixXd prec = iw.transpose() * iw;
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(z, z);
  for (int i = 0; i < z; ++i) {
    for (int j = 0; j < z; ++j) out(i, j) = std::abs(prec(i, j)) > 1e-12 ? 1 : 0;
  }
  return out;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXi& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXi matrix_from_json(const nlohmann::json& j, Eigen::Index cols_if_empty) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Eigen::MatrixXi m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw ValidationError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<int>();
  }
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const SynthSpec& spec) {
  j = nlohmann::json::object();
  j["shared_dim"] = spec.shared_dim;
  auto mods = nlohmann::json::array();
  for (const auto& m : spec.modalities) {
    mods.push_back({{"latent_dim", m.latent_dim}, {"measurements", m.measurements}, {"obs_dim", m.obs_dim}});
  }
  j["modalities"] = mods;
  j["adjacency"] = matrix_json(spec.adjacency);
  j["shared_influence"] = matrix_json(spec.shared_influence);
  j["noise_scale"] = spec.noise_scale;
  j["measurement_noise"] = spec.measurement_noise;
  j["mixing_layers"] = spec.mixing_layers;
  j["identity_mixing"] = spec.identity_mixing;
  j["seed"] = spec.seed;
}

void from_json(const nlohmann::json& j, SynthSpec& spec) {
  try {
    spec.shared_dim = j.at("shared_dim").get<int>();
    spec.modalities.clear();
    for (const auto& m : j.at("modalities")) {
      spec.modalities.push_back({m.at("latent_dim").get<int>(), m.at("measurements").get<int>(),
                                 m.at("obs_dim").get<int>()});
    }
    spec.adjacency = matrix_from_json(j.at("adjacency"), 0);
    spec.shared_influence = matrix_from_json(j.at("shared_influence"), spec.shared_dim);
    spec.noise_scale = j.value("noise_scale", 1.0);
    spec.measurement_noise = j.value("measurement_noise", 0.1);
    spec.mixing_layers = j.value("mixing_layers", 2);
    spec.identity_mixing = j.value("identity_mixing", false);
    spec.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth spec: ") + e.what());
  }
  validate(spec);
}

}  // namespace persona
