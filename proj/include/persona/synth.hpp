#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace persona {

struct ModalitySpec {
  int latent_dim = 1;
  int measurements = 1;
  int obs_dim = 1;
};

struct SynthSpec {
  int shared_dim = 1;
  std::vector<ModalitySpec> modalities;
  /// adjacency(i, j) = 1 iff z_j -> z_i, over all modality latents in
  /// declaration order. Must be strictly lower triangular.
  Eigen::MatrixXi adjacency;
  /// shared_influence(i, k) = 1 iff s_k enters z_i.
  Eigen::MatrixXi shared_influence;
  double noise_scale = 1.0;
  double measurement_noise = 0.1;
  int mixing_layers = 2;
  /// No layers and an [I; 0] lift; for degenerate checks.
  bool identity_mixing = false;
  std::uint64_t seed = 0;

  [[nodiscard]] int total_latents() const;
  /// First global latent index of modality m.
  [[nodiscard]] int offset(int m) const;
};

/// Throws ValidationError describing the first problem found.
void validate(const SynthSpec& spec);

/// x -> tanh(x) + 0.1 x, applied coordinatewise.
double leaky_tanh(double x);
double leaky_tanh_derivative(double x);
/// Newton inverse of leaky_tanh.
double leaky_tanh_inverse(double y);

struct MixingMap {
  std::vector<Eigen::MatrixXd> layers;  // square, orthogonal
  Eigen::MatrixXd lift;                 // obs_dim x latent_dim, full column rank

  /// Rows of z are samples.
  [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& z) const;
  /// Least-squares through the lift, then layer inverses.
  [[nodiscard]] Eigen::MatrixXd invert(const Eigen::MatrixXd& x) const;
};

/// Generation weights and mixing maps, drawn once from spec.seed.
struct SynthParams {
  Eigen::MatrixXd weights;         // masked by adjacency
  Eigen::MatrixXd shared_weights;  // masked by shared_influence
  std::vector<std::vector<MixingMap>> mixing;  // [modality][measurement]
};

SynthParams draw_params(const SynthSpec& spec);

struct SynthBatch {
  SynthSpec spec;
  Eigen::MatrixXd s;
  std::vector<Eigen::MatrixXd> z;               // per modality
  std::vector<std::vector<Eigen::MatrixXd>> x;  // [modality][measurement]
  Eigen::MatrixXd eps;                          // latent noise, n x total_latents
  std::vector<std::vector<Eigen::MatrixXd>> eta;

  [[nodiscard]] Eigen::MatrixXd z_all() const;
  /// Measurements of modality m side by side.
  [[nodiscard]] Eigen::MatrixXd x_concat(int m) const;
  [[nodiscard]] int rows() const { return static_cast<int>(s.rows()); }
};

/// Noise for row r comes from the stream (spec.seed, stream, r), so any
/// prefix of rows is reproducible on its own. Use distinct streams for
/// training and held-out data.
SynthBatch sample(const SynthSpec& spec, int n, std::uint64_t stream = 0);

/// Two modalities (2 latents x 3 measurements, 2 latents x 1 measurement),
/// edges z1->z2, z1->z3, z3->z4, one shared latent into all four, obs_dim 20.
SynthSpec default_fig5_spec();

/// Zero pattern (diagonal included) of the latent precision given s for
/// the linear-Gaussian version of `spec`: (I - W)' (I - W) / sigma^2.
Eigen::MatrixXi latent_markov_oracle(const SynthSpec& spec);

void to_json(nlohmann::json& j, const SynthSpec& spec);
void from_json(const nlohmann::json& j, SynthSpec& spec);

}  // namespace persona
