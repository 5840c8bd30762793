#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "persona/crl/losses.hpp"
#include "persona/crl/mlp.hpp"

namespace persona::crl {

struct ModalityDims {
  int latent_dim = 1;
  int eta_dim = 0;
  int measurements = 1;
  int obs_dim = 1;
};

struct ModelConfig {
  int shared_dim = 1;
  std::vector<ModalityDims> modalities;
  int hidden = 32;
  int layers = 3;
  int flow_hidden = 16;
  int flow_layers = 1;

  [[nodiscard]] int total_latents() const;
  [[nodiscard]] int offset(int m) const;  // first global latent of modality m
};

/// How the exogenous estimate enters the independence term.
enum class IndependenceMode {
  /// KL between the batch-moment Gaussian of eps-hat and N(0, I), plus the
  /// standard-normal KL of the z-hat posterior.
  moment,
  /// KL between the z-hat posterior and the density the flow induces from
  /// N(0, I) noise, estimated from the reparameterized sample.
  flow_likelihood,
};

struct ObjectiveConfig {
  LossWeights weights;
  IndependenceMode ind = IndependenceMode::flow_likelihood;
  bool full_covariance = true;  // moment mode only
};

struct Posterior {
  std::vector<Matrix> mu;      // per modality: [z_m, eta_m]
  std::vector<Matrix> logvar;
  Matrix s_mu, s_logvar;

  /// Posterior means of all z blocks side by side, then s.
  [[nodiscard]] Matrix latent_means(int shared_dim, const std::vector<ModalityDims>& dims) const;
};

/// Standard-normal draws used by one objective evaluation.
struct Noise {
  std::vector<Matrix> u;  // per modality, n x (latent_dim + eta_dim)
  Matrix s;               // n x shared_dim
};

class CrlModel {
 public:
  explicit CrlModel(ModelConfig config);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  Eigen::VectorXd& params() { return params_; }
  [[nodiscard]] const Eigen::VectorXd& params() const { return params_; }

  void init(std::uint64_t seed);

  /// Masked adjacency; adj(i, j) is the weight of z_j in z_i's flow.
  [[nodiscard]] Matrix adjacency() const;
  [[nodiscard]] const Matrix& mask() const { return mask_; }
  void set_adjacency(const Matrix& adj);

  /// x[m] holds modality m's measurements side by side (n x K_m * D_m).
  [[nodiscard]] Posterior encode(const std::vector<Matrix>& x) const;

  /// Decoder (m, k) applied to [z_m, eta_m].
  [[nodiscard]] Matrix decode(int m, int k, const Matrix& u) const;

  struct FlowOut {
    Matrix eps;       // n x Z
    Matrix logscale;  // n x Z, clamped
  };
  /// eps_i = (z_i - shift_i) * exp(-logscale_i) with both heads reading
  /// (adj row i gating z, s).
  [[nodiscard]] FlowOut flow_to_eps(const Matrix& z, const Matrix& s) const;
  /// Inverse of flow_to_eps, solved in latent order.
  [[nodiscard]] Matrix eps_to_z(const Matrix& eps, const Matrix& s) const;

  [[nodiscard]] Noise draw_noise(int rows, Rng& rng) const;

  /// Loss on a batch with fixed noise; gradient w.r.t. params() accumulated
  /// into `grad` (resized and zeroed) when non-null.
  LossParts objective(const std::vector<Matrix>& x, const Noise& noise, const ObjectiveConfig& cfg,
                      Eigen::VectorXd* grad) const;

  const std::vector<Mlp>& encoders() const { return encoders_; }
  const std::vector<std::vector<Mlp>>& decoders() const { return decoders_; }
  const std::vector<Mlp>& shift_flows() const { return shift_; }
  const std::vector<Mlp>& scale_flows() const { return scale_; }

 private:
  Matrix flow_input(const Matrix& z, const Matrix& s, int i) const;

  ModelConfig config_;
  std::vector<Mlp> encoders_;
  std::vector<std::vector<Mlp>> decoders_;
  std::vector<Mlp> shift_;
  std::vector<Mlp> scale_;
  std::size_t adj_offset_ = 0;
  Matrix mask_;
  Eigen::VectorXd params_;
};

/// Central differences with step h on every parameter; returns
/// max |g_a - g_n| / max(|g_a|, |g_n|, 1e-8). `corrupt` negates the analytic
/// gradient of that parameter first (sabotage check).
double gradient_check(const CrlModel& model, const std::vector<Matrix>& x, const Noise& noise,
                      const ObjectiveConfig& cfg, double h = 1e-4, long corrupt = -1);

}  // namespace persona::crl
