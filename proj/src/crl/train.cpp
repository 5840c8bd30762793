#include "persona/crl/train.hpp"

#include <cmath>
#include <string>

namespace persona::crl {

void validate(const TrainConfig& cfg) {
  const auto& w = cfg.objective.weights;
  if (w.recon < 0 || w.ind < 0 || w.sparsity < 0) throw ValidationError("loss weights must be >= 0");
  if (w.recon == 0 && w.ind == 0 && w.sparsity == 0) throw ValidationError("all loss weights are zero");
  if (!(cfg.learning_rate > 0)) throw ValidationError("learning rate must be > 0");
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (cfg.batch_size < 2) throw ValidationError("batch size must be >= 2");
}

TrainingDiverged::TrainingDiverged(int epoch)
    : RuntimeFailure("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
      epoch_(epoch) {}

TrainResult train(CrlModel& model, const std::vector<Matrix>& x, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  validate(cfg);
  if (x.empty() || x[0].rows() < 2) throw ValidationError("training needs at least 2 rows");
  const int n = static_cast<int>(x[0].rows());
  constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  Rng rng = make_rng(cfg.seed, 0x5452414e);  // "TRAN"
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.parameter_count()));
  Eigen::VectorXd m2 = m1, grad;
  double b1t = 1, b2t = 1;
  TrainResult out;
  std::vector<Matrix> batch(x.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = random_permutation(rng, n);
    LossParts sum;
    int seen = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int rows = std::min(cfg.batch_size, n - start);
      if (rows < 2) break;
      for (std::size_t m = 0; m < x.size(); ++m) {
        batch[m].resize(rows, x[m].cols());
        for (int r = 0; r < rows; ++r) batch[m].row(r) = x[m].row(order[static_cast<std::size_t>(start + r)]);
      }
      const Noise noise = model.draw_noise(rows, rng);
      LossParts parts;
      try {
        parts = model.objective(batch, noise, cfg.objective, &grad);
      } catch (const RuntimeFailure&) {
        throw TrainingDiverged(epoch);
      }
      if (!std::isfinite(parts.total) || !grad.allFinite()) throw TrainingDiverged(epoch);
      b1t *= b1;
      b2t *= b2;
      m1 = b1 * m1 + (1 - b1) * grad;
      m2 = b2 * m2 + (1 - b2) * grad.cwiseAbs2();
      model.params().array() -=
          cfg.learning_rate * (m1.array() / (1 - b1t)) / ((m2.array() / (1 - b2t)).sqrt() + adam_eps);
      if (!model.params().allFinite()) throw TrainingDiverged(epoch);
      sum.recon += parts.recon * rows;
      sum.ind += parts.ind * rows;
      sum.sparsity += parts.sparsity * rows;
      sum.total += parts.total * rows;
      seen += rows;
    }
    sum.recon /= seen;
    sum.ind /= seen;
    sum.sparsity /= seen;
    sum.total /= seen;
    out.epochs.push_back(sum);
    if (on_epoch) on_epoch(epoch, sum);
  }
  return out;
}

ModelConfig config_for(const SynthSpec& spec, int eta_dim) {
  validate(spec);
  if (eta_dim < 0) throw ValidationError("eta_dim must be >= 0");
  ModelConfig c;
  c.shared_dim = spec.shared_dim;
  for (const auto& m : spec.modalities) c.modalities.push_back({m.latent_dim, eta_dim, m.measurements, m.obs_dim});
  return c;
}

std::vector<Matrix> model_inputs(const SynthBatch& batch) {
  std::vector<Matrix> out;
  for (std::size_t m = 0; m < batch.x.size(); ++m) out.push_back(batch.x_concat(static_cast<int>(m)));
  return out;
}

}  // namespace persona::crl
