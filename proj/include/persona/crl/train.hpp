#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "persona/crl/model.hpp"
#include "persona/error.hpp"
#include "persona/synth.hpp"

namespace persona::crl {

struct TrainConfig {
  ObjectiveConfig objective;
  double learning_rate = 3e-4;
  int epochs = 3000;
  int batch_size = 256;
  std::uint64_t seed = 0;
};

/// Throws ValidationError for non-positive sizes, negative weights or all
/// weights zero.
void validate(const TrainConfig& cfg);

class TrainingDiverged : public RuntimeFailure {
 public:
  explicit TrainingDiverged(int epoch);
  [[nodiscard]] int epoch() const { return epoch_; }

 private:
  int epoch_;
};

struct TrainResult {
  std::vector<LossParts> epochs;  // row-weighted means over each epoch's batches
};

/// Called after every epoch with (epoch index, epoch means).
using EpochCallback = std::function<void(int, const LossParts&)>;

/// Adam (beta 0.9 / 0.999, eps 1e-8) on shuffled minibatches. A trailing
/// batch with fewer than 2 rows is dropped. Throws TrainingDiverged on a
/// non-finite loss, gradient or parameter.
TrainResult train(CrlModel& model, const std::vector<Matrix>& x, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Model dimensions matching a synthetic spec.
ModelConfig config_for(const SynthSpec& spec, int eta_dim);
/// Per-modality inputs (measurements side by side).
std::vector<Matrix> model_inputs(const SynthBatch& batch);

}  // namespace persona::crl
