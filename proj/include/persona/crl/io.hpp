#pragma once

#include <filesystem>

#include <json.hpp>

#include "persona/crl/model.hpp"
#include "persona/crl/train.hpp"

namespace persona::crl {

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults. Keys: alpha_recon, alpha_ind,
/// alpha_sparsity, independence ("flow_likelihood" | "moment"),
/// full_covariance, learning_rate, epochs, batch_size, seed.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Writes `manifest` (JSON: config, parameter count, blob name, `extra`)
/// and the parameters as an f64 blob "<manifest stem>.params.f64" with its
/// sidecar, all atomically.
void save_model(const CrlModel& model, const std::filesystem::path& manifest,
                const nlohmann::json& extra = nlohmann::json::object());
CrlModel load_model(const std::filesystem::path& manifest);

}  // namespace persona::crl
