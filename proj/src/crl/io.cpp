#include "persona/crl/io.hpp"

#include "persona/embeddings.hpp"
#include "persona/error.hpp"
#include "persona/io.hpp"

namespace persona::crl {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const ModelConfig& c) {
  json mods = json::array();
  for (const auto& m : c.modalities) {
    mods.push_back({{"latent_dim", m.latent_dim},
                    {"eta_dim", m.eta_dim},
                    {"measurements", m.measurements},
                    {"obs_dim", m.obs_dim}});
  }
  return {{"shared_dim", c.shared_dim}, {"modalities", mods},     {"hidden", c.hidden},
          {"layers", c.layers},         {"flow_hidden", c.flow_hidden}, {"flow_layers", c.flow_layers}};
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig c;
    c.shared_dim = j.at("shared_dim").get<int>();
    for (const auto& m : j.at("modalities")) {
      c.modalities.push_back({m.at("latent_dim").get<int>(), m.value("eta_dim", 0),
                              m.at("measurements").get<int>(), m.at("obs_dim").get<int>()});
    }
    c.hidden = j.value("hidden", c.hidden);
    c.layers = j.value("layers", c.layers);
    c.flow_hidden = j.value("flow_hidden", c.flow_hidden);
    c.flow_layers = j.value("flow_layers", c.flow_layers);
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
}

json to_json(const TrainConfig& c) {
  const auto& o = c.objective;
  return {{"alpha_recon", o.weights.recon},
          {"alpha_ind", o.weights.ind},
          {"alpha_sparsity", o.weights.sparsity},
          {"independence", o.ind == IndependenceMode::moment ? "moment" : "flow_likelihood"},
          {"full_covariance", o.full_covariance},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    auto& o = c.objective;
    o.weights.recon = j.value("alpha_recon", o.weights.recon);
    o.weights.ind = j.value("alpha_ind", o.weights.ind);
    o.weights.sparsity = j.value("alpha_sparsity", o.weights.sparsity);
    const auto ind = j.value("independence", std::string("flow_likelihood"));
    if (ind == "moment") {
      o.ind = IndependenceMode::moment;
    } else if (ind == "flow_likelihood") {
      o.ind = IndependenceMode::flow_likelihood;
    } else {
      throw ValidationError("unknown independence mode '" + ind + "'");
    }
    o.full_covariance = j.value("full_covariance", o.full_covariance);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  validate(c);
  return c;
}

void save_model(const CrlModel& model, const fs::path& manifest, const json& extra) {
  const fs::path blob = manifest.parent_path() / (manifest.stem().string() + ".params.f64");
  const auto& p = model.params();
  EmbeddingMatrix m(1, p.size(), std::vector<double>(p.data(), p.data() + p.size()));
  write_embeddings(m, blob, sidecar_path_for(blob), ElementType::f64);
  json j = {{"format", "persona-crl-model"},
            {"version", 1},
            {"config", to_json(model.config())},
            {"parameter_count", model.parameter_count()},
            {"params", blob.filename().string()}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_file_atomic(manifest, j.dump(2) + "\n");
}

CrlModel load_model(const fs::path& manifest) {
  json j;
  try {
    j = json::parse(read_file(manifest));
  } catch (const json::exception& e) {
    throw ValidationError("model manifest " + manifest.string() + ": " + e.what());
  }
  if (j.value("format", std::string()) != "persona-crl-model") {
    throw ValidationError(manifest.string() + " is not a model manifest");
  }
  CrlModel model(model_config_from_json(j.at("config")));
  const fs::path blob = manifest.parent_path() / j.at("params").get<std::string>();
  const auto m = load_embeddings(blob, sidecar_path_for(blob));
  if (m.rows() * m.dim() != static_cast<std::int64_t>(model.parameter_count())) {
    throw ValidationError("parameter blob has " + std::to_string(m.rows() * m.dim()) +
                          " values, model needs " + std::to_string(model.parameter_count()));
  }
  std::copy(m.data().begin(), m.data().end(), model.params().data());
  return model;
}

}  // namespace persona::crl
