#include "persona/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "persona/aggregate.hpp"
#include "persona/consensus.hpp"
#include "persona/crl/eval.hpp"
#include "persona/crl/io.hpp"
#include "persona/crl/train.hpp"
#include "persona/embeddings.hpp"
#include "persona/error.hpp"
#include "persona/io.hpp"
#include "persona/llm_eval.hpp"
#include "persona/synth.hpp"
#include "persona/table.hpp"

namespace persona {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1";

struct Options {
  std::string input, output, report, schema, config, model, preset, format = "json";
  std::optional<std::uint64_t> seed;
  double alpha = 0.05;
  std::string tests = "csq,gsq,hsic,rcit,kci";
  std::string traits, features;
  int bins = 3;
  int permutations = 1000;
  std::string hsic_null = "permutation", kci_null = "spectral";
  int n = 5000;
  std::uint64_t stream = 0;
  double threshold = 0.1;
};

ordered_json header(const std::string& command, const ordered_json& config,
                    std::optional<std::uint64_t> seed) {
  ordered_json h;
  h["tool"] = "persona";
  h["version"] = kVersion;
  h["command"] = command;
  h["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
  h["config"] = config;
  return h;
}

void write_json(const std::string& path, const ordered_json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

std::uint64_t require_seed(const Options& o, const char* command) {
  if (!o.seed) throw ValidationError(std::string(command) + " needs --seed");
  return *o.seed;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ValidationError(std::string("missing required ") + flag);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

TableLoad load_any_table(const Options& o) {
  if (!o.schema.empty()) return load_table(o.input, load_schema(o.schema));
  std::string text = read_file(o.input);
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
  const auto first = text.substr(0, text.find('\n'));
  auto header_cells = split_csv_line(first.empty() || first.back() != '\r' ? first : first.substr(0, first.size() - 1));
  return parse_table(text, infer_schema(header_cells));
}

ordered_json rejected_json(const std::vector<RowIssue>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) arr.push_back({{"line", r.line}, {"message", r.message}});
  return arr;
}

void warn_rejected(const TableLoad& t, std::ostream& err) {
  if (!t.rejected.empty()) {
    err << "warning: " << t.rejected.size() << " row(s) rejected; run ingest for details\n";
  }
}

// ---- ingest / aggregate ----------------------------------------------------

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.input, "--input");
  require(o.output, "--output");
  const auto load = load_any_table(o);
  write_file_atomic(o.output, format_table(load.table));
  ordered_json rep;
  rep["header"] = header("ingest", {{"input", o.input}, {"schema", o.schema}, {"output", o.output}}, std::nullopt);
  rep["accepted"] = load.table.records.size();
  rep["rejected"] = rejected_json(load.rejected);
  if (!o.report.empty()) write_json(o.report, rep);
  out << load.table.records.size() << " accepted, " << load.rejected.size() << " rejected\n";
  for (const auto& r : load.rejected) err << "line " << r.line << ": " << r.message << "\n";
  return 0;
}

int cmd_aggregate(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.input, "--input");
  require(o.output, "--output");
  auto load = load_any_table(o);
  warn_rejected(load, err);
  load.table.records = aggregate_dataset(std::move(load.table.records));
  ensure_aggregate_columns(load.table);
  write_file_atomic(o.output, format_table(load.table));
  if (!o.report.empty()) {
    ordered_json rep;
    rep["header"] = header("aggregate", {{"input", o.input}, {"schema", o.schema}, {"output", o.output}},
                           std::nullopt);
    rep["records"] = load.table.records.size();
    rep["rejected"] = rejected_json(load.rejected);
    write_json(o.report, rep);
  }
  out << "aggregated " << load.table.records.size() << " records\n";
  return 0;
}

// ---- itest -------------------------------------------------------------------

ordered_json result_json(const itest::TestResult& r) {
  ordered_json j;
  j["method"] = std::string(itest::to_string(r.method));
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["dof"] = r.dof ? ordered_json(*r.dof) : ordered_json(nullptr);
  j["null_kind"] = std::string(itest::to_string(r.null_kind));
  return j;
}

ordered_json consensus_json(const ConsensusMatrix& m) {
  ordered_json cells = ordered_json::array();
  for (const auto& t : m.traits) {
    for (const auto& f : m.features) {
      const auto& c = m.at(t, f);
      ordered_json cell;
      cell["trait"] = t;
      cell["feature"] = f;
      cell["rows_used"] = c.rows_used;
      cell["significant"] = c.significant;
      cell["applied"] = c.applied;
      cell["results"] = ordered_json::array();
      for (const auto& r : c.results) cell["results"].push_back(result_json(r));
      cell["skipped"] = ordered_json::array();
      for (const auto& s : c.skipped) {
        cell["skipped"].push_back({{"method", std::string(itest::to_string(s.method))}, {"reason", s.reason}});
      }
      cells.push_back(cell);
    }
  }
  ordered_json matrix = ordered_json::array();
  for (const auto& t : m.traits) {
    ordered_json row = ordered_json::array();
    for (const auto& f : m.features) {
      const auto& c = m.at(t, f);
      row.push_back(std::to_string(c.significant) + "/" + std::to_string(c.applied));
    }
    matrix.push_back(row);
  }
  ordered_json j;
  j["alpha"] = m.alpha;
  j["traits"] = m.traits;
  j["features"] = m.features;
  j["matrix"] = matrix;
  j["cells"] = cells;
  return j;
}

std::string consensus_csv_from_json(const json& j) {
  ConsensusMatrix m;
  m.traits = j.at("traits").get<std::vector<std::string>>();
  m.features = j.at("features").get<std::vector<std::string>>();
  for (const auto& c : j.at("cells")) {
    ConsensusCell cell;
    cell.significant = c.at("significant").get<int>();
    cell.applied = c.at("applied").get<int>();
    m.cells[{c.at("trait").get<std::string>(), c.at("feature").get<std::string>()}] = cell;
  }
  return format_consensus_csv(m);
}

int cmd_itest(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.input, "--input");
  require(o.output, "--output");
  const auto seed = require_seed(o, "itest");
  auto load = load_any_table(o);
  warn_rejected(load, err);
  ConsensusOptions co;
  co.alpha = o.alpha;
  co.methods = itest::parse_methods(o.tests);
  co.bins = o.bins;
  co.kernel.seed = seed;
  co.kernel.permutations = o.permutations;
  if (o.permutations < 1) throw ValidationError("--permutations must be >= 1");
  if (o.hsic_null == "gamma") {
    co.kernel.hsic_null = itest::HsicNull::gamma;
  } else if (o.hsic_null != "permutation") {
    throw ValidationError("--hsic-null must be permutation or gamma");
  }
  if (o.kci_null == "permutation") {
    co.kernel.kci_null = itest::KciNull::permutation;
  } else if (o.kci_null != "spectral") {
    throw ValidationError("--kci-null must be spectral or permutation");
  }
  std::vector<std::string> traits = split_list(o.traits);
  if (traits.empty()) {
    for (char c : kTraitLetters) traits.push_back(std::string("final_") + c);
  }
  std::vector<std::string> features = split_list(o.features);
  if (features.empty()) features = default_features(load.table);
  if (features.empty()) throw ValidationError("table has no usable feature columns");
  const auto m = consensus(load.table, traits, features, co);

  if (o.format == "csv") {
    write_file_atomic(o.output, format_consensus_csv(m));
  } else {
    ordered_json cfg;
    cfg["input"] = o.input;
    cfg["schema"] = o.schema;
    cfg["alpha"] = o.alpha;
    cfg["tests"] = o.tests;
    cfg["traits"] = traits;
    cfg["features"] = features;
    cfg["bins"] = o.bins;
    cfg["permutations"] = o.permutations;
    cfg["hsic_null"] = o.hsic_null;
    cfg["kci_null"] = o.kci_null;
    ordered_json rep;
    rep["header"] = header("itest", cfg, seed);
    rep["rejected_rows"] = load.rejected.size();
    rep["consensus"] = consensus_json(m);
    write_json(o.output, rep);
  }
  out << "tested " << traits.size() << " traits x " << features.size() << " features\n";
  return 0;
}

// ---- synth -------------------------------------------------------------------

ordered_json int_matrix(const Eigen::MatrixXi& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

ordered_json real_matrix(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

std::string write_blob(const fs::path& dir, const std::string& name, const Eigen::MatrixXd& m) {
  const fs::path blob = dir / name;
  write_embeddings(EmbeddingMatrix::from_eigen(m), blob, sidecar_path_for(blob), ElementType::f32);
  return name;
}

Eigen::MatrixXd read_blob(const fs::path& dir, const std::string& name) {
  const fs::path blob = dir / name;
  return load_embeddings(blob, sidecar_path_for(blob)).to_eigen();
}

SynthSpec spec_from_options(const Options& o) {
  if (!o.preset.empty() && !o.config.empty()) throw ValidationError("use either --preset or --config");
  if (!o.config.empty()) {
    json j;
    try {
      j = json::parse(read_file(o.config));
    } catch (const json::exception& e) {
      throw ValidationError("config " + o.config + ": " + e.what());
    }
    return j.get<SynthSpec>();
  }
  if (o.preset.empty() || o.preset == "fig5") return default_fig5_spec();
  throw ValidationError("unknown preset '" + o.preset + "'");
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream&) {
  require(o.output, "--output");
  const auto seed = require_seed(o, "synth");
  SynthSpec spec = spec_from_options(o);
  spec.seed = seed;
  const auto batch = sample(spec, o.n, o.stream);
  const fs::path manifest(o.output);
  const fs::path dir = manifest.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  const std::string stem = manifest.stem().string();

  ordered_json files;
  files["s"] = write_blob(dir, stem + ".s.f32", batch.s);
  files["z"] = ordered_json::array();
  files["x"] = ordered_json::array();
  for (std::size_t m = 0; m < batch.z.size(); ++m) {
    files["z"].push_back(write_blob(dir, stem + ".z" + std::to_string(m) + ".f32", batch.z[m]));
    ordered_json xs = ordered_json::array();
    for (std::size_t k = 0; k < batch.x[m].size(); ++k) {
      xs.push_back(write_blob(dir, stem + ".x" + std::to_string(m) + "_" + std::to_string(k) + ".f32",
                              batch.x[m][k]));
    }
    files["x"].push_back(xs);
  }
  const auto params = draw_params(spec);
  json spec_json = spec;
  ordered_json cfg;
  cfg["preset"] = o.preset;
  cfg["config"] = o.config;
  cfg["n"] = o.n;
  cfg["stream"] = o.stream;
  ordered_json rep;
  rep["header"] = header("synth", cfg, seed);
  rep["format"] = "persona-synth";
  rep["rows"] = o.n;
  rep["stream"] = o.stream;
  rep["spec"] = ordered_json::parse(spec_json.dump());
  rep["truth"] = {{"adjacency", int_matrix(spec.adjacency)},
                  {"weights", real_matrix(params.weights)},
                  {"shared_weights", real_matrix(params.shared_weights)}};
  rep["files"] = files;
  write_json(o.output, rep);
  out << "wrote " << o.n << " rows to " << o.output << "\n";
  return 0;
}

struct Dataset {
  std::vector<Eigen::MatrixXd> x;  // per modality, measurements side by side
  std::optional<SynthSpec> spec;
  std::vector<Eigen::MatrixXd> z;
  std::optional<Eigen::MatrixXd> s;
};

Dataset load_dataset(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("dataset manifest " + path + ": " + e.what());
  }
  const fs::path dir = fs::path(path).parent_path();
  Dataset d;
  try {
    for (const auto& mod : j.at("files").at("x")) {
      std::vector<Eigen::MatrixXd> parts;
      Eigen::Index cols = 0;
      for (const auto& name : mod) {
        parts.push_back(read_blob(dir, name.get<std::string>()));
        cols += parts.back().cols();
        if (parts.back().rows() != parts.front().rows()) throw ValidationError("measurement row counts differ");
      }
      if (parts.empty()) throw ValidationError("modality without measurements");
      Eigen::MatrixXd x(parts.front().rows(), cols);
      Eigen::Index c = 0;
      for (const auto& p : parts) {
        x.middleCols(c, p.cols()) = p;
        c += p.cols();
      }
      d.x.push_back(std::move(x));
    }
    if (j.contains("spec")) d.spec = j.at("spec").get<SynthSpec>();
    const auto& files = j.at("files");
    if (files.contains("z")) {
      for (const auto& name : files.at("z")) d.z.push_back(read_blob(dir, name.get<std::string>()));
    }
    if (files.contains("s")) d.s = read_blob(dir, files.at("s").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError("dataset manifest " + path + ": " + e.what());
  }
  if (d.x.empty()) throw ValidationError("dataset has no modalities");
  return d;
}

// ---- train / eval ------------------------------------------------------------

crl::ModelConfig model_config(const json& cfg, const Dataset& data) {
  const json model = cfg.value("model", json::object());
  crl::ModelConfig c;
  const int eta = model.value("eta_dim", 0);
  if (model.contains("modalities")) {
    c = crl::model_config_from_json(model);
  } else if (data.spec) {
    c = crl::config_for(*data.spec, eta);
  } else {
    throw ValidationError("model dimensions are required for data without a synthetic spec");
  }
  c.hidden = model.value("hidden", c.hidden);
  c.layers = model.value("layers", c.layers);
  c.flow_hidden = model.value("flow_hidden", c.flow_hidden);
  c.flow_layers = model.value("flow_layers", c.flow_layers);
  return c;
}

ordered_json parts_json(const crl::LossParts& p) {
  return {{"total", p.total}, {"recon", p.recon}, {"ind", p.ind}, {"sparsity", p.sparsity}};
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.input, "--input");
  require(o.output, "--output");
  json cfg = json::object();
  if (!o.config.empty()) {
    try {
      cfg = json::parse(read_file(o.config));
    } catch (const json::exception& e) {
      throw ValidationError("config " + o.config + ": " + e.what());
    }
  }
  json train_json = cfg.value("train", json::object());
  if (o.seed) train_json["seed"] = *o.seed;
  if (!train_json.contains("seed")) throw ValidationError("train needs --seed or train.seed in --config");
  const auto tc = crl::train_config_from_json(train_json);
  const auto data = load_dataset(o.input);
  crl::CrlModel model(model_config(cfg, data));
  model.init(tc.seed);

  ordered_json echo;
  echo["input"] = o.input;
  echo["config_file"] = o.config;
  echo["model"] = ordered_json::parse(crl::to_json(model.config()).dump());
  echo["train"] = ordered_json::parse(crl::to_json(tc).dump());
  ordered_json rep;
  rep["header"] = header("train", echo, tc.seed);
  try {
    const auto result = crl::train(model, data.x, tc);
    ordered_json trace = ordered_json::array();
    for (const auto& p : result.epochs) trace.push_back(parts_json(p));
    rep["status"] = "ok";
    rep["final"] = parts_json(result.epochs.back());
    rep["trace"] = trace;
    crl::save_model(model, o.output, json::parse(rep.dump()));
    out << "trained " << tc.epochs << " epochs, final loss " << result.epochs.back().total << "\n";
    return 0;
  } catch (const crl::TrainingDiverged& e) {
    rep["status"] = "diverged";
    rep["epoch"] = e.epoch();
    rep["error"] = e.what();
    write_json(o.output, rep);
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream&) {
  require(o.input, "--input");
  require(o.model, "--model");
  require(o.output, "--output");
  const auto model = crl::load_model(o.model);
  const auto data = load_dataset(o.input);
  if (data.z.empty()) throw ValidationError("evaluation data carries no true latents");
  const auto post = model.encode(data.x);
  const Eigen::MatrixXd learned = post.latent_means(model.config().shared_dim, model.config().modalities);
  Eigen::Index zc = 0;
  for (const auto& z : data.z) zc += z.cols();
  Eigen::MatrixXd truth(data.z.front().rows(), zc);
  zc = 0;
  for (const auto& z : data.z) {
    truth.middleCols(zc, z.cols()) = z;
    zc += z.cols();
  }
  const auto r = crl::eval_recovery(learned, truth);
  ordered_json cfg;
  cfg["input"] = o.input;
  cfg["model"] = o.model;
  cfg["threshold"] = o.threshold;
  ordered_json rep;
  rep["header"] = header("eval", cfg, std::nullopt);
  rep["mcc"] = r.mcc;
  rep["r2_mean"] = r.r2_mean;
  rep["r2"] = r.r2;
  rep["assignment"] = r.assignment;
  rep["abs_corr"] = real_matrix(r.abs_corr);
  rep["adjacency"] = real_matrix(model.adjacency());
  const auto g = crl::extract_graph(model.adjacency(), o.threshold, r.assignment);
  rep["graph"] = int_matrix(g);
  rep["edges"] = crl::edge_count(g);
  if (data.spec) {
    rep["shd"] = crl::shd(g, data.spec->adjacency);
    rep["true_edges"] = crl::edge_count(data.spec->adjacency);
  }
  write_json(o.output, rep);
  out << "mcc " << r.mcc << " r2 " << r.r2_mean << "\n";
  return 0;
}

// ---- eval-llm / report ---------------------------------------------------------

std::vector<std::pair<ModelEvalRecord, double>> ranked(std::vector<ModelEvalRecord> recs) {
  std::vector<std::pair<ModelEvalRecord, double>> out;
  for (auto& r : recs) {
    const double os = overall_score(r);
    out.emplace_back(std::move(r), os);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.first.dataset != b.first.dataset) return a.first.dataset < b.first.dataset;
    return a.second > b.second;
  });
  return out;
}

std::string ranking_csv(const json& rows) {
  std::string s = "dataset,rank,model_id,gt,mr,ir,pp,of,cc,fa,os\n";
  for (const auto& r : rows) {
    std::ostringstream line;
    line.precision(17);
    line << csv_escape(r.at("dataset").get<std::string>()) << ',' << r.at("rank").get<int>() << ','
         << csv_escape(r.at("model_id").get<std::string>());
    for (const char* k : {"gt", "mr", "ir", "pp", "of", "cc", "fa", "os"}) line << ',' << r.at(k).get<double>();
    s += line.str() + "\n";
  }
  return s;
}

int cmd_eval_llm(const Options& o, std::ostream& out, std::ostream&) {
  require(o.input, "--input");
  require(o.output, "--output");
  const auto rows = ranked(load_eval_records(o.input));
  ordered_json arr = ordered_json::array();
  std::string current;
  int rank = 0;
  for (const auto& [r, os] : rows) {
    if (r.dataset != current || rank == 0) {
      current = r.dataset;
      rank = 0;
    }
    ++rank;
    ordered_json j;
    j["dataset"] = r.dataset;
    j["rank"] = rank;
    j["model_id"] = r.model_id;
    j["gt"] = r.gt;
    j["mr"] = r.mr;
    j["ir"] = r.ir;
    j["pp"] = r.pp;
    j["of"] = r.of;
    j["cc"] = r.cc;
    j["fa"] = r.fa;
    j["os"] = os;
    arr.push_back(j);
  }
  if (o.format == "csv") {
    write_file_atomic(o.output, ranking_csv(json::parse(arr.dump())));
  } else {
    ordered_json rep;
    rep["header"] = header("eval-llm", {{"input", o.input}}, std::nullopt);
    rep["ranking"] = arr;
    write_json(o.output, rep);
  }
  out << "ranked " << rows.size() << " records\n";
  return 0;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  require(o.input, "--input");
  require(o.output, "--output");
  json j;
  try {
    j = json::parse(read_file(o.input));
  } catch (const json::exception& e) {
    throw ValidationError("report " + o.input + ": " + e.what());
  }
  const std::string command = j.contains("header") ? j["header"].value("command", "") : "";
  std::string csv;
  if (command == "itest") {
    csv = consensus_csv_from_json(j.at("consensus"));
  } else if (command == "eval-llm") {
    csv = ranking_csv(j.at("ranking"));
  } else if (command == "eval") {
    std::ostringstream s;
    s.precision(17);
    s << "metric,value\nmcc," << j.at("mcc").get<double>() << "\nr2_mean," << j.at("r2_mean").get<double>()
      << "\nedges," << j.at("edges").get<int>() << "\n";
    if (j.contains("shd")) s << "shd," << j.at("shd").get<int>() << "\n";
    csv = s.str();
  } else {
    throw ValidationError("no CSV projection for report of command '" + command + "'");
  }
  if (o.format != "csv") throw ValidationError("report converts JSON reports; use --format csv");
  write_file_atomic(o.output, csv);
  out << "wrote " << o.output << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"persona: trait aggregation, independence testing and causal representation learning"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--input", o.input, "input path");
    sub->add_option("--output", o.output, "output path");
    sub->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  };
  auto* ingest = app.add_subcommand("ingest", "validate a CSV table and write the accepted rows");
  common(ingest);
  ingest->add_option("--schema", o.schema, "schema JSON");
  ingest->add_option("--report", o.report, "JSON report with rejected rows");
  auto* aggregate = app.add_subcommand("aggregate", "aggregate per-model scores and facial votes");
  common(aggregate);
  aggregate->add_option("--schema", o.schema, "schema JSON");
  aggregate->add_option("--report", o.report, "JSON report");
  auto* it = app.add_subcommand("itest", "independence tests and consensus matrix");
  common(it);
  it->add_option("--schema", o.schema, "schema JSON");
  it->add_option("--seed", o.seed, "seed for kernel tests");
  it->add_option("--alpha", o.alpha, "significance level");
  it->add_option("--tests", o.tests, "comma list of csq,gsq,hsic,rcit,kci");
  it->add_option("--traits", o.traits, "comma list of trait columns (default final_o..final_n)");
  it->add_option("--features", o.features, "comma list of feature columns (default all usable)");
  it->add_option("--bins", o.bins, "quantile bins for continuous features under CSQ/GSQ");
  it->add_option("--permutations", o.permutations, "permutations for HSIC/RCIT");
  it->add_option("--hsic-null", o.hsic_null, "permutation or gamma");
  it->add_option("--kci-null", o.kci_null, "spectral or permutation");
  auto* sy = app.add_subcommand("synth", "sample a synthetic multi-modal dataset");
  common(sy);
  sy->add_option("--seed", o.seed, "generation seed");
  sy->add_option("--preset", o.preset, "fig5");
  sy->add_option("--config", o.config, "SynthSpec JSON");
  sy->add_option("--n", o.n, "rows");
  sy->add_option("--stream", o.stream, "noise stream (use different streams for held-out data)");
  auto* tr = app.add_subcommand("train", "train the representation model");
  common(tr);
  tr->add_option("--seed", o.seed, "training seed (overrides the config)");
  tr->add_option("--config", o.config, "JSON with \"train\" and \"model\" sections");
  auto* ev = app.add_subcommand("eval", "latent and graph recovery of a trained model");
  common(ev);
  ev->add_option("--model", o.model, "model manifest");
  ev->add_option("--threshold", o.threshold, "adjacency threshold");
  auto* llm = app.add_subcommand("eval-llm", "overall score and ranking of LLM evaluation records");
  common(llm);
  auto* rp = app.add_subcommand("report", "project a JSON report to CSV");
  common(rp);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  try {
    set_thread_cap(thread_cap_from_env());
    if (*ingest) return cmd_ingest(o, out, err);
    if (*aggregate) return cmd_aggregate(o, out, err);
    if (*it) return cmd_itest(o, out, err);
    if (*sy) return cmd_synth(o, out, err);
    if (*tr) return cmd_train(o, out, err);
    if (*ev) return cmd_eval(o, out, err);
    if (*llm) return cmd_eval_llm(o, out, err);
    if (*rp) return cmd_report(o, out, err);
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeFailure& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace persona
