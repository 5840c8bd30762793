#include "persona/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "persona/error.hpp"
#include "persona/io.hpp"
#include "persona/rng.hpp"
#include "persona/stats.hpp"

namespace persona {

const ConsensusCell& ConsensusMatrix::at(const std::string& trait, const std::string& feature) const {
  auto it = cells.find({trait, feature});
  if (it == cells.end()) throw ValidationError("no cell for (" + trait + ", " + feature + ")");
  return it->second;
}

namespace {

enum class FeatureKind { continuous, categorical, ordinal };

struct Column {
  FeatureKind kind = FeatureKind::continuous;
  std::vector<std::optional<double>> values;
};

int trait_slot(const std::string& name) {
  std::string_view s = name;
  if (s.rfind("final_", 0) == 0) s.remove_prefix(6);
  if (s.size() == 1) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    for (std::size_t i = 0; i < kTraitLetters.size(); ++i) {
      if (kTraitLetters[i] == c) return static_cast<int>(i);
    }
  }
  throw ValidationError("unknown trait column '" + name + "'");
}

const ColumnSpec* find_spec(const Table& t, const std::string& name) {
  for (const auto& c : t.schema) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::optional<double> typed_value(const PersonRecord& r, const std::string& name, bool& known) {
  known = true;
  auto from_int = [](const std::optional<int>& v) -> std::optional<double> {
    if (!v) return std::nullopt;
    return static_cast<double>(*v);
  };
  if (name == "height") return r.height;
  if (name == "weight") return r.weight;
  if (name == "latitude") return r.latitude;
  if (name == "longitude") return r.longitude;
  if (name == "birth_year") return from_int(r.birth_year);
  if (name == "birth_month") return from_int(r.birth_month);
  if (name == "birth_day") return from_int(r.birth_day);
  known = false;
  return std::nullopt;
}

Column extract_feature(const Table& t, const std::string& name) {
  const ColumnSpec* spec = find_spec(t, name);
  const bool aggregated_face = name.rfind("face_", 0) == 0 && name.find('@') == std::string::npos;
  const bool aggregated_trait = name.rfind("final_", 0) == 0;
  if (!spec && !aggregated_face && !aggregated_trait) {
    throw ValidationError("unknown column '" + name + "'");
  }
  if (name == "id" || name.rfind("emb:", 0) == 0 || name.find('@') != std::string::npos) {
    throw ValidationError("column '" + name + "' cannot be used as a feature");
  }
  Column col;
  col.values.reserve(t.records.size());
  bool typed = false;
  if (!t.records.empty()) typed_value(t.records.front(), name, typed);
  if (typed) {
    col.kind = FeatureKind::continuous;
    for (const auto& r : t.records) {
      bool k = false;
      col.values.push_back(typed_value(r, name, k));
    }
    return col;
  }
  if (aggregated_face) {
    col.kind = FeatureKind::ordinal;
    const std::string attr = name.substr(5);
    for (const auto& r : t.records) {
      auto it = r.facial_attributes.find(attr);
      col.values.push_back(it == r.facial_attributes.end()
                               ? std::nullopt
                               : std::optional<double>(it->second.value));
    }
    return col;
  }
  if (spec && spec->kind == ColumnKind::score) {
    // <model>_<trait> or final_<trait>
    const auto cut = name.rfind('_');
    const std::string model = name.substr(0, cut);
    const int slot = trait_slot(name.substr(cut + 1));
    col.kind = FeatureKind::ordinal;
    for (const auto& r : t.records) {
      const BigFive* scores = nullptr;
      if (model == "final") {
        if (r.final_scores) scores = &*r.final_scores;
      } else if (auto it = r.per_model_scores.find(model); it != r.per_model_scores.end()) {
        scores = &it->second;
      }
      col.values.push_back(scores ? std::optional<double>((*scores)[slot].value) : std::nullopt);
    }
    return col;
  }
  if (aggregated_trait) {
    const int slot = trait_slot(name);
    col.kind = FeatureKind::ordinal;
    for (const auto& r : t.records) {
      col.values.push_back(r.final_scores ? std::optional<double>((*r.final_scores)[slot].value)
                                          : std::nullopt);
    }
    return col;
  }
  if (spec->kind == ColumnKind::categorical) {
    col.kind = FeatureKind::categorical;
    for (const auto& r : t.records) {
      auto it = r.categories.find(name);
      col.values.push_back(it == r.categories.end() || !it->second
                               ? std::nullopt
                               : std::optional<double>(*it->second));
    }
    return col;
  }
  col.kind = FeatureKind::continuous;
  for (const auto& r : t.records) {
    auto it = r.continuous.find(name);
    col.values.push_back(it == r.continuous.end() ? std::nullopt : it->second);
  }
  return col;
}

std::vector<int> as_codes(const std::vector<double>& v) {
  std::vector<int> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double d) { return static_cast<int>(std::lround(d)); });
  return out;
}

Eigen::MatrixXd one_hot(const std::vector<int>& codes) {
  std::set<int> levels(codes.begin(), codes.end());
  std::vector<int> order(levels.begin(), levels.end());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(codes.size()),
                                            static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto j = std::lower_bound(order.begin(), order.end(), codes[i]) - order.begin();
    m(static_cast<Eigen::Index>(i), j) = 1.0;
  }
  return m;
}

bool selected(const ConsensusOptions& o, itest::Method m) {
  return std::find(o.methods.begin(), o.methods.end(), m) != o.methods.end();
}

}  // namespace

ConsensusCell tally(std::vector<itest::TestResult> results, double alpha) {
  ConsensusCell c;
  c.applied = static_cast<int>(results.size());
  c.significant = static_cast<int>(
      std::count_if(results.begin(), results.end(), [&](const auto& r) { return r.p_value < alpha; }));
  c.results = std::move(results);
  return c;
}

ConsensusMatrix consensus(const Table& table, const std::vector<std::string>& traits,
                          const std::vector<std::string>& features, const ConsensusOptions& opts) {
  if (!(opts.alpha > 0 && opts.alpha < 1)) throw ValidationError("alpha must lie in (0, 1)");
  if (opts.bins < 2) throw ValidationError("need at least 2 bins");
  ConsensusMatrix out;
  out.alpha = opts.alpha;
  out.traits = traits;
  out.features = features;

  std::vector<int> slots;
  for (const auto& t : traits) slots.push_back(trait_slot(t));
  std::vector<Column> columns;
  for (const auto& f : features) columns.push_back(extract_feature(table, f));

  for (std::size_t ti = 0; ti < traits.size(); ++ti) {
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      std::vector<double> xs, ys;
      for (std::size_t r = 0; r < table.records.size(); ++r) {
        const auto& rec = table.records[r];
        if (!rec.final_scores) continue;
        const int score = (*rec.final_scores)[static_cast<std::size_t>(slots[ti])].value;
        const auto& fv = columns[fi].values[r];
        if (score == 0 || !fv) continue;
        xs.push_back(score);
        ys.push_back(*fv);
      }
      if (xs.size() < 5) {
        throw ValidationError("fewer than 5 usable rows for (" + traits[ti] + ", " + features[fi] +
                              ")");
      }
      const auto& col = columns[fi];
      const std::uint64_t cell_seed = derive_seed(opts.kernel.seed, ti, fi);
      std::vector<itest::TestResult> results;
      std::vector<SkippedTest> skipped;
      const auto x_codes = as_codes(xs);
      for (itest::Method m : itest::kAllMethods) {
        if (!selected(opts, m)) {
          skipped.push_back({m, "not selected"});
          continue;
        }
        try {
          if (m == itest::Method::csq || m == itest::Method::gsq) {
            const auto y_codes = col.kind == FeatureKind::continuous
                                     ? stats::quantile_bins(ys, opts.bins)
                                     : as_codes(ys);
            results.push_back(m == itest::Method::csq ? itest::chi_square_test(x_codes, y_codes)
                                                      : itest::g_square_test(x_codes, y_codes));
          } else {
            auto kopts = opts.kernel;
            kopts.seed = derive_seed(cell_seed, static_cast<std::uint64_t>(m));
            const Eigen::MatrixXd y = col.kind == FeatureKind::categorical
                                          ? one_hot(as_codes(ys))
                                          : itest::column(ys);
            results.push_back(itest::kernel_test(m, itest::column(xs), y, kopts));
          }
        } catch (const ValidationError& e) {
          // Degenerate tables and constant columns make a test inapplicable.
          skipped.push_back({m, e.what()});
        }
      }
      auto cell = tally(std::move(results), opts.alpha);
      cell.skipped = std::move(skipped);
      cell.rows_used = static_cast<int>(xs.size());
      out.cells[{traits[ti], features[fi]}] = std::move(cell);
    }
  }
  return out;
}

std::string format_consensus_csv(const ConsensusMatrix& m) {
  std::string s = "trait";
  for (const auto& f : m.features) s += "," + csv_escape(f);
  s += '\n';
  for (const auto& t : m.traits) {
    s += csv_escape(t);
    for (const auto& f : m.features) {
      const auto& c = m.at(t, f);
      s += "," + std::to_string(c.significant) + "/" + std::to_string(c.applied);
    }
    s += '\n';
  }
  return s;
}

std::vector<std::string> default_features(const Table& table) {
  std::vector<std::string> out;
  for (const auto& c : table.schema) {
    const auto& n = c.name;
    if (n == "id" || n.rfind("emb:", 0) == 0 || n.find('@') != std::string::npos) continue;
    if (c.kind == ColumnKind::score && n.rfind("face_", 0) != 0) continue;
    out.push_back(n);
  }
  return out;
}

}  // namespace persona
