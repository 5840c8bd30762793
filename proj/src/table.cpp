#include "persona/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "persona/error.hpp"
#include "persona/io.hpp"

namespace persona {

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::score: return "score";
  }
  return "continuous";
}

ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "score") return ColumnKind::score;
  throw ValidationError("unknown column kind '" + std::string(s) + "'");
}

namespace {

enum class Field { id, height, weight, birth_year, birth_month, birth_day, latitude, longitude };

struct TypedField { Field field; };
struct ModelScore { std::string model; int trait; };
struct FinalScore { int trait; };
struct Face { std::string attr; };
struct FaceVote { std::string attr; int image; };
struct Embedding { std::string modality; int measurement; };
struct GenericContinuous { std::string name; };
struct GenericCategorical { std::string name; };

using Role = std::variant<TypedField, ModelScore, FinalScore, Face, FaceVote, Embedding,
                          GenericContinuous, GenericCategorical>;

const std::map<std::string, Field, std::less<>>& typed_fields() {
  static const std::map<std::string, Field, std::less<>> m{
      {"id", Field::id},
      {"height", Field::height},
      {"weight", Field::weight},
      {"birth_year", Field::birth_year},
      {"birth_month", Field::birth_month},
      {"birth_day", Field::birth_day},
      {"latitude", Field::latitude},
      {"longitude", Field::longitude},
  };
  return m;
}

int trait_index(char c) {
  const auto it = std::find(kTraitLetters.begin(), kTraitLetters.end(), c);
  return it == kTraitLetters.end() ? -1 : static_cast<int>(it - kTraitLetters.begin());
}

/// Splits "<prefix>_<t>" with t a trait letter.
std::optional<std::pair<std::string, int>> split_trait_suffix(std::string_view name) {
  if (name.size() < 3 || name[name.size() - 2] != '_') return std::nullopt;
  const int t = trait_index(name.back());
  if (t < 0) return std::nullopt;
  return std::make_pair(std::string(name.substr(0, name.size() - 2)), t);
}

bool parse_int(std::string_view s, int& out) {
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

/// Integer that may be written with a trailing ".0" (spreadsheet exports).
bool parse_integral(std::string_view s, int& out) {
  if (parse_int(s, out)) return true;
  double d = 0;
  if (!parse_double(s, d) || !std::isfinite(d) || d != std::floor(d) || std::fabs(d) > 2e9) {
    return false;
  }
  out = static_cast<int>(d);
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

Role role_of(const ColumnSpec& c) {
  const std::string& name = c.name;
  if (auto it = typed_fields().find(name); it != typed_fields().end()) {
    if (it->second == Field::id) {
      if (c.kind != ColumnKind::categorical) {
        throw ValidationError("column 'id' must be categorical");
      }
    } else if (c.kind != ColumnKind::continuous) {
      throw ValidationError("column '" + name + "' must be continuous");
    }
    return TypedField{it->second};
  }
  if (name.rfind("emb:", 0) == 0) {
    const auto colon = name.find(':', 4);
    int k = 0;
    if (colon == std::string::npos || !parse_int(std::string_view(name).substr(colon + 1), k)) {
      throw ValidationError("embedding column '" + name + "' must look like emb:<modality>:<k>");
    }
    return Embedding{name.substr(4, colon - 4), k};
  }
  if (c.kind == ColumnKind::score) {
    if (name.rfind("face_", 0) == 0) {
      const std::string rest = name.substr(5);
      const auto at = rest.find('@');
      if (at == std::string::npos) return Face{rest};
      int k = 0;
      if (!parse_int(std::string_view(rest).substr(at + 1), k)) {
        throw ValidationError("facial vote column '" + name + "' must look like face_<attr>@<k>");
      }
      return FaceVote{rest.substr(0, at), k};
    }
    if (auto split = split_trait_suffix(name)) {
      if (split->first == "final") return FinalScore{split->second};
      return ModelScore{split->first, split->second};
    }
    throw ValidationError("score column '" + name +
                          "' must be <model>_<o|c|e|a|n> or face_<attr>[@k]");
  }
  if (c.kind == ColumnKind::continuous) return GenericContinuous{name};
  return GenericCategorical{name};
}

void check_schema(const Schema& schema, const std::vector<Role>& roles) {
  std::set<std::string> names;
  bool has_id = false;
  std::map<std::string, std::set<int>> model_traits;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (!names.insert(schema[i].name).second) {
      throw ValidationError("duplicate column '" + schema[i].name + "'");
    }
    if (auto* tf = std::get_if<TypedField>(&roles[i]); tf && tf->field == Field::id) has_id = true;
    if (auto* ms = std::get_if<ModelScore>(&roles[i])) model_traits[ms->model].insert(ms->trait);
    if (auto* fs = std::get_if<FinalScore>(&roles[i])) model_traits["final"].insert(fs->trait);
  }
  if (!has_id) throw ValidationError("schema has no 'id' column");
  for (const auto& [model, traits] : model_traits) {
    if (traits.size() != 5) {
      throw ValidationError("score columns for '" + model + "' do not cover all five traits");
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace

Schema infer_schema(const std::vector<std::string>& header) {
  Schema schema;
  for (const auto& name : header) {
    ColumnKind kind = ColumnKind::categorical;
    if (auto it = typed_fields().find(name); it != typed_fields().end()) {
      kind = it->second == Field::id ? ColumnKind::categorical : ColumnKind::continuous;
    } else if (name.rfind("emb:", 0) == 0) {
      kind = ColumnKind::continuous;
    } else if (name.rfind("face_", 0) == 0 || split_trait_suffix(name)) {
      kind = ColumnKind::score;
    }
    schema.push_back({name, kind});
  }
  return schema;
}

Schema load_schema(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("schema " + path.string() + ": " + e.what());
  }
  Schema schema;
  for (const auto& c : j.at("columns")) {
    schema.push_back({c.at("name").get<std::string>(),
                      column_kind_from_string(c.at("kind").get<std::string>())});
  }
  return schema;
}

std::vector<std::string> validate_record(const PersonRecord& r) {
  std::vector<std::string> v;
  if (r.id.empty()) v.emplace_back("id is empty");
  if (r.height && !(*r.height > 0)) v.emplace_back("height must be positive");
  if (r.weight && !(*r.weight > 0)) v.emplace_back("weight must be positive");
  if (r.birth_month && (*r.birth_month < 1 || *r.birth_month > 12)) {
    v.emplace_back("birth month out of range");
  }
  if (r.birth_day && (*r.birth_day < 1 || *r.birth_day > 31)) {
    v.emplace_back("birth day out of range");
  }
  if (r.latitude && !(std::fabs(*r.latitude) <= 90.0)) v.emplace_back("latitude out of range");
  if (r.longitude && !(std::fabs(*r.longitude) <= 180.0)) {
    v.emplace_back("longitude out of range");
  }
  for (const auto& [name, value] : r.continuous) {
    if (value && !std::isfinite(*value)) v.push_back(name + " is not finite");
  }
  auto check_scores = [&](const BigFive& b, const std::string& who) {
    for (std::size_t t = 0; t < b.size(); ++t) {
      if (!b[t].in_domain()) {
        v.push_back("trait score out of domain (" + who + "_" + kTraitLetters[t] + " = " +
                    std::to_string(b[t].value) + ")");
      }
    }
  };
  for (const auto& [model, scores] : r.per_model_scores) check_scores(scores, model);
  if (r.final_scores) check_scores(*r.final_scores, "final");
  for (const auto& [attr, value] : r.facial_attributes) {
    if (!value.in_domain()) v.push_back("facial attribute out of domain (" + attr + ")");
  }
  for (const auto& [attr, votes] : r.facial_votes) {
    for (const auto& value : votes) {
      if (!value.in_domain()) {
        v.push_back("facial attribute out of domain (" + attr + " vote)");
        break;
      }
    }
  }
  for (const auto& e : r.embedding_refs) {
    if (e.row < 0) v.push_back("embedding row index negative (" + e.modality + ")");
  }
  return v;
}

TableLoad parse_table(std::string_view csv, const Schema& schema) {
  std::vector<Role> roles;
  roles.reserve(schema.size());
  for (const auto& c : schema) roles.push_back(role_of(c));
  check_schema(schema, roles);

  TableLoad out;
  out.table.schema = schema;

  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= csv.size()) {
      auto end = csv.find('\n', start);
      if (end == std::string_view::npos) end = csv.size();
      lines.emplace_back(csv.substr(start, end - start));
      start = end + 1;
    }
  }
  if (lines.empty() || trim(lines.front()).empty()) throw ValidationError("table has no header");
  std::string header_line = lines.front();
  if (header_line.rfind("\xEF\xBB\xBF", 0) == 0) header_line.erase(0, 3);
  const auto header = split_csv_line(header_line);
  for (const auto& h : header) {
    if (std::none_of(schema.begin(), schema.end(), [&](const ColumnSpec& c) { return c.name == h; })) {
      throw ValidationError("unknown column '" + h + "'");
    }
  }
  if (header.size() != schema.size()) {
    throw ValidationError("header has " + std::to_string(header.size()) + " columns, schema has " +
                          std::to_string(schema.size()));
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] != schema[i].name) {
      throw ValidationError("header column " + std::to_string(i + 1) + " is '" + header[i] +
                            "', schema expects '" + schema[i].name + "'");
    }
  }

  std::map<std::string, std::map<std::string, int>> label_index;
  std::set<std::string> seen_ids;

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(lines[li]).empty() || lines[li] == "\r") continue;
    std::vector<std::string> cells;
    try {
      cells = split_csv_line(lines[li]);
    } catch (const ValidationError& e) {
      out.rejected.push_back({line_no, e.what()});
      continue;
    }
    if (cells.size() != schema.size()) {
      out.rejected.push_back({line_no, "expected " + std::to_string(schema.size()) +
                                           " fields, got " + std::to_string(cells.size())});
      continue;
    }

    PersonRecord r;
    std::vector<std::string> problems;
    std::map<std::string, std::array<std::optional<int>, 5>> model_cells;
    std::array<std::optional<int>, 5> final_cells;
    std::map<std::string, std::map<int, FacialAttributeValue>> votes;

    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const std::string_view cell = trim(cells[ci]);
      const std::string& col = schema[ci].name;
      const bool empty = cell.empty();
      auto number = [&](std::optional<double>& dst) {
        if (empty) return;
        double d = 0;
        if (!parse_double(cell, d)) {
          problems.push_back(col + ": not a number '" + std::string(cell) + "'");
        } else {
          dst = d;
        }
      };
      auto integral = [&](std::optional<int>& dst) {
        if (empty) return;
        int i = 0;
        if (!parse_integral(cell, i)) {
          problems.push_back(col + ": not an integer '" + std::string(cell) + "'");
        } else {
          dst = i;
        }
      };
      std::visit(
          [&](const auto& role) {
            using R = std::decay_t<decltype(role)>;
            if constexpr (std::is_same_v<R, TypedField>) {
              switch (role.field) {
                case Field::id: r.id = std::string(cell); break;
                case Field::height: number(r.height); break;
                case Field::weight: number(r.weight); break;
                case Field::birth_year: integral(r.birth_year); break;
                case Field::birth_month: integral(r.birth_month); break;
                case Field::birth_day: integral(r.birth_day); break;
                case Field::latitude: number(r.latitude); break;
                case Field::longitude: number(r.longitude); break;
              }
            } else if constexpr (std::is_same_v<R, ModelScore>) {
              integral(model_cells[role.model][static_cast<std::size_t>(role.trait)]);
            } else if constexpr (std::is_same_v<R, FinalScore>) {
              integral(final_cells[static_cast<std::size_t>(role.trait)]);
            } else if constexpr (std::is_same_v<R, Face>) {
              std::optional<int> v;
              integral(v);
              if (v) r.facial_attributes[role.attr] = FacialAttributeValue{*v};
            } else if constexpr (std::is_same_v<R, FaceVote>) {
              std::optional<int> v;
              integral(v);
              if (v) votes[role.attr][role.image] = FacialAttributeValue{*v};
            } else if constexpr (std::is_same_v<R, Embedding>) {
              std::optional<int> v;
              integral(v);
              if (v) r.embedding_refs.push_back({role.modality, role.measurement, *v});
            } else if constexpr (std::is_same_v<R, GenericContinuous>) {
              number(r.continuous[role.name]);
            } else {
              auto& dst = r.categories[role.name];
              if (!empty) {
                auto& dict = label_index[role.name];
                auto [it, inserted] = dict.emplace(std::string(cell), static_cast<int>(dict.size()));
                if (inserted) out.table.labels[role.name].emplace_back(cell);
                dst = it->second;
              }
            }
          },
          roles[ci]);
    }

    auto assemble = [&](const std::array<std::optional<int>, 5>& c, const std::string& who)
        -> std::optional<BigFive> {
      const auto present = std::count_if(c.begin(), c.end(), [](const auto& x) { return x.has_value(); });
      if (present == 0) return std::nullopt;
      if (present != 5) {
        problems.push_back("incomplete Big Five scores for '" + who + "'");
        return std::nullopt;
      }
      BigFive b;
      for (std::size_t t = 0; t < 5; ++t) b[t] = TraitScore{*c[t]};
      return b;
    };
    for (const auto& [model, c] : model_cells) {
      if (auto b = assemble(c, model)) r.per_model_scores[model] = *b;
    }
    r.final_scores = assemble(final_cells, "final");
    for (auto& [attr, by_image] : votes) {
      auto& dst = r.facial_votes[attr];
      for (const auto& [k, v] : by_image) dst.push_back(v);
    }

    for (auto& v : validate_record(r)) problems.push_back(std::move(v));
    if (!r.id.empty() && !seen_ids.insert(r.id).second) {
      problems.push_back("duplicate id '" + r.id + "'");
    }
    if (!problems.empty()) {
      std::string msg;
      for (std::size_t i = 0; i < problems.size(); ++i) {
        if (i) msg += "; ";
        msg += problems[i];
      }
      out.rejected.push_back({line_no, msg});
      continue;
    }
    out.table.records.push_back(std::move(r));
  }
  return out;
}

TableLoad load_table(const std::filesystem::path& path, const Schema& schema) {
  return parse_table(read_file(path), schema);
}

void ensure_aggregate_columns(Table& t) {
  auto has = [&](const std::string& name) {
    return std::any_of(t.schema.begin(), t.schema.end(),
                       [&](const ColumnSpec& c) { return c.name == name; });
  };
  for (char letter : kTraitLetters) {
    std::string name = std::string("final_") + letter;
    if (!has(name)) t.schema.push_back({name, ColumnKind::score});
  }
  std::set<std::string> attrs;
  for (const auto& r : t.records) {
    for (const auto& [attr, votes] : r.facial_votes) attrs.insert(attr);
  }
  for (const auto& attr : attrs) {
    if (!has("face_" + attr)) t.schema.push_back({"face_" + attr, ColumnKind::score});
  }
}

std::string format_table(const Table& t) {
  std::vector<Role> roles;
  for (const auto& c : t.schema) roles.push_back(role_of(c));
  std::ostringstream os;
  for (std::size_t i = 0; i < t.schema.size(); ++i) {
    if (i) os << ',';
    os << csv_escape(t.schema[i].name);
  }
  os << '\n';
  auto opt = [](const auto& v) -> std::string {
    if (!v) return "";
    if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, double>) {
      return format_double(*v);
    } else {
      return std::to_string(*v);
    }
  };
  for (const auto& r : t.records) {
    for (std::size_t ci = 0; ci < t.schema.size(); ++ci) {
      if (ci) os << ',';
      std::string cell = std::visit(
          [&](const auto& role) -> std::string {
            using R = std::decay_t<decltype(role)>;
            if constexpr (std::is_same_v<R, TypedField>) {
              switch (role.field) {
                case Field::id: return r.id;
                case Field::height: return opt(r.height);
                case Field::weight: return opt(r.weight);
                case Field::birth_year: return opt(r.birth_year);
                case Field::birth_month: return opt(r.birth_month);
                case Field::birth_day: return opt(r.birth_day);
                case Field::latitude: return opt(r.latitude);
                case Field::longitude: return opt(r.longitude);
              }
              return "";
            } else if constexpr (std::is_same_v<R, ModelScore>) {
              auto it = r.per_model_scores.find(role.model);
              if (it == r.per_model_scores.end()) return "";
              return std::to_string(it->second[static_cast<std::size_t>(role.trait)].value);
            } else if constexpr (std::is_same_v<R, FinalScore>) {
              if (!r.final_scores) return "";
              return std::to_string((*r.final_scores)[static_cast<std::size_t>(role.trait)].value);
            } else if constexpr (std::is_same_v<R, Face>) {
              auto it = r.facial_attributes.find(role.attr);
              return it == r.facial_attributes.end() ? "" : std::to_string(it->second.value);
            } else if constexpr (std::is_same_v<R, FaceVote>) {
              // Votes are stored in column order; recover the k-th image column.
              auto it = r.facial_votes.find(role.attr);
              if (it == r.facial_votes.end()) return "";
              std::vector<int> images;
              for (std::size_t j = 0; j < t.schema.size(); ++j) {
                if (auto* fv = std::get_if<FaceVote>(&roles[j]); fv && fv->attr == role.attr) {
                  images.push_back(fv->image);
                }
              }
              std::sort(images.begin(), images.end());
              const auto pos = static_cast<std::size_t>(
                  std::find(images.begin(), images.end(), role.image) - images.begin());
              return pos < it->second.size() ? std::to_string(it->second[pos].value) : "";
            } else if constexpr (std::is_same_v<R, Embedding>) {
              for (const auto& e : r.embedding_refs) {
                if (e.modality == role.modality && e.measurement == role.measurement) {
                  return std::to_string(e.row);
                }
              }
              return "";
            } else if constexpr (std::is_same_v<R, GenericContinuous>) {
              auto it = r.continuous.find(role.name);
              return it == r.continuous.end() ? "" : opt(it->second);
            } else {
              auto it = r.categories.find(role.name);
              if (it == r.categories.end() || !it->second) return "";
              const auto& dict = t.labels.at(role.name);
              return dict.at(static_cast<std::size_t>(*it->second));
            }
          },
          roles[ci]);
      os << csv_escape(cell);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace persona
