#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace persona {

/// One Big Five trait score on the 0..3 scale. 0 means "insufficient
/// information", not "low". The raw value is kept even when out of domain
/// so that validation can report it.
struct TraitScore {
  int value = 0;

  [[nodiscard]] constexpr bool in_domain() const { return value >= 0 && value <= 3; }
  friend constexpr bool operator==(TraitScore, TraitScore) = default;
};

inline constexpr std::array<char, 5> kTraitLetters{'o', 'c', 'e', 'a', 'n'};

/// Scores in the fixed order O, C, E, A, N.
using BigFive = std::array<TraitScore, 5>;

/// -1 absent, 0 unknown/indeterminate, +1 present.
struct FacialAttributeValue {
  int value = 0;

  [[nodiscard]] constexpr bool in_domain() const { return value >= -1 && value <= 1; }
  friend constexpr bool operator==(FacialAttributeValue, FacialAttributeValue) = default;
};

struct EmbeddingRef {
  std::string modality;
  int measurement = 0;
  int row = 0;
  friend bool operator==(const EmbeddingRef&, const EmbeddingRef&) = default;
};

struct PersonRecord {
  std::string id;
  std::optional<double> height;  // cm
  std::optional<double> weight;  // kg
  std::optional<int> birth_year;
  std::optional<int> birth_month;
  std::optional<int> birth_day;
  std::optional<double> latitude;
  std::optional<double> longitude;
  /// Other continuous columns, keyed by column name.
  std::map<std::string, std::optional<double>> continuous;
  /// Categorical columns as indices into the table's label dictionary.
  std::map<std::string, std::optional<int>> categories;
  std::map<std::string, BigFive> per_model_scores;
  std::optional<BigFive> final_scores;
  std::map<std::string, FacialAttributeValue> facial_attributes;
  /// Per-image votes, aggregated into facial_attributes.
  std::map<std::string, std::vector<FacialAttributeValue>> facial_votes;
  std::vector<EmbeddingRef> embedding_refs;

  friend bool operator==(const PersonRecord&, const PersonRecord&) = default;
};

enum class ColumnKind { continuous, categorical, score };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view s);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

using Schema = std::vector<ColumnSpec>;

/// Column-name conventions understood by the loader:
///   id                                  record id
///   height weight latitude longitude    typed continuous fields
///   birth_year birth_month birth_day    integer fields (continuous kind)
///   <model>_{o,c,e,a,n}                 per-model Big Five (score kind)
///   final_{o,c,e,a,n}                   aggregated Big Five (score kind)
///   face_<attr>                         aggregated facial attribute (score)
///   face_<attr>@<k>                     per-image facial vote (score)
///   emb:<modality>:<measurement>        embedding row index
/// Anything else goes to the generic continuous/categorical maps.
Schema infer_schema(const std::vector<std::string>& header);

/// Reads {"columns":[{"name":..., "kind":"continuous|categorical|score"}]}.
Schema load_schema(const std::filesystem::path& path);

struct Table {
  Schema schema;
  std::vector<PersonRecord> records;
  /// Label dictionary per categorical column: index -> label.
  std::map<std::string, std::vector<std::string>> labels;

  friend bool operator==(const Table&, const Table&) = default;
};

struct RowIssue {
  std::size_t line = 0;  // 1-based line in the file
  std::string message;
};

struct TableLoad {
  Table table;
  std::vector<RowIssue> rejected;
};

/// Loads a CSV table. Structural problems (unreadable file, header not
/// matching the schema, unknown column) throw ValidationError. Row-level
/// problems are collected in `rejected` with their line number; every
/// data row ends up either in `table.records` or in `rejected`.
TableLoad load_table(const std::filesystem::path& path, const Schema& schema);

/// Same, from in-memory CSV text.
TableLoad parse_table(std::string_view csv, const Schema& schema);

/// Every violated invariant of `r`; empty means valid.
std::vector<std::string> validate_record(const PersonRecord& r);

/// Serializes in schema column order; absent values become empty cells.
std::string format_table(const Table& t);

/// Adds final_{o..n} and aggregated face_<attr> columns if not present.
void ensure_aggregate_columns(Table& t);

}  // namespace persona
