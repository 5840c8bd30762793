#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "persona/itest.hpp"
#include "persona/table.hpp"

namespace persona {

struct SkippedTest {
  itest::Method method;
  std::string reason;
};

struct ConsensusCell {
  int significant = 0;
  int applied = 0;
  int rows_used = 0;
  std::vector<itest::TestResult> results;
  std::vector<SkippedTest> skipped;
};

struct ConsensusMatrix {
  double alpha = 0.05;
  std::vector<std::string> traits;
  std::vector<std::string> features;
  std::map<std::pair<std::string, std::string>, ConsensusCell> cells;

  [[nodiscard]] const ConsensusCell& at(const std::string& trait, const std::string& feature) const;
};

struct ConsensusOptions {
  double alpha = 0.05;
  std::vector<itest::Method> methods{std::begin(itest::kAllMethods), std::end(itest::kAllMethods)};
  /// Quantile bins for continuous features under CSQ/GSQ.
  int bins = 3;
  /// Base options for the kernel tests; the seed is re-derived per cell.
  itest::KernelTestOptions kernel;
};

/// Trait columns are final_<o|c|e|a|n> (a bare trait letter is accepted).
/// Features may be any typed, generic, per-model score or aggregated facial
/// column. Rows with a 0 trait score or a missing feature value are dropped
/// per pair. Throws ValidationError for unknown or unusable columns and for
/// pairs with fewer than 5 usable rows.
ConsensusMatrix consensus(const Table& table, const std::vector<std::string>& traits,
                          const std::vector<std::string>& features,
                          const ConsensusOptions& opts = {});

/// Cell counts from finished results: #{p < alpha} over the results given.
ConsensusCell tally(std::vector<itest::TestResult> results, double alpha);

/// Rows are traits, columns features, cells "significant/applied".
std::string format_consensus_csv(const ConsensusMatrix& m);

/// Feature columns usable by consensus(), in schema order.
std::vector<std::string> default_features(const Table& table);

}  // namespace persona
