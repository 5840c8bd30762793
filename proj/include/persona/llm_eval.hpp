#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace persona {

struct ModelEvalRecord {
  std::string model_id;
  std::string dataset;  // optional grouping column
  double gt = 0;        // generation time, seconds
  double mr = 0, ir = 0, pp = 0, of = 0, cc = 0, fa = 0;
};

/// Throws ValidationError when a rate leaves [0, 1] or gt is negative.
void validate(const ModelEvalRecord& r);

/// Mean of PP, OF, CC, FA, 1 - MR and 1 - IR. Generation time is excluded.
double overall_score(const ModelEvalRecord& r);

/// CSV with header model_id[,dataset],gt,mr,ir,pp,of,cc,fa (any order;
/// "model" is accepted for model_id).
std::vector<ModelEvalRecord> parse_eval_records(std::string_view csv);
std::vector<ModelEvalRecord> load_eval_records(const std::filesystem::path& path);

struct PromptStd {
  std::array<double, 5> per_trait{};
  double mean = 0;
};

/// Per-trait sample standard deviation over runs (rows of 5 scores).
PromptStd intra_prompt_std(std::span<const std::array<double, 5>> runs);

/// Sum of absolute differences. Throws ValidationError on length mismatch
/// or when the vectors are not of length 5.
double manhattan_between_prompts(std::span<const double> a, std::span<const double> b);

/// Per-trait mean over runs.
std::array<double, 5> prompt_means(std::span<const std::array<double, 5>> runs);

}  // namespace persona
