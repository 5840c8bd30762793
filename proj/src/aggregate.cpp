#include "persona/aggregate.hpp"

#include <algorithm>
#include <vector>

#include "persona/error.hpp"

namespace persona {

TraitScore aggregate_trait(std::span<const TraitScore> votes) {
  if (votes.empty()) throw ValidationError("aggregate_trait: empty vote list");
  std::vector<int> kept;
  kept.reserve(votes.size());
  for (const auto v : votes) {
    if (!v.in_domain()) {
      throw ValidationError("aggregate_trait: vote " + std::to_string(v.value) + " out of domain");
    }
    if (v.value != 0) kept.push_back(v.value);
  }
  if (kept.empty()) return TraitScore{0};
  std::sort(kept.begin(), kept.end());
  const std::size_t n = kept.size();
  if (n % 2 == 1) return TraitScore{kept[n / 2]};
  // ceil((a + b) / 2) for positive integers.
  const int sum = kept[n / 2 - 1] + kept[n / 2];
  return TraitScore{(sum + 1) / 2};
}

FacialAttributeValue aggregate_attribute(std::span<const FacialAttributeValue> votes) {
  int present = 0;
  int absent = 0;
  for (const auto v : votes) {
    if (v.value == 1) ++present;
    if (v.value == -1) ++absent;
  }
  if (present > absent) return FacialAttributeValue{1};
  if (absent > present) return FacialAttributeValue{-1};
  return FacialAttributeValue{0};
}

void aggregate_record(PersonRecord& r) {
  if (r.per_model_scores.empty()) {
    throw ValidationError("record '" + r.id + "' has no model scores");
  }
  BigFive final{};
  std::vector<TraitScore> votes;
  for (std::size_t t = 0; t < final.size(); ++t) {
    votes.clear();
    for (const auto& [model, scores] : r.per_model_scores) votes.push_back(scores[t]);
    final[t] = aggregate_trait(votes);
  }
  r.final_scores = final;
  for (const auto& [attr, v] : r.facial_votes) {
    r.facial_attributes[attr] = aggregate_attribute(v);
  }
}

std::vector<PersonRecord> aggregate_dataset(std::vector<PersonRecord> records) {
  for (auto& r : records) aggregate_record(r);
  return records;
}

}  // namespace persona
