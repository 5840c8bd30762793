#pragma once

#include <span>

#include "persona/table.hpp"

namespace persona {

/// Drops 0 ("insufficient information") votes and returns the ceiling of
/// the median of what remains; 0 if every vote was 0. An even count uses
/// the mean of the two central values, so [2, 3] gives 3.
/// Throws ValidationError on an empty list or an out-of-domain vote.
TraitScore aggregate_trait(std::span<const TraitScore> votes);

/// Majority of +1 over -1 votes; ties (including no votes) give 0.
/// Per-image 0 ("unknown") votes are ignored.
FacialAttributeValue aggregate_attribute(std::span<const FacialAttributeValue> votes);

/// Fills final_scores (trait-wise over models, in model-id order) and the
/// aggregated facial attributes from per-image votes. Idempotent.
/// Throws ValidationError for a record without any model scores.
void aggregate_record(PersonRecord& r);

std::vector<PersonRecord> aggregate_dataset(std::vector<PersonRecord> records);

}  // namespace persona
