#pragma once

// Composite tournament metric: percentile ranks of presence, preparation,
// pedagogy and the learning score within district-round, averaged 50/50
// between learning and inputs, plus top-share award selection and payouts.

#include <cstdint>
#include <vector>

#include "p4p/theory.hpp"

namespace p4p::awards {

struct MetricRow {
    int teacher = 0;
    int district = 0;
    int round = 1;
    double learning = 0.0;    // tournament learning score in [0,1]
    double presence = 0.0;    // fraction of spot-check days present
    double preparation = 0.0; // lesson-plan indicator, spot-check mean
    double pedagogy = 0.0;    // mean of the four observation components, [0,3]
    bool has_learning = false;
    bool has_inputs = false;
};

struct CompositeScore {
    int teacher = 0;
    int district = 0;
    int round = 1;
    double learning_pct = 0.0;
    double presence_pct = 0.0;
    double preparation_pct = 0.0;
    double pedagogy_pct = 0.0;
    double inputs_pct = 0.0; // mean of the three input percentiles
    double summary = 0.0;    // 0.5 * learning_pct + 0.5 * inputs_pct
    bool award = false;
    std::int64_t payout_rwf = 0;
};

struct CompositeResult {
    std::vector<CompositeScore> scores;
    std::vector<int> excluded_teachers; // missing a component
};

// Percentile-rank every component within district-round and combine.
CompositeResult composite(const std::vector<MetricRow>& rows);

struct AwardStatus {
    theory::Arm experienced = theory::Arm::FW;
    bool recruit = false;
    bool retained = true; // completed the round's school year
};

// Flags the top `share` of tournament-arm teachers per district-round by
// summary; ties broken by learning percentile, presence percentile, then
// teacher id.  Fills payouts from the menu amounts.
void select_awards(std::vector<CompositeScore>& scores, const std::vector<AwardStatus>& status,
                   const theory::ContractMenu& menu, double share = 0.2);

} // namespace p4p::awards
