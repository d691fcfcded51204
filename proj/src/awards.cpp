#include "p4p/awards.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "p4p/errors.hpp"
#include "p4p/stats.hpp"

namespace p4p::awards {

CompositeResult composite(const std::vector<MetricRow>& rows) {
    CompositeResult out;
    std::map<std::pair<int, int>, std::vector<std::size_t>> groups; // (district, round)
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].has_learning || !rows[i].has_inputs) {
            out.excluded_teachers.push_back(rows[i].teacher);
            continue;
        }
        groups[{rows[i].district, rows[i].round}].push_back(i);
    }

    for (auto& [key, idx] : groups) {
        auto pct_of = [&](auto member) {
            std::vector<double> v;
            v.reserve(idx.size());
            for (auto i : idx) v.push_back(rows[i].*member);
            return stats::percentile_desc(v);
        };
        auto learning = pct_of(&MetricRow::learning);
        auto presence = pct_of(&MetricRow::presence);
        auto preparation = pct_of(&MetricRow::preparation);
        auto pedagogy = pct_of(&MetricRow::pedagogy);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto& row = rows[idx[k]];
            CompositeScore cs;
            cs.teacher = row.teacher;
            cs.district = row.district;
            cs.round = row.round;
            cs.learning_pct = learning[k];
            cs.presence_pct = presence[k];
            cs.preparation_pct = preparation[k];
            cs.pedagogy_pct = pedagogy[k];
            cs.inputs_pct = (presence[k] + preparation[k] + pedagogy[k]) / 3.0;
            cs.summary = 0.5 * cs.learning_pct + 0.5 * cs.inputs_pct;
            out.scores.push_back(cs);
        }
    }
    return out;
}

void select_awards(std::vector<CompositeScore>& scores, const std::vector<AwardStatus>& status,
                   const theory::ContractMenu& menu, double share) {
    if (scores.empty()) throw EmptyDistrict("no composite scores to rank");
    if (scores.size() != status.size())
        throw ValidationError("select_awards: status size mismatch");

    std::map<std::pair<int, int>, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i].award = false;
        scores[i].payout_rwf = 0;
        if (status[i].experienced == theory::Arm::P4P)
            pools[{scores[i].district, scores[i].round}].push_back(i);
    }

    for (auto& [key, idx] : pools) {
        auto n_awards = static_cast<std::size_t>(
            std::ceil(share * static_cast<double>(idx.size())));
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (scores[a].summary != scores[b].summary) return scores[a].summary > scores[b].summary;
            if (scores[a].learning_pct != scores[b].learning_pct)
                return scores[a].learning_pct > scores[b].learning_pct;
            if (scores[a].presence_pct != scores[b].presence_pct)
                return scores[a].presence_pct > scores[b].presence_pct;
            return scores[a].teacher < scores[b].teacher;
        });
        for (std::size_t k = 0; k < idx.size() && k < n_awards; ++k)
            scores[idx[k]].award = true;
    }

    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::int64_t payout = 0;
        if (status[i].experienced == theory::Arm::P4P) {
            if (scores[i].award) payout += menu.payout_p4p_rwf;
        } else {
            payout += menu.payout_fw_rwf;
        }
        if (status[i].recruit && status[i].retained) payout += menu.retention_bonus_rwf;
        scores[i].payout_rwf = payout;
    }
}

} // namespace p4p::awards
