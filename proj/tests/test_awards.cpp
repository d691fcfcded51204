#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "p4p/awards.hpp"
#include "p4p/errors.hpp"
#include "p4p/rng.hpp"
#include "p4p/stats.hpp"

using namespace p4p;
using namespace p4p::awards;
using theory::Arm;

namespace {

MetricRow mk(int teacher, double learning, double presence, double prep, double ped) {
    MetricRow m;
    m.teacher = teacher;
    m.district = 0;
    m.round = 1;
    m.learning = learning;
    m.presence = presence;
    m.preparation = prep;
    m.pedagogy = ped;
    m.has_learning = true;
    m.has_inputs = true;
    return m;
}

} // namespace

TEST_CASE("median teacher summarizes to one half, best to one") {
    std::vector<MetricRow> rows;
    for (int t = 0; t < 9; ++t)
        rows.push_back(mk(t, 0.1 * t, 0.5 + 0.05 * t, 0.1 * t, 0.3 * t));
    auto res = composite(rows);
    REQUIRE(res.scores.size() == 9);
    for (const auto& c : res.scores) {
        if (c.teacher == 4) CHECK(c.summary == doctest::Approx(0.5));
        if (c.teacher == 8) CHECK(c.summary == doctest::Approx(1.0));
        if (c.teacher == 0) CHECK(c.summary == doctest::Approx(0.0));
    }
}

TEST_CASE("composite equals a flat hand recomputation on a random district") {
    Rng rng(21);
    std::vector<MetricRow> rows;
    for (int t = 0; t < 10; ++t)
        rows.push_back(mk(t, rng.uniform01(), rng.uniform01(), rng.uniform01(),
                          rng.uniform(0.0, 3.0)));
    auto res = composite(rows);

    auto pct = [&](auto member, int teacher) {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.*member);
        auto p = stats::percentile_desc(v);
        return p[teacher];
    };
    for (const auto& c : res.scores) {
        double want = 0.5 * pct(&MetricRow::learning, c.teacher) +
                      0.5 *
                          (pct(&MetricRow::presence, c.teacher) +
                           pct(&MetricRow::preparation, c.teacher) +
                           pct(&MetricRow::pedagogy, c.teacher)) /
                          3.0;
        CHECK(c.summary == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("missing components exclude the teacher with a log entry") {
    std::vector<MetricRow> rows;
    rows.push_back(mk(1, 0.5, 0.9, 0.5, 2.0));
    rows.push_back(mk(2, 0.6, 0.8, 0.4, 2.2));
    rows.back().has_inputs = false;
    auto res = composite(rows);
    CHECK(res.scores.size() == 1);
    REQUIRE(res.excluded_teachers.size() == 1);
    CHECK(res.excluded_teachers[0] == 2);
}

TEST_CASE("ten tournament teachers get exactly two awards") {
    std::vector<MetricRow> rows;
    for (int t = 0; t < 10; ++t)
        rows.push_back(mk(t, 0.1 * t, 0.9, 0.5, 2.0));
    auto res = composite(rows);
    std::vector<AwardStatus> status(res.scores.size());
    for (auto& s : status) s.experienced = Arm::P4P;
    theory::ContractMenu menu;
    select_awards(res.scores, status, menu);
    int awards = 0;
    for (const auto& c : res.scores) awards += c.award;
    CHECK(awards == 2);
    for (const auto& c : res.scores)
        if (c.award) CHECK(c.payout_rwf == 100000);
}

TEST_CASE("winner payout is about 136 USD at the 2016 exchange rate") {
    theory::ContractMenu menu;
    double usd = static_cast<double>(menu.payout_p4p_rwf) / 734.0;
    CHECK(usd > 135.0);
    CHECK(usd < 137.0);
}

TEST_CASE("award counts are ceil(share * n) for every pool size") {
    theory::ContractMenu menu;
    for (int n = 1; n <= 17; ++n) {
        std::vector<MetricRow> rows;
        for (int t = 0; t < n; ++t) rows.push_back(mk(t, 0.05 * t, 0.9, 0.5, 2.0));
        auto res = composite(rows);
        std::vector<AwardStatus> status(res.scores.size());
        for (auto& s : status) s.experienced = Arm::P4P;
        select_awards(res.scores, status, menu);
        int awards = 0;
        for (const auto& c : res.scores) awards += c.award;
        CHECK(awards == static_cast<int>(std::ceil(0.2 * n)));
    }
}

TEST_CASE("cutoff ties resolve deterministically, count unchanged") {
    theory::ContractMenu menu;
    // n = 5 -> exactly one award; put the tie at every position
    for (int tie_pos = 0; tie_pos < 4; ++tie_pos) {
        std::vector<CompositeScore> scores(5);
        std::vector<AwardStatus> status(5);
        for (int t = 0; t < 5; ++t) {
            scores[t].teacher = t;
            scores[t].district = 0;
            scores[t].round = 1;
            scores[t].summary = 1.0 - 0.1 * t;
            scores[t].learning_pct = 0.5;
            scores[t].presence_pct = 0.5;
            status[t].experienced = Arm::P4P;
        }
        scores[tie_pos + 1].summary = scores[tie_pos].summary; // adjacent tie
        select_awards(scores, status, menu);
        int awards = 0;
        for (const auto& c : scores) awards += c.award;
        CHECK(awards == 1);
    }
    // tie at the top broken by learning percentile, then presence, then id
    std::vector<CompositeScore> scores(5);
    std::vector<AwardStatus> status(5);
    for (int t = 0; t < 5; ++t) {
        scores[t].teacher = t;
        scores[t].summary = t < 2 ? 0.9 : 0.1;
        scores[t].learning_pct = t == 1 ? 0.9 : 0.1;
        status[t].experienced = Arm::P4P;
    }
    select_awards(scores, status, menu);
    CHECK(scores[1].award);
    CHECK_FALSE(scores[0].award);
}

TEST_CASE("payout ledger: tournament winners, fixed-wage flat, retention bonus") {
    theory::ContractMenu menu;
    std::vector<CompositeScore> scores(4);
    std::vector<AwardStatus> status(4);
    for (int t = 0; t < 4; ++t) {
        scores[t].teacher = t;
        scores[t].district = 0;
        scores[t].round = 2;
        scores[t].summary = 1.0 - 0.2 * t;
    }
    status[0] = {Arm::P4P, true, true};   // recruit winner
    status[1] = {Arm::P4P, false, true};  // incumbent, below cutoff
    status[2] = {Arm::FW, true, true};    // retained FW recruit
    status[3] = {Arm::FW, true, false};   // FW recruit who left
    select_awards(scores, status, menu);
    CHECK(scores[0].payout_rwf == 100000 + 80000);
    CHECK(scores[1].payout_rwf == 0);
    CHECK(scores[2].payout_rwf == 20000 + 80000);
    CHECK(scores[3].payout_rwf == 20000);

    // district totals are exact integer sums
    std::int64_t total = 0;
    for (const auto& c : scores) total += c.payout_rwf;
    CHECK(total == 100000 + 80000 + 20000 + 80000 + 20000);
}

TEST_CASE("summary is invariant to increasing transforms of raw components") {
    Rng rng(4);
    std::vector<MetricRow> rows;
    for (int t = 0; t < 8; ++t)
        rows.push_back(mk(t, rng.uniform01(), rng.uniform01(), rng.uniform01(),
                          rng.uniform(0.0, 3.0)));
    auto base = composite(rows);
    for (auto& r : rows) {
        r.learning = std::exp(r.learning);
        r.presence = 2.0 * r.presence + 1.0;
        r.pedagogy = std::pow(r.pedagogy + 1.0, 3.0);
    }
    auto moved = composite(rows);
    for (std::size_t i = 0; i < base.scores.size(); ++i)
        CHECK(base.scores[i].summary == doctest::Approx(moved.scores[i].summary).epsilon(1e-12));
}

TEST_CASE("improving one raw component never lowers the summary") {
    Rng rng(9);
    std::vector<MetricRow> rows;
    for (int t = 0; t < 8; ++t)
        rows.push_back(mk(t, rng.uniform01(), rng.uniform01(), rng.uniform01(),
                          rng.uniform(0.0, 3.0)));
    auto base = composite(rows);
    for (int t = 0; t < 8; ++t) {
        auto bumped = rows;
        bumped[t].presence = std::min(1.0, bumped[t].presence + 0.4);
        auto res = composite(bumped);
        double before = 0.0, after = 0.0;
        for (const auto& c : base.scores)
            if (c.teacher == t) before = c.summary;
        for (const auto& c : res.scores)
            if (c.teacher == t) after = c.summary;
        CHECK(after >= before - 1e-12);
    }
}

TEST_CASE("empty award input is an error") {
    theory::ContractMenu menu;
    std::vector<CompositeScore> none;
    std::vector<AwardStatus> status;
    CHECK_THROWS_AS(select_awards(none, status, menu), EmptyDistrict);
}
