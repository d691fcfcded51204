#pragma once

// Stage orchestration: simulate -> score-irt -> score-bn -> award -> infer
// -> tva -> power, each stage writing CSV/JSON artifacts plus a manifest of
// SHA-256 digests.  Identical seed and config give byte-identical bundles.

#include <map>
#include <string>
#include <vector>

#include "p4p/awards.hpp"
#include "p4p/bn.hpp"
#include "p4p/config.hpp"
#include "p4p/estimators.hpp"
#include "p4p/world.hpp"

namespace p4p::pipe {

struct StageRecord {
    std::string stage;
    std::vector<std::pair<std::string, std::string>> outputs; // (file, sha256)
    std::string input_digest;
};

struct ScoreKey {
    std::int64_t pupil = 0;
    int subject = 0;
    int round = 0;
    auto operator<=>(const ScoreKey&) const = default;
};

// In-memory state threaded through the stages.
struct PipelineState {
    cfg::RunConfig config;
    world::World world;
    world::Outcomes outcomes;
    bool have_world = false;
    // active score source for the tournament metric (IRT EAP when the stage
    // ran, simulated scores otherwise)
    std::map<ScoreKey, double> scores;
    bool have_irt = false;
    std::vector<bn::RoundScores> bn_rounds; // index 0 -> round 1, 1 -> round 2
    bool have_bn = false;
    std::vector<awards::CompositeScore> award_ledger;
    std::vector<awards::AwardStatus> award_status;
    bool have_awards = false;
};

struct BundleResult {
    std::vector<StageRecord> stages;
};

// Runs the configured stages in canonical order.  Stage errors propagate
// with the stage name attached.
BundleResult run_pipeline(const cfg::RunConfig& config);

// Individual stages, reusable by the CLI subcommands.
StageRecord stage_simulate(PipelineState& st, const std::string& out_dir);
StageRecord stage_score_irt(PipelineState& st, const std::string& out_dir);
StageRecord stage_score_bn(PipelineState& st, const std::string& out_dir);
StageRecord stage_award(PipelineState& st, const std::string& out_dir);
StageRecord stage_infer(PipelineState& st, const std::string& out_dir);
StageRecord stage_tva(PipelineState& st, const std::string& out_dir);
StageRecord stage_power(PipelineState& st, const std::string& out_dir);

// Tournament inputs for one scored round (1 or 2): baseline rows feed the
// bins, endline rows are scored.  Round 2 uses round-1 endline scores of
// pupils linked to a round-2 stream.
void bn_round_inputs(const PipelineState& st, int round, std::vector<bn::PanelRow>& baseline,
                     std::vector<bn::PanelRow>& endline);

// Assessment rows with scores replaced by the active source.
std::vector<world::AssessmentRow> scored_assessments(const PipelineState& st);

} // namespace p4p::pipe
