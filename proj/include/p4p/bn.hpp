#pragma once

// Percentile-tournament learning metric over a repeated cross-section of
// pupils: district-subject-grade baseline bins, per-stream bin CDFs with
// imputation for unsampled cells, pseudo-baseline bin placement of endline
// pupils, within-bin ranks, and inverse-probability-weighted teacher scores.
// Pupils sampled for a test who did not sit it carry the minimum possible
// score.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace p4p::bn {

// district-subject-grade: the tournament pool
struct Dsg {
    int district = 0;
    int subject = 0;
    int grade = 0;
    auto operator<=>(const Dsg&) const = default;
};

// a stream's slice of the pool
struct Cell {
    int district = 0;
    int subject = 0;
    int grade = 0;
    int school = 0;
    int stream = 0;
    Dsg dsg() const { return {district, subject, grade}; }
    auto operator<=>(const Cell&) const = default;
};

struct BaselineBinning {
    Dsg key;
    int n_bins = 20;
    std::vector<std::int64_t> pupils;
    std::vector<int> bin; // 1..n_bins, n_bins = top
    bool single_bin = false; // every score tied
};

// Rank pupils by score (largest best) and split into n_bins near-equal
// groups; tied pupils share the bin of their average rank.
BaselineBinning make_baseline_bins(Dsg key, std::span<const std::int64_t> pupils,
                                   std::span<const double> scores, int n_bins);

struct StreamCdf {
    Cell cell;
    std::vector<double> mass; // index b-1 -> bin b, sums to 1
    bool imputed = false;
    int n_baseline = 0;
};

// Empirical bin distribution of one stream's baseline sample.
StreamCdf stream_cdf(const Cell& cell, std::span<const int> bins, int n_bins);

// Fill CDFs for cells with no baseline sample: average of same-subject CDFs
// in the same school-grade, else in the whole school.  Throws
// UnimputableCell when the school lacks the subject entirely.
std::map<Cell, StreamCdf> impute_stream_cdfs(const std::map<Cell, StreamCdf>& observed,
                                             std::span<const Cell> needed, int n_bins);

struct EndlinePupil {
    std::int64_t pupil = 0;
    double score = 0.0;
    bool absent = false; // sampled, did not sit
};

// Map endline within-cell ranks through the baseline-bin CDF; best endline
// pupil receives the cell's best occupied bin.  Absent pupils rank last.
std::vector<int> assign_pseudo_bins(std::span<const EndlinePupil> pupils, const StreamCdf& cdf);

struct PupilRank {
    std::int64_t pupil = 0;
    Cell cell;
    int pseudo_bin = 0;
    int rank = 0;        // competition rank within (district, subject, grade, bin), 1 = best
    int bin_size = 0;
    double pi = 1.0;     // percentile, 1 best, absent -> 0
    bool absent = false;
    double weight = 1.0; // enrolled / sampled for the pupil's stream
};

// Rank within each (district, subject, grade, pseudo-bin) pool.
// Input spans are parallel arrays over pupils of one Dsg.
std::vector<PupilRank> within_bin_ranks(Dsg key, std::span<const EndlinePupil> pupils,
                                        std::span<const Cell> cells,
                                        std::span<const int> pseudo_bins);

struct TeacherLearningScore {
    int teacher = 0;
    double score = 0.0;    // weighted mean of pi, in [0,1]
    double rank_sum = 0.0; // sum of integer ranks (teacher-facing view)
    int n_pupil_subjects = 0;
    double weight_sum = 0.0;
};

struct TeacherScoreInput {
    int teacher = 0;
    double pi = 0.0;
    int rank = 0;
    double weight = 1.0;
};

struct TeacherScoreResult {
    std::vector<TeacherLearningScore> scores;
    std::vector<int> skipped_teachers; // no sampled pupil-subjects
};

TeacherScoreResult teacher_scores(std::span<const TeacherScoreInput> rows);

// Whole-round driver.
struct PanelRow {
    std::int64_t pupil = 0;
    Cell cell;
    int teacher = -1;
    double score = 0.0;
    bool absent = false;
    int enrolled = 0; // stream enrollment
    int sampled = 0;  // stream sample size (absent pupils included)
};

struct Options {
    int n_bins = 20;
    // teacher score uses the weighted mean by default; a fixed subsample per
    // teacher is available for the equal-counts variant
    std::optional<int> fixed_subsample;
    std::uint64_t subsample_seed = 0;
};

struct RoundScores {
    std::vector<PupilRank> ranks;
    std::vector<TeacherLearningScore> teacher_scores;
    std::vector<int> teachers_skipped;
    int cells_imputed = 0;
    int single_bin_cells = 0;
};

// baseline rows: scores of the binning round (absent pupils already carry
// the minimum score); endline rows: the scored round.
RoundScores score_round(std::span<const PanelRow> baseline, std::span<const PanelRow> endline,
                        const Options& opts);

} // namespace p4p::bn
