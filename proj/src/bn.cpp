#include "p4p/bn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "p4p/errors.hpp"
#include "p4p/rng.hpp"
#include "p4p/stats.hpp"

namespace p4p::bn {

BaselineBinning make_baseline_bins(Dsg key, std::span<const std::int64_t> pupils,
                                   std::span<const double> scores, int n_bins) {
    if (pupils.empty())
        throw EmptyCell("no baseline scores for district " + std::to_string(key.district) +
                        " subject " + std::to_string(key.subject) + " grade " +
                        std::to_string(key.grade));
    if (n_bins < 1) throw ConfigError("n_bins must be >= 1");

    const auto n = static_cast<double>(pupils.size());
    auto avg_rank = stats::average_ranks_desc(scores);

    BaselineBinning out;
    out.key = key;
    out.n_bins = n_bins;
    out.pupils.assign(pupils.begin(), pupils.end());
    out.bin.resize(pupils.size());
    for (std::size_t i = 0; i < pupils.size(); ++i) {
        // balanced partition of ranks; tied pupils share their average
        // rank's bin; rank 1 lands in the top bin n_bins
        int slot = static_cast<int>(std::floor((avg_rank[i] - 1.0) * n_bins / n));
        slot = std::min(slot, n_bins - 1);
        out.bin[i] = n_bins - slot;
    }
    int first = out.bin.empty() ? 0 : out.bin[0];
    out.single_bin = std::all_of(out.bin.begin(), out.bin.end(),
                                 [&](int b) { return b == first; }) &&
                     pupils.size() > 1 && n_bins > 1;
    return out;
}

StreamCdf stream_cdf(const Cell& cell, std::span<const int> bins, int n_bins) {
    StreamCdf out;
    out.cell = cell;
    out.mass.assign(n_bins, 0.0);
    out.n_baseline = static_cast<int>(bins.size());
    if (bins.empty()) {
        out.imputed = true; // to be filled by impute_stream_cdfs
        return out;
    }
    double share = 1.0 / static_cast<double>(bins.size());
    for (int b : bins) {
        if (b < 1 || b > n_bins) throw ValidationError("bin label out of range");
        out.mass[b - 1] += share;
    }
    return out;
}

std::map<Cell, StreamCdf> impute_stream_cdfs(const std::map<Cell, StreamCdf>& observed,
                                             std::span<const Cell> needed, int n_bins) {
    std::map<Cell, StreamCdf> out = observed;
    for (const Cell& cell : needed) {
        auto it = out.find(cell);
        if (it != out.end() && it->second.n_baseline > 0) continue;

        auto average_of = [&](auto&& match) -> std::optional<std::vector<double>> {
            std::vector<double> acc(n_bins, 0.0);
            int count = 0;
            for (const auto& [key, cdf] : observed) {
                if (cdf.n_baseline == 0 || !match(key)) continue;
                for (int b = 0; b < n_bins; ++b) acc[b] += cdf.mass[b];
                ++count;
            }
            if (count == 0) return std::nullopt;
            for (double& m : acc) m /= count;
            return acc;
        };

        // same subject, same school-grade first, then the school as a whole
        auto mass = average_of([&](const Cell& k) {
            return k.school == cell.school && k.subject == cell.subject &&
                   k.grade == cell.grade && k.stream != cell.stream;
        });
        if (!mass) {
            mass = average_of([&](const Cell& k) {
                return k.school == cell.school && k.subject == cell.subject &&
                       !(k.grade == cell.grade && k.stream == cell.stream);
            });
        }
        if (!mass)
            throw UnimputableCell("school " + std::to_string(cell.school) +
                                  " has no baseline sample for subject " +
                                  std::to_string(cell.subject));
        StreamCdf cdf;
        cdf.cell = cell;
        cdf.mass = std::move(*mass);
        cdf.imputed = true;
        cdf.n_baseline = 0;
        out[cell] = cdf;
    }
    return out;
}

namespace {

// Competition ranks over endline pupils of one cell, absents last.
std::vector<int> endline_ranks(std::span<const EndlinePupil> pupils) {
    std::vector<double> key(pupils.size());
    double lo = 0.0;
    for (const auto& p : pupils)
        if (!p.absent) lo = std::min(lo, p.score);
    for (std::size_t i = 0; i < pupils.size(); ++i)
        key[i] = pupils[i].absent ? lo - 1.0 : pupils[i].score;
    return stats::competition_ranks_desc(key);
}

} // namespace

std::vector<int> assign_pseudo_bins(std::span<const EndlinePupil> pupils, const StreamCdf& cdf) {
    const int n_bins = static_cast<int>(cdf.mass.size());
    const double n = static_cast<double>(pupils.size());
    std::vector<int> out(pupils.size(), 0);
    if (pupils.empty()) return out;

    auto ranks = endline_ranks(pupils);
    // cumulative mass from the best bin down
    std::vector<double> cum(n_bins + 1, 0.0); // cum[i]: mass of bins > n_bins - i
    for (int i = 1; i <= n_bins; ++i) cum[i] = cum[i - 1] + cdf.mass[n_bins - i];

    for (std::size_t i = 0; i < pupils.size(); ++i) {
        double u = static_cast<double>(ranks[i]) / n;
        int chosen = 0;
        for (int j = 1; j <= n_bins; ++j) {
            if (cdf.mass[n_bins - j] <= 0.0) continue;
            chosen = n_bins - j + 1;
            if (cum[j] >= u - 1e-9) break;
        }
        out[i] = chosen;
    }
    return out;
}

std::vector<PupilRank> within_bin_ranks(Dsg key, std::span<const EndlinePupil> pupils,
                                        std::span<const Cell> cells,
                                        std::span<const int> pseudo_bins) {
    if (pupils.size() != cells.size() || pupils.size() != pseudo_bins.size())
        throw ValidationError("within_bin_ranks: span size mismatch");

    std::map<int, std::vector<std::size_t>> by_bin;
    for (std::size_t i = 0; i < pupils.size(); ++i) by_bin[pseudo_bins[i]].push_back(i);

    std::vector<PupilRank> out(pupils.size());
    for (auto& [bin, idx] : by_bin) {
        std::vector<double> score_key(idx.size());
        double lo = 0.0;
        for (std::size_t k = 0; k < idx.size(); ++k)
            if (!pupils[idx[k]].absent) lo = std::min(lo, pupils[idx[k]].score);
        for (std::size_t k = 0; k < idx.size(); ++k)
            score_key[k] = pupils[idx[k]].absent ? lo - 1.0 : pupils[idx[k]].score;

        auto comp = stats::competition_ranks_desc(score_key);
        auto avg = stats::average_ranks_desc(score_key);
        const double n = static_cast<double>(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            PupilRank pr;
            pr.pupil = pupils[idx[k]].pupil;
            pr.cell = cells[idx[k]];
            pr.pseudo_bin = bin;
            pr.rank = comp[k];
            pr.bin_size = static_cast<int>(idx.size());
            pr.absent = pupils[idx[k]].absent;
            if (pr.absent) pr.pi = 0.0;
            else if (idx.size() == 1) pr.pi = 1.0;
            else pr.pi = 1.0 - (avg[k] - 1.0) / (n - 1.0);
            out[idx[k]] = pr;
        }
    }
    (void)key;
    return out;
}

TeacherScoreResult teacher_scores(std::span<const TeacherScoreInput> rows) {
    std::map<int, TeacherLearningScore> acc;
    for (const auto& row : rows) {
        auto& t = acc[row.teacher];
        t.teacher = row.teacher;
        t.score += row.weight * row.pi;
        t.rank_sum += row.rank;
        t.weight_sum += row.weight;
        t.n_pupil_subjects += 1;
    }
    TeacherScoreResult out;
    for (auto& [id, t] : acc) {
        if (t.weight_sum <= 0.0 || t.n_pupil_subjects == 0) {
            out.skipped_teachers.push_back(id);
            continue;
        }
        t.score /= t.weight_sum;
        out.scores.push_back(t);
    }
    return out;
}

RoundScores score_round(std::span<const PanelRow> baseline, std::span<const PanelRow> endline,
                        const Options& opts) {
    RoundScores result;

    // 1. baseline bins per district-subject-grade
    std::map<Dsg, std::vector<std::size_t>> base_by_dsg;
    for (std::size_t i = 0; i < baseline.size(); ++i)
        base_by_dsg[baseline[i].cell.dsg()].push_back(i);

    std::map<Dsg, BaselineBinning> binnings;
    std::map<std::pair<Dsg, std::int64_t>, int> pupil_bin;
    for (auto& [dsg, idx] : base_by_dsg) {
        std::vector<std::int64_t> pupils;
        std::vector<double> scores;
        pupils.reserve(idx.size());
        double lo = 0.0;
        for (auto i : idx)
            if (!baseline[i].absent) lo = std::min(lo, baseline[i].score);
        for (auto i : idx) {
            pupils.push_back(baseline[i].pupil);
            // sampled-but-absent carries the minimum possible score
            scores.push_back(baseline[i].absent ? lo - 1.0 : baseline[i].score);
        }
        auto bb = make_baseline_bins(dsg, pupils, scores, opts.n_bins);
        if (bb.single_bin) ++result.single_bin_cells;
        for (std::size_t k = 0; k < bb.pupils.size(); ++k)
            pupil_bin[{dsg, bb.pupils[k]}] = bb.bin[k];
        binnings.emplace(dsg, std::move(bb));
    }

    // 2. stream CDFs from baseline bins, imputing endline cells without a
    // baseline sample
    std::map<Cell, std::vector<int>> base_bins_by_cell;
    for (const auto& row : baseline) {
        auto it = pupil_bin.find({row.cell.dsg(), row.pupil});
        base_bins_by_cell[row.cell].push_back(it->second);
    }
    std::map<Cell, StreamCdf> cdfs;
    for (auto& [cell, bins] : base_bins_by_cell)
        cdfs.emplace(cell, stream_cdf(cell, bins, opts.n_bins));

    std::map<Cell, std::vector<std::size_t>> end_by_cell;
    for (std::size_t i = 0; i < endline.size(); ++i) end_by_cell[endline[i].cell].push_back(i);
    std::vector<Cell> needed;
    for (auto& [cell, idx] : end_by_cell) needed.push_back(cell);

    auto all_cdfs = impute_stream_cdfs(cdfs, needed, opts.n_bins);
    for (const Cell& cell : needed)
        if (all_cdfs.at(cell).imputed) ++result.cells_imputed;

    // 3. pseudo-bins per endline cell, then ranks per district-subject-grade
    std::map<Dsg, std::vector<std::size_t>> end_by_dsg;
    std::vector<int> pseudo(endline.size(), 0);
    for (auto& [cell, idx] : end_by_cell) {
        std::vector<EndlinePupil> eps;
        eps.reserve(idx.size());
        for (auto i : idx) eps.push_back({endline[i].pupil, endline[i].score, endline[i].absent});
        auto bins = assign_pseudo_bins(eps, all_cdfs.at(cell));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            pseudo[idx[k]] = bins[k];
            end_by_dsg[cell.dsg()].push_back(idx[k]);
        }
    }

    std::vector<PupilRank> all_ranks(endline.size());
    for (auto& [dsg, idx] : end_by_dsg) {
        std::vector<EndlinePupil> eps;
        std::vector<Cell> cells;
        std::vector<int> bins;
        for (auto i : idx) {
            eps.push_back({endline[i].pupil, endline[i].score, endline[i].absent});
            cells.push_back(endline[i].cell);
            bins.push_back(pseudo[i]);
        }
        auto ranks = within_bin_ranks(dsg, eps, cells, bins);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            ranks[k].weight = endline[idx[k]].sampled > 0
                                  ? static_cast<double>(endline[idx[k]].enrolled) /
                                        static_cast<double>(endline[idx[k]].sampled)
                                  : 1.0;
            all_ranks[idx[k]] = ranks[k];
        }
    }

    // 4. teacher scores
    std::vector<TeacherScoreInput> inputs;
    inputs.reserve(endline.size());
    for (std::size_t i = 0; i < endline.size(); ++i) {
        if (endline[i].teacher < 0) continue;
        inputs.push_back({endline[i].teacher, all_ranks[i].pi, all_ranks[i].rank,
                          all_ranks[i].weight});
    }
    if (opts.fixed_subsample) {
        // equal-counts variant: keep at most K pupil-subjects per teacher,
        // chosen by seeded draw, unit weights
        std::map<int, std::vector<std::size_t>> by_teacher;
        for (std::size_t i = 0; i < inputs.size(); ++i)
            by_teacher[inputs[i].teacher].push_back(i);
        std::vector<TeacherScoreInput> kept;
        for (auto& [teacher, idx] : by_teacher) {
            Rng rng = Rng::substream(opts.subsample_seed, "bn.subsample",
                                     static_cast<std::uint64_t>(teacher));
            std::vector<std::size_t> pool = idx;
            rng.shuffle(pool);
            std::size_t take = std::min<std::size_t>(*opts.fixed_subsample, pool.size());
            std::sort(pool.begin(), pool.begin() + take);
            for (std::size_t k = 0; k < take; ++k) {
                auto row = inputs[pool[k]];
                row.weight = 1.0;
                kept.push_back(row);
            }
        }
        inputs = std::move(kept);
    }
    auto ts = teacher_scores(inputs);
    result.ranks = std::move(all_ranks);
    result.teacher_scores = std::move(ts.scores);
    result.teachers_skipped = std::move(ts.skipped_teachers);
    return result;
}

} // namespace p4p::bn
