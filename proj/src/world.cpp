#include "p4p/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "p4p/errors.hpp"
#include "p4p/stats.hpp"

namespace p4p::world {

void WorldConfig::validate() const {
    if (n_districts < 1 || n_families < 1) throw ConfigError("world: need districts and families");
    if (advertised_counts.p4p + advertised_counts.fw + advertised_counts.mixed != n_markets())
        throw CountMismatch("advertised arm counts must sum to the market count");
    if (n_exp_p4p < 0 || n_exp_p4p > n_schools)
        throw CountMismatch("experienced P4P count exceeds school count");
    if (grade_hi < grade_lo) throw ConfigError("world: grade range empty");
    if (pupils_per_stream < 1 || streams_per_grade < 1) throw ConfigError("world: empty streams");
    if (sample_baseline > pupils_per_stream || sample_endline > pupils_per_stream)
        throw ConfigError("world: sample size exceeds enrollment");
    if (n_subjects < 1) throw ConfigError("world: need at least one subject");
    if (ar1_rho <= -1.0 || ar1_rho >= 1.0) throw ConfigError("world: ar1_rho must be in (-1,1)");
    if (ttc_noise_kind != "normal" && ttc_noise_kind != "heavy")
        throw ConfigError("world: ttc_noise_kind must be 'normal' or 'heavy'");
    for (auto [a, b] : district_adjacency)
        if (a == b || a < 0 || b < 0 || a >= n_districts || b >= n_districts)
            throw ConfigError("world: bad district adjacency edge");
}

const TeachingCell* World::find_teaching(int year, int stream, int subject) const {
    for (const auto& cell : teaching)
        if (cell.year == year && cell.stream == stream && cell.subject == subject) return &cell;
    return nullptr;
}

AssignmentPlan World::plan() const {
    AssignmentPlan p;
    for (const auto& m : markets) p.advertised.push_back(m.advertised);
    for (const auto& s : schools) p.experienced.push_back(s.experienced);
    return p;
}

std::vector<Arm> assign_advertised(int n_markets, const ArmCounts& counts, std::uint64_t seed) {
    if (counts.p4p + counts.fw + counts.mixed != n_markets)
        throw CountMismatch("arm counts sum to " +
                            std::to_string(counts.p4p + counts.fw + counts.mixed) + ", have " +
                            std::to_string(n_markets) + " markets");
    std::vector<Arm> labels;
    labels.insert(labels.end(), counts.p4p, Arm::P4P);
    labels.insert(labels.end(), counts.fw, Arm::FW);
    labels.insert(labels.end(), counts.mixed, Arm::Mixed);
    Rng rng = Rng::substream(seed, "assign.advertised");
    rng.shuffle(labels);
    return labels;
}

std::vector<Arm> assign_experienced(const std::vector<School>& schools, int n_p4p,
                                    std::uint64_t seed, bool stratified) {
    const int n = static_cast<int>(schools.size());
    if (n_p4p < 0 || n_p4p > n)
        throw CountMismatch("experienced P4P count " + std::to_string(n_p4p) + " out of range");
    Rng rng = Rng::substream(seed, "assign.experienced");
    std::vector<Arm> out(n, Arm::FW);
    if (!stratified) {
        std::vector<Arm> labels(n, Arm::FW);
        std::fill(labels.begin(), labels.begin() + n_p4p, Arm::P4P);
        rng.shuffle(labels);
        return labels;
    }
    // district-stratified: allocate the P4P count across districts in
    // proportion to size, remainders by random draw
    std::map<int, std::vector<int>> by_district;
    for (int i = 0; i < n; ++i) by_district[schools[i].district].push_back(i);
    int assigned = 0;
    std::vector<std::pair<double, int>> fractional; // (remainder, district)
    std::map<int, int> quota;
    for (auto& [d, idx] : by_district) {
        double share = static_cast<double>(idx.size()) * n_p4p / n;
        quota[d] = static_cast<int>(std::floor(share));
        assigned += quota[d];
        fractional.push_back({share - std::floor(share), d});
    }
    std::sort(fractional.begin(), fractional.end(),
              [](auto& a, auto& b) { return a.first > b.first; });
    for (int k = 0; assigned < n_p4p && k < static_cast<int>(fractional.size()); ++k, ++assigned)
        quota[fractional[k].second] += 1;
    for (auto& [d, idx] : by_district) {
        std::vector<int> shuffled = idx;
        rng.shuffle(shuffled);
        for (int k = 0; k < quota[d] && k < static_cast<int>(shuffled.size()); ++k)
            out[shuffled[k]] = Arm::P4P;
    }
    return out;
}

namespace {

double draw_ttc_noise(Rng& rng, const WorldConfig& cfg) {
    if (cfg.ttc_noise_kind == "normal") return cfg.ttc_noise_sd * rng.normal();
    // heavy: Student t with 2 df, same scale parameter
    double z = rng.normal();
    double u = rng.uniform01();
    while (u <= 0.0) u = rng.uniform01();
    double chi2_over_df = -std::log(u); // chi^2_2 / 2 ~ Exp(1)
    return cfg.ttc_noise_sd * z / std::sqrt(chi2_over_df);
}

} // namespace

World gen_world(const WorldConfig& config, const theory::ContractMenu& menu,
                const theory::TypeDistribution& dist, std::uint64_t seed) {
    config.validate();
    menu.validate();
    dist.validate();

    World w;
    w.config = config;
    w.menu = menu;
    w.dist = dist;
    w.seed = seed;

    const int D = config.n_districts;
    const int F = config.n_families;

    // markets with family-matched adjacency over the district graph
    std::vector<std::pair<int, int>> edges = config.district_adjacency;
    if (edges.empty() && D > 1)
        for (int d = 0; d < D; ++d) edges.push_back({d, (d + 1) % D});
    w.markets.resize(config.n_markets());
    for (int d = 0; d < D; ++d) {
        for (int f = 0; f < F; ++f) {
            auto& m = w.markets[d * F + f];
            m.id = d * F + f;
            m.district = d;
            m.family = f;
        }
    }
    for (auto [a, b] : edges) {
        if (a == b) continue;
        for (int f = 0; f < F; ++f) {
            w.markets[a * F + f].adjacent.push_back(b * F + f);
            w.markets[b * F + f].adjacent.push_back(a * F + f);
        }
    }
    for (auto& m : w.markets) {
        std::sort(m.adjacent.begin(), m.adjacent.end());
        m.adjacent.erase(std::unique(m.adjacent.begin(), m.adjacent.end()), m.adjacent.end());
    }
    auto adv = assign_advertised(config.n_markets(), config.advertised_counts, seed);
    for (int i = 0; i < config.n_markets(); ++i) w.markets[i].advertised = adv[i];

    // schools and streams
    w.schools.resize(config.n_schools);
    for (int s = 0; s < config.n_schools; ++s) {
        w.schools[s].id = s;
        w.schools[s].district = s % D;
    }
    auto exp = assign_experienced(w.schools, config.n_exp_p4p, seed, config.stratified_experienced);
    for (int s = 0; s < config.n_schools; ++s) w.schools[s].experienced = exp[s];

    for (int s = 0; s < config.n_schools; ++s) {
        for (int g = config.grade_lo; g <= config.grade_hi; ++g) {
            for (int k = 0; k < config.streams_per_grade; ++k) {
                Stream st;
                st.id = static_cast<int>(w.streams.size());
                st.school = s;
                st.grade = g;
                w.streams.push_back(st);
            }
        }
    }

    // potential applicants per market; application per the choice model
    const double theta_mean = 0.5 * (dist.theta_lo + dist.theta_hi);
    const double theta_sd = (dist.theta_hi - dist.theta_lo) / std::sqrt(12.0);
    const double tau_mean = 0.5 * (dist.tau_lo + dist.tau_hi);
    const double tau_sd = (dist.tau_hi - dist.tau_lo) / std::sqrt(12.0);
    for (int m = 0; m < config.n_markets(); ++m) {
        for (int k = 0; k < config.applicants_per_market; ++k) {
            Applicant a;
            a.id = static_cast<std::int64_t>(m) * config.applicants_per_market + k;
            a.market = m;
            Rng rng = Rng::substream(seed, "world.applicant", static_cast<std::uint64_t>(a.id));
            a.type = dist.draw(rng);
            a.ttc_score = config.ttc_base +
                          config.ttc_theta_link * (a.type.theta - theta_mean) / theta_sd +
                          draw_ttc_noise(rng, config);
            a.applied = theory::applies(a.type, w.markets[m].advertised, menu);
            w.applicants.push_back(a);
        }
    }

    // vacancies: one (grade, stream) cell per recruit slot, family rotating
    // over schools so every market gets slots
    struct Slot {
        int school;
        int family;
    };
    std::vector<std::vector<Slot>> slots_by_market(config.n_markets());
    for (int s = 0; s < config.n_schools; ++s) {
        for (int j = 0; j < config.recruit_slots_per_school; ++j) {
            // cycle families within each district's run of schools so every
            // market receives vacancies
            int family = (s / D + j) % F;
            int market = w.schools[s].district * F + family;
            slots_by_market[market].push_back({s, family});
        }
    }

    auto make_covariates = [&](Teacher& t, Rng& rng) {
        double ztheta = (t.type.theta - theta_mean) / theta_sd;
        double ztau = (t.type.tau - tau_mean) / tau_sd;
        double l1 = config.covar_skill_link;
        double l2 = config.covar_motiv_link;
        t.grading_task = l1 * ztheta + std::sqrt(std::max(0.0, 1.0 - l1 * l1)) * rng.normal();
        double raw = 0.28 + 0.33 * (l2 * ztau + std::sqrt(std::max(0.0, 1.0 - l2 * l2)) * rng.normal());
        t.dictator_share = std::clamp(raw, 0.0, 1.0);
        t.tva_effect = rng.normal(); // unit scale; EffectSpec sets the sd
    };

    // hire at random from each market's applicant pool
    for (int m = 0; m < config.n_markets(); ++m) {
        std::vector<std::int64_t> pool;
        for (auto& a : w.applicants)
            if (a.market == m && a.applied) pool.push_back(a.id);
        Rng rng = Rng::substream(seed, "world.hire", static_cast<std::uint64_t>(m));
        rng.shuffle(pool);
        auto& slots = slots_by_market[m];
        std::size_t hires = std::min(pool.size(), slots.size());
        w.unfilled_vacancies += static_cast<int>(slots.size() - hires);
        for (std::size_t k = 0; k < hires; ++k) {
            Applicant& a = w.applicants[pool[k]];
            Teacher t;
            t.id = static_cast<int>(w.teachers.size());
            t.recruit = true;
            t.market = m;
            t.advertised = w.markets[m].advertised;
            t.type = a.type;
            t.qualification = slots[k].family;
            t.school = slots[k].school;
            Rng crng = Rng::substream(seed, "world.recruit.cov", static_cast<std::uint64_t>(a.id));
            make_covariates(t, crng);
            a.hired = true;
            a.teacher_id = t.id;
            w.teachers.push_back(t);
        }
    }

    // teaching cells: per school and family, (grade, stream) cells go first
    // to that school's recruits of the family, then to fresh incumbents
    std::vector<std::vector<int>> school_recruits(config.n_schools);
    for (const auto& t : w.teachers) school_recruits[t.school].push_back(t.id);

    for (int s = 0; s < config.n_schools; ++s) {
        for (int f = 0; f < F; ++f) {
            std::vector<int> cells; // stream ids of this school (all grades)
            for (const auto& st : w.streams)
                if (st.school == s) cells.push_back(st.id);
            std::vector<int> takers;
            for (int tid : school_recruits[s])
                if (w.teachers[tid].qualification == f) takers.push_back(tid);
            for (std::size_t c = 0; c < cells.size(); ++c) {
                int teacher_id;
                if (c < takers.size()) {
                    teacher_id = takers[c];
                } else {
                    Teacher t;
                    t.id = static_cast<int>(w.teachers.size());
                    t.recruit = false;
                    t.qualification = f;
                    t.school = s;
                    Rng rng = Rng::substream(seed, "world.incumbent",
                                             (static_cast<std::uint64_t>(s) << 20) ^
                                                 (static_cast<std::uint64_t>(f) << 10) ^ c);
                    t.type = dist.draw(rng);
                    make_covariates(t, rng);
                    w.teachers.push_back(t);
                    teacher_id = t.id;
                }
                for (int b = 0; b < config.n_subjects; ++b) {
                    if (config.subject_family(b) != f) continue;
                    w.teaching.push_back({1, cells[c], b, teacher_id});
                    w.teaching.push_back({2, cells[c], b, teacher_id});
                }
            }
        }
    }

    // pupils: year-1 cohort per stream; year-2 streams keep continuing
    // pupils (promoted within the school) and fill with new entrants
    const int S = config.n_subjects;
    auto draw_latents = [&](Pupil& p, Rng& rng) {
        p.latent.resize(3 * S);
        for (int b = 0; b < S; ++b) p.latent[b] = rng.normal();
        for (int r = 1; r < 3; ++r)
            for (int b = 0; b < S; ++b)
                p.latent[r * S + b] = config.ar1_rho * p.latent[(r - 1) * S + b] +
                                      std::sqrt(1.0 - config.ar1_rho * config.ar1_rho) * rng.normal();
        for (int r = 0; r < 3; ++r) p.round_effect[r] = rng.normal();
    };

    std::int64_t next_pupil = 0;
    std::vector<std::vector<std::int64_t>> year1_roster(w.streams.size());
    for (const auto& st : w.streams) {
        for (int k = 0; k < config.pupils_per_stream; ++k) {
            Pupil p;
            p.id = next_pupil++;
            p.stream_by_round[0] = st.id;
            p.stream_by_round[1] = st.id;
            Rng rng = Rng::substream(seed, "world.pupil", static_cast<std::uint64_t>(p.id));
            draw_latents(p, rng);
            year1_roster[st.id].push_back(p.id);
            w.pupils.push_back(p);
        }
    }
    // promotion: stream index k of grade g feeds stream index k of grade g+1
    for (const auto& st : w.streams) {
        std::vector<std::int64_t> roster;
        // feeder stream: previous grade, same school, same within-grade slot
        if (st.grade > config.grade_lo) {
            int feeder = st.id - config.streams_per_grade;
            for (std::int64_t pid : year1_roster[feeder]) {
                Rng rng = Rng::substream(seed, "world.promote", static_cast<std::uint64_t>(pid));
                if (rng.bernoulli(config.pupil_continue_prob)) {
                    w.pupils[pid].stream_by_round[2] = st.id;
                    roster.push_back(pid);
                }
            }
        }
        while (static_cast<int>(roster.size()) < config.pupils_per_stream) {
            Pupil p;
            p.id = next_pupil++;
            p.stream_by_round[2] = st.id;
            Rng rng = Rng::substream(seed, "world.pupil", static_cast<std::uint64_t>(p.id));
            draw_latents(p, rng);
            roster.push_back(p.id);
            w.pupils.push_back(p);
        }
    }

    // sampling flags per round
    for (const auto& st : w.streams) {
        for (int r = 0; r < 3; ++r) {
            std::vector<std::int64_t> enrolled;
            for (const auto& p : w.pupils)
                if (p.stream_by_round[r] == st.id) enrolled.push_back(p.id);
            if (enrolled.empty()) continue;
            int want = r == 0 ? config.sample_baseline : config.sample_endline;
            Rng rng = Rng::substream(seed, "world.sample",
                                     (static_cast<std::uint64_t>(st.id) << 2) ^ r);
            rng.shuffle(enrolled);
            int take = std::min<int>(want, static_cast<int>(enrolled.size()));
            for (int k = 0; k < take; ++k) w.pupils[enrolled[k]].sampled[r] = true;
        }
    }
    return w;
}

std::vector<SaturationRow> saturation_covariates(const std::vector<LaborMarket>& markets) {
    std::vector<SaturationRow> out;
    out.reserve(markets.size());
    for (const auto& m : markets) {
        SaturationRow row;
        row.market = m.id;
        row.adjacent_total = static_cast<int>(m.adjacent.size());
        for (int j : m.adjacent) {
            if (markets[j].advertised == Arm::P4P) ++row.adjacent_p4p;
            if (markets[j].advertised == Arm::Mixed) ++row.adjacent_mixed;
        }
        out.push_back(row);
    }
    return out;
}

Outcomes simulate_outcomes(const World& w, const EffectSpec& fx, std::uint64_t seed) {
    const auto& cfg = w.config;
    const int S = cfg.n_subjects;
    Outcomes out;

    // retention of recruits into year 2, with optional covariate interaction
    for (const auto& t : w.teachers) {
        if (!t.recruit) {
            out.retained[t.id] = true;
            continue;
        }
        bool p4p = w.schools[t.school].experienced == Arm::P4P;
        double p = fx.retention_base + (p4p ? fx.retention_effect : 0.0) +
                   (p4p ? fx.retention_covar_link * t.grading_task : 0.0);
        p = std::clamp(p, 0.0, 1.0);
        Rng rng = Rng::substream(seed, "sim.retention", static_cast<std::uint64_t>(t.id));
        out.retained[t.id] = rng.bernoulli(p);
    }

    // replacements take over a leaver's year-2 cells
    std::map<int, int> replacement_of;
    std::vector<Teacher> all_teachers = w.teachers;
    for (const auto& t : w.teachers) {
        if (out.retained.at(t.id)) continue;
        Teacher repl;
        repl.id = static_cast<int>(all_teachers.size());
        repl.recruit = false;
        repl.qualification = t.qualification;
        repl.school = t.school;
        repl.entered_year = 2;
        Rng rng = Rng::substream(seed, "sim.replacement", static_cast<std::uint64_t>(t.id));
        repl.type = w.dist.draw(rng);
        double ztheta = (repl.type.theta - 0.5 * (w.dist.theta_lo + w.dist.theta_hi)) /
                        ((w.dist.theta_hi - w.dist.theta_lo) / std::sqrt(12.0));
        repl.grading_task = cfg.covar_skill_link * ztheta +
                            std::sqrt(std::max(0.0, 1.0 - cfg.covar_skill_link *
                                                          cfg.covar_skill_link)) *
                                rng.normal();
        repl.dictator_share = std::clamp(0.28 + 0.33 * rng.normal(), 0.0, 1.0);
        repl.tva_effect = rng.normal();
        replacement_of[t.id] = repl.id;
        out.replacements.push_back(repl);
        all_teachers.push_back(repl);
        out.retained[repl.id] = true;
    }

    auto teacher_in_year = [&](int teacher_id, int year) -> const Teacher& {
        if (year == 2 && !out.retained.at(teacher_id))
            return all_teachers[replacement_of.at(teacher_id)];
        return all_teachers[teacher_id];
    };

    // teacher-year shocks, unit scale
    auto eta = [&](int teacher_id, int year) {
        Rng rng = Rng::substream(seed, "sim.teacher_year",
                                 (static_cast<std::uint64_t>(teacher_id) << 2) ^ year);
        return rng.normal();
    };

    // teaching lookup: (year, stream, subject) -> effective teacher
    std::map<std::tuple<int, int, int>, int> teach;
    for (const auto& cell : w.teaching) {
        int tid = cell.teacher;
        if (cell.year == 2) tid = teacher_in_year(tid, 2).id;
        teach[{cell.year, cell.stream, cell.subject}] = tid;
    }

    auto teacher_term = [&](const Teacher& t, Arm school_arm, int year) {
        bool p4p = school_arm == Arm::P4P;
        double v = 0.0;
        if (t.recruit) {
            if (t.advertised == Arm::P4P) v += fx.adv_learning;
            if (t.advertised == Arm::Mixed) v += fx.mixed_learning;
            if (t.advertised == Arm::P4P && p4p) v += fx.interact_learning;
        } else {
            v += fx.incumbent_gap;
            if (p4p) v += fx.exp_incumbent;
        }
        if (p4p) v += fx.exp_learning;
        if (fx.theory_link != 0.0) {
            double e = theory::effort(t.type, p4p ? theory::Scheme::P4P : theory::Scheme::FW,
                                      w.menu);
            v += fx.theory_link * t.type.theta * e;
        }
        v += fx.teacher_sd * t.tva_effect + fx.teacher_year_sd * eta(t.id, year);
        return v;
    };

    // per-stream enrollment and sample counts per round
    std::vector<std::array<int, 2>> stream_counts(w.streams.size() * 3, {0, 0});
    for (const auto& p : w.pupils)
        for (int r = 0; r < 3; ++r)
            if (p.stream_by_round[r] >= 0) {
                auto& c = stream_counts[p.stream_by_round[r] * 3 + r];
                c[0] += 1;
                if (p.sampled[r]) c[1] += 1;
            }

    for (const auto& p : w.pupils) {
        for (int r = 0; r < 3; ++r) {
            if (!p.sampled[r] || p.stream_by_round[r] < 0) continue;
            int stream_id = p.stream_by_round[r];
            const auto& st = w.streams[stream_id];
            Rng arng = Rng::substream(seed, "sim.absent",
                                      (static_cast<std::uint64_t>(p.id) << 2) ^ r);
            bool absent = arng.bernoulli(fx.absent_rate);
            int year = r == 2 ? 2 : 1;
            for (int b = 0; b < S; ++b) {
                AssessmentRow row;
                row.pupil = p.id;
                row.subject = b;
                row.round = r;
                row.grade = st.grade;
                row.stream = stream_id;
                row.school = st.school;
                row.district = w.schools[st.school].district;
                row.enrolled = stream_counts[stream_id * 3 + r][0];
                row.sampled = stream_counts[stream_id * 3 + r][1];
                row.absent = absent;
                double score = fx.pupil_ability_scale * p.latent[r * S + b] +
                               fx.pupil_round_sd * p.round_effect[r];
                if (r >= 1) {
                    auto it = teach.find({year, stream_id, b});
                    if (it != teach.end()) {
                        row.teacher = it->second;
                        score += teacher_term(all_teachers[it->second],
                                              w.schools[st.school].experienced, year);
                    }
                }
                Rng nrng = Rng::substream(
                    seed, "sim.noise",
                    (static_cast<std::uint64_t>(p.id) * 3 + r) * S + static_cast<std::uint64_t>(b));
                score += fx.noise_sd * nrng.normal();
                row.score = score;
                out.assessments.push_back(row);

                if (fx.items_per_test > 0 && !absent) {
                    Rng irng = Rng::substream(seed, "sim.items",
                                              (static_cast<std::uint64_t>(p.id) * 3 + r) * S + b);
                    for (int item = 0; item < fx.items_per_test; ++item) {
                        // item bank deterministic per (subject, grade, round, item)
                        Rng brng = Rng::substream(
                            seed, "sim.bank",
                            ((static_cast<std::uint64_t>(b) * 16 + st.grade) * 4 + r) * 256 + item);
                        double a = brng.uniform(0.6, 1.8);
                        double diff = brng.uniform(-2.0, 2.0);
                        double pr = 1.0 / (1.0 + std::exp(-a * (score - diff)));
                        out.responses.push_back({p.id, b, st.grade, r, item,
                                                 irng.bernoulli(pr) ? 1 : 0});
                    }
                }
            }
        }
    }

    // endline covariate re-measurement of retained recruits
    for (const auto& t : w.teachers) {
        if (!t.recruit || !out.retained.at(t.id)) continue;
        bool p4p = w.schools[t.school].experienced == Arm::P4P;
        Rng rng = Rng::substream(seed, "sim.endline_attr", static_cast<std::uint64_t>(t.id));
        out.endline_grading[t.id] = fx.endline_attr_rho * t.grading_task +
                                    (p4p ? fx.endline_attr_effect : 0.0) +
                                    fx.endline_attr_sd * rng.normal();
        out.endline_dictator[t.id] = std::clamp(
            fx.endline_attr_rho * t.dictator_share + (p4p ? fx.endline_attr_effect : 0.0) +
                0.33 * fx.endline_attr_sd * rng.normal(),
            0.0, 1.0);
    }

    // spot checks per teacher-year
    for (int year = 1; year <= 2; ++year) {
        std::vector<int> active;
        std::map<int, bool> seen;
        for (const auto& cell : w.teaching) {
            if (cell.year != year) continue;
            int tid = year == 2 ? teacher_in_year(cell.teacher, 2).id : cell.teacher;
            if (seen[tid]) continue;
            seen[tid] = true;
            active.push_back(tid);
        }
        std::sort(active.begin(), active.end());
        int checks = year == 1 ? fx.spot_checks_year1 : fx.spot_checks_year2;
        for (int tid : active) {
            const Teacher& t = all_teachers[tid];
            bool p4p = w.schools[t.school].experienced == Arm::P4P;
            if (year == 1 && !p4p && !fx.fw_inputs_year1) continue;
            Rng rng = Rng::substream(seed, "sim.inputs",
                                     (static_cast<std::uint64_t>(tid) << 2) ^ year);
            SpotCheckRow row;
            row.teacher = tid;
            row.round = year;
            double p_present = std::clamp(
                fx.presence_base + (p4p ? fx.presence_effect : 0.0) + fx.presence_sd * rng.normal(),
                0.0, 1.0);
            double p_plan = std::clamp(fx.prep_base + (p4p ? fx.prep_effect : 0.0), 0.0, 1.0);
            int present = 0, plans = 0;
            for (int c = 0; c < checks; ++c) {
                present += rng.bernoulli(p_present);
                plans += rng.bernoulli(p_plan);
            }
            row.presence = checks > 0 ? static_cast<double>(present) / checks : 0.0;
            row.lesson_plan = checks > 0 ? static_cast<double>(plans) / checks : 0.0;
            double ped_mean = fx.pedagogy_base + (p4p ? fx.pedagogy_effect : 0.0);
            row.ped_objective = std::clamp(ped_mean + fx.pedagogy_sd * rng.normal(), 0.0, 3.0);
            row.ped_activities = std::clamp(ped_mean + fx.pedagogy_sd * rng.normal(), 0.0, 3.0);
            row.ped_assessment = std::clamp(ped_mean + fx.pedagogy_sd * rng.normal(), 0.0, 3.0);
            row.ped_engagement = std::clamp(ped_mean + fx.pedagogy_sd * rng.normal(), 0.0, 3.0);
            out.spot_checks.push_back(row);
        }
    }

    return out;
}

} // namespace p4p::world
