#include "p4p/worldio.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "p4p/csv.hpp"
#include "p4p/errors.hpp"

namespace p4p::io {

namespace fs = std::filesystem;
using csv::fmt_double;
using csv::fmt_int;
using csv::Table;
using world::Arm;

namespace {

std::string arm_str(Arm a) { return theory::to_string(a); }

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(';');
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start < s.size()) {
        std::size_t end = s.find(';', start);
        if (end == std::string::npos) end = s.size();
        out.push_back(std::stoi(s.substr(start, end - start)));
        start = end + 1;
    }
    return out;
}

double need_double(const Table& t, std::size_t row, std::size_t col, const std::string& ctx) {
    auto v = csv::parse_double(t.rows[row][col], ctx);
    if (!v) throw SchemaError(ctx + ": unexpected empty cell");
    return *v;
}

std::int64_t need_int(const Table& t, std::size_t row, std::size_t col, const std::string& ctx) {
    auto v = csv::parse_int(t.rows[row][col], ctx);
    if (!v) throw SchemaError(ctx + ": unexpected empty cell");
    return *v;
}

} // namespace

void export_world(const world::World& w, const std::string& dir) {
    fs::create_directories(dir);

    Table markets;
    markets.header = {"market", "district", "family", "arm", "adjacent"};
    for (const auto& m : w.markets)
        markets.rows.push_back({fmt_int(m.id), fmt_int(m.district), fmt_int(m.family),
                                arm_str(m.advertised), join_ints(m.adjacent)});
    csv::write_file(dir + "/markets.csv", markets);

    Table schools;
    schools.header = {"school", "district", "arm"};
    for (const auto& s : w.schools)
        schools.rows.push_back({fmt_int(s.id), fmt_int(s.district), arm_str(s.experienced)});
    csv::write_file(dir + "/schools.csv", schools);

    Table streams;
    streams.header = {"stream", "school", "grade"};
    for (const auto& s : w.streams)
        streams.rows.push_back({fmt_int(s.id), fmt_int(s.school), fmt_int(s.grade)});
    csv::write_file(dir + "/streams.csv", streams);

    Table teachers;
    teachers.header = {"teacher", "school", "recruit", "market", "advertised", "qualification",
                       "tau", "theta", "grading_task", "dictator_share", "tva_effect",
                       "entered_year"};
    for (const auto& t : w.teachers)
        teachers.rows.push_back({fmt_int(t.id), fmt_int(t.school), fmt_int(t.recruit),
                                 fmt_int(t.market), arm_str(t.advertised),
                                 fmt_int(t.qualification), fmt_double(t.type.tau),
                                 fmt_double(t.type.theta), fmt_double(t.grading_task),
                                 fmt_double(t.dictator_share), fmt_double(t.tva_effect),
                                 fmt_int(t.entered_year)});
    csv::write_file(dir + "/teachers.csv", teachers);

    const int S = w.config.n_subjects;
    Table pupils;
    pupils.header = {"pupil", "stream_r0", "stream_r1", "stream_r2",
                     "sampled_r0", "sampled_r1", "sampled_r2",
                     "effect_r0", "effect_r1", "effect_r2"};
    for (int r = 0; r < 3; ++r)
        for (int b = 0; b < S; ++b)
            pupils.header.push_back("latent_r" + std::to_string(r) + "_s" + std::to_string(b));
    for (const auto& p : w.pupils) {
        std::vector<std::string> row{fmt_int(p.id),
                                     fmt_int(p.stream_by_round[0]),
                                     fmt_int(p.stream_by_round[1]),
                                     fmt_int(p.stream_by_round[2]),
                                     fmt_int(p.sampled[0]),
                                     fmt_int(p.sampled[1]),
                                     fmt_int(p.sampled[2]),
                                     fmt_double(p.round_effect[0]),
                                     fmt_double(p.round_effect[1]),
                                     fmt_double(p.round_effect[2])};
        for (double v : p.latent) row.push_back(fmt_double(v));
        pupils.rows.push_back(std::move(row));
    }
    csv::write_file(dir + "/pupils.csv", pupils);

    Table applicants;
    applicants.header = {"applicant", "market", "tau", "theta", "ttc_score", "applied", "hired",
                         "teacher"};
    for (const auto& a : w.applicants)
        applicants.rows.push_back({fmt_int(a.id), fmt_int(a.market), fmt_double(a.type.tau),
                                   fmt_double(a.type.theta), fmt_double(a.ttc_score),
                                   fmt_int(a.applied), fmt_int(a.hired), fmt_int(a.teacher_id)});
    csv::write_file(dir + "/applicants.csv", applicants);

    Table teaching;
    teaching.header = {"year", "stream", "subject", "teacher"};
    for (const auto& c : w.teaching)
        teaching.rows.push_back(
            {fmt_int(c.year), fmt_int(c.stream), fmt_int(c.subject), fmt_int(c.teacher)});
    csv::write_file(dir + "/teaching.csv", teaching);

    Table assignments;
    assignments.header = {"unit", "level", "arm"};
    for (const auto& m : w.markets)
        assignments.rows.push_back({fmt_int(m.id), "market", arm_str(m.advertised)});
    for (const auto& s : w.schools)
        assignments.rows.push_back({fmt_int(s.id), "school", arm_str(s.experienced)});
    csv::write_file(dir + "/assignments.csv", assignments);

    nlohmann::json meta;
    meta["seed"] = w.seed;
    meta["unfilled_vacancies"] = w.unfilled_vacancies;
    meta["n_subjects"] = S;
    meta["n_districts"] = w.config.n_districts;
    meta["n_families"] = w.config.n_families;
    meta["grade_lo"] = w.config.grade_lo;
    meta["grade_hi"] = w.config.grade_hi;
    std::ofstream(dir + "/world_meta.json") << meta.dump(2) << "\n";
}

void export_outcomes(const world::World& w, const world::Outcomes& o, const std::string& dir) {
    fs::create_directories(dir);
    (void)w;

    Table rows;
    rows.header = {"pupil", "subject", "round", "grade", "stream", "school",
                   "district", "teacher", "score", "absent", "enrolled", "sampled"};
    for (const auto& a : o.assessments)
        rows.rows.push_back({fmt_int(a.pupil), fmt_int(a.subject), fmt_int(a.round),
                             fmt_int(a.grade), fmt_int(a.stream), fmt_int(a.school),
                             fmt_int(a.district), fmt_int(a.teacher),
                             a.absent ? std::string() : fmt_double(a.score), fmt_int(a.absent),
                             fmt_int(a.enrolled), fmt_int(a.sampled)});
    csv::write_file(dir + "/assessments.csv", rows);

    Table checks;
    checks.header = {"teacher", "round", "presence", "lesson_plan", "ped_objective",
                     "ped_activities", "ped_assessment", "ped_engagement"};
    for (const auto& s : o.spot_checks)
        checks.rows.push_back({fmt_int(s.teacher), fmt_int(s.round), fmt_double(s.presence),
                               fmt_double(s.lesson_plan), fmt_double(s.ped_objective),
                               fmt_double(s.ped_activities), fmt_double(s.ped_assessment),
                               fmt_double(s.ped_engagement)});
    csv::write_file(dir + "/spotchecks.csv", checks);

    if (!o.responses.empty()) {
        Table resp;
        resp.header = {"pupil", "subject", "grade", "round", "item", "correct"};
        for (const auto& r : o.responses)
            resp.rows.push_back({fmt_int(r.pupil), fmt_int(r.subject), fmt_int(r.grade),
                                 fmt_int(r.round), fmt_int(r.item), fmt_int(r.correct)});
        csv::write_file(dir + "/responses.csv", resp);
    }

    Table retention;
    retention.header = {"teacher", "retained", "endline_grading", "endline_dictator"};
    for (const auto& [id, kept] : o.retained) {
        auto g = o.endline_grading.find(id);
        auto x = o.endline_dictator.find(id);
        retention.rows.push_back({fmt_int(id), fmt_int(kept),
                                  g == o.endline_grading.end() ? std::string()
                                                               : fmt_double(g->second),
                                  x == o.endline_dictator.end() ? std::string()
                                                                : fmt_double(x->second)});
    }
    csv::write_file(dir + "/retention.csv", retention);

    Table repl;
    repl.header = {"teacher", "school", "qualification", "tau", "theta", "grading_task",
                   "dictator_share", "tva_effect"};
    for (const auto& t : o.replacements)
        repl.rows.push_back({fmt_int(t.id), fmt_int(t.school), fmt_int(t.qualification),
                             fmt_double(t.type.tau), fmt_double(t.type.theta),
                             fmt_double(t.grading_task), fmt_double(t.dictator_share),
                             fmt_double(t.tva_effect)});
    csv::write_file(dir + "/replacements.csv", repl);
}

world::World load_world(const std::string& dir) {
    world::World w;
    nlohmann::json meta;
    {
        std::ifstream in(dir + "/world_meta.json");
        if (!in) throw ValidationError("missing world_meta.json in " + dir);
        in >> meta;
    }
    w.seed = meta.at("seed").get<std::uint64_t>();
    w.unfilled_vacancies = meta.at("unfilled_vacancies").get<int>();
    const int S = meta.at("n_subjects").get<int>();
    w.config.n_subjects = S;
    w.config.n_districts = meta.at("n_districts").get<int>();
    w.config.n_families = meta.at("n_families").get<int>();
    w.config.grade_lo = meta.at("grade_lo").get<int>();
    w.config.grade_hi = meta.at("grade_hi").get<int>();

    auto markets = csv::read_file(dir + "/markets.csv");
    for (std::size_t i = 0; i < markets.nrow(); ++i) {
        world::LaborMarket m;
        m.id = static_cast<int>(need_int(markets, i, markets.col("market"), "markets"));
        m.district = static_cast<int>(need_int(markets, i, markets.col("district"), "markets"));
        m.family = static_cast<int>(need_int(markets, i, markets.col("family"), "markets"));
        m.advertised = theory::arm_from_string(markets.rows[i][markets.col("arm")]);
        auto adjcell = markets.rows[i][markets.col("adjacent")];
        if (!adjcell.empty()) m.adjacent = split_ints(adjcell);
        w.markets.push_back(m);
    }
    auto schools = csv::read_file(dir + "/schools.csv");
    for (std::size_t i = 0; i < schools.nrow(); ++i) {
        world::School s;
        s.id = static_cast<int>(need_int(schools, i, schools.col("school"), "schools"));
        s.district = static_cast<int>(need_int(schools, i, schools.col("district"), "schools"));
        s.experienced = theory::arm_from_string(schools.rows[i][schools.col("arm")]);
        w.schools.push_back(s);
    }
    auto streams = csv::read_file(dir + "/streams.csv");
    for (std::size_t i = 0; i < streams.nrow(); ++i) {
        world::Stream s;
        s.id = static_cast<int>(need_int(streams, i, streams.col("stream"), "streams"));
        s.school = static_cast<int>(need_int(streams, i, streams.col("school"), "streams"));
        s.grade = static_cast<int>(need_int(streams, i, streams.col("grade"), "streams"));
        w.streams.push_back(s);
    }
    auto teachers = csv::read_file(dir + "/teachers.csv");
    for (std::size_t i = 0; i < teachers.nrow(); ++i) {
        world::Teacher t;
        t.id = static_cast<int>(need_int(teachers, i, teachers.col("teacher"), "teachers"));
        t.school = static_cast<int>(need_int(teachers, i, teachers.col("school"), "teachers"));
        t.recruit = need_int(teachers, i, teachers.col("recruit"), "teachers") != 0;
        t.market = static_cast<int>(need_int(teachers, i, teachers.col("market"), "teachers"));
        t.advertised = theory::arm_from_string(teachers.rows[i][teachers.col("advertised")]);
        t.qualification =
            static_cast<int>(need_int(teachers, i, teachers.col("qualification"), "teachers"));
        t.type.tau = need_double(teachers, i, teachers.col("tau"), "teachers");
        t.type.theta = need_double(teachers, i, teachers.col("theta"), "teachers");
        t.grading_task = need_double(teachers, i, teachers.col("grading_task"), "teachers");
        t.dictator_share = need_double(teachers, i, teachers.col("dictator_share"), "teachers");
        t.tva_effect = need_double(teachers, i, teachers.col("tva_effect"), "teachers");
        t.entered_year =
            static_cast<int>(need_int(teachers, i, teachers.col("entered_year"), "teachers"));
        w.teachers.push_back(t);
    }
    auto pupils = csv::read_file(dir + "/pupils.csv");
    for (std::size_t i = 0; i < pupils.nrow(); ++i) {
        world::Pupil p;
        p.id = need_int(pupils, i, pupils.col("pupil"), "pupils");
        for (int r = 0; r < 3; ++r) {
            p.stream_by_round[r] = static_cast<int>(
                need_int(pupils, i, pupils.col("stream_r" + std::to_string(r)), "pupils"));
            p.sampled[r] =
                need_int(pupils, i, pupils.col("sampled_r" + std::to_string(r)), "pupils") != 0;
            p.round_effect[r] =
                need_double(pupils, i, pupils.col("effect_r" + std::to_string(r)), "pupils");
        }
        p.latent.resize(3 * S);
        for (int r = 0; r < 3; ++r)
            for (int b = 0; b < S; ++b)
                p.latent[r * S + b] = need_double(
                    pupils, i,
                    pupils.col("latent_r" + std::to_string(r) + "_s" + std::to_string(b)),
                    "pupils");
        w.pupils.push_back(std::move(p));
    }
    auto applicants = csv::read_file(dir + "/applicants.csv");
    for (std::size_t i = 0; i < applicants.nrow(); ++i) {
        world::Applicant a;
        a.id = need_int(applicants, i, applicants.col("applicant"), "applicants");
        a.market = static_cast<int>(need_int(applicants, i, applicants.col("market"), "applicants"));
        a.type.tau = need_double(applicants, i, applicants.col("tau"), "applicants");
        a.type.theta = need_double(applicants, i, applicants.col("theta"), "applicants");
        a.ttc_score = need_double(applicants, i, applicants.col("ttc_score"), "applicants");
        a.applied = need_int(applicants, i, applicants.col("applied"), "applicants") != 0;
        a.hired = need_int(applicants, i, applicants.col("hired"), "applicants") != 0;
        a.teacher_id =
            static_cast<int>(need_int(applicants, i, applicants.col("teacher"), "applicants"));
        w.applicants.push_back(a);
    }
    auto teaching = csv::read_file(dir + "/teaching.csv");
    for (std::size_t i = 0; i < teaching.nrow(); ++i) {
        world::TeachingCell c;
        c.year = static_cast<int>(need_int(teaching, i, teaching.col("year"), "teaching"));
        c.stream = static_cast<int>(need_int(teaching, i, teaching.col("stream"), "teaching"));
        c.subject = static_cast<int>(need_int(teaching, i, teaching.col("subject"), "teaching"));
        c.teacher = static_cast<int>(need_int(teaching, i, teaching.col("teacher"), "teaching"));
        w.teaching.push_back(c);
    }
    return w;
}

world::Outcomes load_outcomes(const world::World& w, const std::string& dir) {
    (void)w;
    world::Outcomes o;
    auto rows = csv::read_file(dir + "/assessments.csv");
    for (std::size_t i = 0; i < rows.nrow(); ++i) {
        world::AssessmentRow a;
        a.pupil = need_int(rows, i, rows.col("pupil"), "assessments");
        a.subject = static_cast<int>(need_int(rows, i, rows.col("subject"), "assessments"));
        a.round = static_cast<int>(need_int(rows, i, rows.col("round"), "assessments"));
        a.grade = static_cast<int>(need_int(rows, i, rows.col("grade"), "assessments"));
        a.stream = static_cast<int>(need_int(rows, i, rows.col("stream"), "assessments"));
        a.school = static_cast<int>(need_int(rows, i, rows.col("school"), "assessments"));
        a.district = static_cast<int>(need_int(rows, i, rows.col("district"), "assessments"));
        a.teacher = static_cast<int>(need_int(rows, i, rows.col("teacher"), "assessments"));
        a.absent = need_int(rows, i, rows.col("absent"), "assessments") != 0;
        auto score = csv::parse_double(rows.rows[i][rows.col("score")], "assessments.score");
        if (score) {
            a.score = *score;
        } else if (!a.absent) {
            throw SchemaError("assessments row " + std::to_string(i) +
                              ": empty score for a present pupil");
        }
        a.enrolled = static_cast<int>(need_int(rows, i, rows.col("enrolled"), "assessments"));
        a.sampled = static_cast<int>(need_int(rows, i, rows.col("sampled"), "assessments"));
        o.assessments.push_back(a);
    }
    auto checks = csv::read_file(dir + "/spotchecks.csv");
    for (std::size_t i = 0; i < checks.nrow(); ++i) {
        world::SpotCheckRow s;
        s.teacher = static_cast<int>(need_int(checks, i, checks.col("teacher"), "spotchecks"));
        s.round = static_cast<int>(need_int(checks, i, checks.col("round"), "spotchecks"));
        s.presence = need_double(checks, i, checks.col("presence"), "spotchecks");
        s.lesson_plan = need_double(checks, i, checks.col("lesson_plan"), "spotchecks");
        s.ped_objective = need_double(checks, i, checks.col("ped_objective"), "spotchecks");
        s.ped_activities = need_double(checks, i, checks.col("ped_activities"), "spotchecks");
        s.ped_assessment = need_double(checks, i, checks.col("ped_assessment"), "spotchecks");
        s.ped_engagement = need_double(checks, i, checks.col("ped_engagement"), "spotchecks");
        o.spot_checks.push_back(s);
    }
    if (fs::exists(dir + "/responses.csv")) {
        auto resp = csv::read_file(dir + "/responses.csv");
        for (std::size_t i = 0; i < resp.nrow(); ++i) {
            world::ItemResponseRow r;
            r.pupil = need_int(resp, i, resp.col("pupil"), "responses");
            r.subject = static_cast<int>(need_int(resp, i, resp.col("subject"), "responses"));
            r.grade = static_cast<int>(need_int(resp, i, resp.col("grade"), "responses"));
            r.round = static_cast<int>(need_int(resp, i, resp.col("round"), "responses"));
            r.item = static_cast<int>(need_int(resp, i, resp.col("item"), "responses"));
            r.correct = static_cast<int>(need_int(resp, i, resp.col("correct"), "responses"));
            o.responses.push_back(r);
        }
    }
    auto retention = csv::read_file(dir + "/retention.csv");
    for (std::size_t i = 0; i < retention.nrow(); ++i) {
        int id = static_cast<int>(need_int(retention, i, retention.col("teacher"), "retention"));
        o.retained[id] = need_int(retention, i, retention.col("retained"), "retention") != 0;
        if (retention.has_col("endline_grading")) {
            auto g = csv::parse_double(retention.rows[i][retention.col("endline_grading")],
                                       "retention.endline_grading");
            if (g) o.endline_grading[id] = *g;
            auto x = csv::parse_double(retention.rows[i][retention.col("endline_dictator")],
                                       "retention.endline_dictator");
            if (x) o.endline_dictator[id] = *x;
        }
    }
    if (fs::exists(dir + "/replacements.csv")) {
        auto repl = csv::read_file(dir + "/replacements.csv");
        for (std::size_t i = 0; i < repl.nrow(); ++i) {
            world::Teacher t;
            t.id = static_cast<int>(need_int(repl, i, repl.col("teacher"), "replacements"));
            t.school = static_cast<int>(need_int(repl, i, repl.col("school"), "replacements"));
            t.qualification = static_cast<int>(
                need_int(repl, i, repl.col("qualification"), "replacements"));
            t.type.tau = need_double(repl, i, repl.col("tau"), "replacements");
            t.type.theta = need_double(repl, i, repl.col("theta"), "replacements");
            t.grading_task = need_double(repl, i, repl.col("grading_task"), "replacements");
            t.dictator_share = need_double(repl, i, repl.col("dictator_share"), "replacements");
            t.tva_effect = need_double(repl, i, repl.col("tva_effect"), "replacements");
            t.recruit = false;
            t.entered_year = 2;
            o.replacements.push_back(t);
        }
    }
    return o;
}

std::vector<Violation> validate_panel(const std::string& dir) {
    std::vector<Violation> out;
    auto complain = [&](const std::string& file, const std::string& msg) {
        out.push_back({file, msg});
    };
    std::set<std::int64_t> stream_ids, school_ids, teacher_ids, pupil_ids, market_ids;
    try {
        auto schools = csv::read_file(dir + "/schools.csv");
        auto c = schools.col("school");
        for (std::size_t i = 0; i < schools.nrow(); ++i)
            school_ids.insert(need_int(schools, i, c, "schools"));
    } catch (const Error& e) {
        complain("schools.csv", e.what());
    }
    try {
        auto markets = csv::read_file(dir + "/markets.csv");
        auto c = markets.col("market");
        for (std::size_t i = 0; i < markets.nrow(); ++i)
            market_ids.insert(need_int(markets, i, c, "markets"));
    } catch (const Error& e) {
        complain("markets.csv", e.what());
    }
    try {
        auto streams = csv::read_file(dir + "/streams.csv");
        auto cs = streams.col("stream");
        auto csc = streams.col("school");
        for (std::size_t i = 0; i < streams.nrow(); ++i) {
            stream_ids.insert(need_int(streams, i, cs, "streams"));
            auto school = need_int(streams, i, csc, "streams");
            if (!school_ids.count(school))
                complain("streams.csv", "stream " + streams.rows[i][cs] +
                                            " references unknown school " +
                                            std::to_string(school));
        }
    } catch (const Error& e) {
        complain("streams.csv", e.what());
    }
    try {
        auto teachers = csv::read_file(dir + "/teachers.csv");
        auto ct = teachers.col("teacher");
        auto cs = teachers.col("school");
        auto cm = teachers.col("market");
        for (std::size_t i = 0; i < teachers.nrow(); ++i) {
            teacher_ids.insert(need_int(teachers, i, ct, "teachers"));
            auto school = need_int(teachers, i, cs, "teachers");
            if (!school_ids.count(school))
                complain("teachers.csv", "teacher " + teachers.rows[i][ct] +
                                             " references unknown school " +
                                             std::to_string(school));
            auto market = need_int(teachers, i, cm, "teachers");
            if (market >= 0 && !market_ids.count(market))
                complain("teachers.csv", "teacher " + teachers.rows[i][ct] +
                                             " references unknown market " +
                                             std::to_string(market));
        }
    } catch (const Error& e) {
        complain("teachers.csv", e.what());
    }
    try {
        auto pupils = csv::read_file(dir + "/pupils.csv");
        auto cp = pupils.col("pupil");
        for (std::size_t i = 0; i < pupils.nrow(); ++i) {
            pupil_ids.insert(need_int(pupils, i, cp, "pupils"));
            for (int r = 0; r < 3; ++r) {
                auto col = pupils.col("stream_r" + std::to_string(r));
                auto stream = need_int(pupils, i, col, "pupils");
                if (stream >= 0 && !stream_ids.count(stream))
                    complain("pupils.csv", "pupil " + pupils.rows[i][cp] +
                                               " references unknown stream " +
                                               std::to_string(stream));
            }
        }
    } catch (const Error& e) {
        complain("pupils.csv", e.what());
    }
    if (fs::exists(dir + "/assessments.csv")) {
        try {
            auto rows = csv::read_file(dir + "/assessments.csv");
            auto cp = rows.col("pupil");
            auto cs = rows.col("stream");
            auto ct = rows.col("teacher");
            for (std::size_t i = 0; i < rows.nrow(); ++i) {
                auto pupil = need_int(rows, i, cp, "assessments");
                if (!pupil_ids.count(pupil))
                    complain("assessments.csv",
                             "row " + std::to_string(i) + " references unknown pupil " +
                                 std::to_string(pupil));
                auto stream = need_int(rows, i, cs, "assessments");
                if (!stream_ids.count(stream))
                    complain("assessments.csv",
                             "row " + std::to_string(i) + " references unknown stream " +
                                 std::to_string(stream));
                auto teacher = need_int(rows, i, ct, "assessments");
                if (teacher >= 0 && !teacher_ids.count(teacher) &&
                    !fs::exists(dir + "/replacements.csv"))
                    complain("assessments.csv",
                             "row " + std::to_string(i) + " references unknown teacher " +
                                 std::to_string(teacher));
            }
        } catch (const Error& e) {
            complain("assessments.csv", e.what());
        }
    }
    return out;
}

void load_panel_checked(const std::string& dir) {
    auto violations = validate_panel(dir);
    if (violations.empty()) return;
    std::string msg = "panel validation found " + std::to_string(violations.size()) +
                      " violation(s):";
    for (const auto& v : violations) msg += "\n  " + v.file + ": " + v.message;
    throw IntegrityError(msg);
}

} // namespace p4p::io
