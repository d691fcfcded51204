// Command-line front end: each subcommand runs one pipeline stage (or the
// whole configured pipeline) against a JSON config.
//
// Exit codes: 0 ok, 2 validation failure, 3 numerical failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "p4p/config.hpp"
#include "p4p/errors.hpp"
#include "p4p/pipeline.hpp"
#include "p4p/worldio.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string stages;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON run configuration");
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "master seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--stages", args.stages,
                    "comma-separated stage list (run subcommand only)");
}

p4p::cfg::RunConfig resolve_config(const CommonArgs& args) {
    p4p::cfg::RunConfig config;
    if (!args.config_path.empty()) config = p4p::cfg::load_config(args.config_path);
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    if (args.seed_set) config.seed = args.seed;
    if (!args.stages.empty()) {
        config.stages.clear();
        std::size_t start = 0;
        while (start <= args.stages.size()) {
            std::size_t end = args.stages.find(',', start);
            if (end == std::string::npos) end = args.stages.size();
            if (end > start) config.stages.push_back(args.stages.substr(start, end - start));
            start = end + 1;
        }
    }
    return config;
}

int run_stages(const p4p::cfg::RunConfig& config, const std::vector<std::string>& stages) {
    p4p::cfg::RunConfig c = config;
    c.stages = stages;
    auto bundle = p4p::pipe::run_pipeline(c);
    for (const auto& s : bundle.stages) {
        std::printf("[%s] %zu output file(s)\n", s.stage.c_str(), s.outputs.size());
        for (const auto& [file, digest] : s.outputs)
            std::printf("  %-28s sha256:%s\n", file.c_str(), digest.substr(0, 16).c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pay-for-percentile tournament scoring and inference toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string validate_dir;

    auto* run = app.add_subcommand("run", "run the configured pipeline stages");
    add_common(run, args);
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic two-tier experiment");
    add_common(simulate, args);
    auto* score_irt = app.add_subcommand("score-irt", "fit 2PL models and produce EAP scores");
    add_common(score_irt, args);
    auto* score_bn =
        app.add_subcommand("score-bn", "compute percentile-tournament learning scores");
    add_common(score_bn, args);
    auto* award = app.add_subcommand("award", "build composite metrics and select awards");
    add_common(award, args);
    auto* infer = app.add_subcommand("infer", "randomization inference for hypotheses I-VI");
    add_common(infer, args);
    auto* tva = app.add_subcommand("tva", "teacher value-added estimation");
    add_common(tva, args);
    auto* power = app.add_subcommand("power", "power simulation harness");
    add_common(power, args);
    auto* validate = app.add_subcommand("validate", "check an exported panel directory");
    validate->add_option("dir", validate_dir, "panel directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            auto violations = p4p::io::validate_panel(validate_dir);
            if (violations.empty()) {
                std::printf("ok: %s passes referential checks\n", validate_dir.c_str());
                return 0;
            }
            for (const auto& v : violations)
                std::fprintf(stderr, "%s: %s\n", v.file.c_str(), v.message.c_str());
            return 2;
        }
        auto config = resolve_config(args);
        if (run->parsed()) return run_stages(config, config.stages);

        // single-stage subcommands always need the world first
        std::vector<std::string> stages;
        std::string wanted = app.get_subcommands().front()->get_name();
        if (wanted != "simulate" && wanted != "power") stages.push_back("simulate");
        if (wanted == "award" || wanted == "infer") {
            if (std::find(stages.begin(), stages.end(), "score-bn") == stages.end())
                stages.push_back("score-bn");
        }
        if (wanted == "infer") stages.push_back("award");
        stages.push_back(wanted);
        return run_stages(config, stages);
    } catch (const p4p::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const p4p::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const p4p::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 3;
    }
}
