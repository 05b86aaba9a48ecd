// pcalab: batch front end for the experiment runner.
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pcalab/runner/config.hpp"
#include "pcalab/runner/runner.hpp"

using namespace pcalab::runner;

namespace {

const char* type_label(ParamType t) {
    switch (t) {
        case ParamType::Number: return "number";
        case ParamType::Integer: return "integer";
        case ParamType::Bool: return "bool";
        case ParamType::String: return "string";
        case ParamType::NumberList: return "[number]";
        case ParamType::IntegerList: return "[integer]";
    }
    return "?";
}

int report(const RunOutcome& r) {
    if (r.exit_code == kExitOk) {
        std::printf("%s", r.status.c_str());
        if (!r.message.empty()) std::printf(": %s", r.message.c_str());
        std::printf("\n");
        for (const auto& f : r.outputs) std::printf("  %s\n", f.c_str());
    } else {
        std::fprintf(stderr, "pcalab: %s (exit %d): %s\n", r.status.c_str(), r.exit_code, r.message.c_str());
        for (const auto& f : r.outputs) std::fprintf(stderr, "  partial: %s\n", f.c_str());
    }
    return r.exit_code;
}

void list_experiments(bool verbose) {
    for (auto e : all_experiments()) {
        std::printf("%-16s %s%s\n", std::string(experiment_name(e)).c_str(), std::string(experiment_summary(e)).c_str(),
                    is_resumable(e) ? " [resumable]" : "");
        if (!verbose) continue;
        for (const auto& p : param_specs(e)) {
            std::printf("    %-18s %-10s %s", p.name.c_str(), type_label(p.type),
                        p.fallback.is_null() ? "(required)" : ("= " + p.fallback.dump()).c_str());
            if (!p.help.empty()) std::printf("  # %s", p.help.c_str());
            std::printf("\n");
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pcalab: noisy cellular automata and small Markov chains"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::string config_path, checkpoint_path;
    std::uint64_t stop_after = 0;
    bool verbose = false;

    auto* run_cmd = app.add_subcommand("run", "run the experiment described by a config file");
    run_cmd->add_option("config", config_path, "experiment config (JSON)")->required();
    run_cmd->add_option("--stop-after", stop_after, "stop at the first checkpoint past N trajectories");

    auto* resume_cmd = app.add_subcommand("resume", "continue an interrupted Monte Carlo run");
    resume_cmd->add_option("checkpoint", checkpoint_path, "checkpoint.bin of the run")->required();
    resume_cmd->add_option("--stop-after", stop_after, "stop again at the first checkpoint past N trajectories");

    auto* validate_cmd = app.add_subcommand("validate", "check a config file against the schema");
    validate_cmd->add_option("config", config_path, "experiment config (JSON)")->required();

    auto* list_cmd = app.add_subcommand("list-experiments", "list experiment kinds");
    list_cmd->add_flag("-v,--verbose", verbose, "show parameters and defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitSchema;
    }

    RunOptions opts;
    if (stop_after > 0) opts.stop_after = stop_after;

    if (*run_cmd) return report(run_file(config_path, opts));
    if (*resume_cmd) return report(resume(checkpoint_path, opts));
    if (*validate_cmd) {
        try {
            const auto cfg = load_config(config_path);
            std::printf("%s\n", cfg.to_json().dump(2).c_str());
            std::printf("config_hash %s\n", hex64(cfg.hash()).c_str());
            return kExitOk;
        } catch (const SchemaError& e) {
            std::fprintf(stderr, "pcalab: invalid config: %s\n", e.what());
            return kExitSchema;
        }
    }
    list_experiments(verbose);
    return kExitOk;
}
