// Command-line front end for the quasi-interpolation experiment harness.
//
// Subcommands mirror the experiment kinds: converge, harmonic, saturation,
// moments-check, deriv. Each takes a JSON config (--config), writes CSV, and
// prints a short summary. Exit codes: 0 all declared tolerances met,
// 1 tolerance failure, 2 configuration error.

#include <CLI11.hpp>
#include <iostream>

#include "hqi/experiments.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out;
    double tail_tol = 0.0;
    int threads = 1;
    std::uint64_t seed = 12345;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out, "override the config's output CSV path");
    cmd->add_option("--tail-tol", args.tail_tol, "override lattice-sum truncation tolerance");
    cmd->add_option("--threads", args.threads, "worker threads for grid evaluation")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", args.seed, "seed for randomized draws");
}

int run(const std::string& kind, const CommonArgs& args) {
    using namespace hqi::experiments;
    json spec = load_config(args.config_path);
    if (!spec.contains("kind")) {
        spec["kind"] = kind;
    } else if (spec.at("kind") != kind) {
        throw ConfigError("config kind '" + spec.at("kind").get<std::string>() +
                          "' does not match subcommand '" + kind + "'");
    }
    RunOptions opt;
    opt.out_override = args.out;
    opt.tail_tol_override = args.tail_tol;
    opt.threads = args.threads;
    opt.seed = args.seed;

    const ExperimentResult result = run_experiment(spec, opt);
    for (const auto& line : result.summary) std::cout << line << "\n";
    std::cout << "wrote " << result.out_path << "\n";
    return result.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"approximate Hermite quasi-interpolation experiments"};
    app.require_subcommand(1);

    const std::vector<std::string> kinds = {"converge", "harmonic", "saturation", "moments-check",
                                            "deriv"};
    std::map<std::string, CommonArgs> args;
    for (const auto& kind : kinds) {
        CLI::App* cmd = app.add_subcommand(kind, kind + " experiment");
        add_common(cmd, args[kind]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints the message or help text
        return code == 0 ? 0 : 2;      // bad arguments count as config errors
    }

    try {
        for (const auto& kind : kinds)
            if (app.get_subcommand(kind)->parsed()) return run(kind, args[kind]);
    } catch (const hqi::experiments::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
