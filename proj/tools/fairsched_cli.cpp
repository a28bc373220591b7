// Command-line driver. Flags override values from the configuration file.
#include "fairsched/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace fairsched;

    CLI::App app{"Fair sensor scheduling experiments"};
    std::string config_path;
    std::string case_name;
    std::string method_name;
    std::vector<double> q_values;
    std::uint64_t seed = 0;
    std::uint32_t tau_max = 0;
    std::size_t max_iter = 0;
    std::string out_dir;
    bool dump_policy = false;
    bool print_config = false;

    app.add_option("--config", config_path, "JSON experiment configuration")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--case", case_name, "rate or activation (overrides 'case')");
    app.add_option("--method", method_name, "subgradient, mdp, greedy or all");
    app.add_option("--q", q_values, "fairness parameter; repeat to sweep (replaces 'q_values')")
        ->check(CLI::NonNegativeNumber);
    auto* seed_opt = app.add_option("--seed", seed, "random seed");
    app.add_option("--tau-max", tau_max, "MDP holding-time truncation")->check(CLI::Range(1, 255));
    app.add_option("--max-iter", max_iter, "rate solver iteration cap")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output directory (overrides 'output')");
    app.add_flag("--dump-policy", dump_policy, "write the MDP value/policy table");
    app.add_flag("--print-config", print_config, "print the effective configuration and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    ExperimentConfig cfg;
    try {
        cfg = parse_config(config_path);
        if (!case_name.empty()) {
            // the numeric budget carries over: R_total becomes Z and vice versa
            cfg.experiment_case = parse_case(case_name);
            if (cfg.experiment_case == ExperimentCase::rate &&
                (cfg.method == Method::mdp || cfg.method == Method::greedy)) {
                cfg.method = Method::all;
            }
        }
        if (!method_name.empty()) cfg.method = parse_method(method_name);
        if (!q_values.empty()) cfg.q_values = q_values;
        if (*seed_opt) {
            cfg.seed = seed;
            cfg.solver.seed = seed;
        }
        if (tau_max > 0) cfg.mdp.tau_max = tau_max;
        if (max_iter > 0) cfg.solver.max_iter = max_iter;
        if (!out_dir.empty()) cfg.output = out_dir;
        cfg.validate();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    if (print_config) {
        std::cout << serialize_config(cfg);
        return 0;
    }

    try {
        RunOptions opts;
        opts.dump_policy = dump_policy;
        const ExperimentResult result = run_experiment(cfg, opts);
        print_summary(std::cout, cfg, result);
        std::cout << "artifacts in " << result.output_dir << "\n";
        return result.all_converged ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
