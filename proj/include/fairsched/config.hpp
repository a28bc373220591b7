// Experiment configuration: JSON parsing with line-numbered diagnostics,
// validation and serialization.
#pragma once

#include "fairsched/activation_mdp.hpp"
#include "fairsched/greedy.hpp"
#include "fairsched/rate_solver.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairsched {

enum class ExperimentCase { rate, activation };
enum class Method { subgradient, mdp, greedy, all };

/// Raised for any malformed or invalid configuration. The message names
/// the offending field (as a JSON pointer) and, when known, its line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::vector<SystemModel> systems;
    ExperimentCase experiment_case = ExperimentCase::activation;
    std::vector<double> q_values;
    /// Subset of q_values singled out in the summary (marked with '*').
    std::vector<double> highlight_q;
    /// R_total for the rate case, Z for the activation case.
    double budget = 1.0;
    Method method = Method::all;
    SolverConfig solver;
    MdpConfig mdp;
    GreedyConfig greedy;
    std::size_t rollout_horizon = 10'000;
    std::uint64_t seed = 1;
    std::string output = "out";

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
    std::size_t activation_budget() const;

    bool operator==(const ExperimentConfig& other) const;
};

std::string to_string(ExperimentCase c);
std::string to_string(Method m);
ExperimentCase parse_case(const std::string& s);
Method parse_method(const std::string& s);

ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<string>");

/// JSON text that parse_config_text maps back to an equal config.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace fairsched
