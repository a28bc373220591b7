// Batch driver: runs every (method, q) cell of a configuration, writes the
// CSV artifacts and prints a summary table.
#pragma once

#include "fairsched/config.hpp"
#include "fairsched/harness.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace fairsched {

struct RunOptions {
    /// Also write the MDP value/policy dump as policy.txt.
    bool dump_policy = false;
};

struct SummaryRow {
    double q = 0.0;
    bool highlighted = false;
    CostReport report;
    /// MDP gain over g* (activation case, mdp rows only; NaN otherwise).
    double relaxed_ratio = 0.0;
    bool converged = true;
    std::string note;
};

struct ExperimentResult {
    std::vector<SummaryRow> rows;
    bool all_converged = true;
    std::string output_dir;
};

/// Writes out/{case}/{method}/q={value}/ artifacts and out/{case}/summary.csv.
/// Solver failures mark the cell as not converged; artifacts written so far
/// are kept.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

void print_summary(std::ostream& os, const ExperimentConfig& cfg, const ExperimentResult& result);

/// Shortest decimal text that reads back as the same double ("0.5", "20").
std::string format_q(double q);

}  // namespace fairsched
