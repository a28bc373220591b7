#include "fairsched/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace fairsched {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    return out;
}

void write_single_report(const fs::path& dir, const CostReport& report, std::size_t n) {
    auto out = open_out(dir / "report.csv");
    write_report_header(out, n);
    write_report_row(out, report);
}

void write_rates_csv(const fs::path& path, const RateSolution& sol,
                     const std::vector<SteadyStateCache>& caches) {
    auto out = open_out(path);
    out << "sensor,label,rate,eta,p,cost\n";
    out.precision(17);
    for (std::size_t i = 0; i < caches.size(); ++i) {
        const double r = sol.rates[static_cast<Eigen::Index>(i)];
        const ThresholdPolicy pol = threshold_from_rate(r);
        out << (i + 1) << ',' << caches[i].model().label << ',' << r << ',' << pol.eta << ','
            << pol.p << ',' << rate_cost(r, caches[i]) << '\n';
    }
}

CostReport report_from_rates(const RateSolution& sol, const std::vector<SteadyStateCache>& caches,
                             FairnessParam fp) {
    CostReport rep;
    rep.method = "subgradient";
    rep.q = fp.q;
    for (std::size_t i = 0; i < caches.size(); ++i) {
        rep.per_sensor_J.push_back(rate_cost(sol.rates[static_cast<Eigen::Index>(i)], caches[i]));
        rep.total_cost += rep.per_sensor_J.back();
    }
    rep.q_objective = sol.objective;
    rep.entropy_bits = entropy_measure(rep.per_sensor_J);
    attach_gap(rep, sol.objective);
    return rep;
}

SummaryRow failed_row(const std::string& method, double q, const std::string& why) {
    SummaryRow row;
    row.q = q;
    row.report.method = method;
    row.report.q = q;
    row.report.total_cost = kNaN;
    row.report.entropy_bits = kNaN;
    row.report.q_objective = kNaN;
    row.report.gap_lower_bound = kNaN;
    row.report.relative_performance = kNaN;
    row.relaxed_ratio = kNaN;
    row.converged = false;
    row.note = why;
    return row;
}

SummaryRow run_subgradient(const ExperimentConfig& cfg, const std::vector<SteadyStateCache>& caches,
                           FairnessParam fp, const RateSolution& sol, const fs::path& dir) {
    {
        auto out = open_out(dir / "trace.csv");
        write_trace_csv(out, sol.trace);
    }
    write_rates_csv(dir / "rates.csv", sol, caches);
    SummaryRow row;
    row.q = fp.q;
    row.report = report_from_rates(sol, caches, fp);
    row.relaxed_ratio = kNaN;
    write_single_report(dir, row.report, cfg.systems.size());
    row.converged = sol.converged;
    if (!sol.converged) {
        row.note = "rate solver did not converge";
    }
    return row;
}

SummaryRow finish_schedule(const std::string& method, const ScheduleSequence& actions,
                           const std::vector<double>& stage_costs,
                           const std::vector<SteadyStateCache>& caches, FairnessParam fp,
                           double g_star, const fs::path& dir, std::size_t n) {
    {
        auto out = open_out(dir / "schedule.csv");
        write_schedule_csv(out, actions, stage_costs);
    }
    SummaryRow row;
    row.q = fp.q;
    const auto period = detect_period(actions);
    const Schedule schedule =
        period ? Schedule::from_period(actions, *period) : Schedule::explicit_sequence(actions);
    row.report = evaluate_schedule(schedule, caches, fp);
    row.report.method = method;
    row.report.period = period;
    attach_gap(row.report, g_star);
    row.relaxed_ratio = kNaN;
    write_single_report(dir, row.report, n);
    if (!period) {
        row.converged = false;
        row.note = "no period detected within the horizon";
    }
    return row;
}

}  // namespace

std::string format_q(double q) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), q);
    return std::string(buf, res.ptr);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    const auto caches = build_caches(cfg.systems);
    const std::size_t n = cfg.systems.size();
    const bool activation = cfg.experiment_case == ExperimentCase::activation;
    const fs::path case_dir = fs::path(cfg.output) / to_string(cfg.experiment_case);

    std::vector<Method> methods;
    if (cfg.method == Method::all) {
        methods = activation ? std::vector<Method>{Method::mdp, Method::greedy}
                             : std::vector<Method>{Method::subgradient};
    } else {
        methods = {cfg.method};
    }

    ExperimentResult result;
    result.output_dir = case_dir.string();
    for (double q : cfg.q_values) {
        const FairnessParam fp(q);
        const std::string qdir = "q=" + format_q(q);
        const bool highlighted =
            std::find(cfg.highlight_q.begin(), cfg.highlight_q.end(), q) != cfg.highlight_q.end();

        // The rate allocation at the configured budget: the answer in the
        // rate case and the lower bound g* (R = Z) in the activation case.
        RateSolution sol;
        std::string sol_error;
        try {
            sol = solve_rate_allocation(caches, cfg.budget, fp, cfg.solver);
        } catch (const std::exception& e) {
            sol_error = e.what();
        }
        const double g_star = sol_error.empty() && sol.converged ? sol.objective : kNaN;

        for (Method m : methods) {
            const std::string name = to_string(m);
            const fs::path dir = case_dir / name / qdir;
            SummaryRow row;
            try {
                if (m == Method::subgradient) {
                    if (!sol_error.empty()) {
                        throw std::runtime_error(sol_error);
                    }
                    row = run_subgradient(cfg, caches, fp, sol, dir);
                } else if (m == Method::mdp) {
                    const std::size_t Z = cfg.activation_budget();
                    const auto mdp = relative_value_iteration(caches, fp, Z, cfg.mdp);
                    const auto costs = tabulate_stage_costs(caches, fp, cfg.mdp.tau_max);
                    const auto ro =
                        rollout_policy(mdp.policy, costs, HoldingState(n, 0), cfg.rollout_horizon);
                    row = finish_schedule(name, ro.actions, ro.stage_costs, caches, fp, g_star, dir,
                                          n);
                    row.relaxed_ratio = mdp.values.average_cost_estimate / g_star;
                    if (opts.dump_policy) {
                        auto out = open_out(dir / "policy.txt");
                        write_value_dump(out, mdp);
                    }
                    if (!mdp.values.converged) {
                        row.converged = false;
                        row.note = "value iteration did not converge";
                    }
                } else {
                    GreedyConfig gcfg = cfg.greedy;
                    const auto gr = greedy_schedule(caches, fp, cfg.activation_budget(), gcfg);
                    row = finish_schedule(name, gr.actions, gr.stage_costs, caches, fp, g_star,
                                          dir, n);
                }
                if (activation && std::isnan(g_star) && row.converged) {
                    row.converged = false;
                    row.note = "lower bound unavailable: " +
                               (sol_error.empty() ? std::string("rate solver did not converge")
                                                  : sol_error);
                }
            } catch (const std::exception& e) {
                row = failed_row(name, q, e.what());
            }
            row.highlighted = highlighted;
            result.all_converged = result.all_converged && row.converged;
            result.rows.push_back(std::move(row));
        }
    }

    auto out = open_out(case_dir / "summary.csv");
    out << "method,q,total,entropy_bits,q_objective,g_star,ratio,relaxed_ratio,period_M,period_L,"
           "converged\n";
    out.precision(17);
    for (const auto& row : result.rows) {
        const auto& r = row.report;
        out << r.method << ',' << format_q(row.q) << ',' << r.total_cost << ',' << r.entropy_bits
            << ',' << r.q_objective << ',' << r.gap_lower_bound << ',' << r.relative_performance
            << ',' << row.relaxed_ratio << ',';
        if (r.period) {
            out << r.period->burn_in << ',' << r.period->length;
        } else {
            out << ',';
        }
        out << ',' << (row.converged ? 1 : 0) << '\n';
    }
    return result;
}

void print_summary(std::ostream& os, const ExperimentConfig& cfg, const ExperimentResult& result) {
    const bool activation = cfg.experiment_case == ExperimentCase::activation;
    os << "case " << to_string(cfg.experiment_case) << ", " << cfg.systems.size() << " sensors, "
       << (activation ? "Z = " : "R = ") << format_q(cfg.budget) << "\n";
    os << std::left << std::setw(8) << "q" << std::setw(13) << "method" << std::right
       << std::setw(12) << "total" << std::setw(10) << "entropy" << std::setw(14) << "q_objective"
       << std::setw(14) << "g*" << std::setw(10) << "relative" << std::setw(10) << "period"
       << "\n";
    for (const auto& row : result.rows) {
        const auto& r = row.report;
        std::ostringstream period;
        if (r.period) {
            period << r.period->burn_in << '+' << r.period->length;
        } else {
            period << '-';
        }
        os << std::left << std::setw(8) << (format_q(row.q) + (row.highlighted ? "*" : ""))
           << std::setw(13) << r.method << std::right << std::fixed << std::setprecision(3)
           << std::setw(12) << r.total_cost << std::setw(10) << r.entropy_bits
           << std::defaultfloat << std::setprecision(6) << std::setw(14) << r.q_objective
           << std::setw(14) << r.gap_lower_bound << std::fixed << std::setprecision(3)
           << std::setw(10) << r.relative_performance << std::setw(10) << period.str()
           << std::defaultfloat;
        if (!row.converged) {
            os << "  [" << row.note << "]";
        }
        os << "\n";
    }
    if (!cfg.highlight_q.empty()) {
        os << "(* marks the highlighted q values; period is burn-in + cycle length)\n";
    }
}

}  // namespace fairsched
