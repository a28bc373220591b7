// Exact schedule evaluation, fairness metrics, optimality-gap bounds and the
// small-instance brute-force oracles.
#pragma once

#include "fairsched/activation_mdp.hpp"
#include "fairsched/rate_solver.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fairsched {

/// A transmission schedule. zeta_k resets the holding time at step k:
/// tau_k = 0 if sensor transmits at k, else tau_{k-1} + 1, with tau_{-1}
/// taken from initial_tau (zeros when empty).
struct Schedule {
    ScheduleSequence prefix;
    ScheduleSequence cycle;  // empty for an explicit (finite) schedule
    HoldingState initial_tau;
    std::optional<std::size_t> Z;

    static Schedule explicit_sequence(ScheduleSequence seq);
    static Schedule periodic(ScheduleSequence prefix, ScheduleSequence cycle);
    /// Split a recorded sequence at a detected period.
    static Schedule from_period(const ScheduleSequence& seq, const Period& period);

    bool is_periodic() const { return !cycle.empty(); }
    std::size_t sensors() const;
};

struct CostReport {
    std::string method;
    double q = 0.0;
    std::vector<double> per_sensor_J;
    double total_cost = 0.0;
    double q_objective = 0.0;
    double entropy_bits = 0.0;
    double gap_lower_bound = 0.0;       // NaN until gap_bounds runs
    double relative_performance = 0.0;  // NaN until gap_bounds runs
    bool diverged = false;              // some J_i is infinite
    std::optional<Period> period;
};

struct SegmentDecomposition {
    std::vector<std::size_t> starts;   // transmission times s_j
    std::vector<std::size_t> lengths;  // d_j
    std::vector<double> means;         // rho_j
};

/// Per-sensor long-run average traces: exact cycle averages for periodic
/// schedules, Cesaro averages for explicit ones.
CostReport evaluate_schedule(const Schedule& schedule, const std::vector<SteadyStateCache>& caches,
                             FairnessParam fp);

/// Shannon entropy (bits) of the normalized cost vector.
double entropy_measure(const std::vector<double>& per_sensor_J);

/// Realized traces Tr P_k for k = 0..T along an explicit schedule.
std::vector<std::vector<double>> realized_traces(const ScheduleSequence& seq,
                                                 const std::vector<SteadyStateCache>& caches,
                                                 std::size_t T, const HoldingState& initial_tau = {});

std::vector<SegmentDecomposition> decompose_segments(const ScheduleSequence& seq,
                                                     const std::vector<SteadyStateCache>& caches,
                                                     std::size_t T);

/// (1/(T+1)) sum_i sum_j d_j f_q(rho_j) over steps 0..T.
double segment_objective(const ScheduleSequence& seq, const std::vector<SteadyStateCache>& caches,
                         FairnessParam fp, std::size_t T);

/// sum_i f_q((1/(T+1)) sum_{k<=T} Tr P_k^i).
double time_average_objective(const ScheduleSequence& seq,
                              const std::vector<SteadyStateCache>& caches, FairnessParam fp,
                              std::size_t T);

struct GapBound {
    double g_star = 0.0;
    double ratio = 0.0;
};

/// g* = optimal rate-allocation value with R_total = Z; ratio = q_objective / g*.
GapBound gap_bounds(const CostReport& report, const std::vector<SteadyStateCache>& caches,
                    FairnessParam fp, std::size_t Z, const SolverConfig& cfg = {});
/// Same, reusing an already solved g*.
void attach_gap(CostReport& report, double g_star);

enum class CycleObjective {
    fairness,  // sum_i f_q(J_i)
    relaxed,   // cycle average of sum_i sum_segments d f_q(segment mean)
};

struct OracleResult {
    double value = 0.0;
    ScheduleSequence cycle;
};

/// Exhaustive search over cycles of feasible actions with period <= max_period
/// in which every sensor transmits. N <= 3, max_period <= 12.
OracleResult brute_force_periodic_oracle(const std::vector<SteadyStateCache>& caches,
                                         FairnessParam fp, std::size_t Z, std::size_t max_period,
                                         CycleObjective objective = CycleObjective::fairness);

/// Exact cycle value of one periodic action sequence (used by the oracle).
double cycle_value(const ScheduleSequence& cycle, const std::vector<SteadyStateCache>& caches,
                   FairnessParam fp, CycleObjective objective);

struct GridResult {
    double value = 0.0;
    Vector rates;
};

/// Exhaustive grid r_i = k * step within [r_lower_i, 1] with sum r <= R_total. N <= 3.
GridResult grid_search_rate_oracle(const std::vector<SteadyStateCache>& caches, FairnessParam fp,
                                   double R_total, double step, double epsilon = 1e-3);

/// Samples plant/sensor trajectories under a threshold policy and returns the
/// largest relative gap between the empirical squared error of the remote
/// estimate and Tr h^(tau_k)(P_bar) over k.
double monte_carlo_state_check(const SystemModel& sys, const ThresholdPolicy& policy,
                               std::size_t trials, std::size_t horizon, std::uint64_t seed);

/// method,q,J_1..J_N,total,entropy_bits,q_objective,g_star,ratio,period_M,period_L
void write_report_header(std::ostream& os, std::size_t sensors);
void write_report_row(std::ostream& os, const CostReport& report);

}  // namespace fairsched
