// Activation-constrained scheduling as an average-cost MDP over holding
// times, solved by relative value iteration on a truncated state space.
#pragma once

#include "fairsched/estimation.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace fairsched {

/// Steps since each sensor last transmitted.
using HoldingState = std::vector<std::uint32_t>;

/// Transmission decisions for one time step.
class ActionMask {
public:
    ActionMask() = default;
    explicit ActionMask(std::vector<std::uint8_t> bits);

    std::size_t size() const { return bits_.size(); }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    std::size_t count() const;
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    bool operator==(const ActionMask&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

using ScheduleSequence = std::vector<ActionMask>;

struct MdpConfig {
    /// Holding times saturate here. A sensor sitting at tau_max must be
    /// served (as far as Z allows), so every policy pays its true costs and the
    /// gain only falls toward the untruncated optimum as tau_max grows.
    std::uint32_t tau_max = 12;
    /// Stop when span(V_{n+1} - V_n) <= tol_span * max(1, |gain estimate|).
    double tol_span = 1e-8;
    std::size_t max_sweeps = 100'000;
    /// Weight on the fresh Bellman backup; values below one mix in the
    /// previous iterate (aperiodicity transform). One reproduces the plain
    /// relative value iteration, which cycles on periodic optimal chains.
    double relaxation = 0.5;
};

/// Stage cost per sensor and holding time, tabulated for tau = 0..tau_max.
struct StageCostTable {
    std::vector<std::vector<double>> per_sensor;

    std::size_t sensors() const { return per_sensor.size(); }
    double operator()(std::size_t sensor, std::uint32_t tau) const {
        return per_sensor[sensor][tau];
    }
};

/// Dense mixed-radix indexing of {0..tau_max}^N.
class StateSpace {
public:
    StateSpace(std::size_t sensors, std::uint32_t tau_max);

    std::size_t sensors() const { return n_; }
    std::uint32_t tau_max() const { return tau_max_; }
    std::size_t size() const { return size_; }

    std::size_t index(const HoldingState& phi) const;
    HoldingState state(std::size_t index) const;

private:
    std::size_t n_;
    std::uint32_t tau_max_;
    std::size_t size_;
    std::vector<std::size_t> stride_;
};

struct ValueTable {
    StateSpace space;
    std::vector<double> values;
    HoldingState reference_state;
    double average_cost_estimate = 0.0;
    std::size_t sweeps = 0;
    double last_span = 0.0;
    bool converged = false;

    double value(const HoldingState& phi) const { return values[space.index(phi)]; }
};

struct StagePolicy {
    StateSpace space;
    std::vector<ActionMask> actions;    // canonical action list
    std::vector<std::uint16_t> choice;  // per state index into actions

    const ActionMask& decide(const HoldingState& phi) const {
        return actions[choice[space.index(phi)]];
    }
};

struct MdpSolution {
    ValueTable values;
    StagePolicy policy;
};

struct Rollout {
    ScheduleSequence actions;           // a_k taken in state phi_k
    std::vector<HoldingState> states;   // phi_0 .. phi_horizon
    std::vector<double> stage_costs;    // c(phi_k), k < horizon
    std::vector<double> running_average;
};

struct Period {
    std::size_t burn_in = 0;
    std::size_t length = 0;

    bool operator==(const Period&) const = default;
};

/// c_i(tau) = (tau+1) f_q(mean of traces 0..tau) - tau f_q(mean of traces 0..tau-1).
double one_stage_cost(std::uint32_t tau, const SteadyStateCache& cache, FairnessParam fp);

StageCostTable tabulate_stage_costs(const std::vector<SteadyStateCache>& caches,
                                    FairnessParam fp, std::uint32_t tau_max);

/// All masks with at most Z ones, by cardinality then lexicographic index set.
std::vector<ActionMask> enumerate_actions(std::size_t N, std::size_t Z);

HoldingState transition(const HoldingState& phi, const ActionMask& a, std::uint32_t tau_max);

MdpSolution relative_value_iteration(const std::vector<SteadyStateCache>& caches,
                                     FairnessParam fp, std::size_t Z, const MdpConfig& cfg = {});
MdpSolution relative_value_iteration(const StageCostTable& costs, std::size_t Z,
                                     const MdpConfig& cfg = {});

Rollout rollout_policy(const StagePolicy& policy, const StageCostTable& costs,
                       const HoldingState& phi0, std::size_t horizon);

/// Smallest period L (and for it the smallest burn-in M) such that
/// a_k == a_{k+L} for every recorded k >= M; the repeating tail must cover
/// at least two full periods and half of the sequence.
std::optional<Period> detect_period(const ScheduleSequence& seq);

/// "state tuple -> value, action" lines, one per state.
void write_value_dump(std::ostream& os, const MdpSolution& sol);

/// k, zeta_1..zeta_N, stage cost
void write_schedule_csv(std::ostream& os, const ScheduleSequence& actions,
                        const std::vector<double>& stage_costs);

}  // namespace fairsched
