// Greedy activation scheduler: each step transmit the Z sensors whose
// stage cost is currently the largest.
#pragma once

#include "fairsched/activation_mdp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fairsched {

/// Which holding time a sensor is priced at when ranking candidates.
enum class GreedyPricing {
    /// c_i(tau_i): the stage cost the sensor incurs in the current state
    /// (the decision then resets it for the next step).
    current_holding,
    /// c_i(tau_i + 1): the cost it would carry next step if skipped.
    next_holding,
};

struct GreedyConfig {
    std::size_t horizon = 10'000;
    /// Holding times before the first decision; empty means all zeros.
    HoldingState initial_tau;
    GreedyPricing pricing = GreedyPricing::current_holding;
    /// Ties go to the lowest sensor index (the only rule implemented).
    std::string tie_break = "lowest_index";
};

/// Lazily extended per-sensor stage costs for unbounded holding times.
class StageCostOracle {
public:
    StageCostOracle(const std::vector<SteadyStateCache>& caches, FairnessParam fp);

    std::size_t sensors() const { return caches_->size(); }
    double operator()(std::size_t sensor, std::uint32_t tau);

private:
    const std::vector<SteadyStateCache>* caches_;
    FairnessParam fp_;
    std::vector<std::vector<double>> table_;
};

ActionMask greedy_step(const HoldingState& tau_prev, StageCostOracle& costs, std::size_t Z,
                       GreedyPricing pricing = GreedyPricing::current_holding);
ActionMask greedy_step(const HoldingState& tau_prev, const std::vector<SteadyStateCache>& caches,
                       FairnessParam fp, std::size_t Z,
                       GreedyPricing pricing = GreedyPricing::current_holding);

struct GreedyResult {
    ScheduleSequence actions;           // decision taken in states[k]
    std::vector<HoldingState> states;   // holding times before each decision, plus final
    std::vector<double> stage_costs;    // c(states[k])
    std::optional<Period> period;
};

GreedyResult greedy_schedule(const std::vector<SteadyStateCache>& caches, FairnessParam fp,
                             std::size_t Z, const GreedyConfig& cfg = {});

}  // namespace fairsched
