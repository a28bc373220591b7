#include "fairsched/greedy.hpp"

#include <stdexcept>

namespace fairsched {

StageCostOracle::StageCostOracle(const std::vector<SteadyStateCache>& caches, FairnessParam fp)
    : caches_(&caches), fp_(fp), table_(caches.size()) {}

double StageCostOracle::operator()(std::size_t sensor, std::uint32_t tau) {
    auto& row = table_.at(sensor);
    while (row.size() <= tau) {
        row.push_back(one_stage_cost(static_cast<std::uint32_t>(row.size()), (*caches_)[sensor], fp_));
    }
    return row[tau];
}

ActionMask greedy_step(const HoldingState& tau_prev, StageCostOracle& costs, std::size_t Z,
                       GreedyPricing pricing) {
    const std::size_t n = tau_prev.size();
    if (n != costs.sensors()) {
        throw std::invalid_argument("greedy_step: holding state has wrong dimension");
    }
    const std::uint32_t shift = pricing == GreedyPricing::next_holding ? 1 : 0;
    std::vector<double> price(n);
    for (std::size_t i = 0; i < n; ++i) {
        price[i] = costs(i, tau_prev[i] + shift);
    }
    std::vector<std::uint8_t> bits(n, 0);
    for (std::size_t z = 0; z < std::min(Z, n); ++z) {
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (bits[i]) {
                continue;
            }
            if (pick == n || price[i] > price[pick]) {
                pick = i;
            }
        }
        bits[pick] = 1;
    }
    return ActionMask(std::move(bits));
}

ActionMask greedy_step(const HoldingState& tau_prev, const std::vector<SteadyStateCache>& caches,
                       FairnessParam fp, std::size_t Z, GreedyPricing pricing) {
    StageCostOracle costs(caches, fp);
    return greedy_step(tau_prev, costs, Z, pricing);
}

GreedyResult greedy_schedule(const std::vector<SteadyStateCache>& caches, FairnessParam fp,
                             std::size_t Z, const GreedyConfig& cfg) {
    if (cfg.horizon == 0) {
        throw std::invalid_argument("greedy_schedule: horizon must be >= 1");
    }
    if (cfg.tie_break != "lowest_index") {
        throw std::invalid_argument("greedy_schedule: unknown tie-break rule '" + cfg.tie_break + "'");
    }
    const std::size_t n = caches.size();
    HoldingState tau = cfg.initial_tau.empty() ? HoldingState(n, 0) : cfg.initial_tau;
    if (tau.size() != n) {
        throw std::invalid_argument("greedy_schedule: initial holding state has wrong dimension");
    }
    StageCostOracle costs(caches, fp);
    GreedyResult out;
    out.actions.reserve(cfg.horizon);
    out.states.reserve(cfg.horizon + 1);
    out.stage_costs.reserve(cfg.horizon);
    for (std::size_t k = 0; k < cfg.horizon; ++k) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c += costs(i, tau[i]);
        }
        ActionMask a = greedy_step(tau, costs, Z, cfg.pricing);
        out.states.push_back(tau);
        out.stage_costs.push_back(c);
        for (std::size_t i = 0; i < n; ++i) {
            tau[i] = a[i] ? 0 : tau[i] + 1;
        }
        out.actions.push_back(std::move(a));
    }
    out.states.push_back(tau);
    out.period = detect_period(out.actions);
    return out;
}

}  // namespace fairsched
