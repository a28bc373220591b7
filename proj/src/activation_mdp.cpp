#include "fairsched/activation_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace fairsched {

ActionMask::ActionMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) {
        b = b ? 1 : 0;
    }
}

std::size_t ActionMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------

StateSpace::StateSpace(std::size_t sensors, std::uint32_t tau_max)
    : n_(sensors), tau_max_(tau_max), size_(1), stride_(sensors) {
    if (sensors == 0) {
        throw std::invalid_argument("StateSpace: need at least one sensor");
    }
    const std::size_t radix = static_cast<std::size_t>(tau_max) + 1;
    for (std::size_t i = 0; i < sensors; ++i) {
        stride_[i] = size_;
        if (size_ > std::numeric_limits<std::uint32_t>::max() / radix) {
            throw std::length_error("StateSpace: truncated state space too large");
        }
        size_ *= radix;
    }
}

std::size_t StateSpace::index(const HoldingState& phi) const {
    if (phi.size() != n_) {
        throw std::invalid_argument("StateSpace::index: dimension mismatch");
    }
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        idx += std::min(phi[i], tau_max_) * stride_[i];
    }
    return idx;
}

HoldingState StateSpace::state(std::size_t index) const {
    HoldingState phi(n_);
    const std::size_t radix = static_cast<std::size_t>(tau_max_) + 1;
    for (std::size_t i = 0; i < n_; ++i) {
        phi[i] = static_cast<std::uint32_t>(index % radix);
        index /= radix;
    }
    return phi;
}

// ---------------------------------------------------------------------------

double one_stage_cost(std::uint32_t tau, const SteadyStateCache& cache, FairnessParam fp) {
    const double t = static_cast<double>(tau);
    const double with = cache.trace_prefix_sum(tau + 1);
    double cost = (t + 1.0) * fair_cost(with / (t + 1.0), fp);
    if (tau > 0) {
        const double without = cache.trace_prefix_sum(tau);
        cost -= t * fair_cost(without / t, fp);
    }
    if (!std::isfinite(cost)) {
        throw NonFiniteError("one_stage_cost: non-finite cost for " + cache.model().label +
                             " at holding time " + std::to_string(tau));
    }
    return cost;
}

StageCostTable tabulate_stage_costs(const std::vector<SteadyStateCache>& caches,
                                    FairnessParam fp, std::uint32_t tau_max) {
    StageCostTable table;
    table.per_sensor.reserve(caches.size());
    for (const auto& cache : caches) {
        std::vector<double> row(static_cast<std::size_t>(tau_max) + 1);
        for (std::uint32_t tau = 0; tau <= tau_max; ++tau) {
            row[tau] = one_stage_cost(tau, cache, fp);
        }
        table.per_sensor.push_back(std::move(row));
    }
    return table;
}

std::vector<ActionMask> enumerate_actions(std::size_t N, std::size_t Z) {
    if (Z < 1) {
        throw std::invalid_argument("enumerate_actions: Z must be >= 1");
    }
    if (N == 0) {
        throw std::invalid_argument("enumerate_actions: N must be >= 1");
    }
    Z = std::min(Z, N);
    std::vector<ActionMask> out;
    for (std::size_t z = 0; z <= Z; ++z) {
        // index sets of size z in lexicographic order
        std::vector<std::size_t> pick(z);
        for (std::size_t i = 0; i < z; ++i) {
            pick[i] = i;
        }
        while (true) {
            std::vector<std::uint8_t> bits(N, 0);
            for (auto i : pick) {
                bits[i] = 1;
            }
            out.emplace_back(std::move(bits));
            // advance to the next combination
            std::size_t k = z;
            while (k > 0 && pick[k - 1] == N - z + (k - 1)) {
                --k;
            }
            if (k == 0) {
                break;
            }
            ++pick[k - 1];
            for (std::size_t j = k; j < z; ++j) {
                pick[j] = pick[j - 1] + 1;
            }
        }
    }
    return out;
}

HoldingState transition(const HoldingState& phi, const ActionMask& a, std::uint32_t tau_max) {
    if (phi.size() != a.size()) {
        throw std::invalid_argument("transition: dimension mismatch");
    }
    HoldingState next(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        next[i] = a[i] ? 0 : std::min(phi[i] + 1, tau_max);
    }
    return next;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kBlocked = std::numeric_limits<std::uint32_t>::max();

// successor[s * A + a] for the saturating transition, or kBlocked when a
// leaves a sensor at tau_max unserved while a slot could have taken it. A
// saturated sensor is overdue: letting it sit at tau_max would freeze its
// stage cost and make abandoning it look cheap.
std::vector<std::uint32_t> successor_table(const StateSpace& space,
                                           const std::vector<ActionMask>& actions) {
    const std::size_t n = space.sensors();
    const std::size_t na = actions.size();
    std::size_t slots = 0;
    for (const auto& a : actions) {
        slots = std::max(slots, a.count());
    }
    std::vector<std::uint32_t> succ(space.size() * na);
    std::vector<std::size_t> stride(n);
    {
        std::size_t s = 1;
        for (std::size_t i = 0; i < n; ++i) {
            stride[i] = s;
            s *= static_cast<std::size_t>(space.tau_max()) + 1;
        }
    }
    std::vector<std::vector<std::size_t>> members(na);
    for (std::size_t a = 0; a < na; ++a) {
        for (std::size_t i = 0; i < n; ++i) {
            if (actions[a][i]) {
                members[a].push_back(i);
            }
        }
    }
    std::vector<std::uint32_t> digit(n, 0);
    std::vector<std::size_t> contrib(n);
    for (std::size_t s = 0; s < space.size(); ++s) {
        std::size_t base = 0;
        for (std::size_t i = 0; i < n; ++i) {
            contrib[i] = std::min(digit[i] + 1, space.tau_max()) * stride[i];
            base += contrib[i];
        }
        std::size_t saturated = 0;
        for (std::size_t i = 0; i < n; ++i) {
            saturated += digit[i] == space.tau_max() ? 1 : 0;
        }
        const std::size_t owed = std::min(saturated, slots);
        for (std::size_t a = 0; a < na; ++a) {
            std::size_t next = base;
            std::size_t served = 0;
            for (auto i : members[a]) {
                next -= contrib[i];
                served += digit[i] == space.tau_max() ? 1 : 0;
            }
            succ[s * na + a] = served >= owed ? static_cast<std::uint32_t>(next) : kBlocked;
        }
        for (std::size_t i = 0; i < n; ++i) {  // odometer
            if (++digit[i] <= space.tau_max()) {
                break;
            }
            digit[i] = 0;
        }
    }
    return succ;
}

std::vector<double> state_costs(const StateSpace& space, const StageCostTable& costs) {
    const std::size_t n = space.sensors();
    std::vector<double> out(space.size());
    std::vector<std::uint32_t> digit(n, 0);
    for (std::size_t s = 0; s < space.size(); ++s) {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c += costs(i, digit[i]);
        }
        out[s] = c;
        for (std::size_t i = 0; i < n; ++i) {
            if (++digit[i] <= space.tau_max()) {
                break;
            }
            digit[i] = 0;
        }
    }
    return out;
}

}  // namespace

MdpSolution relative_value_iteration(const StageCostTable& costs, std::size_t Z,
                                     const MdpConfig& cfg) {
    const std::size_t n = costs.sensors();
    if (n == 0) {
        throw std::invalid_argument("relative_value_iteration: no sensors");
    }
    if (cfg.tau_max < 1 || !(cfg.tol_span > 0.0)) {
        throw std::invalid_argument("relative_value_iteration: invalid configuration");
    }
    if (!(cfg.relaxation > 0.0 && cfg.relaxation <= 1.0)) {
        throw std::invalid_argument("relative_value_iteration: relaxation must lie in (0, 1]");
    }
    for (const auto& row : costs.per_sensor) {
        if (row.size() < static_cast<std::size_t>(cfg.tau_max) + 1) {
            throw std::invalid_argument("relative_value_iteration: stage costs not tabulated to tau_max");
        }
    }
    if (static_cast<std::size_t>(cfg.tau_max) * std::min(Z, n) < n) {
        throw std::invalid_argument("relative_value_iteration: tau_max too small for a round-robin schedule");
    }

    StateSpace space(n, cfg.tau_max);
    const auto actions = enumerate_actions(n, Z);
    const std::size_t na = actions.size();
    const auto succ = successor_table(space, actions);
    const auto cost = state_costs(space, costs);
    const std::size_t ref = 0;  // all-zeros holding state
    const double theta = cfg.relaxation;

    std::vector<double> prev(space.size(), 0.0);
    std::vector<double> next(space.size(), 0.0);
    ValueTable table{space, {}, HoldingState(n, 0), 0.0, 0, 0.0, false};

    for (std::size_t sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        for (std::size_t s = 0; s < space.size(); ++s) {
            const std::uint32_t* row = &succ[s * na];
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < na; ++a) {
                if (row[a] != kBlocked) {
                    best = std::min(best, prev[row[a]]);
                }
            }
            next[s] = theta * (cost[s] + best) + (1.0 - theta) * prev[s];
        }
        const double offset = next[ref];
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t s = 0; s < space.size(); ++s) {
            next[s] -= offset;
            const double d = next[s] - prev[s];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        std::swap(prev, next);
        table.sweeps = sweep;
        table.last_span = hi - lo;
        // prev[ref] was zero, so the offset is theta times the gain estimate
        table.average_cost_estimate = offset / theta;
        if (!std::isfinite(table.last_span)) {
            throw NonFiniteError("relative_value_iteration: values diverged");
        }
        // relative to the gain so that large-q instances can still converge
        if (table.last_span <= cfg.tol_span * std::max(1.0, std::abs(table.average_cost_estimate))) {
            table.converged = true;
            break;
        }
    }
    table.values = prev;

    StagePolicy policy{space, actions, std::vector<std::uint16_t>(space.size(), 0)};
    for (std::size_t s = 0; s < space.size(); ++s) {
        const std::uint32_t* row = &succ[s * na];
        std::size_t arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < na; ++a) {
            if (row[a] == kBlocked) {
                continue;
            }
            const double v = prev[row[a]];
            if (!std::isfinite(best)) {
                best = v;
                arg = a;
                continue;
            }
            if (v < best - 1e-12 * (1.0 + std::abs(best))) {
                best = v;
                arg = a;
            }
        }
        policy.choice[s] = static_cast<std::uint16_t>(arg);
    }
    return {std::move(table), std::move(policy)};
}

MdpSolution relative_value_iteration(const std::vector<SteadyStateCache>& caches,
                                     FairnessParam fp, std::size_t Z, const MdpConfig& cfg) {
    return relative_value_iteration(tabulate_stage_costs(caches, fp, cfg.tau_max), Z, cfg);
}

Rollout rollout_policy(const StagePolicy& policy, const StageCostTable& costs,
                       const HoldingState& phi0, std::size_t horizon) {
    if (horizon == 0) {
        throw std::invalid_argument("rollout_policy: horizon must be >= 1");
    }
    Rollout out;
    out.actions.reserve(horizon);
    out.states.reserve(horizon + 1);
    out.stage_costs.reserve(horizon);
    out.running_average.reserve(horizon);
    HoldingState phi = phi0;
    for (auto& t : phi) {
        t = std::min(t, policy.space.tau_max());
    }
    double total = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
        double c = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            c += costs(i, phi[i]);
        }
        total += c;
        const ActionMask& a = policy.decide(phi);
        out.states.push_back(phi);
        out.actions.push_back(a);
        out.stage_costs.push_back(c);
        out.running_average.push_back(total / static_cast<double>(k + 1));
        phi = transition(phi, a, policy.space.tau_max());
    }
    out.states.push_back(phi);
    return out;
}

std::optional<Period> detect_period(const ScheduleSequence& seq) {
    const std::size_t len = seq.size();
    for (std::size_t L = 1; 2 * L <= len; ++L) {
        // last k with a_k != a_{k+L}
        std::size_t burn_in = 0;
        for (std::size_t k = len - L; k-- > 0;) {
            if (!(seq[k] == seq[k + L])) {
                burn_in = k + 1;
                break;
            }
        }
        // two full periods that also cover at least half of the record, so a
        // short coincidental run at the end is not mistaken for the cycle
        if (len - burn_in >= 2 * L && 2 * (len - burn_in) >= len) {
            return Period{burn_in, L};
        }
    }
    return std::nullopt;
}

void write_value_dump(std::ostream& os, const MdpSolution& sol) {
    const auto old = os.precision(17);
    const auto& space = sol.values.space;
    for (std::size_t s = 0; s < space.size(); ++s) {
        const auto phi = space.state(s);
        os << '(';
        for (std::size_t i = 0; i < phi.size(); ++i) {
            os << (i ? "," : "") << phi[i];
        }
        os << ") " << sol.values.values[s] << ' ';
        for (auto b : sol.policy.actions[sol.policy.choice[s]].bits()) {
            os << static_cast<int>(b);
        }
        os << '\n';
    }
    os.precision(old);
}

void write_schedule_csv(std::ostream& os, const ScheduleSequence& actions,
                        const std::vector<double>& stage_costs) {
    const std::size_t n = actions.empty() ? 0 : actions.front().size();
    os << 'k';
    for (std::size_t i = 0; i < n; ++i) {
        os << ",zeta_" << (i + 1);
    }
    os << ",cost\n";
    const auto old = os.precision(17);
    for (std::size_t k = 0; k < actions.size(); ++k) {
        os << k;
        for (auto b : actions[k].bits()) {
            os << ',' << static_cast<int>(b);
        }
        os << ',';
        if (k < stage_costs.size()) {
            os << stage_costs[k];
        }
        os << '\n';
    }
    os.precision(old);
}

}  // namespace fairsched
