#include "fairsched/harness.hpp"

#include "fairsched/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace fairsched {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Trace lookup that reports divergence as +inf instead of throwing.
double trace_or_inf(const SteadyStateCache& cache, std::size_t tau) {
    try {
        return cache.trace(tau);
    } catch (const NonFiniteError&) {
        return kInf;
    } catch (const std::out_of_range&) {
        return kInf;
    }
}

HoldingState initial_state(const HoldingState& given, std::size_t n) {
    if (given.empty()) {
        return HoldingState(n, 0);
    }
    if (given.size() != n) {
        throw std::invalid_argument("schedule: initial holding state has wrong dimension");
    }
    return given;
}

void check_masks(const ScheduleSequence& seq, std::size_t n, std::optional<std::size_t> Z) {
    for (const auto& a : seq) {
        if (a.size() != n) {
            throw std::invalid_argument("schedule: action mask has wrong dimension");
        }
        if (Z && a.count() > *Z) {
            throw std::invalid_argument("schedule: action exceeds the activation budget");
        }
    }
}

void fill_summary(CostReport& report, FairnessParam fp) {
    report.total_cost = 0.0;
    report.q_objective = 0.0;
    report.diverged = false;
    for (double J : report.per_sensor_J) {
        if (!std::isfinite(J)) {
            report.diverged = true;
        }
        report.total_cost += J;
        report.q_objective += std::isfinite(J) ? fair_cost(J, fp) : kInf;
    }
    report.entropy_bits = report.diverged ? kNaN : entropy_measure(report.per_sensor_J);
    report.gap_lower_bound = kNaN;
    report.relative_performance = kNaN;
}

// Steady-cycle holding times of one sensor; empty if it never transmits.
std::vector<std::size_t> cycle_holding(const ScheduleSequence& cycle, std::size_t sensor) {
    const std::size_t L = cycle.size();
    std::size_t last = L;
    for (std::size_t k = 0; k < L; ++k) {
        if (cycle[k][sensor]) {
            last = k;
        }
    }
    if (last == L) {
        return {};
    }
    std::vector<std::size_t> tau(L);
    std::size_t t = L - 1 - last;  // holding time at the end of the previous cycle
    for (std::size_t k = 0; k < L; ++k) {
        t = cycle[k][sensor] ? 0 : t + 1;
        tau[k] = t;
    }
    return tau;
}

}  // namespace

// ---------------------------------------------------------------------------

Schedule Schedule::explicit_sequence(ScheduleSequence seq) {
    Schedule s;
    s.prefix = std::move(seq);
    return s;
}

Schedule Schedule::periodic(ScheduleSequence prefix, ScheduleSequence cycle) {
    if (cycle.empty()) {
        throw std::invalid_argument("Schedule::periodic: cycle must be nonempty");
    }
    Schedule s;
    s.prefix = std::move(prefix);
    s.cycle = std::move(cycle);
    return s;
}

Schedule Schedule::from_period(const ScheduleSequence& seq, const Period& period) {
    if (period.length == 0 || period.burn_in + period.length > seq.size()) {
        throw std::invalid_argument("Schedule::from_period: period outside the sequence");
    }
    const auto begin = seq.begin() + static_cast<std::ptrdiff_t>(period.burn_in);
    return periodic(ScheduleSequence(seq.begin(), begin),
                    ScheduleSequence(begin, begin + static_cast<std::ptrdiff_t>(period.length)));
}

std::size_t Schedule::sensors() const {
    if (!cycle.empty()) {
        return cycle.front().size();
    }
    if (!prefix.empty()) {
        return prefix.front().size();
    }
    return initial_tau.size();
}

CostReport evaluate_schedule(const Schedule& schedule, const std::vector<SteadyStateCache>& caches,
                             FairnessParam fp) {
    const std::size_t n = caches.size();
    if (schedule.prefix.empty() && schedule.cycle.empty()) {
        throw std::invalid_argument("evaluate_schedule: empty schedule");
    }
    if (schedule.sensors() != n) {
        throw std::invalid_argument("evaluate_schedule: schedule and model count differ");
    }
    check_masks(schedule.prefix, n, schedule.Z);
    check_masks(schedule.cycle, n, schedule.Z);

    CostReport report;
    report.q = fp.q;
    report.per_sensor_J.assign(n, 0.0);
    if (schedule.is_periodic()) {
        const double L = static_cast<double>(schedule.cycle.size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto tau = cycle_holding(schedule.cycle, i);
            if (tau.empty()) {
                report.per_sensor_J[i] = caches[i].trace_limit();
                continue;
            }
            double acc = 0.0;
            for (auto t : tau) {
                acc += caches[i].trace(t);
            }
            report.per_sensor_J[i] = acc / L;
        }
    } else {
        const auto& seq = schedule.prefix;
        HoldingState tau = initial_state(schedule.initial_tau, n);
        std::vector<double> acc(n, 0.0);
        for (const auto& a : seq) {
            for (std::size_t i = 0; i < n; ++i) {
                tau[i] = a[i] ? 0 : tau[i] + 1;
                acc[i] += trace_or_inf(caches[i], tau[i]);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            report.per_sensor_J[i] = acc[i] / static_cast<double>(seq.size());
        }
    }
    fill_summary(report, fp);
    return report;
}

double entropy_measure(const std::vector<double>& per_sensor_J) {
    if (per_sensor_J.empty()) {
        throw std::invalid_argument("entropy_measure: empty cost vector");
    }
    double total = 0.0;
    for (double J : per_sensor_J) {
        if (!(J > 0.0) || !std::isfinite(J)) {
            throw std::invalid_argument("entropy_measure: costs must be positive and finite");
        }
        total += J;
    }
    double h = 0.0;
    for (double J : per_sensor_J) {
        const double p = J / total;
        h -= p * std::log2(p);
    }
    return std::max(0.0, h);
}

std::vector<std::vector<double>> realized_traces(const ScheduleSequence& seq,
                                                 const std::vector<SteadyStateCache>& caches,
                                                 std::size_t T, const HoldingState& initial_tau) {
    const std::size_t n = caches.size();
    if (seq.size() < T + 1) {
        throw std::invalid_argument("realized_traces: schedule shorter than horizon");
    }
    check_masks(seq, n, std::nullopt);
    HoldingState tau = initial_state(initial_tau, n);
    std::vector<std::vector<double>> out(n, std::vector<double>(T + 1));
    for (std::size_t k = 0; k <= T; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            tau[i] = seq[k][i] ? 0 : tau[i] + 1;
            out[i][k] = trace_or_inf(caches[i], tau[i]);
        }
    }
    return out;
}

std::vector<SegmentDecomposition> decompose_segments(const ScheduleSequence& seq,
                                                     const std::vector<SteadyStateCache>& caches,
                                                     std::size_t T) {
    const std::size_t n = caches.size();
    const auto traces = realized_traces(seq, caches, T);
    std::vector<SegmentDecomposition> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& seg = out[i];
        for (std::size_t k = 0; k <= T; ++k) {
            if (seq[k][i]) {
                seg.starts.push_back(k);
            }
        }
        if (seg.starts.empty()) {
            throw std::invalid_argument("decompose_segments: sensor " + std::to_string(i + 1) +
                                        " never transmits within the horizon");
        }
        for (std::size_t j = 0; j < seg.starts.size(); ++j) {
            const std::size_t s = seg.starts[j];
            const std::size_t d = j + 1 < seg.starts.size() ? seg.starts[j + 1] - s : T - s;
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                acc += traces[i][s + k];
            }
            seg.lengths.push_back(d);
            seg.means.push_back(d > 0 ? acc / static_cast<double>(d) : 0.0);
        }
    }
    return out;
}

double segment_objective(const ScheduleSequence& seq, const std::vector<SteadyStateCache>& caches,
                         FairnessParam fp, std::size_t T) {
    const auto segments = decompose_segments(seq, caches, T);
    double total = 0.0;
    for (const auto& seg : segments) {
        for (std::size_t j = 0; j < seg.lengths.size(); ++j) {
            if (seg.lengths[j] > 0) {
                total += static_cast<double>(seg.lengths[j]) * fair_cost(seg.means[j], fp);
            }
        }
    }
    return total / static_cast<double>(T + 1);
}

double time_average_objective(const ScheduleSequence& seq,
                              const std::vector<SteadyStateCache>& caches, FairnessParam fp,
                              std::size_t T) {
    const auto traces = realized_traces(seq, caches, T);
    double total = 0.0;
    for (const auto& row : traces) {
        double acc = 0.0;
        for (double v : row) {
            acc += v;
        }
        total += fair_cost(acc / static_cast<double>(T + 1), fp);
    }
    return total;
}

GapBound gap_bounds(const CostReport& report, const std::vector<SteadyStateCache>& caches,
                    FairnessParam fp, std::size_t Z, const SolverConfig& cfg) {
    const auto sol = solve_rate_allocation(caches, static_cast<double>(Z), fp, cfg);
    if (!sol.converged) {
        throw ConvergenceError("gap_bounds: rate solver did not converge");
    }
    return {sol.objective, report.q_objective / sol.objective};
}

void attach_gap(CostReport& report, double g_star) {
    report.gap_lower_bound = g_star;
    report.relative_performance = report.q_objective / g_star;
}

// ---------------------------------------------------------------------------

double cycle_value(const ScheduleSequence& cycle, const std::vector<SteadyStateCache>& caches,
                   FairnessParam fp, CycleObjective objective) {
    const std::size_t n = caches.size();
    const double L = static_cast<double>(cycle.size());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> sends;
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            if (cycle[k][i]) {
                sends.push_back(k);
            }
        }
        if (sends.empty()) {
            return kInf;
        }
        double sum_traces = 0.0;
        double relaxed = 0.0;
        for (std::size_t j = 0; j < sends.size(); ++j) {
            const std::size_t d = j + 1 < sends.size()
                                      ? sends[j + 1] - sends[j]
                                      : sends.front() + cycle.size() - sends[j];
            double seg = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                seg += caches[i].trace(t);
            }
            sum_traces += seg;
            relaxed += static_cast<double>(d) * fair_cost(seg / static_cast<double>(d), fp);
        }
        total += objective == CycleObjective::fairness ? fair_cost(sum_traces / L, fp)
                                                       : relaxed / L;
    }
    return total;
}

OracleResult brute_force_periodic_oracle(const std::vector<SteadyStateCache>& caches,
                                         FairnessParam fp, std::size_t Z, std::size_t max_period,
                                         CycleObjective objective) {
    const std::size_t n = caches.size();
    if (n == 0 || n > 3) {
        throw std::invalid_argument("brute_force_periodic_oracle: instance too large (N <= 3)");
    }
    if (max_period == 0 || max_period > 12) {
        throw std::invalid_argument("brute_force_periodic_oracle: max_period must lie in [1, 12]");
    }
    auto actions = enumerate_actions(n, Z);
    // Sending more never raises a cost; drop non-maximal masks when the full
    // enumeration would be too large.
    double total_cycles = 0.0;
    for (std::size_t L = 1; L <= max_period; ++L) {
        total_cycles += std::pow(static_cast<double>(actions.size()), static_cast<double>(L));
    }
    if (total_cycles > 2e7) {
        const std::size_t full = std::min(Z, n);
        std::erase_if(actions, [full](const ActionMask& a) { return a.count() != full; });
    }

    // Per-sensor segment tables: prefix sums of traces and d * f_q(mean).
    std::vector<std::vector<double>> prefix(n, std::vector<double>(max_period + 1, 0.0));
    std::vector<std::vector<double>> seg_cost(n, std::vector<double>(max_period + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 1; d <= max_period; ++d) {
            prefix[i][d] = prefix[i][d - 1] + caches[i].trace(d - 1);
            seg_cost[i][d] =
                static_cast<double>(d) * fair_cost(prefix[i][d] / static_cast<double>(d), fp);
        }
    }

    OracleResult best{kInf, {}};
    const std::size_t na = actions.size();
    std::vector<std::size_t> digits;
    std::vector<std::vector<std::uint8_t>> send(n);
    for (std::size_t L = 1; L <= max_period; ++L) {
        digits.assign(L, 0);
        while (true) {
            double value = 0.0;
            for (std::size_t i = 0; i < n && std::isfinite(value); ++i) {
                std::size_t first = L;
                std::size_t prev = L;
                double sum_traces = 0.0;
                double relaxed = 0.0;
                for (std::size_t k = 0; k < L; ++k) {
                    if (!actions[digits[k]][i]) {
                        continue;
                    }
                    if (prev == L) {
                        first = k;
                    } else {
                        sum_traces += prefix[i][k - prev];
                        relaxed += seg_cost[i][k - prev];
                    }
                    prev = k;
                }
                if (first == L) {
                    value = kInf;
                    break;
                }
                const std::size_t wrap = first + L - prev;
                sum_traces += prefix[i][wrap];
                relaxed += seg_cost[i][wrap];
                value += objective == CycleObjective::fairness
                             ? fair_cost(sum_traces / static_cast<double>(L), fp)
                             : relaxed / static_cast<double>(L);
            }
            const double bar =
                std::isfinite(best.value) ? best.value - 1e-12 * std::abs(best.value) : kInf;
            if (value < bar) {
                best.value = value;
                best.cycle.clear();
                for (auto d : digits) {
                    best.cycle.push_back(actions[d]);
                }
            }
            std::size_t pos = 0;
            while (pos < L && ++digits[pos] == na) {
                digits[pos++] = 0;
            }
            if (pos == L) {
                break;
            }
        }
    }
    return best;
}

GridResult grid_search_rate_oracle(const std::vector<SteadyStateCache>& caches, FairnessParam fp,
                                   double R_total, double step, double epsilon) {
    const std::size_t n = caches.size();
    if (!(step > 0.0)) {
        throw std::invalid_argument("grid_search_rate_oracle: step must be positive");
    }
    if (n == 0 || n > 3) {
        throw std::invalid_argument("grid_search_rate_oracle: N must lie in [1, 3]");
    }
    const ConstraintSystem con = build_constraints(caches, R_total, epsilon);
    const auto K = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
    const auto budget = static_cast<std::size_t>(std::floor(R_total / step + 1e-9));

    // f_q(J~_i(k * step)) for k = 1..K, +inf below the lower rate bound.
    std::vector<std::vector<double>> value(n, std::vector<double>(K + 1, kInf));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 1; k <= K; ++k) {
            const double r = static_cast<double>(k) * step;
            if (r + 1e-12 < con.r_lower[static_cast<Eigen::Index>(i)]) {
                continue;
            }
            value[i][k] = fair_cost(rate_cost(r, caches[i]), fp);
        }
    }

    GridResult best{kInf, Vector::Zero(static_cast<Eigen::Index>(n))};
    std::vector<std::size_t> pick(n, 1);
    auto record = [&](double v) {
        if (v < best.value) {
            best.value = v;
            for (std::size_t i = 0; i < n; ++i) {
                best.rates[static_cast<Eigen::Index>(i)] = static_cast<double>(pick[i]) * step;
            }
        }
    };
    const auto& v0 = value[0];
    for (std::size_t a = 1; a <= K && a <= budget; ++a) {
        pick[0] = a;
        if (n == 1) {
            record(v0[a]);
            continue;
        }
        const auto& v1 = value[1];
        for (std::size_t b = 1; b <= K && a + b <= budget; ++b) {
            pick[1] = b;
            if (n == 2) {
                record(v0[a] + v1[b]);
                continue;
            }
            const auto& v2 = value[2];
            const double partial = v0[a] + v1[b];
            for (std::size_t c = 1; c <= K && a + b + c <= budget; ++c) {
                if (partial + v2[c] < best.value) {
                    pick[2] = c;
                    record(partial + v2[c]);
                }
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

namespace {

class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

    double standard() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = rng_.uniform();
        while (u1 <= 0.0) {
            u1 = rng_.uniform();
        }
        const double u2 = rng_.uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    Vector draw(const Matrix& sqrt_cov) {
        Vector z(sqrt_cov.cols());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            z[i] = standard();
        }
        return sqrt_cov * z;
    }

private:
    SplitMix64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Symmetric square root of a PSD matrix (tolerates singular covariances).
Matrix psd_sqrt(const Matrix& X) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(X));
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double monte_carlo_state_check(const SystemModel& sys, const ThresholdPolicy& policy,
                               std::size_t trials, std::size_t horizon, std::uint64_t seed) {
    if (trials < 1000) {
        throw std::invalid_argument("monte_carlo_state_check: need at least 1000 trials");
    }
    if (horizon == 0) {
        throw std::invalid_argument("monte_carlo_state_check: horizon must be >= 1");
    }
    const SteadyStateCache cache = steady_state(sys);
    const Matrix& P = cache.p_bar();
    const Matrix predicted = lyapunov_step(P, sys);
    const Matrix innovation = symmetrize(sys.C * predicted * sys.C.transpose() + sys.R);
    const Matrix gain = innovation.ldlt().solve(sys.C * predicted).transpose();

    const auto zeta = realize_threshold_schedule(policy, horizon, stream_seed(seed, 0));
    std::vector<std::size_t> tau(horizon + 1, 0);
    for (std::size_t k = 1; k <= horizon; ++k) {
        tau[k] = zeta[k - 1] ? 0 : tau[k - 1] + 1;
    }

    const Matrix sqrt_p = psd_sqrt(P);
    const Matrix sqrt_q = psd_sqrt(sys.Q);
    const Matrix sqrt_r = psd_sqrt(sys.R);
    GaussianSampler gauss(stream_seed(seed, 1));
    std::vector<double> sq_error(horizon + 1, 0.0);

    for (std::size_t trial = 0; trial < trials; ++trial) {
        // At k = 0 the local filter is at steady state and was just sent.
        Vector local = Vector::Zero(sys.A.rows());
        Vector x = gauss.draw(sqrt_p);
        Vector remote = local;
        sq_error[0] += (x - remote).squaredNorm();
        for (std::size_t k = 1; k <= horizon; ++k) {
            x = sys.A * x + gauss.draw(sqrt_q);
            const Vector y = sys.C * x + gauss.draw(sqrt_r);
            const Vector prior = sys.A * local;
            local = prior + gain * (y - sys.C * prior);
            remote = zeta[k - 1] ? local : Vector(sys.A * remote);
            sq_error[k] += (x - remote).squaredNorm();
        }
    }

    double worst = 0.0;
    for (std::size_t k = 0; k <= horizon; ++k) {
        const double empirical = sq_error[k] / static_cast<double>(trials);
        const double expected = cache.trace(tau[k]);
        const double dev = expected > 1e-12 ? std::abs(empirical - expected) / expected
                                            : std::abs(empirical - expected);
        worst = std::max(worst, dev);
    }
    return worst;
}

// ---------------------------------------------------------------------------

void write_report_header(std::ostream& os, std::size_t sensors) {
    os << "method,q";
    for (std::size_t i = 0; i < sensors; ++i) {
        os << ",J_" << (i + 1);
    }
    os << ",total,entropy_bits,q_objective,g_star,ratio,period_M,period_L\n";
}

void write_report_row(std::ostream& os, const CostReport& report) {
    const auto old = os.precision(17);
    os << report.method << ',' << report.q;
    for (double J : report.per_sensor_J) {
        os << ',' << J;
    }
    os << ',' << report.total_cost << ',' << report.entropy_bits << ',' << report.q_objective << ','
       << report.gap_lower_bound << ',' << report.relative_performance << ',';
    if (report.period) {
        os << report.period->burn_in << ',' << report.period->length;
    } else {
        os << ',';
    }
    os << '\n';
    os.precision(old);
}

}  // namespace fairsched
