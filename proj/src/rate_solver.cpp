#include "fairsched/rate_solver.hpp"

#include "fairsched/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace fairsched {

namespace {

// Stable sensors may sit at a zero lower bound; the cost is evaluated at
// this floor instead, where it already equals the open-loop limit.
constexpr double kMinEvalRate = 1e-9;

std::size_t floor_inverse(double r) {
    return static_cast<std::size_t>(std::floor(1.0 / r + kFloorGuard));
}

void require_rate(double r, const char* who) {
    if (!(r > 0.0) || r > 1.0 + kFloorGuard) {
        throw std::invalid_argument(std::string(who) + ": rate must lie in (0, 1]");
    }
}

Vector positive_part(const Vector& v) { return v.cwiseMax(0.0); }

// Subgradient of the rescaled objective ||J~(r)||_{1+q} / scale, which has
// the same minimizers as g and the same sign pattern as kappa.
Vector scaled_subgradient(const Vector& r, const std::vector<SteadyStateCache>& caches,
                          FairnessParam fp) {
    const auto n = static_cast<Eigen::Index>(caches.size());
    Vector costs(n);
    Vector slopes(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        costs[i] = rate_cost(r[i], caches[static_cast<std::size_t>(i)]);
        slopes[i] = rate_cost_slope(r[i], caches[static_cast<std::size_t>(i)]);
    }
    if (fp.q == 0.0) {
        return slopes;
    }
    const double top = costs.maxCoeff();
    // ||J||_{1+q} computed relative to the largest entry to avoid overflow
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        acc += std::pow(costs[i] / top, 1.0 + fp.q);
    }
    const double norm = top * std::pow(acc, 1.0 / (1.0 + fp.q));
    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out[i] = std::pow(costs[i] / norm, fp.q) * slopes[i];
    }
    return out;
}

Vector clamp_box(const Vector& r, const ConstraintSystem& con) {
    Vector out = r;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double lo = std::max(con.r_lower[i], kMinEvalRate);
        out[i] = std::clamp(out[i], lo, 1.0);
    }
    return out;
}

PrimalDualState step_with(const Vector& r, const Vector& nu, std::size_t t,
                          const SolverConfig& cfg, const ConstraintSystem& con,
                          const Vector& grad) {
    const Vector slack = con.A_con * r - con.b_con;
    const Vector primal = grad + con.A_con.transpose() * nu +
                          cfg.alpha * con.A_con.transpose() * positive_part(slack);
    const Vector dual = -slack;  // b - A r
    const double norm = std::hypot(primal.stableNorm(), dual.stableNorm());
    if (!(norm > 0.0)) {
        return {r, nu, 0.0};
    }
    if (!std::isfinite(norm)) {
        throw NonFiniteError("primal_dual_step: non-finite update direction");
    }
    const double gamma = cfg.gamma0 / static_cast<double>(t);
    const double w = gamma / norm;
    Vector r_next = clamp_box(r - w * primal, con);
    Vector nu_next = positive_part(nu - w * dual);
    return {std::move(r_next), std::move(nu_next), w};
}

// Shrinks the part of r above the lower bounds until the budget row holds.
Vector budget_projection(const Vector& r, const ConstraintSystem& con) {
    const double total = r.sum();
    if (total <= con.R_total) {
        return r;
    }
    const Vector lo = con.r_lower.cwiseMax(kMinEvalRate);
    const double room = con.R_total - lo.sum();
    const double excess = total - lo.sum();
    if (!(room > 0.0) || !(excess > 0.0)) {
        return r;
    }
    return lo + (r - lo) * (room / excess);
}

}  // namespace

double ConstraintSystem::violation(const Vector& r) const {
    return positive_part(A_con * r - b_con).norm();
}

double rate_cost(double r, const SteadyStateCache& cache) {
    require_rate(r, "rate_cost");
    r = std::min(r, 1.0);
    const std::size_t beta = floor_inverse(r);
    const double head = cache.trace_prefix_sum(beta);
    const double weight = 1.0 - r * static_cast<double>(beta);
    // weight is zero (up to round-off) exactly on breakpoints r = 1/beta
    const double tail = std::abs(weight) <= 1e-15 ? 0.0 : weight * cache.trace(beta);
    return tail + r * head;
}

double rate_cost_slope(double r, const SteadyStateCache& cache) {
    require_rate(r, "rate_cost_slope");
    r = std::min(r, 1.0);
    const std::size_t beta = floor_inverse(r);
    return cache.trace_prefix_sum(beta) - static_cast<double>(beta) * cache.trace(beta);
}

ThresholdPolicy threshold_from_rate(double r) {
    require_rate(r, "threshold_from_rate");
    r = std::min(r, 1.0);
    const double inv = 1.0 / r;
    ThresholdPolicy policy;
    policy.eta = static_cast<std::size_t>(std::floor(inv - 1.0 + kFloorGuard));
    policy.p = std::clamp(static_cast<double>(policy.eta) + 2.0 - inv, 0.0, 1.0);
    return policy;
}

Vector subgradient(const Vector& r, const std::vector<SteadyStateCache>& caches,
                   FairnessParam fp) {
    if (static_cast<std::size_t>(r.size()) != caches.size()) {
        throw std::invalid_argument("subgradient: rate vector size mismatch");
    }
    Vector kappa(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const auto& cache = caches[static_cast<std::size_t>(i)];
        const double slope = rate_cost_slope(r[i], cache);
        const double scale = fp.q == 0.0 ? 1.0 : std::pow(rate_cost(r[i], cache), fp.q);
        kappa[i] = scale * slope;
        if (!std::isfinite(kappa[i])) {
            throw NonFiniteError("subgradient: non-finite value for sensor " + cache.model().label +
                                 " at rate " + std::to_string(r[i]) +
                                 " (lower rate bound too small?)");
        }
    }
    return kappa;
}

double rate_objective(const Vector& r, const std::vector<SteadyStateCache>& caches,
                      FairnessParam fp) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        total += fair_cost(rate_cost(r[i], caches[static_cast<std::size_t>(i)]), fp);
    }
    return total;
}

namespace {

ConstraintSystem assemble(const std::vector<double>& rho, double R_total, double epsilon) {
    if (!(R_total > 0.0)) {
        throw std::invalid_argument("build_constraints: R_total must be positive");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw std::invalid_argument("build_constraints: epsilon must lie in (0, 1)");
    }
    const auto n = static_cast<Eigen::Index>(rho.size());
    ConstraintSystem con;
    con.R_total = R_total;
    con.r_lower = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        con.r_lower[i] = rho[static_cast<std::size_t>(i)] < 1.0 ? 0.0 : epsilon;
    }
    con.A_con = Matrix::Zero(2 * n + 1, n);
    con.A_con.row(0).setOnes();
    con.A_con.block(1, 0, n, n) = Matrix::Identity(n, n);
    con.A_con.block(n + 1, 0, n, n) = -Matrix::Identity(n, n);
    con.b_con = Vector::Zero(2 * n + 1);
    con.b_con[0] = R_total;
    con.b_con.segment(1, n).setOnes();
    con.b_con.segment(n + 1, n) = -con.r_lower;
    return con;
}

}  // namespace

ConstraintSystem build_constraints(const std::vector<SystemModel>& models, double R_total,
                                   double epsilon) {
    std::vector<double> rho;
    rho.reserve(models.size());
    for (const auto& m : models) {
        rho.push_back(spectral_radius(m.A));
    }
    return assemble(rho, R_total, epsilon);
}

ConstraintSystem build_constraints(const std::vector<SteadyStateCache>& caches, double R_total,
                                   double epsilon) {
    std::vector<double> rho;
    rho.reserve(caches.size());
    for (const auto& c : caches) {
        rho.push_back(c.rho_A());
    }
    return assemble(rho, R_total, epsilon);
}

PrimalDualState primal_dual_step(const Vector& r, const Vector& nu, std::size_t t,
                                 const SolverConfig& cfg, const ConstraintSystem& con,
                                 const std::vector<SteadyStateCache>& caches, FairnessParam fp) {
    if (t < 1) {
        throw std::invalid_argument("primal_dual_step: iteration index starts at 1");
    }
    if (static_cast<std::size_t>(r.size()) != con.sensors() || nu.size() != con.b_con.size()) {
        throw std::invalid_argument("primal_dual_step: dimension mismatch");
    }
    return step_with(r, nu, t, cfg, con, subgradient(r, caches, fp));
}

RateSolution solve_rate_allocation(const std::vector<SteadyStateCache>& caches, double R_total,
                                   FairnessParam fp, const SolverConfig& cfg) {
    if (caches.empty()) {
        throw std::invalid_argument("solve_rate_allocation: no sensors");
    }
    if (!(cfg.alpha > 0.0) || !(cfg.gamma0 > 0.0) || cfg.max_iter == 0) {
        throw std::invalid_argument("solve_rate_allocation: invalid solver configuration");
    }
    const ConstraintSystem con = build_constraints(caches, R_total, cfg.epsilon);
    const auto n = static_cast<Eigen::Index>(caches.size());

    // Random start around the even split, as in the reference procedure.
    SplitMix64 rng(cfg.seed);
    const double even = std::min(1.0, R_total / static_cast<double>(n));
    Vector r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r[i] = even * (1.0 + 0.1 * (2.0 * rng.uniform() - 1.0));
    }
    r = clamp_box(r, con);
    Vector nu = Vector::Zero(con.b_con.size());

    // The direction is taken on ||J~||_{1+q} divided by its initial gradient
    // size; both are monotone rescalings of g and keep the dual variables O(1).
    const double grad_scale = [&] {
        const double s = scaled_subgradient(r, caches, fp).cwiseAbs().maxCoeff();
        return s > 0.0 ? s : 1.0;
    }();

    RateSolution sol;
    sol.trace.reserve(std::min<std::size_t>(cfg.max_iter, 1'000'000));
    double best = std::numeric_limits<double>::infinity();
    double best_at_checkpoint = best;
    std::size_t last_improvement = 0;
    Vector best_r = r;
    bool have_feasible = false;

    auto consider = [&](const Vector& cand, std::size_t t) {
        const double viol = con.violation(cand);
        if (viol > cfg.tol_violation) {
            return;
        }
        const double obj = rate_objective(cand, caches, fp);
        if (obj < best) {
            best = obj;
            best_r = cand;
            have_feasible = true;
            if (best < best_at_checkpoint - cfg.tol_objective * std::abs(best_at_checkpoint) ||
                !std::isfinite(best_at_checkpoint)) {
                best_at_checkpoint = best;
                last_improvement = t;
            }
        }
    };
    consider(r, 0);

    std::size_t t = 1;
    for (; t <= cfg.max_iter; ++t) {
        const Vector grad = scaled_subgradient(r, caches, fp) / grad_scale;
        PrimalDualState next = step_with(r, nu, t, cfg, con, grad);
        r = std::move(next.r);
        nu = std::move(next.nu);
        const double viol = con.violation(r);
        sol.trace.push_back({t, rate_objective(r, caches, fp), viol, next.step});
        consider(r, t);
        if (viol > cfg.tol_violation) {
            consider(budget_projection(r, con), t);
        }
        if (next.step == 0.0) {
            break;
        }
        if (have_feasible && t - last_improvement >= cfg.patience) {
            break;
        }
    }

    sol.iterations = std::min(t, cfg.max_iter);
    if (have_feasible) {
        sol.rates = best_r;
        sol.objective = best;
        sol.violation = con.violation(best_r);
        sol.converged = t <= cfg.max_iter;
    } else {
        sol.rates = r;
        sol.objective = rate_objective(r, caches, fp);
        sol.violation = con.violation(r);
        sol.converged = false;
    }
    return sol;
}

RateSolution solve_rate_allocation(const std::vector<SystemModel>& models, double R_total,
                                   FairnessParam fp, const SolverConfig& cfg) {
    return solve_rate_allocation(build_caches(models), R_total, fp, cfg);
}

std::vector<std::uint8_t> realize_threshold_schedule(const ThresholdPolicy& policy,
                                                     std::size_t horizon, std::uint64_t seed) {
    if (horizon == 0) {
        throw std::invalid_argument("realize_threshold_schedule: horizon must be >= 1");
    }
    SplitMix64 rng(seed);
    std::vector<std::uint8_t> zeta(horizon, 0);
    std::size_t holding = 0;
    for (std::size_t k = 0; k < horizon; ++k) {
        bool send = false;
        if (holding > policy.eta) {
            send = true;
        } else if (holding == policy.eta) {
            send = policy.p >= 1.0 || rng.uniform() < policy.p;
        }
        zeta[k] = send ? 1 : 0;
        holding = send ? 0 : holding + 1;
    }
    return zeta;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
    os << "iter,objective,violation_norm,step_size\n";
    const auto old = os.precision(17);
    for (const auto& rec : trace) {
        os << rec.iter << ',' << rec.objective << ',' << rec.violation_norm << ','
           << rec.step_size << '\n';
    }
    os.precision(old);
}

}  // namespace fairsched
