// Communication-rate constrained scheduling: per-sensor piecewise-linear
// cost of a rate, its subgradient, and a primal-dual subgradient solver for
// the rate allocation. Rates are realized by randomized threshold policies.
#pragma once

#include "fairsched/estimation.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace fairsched {

inline constexpr double kFloorGuard = 1e-12;

/// Rule "hold while tau < eta, transmit w.p. p at tau == eta, always after",
/// where tau counts steps since the last transmission before deciding.
struct ThresholdPolicy {
    std::size_t eta = 0;
    double p = 1.0;

    double rate() const { return 1.0 / (static_cast<double>(eta) + 2.0 - p); }
};

/// Stacked constraints [1'; I; -I] r <= [R; 1; -r_lower].
struct ConstraintSystem {
    Matrix A_con;
    Vector b_con;
    Vector r_lower;
    double R_total = 0.0;

    std::size_t sensors() const { return static_cast<std::size_t>(r_lower.size()); }
    /// ||(A_con r - b)_+||_2
    double violation(const Vector& r) const;
};

struct SolverConfig {
    double alpha = 1000.0;
    double gamma0 = 10.0;
    std::size_t max_iter = 200'000;
    double epsilon = 1e-3;
    double tol_violation = 1e-6;
    double tol_objective = 1e-6;
    /// Iterations without a relative improvement > tol_objective in the best
    /// feasible objective before the run is declared converged.
    std::size_t patience = 20'000;
    std::uint64_t seed = 1;
};

struct TraceRecord {
    std::size_t iter = 0;
    double objective = 0.0;
    double violation_norm = 0.0;
    double step_size = 0.0;
};

struct RateSolution {
    Vector rates;
    double objective = 0.0;       // g(r) = sum_i f_q(J~_i(r_i))
    double violation = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<TraceRecord> trace;
};

/// J~(r): long-run average trace of the optimal single-sensor schedule at rate r.
double rate_cost(double r, const SteadyStateCache& cache);

/// d J~ / d r on the linear piece left of r (<= 0).
double rate_cost_slope(double r, const SteadyStateCache& cache);

ThresholdPolicy threshold_from_rate(double r);

/// kappa_i = J~_i(r_i)^q * slope_i, one element of the subdifferential of g.
Vector subgradient(const Vector& r, const std::vector<SteadyStateCache>& caches,
                   FairnessParam fp);

/// g(r) = sum_i f_q(J~_i(r_i)).
double rate_objective(const Vector& r, const std::vector<SteadyStateCache>& caches,
                      FairnessParam fp);

ConstraintSystem build_constraints(const std::vector<SystemModel>& models, double R_total,
                                   double epsilon);
ConstraintSystem build_constraints(const std::vector<SteadyStateCache>& caches, double R_total,
                                   double epsilon);

struct PrimalDualState {
    Vector r;
    Vector nu;
    double step = 0.0;  // w(t); zero when T vanished
};

/// One update z <- z - w(t) T(z) followed by box clamp on r and nu >= 0.
PrimalDualState primal_dual_step(const Vector& r, const Vector& nu, std::size_t t,
                                 const SolverConfig& cfg, const ConstraintSystem& con,
                                 const std::vector<SteadyStateCache>& caches, FairnessParam fp);

RateSolution solve_rate_allocation(const std::vector<SteadyStateCache>& caches, double R_total,
                                   FairnessParam fp, const SolverConfig& cfg = {});
RateSolution solve_rate_allocation(const std::vector<SystemModel>& models, double R_total,
                                   FairnessParam fp, const SolverConfig& cfg = {});

/// zeta_k for k in [0, horizon); the holding counter starts at zero.
std::vector<std::uint8_t> realize_threshold_schedule(const ThresholdPolicy& policy,
                                                     std::size_t horizon, std::uint64_t seed);

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace);

}  // namespace fairsched
