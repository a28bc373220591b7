// Linear plant/sensor models, steady-state Kalman covariance and the
// open-loop covariance traces every scheduler is priced in.
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairsched {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kPsdTolerance = 1e-10;
inline constexpr double kSteadyStateTolerance = 1e-12;
inline constexpr std::size_t kSteadyStateMaxIter = 1'000'000;
inline constexpr std::size_t kTraceCap = 10'000;

/// Raised when a fixed-point or value iteration fails to settle.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a covariance recursion leaves the finite doubles.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One plant observed by one sensor:
///   x_{k+1} = A x_k + w_k,  y_k = C x_k + v_k,  w ~ N(0, Q), v ~ N(0, R).
struct SystemModel {
    Matrix A;
    Matrix C;
    Matrix Q;
    Matrix R;
    std::string label;

    std::size_t state_dim() const { return static_cast<std::size_t>(A.rows()); }
    std::size_t meas_dim() const { return static_cast<std::size_t>(C.rows()); }

    /// Throws std::invalid_argument naming the first violated invariant
    /// (shape, symmetry, Q PSD, R PD, finiteness).
    void validate() const;
};

/// q-fairness weight; f_q(x) = x^(1+q) / (1+q).
struct FairnessParam {
    double q = 0.0;

    explicit FairnessParam(double q_value = 0.0);
};

double fair_cost(double x, FairnessParam fp);

double spectral_radius(const Matrix& A);

/// Prediction map h(X) = A X A' + Q, symmetrized.
Matrix lyapunov_step(const Matrix& X, const SystemModel& sys);

/// Measurement update g(X) = X - X C' (C X C' + R)^-1 C X, symmetrized.
Matrix measurement_update(const Matrix& X, const SystemModel& sys);

Matrix symmetrize(const Matrix& X);

/// Steady filtered covariance plus the memoized traces Tr h^(j)(P_bar).
///
/// Readers may call trace() concurrently; the sequence is extended under a
/// lock. Once an iterate stops moving (stable A) the tail is reported as
/// the limit value, so arbitrarily long holding times stay cheap.
class SteadyStateCache {
public:
    SteadyStateCache(SystemModel sys, Matrix p_bar, std::size_t trace_cap = kTraceCap);

    SteadyStateCache(const SteadyStateCache& other);
    SteadyStateCache& operator=(const SteadyStateCache& other);
    SteadyStateCache(SteadyStateCache&& other) noexcept;
    SteadyStateCache& operator=(SteadyStateCache&& other) noexcept;
    ~SteadyStateCache() = default;

    const SystemModel& model() const { return sys_; }
    const Matrix& p_bar() const { return p_bar_; }
    double rho_A() const { return rho_a_; }
    bool stable() const { return rho_a_ < 1.0; }

    /// Tr h^(j)(P_bar). Throws NonFiniteError on overflow and
    /// std::out_of_range past the trace cap on a system that never settles.
    double trace(std::size_t j) const;

    /// sum_{i<count} Tr h^(i)(P_bar).
    double trace_prefix_sum(std::size_t count) const;

    /// Number of distinct entries computed so far.
    std::size_t cached_size() const;

    /// Limit of the trace sequence; +inf when the open-loop covariance diverges.
    double trace_limit() const;

private:
    void extend_to(std::size_t j) const;

    SystemModel sys_;
    Matrix p_bar_;
    double rho_a_ = 0.0;
    std::size_t cap_ = kTraceCap;

    mutable std::unique_ptr<std::mutex> mutex_;
    mutable Matrix frontier_;
    mutable std::vector<double> traces_;
    mutable std::vector<double> prefix_;  // prefix_[k] = sum of traces_[0..k)
    mutable bool saturated_ = false;
};

SteadyStateCache steady_state(const SystemModel& sys, double tol = kSteadyStateTolerance,
                              std::size_t max_iter = kSteadyStateMaxIter);

double open_loop_trace(const SteadyStateCache& cache, std::size_t j);

std::vector<SteadyStateCache> build_caches(const std::vector<SystemModel>& models);

}  // namespace fairsched
