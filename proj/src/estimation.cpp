#include "fairsched/estimation.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace fairsched {

namespace {

bool all_finite(const Matrix& X) { return X.allFinite(); }

void require_symmetric(const Matrix& X, const std::string& what) {
    const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
    if ((X - X.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
        throw std::invalid_argument(what + " is not symmetric");
    }
}

double min_eigenvalue(const Matrix& X) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(X), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

std::string shape(const Matrix& X) {
    std::ostringstream os;
    os << X.rows() << "x" << X.cols();
    return os.str();
}

}  // namespace

void SystemModel::validate() const {
    const std::string who = label.empty() ? std::string("system") : label;
    if (A.rows() == 0 || A.rows() != A.cols()) {
        throw std::invalid_argument(who + ": A must be square and non-empty, got " + shape(A));
    }
    const auto n = A.rows();
    if (C.rows() == 0 || C.cols() != n) {
        throw std::invalid_argument(who + ": C must be m x " + std::to_string(n) + ", got " +
                                    shape(C));
    }
    const auto m = C.rows();
    if (Q.rows() != n || Q.cols() != n) {
        throw std::invalid_argument(who + ": Q must be " + std::to_string(n) + "x" +
                                    std::to_string(n) + ", got " + shape(Q));
    }
    if (R.rows() != m || R.cols() != m) {
        throw std::invalid_argument(who + ": R must be " + std::to_string(m) + "x" +
                                    std::to_string(m) + ", got " + shape(R));
    }
    if (!all_finite(A) || !all_finite(C) || !all_finite(Q) || !all_finite(R)) {
        throw std::invalid_argument(who + ": non-finite matrix entry");
    }
    require_symmetric(Q, who + ": Q");
    require_symmetric(R, who + ": R");
    if (min_eigenvalue(Q) < -kPsdTolerance) {
        throw std::invalid_argument(who + ": Q is not positive semidefinite");
    }
    if (min_eigenvalue(R) <= 0.0) {
        throw std::invalid_argument(who + ": R is not positive definite");
    }
}

FairnessParam::FairnessParam(double q_value) : q(q_value) {
    if (!std::isfinite(q) || q < 0.0) {
        throw std::invalid_argument("fairness parameter q must be finite and >= 0");
    }
}

double fair_cost(double x, FairnessParam fp) {
    if (x < 0.0 || std::isnan(x)) {
        throw std::invalid_argument("fair_cost: argument must be nonnegative");
    }
    if (fp.q == 0.0) {
        return x;
    }
    return std::pow(x, 1.0 + fp.q) / (1.0 + fp.q);
}

double spectral_radius(const Matrix& A) {
    if (A.rows() != A.cols()) {
        throw std::invalid_argument("spectral_radius: matrix must be square");
    }
    if (A.size() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<Matrix> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix symmetrize(const Matrix& X) { return 0.5 * (X + X.transpose()); }

Matrix lyapunov_step(const Matrix& X, const SystemModel& sys) {
    if (X.rows() != sys.A.rows() || X.cols() != sys.A.cols()) {
        throw std::invalid_argument("lyapunov_step: dimension mismatch");
    }
    return symmetrize(sys.A * X * sys.A.transpose() + sys.Q);
}

Matrix measurement_update(const Matrix& X, const SystemModel& sys) {
    if (X.rows() != sys.C.cols() || X.cols() != sys.C.cols()) {
        throw std::invalid_argument("measurement_update: dimension mismatch");
    }
    if (!all_finite(X)) {
        throw NonFiniteError("measurement_update: non-finite covariance");
    }
    const Matrix CX = sys.C * X;
    const Matrix S = symmetrize(CX * sys.C.transpose() + sys.R);
    // X - (CX)' S^-1 (CX)
    const Matrix gain_term = S.ldlt().solve(CX);
    return symmetrize(X - CX.transpose() * gain_term);
}

// ---------------------------------------------------------------------------
// SteadyStateCache

SteadyStateCache::SteadyStateCache(SystemModel sys, Matrix p_bar, std::size_t trace_cap)
    : sys_(std::move(sys)),
      p_bar_(std::move(p_bar)),
      rho_a_(spectral_radius(sys_.A)),
      cap_(trace_cap),
      mutex_(std::make_unique<std::mutex>()),
      frontier_(p_bar_) {
    traces_.push_back(p_bar_.trace());
    prefix_ = {0.0, traces_.front()};
}

SteadyStateCache::SteadyStateCache(const SteadyStateCache& other)
    : sys_(other.sys_),
      p_bar_(other.p_bar_),
      rho_a_(other.rho_a_),
      cap_(other.cap_),
      mutex_(std::make_unique<std::mutex>()) {
    std::lock_guard lock(*other.mutex_);
    frontier_ = other.frontier_;
    traces_ = other.traces_;
    prefix_ = other.prefix_;
    saturated_ = other.saturated_;
}

SteadyStateCache& SteadyStateCache::operator=(const SteadyStateCache& other) {
    if (this != &other) {
        SteadyStateCache copy(other);
        *this = std::move(copy);
    }
    return *this;
}

SteadyStateCache::SteadyStateCache(SteadyStateCache&& other) noexcept = default;
SteadyStateCache& SteadyStateCache::operator=(SteadyStateCache&& other) noexcept = default;

void SteadyStateCache::extend_to(std::size_t j) const {
    while (traces_.size() <= j && !saturated_) {
        if (traces_.size() >= cap_) {
            throw std::out_of_range("open-loop trace index " + std::to_string(j) +
                                    " exceeds cache cap " + std::to_string(cap_) + " for " +
                                    sys_.label);
        }
        Matrix next = lyapunov_step(frontier_, sys_);
        if (!next.allFinite()) {
            throw NonFiniteError("open-loop covariance of " + sys_.label +
                                 " overflowed at holding time " +
                                 std::to_string(traces_.size()));
        }
        const double change = (next - frontier_).norm();
        const double t = next.trace();
        if (!std::isfinite(t) || !std::isfinite(prefix_.back() + t)) {
            throw NonFiniteError("open-loop trace of " + sys_.label +
                                 " overflowed at holding time " +
                                 std::to_string(traces_.size()));
        }
        frontier_ = std::move(next);
        traces_.push_back(t);
        prefix_.push_back(prefix_.back() + t);
        if (rho_a_ < 1.0 && change <= 1e-15 * std::max(1.0, frontier_.norm())) {
            saturated_ = true;
        }
    }
}

double SteadyStateCache::trace(std::size_t j) const {
    std::lock_guard lock(*mutex_);
    extend_to(j);
    return j < traces_.size() ? traces_[j] : traces_.back();
}

double SteadyStateCache::trace_prefix_sum(std::size_t count) const {
    if (count == 0) {
        return 0.0;
    }
    std::lock_guard lock(*mutex_);
    extend_to(count - 1);
    if (count < prefix_.size()) {
        return prefix_[count];
    }
    // saturated tail: remaining terms all equal the limit
    const std::size_t known = traces_.size();
    return prefix_.back() + static_cast<double>(count - known) * traces_.back();
}

std::size_t SteadyStateCache::cached_size() const {
    std::lock_guard lock(*mutex_);
    return traces_.size();
}

double SteadyStateCache::trace_limit() const {
    if (rho_a_ >= 1.0) {
        // Q may be zero on the unstable modes; decide from the iterates.
        std::lock_guard lock(*mutex_);
        try {
            extend_to(std::min<std::size_t>(cap_ - 1, 200));
        } catch (const NonFiniteError&) {
            return std::numeric_limits<double>::infinity();
        }
        const double tail = traces_.back();
        const double prev = traces_[traces_.size() - 2];
        if (tail - prev <= 1e-12 * std::max(1.0, tail)) {
            return tail;
        }
        return std::numeric_limits<double>::infinity();
    }
    std::lock_guard lock(*mutex_);
    extend_to(cap_ - 1);
    return traces_.back();
}

SteadyStateCache steady_state(const SystemModel& sys, double tol, std::size_t max_iter) {
    if (!(tol > 0.0)) {
        throw std::invalid_argument("steady_state: tolerance must be positive");
    }
    sys.validate();
    Matrix X = sys.Q;
    for (std::size_t it = 0; it < max_iter; ++it) {
        Matrix next = measurement_update(lyapunov_step(X, sys), sys);
        if (!next.allFinite()) {
            throw ConvergenceError("steady_state: iterate diverged for " + sys.label);
        }
        const double residual = (next - X).norm();
        X = std::move(next);
        if (residual <= tol) {
            return SteadyStateCache(sys, X);
        }
    }
    throw ConvergenceError("steady_state: fixed-point iteration for " + sys.label +
                           " did not converge in " + std::to_string(max_iter) + " iterations");
}

double open_loop_trace(const SteadyStateCache& cache, std::size_t j) { return cache.trace(j); }

std::vector<SteadyStateCache> build_caches(const std::vector<SystemModel>& models) {
    std::vector<SteadyStateCache> caches;
    caches.reserve(models.size());
    for (const auto& m : models) {
        caches.push_back(steady_state(m));
    }
    return caches;
}

}  // namespace fairsched
