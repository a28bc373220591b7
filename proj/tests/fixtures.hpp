// Shared systems and independent reference computations for the tests.
#pragma once

#include "fairsched/estimation.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fixtures {

using fairsched::Matrix;
using fairsched::SystemModel;

inline Matrix m2(double a, double b, double c, double d) {
    Matrix M(2, 2);
    M << a, b, c, d;
    return M;
}

inline Matrix scalar(double x) { return Matrix::Constant(1, 1, x); }

inline SystemModel scalar_system(double a, double q, double c = 1.0, double r = 1.0,
                                 const char* label = "s") {
    return {scalar(a), scalar(c), scalar(q), scalar(r), label};
}

/// The five two-dimensional systems of the rate-constrained study (R = 2).
inline std::vector<SystemModel> case1_systems() {
    const Matrix I = Matrix::Identity(2, 2);
    return {{m2(1.2, 0, 0, 0), I, m2(4, 0, 0, 1), I, "sensor1"},
            {m2(1.1, 1, 0, 1), I, m2(1, 0, 0, 4), I, "sensor2"},
            {m2(1.2, 1, 0, 0.8), I, m2(1, 0, 0, 4), I, "sensor3"},
            {m2(0.8, 0.6, 0, 0.9), I, m2(16, 0, 0, 1), I, "sensor4"},
            {m2(0.3, 1, 0, 0.1), I, m2(0.3, 0, 0, 1.2), I, "sensor5"}};
}

/// The activation-constrained variant (Z = 2): sensors 3 and 5 modified.
inline std::vector<SystemModel> case2_systems() {
    auto s = case1_systems();
    const Matrix I = Matrix::Identity(2, 2);
    s[2] = {m2(1.1, 0, 0, 0), I, I, 10 * I, "sensor3"};
    s[4] = {m2(0.3, 1, 0, 0.1), I, m2(2, 0, 0, 8), 5 * I, "sensor5"};
    return s;
}

/// Plain Riccati fixed-point iteration using an explicit inverse.
inline Matrix reference_steady_state(const SystemModel& s, double tol = 1e-12) {
    Matrix X = s.Q;
    for (int it = 0; it < 1000000; ++it) {
        const Matrix H = s.A * X * s.A.transpose() + s.Q;
        const Matrix S = s.C * H * s.C.transpose() + s.R;
        Matrix next = H - H * s.C.transpose() * S.inverse() * s.C * H;
        next = 0.5 * (next + next.transpose());
        const double diff = (next - X).norm();
        X = next;
        if (diff <= tol) {
            break;
        }
    }
    return X;
}

/// Tr h^j(P) by direct repeated multiplication.
inline std::vector<double> reference_traces(const SystemModel& s, const Matrix& P, std::size_t count) {
    std::vector<double> out;
    Matrix X = P;
    for (std::size_t j = 0; j < count; ++j) {
        out.push_back(X.trace());
        X = s.A * X * s.A.transpose() + s.Q;
    }
    return out;
}

}  // namespace fixtures
