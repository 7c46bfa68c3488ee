#pragma once

#include <cstddef>
#include <vector>

namespace ei {

/// Convex QP with a diagonal Hessian and box bounds:
///
///     minimize   1/2 x'Hx + c'x
///     subject to A x = b,  lower <= x <= upper
///
/// A is dense row-major (rows x cols). Bounds must be finite.
struct QpProblem {
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::vector<double> hessian_diag;  // >= 0
    std::vector<double> linear;
    std::vector<double> a;             // rows * cols
    std::vector<double> b;
    std::vector<double> lower;
    std::vector<double> upper;

    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

enum class QpStatus { Optimal, Infeasible, IterationLimit };

struct QpResult {
    QpStatus status = QpStatus::IterationLimit;
    std::vector<double> x;
    std::vector<double> y;           // equality multipliers: Hx + c = A'y + z_l - z_u
    std::vector<double> z_lower;
    std::vector<double> z_upper;
    double objective = 0.0;
    double primal_residual = 0.0;    // ||Ax - b||_inf
    double dual_residual = 0.0;      // ||Hx + c - A'y - z_l + z_u||_inf
    int iterations = 0;
    bool polished = false;
};

struct QpOptions {
    int max_iterations = 100;
    double tolerance = 1e-11;
    bool polish = true;
};

/// Mehrotra predictor-corrector interior point, followed by an active-set
/// refinement that re-solves the KKT system on the detected active set and
/// keeps the result only if it is primal and dual feasible.
QpResult solve_qp(const QpProblem& problem, const QpOptions& options = {});

} // namespace ei
