#include "ei/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ei {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double max_step(const Vec& v, const Vec& dv) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    }
    return alpha;
}

struct Dense {
    Mat A;
    Vec b, c, h, l, u;
};

struct Iterate {
    Vec x, y, z, w;
};

struct Residuals {
    Vec rd, rp;
    double mu = 0.0;
};

Residuals residuals(const Dense& p, const Iterate& it) {
    Residuals r;
    r.rd = p.h.cwiseProduct(it.x) + p.c - p.A.transpose() * it.y - it.z + it.w;
    r.rp = p.A * it.x - p.b;
    const Vec s = it.x - p.l;
    const Vec t = p.u - it.x;
    const auto n = static_cast<double>(std::max<Eigen::Index>(1, it.x.size()));
    r.mu = (s.dot(it.z) + t.dot(it.w)) / (2.0 * n);
    return r;
}

// Interior point on a problem with strictly l < u for every variable.
QpResult interior_point(const Dense& p, const QpOptions& opt) {
    const Eigen::Index n = p.c.size();
    const Eigen::Index m = p.b.size();
    Iterate it{(p.l + p.u) / 2.0, Vec::Zero(m), Vec::Ones(n), Vec::Ones(n)};

    const double scale_b = 1.0 + inf_norm(p.b);
    const double scale_c = 1.0 + inf_norm(p.c);
    QpResult out;
    out.status = QpStatus::IterationLimit;
    // Degenerate problems can stall short of the tolerance; the best finite
    // iterate is kept so the active-set polish can finish from there.
    Iterate best = it;
    double best_merit = std::numeric_limits<double>::infinity();

    for (int k = 0; k < opt.max_iterations; ++k) {
        const Residuals r = residuals(p, it);
        out.iterations = k;
        const double merit = std::max({inf_norm(r.rp) / scale_b, inf_norm(r.rd) / scale_c, r.mu});
        if (!std::isfinite(merit)) break;
        if (merit <= best_merit) {
            best_merit = merit;
            best = it;
        }
        if (inf_norm(r.rp) <= opt.tolerance * scale_b && inf_norm(r.rd) <= opt.tolerance * scale_c &&
            r.mu <= opt.tolerance) {
            out.status = QpStatus::Optimal;
            break;
        }
        const Vec s = it.x - p.l;
        const Vec t = p.u - it.x;
        const Vec d = p.h + it.z.cwiseQuotient(s) + it.w.cwiseQuotient(t);
        const Vec dinv = d.cwiseInverse();
        Mat schur = p.A * dinv.asDiagonal() * p.A.transpose();
        if (m > 0) schur.diagonal().array() += 1e-14 * (1.0 + schur.diagonal().cwiseAbs().maxCoeff());
        const Eigen::LDLT<Mat> ldlt(schur);

        auto direction = [&](const Vec& rsl, const Vec& rtu, Iterate& dir) {
            const Vec rhs_x = -r.rd - rsl.cwiseQuotient(s) + rtu.cwiseQuotient(t);
            const Vec rhs_y = -r.rp - p.A * dinv.cwiseProduct(rhs_x);
            dir.y = ldlt.solve(rhs_y);
            dir.x = dinv.cwiseProduct(rhs_x + p.A.transpose() * dir.y);
            dir.z = (-rsl - it.z.cwiseProduct(dir.x)).cwiseQuotient(s);
            dir.w = (-rtu + it.w.cwiseProduct(dir.x)).cwiseQuotient(t);
        };

        Iterate aff;
        direction(s.cwiseProduct(it.z), t.cwiseProduct(it.w), aff);
        const double ap_aff = std::min(max_step(s, aff.x), max_step(t, -aff.x));
        const double ad_aff = std::min(max_step(it.z, aff.z), max_step(it.w, aff.w));
        const double mu_aff = ((s + ap_aff * aff.x).dot(it.z + ad_aff * aff.z) +
                               (t - ap_aff * aff.x).dot(it.w + ad_aff * aff.w)) /
                              (2.0 * static_cast<double>(std::max<Eigen::Index>(1, n)));
        const double sigma = r.mu > 0.0 ? std::pow(mu_aff / r.mu, 3.0) : 0.0;

        Iterate dir;
        const Vec target = Vec::Constant(n, sigma * r.mu);
        direction(s.cwiseProduct(it.z) + aff.x.cwiseProduct(aff.z) - target,
                  t.cwiseProduct(it.w) - aff.x.cwiseProduct(aff.w) - target, dir);
        // One step length for primal and dual: with a Hessian the dual
        // residual depends on x, so split steps can lose dual feasibility.
        const double alpha = std::min(1.0, 0.995 * std::min({max_step(s, dir.x), max_step(t, -dir.x),
                                                             max_step(it.z, dir.z), max_step(it.w, dir.w)}));
        it.x += alpha * dir.x;
        it.y += alpha * dir.y;
        it.z += alpha * dir.z;
        it.w += alpha * dir.w;
        out.iterations = k + 1;
    }

    it = best;
    const Residuals r = residuals(p, it);
    if (out.status != QpStatus::Optimal && inf_norm(r.rp) > 1e-6 * scale_b) out.status = QpStatus::Infeasible;
    out.x.assign(it.x.data(), it.x.data() + n);
    out.y.assign(it.y.data(), it.y.data() + m);
    out.z_lower.assign(it.z.data(), it.z.data() + n);
    out.z_upper.assign(it.w.data(), it.w.data() + n);
    return out;
}

// Re-solves the equality-constrained KKT system on the active set guessed from
// the interior point iterate. Returns false if the guess is not optimal.
bool polish(const Dense& p, QpResult& res) {
    const Eigen::Index n = p.c.size();
    const Eigen::Index m = p.b.size();
    enum class State { Free, Lower, Upper };
    std::vector<State> st(static_cast<std::size_t>(n), State::Free);
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = res.x[i] - p.l[i];
        const double t = p.u[i] - res.x[i];
        if (res.z_lower[i] > s) st[i] = State::Lower;
        else if (res.z_upper[i] > t) st[i] = State::Upper;
        else free_idx.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = st[i] == State::Lower ? p.l[i] : st[i] == State::Upper ? p.u[i] : 0.0;
    }
    Mat kkt = Mat::Zero(nf + m, nf + m);
    Vec rhs = Vec::Zero(nf + m);
    Vec fixed_part = p.b - p.A * x;
    for (Eigen::Index k = 0; k < nf; ++k) {
        const auto i = free_idx[static_cast<std::size_t>(k)];
        kkt(k, k) = p.h[i];
        for (Eigen::Index j = 0; j < m; ++j) {
            kkt(k, nf + j) = -p.A(j, i);
            kkt(nf + j, k) = p.A(j, i);
        }
        rhs[k] = -p.c[i];
    }
    rhs.tail(m) = fixed_part;
    const Eigen::FullPivLU<Mat> lu(kkt);
    if (lu.rank() < nf + m) return false;
    const Vec sol = lu.solve(rhs);
    for (Eigen::Index k = 0; k < nf; ++k) x[free_idx[static_cast<std::size_t>(k)]] = sol[k];
    const Vec y = sol.tail(m);

    const double tol = 1e-9;
    const Vec grad = p.h.cwiseProduct(x) + p.c - p.A.transpose() * y;
    Vec z = Vec::Zero(n);
    Vec w = Vec::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double span = 1.0 + std::abs(p.u[i] - p.l[i]);
        if (st[i] == State::Free) {
            if (x[i] < p.l[i] - tol * span || x[i] > p.u[i] + tol * span) return false;
            x[i] = std::clamp(x[i], p.l[i], p.u[i]);
        } else if (st[i] == State::Lower) {
            if (grad[i] < -tol * (1.0 + std::abs(p.c[i]))) return false;
            z[i] = grad[i];
        } else {
            if (grad[i] > tol * (1.0 + std::abs(p.c[i]))) return false;
            w[i] = -grad[i];
        }
    }
    if (inf_norm(p.A * x - p.b) > 1e-9 * (1.0 + inf_norm(p.b))) return false;

    res.x.assign(x.data(), x.data() + n);
    res.y.assign(y.data(), y.data() + m);
    res.z_lower.assign(z.data(), z.data() + n);
    res.z_upper.assign(w.data(), w.data() + n);
    res.polished = true;
    return true;
}

} // namespace

QpResult solve_qp(const QpProblem& problem, const QpOptions& options) {
    const std::size_t n = problem.cols;
    const std::size_t m = problem.rows;

    // Variables with lower == upper are substituted out before the interior
    // point sees them; their bound multipliers are recovered afterwards.
    std::vector<std::size_t> keep;
    std::vector<double> x_full(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (problem.upper[i] - problem.lower[i] > 1e-12 * (1.0 + std::abs(problem.lower[i]))) {
            keep.push_back(i);
        } else {
            x_full[i] = problem.lower[i];
        }
    }

    Dense p;
    const auto nk = static_cast<Eigen::Index>(keep.size());
    p.A.resize(static_cast<Eigen::Index>(m), nk);
    p.b.resize(static_cast<Eigen::Index>(m));
    p.c.resize(nk);
    p.h.resize(nk);
    p.l.resize(nk);
    p.u.resize(nk);
    for (std::size_t r = 0; r < m; ++r) {
        double rhs = problem.b[r];
        for (std::size_t i = 0; i < n; ++i) rhs -= problem.at(r, i) * x_full[i];
        p.b[static_cast<Eigen::Index>(r)] = rhs;
        for (Eigen::Index k = 0; k < nk; ++k) {
            p.A(static_cast<Eigen::Index>(r), k) = problem.at(r, keep[static_cast<std::size_t>(k)]);
        }
    }
    for (Eigen::Index k = 0; k < nk; ++k) {
        const auto i = keep[static_cast<std::size_t>(k)];
        p.c[k] = problem.linear[i];
        p.h[k] = problem.hessian_diag[i];
        p.l[k] = problem.lower[i];
        p.u[k] = problem.upper[i];
    }

    QpResult reduced = interior_point(p, options);
    if (options.polish && reduced.status != QpStatus::Infeasible) {
        if (polish(p, reduced)) reduced.status = QpStatus::Optimal;
    }

    QpResult out = reduced;
    out.x = x_full;
    out.z_lower.assign(n, 0.0);
    out.z_upper.assign(n, 0.0);
    for (Eigen::Index k = 0; k < nk; ++k) {
        const auto i = keep[static_cast<std::size_t>(k)];
        out.x[i] = reduced.x[static_cast<std::size_t>(k)];
        out.z_lower[i] = reduced.z_lower[static_cast<std::size_t>(k)];
        out.z_upper[i] = reduced.z_upper[static_cast<std::size_t>(k)];
    }

    double primal = 0.0;
    double dual = 0.0;
    double objective = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        double ax = 0.0;
        for (std::size_t i = 0; i < n; ++i) ax += problem.at(r, i) * out.x[i];
        primal = std::max(primal, std::abs(ax - problem.b[r]));
    }
    for (std::size_t i = 0; i < n; ++i) {
        double g = problem.hessian_diag[i] * out.x[i] + problem.linear[i];
        for (std::size_t r = 0; r < m; ++r) g -= problem.at(r, i) * out.y[r];
        const bool fixed = std::find(keep.begin(), keep.end(), i) == keep.end();
        if (fixed) {
            // Multiplier of a pinned variable absorbs the whole gradient.
            if (g >= 0) out.z_lower[i] = g;
            else out.z_upper[i] = -g;
        } else {
            dual = std::max(dual, std::abs(g - out.z_lower[i] + out.z_upper[i]));
        }
        objective += 0.5 * problem.hessian_diag[i] * out.x[i] * out.x[i] + problem.linear[i] * out.x[i];
    }
    out.primal_residual = primal;
    out.dual_residual = dual;
    out.objective = objective;
    return out;
}

} // namespace ei
