#pragma once

// Small dense linear-algebra kernel: symmetric solves, 2x2 normal equations,
// and a dual active-set solver for concave QPs with equality rows and upper
// bounds on every variable.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "nrps/error.hpp"

namespace nrps {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline double inf_norm(const Vector& v) {
    return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

/// Solves a x = b for symmetric a via a pivoted LDLT factorization.
/// Singular or numerically singular systems are reported, never regularized.
inline Vector solve_symmetric(const Matrix& a, const Vector& b) {
    if (a.rows() != a.cols() || a.rows() != b.size()) {
        fail(ErrorKind::DimensionMismatch, "solve_symmetric: matrix is " + std::to_string(a.rows()) + "x" +
                                               std::to_string(a.cols()) + ", rhs has " +
                                               std::to_string(b.size()) + " entries");
    }
    if (a.rows() == 0) return Vector{};
    Eigen::LDLT<Matrix> ldlt(a);
    const Vector pivots = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14) ||
        !(pivots.minCoeff() > 1e-14 * pivots.maxCoeff())) {
        fail(ErrorKind::SingularMatrix, "solve_symmetric: matrix is singular");
    }
    Vector x = ldlt.solve(b);
    const double residual = inf_norm(a * x - b);
    if (!(residual <= 1e-9 * (1.0 + inf_norm(b)))) {
        std::ostringstream msg;
        msg << "solve_symmetric: residual " << residual << " exceeds tolerance (ill-conditioned matrix)";
        fail(ErrorKind::SingularMatrix, msg.str());
    }
    return x;
}

/// Cramer's rule for a 2x2 system. A determinant that is negligible relative to
/// the entries signals a history without price dispersion.
inline Eigen::Vector2d solve_2x2(const Eigen::Matrix2d& m, const Eigen::Vector2d& b) {
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double scale = std::abs(m(0, 0) * m(1, 1)) + std::abs(m(0, 1) * m(1, 0));
    if (!(std::abs(det) >= 1e-12 * scale) || det == 0.0) {
        fail(ErrorKind::DegenerateHistory, "solve_2x2: determinant is zero (no price dispersion)");
    }
    return {(b(0) * m(1, 1) - m(0, 1) * b(1)) / det, (m(0, 0) * b(1) - b(0) * m(1, 0)) / det};
}

/// Quadratic term of a concave objective. Diagonal Hessians (the pricing case)
/// are kept as a vector so reduced solves stay linear in the variable count.
class Hessian {
public:
    static Hessian diagonal(Vector diag) {
        Hessian h;
        h.diag_ = std::move(diag);
        h.is_diagonal_ = true;
        return h;
    }

    static Hessian dense(Matrix m) {
        if (m.rows() != m.cols()) fail(ErrorKind::DimensionMismatch, "Hessian must be square");
        Hessian h;
        h.dense_ = std::move(m);
        h.is_diagonal_ = false;
        return h;
    }

    bool is_diagonal() const { return is_diagonal_; }
    Index size() const { return is_diagonal_ ? diag_.size() : dense_.rows(); }

    double operator()(Index i, Index j) const {
        if (is_diagonal_) return i == j ? diag_(i) : 0.0;
        return dense_(i, j);
    }

    Vector apply(const Vector& x) const {
        if (is_diagonal_) return diag_.cwiseProduct(x);
        return dense_ * x;
    }

    const Vector& diagonal_entries() const { return diag_; }
    const Matrix& dense_matrix() const { return dense_; }

    Matrix to_dense() const {
        if (is_diagonal_) return diag_.asDiagonal();
        return dense_;
    }

private:
    Hessian() = default;

    Vector diag_;
    Matrix dense_;
    bool is_diagonal_ = true;
};

/// maximize ½ xᵀ H x + gᵀ x  subject to  E x = e,  x ≤ u,  with H negative definite.
/// E must have full row rank; callers drop redundant rows.
struct KktSystem {
    Hessian hessian = Hessian::diagonal(Vector{});
    Matrix equality_matrix;
    Vector equality_rhs;
    Vector linear_term;
    Vector upper_bounds;

    Index variables() const { return linear_term.size(); }
    Index equalities() const { return equality_matrix.rows(); }
};

struct KktResidual {
    double stationarity = 0.0;
    double equality = 0.0;
    double bound_violation = 0.0;
    double dual_infeasibility = 0.0;
    double complementarity = 0.0;

    double max() const {
        return std::max({stationarity, equality, bound_violation, dual_infeasibility, complementarity});
    }
};

struct QpSolution {
    Vector solution;
    Vector eq_duals;
    Vector bound_duals;
    std::vector<Index> active_set;
    int iterations = 0;
    KktResidual residual;
};

/// Residuals of the optimality conditions  H x + g − Eᵀν − μ = 0,  E x = e,
/// x ≤ u,  μ ≥ 0,  μ∘(u − x) = 0.
inline KktResidual kkt_residual(const KktSystem& sys, const Vector& x, const Vector& eq_duals,
                                const Vector& bound_duals) {
    KktResidual r;
    Vector stat = sys.hessian.apply(x) + sys.linear_term - bound_duals;
    if (sys.equalities() > 0) stat -= sys.equality_matrix.transpose() * eq_duals;
    r.stationarity = inf_norm(stat);
    if (sys.equalities() > 0) r.equality = inf_norm(sys.equality_matrix * x - sys.equality_rhs);
    for (Index i = 0; i < x.size(); ++i) {
        r.bound_violation = std::max(r.bound_violation, x(i) - sys.upper_bounds(i));
        r.dual_infeasibility = std::max(r.dual_infeasibility, -bound_duals(i));
        r.complementarity =
            std::max(r.complementarity, std::abs(bound_duals(i) * (sys.upper_bounds(i) - x(i))));
    }
    return r;
}

namespace detail {

// Equality-constrained subproblem on the free variables F with the working set
// W fixed. In minimization form (G = −H, f = g):
//   G_FF y + E_Fᵀ ν = rhs_free,  E_F y = rhs_eq,
// solved by the range-space (Schur complement) method.
class WorkingSetSolver {
public:
    explicit WorkingSetSolver(const KktSystem& sys) : sys_(sys) {
        const Index m = sys.variables();
        const Index k = sys.equalities();
        columns_.resize(static_cast<std::size_t>(m));
        for (Index c = 0; c < m; ++c) {
            for (Index r = 0; r < k; ++r) {
                const double a = sys.equality_matrix(r, c);
                if (a != 0.0) columns_[static_cast<std::size_t>(c)].emplace_back(r, a);
            }
        }
    }

    double curvature(Index i) const { return -sys_.hessian(i, i); }

    Vector apply_g(const Vector& x) const { return -sys_.hessian.apply(x); }

    // free: indices of F (ascending). rhs_free indexed like free.
    std::pair<Vector, Vector> solve(const std::vector<Index>& free, const Vector& rhs_free,
                                    const Vector& rhs_eq) const {
        const Index k = sys_.equalities();
        const Index nf = static_cast<Index>(free.size());
        if (sys_.hessian.is_diagonal()) {
            Matrix schur = Matrix::Zero(k, k);
            Vector schur_rhs = -rhs_eq;
            for (Index idx = 0; idx < nf; ++idx) {
                const Index c = free[static_cast<std::size_t>(idx)];
                const double inv_g = 1.0 / curvature(c);
                const auto& col = columns_[static_cast<std::size_t>(c)];
                for (const auto& [r1, a1] : col) {
                    schur_rhs(r1) += a1 * inv_g * rhs_free(idx);
                    for (const auto& [r2, a2] : col) schur(r1, r2) += a1 * a2 * inv_g;
                }
            }
            Vector nu = k > 0 ? solve_schur(schur, schur_rhs) : Vector{};
            Vector y(nf);
            for (Index idx = 0; idx < nf; ++idx) {
                const Index c = free[static_cast<std::size_t>(idx)];
                double acc = rhs_free(idx);
                for (const auto& [r, a] : columns_[static_cast<std::size_t>(c)]) acc -= a * nu(r);
                y(idx) = acc / curvature(c);
            }
            return {std::move(y), std::move(nu)};
        }

        Matrix g_ff(nf, nf);
        Matrix e_f(k, nf);
        for (Index a = 0; a < nf; ++a) {
            for (Index b = 0; b < nf; ++b) {
                g_ff(a, b) = -sys_.hessian(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
            }
            if (k > 0) e_f.col(a) = sys_.equality_matrix.col(free[static_cast<std::size_t>(a)]);
        }
        Eigen::LLT<Matrix> llt(g_ff);
        if (llt.info() != Eigen::Success) {
            fail(ErrorKind::InvalidArgument, "active-set QP: Hessian is not negative definite");
        }
        Vector g_inv_rhs = llt.solve(rhs_free);
        if (k == 0) return {std::move(g_inv_rhs), Vector{}};
        Matrix g_inv_et = llt.solve(e_f.transpose());
        Matrix schur = e_f * g_inv_et;
        Vector nu = solve_schur(schur, e_f * g_inv_rhs - rhs_eq);
        Vector y = llt.solve(rhs_free - e_f.transpose() * nu);
        return {std::move(y), std::move(nu)};
    }

    Vector et_times(const Vector& nu) const {
        if (sys_.equalities() == 0) return Vector::Zero(sys_.variables());
        return sys_.equality_matrix.transpose() * nu;
    }

private:
    static Vector solve_schur(const Matrix& schur, const Vector& rhs) {
        Eigen::LLT<Matrix> llt(schur);
        if (llt.info() != Eigen::Success) {
            fail(ErrorKind::SingularMatrix, "active-set QP: equality rows are linearly dependent on the free set");
        }
        return llt.solve(rhs);
    }

    const KktSystem& sys_;
    std::vector<std::vector<std::pair<Index, double>>> columns_;
};

}  // namespace detail

/// Dual active-set method (Goldfarb–Idnani) specialised to upper bounds.
/// Starts from the equality-constrained optimum and adds the most violated
/// bound each round while keeping bound multipliers non-negative, so the
/// common case with no binding bound is a single equality-KKT solve.
inline QpSolution solve_eq_qp_active_set(const KktSystem& sys, int max_iterations = -1) {
    const Index m = sys.variables();
    const Index k = sys.equalities();
    if (sys.hessian.size() != m || sys.upper_bounds.size() != m || sys.equality_rhs.size() != k ||
        (k > 0 && sys.equality_matrix.cols() != m)) {
        fail(ErrorKind::DimensionMismatch, "active-set QP: inconsistent KKT system dimensions");
    }
    if (sys.hessian.is_diagonal()) {
        for (Index i = 0; i < m; ++i) {
            if (!(sys.hessian(i, i) < 0.0)) {
                fail(ErrorKind::InvalidArgument, "active-set QP: Hessian is not negative definite");
            }
        }
    }
    if (max_iterations < 0) max_iterations = static_cast<int>(10 * std::max<Index>(m, 1));

    const detail::WorkingSetSolver ws(sys);
    const Vector& f = sys.linear_term;
    const Vector& u = sys.upper_bounds;

    std::vector<bool> active(static_cast<std::size_t>(m), false);
    Vector x = Vector::Zero(m);
    Vector nu = Vector::Zero(k);
    Vector mu = Vector::Zero(m);

    auto free_set = [&] {
        std::vector<Index> free;
        free.reserve(static_cast<std::size_t>(m));
        for (Index i = 0; i < m; ++i) {
            if (!active[static_cast<std::size_t>(i)]) free.push_back(i);
        }
        return free;
    };

    // Exact solve of the subproblem with the working set held at its bounds.
    auto solve_subproblem = [&] {
        const auto free = free_set();
        Vector fixed = Vector::Zero(m);
        for (Index i = 0; i < m; ++i) {
            if (active[static_cast<std::size_t>(i)]) fixed(i) = u(i);
        }
        const Vector g_fixed = ws.apply_g(fixed);
        Vector rhs_free(static_cast<Index>(free.size()));
        for (std::size_t a = 0; a < free.size(); ++a) rhs_free(static_cast<Index>(a)) = f(free[a]) - g_fixed(free[a]);
        Vector rhs_eq = k > 0 ? Vector(sys.equality_rhs - sys.equality_matrix * fixed) : Vector{};
        auto [y, dual] = ws.solve(free, rhs_free, rhs_eq);
        x = fixed;
        for (std::size_t a = 0; a < free.size(); ++a) x(free[a]) = y(static_cast<Index>(a));
        nu = std::move(dual);
        const Vector grad = f - ws.apply_g(x) - ws.et_times(nu);
        mu.setZero();
        for (Index i = 0; i < m; ++i) {
            if (active[static_cast<std::size_t>(i)]) mu(i) = grad(i);
        }
    };

    auto violation_tol = [&](Index i) { return 1e-11 * (1.0 + std::abs(u(i))); };

    solve_subproblem();
    int iterations = 0;

    while (true) {
        Index p = -1;
        double worst = 0.0;
        for (Index i = 0; i < m; ++i) {
            if (active[static_cast<std::size_t>(i)]) continue;
            const double viol = x(i) - u(i);
            if (viol > violation_tol(i) && viol > worst) {
                worst = viol;
                p = i;
            }
        }
        if (p < 0) break;

        double mu_p = 0.0;
        while (true) {
            if (++iterations > max_iterations) {
                std::ostringstream msg;
                msg << "active-set QP: no convergence after " << max_iterations
                    << " iterations, last residual " << kkt_residual(sys, x, nu, mu).max();
                fail(ErrorKind::SolverFailure, msg.str());
            }
            const auto free = free_set();
            Vector rhs_free = Vector::Zero(static_cast<Index>(free.size()));
            for (std::size_t a = 0; a < free.size(); ++a) {
                if (free[a] == p) rhs_free(static_cast<Index>(a)) = -1.0;
            }
            auto [dy, dnu] = ws.solve(free, rhs_free, Vector::Zero(k));
            Vector dx = Vector::Zero(m);
            for (std::size_t a = 0; a < free.size(); ++a) dx(free[a]) = dy(static_cast<Index>(a));
            const Vector dgrad = -ws.apply_g(dx) - ws.et_times(dnu);

            const double inf = std::numeric_limits<double>::infinity();
            double full_step = inf;
            if (-dx(p) > 1e-10 / ws.curvature(p)) full_step = (x(p) - u(p)) / (-dx(p));

            double partial_step = inf;
            Index blocking = -1;
            for (Index i = 0; i < m; ++i) {
                if (!active[static_cast<std::size_t>(i)] || !(dgrad(i) < 0.0)) continue;
                const double t = mu(i) / (-dgrad(i));
                if (t < partial_step) {
                    partial_step = t;
                    blocking = i;
                }
            }
            if (full_step == inf && partial_step == inf) {
                fail(ErrorKind::SolverFailure, "active-set QP: feasible region is empty");
            }
            const double step = std::min(full_step, partial_step);
            if (std::isfinite(full_step)) {
                x += step * dx;
                nu += step * dnu;
            }
            for (Index i = 0; i < m; ++i) {
                if (active[static_cast<std::size_t>(i)]) mu(i) += step * dgrad(i);
            }
            mu_p += step;
            if (full_step <= partial_step) {
                active[static_cast<std::size_t>(p)] = true;
                solve_subproblem();
                break;
            }
            active[static_cast<std::size_t>(blocking)] = false;
            mu(blocking) = 0.0;
        }
    }

    QpSolution out;
    const double dual_tol = 1e-10 * (1.0 + inf_norm(f));
    for (Index i = 0; i < m; ++i) {
        if (!active[static_cast<std::size_t>(i)]) continue;
        if (mu(i) < -dual_tol) {
            std::ostringstream msg;
            msg << "active-set QP: negative bound multiplier " << mu(i) << " at termination";
            fail(ErrorKind::SolverFailure, msg.str());
        }
        mu(i) = std::max(mu(i), 0.0);
        out.active_set.push_back(i);
    }
    out.solution = std::move(x);
    out.eq_duals = std::move(nu);
    out.bound_duals = std::move(mu);
    out.iterations = iterations;
    out.residual = kkt_residual(sys, out.solution, out.eq_duals, out.bound_duals);
    return out;
}

}  // namespace nrps
