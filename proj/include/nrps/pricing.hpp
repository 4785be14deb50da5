#pragma once

// Single-day provider problem: maximize expected payoff over link prices
// subject to flow balance of the induced supplies w = α − βp and the price cap.
// Fast path is the effective-resistance closed form; the active-set QP covers
// instances where the cap may bind.

#include <cmath>
#include <string_view>
#include <utility>
#include <vector>

#include "nrps/error.hpp"
#include "nrps/linalg.hpp"
#include "nrps/network_model.hpp"

namespace nrps {

/// The parts of a scenario the day problem needs (no true θ).
struct PricingContext {
    Matrix travel_time;
    Matrix eps_minus;
    double cost_c = 0.0;
    double p_max = 0.0;

    static PricingContext from(const Scenario& s) { return {s.travel_time, s.eps_minus(), s.cost_c, s.p_max}; }
    static PricingContext from(const ProviderView& v) { return {v.travel_time, v.eps_minus, v.cost_c, v.p_max}; }

    Index size() const { return travel_time.rows(); }
};

enum class SolverPath { ClosedForm, ActiveSet };

inline std::string_view to_string(SolverPath p) {
    return p == SolverPath::ClosedForm ? "closed_form" : "active_set";
}

struct PricingSolution {
    Matrix prices;
    Matrix supplies;
    Vector node_duals;  // σ with σ_{N-1} = 0
    Matrix cap_duals;   // μ
    std::vector<std::pair<Index, Index>> active_set;
    double objective = 0.0;
    SolverPath path = SolverPath::ClosedForm;
    bool cap_condition = false;
    int qp_iterations = 0;
    double kkt_residual = 0.0;
    double complementarity = 0.0;
};

struct PricingOptions {
    // Skip the closed form even when the cap condition holds.
    bool force_qp = false;
    // With an empty QP active set, verify the closed form reproduces the QP.
    bool cross_check = true;
    double cross_check_tol = 1e-8;
};

namespace detail {

inline void check_square(const Matrix& m, Index n, const char* what) {
    if (m.rows() != n || m.cols() != n) {
        fail(ErrorKind::DimensionMismatch, std::string(what) + " must be " + std::to_string(n) + "x" + std::to_string(n));
    }
}

inline void check_inputs(const DemandParams& theta, const PricingContext& ctx) {
    const Index n = ctx.size();
    check_square(ctx.travel_time, n, "travel_time");
    check_square(ctx.eps_minus, n, "eps_minus");
    check_square(theta.alpha, n, "alpha");
    check_square(theta.beta, n, "beta");
}

/// (cβ + α + ε⁻) / (2β), the price each link would charge with zero node duals.
inline double base_price(double alpha, double beta, double eps_minus, double c) {
    return (c * beta + alpha + eps_minus) / (2.0 * beta);
}

}  // namespace detail

/// v_k = Σ_j (α_kj − cβ_kj − ε⁻_kj) − Σ_j (α_jk − cβ_jk − ε⁻_jk).
inline Vector imbalance_vector(const DemandParams& theta, double c, const Matrix& eps_minus) {
    const Index n = theta.size();
    detail::check_square(theta.beta, n, "beta");
    detail::check_square(eps_minus, n, "eps_minus");
    Vector v = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double t = theta.alpha(i, j) - c * theta.beta(i, j) - eps_minus(i, j);
            v(i) += t;
            v(j) -= t;
        }
    }
    return v;
}

/// Prices with all cap duals zero:
/// p_ij = (cβ + α + ε⁻)/(2β) + (1/(4ξ_ij)) Σ_k (R_jk − R_ik) v_k.
inline Matrix closed_form_prices(const DemandParams& theta, const PricingContext& ctx, const EffectiveResistances& r,
                                 const Vector& v) {
    detail::check_inputs(theta, ctx);
    const Index n = ctx.size();
    if (r.r_eff.rows() != n || v.size() != n) fail(ErrorKind::DimensionMismatch, "closed_form_prices: size mismatch");
    const Vector rv = r.r_eff * v;  // (Rv)_i = Σ_k R_ik v_k
    Matrix p = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            p(i, j) = detail::base_price(theta.alpha(i, j), theta.beta(i, j), ctx.eps_minus(i, j), ctx.cost_c) +
                      (rv(j) - rv(i)) / (4.0 * ctx.travel_time(i, j));
        }
    }
    return p;
}

/// Convenience overload that builds the resistor network from θ and ξ.
inline Matrix closed_form_prices(const DemandParams& theta, const PricingContext& ctx) {
    const auto r = effective_resistances(laplacian(build_resistor_network(theta.beta, ctx.travel_time)));
    return closed_form_prices(theta, ctx, r, imbalance_vector(theta, ctx.cost_c, ctx.eps_minus));
}

/// Σ_k |v_k| ≤ min_ij 2(β_ij + (ξ_ij/ξ_ji) β_ji)(2 p_max − c − (α_ij + ε⁻_ij)/β_ij).
/// Sufficient for every cap dual to vanish.
inline bool cap_condition_holds(const DemandParams& theta, const PricingContext& ctx, const Vector& v) {
    detail::check_inputs(theta, ctx);
    const Index n = ctx.size();
    double rhs = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double a = theta.alpha(i, j);
            const double b = theta.beta(i, j);
            const double weight = 2.0 * (b + ctx.travel_time(i, j) / ctx.travel_time(j, i) * theta.beta(j, i));
            rhs = std::min(rhs, weight * (2.0 * ctx.p_max - ctx.cost_c - (a + ctx.eps_minus(i, j)) / b));
        }
    }
    return v.cwiseAbs().sum() <= rhs;
}

inline Matrix supplies_from_prices(const DemandParams& theta, const Matrix& prices) {
    const Index n = theta.size();
    Matrix w = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) w(i, j) = theta.alpha(i, j) - theta.beta(i, j) * prices(i, j);
    return w;
}

/// max_k |Σ_j w_kj − Σ_j w_jk|.
inline double flow_imbalance(const Matrix& supplies) {
    const Matrix w = supplies - Matrix(supplies.diagonal().asDiagonal());
    const Vector net = w.rowwise().sum() - w.colwise().sum().transpose();
    return inf_norm(net);
}

/// Σ ξ_ij [(α − βp + ε⁻) p − (α − βp) c] over links.
inline double expected_objective(const Matrix& prices, const DemandParams& theta, const PricingContext& ctx) {
    detail::check_inputs(theta, ctx);
    const Index n = ctx.size();
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double p = prices(i, j);
            const double w = theta.alpha(i, j) - theta.beta(i, j) * p;
            total += ctx.travel_time(i, j) * ((w + ctx.eps_minus(i, j)) * p - w * ctx.cost_c);
        }
    }
    return total;
}

/// Links (i ≠ j) in row-major order, the QP's variable ordering.
inline std::vector<std::pair<Index, Index>> link_order(Index n) {
    std::vector<std::pair<Index, Index>> links;
    links.reserve(static_cast<std::size_t>(n * (n - 1)));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) links.emplace_back(i, j);
    return links;
}

/// Day problem as a KKT system in the link prices. Flow balance rows are
/// ∂g_k/∂p with g_k the net outflow at node k; the last row is dropped, which
/// pins σ_{N-1} = 0.
inline KktSystem build_pricing_kkt(const DemandParams& theta, const PricingContext& ctx) {
    detail::check_inputs(theta, ctx);
    const Index n = ctx.size();
    const auto links = link_order(n);
    const Index m = static_cast<Index>(links.size());
    Vector h(m), g(m), u = Vector::Constant(m, ctx.p_max);
    Matrix e = Matrix::Zero(n - 1, m);
    Vector rhs = Vector::Zero(n);
    for (Index l = 0; l < m; ++l) {
        const auto [i, j] = links[static_cast<std::size_t>(l)];
        const double a = theta.alpha(i, j);
        const double b = theta.beta(i, j);
        const double xi = ctx.travel_time(i, j);
        h(l) = -2.0 * xi * b;
        g(l) = xi * (a + ctx.eps_minus(i, j) + b * ctx.cost_c);
        if (i < n - 1) e(i, l) = -b;
        if (j < n - 1) e(j, l) = b;
        rhs(i) -= a;
        rhs(j) += a;
    }
    KktSystem sys;
    sys.hessian = Hessian::diagonal(std::move(h));
    sys.equality_matrix = std::move(e);
    sys.equality_rhs = rhs.head(n - 1);
    sys.linear_term = std::move(g);
    sys.upper_bounds = std::move(u);
    return sys;
}

/// Node duals from L σ = v, pinned so σ_{N-1} = 0.
inline Vector node_duals(const EffectiveResistances& r, const Vector& v) {
    Vector sigma = r.laplacian_pinv * v;
    sigma.array() -= sigma(sigma.size() - 1);
    return sigma;
}

/// Solves the day problem under parameters θ (true or estimated).
inline PricingSolution solve_day(const DemandParams& theta, const PricingContext& ctx,
                                 const PricingOptions& opts = {}) {
    detail::check_inputs(theta, ctx);
    const Index n = ctx.size();
    PricingSolution sol;
    const Vector v = imbalance_vector(theta, ctx.cost_c, ctx.eps_minus);
    const auto r = effective_resistances(laplacian(build_resistor_network(theta.beta, ctx.travel_time)));
    sol.cap_condition = cap_condition_holds(theta, ctx, v);
    sol.cap_duals = Matrix::Zero(n, n);

    if (sol.cap_condition && !opts.force_qp) {
        sol.path = SolverPath::ClosedForm;
        sol.prices = closed_form_prices(theta, ctx, r, v);
        sol.node_duals = node_duals(r, v);
    } else {
        sol.path = SolverPath::ActiveSet;
        const KktSystem sys = build_pricing_kkt(theta, ctx);
        const QpSolution qp = solve_eq_qp_active_set(sys);
        if (qp.residual.max() > 1e-8 * (1.0 + inf_norm(sys.linear_term))) {
            std::ostringstream msg;
            msg << "pricing QP: KKT residual " << qp.residual.max() << " above tolerance";
            fail(ErrorKind::SolverFailure, msg.str());
        }
        sol.qp_iterations = qp.iterations;
        sol.kkt_residual = qp.residual.max();
        sol.complementarity = qp.residual.complementarity;
        const auto links = link_order(n);
        sol.prices = Matrix::Zero(n, n);
        for (std::size_t l = 0; l < links.size(); ++l) {
            const auto [i, j] = links[l];
            sol.prices(i, j) = qp.solution(static_cast<Index>(l));
            sol.cap_duals(i, j) = qp.bound_duals(static_cast<Index>(l));
        }
        for (Index l : qp.active_set) sol.active_set.push_back(links[static_cast<std::size_t>(l)]);
        sol.node_duals = Vector::Zero(n);
        sol.node_duals.head(n - 1) = qp.eq_duals;
        if (sol.active_set.empty() && opts.cross_check) {
            const Matrix closed = closed_form_prices(theta, ctx, r, v);
            const double gap = (closed - sol.prices).cwiseAbs().maxCoeff();
            if (gap > opts.cross_check_tol) {
                std::ostringstream msg;
                msg << "closed form and QP disagree by " << gap << " with an empty active set";
                fail(ErrorKind::InvariantViolation, msg.str());
            }
        }
    }
    sol.supplies = supplies_from_prices(theta, sol.prices);
    sol.objective = expected_objective(sol.prices, theta, ctx);
    return sol;
}

}  // namespace nrps
