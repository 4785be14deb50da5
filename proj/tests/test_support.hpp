#pragma once

// Instance generators and oracles shared by the test binaries. Oracles avoid
// the library's own solvers: plain Gaussian elimination, grid search, and
// active-set enumeration.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "nrps/nrps.hpp"

namespace nrps::test {

inline Matrix random_offdiag(Index n, double lo, double hi, SplitMix64& gen) {
    Matrix m = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) m(i, j) = lo + (hi - lo) * gen.uniform01();
    return m;
}

/// Gaussian elimination with partial pivoting on std::vector storage.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t k = r + 1; k < n; ++k) acc -= a[r][k] * x[k];
        x[r] = acc / a[r][r];
    }
    return x;
}

/// Voltage difference for a unit current injected at i and extracted at j,
/// with node j grounded. `conductance` is symmetric with zero diagonal.
inline double nodal_resistance(const Matrix& conductance, Index i, Index j) {
    const Index n = conductance.rows();
    std::vector<Index> keep;
    for (Index k = 0; k < n; ++k)
        if (k != j) keep.push_back(k);
    const std::size_t m = keep.size();
    std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
    std::vector<double> b(m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        const Index u = keep[r];
        double degree = 0.0;
        for (Index k = 0; k < n; ++k) degree += k == u ? 0.0 : conductance(u, k);
        a[r][r] = degree;
        for (std::size_t c = 0; c < m; ++c)
            if (c != r) a[r][c] = -conductance(u, keep[c]);
        if (u == i) b[r] = 1.0;
    }
    const auto v = gauss_solve(a, b);
    for (std::size_t r = 0; r < m; ++r)
        if (keep[r] == i) return v[r];
    return 0.0;
}

/// Uniform network: every α, β, ξ equal.
inline Scenario symmetric_scenario(Index n, double alpha = 3.75, double beta = 2.5, double xi = 1.0,
                                   ShockSpec shock = ShockSpec::degenerate_zero()) {
    Scenario s;
    s.n_locations = n;
    s.travel_time = Matrix::Constant(n, n, xi);
    s.travel_time.diagonal().setZero();
    s.theta.alpha = Matrix::Constant(n, n, alpha);
    s.theta.alpha.diagonal().setZero();
    s.theta.beta = Matrix::Constant(n, n, beta);
    s.theta.beta.diagonal().setZero();
    s.bounds = {3.5, 4.0, 2.0, 3.0};
    s.shock.shared = shock;
    s.cost_c = 0.1;
    s.p_max = 1.0;
    s.rho = 2.0;
    s.eta = 0.45;
    return s;
}

/// θ uniform inside the given sub-rectangle, ξ uniform in [xi_lo, xi_hi].
inline Scenario random_scenario(Index n, SplitMix64& gen, double a_lo = 3.5, double a_hi = 4.0, double b_lo = 2.0,
                                double b_hi = 3.0, double xi_lo = 1.0, double xi_hi = 5.0) {
    Scenario s = symmetric_scenario(n);
    s.theta.alpha = random_offdiag(n, a_lo, a_hi, gen);
    s.theta.beta = random_offdiag(n, b_lo, b_hi, gen);
    s.travel_time = random_offdiag(n, xi_lo, xi_hi, gen);
    s.shock.shared = ShockSpec::truncated_gaussian(1.0, 0.5);
    return s;
}

/// Objective Σ ξ[(α − βp + ε⁻)p − (α − βp)c], written out independently.
inline double objective_oracle(const Matrix& p, const Scenario& s, double eps_minus) {
    double total = 0.0;
    for (Index i = 0; i < s.n_locations; ++i)
        for (Index j = 0; j < s.n_locations; ++j)
            if (i != j) {
                const double a = s.theta.alpha(i, j), b = s.theta.beta(i, j);
                total += s.travel_time(i, j) * ((a - b * p(i, j) + eps_minus) * p(i, j) - (a - b * p(i, j)) * s.cost_c);
            }
    return total;
}

/// N = 2 brute force: flow balance fixes p21 given p12; scan p12 on a grid.
inline Matrix grid_optimum_n2(const Scenario& s, double eps_minus, double step = 1e-5) {
    const double a12 = s.theta.alpha(0, 1), a21 = s.theta.alpha(1, 0);
    const double b12 = s.theta.beta(0, 1), b21 = s.theta.beta(1, 0);
    Matrix best = Matrix::Zero(2, 2);
    double best_obj = -std::numeric_limits<double>::infinity();
    for (double p12 = -2.0; p12 <= s.p_max + 1e-15; p12 += step) {
        const double p21 = (a21 - a12 + b12 * p12) / b21;
        if (p21 > s.p_max) continue;
        Matrix p = Matrix::Zero(2, 2);
        p(0, 1) = p12;
        p(1, 0) = p21;
        const double obj = objective_oracle(p, s, eps_minus);
        if (obj > best_obj) {
            best_obj = obj;
            best = p;
        }
    }
    // The cap on p12 itself may bind between grid points.
    Matrix p = Matrix::Zero(2, 2);
    p(0, 1) = s.p_max;
    p(1, 0) = (a21 - a12 + b12 * s.p_max) / b21;
    if (p(1, 0) <= s.p_max && objective_oracle(p, s, eps_minus) > best_obj) best = p;
    return best;
}

/// KKT point of max ½xᵀHx + gᵀx, Ex = e, x ≤ u by enumerating active sets.
/// Exponential; for M ≤ 10.
inline Vector enumerate_qp(const Matrix& h, const Vector& g, const Matrix& e, const Vector& rhs, const Vector& u) {
    const Index m = g.size(), k = rhs.size();
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<Index> act;
        for (Index i = 0; i < m; ++i)
            if (mask & (1u << i)) act.push_back(i);
        const Index a = static_cast<Index>(act.size());
        const Index dim = m + k + a;
        std::vector<std::vector<double>> mat(dim, std::vector<double>(dim, 0.0));
        std::vector<double> b(dim, 0.0);
        // Stationarity: −H x + Eᵀν + μ_A = g.
        for (Index r = 0; r < m; ++r) {
            for (Index c = 0; c < m; ++c) mat[r][c] = -h(r, c);
            for (Index c = 0; c < k; ++c) mat[r][m + c] = e(c, r);
            b[r] = g(r);
        }
        for (Index t = 0; t < a; ++t) mat[act[t]][m + k + t] = 1.0;
        for (Index r = 0; r < k; ++r) {
            for (Index c = 0; c < m; ++c) mat[m + r][c] = e(r, c);
            b[m + r] = rhs(r);
        }
        for (Index t = 0; t < a; ++t) {
            mat[m + k + t][act[t]] = 1.0;
            b[m + k + t] = u(act[t]);
        }
        std::vector<double> sol;
        try {
            sol = gauss_solve(mat, b);
        } catch (...) {
            continue;
        }
        bool ok = std::all_of(sol.begin(), sol.end(), [](double v) { return std::isfinite(v); });
        for (Index i = 0; ok && i < m; ++i) ok = sol[i] <= u(i) + 1e-9;
        for (Index t = 0; ok && t < a; ++t) ok = sol[m + k + t] >= -1e-9;
        if (!ok) continue;
        Vector x(m);
        for (Index i = 0; i < m; ++i) x(i) = sol[i];
        return x;
    }
    return Vector{};
}

}  // namespace nrps::test
