#pragma once

// Traffic network, demand parameters, and the resistor network whose effective
// resistances give the pricing problem its closed form.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nrps/demand.hpp"
#include "nrps/error.hpp"
#include "nrps/linalg.hpp"

namespace nrps {

inline constexpr Index kDefaultMaxLocations = 200;

/// Link demand parameters; only off-diagonal entries are meaningful.
struct DemandParams {
    Matrix alpha;
    Matrix beta;

    Index size() const { return alpha.rows(); }
    bool operator==(const DemandParams& o) const { return alpha == o.alpha && beta == o.beta; }
};

struct ParamBounds {
    double alpha_min = 0.0;
    double alpha_max = 0.0;
    double beta_min = 0.0;
    double beta_max = 0.0;

    void validate() const {
        if (!(alpha_min > 0.0 && alpha_min <= alpha_max && beta_min > 0.0 && beta_min <= beta_max)) {
            fail(ErrorKind::InvalidScenario, "parameter bounds need 0 < alpha_min <= alpha_max and 0 < beta_min <= beta_max");
        }
    }

    bool contains(double alpha, double beta) const {
        return alpha >= alpha_min && alpha <= alpha_max && beta >= beta_min && beta <= beta_max;
    }

    bool operator==(const ParamBounds&) const = default;
};

/// Everything a learning provider may see: no true demand parameters.
struct ProviderView {
    Index n = 0;
    Matrix travel_time;
    ParamBounds bounds;
    Matrix eps_minus;
    double cost_c = 0.0;
    double p_max = 0.0;
    double rho = 0.0;
    double eta = 0.0;
};

/// Immutable problem instance.
struct Scenario {
    Index n_locations = 0;
    Matrix travel_time;
    DemandParams theta;
    ParamBounds bounds;
    ShockModel shock;
    double cost_c = 0.0;
    double p_max = 0.0;
    double rho = 0.0;
    double eta = 0.0;

    Matrix eps_minus() const { return shock.epsilon_minus_matrix(n_locations); }

    ProviderView provider_view() const {
        return {n_locations, travel_time, bounds, eps_minus(), cost_c, p_max, rho, eta};
    }

    /// Throws InvalidScenario naming the first violated condition; returns
    /// non-fatal warnings (control parameters outside the analysed region).
    std::vector<std::string> validate(Index max_locations = kDefaultMaxLocations) const {
        auto bad = [](const std::string& why) { fail(ErrorKind::InvalidScenario, why); };
        const Index n = n_locations;
        if (n < 2) bad("need at least 2 locations");
        if (n > max_locations) bad("n_locations " + std::to_string(n) + " exceeds cap " + std::to_string(max_locations));
        if (travel_time.rows() != n || travel_time.cols() != n || theta.alpha.rows() != n ||
            theta.alpha.cols() != n || theta.beta.rows() != n || theta.beta.cols() != n) {
            bad("matrix dimensions do not match n_locations");
        }
        bounds.validate();
        shock.validate(n);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (i == j) continue;
                if (!(travel_time(i, j) > 0.0)) {
                    bad("travel time xi(" + std::to_string(i) + "," + std::to_string(j) + ") must be > 0");
                }
                if (!bounds.contains(theta.alpha(i, j), theta.beta(i, j))) {
                    bad("theta(" + std::to_string(i) + "," + std::to_string(j) + ") lies outside the parameter bounds");
                }
            }
        }
        if (!(cost_c > 0.0 && cost_c < p_max)) bad("need 0 < c < p_max");
        const double floor = bounds.alpha_min - bounds.beta_max * p_max + shock.lowest_shock(n);
        if (floor < -1e-12) {
            std::ostringstream msg;
            msg << "demand non-negativity violated: alpha_min - beta_max*p_max + eps_lo = " << bounds.alpha_min
                << " - " << bounds.beta_max << "*" << p_max << " + " << shock.lowest_shock(n) << " = " << floor
                << " < 0";
            bad(msg.str());
        }
        if (!(rho > 0.0)) bad("control parameter rho must be > 0");
        if (!(eta > 0.0)) bad("control parameter eta must be > 0");
        std::vector<std::string> warnings;
        if (eta >= 0.5) {
            warnings.push_back("eta = " + std::to_string(eta) + " is outside (0, 1/2); convergence guarantees do not apply");
        }
        return warnings;
    }
};

struct ResistorNetwork {
    Matrix resistance;  // symmetric, zero diagonal

    Index size() const { return resistance.rows(); }
};

struct EffectiveResistances {
    Matrix r_eff;           // R_ij
    Matrix laplacian_pinv;  // L⁺
};

/// r_ij = 1 / (β_ij/ξ_ij + β_ji/ξ_ji), one resistor per unordered pair.
inline ResistorNetwork build_resistor_network(const Matrix& beta, const Matrix& xi) {
    const Index n = beta.rows();
    if (beta.cols() != n || xi.rows() != n || xi.cols() != n) {
        fail(ErrorKind::DimensionMismatch, "build_resistor_network: beta and xi must both be n×n");
    }
    ResistorNetwork net{Matrix::Zero(n, n)};
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (!(beta(i, j) > 0.0 && beta(j, i) > 0.0 && xi(i, j) > 0.0 && xi(j, i) > 0.0)) {
                fail(ErrorKind::InvalidArgument, "build_resistor_network: beta and xi must be positive off the diagonal");
            }
            const double r = 1.0 / (beta(i, j) / xi(i, j) + beta(j, i) / xi(j, i));
            net.resistance(i, j) = r;
            net.resistance(j, i) = r;
        }
    }
    return net;
}

/// Weighted Laplacian with conductances 1/r_ij; a zero resistance entry off the
/// diagonal means "no resistor".
inline Matrix laplacian(const ResistorNetwork& net) {
    const Index n = net.size();
    if (net.resistance.cols() != n) fail(ErrorKind::DimensionMismatch, "laplacian: resistance matrix must be square");
    Matrix l = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double r = net.resistance(i, j);
            if (r < 0.0) fail(ErrorKind::InvalidArgument, "laplacian: negative resistance");
            if (r > 0.0) l(i, j) = -1.0 / r;
        }
        l(i, i) = -l.row(i).sum();
    }
    return l;
}

namespace detail {

inline bool laplacian_connected(const Matrix& l) {
    const Index n = l.rows();
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<Index> stack{0};
    seen[0] = true;
    Index count = 1;
    while (!stack.empty()) {
        const Index i = stack.back();
        stack.pop_back();
        for (Index j = 0; j < n; ++j) {
            if (!seen[static_cast<std::size_t>(j)] && i != j && l(i, j) < 0.0) {
                seen[static_cast<std::size_t>(j)] = true;
                ++count;
                stack.push_back(j);
            }
        }
    }
    return count == n;
}

}  // namespace detail

/// Moore–Penrose inverse of a connected-graph Laplacian: (L + J/n)⁻¹ − J/n.
inline Matrix laplacian_pseudoinverse(const Matrix& l) {
    const Index n = l.rows();
    if (l.cols() != n || n == 0) fail(ErrorKind::DimensionMismatch, "laplacian_pseudoinverse: need a square matrix");
    if (!detail::laplacian_connected(l)) {
        fail(ErrorKind::InvalidScenario, "Laplacian has rank < n-1 (resistor network is disconnected)");
    }
    const Matrix shift = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    Eigen::LDLT<Matrix> ldlt(l + shift);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14)) {
        fail(ErrorKind::InvalidScenario, "Laplacian has rank < n-1");
    }
    Matrix pinv = ldlt.solve(Matrix::Identity(n, n)) - shift;
    return 0.5 * (pinv + pinv.transpose());
}

/// R_ij = L⁺_ii + L⁺_jj − 2 L⁺_ij.
inline EffectiveResistances effective_resistances(const Matrix& l) {
    EffectiveResistances out;
    out.laplacian_pinv = laplacian_pseudoinverse(l);
    const Index n = l.rows();
    const Vector d = out.laplacian_pinv.diagonal();
    out.r_eff.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            out.r_eff(i, j) = i == j ? 0.0 : d(i) + d(j) - 2.0 * out.laplacian_pinv(i, j);
        }
    }
    return out;
}

/// Header-less n×n CSV of non-negative reals; the diagonal is ignored (set to 0).
inline Matrix parse_travel_time_csv(std::istream& in, const std::string& origin = "<stream>") {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto first = cell.find_first_not_of(" \t");
            const auto last = cell.find_last_not_of(" \t");
            const std::string trimmed = first == std::string::npos ? "" : cell.substr(first, last - first + 1);
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
            if (trimmed.empty() || ec != std::errc{} || ptr != trimmed.data() + trimmed.size()) {
                fail(ErrorKind::Io, origin + ":" + std::to_string(line_no) + ": not a number: '" + trimmed + "'");
            }
            if (!(value >= 0.0) || !std::isfinite(value)) {
                fail(ErrorKind::Io, origin + ":" + std::to_string(line_no) + ": travel times must be non-negative");
            }
            row.push_back(value);
        }
        if (!line.empty() && line.back() == ',') {
            fail(ErrorKind::Io, origin + ":" + std::to_string(line_no) + ": trailing comma");
        }
        rows.push_back(std::move(row));
    }
    const std::size_t n = rows.size();
    if (n == 0) fail(ErrorKind::Io, origin + ": empty travel-time CSV");
    Matrix xi = Matrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) {
            fail(ErrorKind::Io, origin + ": row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                                    " columns, expected " + std::to_string(n));
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) xi(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
        }
    }
    return xi;
}

inline Matrix read_travel_time_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open travel-time CSV '" + path + "'");
    return parse_travel_time_csv(in, path);
}

}  // namespace nrps
