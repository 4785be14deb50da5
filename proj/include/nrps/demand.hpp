#pragma once

// Stochastic link demand: additive zero-mean shocks on a linear price response.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nrps/error.hpp"
#include "nrps/linalg.hpp"
#include "nrps/rng.hpp"

namespace nrps {

enum class ShockKind { TruncatedGaussian, Uniform, DegenerateZero };

inline std::string_view to_string(ShockKind kind) {
    switch (kind) {
        case ShockKind::TruncatedGaussian: return "truncated_gaussian";
        case ShockKind::Uniform: return "uniform";
        case ShockKind::DegenerateZero: return "degenerate_zero";
    }
    return "unknown";
}

namespace detail {

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

/// Normal(mean, sd²) conditioned on [lo, hi], sampled by rejection from the parent.
struct TruncatedNormal {
    double mean = 0.0;
    double sd = 1.0;
    double lo = -1.0;
    double hi = 1.0;

    void validate() const {
        if (!(sd > 0.0) || !(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
            fail(ErrorKind::InvalidArgument, "truncated normal needs sd > 0 and finite lo <= hi");
        }
        if (acceptance() < 1e-6) {
            fail(ErrorKind::InvalidArgument, "truncated normal interval carries almost no mass; rejection sampling would stall");
        }
    }

    double acceptance() const {
        return detail::normal_cdf((hi - mean) / sd) - detail::normal_cdf((lo - mean) / sd);
    }

    template <typename Urbg>
    double sample(Urbg& gen) const {
        if (lo == hi) return lo;
        std::normal_distribution<double> parent(mean, sd);
        while (true) {
            const double x = parent(gen);
            if (x >= lo && x <= hi) return x;
        }
    }
};

/// Distribution of a demand shock ε on [lo, hi]. The mean is zero by
/// construction: gaussian and uniform kinds require a symmetric interval.
struct ShockSpec {
    ShockKind kind = ShockKind::DegenerateZero;
    double lo = 0.0;
    double hi = 0.0;
    double mu = 0.0;
    double sigma = 0.0;

    static ShockSpec degenerate_zero() { return {}; }

    static ShockSpec uniform(double half_width) {
        ShockSpec s{ShockKind::Uniform, -half_width, half_width, 0.0, 0.0};
        s.validate();
        return s;
    }

    static ShockSpec truncated_gaussian(double sigma, double half_width) {
        ShockSpec s{ShockKind::TruncatedGaussian, -half_width, half_width, 0.0, sigma};
        s.validate();
        return s;
    }

    void validate() const {
        auto bad = [](const std::string& why) { fail(ErrorKind::InvalidScenario, "shock spec: " + why); };
        if (!(lo <= 0.0) || !(hi >= 0.0)) bad("need lo <= 0 <= hi");
        switch (kind) {
            case ShockKind::DegenerateZero:
                if (lo != 0.0 || hi != 0.0) bad("degenerate_zero must have lo = hi = 0");
                break;
            case ShockKind::Uniform:
                if (lo != -hi) bad("uniform interval must be symmetric for a zero mean");
                break;
            case ShockKind::TruncatedGaussian:
                if (mu != 0.0) bad("truncated_gaussian needs mu = 0 for a zero mean");
                if (!(sigma > 0.0)) bad("truncated_gaussian needs sigma > 0");
                if (lo != -hi) bad("truncated_gaussian interval must be symmetric for a zero mean");
                if (!(hi > 0.0)) bad("truncated_gaussian needs a non-empty interval");
                break;
        }
    }

    template <typename Urbg>
    double sample(Urbg& gen) const {
        switch (kind) {
            case ShockKind::DegenerateZero: return 0.0;
            case ShockKind::Uniform: return lo + (hi - lo) * std::generate_canonical<double, 53>(gen);
            case ShockKind::TruncatedGaussian: return TruncatedNormal{mu, sigma, lo, hi}.sample(gen);
        }
        return 0.0;
    }

    bool operator==(const ShockSpec&) const = default;
};

/// Partial expectation ε⁻ = ∫_{lo}^{0} ε dF(ε), in closed form for every kind.
inline double epsilon_minus(const ShockSpec& spec) {
    switch (spec.kind) {
        case ShockKind::DegenerateZero: return 0.0;
        case ShockKind::Uniform:
            if (spec.hi == spec.lo) return 0.0;
            return -spec.lo * spec.lo / (2.0 * (spec.hi - spec.lo));
        case ShockKind::TruncatedGaussian: {
            const double s = spec.sigma;
            const double mass = detail::normal_cdf(spec.hi / s) - detail::normal_cdf(spec.lo / s);
            return s * (detail::normal_pdf(spec.lo / s) - detail::normal_pdf(0.0)) / mass;
        }
    }
    return 0.0;
}

/// Shared shock distribution with optional per-link overrides.
struct ShockModel {
    ShockSpec shared;
    // Row-major n×n; empty means every link uses `shared`.
    std::vector<std::optional<ShockSpec>> per_link;

    const ShockSpec& spec_for(Index n, Index i, Index j) const {
        if (!per_link.empty()) {
            const auto& o = per_link[static_cast<std::size_t>(i * n + j)];
            if (o) return *o;
        }
        return shared;
    }

    /// Smallest lower shock bound over all links (ε̲ in the non-negativity condition).
    double lowest_shock(Index n) const {
        double lo = shared.lo;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j) lo = std::min(lo, spec_for(n, i, j).lo);
        return lo;
    }

    Matrix epsilon_minus_matrix(Index n) const {
        Matrix out = Matrix::Zero(n, n);
        const double shared_value = epsilon_minus(shared);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j) out(i, j) = per_link.empty() ? shared_value : epsilon_minus(spec_for(n, i, j));
        return out;
    }

    void validate(Index n) const {
        shared.validate();
        if (!per_link.empty() && per_link.size() != static_cast<std::size_t>(n * n)) {
            fail(ErrorKind::InvalidScenario, "shock overrides must cover an n×n grid");
        }
        for (const auto& o : per_link)
            if (o) o->validate();
    }

    bool operator==(const ShockModel&) const = default;
};

/// Shock substream identity: (base seed, replication). Draws for a given
/// (day, link) are a pure function of it, so all policies compared under the
/// same stream see identical shocks.
struct ShockStream {
    std::uint64_t seed = 0;
    std::uint64_t replication = 0;

    bool operator==(const ShockStream&) const = default;
};

/// One day's i.i.d. shock matrix (diagonal zero).
inline Matrix sample_shocks(const ShockModel& model, Index n, const ShockStream& stream, std::uint64_t day) {
    Matrix eps = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const ShockSpec& spec = model.spec_for(n, i, j);
            if (spec.kind == ShockKind::DegenerateZero) continue;
            auto gen = substream(stream.seed, StreamTag::Shock,
                                 {stream.replication, day, static_cast<std::uint64_t>(i * n + j)});
            eps(i, j) = spec.sample(gen);
        }
    }
    return eps;
}

inline double expected_demand(double alpha, double beta, double price) { return alpha - beta * price; }

/// Realized demand α − βp + ε. A negative value means the scenario violates the
/// non-negativity condition; it is reported, never clamped.
inline double realized_demand(double alpha, double beta, double price, double shock) {
    const double psi = alpha - beta * price + shock;
    if (psi < -1e-12 * (1.0 + std::abs(alpha))) {
        std::ostringstream msg;
        msg << "realized demand " << psi << " < 0 (alpha=" << alpha << ", beta=" << beta << ", price=" << price
            << ", shock=" << shock << ")";
        fail(ErrorKind::InvariantViolation, msg.str());
    }
    return psi;
}

}  // namespace nrps
