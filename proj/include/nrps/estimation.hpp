#pragma once

// Per-link least-squares fit of (α, β) from (price, realized demand) pairs,
// projected onto the parameter rectangle.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "nrps/error.hpp"
#include "nrps/linalg.hpp"
#include "nrps/network_model.hpp"
#include "nrps/rng.hpp"

namespace nrps {

struct LinkRecord {
    std::uint64_t day = 0;
    double price = 0.0;
    double demand = 0.0;
};

struct LinkHistory {
    std::vector<LinkRecord> records;

    void push(std::uint64_t day, double price, double demand) {
        if (!records.empty() && day <= records.back().day) {
            fail(ErrorKind::InvalidArgument, "LinkHistory: days must be strictly increasing");
        }
        records.push_back({day, price, demand});
    }
};

struct Estimate {
    double alpha_hat = 0.0;
    double beta_hat = 0.0;
    double raw_alpha = 0.0;
    double raw_beta = 0.0;
    double determinant = 0.0;
};

struct RawFit {
    double alpha = 0.0;
    double beta = 0.0;
    double determinant = 0.0;
};

/// Normal equations of min Σ(Ψ − (a − b p))², solved as a 2×2 system
/// [[n, −Σp], [Σp, −Σp²]] (a, b) = (ΣΨ, ΣpΨ). Reference implementation; the
/// simulator uses the incremental LinkEstimator.
inline RawFit least_squares(const LinkHistory& history) {
    if (history.records.size() < 2) {
        fail(ErrorKind::DegenerateHistory, "least_squares: need at least 2 records");
    }
    double n = 0.0, sp = 0.0, spp = 0.0, sd = 0.0, spd = 0.0;
    for (const auto& r : history.records) {
        n += 1.0;
        sp += r.price;
        spp += r.price * r.price;
        sd += r.demand;
        spd += r.price * r.demand;
    }
    Eigen::Matrix2d m;
    m << n, -sp, sp, -spp;
    const Eigen::Vector2d ab = solve_2x2(m, {sd, spd});
    return {ab(0), ab(1), n * spp - sp * sp};
}

inline std::pair<double, double> project(double raw_alpha, double raw_beta, const ParamBounds& bounds) {
    return {std::clamp(raw_alpha, bounds.alpha_min, bounds.alpha_max),
            std::clamp(raw_beta, bounds.beta_min, bounds.beta_max)};
}

inline double squared_error(double alpha_hat, double beta_hat, double alpha, double beta) {
    const double da = alpha_hat - alpha;
    const double db = beta_hat - beta;
    return da * da + db * db;
}

/// Σ over links i ≠ j of the per-link squared error.
inline double network_squared_error(const DemandParams& hat, const DemandParams& truth) {
    const Index n = truth.size();
    if (hat.size() != n) fail(ErrorKind::DimensionMismatch, "network_squared_error: size mismatch");
    double total = 0.0;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j) total += squared_error(hat.alpha(i, j), hat.beta(i, j), truth.alpha(i, j), truth.beta(i, j));
    return total;
}

/// What to do when a link's history has no price dispersion.
enum class DegenerateFallback {
    // Keep the previous estimate unchanged.
    CarryForward,
    // Move to the nearest point (from the previous estimate) on the line of
    // least-squares minimizers a − b·p̄ = Ψ̄, then project.
    NearestConsistent,
};

/// Running moments of (p, Ψ) for one link; O(1) per observation and per fit.
class LinkEstimator {
public:
    void observe(double price, double demand) {
        count_ += 1.0;
        const double dp = price - mean_p_;
        mean_p_ += dp / count_;
        mean_d_ += (demand - mean_d_) / count_;
        m2_p_ += dp * (price - mean_p_);
        co_pd_ += dp * (demand - mean_d_);
    }

    std::uint64_t count() const { return static_cast<std::uint64_t>(count_); }

    /// n·Σ(p − p̄)², which equals nΣp² − (Σp)².
    double determinant() const { return count_ * m2_p_; }

    bool degenerate() const {
        if (count_ < 2.0) return true;
        const double scale = count_ * (m2_p_ + count_ * mean_p_ * mean_p_);
        return !(determinant() >= 1e-12 * scale) || m2_p_ == 0.0;
    }

    RawFit fit() const {
        if (degenerate()) fail(ErrorKind::DegenerateHistory, "link history has no price dispersion");
        const double b = -co_pd_ / m2_p_;
        return {mean_d_ + b * mean_p_, b, determinant()};
    }

    Estimate estimate(const ParamBounds& bounds) const {
        const RawFit raw = fit();
        const auto [a, b] = project(raw.alpha, raw.beta, bounds);
        return {a, b, raw.alpha, raw.beta, raw.determinant};
    }

    /// Estimate with a fallback for degenerate histories, anchored at `prev`.
    Estimate estimate_or(const ParamBounds& bounds, double prev_alpha, double prev_beta,
                         DegenerateFallback fallback) const {
        if (!degenerate()) return estimate(bounds);
        if (fallback == DegenerateFallback::NearestConsistent && count_ >= 1.0) {
            const double t = (prev_alpha - prev_beta * mean_p_ - mean_d_) / (1.0 + mean_p_ * mean_p_);
            const double ra = prev_alpha - t;
            const double rb = prev_beta + t * mean_p_;
            const auto [a, b] = project(ra, rb, bounds);
            return {a, b, ra, rb, determinant()};
        }
        return {prev_alpha, prev_beta, prev_alpha, prev_beta, determinant()};
    }

private:
    double count_ = 0.0;
    double mean_p_ = 0.0;
    double mean_d_ = 0.0;
    double m2_p_ = 0.0;
    double co_pd_ = 0.0;
};

/// One LinkEstimator per ordered link.
class NetworkEstimator {
public:
    explicit NetworkEstimator(Index n) : n_(n), links_(static_cast<std::size_t>(n * n)) {}

    Index size() const { return n_; }

    void observe(const Matrix& prices, const Matrix& demands) {
        for (Index i = 0; i < n_; ++i)
            for (Index j = 0; j < n_; ++j)
                if (i != j) at(i, j).observe(prices(i, j), demands(i, j));
    }

    LinkEstimator& at(Index i, Index j) { return links_[static_cast<std::size_t>(i * n_ + j)]; }
    const LinkEstimator& at(Index i, Index j) const { return links_[static_cast<std::size_t>(i * n_ + j)]; }

    /// Projected estimates for every link. `degenerate_links` counts links that
    /// used the fallback.
    DemandParams estimate(const ParamBounds& bounds, const DemandParams& previous, DegenerateFallback fallback,
                          Index* degenerate_links = nullptr) const {
        DemandParams out{Matrix::Zero(n_, n_), Matrix::Zero(n_, n_)};
        Index degenerate = 0;
        for (Index i = 0; i < n_; ++i) {
            for (Index j = 0; j < n_; ++j) {
                if (i == j) continue;
                const LinkEstimator& link = at(i, j);
                if (link.degenerate()) ++degenerate;
                const Estimate e = link.estimate_or(bounds, previous.alpha(i, j), previous.beta(i, j), fallback);
                out.alpha(i, j) = e.alpha_hat;
                out.beta(i, j) = e.beta_hat;
            }
        }
        if (degenerate_links) *degenerate_links = degenerate;
        return out;
    }

private:
    Index n_;
    std::vector<LinkEstimator> links_;
};

/// θ drawn uniformly from the bounds rectangle, link by link in row-major order.
inline DemandParams uniform_params(const ParamBounds& bounds, Index n, SplitMix64& gen) {
    DemandParams out{Matrix::Zero(n, n), Matrix::Zero(n, n)};
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            out.alpha(i, j) = bounds.alpha_min + (bounds.alpha_max - bounds.alpha_min) * gen.uniform01();
            out.beta(i, j) = bounds.beta_min + (bounds.beta_max - bounds.beta_min) * gen.uniform01();
        }
    }
    return out;
}

/// θ̂⁰ for a replication; shared by every learning policy in that replication.
inline DemandParams initial_estimate(const ParamBounds& bounds, Index n, std::uint64_t seed,
                                     std::uint64_t replication) {
    auto gen = substream(seed, StreamTag::InitialEstimate, {replication});
    return uniform_params(bounds, n, gen);
}

}  // namespace nrps
