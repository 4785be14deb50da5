#pragma once

// Day-by-day decision policies. Learning policies are built from a
// ProviderView and therefore cannot read the true demand parameters.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nrps/error.hpp"
#include "nrps/estimation.hpp"
#include "nrps/network_model.hpp"
#include "nrps/pricing.hpp"
#include "nrps/rng.hpp"

namespace nrps {

enum class PolicyKind { Nrps, Clairvoyant, Myopic, PerturbedMyopic, Random };

inline std::string_view to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::Nrps: return "nrps";
        case PolicyKind::Clairvoyant: return "clairvoyant";
        case PolicyKind::Myopic: return "myopic";
        case PolicyKind::PerturbedMyopic: return "perturbed";
        case PolicyKind::Random: return "random";
    }
    return "unknown";
}

inline PolicyKind parse_policy_kind(std::string_view s) {
    if (s == "nrps") return PolicyKind::Nrps;
    if (s == "clairvoyant") return PolicyKind::Clairvoyant;
    if (s == "myopic") return PolicyKind::Myopic;
    if (s == "perturbed" || s == "perturbed_myopic") return PolicyKind::PerturbedMyopic;
    if (s == "random") return PolicyKind::Random;
    fail(ErrorKind::Config, "unknown policy '" + std::string(s) + "'");
}

struct PolicySpec {
    PolicyKind kind = PolicyKind::Nrps;
    double rho = 2.0;
    double eta = 0.45;
    DegenerateFallback fallback = DegenerateFallback::NearestConsistent;
};

struct DecisionMeta {
    PolicyKind policy = PolicyKind::Nrps;
    // A day problem was solved today (false on NRPS even days and for the
    // clairvoyant after day 1).
    bool solved_today = false;
    // Offset magnitude ρ d^{−η} added to supplies today, 0 if none.
    double offset = 0.0;
    SolverPath path = SolverPath::ClosedForm;
    Index active_set_size = 0;
    bool cap_condition = false;
    double kkt_residual = 0.0;
    double complementarity = 0.0;
    // Links whose history had no price dispersion at the last estimate.
    Index degenerate_links = 0;
};

struct Decision {
    Matrix prices;
    Matrix supplies;
    DecisionMeta meta;
};

/// Offset schedule ρ d^{−η}.
inline double offset_size(double rho, double eta, std::uint64_t day) {
    return rho * std::pow(static_cast<double>(day), -eta);
}

/// Price −(ρ/β̂) d^{−η} and supply +ρ d^{−η} applied link by link.
inline Decision apply_offsets(const PricingSolution& base, const DemandParams& estimate, double rho, double eta,
                              std::uint64_t day) {
    const Index n = base.prices.rows();
    const double s = offset_size(rho, eta, day);
    Decision d{base.prices, base.supplies, {}};
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            d.prices(i, j) -= s / estimate.beta(i, j);
            d.supplies(i, j) += s;
        }
    }
    d.meta.offset = s;
    return d;
}

namespace detail {

inline Decision from_solution(const PricingSolution& sol, PolicyKind kind, bool solved_today) {
    Decision d{sol.prices, sol.supplies, {}};
    d.meta.policy = kind;
    d.meta.solved_today = solved_today;
    d.meta.path = sol.path;
    d.meta.active_set_size = static_cast<Index>(sol.active_set.size());
    d.meta.cap_condition = sol.cap_condition;
    d.meta.kkt_residual = sol.kkt_residual;
    d.meta.complementarity = sol.complementarity;
    return d;
}

inline void copy_solution_meta(Decision& d, const PricingSolution& sol, PolicyKind kind, bool solved_today) {
    d.meta.policy = kind;
    d.meta.solved_today = solved_today;
    d.meta.path = sol.path;
    d.meta.active_set_size = static_cast<Index>(sol.active_set.size());
    d.meta.cap_condition = sol.cap_condition;
    d.meta.kkt_residual = sol.kkt_residual;
    d.meta.complementarity = sol.complementarity;
}

}  // namespace detail

/// Uniform per-day interface. Days are 1-based; decide(d) is followed by
/// observe(d, ...) with that day's realized demand.
class Policy {
public:
    virtual ~Policy() = default;
    virtual PolicyKind kind() const = 0;
    virtual Decision decide(std::uint64_t day) = 0;
    virtual void observe(std::uint64_t day, const Matrix& prices, const Matrix& demands) = 0;
    /// Estimate of θ from the history so far (days before the current one).
    virtual DemandParams current_estimate() const = 0;
};

class ClairvoyantPolicy final : public Policy {
public:
    explicit ClairvoyantPolicy(const Scenario& scenario, const PricingOptions& opts = {})
        : theta_(scenario.theta), solution_(solve_day(scenario.theta, PricingContext::from(scenario), opts)) {}

    PolicyKind kind() const override { return PolicyKind::Clairvoyant; }

    Decision decide(std::uint64_t day) override {
        return detail::from_solution(solution_, PolicyKind::Clairvoyant, day == 1);
    }

    void observe(std::uint64_t, const Matrix&, const Matrix&) override {}
    DemandParams current_estimate() const override { return theta_; }
    const PricingSolution& solution() const { return solution_; }

private:
    DemandParams theta_;
    PricingSolution solution_;
};

/// Estimate-and-solve on odd days; on even days the previous odd-day solution
/// shifted by the decaying offsets.
class NrpsPolicy final : public Policy {
public:
    NrpsPolicy(ProviderView view, DemandParams initial, const PolicySpec& spec, const PricingOptions& opts = {})
        : view_(std::move(view)), ctx_(PricingContext::from(view_)), spec_(spec), opts_(opts),
          estimate_(std::move(initial)), estimator_(view_.n) {}

    PolicyKind kind() const override { return PolicyKind::Nrps; }

    Decision decide(std::uint64_t day) override {
        if (day % 2 == 1) {
            Index degenerate = 0;
            if (day > 1) estimate_ = estimator_.estimate(view_.bounds, estimate_, spec_.fallback, &degenerate);
            last_ = solve_day(estimate_, ctx_, opts_);
            Decision d = detail::from_solution(*last_, PolicyKind::Nrps, true);
            d.meta.degenerate_links = degenerate;
            return d;
        }
        if (!last_) fail(ErrorKind::InvariantViolation, "NRPS even day without a cached odd-day solution");
        Decision d = apply_offsets(*last_, estimate_, spec_.rho, spec_.eta, day);
        detail::copy_solution_meta(d, *last_, PolicyKind::Nrps, false);
        return d;
    }

    void observe(std::uint64_t, const Matrix& prices, const Matrix& demands) override {
        estimator_.observe(prices, demands);
    }

    DemandParams current_estimate() const override {
        return estimator_.estimate(view_.bounds, estimate_, DegenerateFallback::CarryForward);
    }

    const DemandParams& estimate_in_use() const { return estimate_; }

private:
    ProviderView view_;
    PricingContext ctx_;
    PolicySpec spec_;
    PricingOptions opts_;
    DemandParams estimate_;
    NetworkEstimator estimator_;
    std::optional<PricingSolution> last_;
};

/// Estimate and solve every day; optionally add the offsets every day.
class MyopicPolicy final : public Policy {
public:
    MyopicPolicy(ProviderView view, DemandParams initial, const PolicySpec& spec, bool perturbed,
                 const PricingOptions& opts = {})
        : view_(std::move(view)), ctx_(PricingContext::from(view_)), spec_(spec), opts_(opts),
          perturbed_(perturbed), estimate_(std::move(initial)), estimator_(view_.n) {}

    PolicyKind kind() const override { return perturbed_ ? PolicyKind::PerturbedMyopic : PolicyKind::Myopic; }

    Decision decide(std::uint64_t day) override {
        Index degenerate = 0;
        if (day > 1) estimate_ = estimator_.estimate(view_.bounds, estimate_, spec_.fallback, &degenerate);
        const PricingSolution sol = solve_day(estimate_, ctx_, opts_);
        Decision d = perturbed_ ? apply_offsets(sol, estimate_, spec_.rho, spec_.eta, day) : Decision{sol.prices, sol.supplies, {}};
        detail::copy_solution_meta(d, sol, kind(), true);
        d.meta.degenerate_links = degenerate;
        return d;
    }

    void observe(std::uint64_t, const Matrix& prices, const Matrix& demands) override {
        estimator_.observe(prices, demands);
    }

    DemandParams current_estimate() const override {
        return estimator_.estimate(view_.bounds, estimate_, spec_.fallback);
    }

private:
    ProviderView view_;
    PricingContext ctx_;
    PolicySpec spec_;
    PricingOptions opts_;
    bool perturbed_;
    DemandParams estimate_;
    NetworkEstimator estimator_;
};

/// Fresh uniform guess of θ every day, then solve.
class RandomPolicy final : public Policy {
public:
    RandomPolicy(ProviderView view, std::uint64_t seed, std::uint64_t replication, const PricingOptions& opts = {})
        : view_(std::move(view)), ctx_(PricingContext::from(view_)), opts_(opts), seed_(seed),
          replication_(replication) {}

    PolicyKind kind() const override { return PolicyKind::Random; }

    Decision decide(std::uint64_t day) override {
        auto gen = substream(seed_, StreamTag::RandomGuess, {replication_, day});
        guess_ = uniform_params(view_.bounds, view_.n, gen);
        return detail::from_solution(solve_day(guess_, ctx_, opts_), PolicyKind::Random, true);
    }

    void observe(std::uint64_t, const Matrix&, const Matrix&) override {}
    DemandParams current_estimate() const override { return guess_; }

private:
    ProviderView view_;
    PricingContext ctx_;
    PricingOptions opts_;
    std::uint64_t seed_;
    std::uint64_t replication_;
    DemandParams guess_;
};

/// Builds a policy for one replication. Only the clairvoyant receives the
/// full scenario; the others get its ProviderView.
inline std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const Scenario& scenario, std::uint64_t seed,
                                           std::uint64_t replication, const PricingOptions& opts = {}) {
    switch (spec.kind) {
        case PolicyKind::Clairvoyant: return std::make_unique<ClairvoyantPolicy>(scenario, opts);
        case PolicyKind::Random:
            return std::make_unique<RandomPolicy>(scenario.provider_view(), seed, replication, opts);
        default: break;
    }
    if (!(spec.rho > 0.0) || !(spec.eta > 0.0)) fail(ErrorKind::Config, "policy needs rho > 0 and eta > 0");
    ProviderView view = scenario.provider_view();
    DemandParams initial = initial_estimate(view.bounds, view.n, seed, replication);
    if (spec.kind == PolicyKind::Nrps) return std::make_unique<NrpsPolicy>(std::move(view), std::move(initial), spec, opts);
    return std::make_unique<MyopicPolicy>(std::move(view), std::move(initial), spec,
                                          spec.kind == PolicyKind::PerturbedMyopic, opts);
}

}  // namespace nrps
