#pragma once

// Day-by-day episodes under common random numbers, regret against the
// clairvoyant, estimation-error curves and threshold-day detection.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "nrps/demand.hpp"
#include "nrps/error.hpp"
#include "nrps/estimation.hpp"
#include "nrps/network_model.hpp"
#include "nrps/policies.hpp"
#include "nrps/pricing.hpp"

namespace nrps {

struct DayRecord {
    std::uint64_t day = 0;
    double payoff = 0.0;
    double cum_avg_payoff = 0.0;
    double regret_term = 0.0;     // Π_clair − Π_policy
    double regret_cum_avg = 0.0;  // Δ_d
    double est_error = 0.0;       // Σ_ij ‖θ̂^{d−1}_ij − θ_ij‖²
    Index active_set_size = 0;
    bool solved_today = false;
    SolverPath path = SolverPath::ClosedForm;
    double flow_imbalance = 0.0;
};

struct Trajectory {
    PolicySpec policy;
    ShockStream stream;
    std::uint64_t horizon = 0;
    std::vector<DayRecord> days;
    std::optional<std::uint64_t> d_th;
    // Solves per path, counting only days on which a problem was solved.
    std::uint64_t closed_form_solves = 0;
    std::uint64_t active_set_solves = 0;
    double max_kkt_residual = 0.0;
    // Largest |μ (p_max − p)| over solves with a binding cap.
    double max_complementarity = 0.0;
};

struct RunConfig {
    std::uint64_t horizon = 1;
    std::uint64_t replications = 1;
    std::uint64_t base_seed = 0;
    std::vector<PolicyKind> policies;
    std::uint64_t record_every = 1;
    unsigned threads = 1;
    DegenerateFallback fallback = DegenerateFallback::NearestConsistent;
    PricingOptions pricing;

    void validate() const {
        if (horizon < 1) fail(ErrorKind::Config, "horizon D must be >= 1");
        if (replications < 1) fail(ErrorKind::Config, "replications must be >= 1");
        if (record_every < 1) fail(ErrorKind::Config, "record stride must be >= 1");
        if (policies.empty()) fail(ErrorKind::Config, "policy list is empty");
    }
};

/// Σ_ij ξ_ij [min(Ψ_ij, w_ij) p_ij − w_ij c] with Ψ = α − βp + ε.
inline double realized_payoff(const Matrix& prices, const Matrix& supplies, const Matrix& shocks,
                              const Scenario& scenario, Matrix* demands = nullptr) {
    const Index n = scenario.n_locations;
    if (demands) demands->setZero(n, n);
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double psi =
                realized_demand(scenario.theta.alpha(i, j), scenario.theta.beta(i, j), prices(i, j), shocks(i, j));
            if (demands) (*demands)(i, j) = psi;
            const double w = supplies(i, j);
            total += scenario.travel_time(i, j) * (std::min(psi, w) * prices(i, j) - w * scenario.cost_c);
        }
    }
    return total;
}

/// Checks the per-decision invariants: price cap, non-negative supply, flow balance.
inline void check_decision(const Decision& d, const Scenario& scenario) {
    const Index n = scenario.n_locations;
    const double cap_tol = 1e-9 * (1.0 + scenario.p_max);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            if (d.prices(i, j) > scenario.p_max + cap_tol) {
                fail(ErrorKind::InvariantViolation, "price above p_max on link (" + std::to_string(i) + "," +
                                                        std::to_string(j) + ")");
            }
            if (d.supplies(i, j) < -1e-12) {
                fail(ErrorKind::InvariantViolation, "negative supply on link (" + std::to_string(i) + "," +
                                                        std::to_string(j) + ")");
            }
        }
    }
    const double imbalance = flow_imbalance(d.supplies);
    if (imbalance > 1e-9) {
        std::ostringstream msg;
        msg << "flow imbalance " << imbalance << " exceeds 1e-9";
        fail(ErrorKind::InvariantViolation, msg.str());
    }
}

/// Smallest day from which every recorded active set is empty through the
/// horizon; absent if the last day still has a binding cap.
inline std::optional<std::uint64_t> detect_d_th(const std::vector<Index>& active_set_sizes) {
    std::uint64_t d = active_set_sizes.size();
    while (d > 0 && active_set_sizes[d - 1] == 0) --d;
    if (d == active_set_sizes.size()) return std::nullopt;
    return d + 1;
}

inline std::optional<std::uint64_t> detect_d_th(const Trajectory& t) {
    std::vector<Index> sizes;
    sizes.reserve(t.days.size());
    for (const auto& r : t.days) sizes.push_back(r.active_set_size);
    return detect_d_th(sizes);
}

/// Δ_D = (1/D) Σ_{d ≤ D} (Π_clair^d − Π_policy^d) for every D.
inline std::vector<double> regret_curve(const Trajectory& policy, const Trajectory& clair) {
    if (!(policy.stream == clair.stream)) {
        fail(ErrorKind::StreamMismatch, "regret_curve: trajectories were generated from different shock streams");
    }
    if (policy.days.size() != clair.days.size()) {
        fail(ErrorKind::DimensionMismatch, "regret_curve: trajectories have different horizons");
    }
    std::vector<double> out(policy.days.size());
    double sum = 0.0;
    for (std::size_t d = 0; d < out.size(); ++d) {
        sum += clair.days[d].payoff - policy.days[d].payoff;
        out[d] = sum / static_cast<double>(d + 1);
    }
    return out;
}

inline std::vector<double> estimation_error_curve(const Trajectory& t) {
    std::vector<double> out;
    out.reserve(t.days.size());
    for (const auto& r : t.days) out.push_back(r.est_error);
    return out;
}

/// All policies of one replication, stepped in lockstep so each day's shock
/// matrix is drawn once and shared. A clairvoyant reference always runs to
/// provide regret; it is returned only if requested.
inline std::vector<Trajectory> run_replication(const Scenario& scenario, const std::vector<PolicySpec>& specs,
                                               std::uint64_t horizon, const ShockStream& stream,
                                               const PricingOptions& pricing = {}) {
    if (horizon < 1) fail(ErrorKind::Config, "horizon D must be >= 1");
    const Index n = scenario.n_locations;
    ClairvoyantPolicy reference(scenario, pricing);
    const Decision clair = reference.decide(1);

    std::vector<std::unique_ptr<Policy>> policies;
    std::vector<Trajectory> out;
    for (const auto& spec : specs) {
        policies.push_back(make_policy(spec, scenario, stream.seed, stream.replication, pricing));
        Trajectory t;
        t.policy = spec;
        t.stream = stream;
        t.horizon = horizon;
        t.days.reserve(horizon);
        out.push_back(std::move(t));
    }
    std::vector<double> payoff_sum(specs.size(), 0.0), regret_sum(specs.size(), 0.0);
    Matrix demands(n, n);

    for (std::uint64_t day = 1; day <= horizon; ++day) {
        const Matrix shocks = sample_shocks(scenario.shock, n, stream, day);
        double clair_payoff = 0.0;
        try {
            clair_payoff = realized_payoff(clair.prices, clair.supplies, shocks, scenario);
        } catch (const Error& e) {
            fail(e.kind(), "replication " + std::to_string(stream.replication) + ", day " + std::to_string(day) +
                               ", clairvoyant reference: " + e.what());
        }
        for (std::size_t k = 0; k < policies.size(); ++k) {
            Policy& policy = *policies[k];
            Trajectory& traj = out[k];
            try {
                DayRecord rec;
                rec.day = day;
                const Decision decision = policy.decide(day);
                // After deciding, before observing: the history covers days 1..d−1.
                rec.est_error = network_squared_error(policy.current_estimate(), scenario.theta);
                check_decision(decision, scenario);
                rec.payoff = realized_payoff(decision.prices, decision.supplies, shocks, scenario, &demands);
                policy.observe(day, decision.prices, demands);
                payoff_sum[k] += rec.payoff;
                regret_sum[k] += clair_payoff - rec.payoff;
                rec.cum_avg_payoff = payoff_sum[k] / static_cast<double>(day);
                rec.regret_term = clair_payoff - rec.payoff;
                rec.regret_cum_avg = regret_sum[k] / static_cast<double>(day);
                rec.active_set_size = decision.meta.active_set_size;
                rec.solved_today = decision.meta.solved_today;
                rec.path = decision.meta.path;
                rec.flow_imbalance = flow_imbalance(decision.supplies);
                if (rec.solved_today) {
                    (rec.path == SolverPath::ClosedForm ? traj.closed_form_solves : traj.active_set_solves) += 1;
                    traj.max_kkt_residual = std::max(traj.max_kkt_residual, decision.meta.kkt_residual);
                    if (decision.meta.active_set_size > 0)
                        traj.max_complementarity = std::max(traj.max_complementarity, decision.meta.complementarity);
                }
                traj.days.push_back(rec);
            } catch (const Error& e) {
                fail(e.kind(), "replication " + std::to_string(stream.replication) + ", day " + std::to_string(day) +
                                   ", policy " + std::string(to_string(policy.kind())) + ": " + e.what());
            }
        }
    }
    for (auto& t : out) t.d_th = detect_d_th(t);
    return out;
}

inline Trajectory run_episode(const PolicySpec& spec, const Scenario& scenario, std::uint64_t horizon,
                              const ShockStream& stream, const PricingOptions& pricing = {}) {
    return std::move(run_replication(scenario, {spec}, horizon, stream, pricing).front());
}

struct ReplicationResult {
    std::uint64_t replication = 0;
    std::vector<Trajectory> trajectories;  // in RunConfig::policies order
};

inline std::vector<PolicySpec> policy_specs(const Scenario& scenario, const RunConfig& config) {
    std::vector<PolicySpec> specs;
    for (PolicyKind k : config.policies) specs.push_back({k, scenario.rho, scenario.eta, config.fallback});
    return specs;
}

/// Runs every replication, optionally on several threads. Results are indexed
/// by replication, so the output does not depend on scheduling.
inline std::vector<ReplicationResult> run_comparison(const Scenario& scenario, const RunConfig& config) {
    config.validate();
    const auto specs = policy_specs(scenario, config);
    std::vector<ReplicationResult> results(config.replications);
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (true) {
            const std::uint64_t r = next.fetch_add(1);
            if (r >= config.replications) return;
            try {
                results[r] = {r, run_replication(scenario, specs, config.horizon, {config.base_seed, r},
                                                 config.pricing)};
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(config.replications);
                return;
            }
        }
    };

    const unsigned threads =
        std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(config.replications)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

}  // namespace nrps
