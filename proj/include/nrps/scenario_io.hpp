#pragma once

// Scenario configuration (JSON), parameter sampling, and results export.
// See docs/scenario_schema.md for the config format.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrps/demand.hpp"
#include "nrps/error.hpp"
#include "nrps/network_model.hpp"
#include "nrps/pricing.hpp"
#include "nrps/rng.hpp"
#include "nrps/simulator.hpp"

namespace nrps {

using Json = nlohmann::json;

/// Scenario plus the provenance of its sampled parts.
struct LoadedScenario {
    Scenario scenario;
    std::uint64_t sampling_seed = 0;
    std::vector<std::string> sampled;  // which of alpha/beta/travel_time were generated
    std::vector<std::string> warnings;
};

namespace detail {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        fail(ErrorKind::Config, std::string("config key '") + key + "': " + e.what());
    }
}

template <typename T>
T require(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) fail(ErrorKind::Config, where + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        fail(ErrorKind::Config, where + "." + key + ": " + e.what());
    }
}

inline Matrix matrix_from_json(const Json& j, Index n, const std::string& where) {
    if (!j.is_array() || static_cast<Index>(j.size()) != n) {
        fail(ErrorKind::Config, where + ": expected an array of " + std::to_string(n) + " rows");
    }
    Matrix m = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Index>(row.size()) != n) {
            fail(ErrorKind::Config, where + ": row " + std::to_string(i) + " must have " + std::to_string(n) + " entries");
        }
        for (Index k = 0; k < n; ++k) {
            const Json& cell = row[static_cast<std::size_t>(k)];
            if (!cell.is_number()) fail(ErrorKind::Config, where + ": non-numeric entry");
            if (i != k) m(i, k) = cell.get<double>();
        }
    }
    return m;
}

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline ShockSpec shock_from_json(const Json& j, const std::string& where) {
    const auto kind = require<std::string>(j, "kind", where);
    if (kind == "degenerate_zero") return ShockSpec::degenerate_zero();
    if (kind == "uniform") return ShockSpec::uniform(require<double>(j, "half_width", where));
    if (kind == "truncated_gaussian") {
        if (get_or<double>(j, "mu", 0.0) != 0.0) {
            fail(ErrorKind::InvalidScenario, where + ": truncated_gaussian needs mu = 0 for a zero mean");
        }
        return ShockSpec::truncated_gaussian(require<double>(j, "sigma", where), require<double>(j, "half_width", where));
    }
    fail(ErrorKind::Config, where + ": unknown shock kind '" + kind + "'");
}

inline Json shock_to_json(const ShockSpec& s) {
    Json j{{"kind", std::string(to_string(s.kind))}};
    if (s.kind == ShockKind::Uniform) j["half_width"] = s.hi;
    if (s.kind == ShockKind::TruncatedGaussian) {
        j["sigma"] = s.sigma;
        j["half_width"] = s.hi;
    }
    return j;
}

// Per-link truncated normal draws; sd is either given directly or as a variance.
inline Matrix sample_param_matrix(const Json& spec, Index n, double lo_default, double hi_default, bool variance,
                                  std::uint64_t seed, StreamTag tag, const std::string& where) {
    TruncatedNormal tn;
    tn.mean = require<double>(spec, "mean", where);
    const double spread = require<double>(spec, "spread", where);
    if (!(spread > 0.0)) fail(ErrorKind::Config, where + ".spread must be > 0");
    tn.sd = variance ? std::sqrt(spread) : spread;
    tn.lo = get_or<double>(spec, "lo", lo_default);
    tn.hi = get_or<double>(spec, "hi", hi_default);
    if (tn.lo < lo_default || tn.hi > hi_default) {
        fail(ErrorKind::InvalidScenario, where + ": sampling interval must lie inside the parameter bounds");
    }
    try {
        tn.validate();
    } catch (const Error& e) {
        fail(ErrorKind::InvalidScenario, where + ": " + e.what());
    }
    Matrix m = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < n; ++k) {
            if (i == k) continue;
            auto gen = substream(seed, tag, {static_cast<std::uint64_t>(i * n + k)});
            m(i, k) = tn.sample(gen);
        }
    }
    return m;
}

inline Matrix synthetic_travel_times(const Json& spec, Index n, std::uint64_t seed) {
    const auto lo = get_or<std::int64_t>(spec, "min", 2);
    const auto hi = get_or<std::int64_t>(spec, "max", 30);
    const bool symmetric = get_or<bool>(spec, "symmetric", false);
    if (lo < 1 || hi < lo) fail(ErrorKind::Config, "travel_time.synthetic: need 1 <= min <= max");
    Matrix xi = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < n; ++k) {
            if (i == k || (symmetric && k < i)) continue;
            auto gen = substream(seed, StreamTag::ScenarioTravelTime, {static_cast<std::uint64_t>(i * n + k)});
            std::uniform_int_distribution<std::int64_t> dist(lo, hi);
            xi(i, k) = static_cast<double>(dist(gen));
            if (symmetric) xi(k, i) = xi(i, k);
        }
    }
    return xi;
}

}  // namespace detail

/// Builds and validates a Scenario from a parsed config. Relative CSV paths
/// resolve against `base_dir`.
inline LoadedScenario scenario_from_json(const Json& cfg, const std::filesystem::path& base_dir = {}) {
    if (!cfg.is_object()) fail(ErrorKind::Config, "scenario config must be a JSON object");
    LoadedScenario out;
    Scenario& s = out.scenario;
    out.sampling_seed = detail::get_or<std::uint64_t>(cfg, "seed", 0);
    const bool variance = [&] {
        const auto mode = detail::get_or<std::string>(cfg, "spread_is", "variance");
        if (mode == "variance") return true;
        if (mode == "std_dev") return false;
        fail(ErrorKind::Config, "spread_is must be 'variance' or 'std_dev'");
    }();

    const Json bounds = cfg.value("bounds", Json::object());
    s.bounds = {detail::require<double>(bounds, "alpha_min", "bounds"), detail::require<double>(bounds, "alpha_max", "bounds"),
                detail::require<double>(bounds, "beta_min", "bounds"), detail::require<double>(bounds, "beta_max", "bounds")};
    s.bounds.validate();

    const Json economics = cfg.value("economics", Json::object());
    s.cost_c = detail::require<double>(economics, "cost_c", "economics");
    s.p_max = detail::require<double>(economics, "p_max", "economics");
    const Json control = cfg.value("control", Json::object());
    s.rho = detail::require<double>(control, "rho", "control");
    s.eta = detail::require<double>(control, "eta", "control");

    // n comes from the key, or from whichever explicit matrix is present.
    Index n = detail::get_or<Index>(cfg, "n_locations", 0);
    const Json tt = cfg.value("travel_time", Json::object());
    Matrix csv_xi;
    if (!tt.contains("matrix") && tt.contains("csv")) {
        std::filesystem::path p = tt.at("csv").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        csv_xi = read_travel_time_csv(p.string());
        if (n == 0) n = csv_xi.rows();
    }
    if (n == 0 && tt.contains("matrix")) n = static_cast<Index>(tt.at("matrix").size());
    if (n < 2) fail(ErrorKind::Config, "n_locations must be given and >= 2");
    if (n > kDefaultMaxLocations) {
        fail(ErrorKind::InvalidScenario, "n_locations " + std::to_string(n) + " exceeds cap " +
                                             std::to_string(kDefaultMaxLocations));
    }
    s.n_locations = n;

    if (tt.contains("matrix")) {
        s.travel_time = detail::matrix_from_json(tt.at("matrix"), n, "travel_time.matrix");
    } else if (csv_xi.size() > 0) {
        if (csv_xi.rows() != n) fail(ErrorKind::Config, "travel-time CSV size does not match n_locations");
        s.travel_time = csv_xi;
    } else {
        s.travel_time = detail::synthetic_travel_times(tt.value("synthetic", Json::object()), n, out.sampling_seed);
        out.sampled.push_back("travel_time");
    }

    auto param = [&](const char* key, double lo, double hi, StreamTag tag) {
        const Json spec = cfg.value(key, Json::object());
        if (spec.contains("matrix")) return detail::matrix_from_json(spec.at("matrix"), n, std::string(key) + ".matrix");
        if (spec.contains("truncated_normal")) {
            out.sampled.emplace_back(key);
            return detail::sample_param_matrix(spec.at("truncated_normal"), n, lo, hi, variance, out.sampling_seed, tag,
                                               std::string(key) + ".truncated_normal");
        }
        if (spec.contains("constant")) {
            Matrix m = Matrix::Constant(n, n, spec.at("constant").get<double>());
            m.diagonal().setZero();
            return m;
        }
        fail(ErrorKind::Config, std::string(key) + ": need one of matrix, truncated_normal, constant");
    };
    s.theta.alpha = param("alpha", s.bounds.alpha_min, s.bounds.alpha_max, StreamTag::ScenarioAlpha);
    s.theta.beta = param("beta", s.bounds.beta_min, s.bounds.beta_max, StreamTag::ScenarioBeta);

    if (!cfg.contains("shock")) fail(ErrorKind::Config, "missing key 'shock'");
    s.shock.shared = detail::shock_from_json(cfg.at("shock"), "shock");
    if (cfg.contains("shock_overrides")) {
        s.shock.per_link.assign(static_cast<std::size_t>(n * n), std::nullopt);
        for (const Json& o : cfg.at("shock_overrides")) {
            const auto i = detail::require<Index>(o, "from", "shock_overrides");
            const auto k = detail::require<Index>(o, "to", "shock_overrides");
            if (i < 0 || k < 0 || i >= n || k >= n || i == k) fail(ErrorKind::Config, "shock_overrides: bad link index");
            s.shock.per_link[static_cast<std::size_t>(i * n + k)] =
                detail::shock_from_json(detail::require<Json>(o, "shock", "shock_overrides"), "shock_overrides.shock");
        }
    }
    out.warnings = s.validate();
    return out;
}

inline LoadedScenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open scenario config '" + path + "'");
    Json cfg;
    try {
        cfg = Json::parse(in);
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::Config, path + ": " + e.what());
    }
    return scenario_from_json(cfg, std::filesystem::path(path).parent_path());
}

/// Explicit-matrix form of a scenario; loading it reproduces the scenario.
inline Json scenario_to_json(const Scenario& s) {
    Json j;
    j["n_locations"] = s.n_locations;
    j["bounds"] = {{"alpha_min", s.bounds.alpha_min},
                   {"alpha_max", s.bounds.alpha_max},
                   {"beta_min", s.bounds.beta_min},
                   {"beta_max", s.bounds.beta_max}};
    j["economics"] = {{"cost_c", s.cost_c}, {"p_max", s.p_max}};
    j["control"] = {{"rho", s.rho}, {"eta", s.eta}};
    j["travel_time"] = {{"matrix", detail::matrix_to_json(s.travel_time)}};
    j["alpha"] = {{"matrix", detail::matrix_to_json(s.theta.alpha)}};
    j["beta"] = {{"matrix", detail::matrix_to_json(s.theta.beta)}};
    j["shock"] = detail::shock_to_json(s.shock.shared);
    if (!s.shock.per_link.empty()) {
        Json overrides = Json::array();
        for (Index i = 0; i < s.n_locations; ++i)
            for (Index k = 0; k < s.n_locations; ++k)
                if (const auto& o = s.shock.per_link[static_cast<std::size_t>(i * s.n_locations + k)])
                    overrides.push_back({{"from", i}, {"to", k}, {"shock", detail::shock_to_json(*o)}});
        j["shock_overrides"] = std::move(overrides);
    }
    return j;
}

/// FNV-1a 64 over the canonical explicit-matrix JSON.
inline std::uint64_t config_hash(const Scenario& s) {
    const std::string text = scenario_to_json(s).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

/// Shortest round-trip decimal form; locale independent.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) fail(ErrorKind::Io, "format_double failed");
    return std::string(buf, ptr);
}

inline bool keep_row(std::uint64_t day, std::uint64_t horizon, std::uint64_t stride) {
    return day % stride == 0 || day == horizon;
}

inline constexpr const char* kResultsHeader =
    "replication,policy,day,realized_payoff,cum_avg_payoff,regret_cum_avg,est_error,active_set_size,dTh_flag\n";

/// One row per kept day, ordered by (replication, policy, day).
inline void write_results_csv(std::ostream& out, const std::vector<ReplicationResult>& runs, std::uint64_t stride) {
    if (stride < 1) fail(ErrorKind::Config, "record stride must be >= 1");
    out << kResultsHeader;
    for (const auto& rep : runs) {
        for (const auto& t : rep.trajectories) {
            for (const auto& r : t.days) {
                if (!keep_row(r.day, t.horizon, stride)) continue;
                const bool after_th = t.d_th && r.day >= *t.d_th;
                out << rep.replication << ',' << to_string(t.policy.kind) << ',' << r.day << ','
                    << format_double(r.payoff) << ',' << format_double(r.cum_avg_payoff) << ','
                    << format_double(r.regret_cum_avg) << ',' << format_double(r.est_error) << ','
                    << r.active_set_size << ',' << (after_th ? 1 : 0) << '\n';
            }
        }
    }
    if (!out) fail(ErrorKind::Io, "failed writing results CSV");
}

struct SeriesStats {
    double mean = 0.0;
    double std_error = 0.0;
};

inline SeriesStats mean_and_stderr(const std::vector<double>& xs) {
    SeriesStats s;
    if (xs.empty()) return s;
    double mean = 0.0, m2 = 0.0, count = 0.0;
    for (double x : xs) {
        count += 1.0;
        const double d = x - mean;
        mean += d / count;
        m2 += d * (x - mean);
    }
    s.mean = mean;
    s.std_error = count > 1.0 ? std::sqrt(m2 / (count - 1.0) / count) : 0.0;
    return s;
}

/// Long-format replication means: policy,day,metric,mean,stderr,replications.
inline void write_plot_csv(std::ostream& out, const std::vector<ReplicationResult>& runs, std::uint64_t stride) {
    out << "policy,day,metric,mean,stderr,replications\n";
    if (runs.empty()) return;
    const std::size_t policies = runs.front().trajectories.size();
    for (std::size_t k = 0; k < policies; ++k) {
        const Trajectory& first = runs.front().trajectories[k];
        for (std::size_t d = 0; d < first.days.size(); ++d) {
            const std::uint64_t day = first.days[d].day;
            if (!keep_row(day, first.horizon, stride)) continue;
            std::vector<double> regret, error, payoff;
            for (const auto& rep : runs) {
                const DayRecord& r = rep.trajectories[k].days[d];
                regret.push_back(r.regret_cum_avg);
                error.push_back(r.est_error);
                payoff.push_back(r.cum_avg_payoff);
            }
            auto row = [&](const char* metric, const std::vector<double>& xs) {
                const auto st = mean_and_stderr(xs);
                out << to_string(first.policy.kind) << ',' << day << ',' << metric << ',' << format_double(st.mean)
                    << ',' << format_double(st.std_error) << ',' << xs.size() << '\n';
            };
            row("regret_cum_avg", regret);
            row("est_error", error);
            row("cum_avg_payoff", payoff);
        }
    }
    if (!out) fail(ErrorKind::Io, "failed writing plot CSV");
}

/// Run metadata: seeds, config hash, solver-path counts and d_Th per replication.
inline Json run_metadata(const LoadedScenario& loaded, const RunConfig& config, const std::vector<ReplicationResult>& runs) {
    const Scenario& s = loaded.scenario;
    Json j;
    j["config_hash"] = hex64(config_hash(s));
    j["sampling_seed"] = loaded.sampling_seed;
    j["sampled"] = loaded.sampled;
    j["warnings"] = loaded.warnings;
    j["base_seed"] = config.base_seed;
    j["horizon"] = config.horizon;
    j["replications"] = config.replications;
    j["record_every"] = config.record_every;
    j["rho"] = s.rho;
    j["eta"] = s.eta;
    j["n_locations"] = s.n_locations;
    j["epsilon_minus"] = epsilon_minus(s.shock.shared);
    j["perturbed_offset_schedule"] = "every_day";
    j["myopic_degenerate_fallback"] =
        config.fallback == DegenerateFallback::CarryForward ? "carry_forward" : "nearest_consistent";
    {
        const PricingContext ctx = PricingContext::from(s);
        const Vector v = imbalance_vector(s.theta, s.cost_c, ctx.eps_minus);
        const PricingSolution truth = solve_day(s.theta, ctx, config.pricing);
        j["true_theta"] = {{"cap_condition_holds", cap_condition_holds(s.theta, ctx, v)},
                           {"active_set_size", truth.active_set.size()},
                           {"solver_path", std::string(to_string(truth.path))},
                           {"expected_objective", truth.objective}};
        // The cap condition failing means binding caps are possible; no
        // theoretical result covers that regime.
        if (!cap_condition_holds(s.theta, ctx, v)) j["flags"].push_back("cap_condition_fails_for_true_theta");
    }
    Json policies = Json::array();
    for (std::size_t k = 0; k < config.policies.size(); ++k) {
        Json p;
        p["policy"] = std::string(to_string(config.policies[k]));
        std::uint64_t closed = 0, active = 0;
        Json d_th = Json::array();
        double max_kkt = 0.0, max_comp = 0.0;
        for (const auto& rep : runs) {
            const Trajectory& t = rep.trajectories[k];
            closed += t.closed_form_solves;
            active += t.active_set_solves;
            max_kkt = std::max(max_kkt, t.max_kkt_residual);
            max_comp = std::max(max_comp, t.max_complementarity);
            d_th.push_back(t.d_th ? Json(*t.d_th) : Json(nullptr));
        }
        p["solver_path_counts"] = {{"closed_form", closed}, {"active_set", active}};
        p["max_kkt_residual"] = max_kkt;
        p["max_complementarity_residual"] = max_comp;
        p["d_th"] = std::move(d_th);
        policies.push_back(std::move(p));
    }
    j["policies"] = std::move(policies);
    return j;
}

/// Writes results.csv, plot.csv and metadata.json into `dir`.
inline void export_results(const std::filesystem::path& dir, const LoadedScenario& loaded, const RunConfig& config,
                           const std::vector<ReplicationResult>& runs) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory '" + dir.string() + "': " + ec.message());
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) fail(ErrorKind::Io, "cannot open '" + (dir / name).string() + "' for writing");
        return f;
    };
    {
        auto f = open("results.csv");
        write_results_csv(f, runs, config.record_every);
    }
    {
        auto f = open("plot.csv");
        write_plot_csv(f, runs, config.record_every);
    }
    {
        auto f = open("metadata.json");
        f << run_metadata(loaded, config, runs).dump(2) << '\n';
        if (!f) fail(ErrorKind::Io, "failed writing metadata.json");
    }
}

}  // namespace nrps
