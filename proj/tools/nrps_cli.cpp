// Command-line driver: run policy comparisons and export scenarios.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nrps/nrps.hpp"
#include "nrps/scenario_io.hpp"

namespace {

using namespace nrps;

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_real(const std::string& s, const char* what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        fail(ErrorKind::Config, std::string(what) + ": not a number: '" + s + "'");
    }
    return v;
}

struct RunArgs {
    std::string scenario;
    std::uint64_t horizon = 2000;
    std::uint64_t reps = 20;
    std::uint64_t seed = 1;
    std::string policies = "nrps,clairvoyant,myopic,perturbed,random";
    std::string out;
    std::uint64_t stride = 1;
    std::optional<double> eta;
    std::optional<double> rho;
    std::string sweep_eta;
    unsigned threads = 1;
    std::string fallback = "nearest_consistent";
};

void print_summary(const std::vector<ReplicationResult>& runs, const RunConfig& config, double eta) {
    std::cout << "eta=" << format_double(eta) << " D=" << config.horizon << " reps=" << config.replications << '\n';
    for (std::size_t k = 0; k < config.policies.size(); ++k) {
        std::vector<double> payoff, regret, error;
        std::size_t finite_dth = 0;
        for (const auto& rep : runs) {
            const auto& last = rep.trajectories[k].days.back();
            payoff.push_back(last.cum_avg_payoff);
            regret.push_back(last.regret_cum_avg);
            error.push_back(last.est_error);
            if (rep.trajectories[k].d_th) ++finite_dth;
        }
        const auto p = mean_and_stderr(payoff), r = mean_and_stderr(regret), e = mean_and_stderr(error);
        std::cout << "  " << to_string(config.policies[k]) << ": avg_payoff=" << p.mean << " (+-" << p.std_error
                  << ") regret=" << r.mean << " (+-" << r.std_error << ") est_error=" << e.mean << " (+-"
                  << e.std_error << ") d_th_finite=" << finite_dth << "/" << runs.size() << '\n';
    }
}

int cmd_run(const RunArgs& a) {
    LoadedScenario loaded = load_scenario(a.scenario);
    if (a.rho) loaded.scenario.rho = *a.rho;
    if (a.eta) loaded.scenario.eta = *a.eta;

    RunConfig config;
    config.horizon = a.horizon;
    config.replications = a.reps;
    config.base_seed = a.seed;
    config.record_every = a.stride;
    config.threads = a.threads;
    for (const auto& p : split_csv(a.policies)) config.policies.push_back(parse_policy_kind(p));
    if (a.fallback == "carry_forward") {
        config.fallback = DegenerateFallback::CarryForward;
    } else if (a.fallback != "nearest_consistent") {
        fail(ErrorKind::Config, "--myopic-fallback must be nearest_consistent or carry_forward");
    }
    config.validate();

    std::filesystem::path out = a.out;
    if (out.empty()) {
        const char* env = std::getenv("NRPS_OUT_DIR");
        out = env && *env ? env : "nrps_out";
    }

    std::vector<double> etas;
    for (const auto& s : split_csv(a.sweep_eta)) etas.push_back(parse_real(s, "--sweep-eta"));
    const bool sweep = !etas.empty();
    if (!sweep) etas.push_back(loaded.scenario.eta);

    for (double eta : etas) {
        LoadedScenario run = loaded;
        run.scenario.eta = eta;
        run.warnings = run.scenario.validate();
        for (const auto& w : run.warnings) std::cerr << "warning: " << one_line(w) << '\n';
        const auto results = run_comparison(run.scenario, config);
        const auto dir = sweep ? out / ("eta_" + format_double(eta)) : out;
        export_results(dir, run, config, results);
        print_summary(results, config, eta);
    }
    std::cout << "wrote " << out.string() << '\n';
    return 0;
}

int cmd_export(const std::string& scenario, const std::string& out) {
    const LoadedScenario loaded = load_scenario(scenario);
    const std::string text = scenario_to_json(loaded.scenario).dump(2) + "\n";
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        std::ofstream f(out, std::ios::binary);
        if (!f || !(f << text)) fail(ErrorKind::Io, "cannot write '" + out + "'");
    }
    return 0;
}

int cmd_inspect(const std::string& scenario) {
    const LoadedScenario loaded = load_scenario(scenario);
    const Scenario& s = loaded.scenario;
    const PricingContext ctx = PricingContext::from(s);
    const Vector v = imbalance_vector(s.theta, s.cost_c, ctx.eps_minus);
    const PricingSolution sol = solve_day(s.theta, ctx);
    Json j;
    j["config_hash"] = hex64(config_hash(s));
    j["n_locations"] = s.n_locations;
    j["epsilon_minus"] = epsilon_minus(s.shock.shared);
    j["imbalance_l1"] = v.cwiseAbs().sum();
    j["cap_condition_holds"] = cap_condition_holds(s.theta, ctx, v);
    j["clairvoyant"] = {{"solver_path", std::string(to_string(sol.path))},
                        {"active_set_size", sol.active_set.size()},
                        {"expected_objective", sol.objective},
                        {"max_price", sol.prices.maxCoeff()}};
    j["warnings"] = loaded.warnings;
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NRPS pricing and supply simulation lab"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Simulate policies on a scenario and export results");
    run_cmd->add_option("--scenario", run.scenario, "Scenario config (JSON)")->required();
    run_cmd->add_option("--D", run.horizon, "Horizon in days")->check(CLI::PositiveNumber);
    run_cmd->add_option("--reps", run.reps, "Replications")->check(CLI::PositiveNumber);
    run_cmd->add_option("--seed", run.seed, "Base seed for shocks, initial estimates and random guesses");
    run_cmd->add_option("--policies", run.policies, "Comma list of nrps,clairvoyant,myopic,perturbed,random");
    run_cmd->add_option("--out", run.out, "Output directory (default: $NRPS_OUT_DIR or ./nrps_out)");
    run_cmd->add_option("--stride", run.stride, "Record every k-th day in CSV output")->check(CLI::PositiveNumber);
    run_cmd->add_option("--eta", run.eta, "Override eta");
    run_cmd->add_option("--rho", run.rho, "Override rho");
    run_cmd->add_option("--sweep-eta", run.sweep_eta, "Comma list of eta values; one result set each");
    run_cmd->add_option("--threads", run.threads, "Worker threads for replications")->check(CLI::PositiveNumber);
    run_cmd->add_option("--myopic-fallback", run.fallback, "nearest_consistent or carry_forward");

    std::string scenario, out;
    auto* export_cmd = app.add_subcommand("export-scenario", "Write the explicit-matrix form of a scenario");
    export_cmd->add_option("--scenario", scenario, "Scenario config (JSON)")->required();
    export_cmd->add_option("--out", out, "Output file (default: stdout)");

    std::string inspect_path;
    auto* inspect_cmd = app.add_subcommand("inspect", "Validate a scenario and report its clairvoyant solution");
    inspect_cmd->add_option("--scenario", inspect_path, "Scenario config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error kind=usage message=\"" << one_line(e.what()) << "\"\n";
        return 2;
    }

    try {
        if (*run_cmd) return cmd_run(run);
        if (*export_cmd) return cmd_export(scenario, out);
        if (*inspect_cmd) return cmd_inspect(inspect_path);
    } catch (const Error& e) {
        std::cerr << "error kind=" << to_string(e.kind()) << " message=\"" << one_line(e.what()) << "\"\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error kind=internal message=\"" << one_line(e.what()) << "\"\n";
        return 1;
    }
    return 0;
}
