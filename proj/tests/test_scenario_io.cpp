#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nrps/scenario_io.hpp"
#include "test_support.hpp"

using namespace nrps;

namespace {

const std::string kScenarioDir = std::string(NRPS_SOURCE_DIR) + "/scenarios/";

Json base_config() {
    return Json::parse(R"({
      "n_locations": 3,
      "seed": 5,
      "bounds": {"alpha_min": 3.5, "alpha_max": 4.0, "beta_min": 2.0, "beta_max": 3.0},
      "alpha": {"constant": 3.75},
      "beta": {"constant": 2.5},
      "travel_time": {"synthetic": {"min": 2, "max": 30}},
      "shock": {"kind": "uniform", "half_width": 0.5},
      "economics": {"cost_c": 0.1, "p_max": 1.0},
      "control": {"rho": 2.0, "eta": 0.45}
    })");
}

ErrorKind kind_of(const Json& cfg) {
    try {
        scenario_from_json(cfg);
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::Io;  // sentinel: no error
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("nrps_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST(LoadScenario, DefaultScenario) {
    const LoadedScenario l = load_scenario(kScenarioDir + "default_n25.json");
    const Scenario& s = l.scenario;
    EXPECT_EQ(s.n_locations, 25);
    EXPECT_EQ(s.bounds, (ParamBounds{3.5, 4.0, 2.0, 3.0}));
    for (Index i = 0; i < 25; ++i)
        for (Index j = 0; j < 25; ++j) {
            if (i == j) continue;
            EXPECT_TRUE(s.bounds.contains(s.theta.alpha(i, j), s.theta.beta(i, j)));
            EXPECT_GE(s.travel_time(i, j), 2.0);
            EXPECT_LE(s.travel_time(i, j), 30.0);
            EXPECT_EQ(s.travel_time(i, j), std::round(s.travel_time(i, j)));
        }
    EXPECT_EQ(l.sampled.size(), 3u);
    EXPECT_TRUE(l.warnings.empty());
}

TEST(LoadScenario, SameSeedSameScenario) {
    const Json cfg = Json::parse(std::ifstream(kScenarioDir + "default_n25.json"));
    EXPECT_EQ(config_hash(scenario_from_json(cfg).scenario), config_hash(scenario_from_json(cfg).scenario));
    Json other = cfg;
    other["seed"] = 1;
    EXPECT_NE(config_hash(scenario_from_json(cfg).scenario), config_hash(scenario_from_json(other).scenario));
}

TEST(LoadScenario, NonNegativityBoundaryAndViolation) {
    Json cfg = base_config();
    EXPECT_NO_THROW(scenario_from_json(cfg));  // 3.5 − 3·1 − 0.5 = 0
    cfg["economics"]["p_max"] = 2.0;
    try {
        scenario_from_json(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidScenario);
        EXPECT_NE(std::string(e.what()).find("alpha_min - beta_max*p_max + eps_lo"), std::string::npos);
    }
}

TEST(LoadScenario, ExportRoundTripPreservesHash) {
    const LoadedScenario l = load_scenario(kScenarioDir + "default_n25.json");
    const Json exported = Json::parse(scenario_to_json(l.scenario).dump());
    const LoadedScenario back = scenario_from_json(exported);
    EXPECT_EQ(config_hash(back.scenario), config_hash(l.scenario));
    EXPECT_EQ(back.scenario.theta, l.scenario.theta);
    EXPECT_EQ(back.scenario.travel_time, l.scenario.travel_time);
    EXPECT_TRUE(back.sampled.empty());
}

TEST(LoadScenario, ExplicitMatrixBeatsGenerativeSpec) {
    Json cfg = base_config();
    cfg["alpha"]["matrix"] = {{0, 3.6, 3.7}, {3.8, 0, 3.9}, {3.55, 3.65, 0}};
    cfg["alpha"]["truncated_normal"] = {{"mean", 3.75}, {"spread", 1.0}};
    cfg["travel_time"]["matrix"] = {{0, 1, 2}, {3, 0, 4}, {5, 6, 0}};
    const LoadedScenario l = scenario_from_json(cfg);
    EXPECT_EQ(l.scenario.theta.alpha(1, 2), 3.9);
    EXPECT_EQ(l.scenario.travel_time(2, 1), 6.0);
    EXPECT_TRUE(l.sampled.empty());
}

TEST(LoadScenario, SpreadConvention) {
    Json var = base_config();
    var["n_locations"] = 12;
    var["alpha"] = {{"truncated_normal", {{"mean", 3.75}, {"spread", 0.0004}}}};
    Json sd = var;
    sd["spread_is"] = "std_dev";
    sd["alpha"]["truncated_normal"]["spread"] = 0.02;
    EXPECT_EQ(scenario_from_json(var).scenario.theta.alpha, scenario_from_json(sd).scenario.theta.alpha);
    const Matrix a = scenario_from_json(var).scenario.theta.alpha;
    for (Index i = 0; i < 12; ++i)
        for (Index j = 0; j < 12; ++j)
            if (i != j) {
                EXPECT_NEAR(a(i, j), 3.75, 0.15);
            }
    sd["spread_is"] = "mad";
    EXPECT_EQ(kind_of(sd), ErrorKind::Config);
}

TEST(LoadScenario, SamplingIntervalMustLieInsideBounds) {
    Json cfg = base_config();
    cfg["beta"] = {{"truncated_normal", {{"mean", 2.5}, {"spread", 1.0}, {"lo", 1.0}}}};
    EXPECT_EQ(kind_of(cfg), ErrorKind::InvalidScenario);
}

TEST(LoadScenario, TravelTimeCsvRelativeToConfig) {
    const auto dir = temp_dir("csv");
    std::ofstream(dir / "xi.csv") << "0,2,3\n4,0,5\n6,7,0\n";
    Json cfg = base_config();
    cfg.erase("n_locations");
    cfg["travel_time"] = {{"csv", "xi.csv"}};
    std::ofstream(dir / "cfg.json") << cfg.dump();
    const LoadedScenario l = load_scenario((dir / "cfg.json").string());
    EXPECT_EQ(l.scenario.n_locations, 3);
    EXPECT_EQ(l.scenario.travel_time(2, 1), 7.0);
}

TEST(LoadScenario, ErrorsAreTyped) {
    Json cfg = base_config();
    cfg["economics"].erase("cost_c");
    EXPECT_EQ(kind_of(cfg), ErrorKind::Config);
    cfg = base_config();
    cfg.erase("shock");
    EXPECT_EQ(kind_of(cfg), ErrorKind::Config);
    cfg = base_config();
    cfg["n_locations"] = 201;
    EXPECT_EQ(kind_of(cfg), ErrorKind::InvalidScenario);
    cfg = base_config();
    cfg["shock"]["kind"] = "cauchy";
    EXPECT_EQ(kind_of(cfg), ErrorKind::Config);
    try {
        load_scenario("/nonexistent/cfg.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Io);
    }
}

TEST(LoadScenario, ShockOverrides) {
    Json cfg = base_config();
    cfg["shock_overrides"] = {{{"from", 0}, {"to", 2}, {"shock", {{"kind", "degenerate_zero"}}}}};
    const Scenario s = scenario_from_json(cfg).scenario;
    EXPECT_EQ(s.eps_minus()(0, 2), 0.0);
    EXPECT_DOUBLE_EQ(s.eps_minus()(0, 1), -0.125);
    cfg["shock_overrides"][0]["to"] = 0;
    EXPECT_EQ(kind_of(cfg), ErrorKind::Config);
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(2.45), "2.45");
    EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(ResultsCsv, EmptyRunsGiveHeaderOnly) {
    std::ostringstream out;
    write_results_csv(out, {}, 1);
    EXPECT_EQ(out.str(), kResultsHeader);
}

TEST(ResultsCsv, ClairvoyantThreeDays) {
    const Scenario s = nrps::test::symmetric_scenario(2);
    RunConfig c;
    c.horizon = 3;
    c.policies = {PolicyKind::Clairvoyant};
    std::ostringstream out;
    write_results_csv(out, run_comparison(s, c), 1);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], "0,clairvoyant,1,2.45,2.45,0,0,0,1");
    EXPECT_EQ(rows[2].substr(0, 16), "0,clairvoyant,3,");
}

TEST(ResultsCsv, RowCountFollowsStride) {
    SplitMix64 gen(1);
    const Scenario s = nrps::test::random_scenario(3, gen);
    RunConfig c;
    c.horizon = 23;
    c.replications = 2;
    c.policies = {PolicyKind::Nrps, PolicyKind::Random};
    const auto runs = run_comparison(s, c);
    for (std::uint64_t stride : {1u, 5u, 23u, 50u}) {
        std::ostringstream out;
        write_results_csv(out, runs, stride);
        const std::size_t per_series = 23 / stride + (23 % stride != 0 ? 1 : 0);
        EXPECT_EQ(count_lines(out.str()), 1 + 2 * 2 * per_series) << "stride " << stride;
    }
}

TEST(ResultsCsv, ByteIdenticalAcrossRuns) {
    SplitMix64 gen(2);
    const Scenario s = nrps::test::random_scenario(4, gen);
    RunConfig c;
    c.horizon = 30;
    c.replications = 3;
    c.threads = 3;
    c.policies = {PolicyKind::Nrps, PolicyKind::Myopic};
    std::ostringstream a, b;
    write_results_csv(a, run_comparison(s, c), 1);
    write_results_csv(b, run_comparison(s, c), 1);
    EXPECT_EQ(a.str(), b.str());
}

TEST(PlotCsv, MeanAndStandardError) {
    const SeriesStats one = mean_and_stderr({2.0});
    EXPECT_EQ(one.mean, 2.0);
    EXPECT_EQ(one.std_error, 0.0);
    const SeriesStats s = mean_and_stderr({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    // sample sd sqrt(5/3), divided by sqrt(4)
    EXPECT_NEAR(s.std_error, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
}

TEST(Export, WritesAllArtifacts) {
    const LoadedScenario l = scenario_from_json(base_config());
    RunConfig c;
    c.horizon = 10;
    c.replications = 2;
    c.policies = {PolicyKind::Nrps, PolicyKind::Clairvoyant};
    const auto dir = temp_dir("export");
    export_results(dir, l, c, run_comparison(l.scenario, c));
    for (const char* f : {"results.csv", "plot.csv", "metadata.json"}) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    const Json meta = Json::parse(std::ifstream(dir / "metadata.json"));
    EXPECT_EQ(meta.at("config_hash").get<std::string>(), hex64(config_hash(l.scenario)));
    EXPECT_EQ(meta.at("horizon").get<std::uint64_t>(), 10u);
}
