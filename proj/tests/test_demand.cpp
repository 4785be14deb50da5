#include <gtest/gtest.h>

#include <cmath>

#include "nrps/demand.hpp"

using namespace nrps;

namespace {

const ShockSpec kDefaultShock = ShockSpec::truncated_gaussian(1.0, 0.5);

}  // namespace

TEST(Shocks, DegenerateIsZero) {
    ShockModel model{ShockSpec::degenerate_zero(), {}};
    EXPECT_EQ(sample_shocks(model, 4, {1, 0}, 1), Matrix::Zero(4, 4));
}

TEST(Shocks, TruncatedGaussianMeanAndSupport) {
    auto gen = substream(99, StreamTag::Shock, {0});
    const int draws = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int k = 0; k < draws; ++k) {
        const double x = kDefaultShock.sample(gen);
        ASSERT_GE(x, -0.5);
        ASSERT_LE(x, 0.5);
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / draws;
    const double sd = std::sqrt(sum_sq / draws - mean * mean);
    EXPECT_LE(std::abs(mean), 3.0 * sd / std::sqrt(static_cast<double>(draws)));
}

TEST(Shocks, SampledMatrixWithinBoundsAndZeroDiagonal) {
    ShockModel model{kDefaultShock, {}};
    for (std::uint64_t day = 1; day <= 20; ++day) {
        const Matrix eps = sample_shocks(model, 6, {7, 2}, day);
        EXPECT_EQ(eps.diagonal(), Vector::Zero(6));
        EXPECT_LE(eps.cwiseAbs().maxCoeff(), 0.5);
    }
}

TEST(Shocks, CommonRandomNumbers) {
    ShockModel model{kDefaultShock, {}};
    EXPECT_EQ(sample_shocks(model, 5, {3, 1}, 10), sample_shocks(model, 5, {3, 1}, 10));
    EXPECT_NE(sample_shocks(model, 5, {3, 1}, 10), sample_shocks(model, 5, {3, 1}, 11));
    EXPECT_NE(sample_shocks(model, 5, {3, 1}, 10), sample_shocks(model, 5, {3, 2}, 10));
}

TEST(Shocks, PerLinkOverride) {
    ShockModel model{kDefaultShock, std::vector<std::optional<ShockSpec>>(9)};
    model.per_link[1] = ShockSpec::degenerate_zero();  // link (0, 1)
    model.per_link[3] = ShockSpec::uniform(2.0);       // link (1, 0)
    const Matrix eps = sample_shocks(model, 3, {1, 0}, 1);
    EXPECT_EQ(eps(0, 1), 0.0);
    EXPECT_EQ(model.lowest_shock(3), -2.0);
    EXPECT_DOUBLE_EQ(model.epsilon_minus_matrix(3)(1, 0), -0.5);
    EXPECT_DOUBLE_EQ(model.epsilon_minus_matrix(3)(0, 1), 0.0);
}

TEST(ShockSpec, RejectsNonZeroMean) {
    ShockSpec s{ShockKind::Uniform, -0.5, 0.3, 0.0, 0.0};
    EXPECT_THROW(s.validate(), Error);
    ShockSpec g{ShockKind::TruncatedGaussian, -0.5, 0.5, 0.1, 1.0};
    EXPECT_THROW(g.validate(), Error);
    EXPECT_THROW(ShockSpec::truncated_gaussian(0.0, 0.5), Error);
}

TEST(EpsilonMinus, Degenerate) { EXPECT_EQ(epsilon_minus(ShockSpec::degenerate_zero()), 0.0); }

TEST(EpsilonMinus, UniformIsMinusQuarterWidth) {
    for (double a : {0.1, 0.5, 2.0}) EXPECT_NEAR(epsilon_minus(ShockSpec::uniform(a)), -a / 4.0, 1e-15);
}

TEST(EpsilonMinus, TruncatedGaussianMatchesMonteCarlo) {
    auto gen = substream(2024, StreamTag::Shock, {1});
    const int draws = 10'000'000;
    double sum = 0.0;
    for (int k = 0; k < draws; ++k) sum += std::min(kDefaultShock.sample(gen), 0.0);
    const double value = epsilon_minus(kDefaultShock);
    EXPECT_NEAR(value, sum / draws, 1e-3);
    EXPECT_LE(value, 0.0);
    EXPECT_GE(value, -0.5);
}

TEST(ExpectedDemand, Examples) {
    EXPECT_DOUBLE_EQ(expected_demand(3.75, 2.5, 0.8), 1.75);
    EXPECT_DOUBLE_EQ(expected_demand(3.2, 1.1, 0.0), 3.2);
    EXPECT_DOUBLE_EQ(expected_demand(3.5, 3.0, 1.0), 0.5);
}

TEST(RealizedDemand, Examples) {
    EXPECT_DOUBLE_EQ(realized_demand(3.75, 2.5, 0.8, 0.3), 2.05);
    EXPECT_EQ(realized_demand(3.75, 2.5, 0.8, 0.0), expected_demand(3.75, 2.5, 0.8));
    EXPECT_EQ(realized_demand(3.5, 3.0, 1.0, -0.5), 0.0);
}

TEST(RealizedDemand, DifferenceIsTheShock) {
    auto gen = substream(1, StreamTag::Shock, {2});
    for (int k = 0; k < 100; ++k) {
        const double eps = kDefaultShock.sample(gen);
        EXPECT_NEAR(realized_demand(3.7, 2.2, 0.6, eps) - expected_demand(3.7, 2.2, 0.6), eps, 1e-15);
    }
}

TEST(RealizedDemand, NegativeIsInvariantViolation) {
    try {
        realized_demand(3.5, 3.0, 1.2, -0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvariantViolation);
    }
}

TEST(RealizedDemand, EmpiricalMeanConvergesToExpected) {
    ShockModel model{kDefaultShock, {}};
    const int days = 20000;
    double sum = 0.0, sum_sq = 0.0;
    for (int d = 1; d <= days; ++d) {
        const double psi = realized_demand(3.75, 2.5, 0.8, sample_shocks(model, 2, {5, 0}, d)(0, 1));
        sum += psi;
        sum_sq += psi * psi;
    }
    const double mean = sum / days;
    const double sd = std::sqrt(sum_sq / days - mean * mean);
    EXPECT_LE(std::abs(mean - 1.75), 3.0 * sd / std::sqrt(static_cast<double>(days)));
}

// E{min(α − βp + ε, α − βp)} = α − βp + ε⁻.
TEST(RealizedDemand, ExpectedShortfallUsesEpsilonMinus) {
    auto gen = substream(17, StreamTag::Shock, {3});
    const double base = expected_demand(3.75, 2.5, 0.8);
    const int draws = 2'000'000;
    double sum = 0.0;
    for (int k = 0; k < draws; ++k) sum += std::min(base + kDefaultShock.sample(gen), base);
    EXPECT_NEAR(sum / draws, base + epsilon_minus(kDefaultShock), 1e-3);
}
