#include <gtest/gtest.h>

#include <cmath>

#include "mechlaw/metrics.hpp"
#include "test_support.hpp"

using namespace mechlaw;
using testing_support::from_values;
using testing_support::sampled_sine;

namespace {

Matrix column(std::initializer_list<double> v) {
    Matrix m(v.size(), 1);
    std::size_t i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

}  // namespace

TEST(ForcePrecision, PerfectAndKnownValues) {
    const Matrix a = column({1.0, -2.0, 2.0});
    EXPECT_DOUBLE_EQ(force_precision(a, a), 100.0);
    // |pred - a| = 0.3, |a| = 3  ->  90 %.
    EXPECT_NEAR(force_precision(column({1.3, -2.0, 2.0}), a), 90.0, 1e-12);
    EXPECT_EQ(force_precision(column({100.0, 0.0, 0.0}), a), 0.0);  // floored
}

TEST(ForcePrecision, ComponentAndErrors) {
    Matrix a(2, 2), p(2, 2);
    a(0, 0) = 1.0;
    a(1, 0) = 1.0;
    a(0, 1) = 2.0;
    a(1, 1) = 0.0;
    p = a;
    p(0, 1) = 1.0;
    EXPECT_DOUBLE_EQ(force_precision_component(p, a, 0), 100.0);
    EXPECT_DOUBLE_EQ(force_precision_component(p, a, 1), 50.0);
    EXPECT_THROW((void)force_precision(Matrix(2, 1, 0.0), Matrix(2, 1, 0.0)), InvalidInput);
    EXPECT_THROW((void)force_precision(Matrix(2, 1, 0.0), Matrix(3, 1, 1.0)), InvalidInput);
}

TEST(Conservation, ConstantSeriesIsPerfect) {
    const Vector c(20, 3.0);
    const auto r = conservation_of_series(c, {{0, 10}, {10, 20}});
    EXPECT_EQ(r.pooled_std, 0.0);
    EXPECT_DOUBLE_EQ(r.pooled_abs_mean, 3.0);
    ASSERT_TRUE(r.normalized.has_value());
    EXPECT_EQ(*r.normalized, 0.0);
    for (const auto& run : r.running)
        for (double x : run) EXPECT_DOUBLE_EQ(x, 1.0);
}

TEST(Conservation, KnownStatistics) {
    const Vector c{1.0, 3.0, -4.0, -6.0};
    const auto r = conservation_of_series(c, {{0, 2}, {2, 4}}, 1);
    EXPECT_DOUBLE_EQ(r.mean_per_traj[0], 2.0);
    EXPECT_DOUBLE_EQ(r.mean_per_traj[1], -5.0);
    EXPECT_DOUBLE_EQ(r.pooled_std, 1.0);
    EXPECT_DOUBLE_EQ(r.pooled_abs_mean, 3.5);
    EXPECT_DOUBLE_EQ(*r.normalized, 1.0 / 3.5);
    EXPECT_EQ(r.running[0].size(), 2u);
    EXPECT_DOUBLE_EQ(r.running[0][0], 0.5);
}

TEST(Conservation, ZeroMeanHasNoNormalizedValue) {
    const Vector c{1.0, -1.0};
    const auto r = conservation_of_series(c, {{0, 2}});
    EXPECT_FALSE(r.normalized.has_value());
    EXPECT_THROW((void)conservation_of_series(Vector{}, {{0, 0}}), InvalidInput);
    EXPECT_THROW((void)conservation_of_series(c, {{0, 3}}), InvalidInput);
}

TEST(Reconstruction, IdenticalIsZeroAndScaleIsRelative) {
    const auto truth = sampled_sine(1.0, 1.0, 0.0, 0.1, 629);
    EXPECT_EQ(reconstruction_error(truth, truth).pooled, 0.0);
    auto shifted = truth;
    for (auto& s : shifted.states) s[0] += 0.01;
    // RMS of a unit sine over whole periods is 1/sqrt(2).
    EXPECT_NEAR(reconstruction_error(shifted, truth).pooled, 100.0 * 0.01 * std::sqrt(2.0), 1e-3);
}

TEST(Reconstruction, WrapsPeriodicDifferences) {
    const double pi = std::numbers::pi;
    const auto truth = from_values({pi - 0.01, 0.0, -1.0, 1.0}, 0.1);
    const auto recon = from_values({-pi + 0.01, 0.0, -1.0, 1.0}, 0.1);
    const auto wrap = WrapFlags::from_dims(1, std::vector<std::size_t>{0});
    EXPECT_LT(reconstruction_error(recon, truth, wrap).pooled, 1.0);
    EXPECT_GT(reconstruction_error(recon, truth).pooled, 100.0);
}

TEST(Reconstruction, Errors) {
    const auto a = from_values({0.0, 1.0, 2.0}, 0.1);
    EXPECT_THROW((void)reconstruction_error(a, from_values({0.0, 1.0}, 0.1)), InvalidInput);
    EXPECT_THROW((void)reconstruction_error(a, from_values({0.0, 1.0, 2.0}, 0.2)), InvalidInput);
    EXPECT_THROW((void)reconstruction_error(a, from_values({1.0, 1.0, 1.0}, 0.1)), InvalidInput);
}

TEST(DivergenceTime, FirstCrossing) {
    const auto a = from_values({0.0, 0.0, 0.0, 0.0, 0.0}, 0.5);
    const auto b = from_values({0.0, 0.05, 0.1, 0.2, 0.0}, 0.5);
    const auto t = divergence_time(a, b, 0.1);
    ASSERT_TRUE(t.has_value());
    EXPECT_DOUBLE_EQ(*t, 1.5);
    EXPECT_FALSE(divergence_time(a, a, 0.1).has_value());
    EXPECT_FALSE(divergence_time(a, b, 0.5).has_value());
    EXPECT_THROW((void)divergence_time(a, from_values({0.0, 0.0, 0.0}, 0.1), 0.1), InvalidInput);
}

TEST(Report, SortedKeyValueText) {
    Report r;
    r.set("zeta", 1.5);
    r.set("alpha", std::string("x"));
    r.set("mid", 0.1);
    EXPECT_EQ(r.to_text(), "alpha = x\nmid = 0.10000000000000001\nzeta = 1.5\n");
}
