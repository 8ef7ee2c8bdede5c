#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dependasim/stats.hpp"

using namespace dependasim;

TEST(Ks, IdenticalSamplesHaveZeroStatistic) {
    std::vector<int> a{1, 2, 3, 4, 5};
    auto r = ks_two_sample(a, a);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_FALSE(r.reject_01());
}

TEST(Ks, DisjointSamplesReject) {
    std::vector<int> a(50), b(50);
    for (int i = 0; i < 50; ++i) {
        a[i] = i;
        b[i] = 100 + i;
    }
    auto r = ks_two_sample(a, b);
    EXPECT_EQ(r.statistic, 1.0);
    EXPECT_TRUE(r.reject_01());
    EXPECT_NEAR(r.critical_01, 1.628 * std::sqrt(100.0 / 2500.0), 1e-12);
}

// Hand-computed: a = {1,2,3}, b = {2,4}; the ECDF gap peaks at x = 3 with 1 - 1/2.
TEST(Ks, SmallHandExample) {
    std::vector<int> a{1, 2, 3}, b{2, 4};
    EXPECT_DOUBLE_EQ(ks_two_sample(a, b).statistic, 0.5);
}

TEST(Ks, TiesHandledAsSteps) {
    std::vector<int> a{1, 1, 1, 2}, b{1, 2, 2, 2};
    EXPECT_DOUBLE_EQ(ks_two_sample(a, b).statistic, 0.5);
}

TEST(LinearFit, ExactLine) {
    std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    auto f = linear_fit(x, y);
    EXPECT_DOUBLE_EQ(f.slope, 2.0);
    EXPECT_DOUBLE_EQ(f.intercept, 1.0);
    EXPECT_EQ(f.p_two_sided, 0.0);
}

// Reference values from scipy.stats.linregress on the same points.
TEST(LinearFit, NoisyLineMatchesReference) {
    std::vector<double> x{1, 2, 3, 4, 5}, y{2.0, 4.1, 5.9, 8.2, 9.9};
    auto f = linear_fit(x, y);
    EXPECT_NEAR(f.slope, 1.99, 1e-12);
    EXPECT_NEAR(f.intercept, 0.05, 1e-12);
    EXPECT_NEAR(f.slope_se, 0.047258156262526746, 1e-12);
    EXPECT_NEAR(f.p_two_sided, 2.947547510689913e-05, 1e-12);
}

TEST(LinearFit, FlatNoiseIsNotSignificant) {
    std::vector<double> x{1, 2, 3, 4, 5, 6}, y{1, -1, 1, -1, 1, -1};
    auto f = linear_fit(x, y);
    EXPECT_GT(f.p_two_sided, 0.05);
}

TEST(LinearFit, DegenerateInputs) {
    std::vector<double> one{1};
    EXPECT_EQ(linear_fit(one, one).slope, 0.0);
    std::vector<double> x{2, 2, 2}, y{1, 2, 3};
    EXPECT_EQ(linear_fit(x, y).p_two_sided, 1.0);
}

TEST(HistogramQuantile, Median) {
    std::map<std::uint64_t, std::uint64_t> h{{1, 2}, {5, 1}, {9, 2}};
    EXPECT_EQ(histogram_quantile(h, 0.5), 5.0);
    EXPECT_EQ(histogram_quantile(h, 0.0), 1.0);
    EXPECT_EQ(histogram_quantile(h, 1.0), 9.0);
    EXPECT_TRUE(std::isnan(histogram_quantile({}, 0.5)));
}

TEST(Bimodality, TwoSeparatedClusters) {
    std::map<std::uint64_t, std::uint64_t> h;
    std::mt19937_64 rng(1);
    std::lognormal_distribution<double> lo(0.5, 0.3), hi(8.0, 0.5);
    for (int i = 0; i < 2000; ++i) ++h[static_cast<std::uint64_t>(lo(rng))];
    for (int i = 0; i < 3000; ++i) ++h[static_cast<std::uint64_t>(hi(rng))];
    auto b = bimodality(h);
    EXPECT_TRUE(b.bimodal);
    EXPECT_GT(b.ashman_d, 2.0);
    EXPECT_NEAR(b.low_weight, 0.4, 0.01);
}

TEST(Bimodality, SingleClusterIsNot) {
    std::map<std::uint64_t, std::uint64_t> h;
    std::mt19937_64 rng(2);
    std::lognormal_distribution<double> d(6.0, 1.0);
    for (int i = 0; i < 5000; ++i) ++h[static_cast<std::uint64_t>(d(rng))];
    EXPECT_FALSE(bimodality(h).bimodal);
    EXPECT_FALSE(bimodality({{3, 10}}).bimodal);
}

TEST(Bimodality, TinyMinorityIsNot) {
    std::map<std::uint64_t, std::uint64_t> h{{0, 10}, {100000, 990}};
    EXPECT_FALSE(bimodality(h).bimodal);
}
