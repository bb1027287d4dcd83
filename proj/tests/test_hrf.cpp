#include <gtest/gtest.h>

#include <cmath>

#include "mmdesign/criteria.hpp"
#include "mmdesign/hrf.hpp"
#include "oracle.hpp"

using namespace mmdesign;
using hrf::HrfParams;

TEST(GammaPdf, ExponentialDensityAtOne) { EXPECT_NEAR(hrf::gamma_pdf(1.0, 1.0, 1.0), std::exp(-1.0), 1e-15); }

TEST(GammaPdf, VanishesOffSupport) {
    EXPECT_EQ(hrf::gamma_pdf(-0.5, 6.0, 1.0), 0.0);
    EXPECT_EQ(hrf::gamma_pdf(0.0, 6.0, 1.0), 0.0);
}

TEST(GammaPdf, ShapeSixAtFive) {
    EXPECT_NEAR(hrf::gamma_pdf(5.0, 6.0, 1.0), std::pow(5.0, 5) * std::exp(-5.0) / 120.0, 1e-14);
    EXPECT_NEAR(hrf::gamma_pdf(5.0, 6.0, 1.0), 0.175467, 5e-7);
}

TEST(GammaPdf, RejectsBadParameters) {
    EXPECT_THROW(hrf::gamma_pdf(1.0, 0.0, 1.0), ConfigError);
    EXPECT_THROW(hrf::gamma_pdf(1.0, 1.0, -1.0), ConfigError);
}

TEST(GRaw, KnownValues) {
    const HrfParams p(6.0, 0.0);
    EXPECT_EQ(hrf::g_raw(0.0, p), 0.0);
    EXPECT_LT(std::abs(hrf::g_raw(100.0, p)), 1e-10);
    EXPECT_NEAR(hrf::g_raw(5.0, p), hrf::gamma_pdf(5, 6, 1) - hrf::gamma_pdf(5, 16, 1) / 6.0, 1e-16);
}

TEST(HrfParams, Validation) {
    EXPECT_THROW(HrfParams(1.0, 0.0), ConfigError);
    EXPECT_THROW(HrfParams(6.0, -0.1), ConfigError);
    EXPECT_NO_THROW(HrfParams(12.0, 5.0));
}

TEST(GNormalized, ValuesAgainstBruteForceScan) {
    const HrfParams p(6.0, 0.0);
    double scan_max = 0.0;
    for (int i = 0; i <= 32000; ++i) scan_max = std::max(scan_max, hrf::g_raw(i * 0.001, p));
    EXPECT_EQ(hrf::g_normalized(0.0, p), 0.0);
    EXPECT_NEAR(hrf::g_normalized(5.0, p), hrf::g_raw(5.0, p) / scan_max, 1e-7);
    EXPECT_NEAR(hrf::g_normalized(hrf::peak_time(p), p), 1.0, 1e-12);
}

TEST(GNormalized, MaximumIsOneOverParameterBox) {
    for (const auto& p : p_grid(0.5)) {
        double grid_max = 0.0;
        for (int i = 0; i <= 32000; ++i) grid_max = std::max(grid_max, hrf::g_normalized(i * 0.001, p));
        // the refined maximizer sits between grid points
        EXPECT_LE(grid_max, 1.0 + 1e-12);
        EXPECT_GE(grid_max, 1.0 - 1e-6);
        EXPECT_NEAR(hrf::g_normalized(hrf::peak_time(p), p), 1.0, 1e-12);
    }
}

TEST(GNormalized, ShiftIsExact) {
    for (double p6 : {0.3, 1.0, 2.0})
        for (double t : {0.5, 3.0, 7.25, 15.0}) {
            EXPECT_EQ(hrf::g_normalized(t, HrfParams(7.0, p6)), hrf::g_normalized(t - p6, HrfParams(7.0, 0.0)));
        }
}

TEST(GNormalized, PeakLocationMatchesFineScan) {
    for (double p1 : {6.0, 7.3, 9.0}) {
        const HrfParams p(p1, 0.0);
        double best_t = 0.0, best = -1.0;
        for (int i = 0; i <= 320000; ++i) {
            const double v = hrf::g_raw(i * 1e-4, p);
            if (v > best) best = v, best_t = i * 1e-4;
        }
        EXPECT_NEAR(hrf::peak_time(p), best_t, 0.05);
    }
}

TEST(GNormalized, PeakMovesRightWithP1) {
    double last = 0.0;
    for (double p1 = 6.0; p1 <= 9.0 + 1e-9; p1 += 0.1) {
        const double t = hrf::peak_time(HrfParams(p1, 0.0));
        EXPECT_GE(t, last);
        last = t;
    }
}

TEST(GNormalized, CacheHitIsBitIdentical) {
    const HrfParams p(8.123, 0.0);
    const double first = hrf::normalization_max(p);
    EXPECT_EQ(hrf::detail::locate_peak(p).value, first);
    EXPECT_EQ(hrf::normalization_max(p), first);
}

TEST(SampleHrf, LengthsAndFirstElement) {
    const HrfParams p(6.0, 0.0);
    const auto h = hrf::sample_hrf(p, 2.0);
    EXPECT_EQ(h.heights.size(), 17);
    EXPECT_EQ(h.heights[0], 0.0);
    EXPECT_EQ(hrf::sample_hrf(p, 2.5).heights.size(), 13);
    EXPECT_EQ(hrf::sample_hrf(p, 2.5, 1.25, hrf::default_length(2.5)).heights.size(), 13);
    const auto shifted = hrf::sample_hrf(p, 2.5, 1.25, 13);
    for (Eigen::Index j = 0; j < 13; ++j) EXPECT_EQ(shifted.heights[j], hrf::g_normalized(1.25 + 2.5 * j, p));
}

TEST(SampleHrf, RejectsBadSampling) {
    EXPECT_THROW(hrf::sample_hrf(HrfParams(), 0.0, 0.0, 5), ConfigError);
    EXPECT_THROW(hrf::sample_hrf(HrfParams(), 1.0, 0.0, 0), ConfigError);
}

TEST(SampleHrf, AgreesWithIndependentImplementation) {
    for (const auto& p : p_grid(1.0)) {
        const auto h = hrf::sample_hrf(p, 2.0);
        for (Eigen::Index j = 0; j < h.heights.size(); ++j)
            EXPECT_NEAR(h.heights[j], oracle::hrf(2.0 * j, p.p1, p.p6), 1e-12);
    }
}

TEST(HrfPartial, FirstElementIsZero) {
    const HrfParams p(6.0, 0.0);
    EXPECT_EQ(hrf::hrf_partial(p, hrf::Param::p1, 2.0, 0.0, 17)[0], 0.0);
}

TEST(HrfPartial, OnsetDerivativeIsNegativeTimeDerivative) {
    const HrfParams p(7.0, 1.0);
    const auto d6 = hrf::hrf_partial(p, hrf::Param::p6, 0.5, 0.25, 60);
    const double eps = 1e-5;
    for (Eigen::Index j = 0; j < 60; ++j) {
        const double t = 0.25 + 0.5 * j;
        const double dt = (hrf::g_normalized(t + eps, p) - hrf::g_normalized(t - eps, p)) / (2 * eps);
        EXPECT_NEAR(d6[j], -dt, 1e-4);
    }
}

TEST(HrfPartial, StepHalvingConverges) {
    for (auto which : {hrf::Param::p1, hrf::Param::p6}) {
        const HrfParams p(7.4, 0.6);
        const auto a = hrf::hrf_partial(p, which, 2.0, 0.0, 17, 1e-5);
        const auto b = hrf::hrf_partial(p, which, 2.0, 0.0, 17, 1e-6);
        for (Eigen::Index j = 0; j < 17; ++j)
            if (std::abs(a[j]) > 1e-6) EXPECT_LT(std::abs(a[j] - b[j]) / std::abs(a[j]), 1e-5);
    }
}

TEST(HrfPartial, MatchesRichardsonExtrapolation) {
    // D(h) = (g(p+h) - g(p-h)) / 2h; R = (4 D(h/2) - D(h)) / 3
    for (auto which : {hrf::Param::p1, hrf::Param::p6}) {
        const HrfParams p(6.8, 0.4);
        const auto fd = hrf::hrf_partial(p, which, 2.0, 0.0, 17);
        for (Eigen::Index j = 1; j < 17; ++j) {
            const double t = 2.0 * j;
            auto central = [&](double h) {
                const double up = which == hrf::Param::p1 ? oracle::hrf(t, p.p1 + h, p.p6) : oracle::hrf(t, p.p1, p.p6 + h);
                const double dn = which == hrf::Param::p1 ? oracle::hrf(t, p.p1 - h, p.p6) : oracle::hrf(t, p.p1, p.p6 - h);
                return (up - dn) / (2 * h);
            };
            const double rich = (4.0 * central(1e-3) - central(2e-3)) / 3.0;
            if (std::abs(rich) > 1e-6) EXPECT_LT(std::abs(fd[j] - rich) / std::abs(rich), 1e-4) << j;
        }
    }
}
