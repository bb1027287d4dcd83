#pragma once

// Double-gamma hemodynamic response with free time-to-peak (p1) and
// time-to-onset (p6), its sampled height vectors and their parameter
// sensitivities.

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace mmdesign::hrf {

// Span of the sampled response, in seconds.
inline constexpr double kResponseSpan = 32.0;
// Resolution of the coarse scan used to locate the normalizing maximum.
inline constexpr double kNormalizationGrid = 0.001;
// Central finite-difference step for dh/dp.
inline constexpr double kDerivativeStep = 1e-5;

struct HrfParams {
    double p1 = 6.0;  // time-to-peak shape
    double p6 = 0.0;  // time-to-onset, seconds
    double p2 = 16.0;
    double p3 = 1.0;
    double p4 = 1.0;
    double p5 = 1.0 / 6.0;

    HrfParams() = default;
    HrfParams(double peak, double onset) : p1(peak), p6(onset) { validate(); }

    void validate() const {
        if (!(p1 > 1.0)) throw ConfigError("HRF time-to-peak p1 must exceed 1");
        if (!(p6 >= 0.0)) throw ConfigError("HRF time-to-onset p6 must be nonnegative");
        if (!(p2 > 0.0 && p3 > 0.0 && p4 > 0.0))
            throw ConfigError("HRF shape parameters p2, p3, p4 must be positive");
    }

    friend bool operator==(const HrfParams&, const HrfParams&) = default;
};

enum class Param { p1, p6 };

// Gamma(alpha, scale beta) density; zero on x <= 0.
inline double gamma_pdf(double x, double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0))
        throw ConfigError("gamma_pdf requires alpha > 0 and beta > 0");
    if (x <= 0.0) return 0.0;
    // The direct product keeps a few ulp of relative error; the log form
    // loses about |exponent| ulp, which central differences with step 1e-5
    // amplify into the derivative columns. Log form only where tgamma or pow
    // could overflow.
    if (alpha < 100.0 && x / beta < 500.0)
        return std::pow(x / beta, alpha - 1.0) * std::exp(-x / beta) / (std::tgamma(alpha) * beta);
    return std::exp((alpha - 1.0) * std::log(x) - x / beta - std::lgamma(alpha) -
                    alpha * std::log(beta));
}

// Unnormalized double gamma, g0(t; p).
inline double g_raw(double t, const HrfParams& p) {
    const double x = t - p.p6;
    if (x <= 0.0) return 0.0;
    return gamma_pdf(x, p.p1 / p.p3, p.p3) - p.p5 * gamma_pdf(x, p.p2 / p.p4, p.p4);
}

namespace detail {

struct PeakKey {
    double p1, p2, p3, p4, p5;
    auto operator<=>(const PeakKey&) const = default;
};

struct Peak {
    double time;   // argmax of g0 at zero onset
    double value;  // max of g0
};

inline Peak locate_peak(const HrfParams& onset_free) {
    // coarse scan
    const auto steps = static_cast<int>(std::lround(kResponseSpan / kNormalizationGrid));
    double best_t = 0.0;
    double best_v = g_raw(0.0, onset_free);
    for (int i = 1; i <= steps; ++i) {
        const double t = i * kNormalizationGrid;
        const double v = g_raw(t, onset_free);
        if (v > best_v) {
            best_v = v;
            best_t = t;
        }
    }
    if (!(best_v > 0.0))
        throw NumericalError("HRF normalization failed: max g0 is not positive");

    // golden-section refinement around the grid maximizer
    constexpr double inv_phi = 0.6180339887498949;
    double a = std::max(0.0, best_t - kNormalizationGrid);
    double b = best_t + kNormalizationGrid;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = g_raw(c, onset_free);
    double fd = g_raw(d, onset_free);
    while (b - a > 1e-10) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g_raw(c, onset_free);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g_raw(d, onset_free);
        }
    }
    const double t_ref = 0.5 * (a + b);
    const double v_ref = g_raw(t_ref, onset_free);
    if (v_ref > best_v) return {t_ref, v_ref};
    return {best_t, best_v};
}

// The normalizing maximum is shift invariant, so it is keyed on everything
// except p6. Entries are computed outside the lock; a racing duplicate
// computes the identical value.
inline Peak cached_peak(const HrfParams& p) {
    static std::mutex mutex;
    static std::map<PeakKey, Peak> cache;
    const PeakKey key{p.p1, p.p2, p.p3, p.p4, p.p5};
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    HrfParams onset_free = p;
    onset_free.p6 = 0.0;
    const Peak peak = locate_peak(onset_free);
    std::lock_guard lock(mutex);
    cache.emplace(key, peak);
    return peak;
}

// g(x; p1, p6 = 0) with x = t - p6.
inline double shape_at(double x, const HrfParams& p, double norm) {
    if (x <= 0.0) return 0.0;
    return (gamma_pdf(x, p.p1 / p.p3, p.p3) - p.p5 * gamma_pdf(x, p.p2 / p.p4, p.p4)) / norm;
}

}  // namespace detail

// max_s g0(s; p).
inline double normalization_max(const HrfParams& p) { return detail::cached_peak(p).value; }

// Time of the peak of g(.; p), including the onset shift.
inline double peak_time(const HrfParams& p) { return detail::cached_peak(p).time + p.p6; }

// g(t; p) = g0(t; p) / max_s g0(s; p).
inline double g_normalized(double t, const HrfParams& p) {
    return detail::shape_at(t - p.p6, p, normalization_max(p));
}

inline std::size_t default_length(double delta_t) {
    return 1 + static_cast<std::size_t>(std::floor(kResponseSpan / delta_t + 1e-9));
}

struct HrfVector {
    Eigen::VectorXd heights;
    double delta_t = 0.0;
    double offset = 0.0;
};

inline void check_sampling(double delta_t, std::size_t length) {
    if (!(delta_t > 0.0)) throw ConfigError("HRF sampling interval must be positive");
    if (length < 1) throw ConfigError("HRF length must be at least 1");
}

// heights[j] = g(offset + j * delta_t; p), j = 0 .. length-1.
inline HrfVector sample_hrf(const HrfParams& p, double delta_t, double offset,
                            std::size_t length) {
    check_sampling(delta_t, length);
    const double norm = normalization_max(p);
    HrfVector out{Eigen::VectorXd(static_cast<Eigen::Index>(length)), delta_t, offset};
    for (std::size_t j = 0; j < length; ++j)
        out.heights[static_cast<Eigen::Index>(j)] =
            detail::shape_at(offset + static_cast<double>(j) * delta_t - p.p6, p, norm);
    return out;
}

inline HrfVector sample_hrf(const HrfParams& p, double delta_t) {
    return sample_hrf(p, delta_t, 0.0, default_length(delta_t));
}

// Central finite difference of the normalized g with respect to p1 or p6 at
// the sample times of sample_hrf. The p1 difference re-normalizes at each
// perturbed p1; the p6 difference reduces to a time shift since the
// normalizer does not depend on p6.
inline Eigen::VectorXd hrf_partial(const HrfParams& p, Param which, double delta_t,
                                   double offset, std::size_t length,
                                   double step = kDerivativeStep) {
    check_sampling(delta_t, length);
    Eigen::VectorXd out(static_cast<Eigen::Index>(length));
    if (which == Param::p1) {
        HrfParams up = p, down = p;
        up.p1 += step;
        down.p1 -= step;
        const double nu = normalization_max(up);
        const double nd = normalization_max(down);
        for (std::size_t j = 0; j < length; ++j) {
            const double x = offset + static_cast<double>(j) * delta_t - p.p6;
            out[static_cast<Eigen::Index>(j)] =
                (detail::shape_at(x, up, nu) - detail::shape_at(x, down, nd)) / (2.0 * step);
        }
    } else {
        const double norm = normalization_max(p);
        for (std::size_t j = 0; j < length; ++j) {
            const double x = offset + static_cast<double>(j) * delta_t - p.p6;
            // g(t; p6 + h) = G(x - h)
            out[static_cast<Eigen::Index>(j)] =
                (detail::shape_at(x - step, p, norm) - detail::shape_at(x + step, p, norm)) /
                (2.0 * step);
        }
    }
    return out;
}

// Heights and both sensitivities at one sampling pattern.
struct HrfSamples {
    Eigen::VectorXd h, dh_p1, dh_p6;
};

inline HrfSamples sample_with_partials(const HrfParams& p, double delta_t, double offset,
                                       std::size_t length) {
    return {sample_hrf(p, delta_t, offset, length).heights,
            hrf_partial(p, Param::p1, delta_t, offset, length),
            hrf_partial(p, Param::p6, delta_t, offset, length)};
}

}  // namespace mmdesign::hrf
