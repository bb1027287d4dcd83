#pragma once

// Parameter grids over amplitude directions and HRF shapes, and the design
// criteria built on them: worst-case Phi_A, relative efficiency against
// locally optimal designs, and the permutation ratios R_g.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "design.hpp"
#include "errors.hpp"
#include "glsmodel.hpp"
#include "hrf.hpp"

namespace mmdesign {

using ThetaVector = Eigen::VectorXd;
using ThetaList = std::vector<ThetaVector>;

inline constexpr double kPi = std::numbers::pi;

// Hyperspherical coordinates -> unit vector with Q = phi.size() + 1 entries:
// theta_1 = cos phi_1, theta_q = cos phi_q prod_{i<q} sin phi_i,
// theta_Q = prod sin phi_i.
inline ThetaVector angles_to_theta(const std::vector<double>& phi) {
    const auto q = static_cast<Eigen::Index>(phi.size() + 1);
    ThetaVector theta(q);
    double sin_prod = 1.0;
    for (Eigen::Index i = 0; i + 1 < q; ++i) {
        theta[i] = std::cos(phi[static_cast<std::size_t>(i)]) * sin_prod;
        sin_prod *= std::sin(phi[static_cast<std::size_t>(i)]);
    }
    theta[q - 1] = sin_prod;
    return theta;
}

// Multiples of step inside [lo, hi] (anchored at 0), plus the endpoints that
// are requested. Sorted ascending, near-duplicates merged.
inline std::vector<double> anchored_range(double lo, double hi, double step, bool include_lo, bool include_hi) {
    if (!(step > 0.0)) throw ConfigError("grid step must be positive");
    constexpr double tol = 1e-9;
    std::vector<double> v;
    const auto k0 = static_cast<long long>(std::ceil(lo / step - tol));
    const auto k1 = static_cast<long long>(std::floor(hi / step + tol));
    for (long long k = k0; k <= k1; ++k) {
        const double x = static_cast<double>(k) * step;
        if (!include_lo && x <= lo + tol) continue;
        if (!include_hi && x >= hi - tol) continue;
        v.push_back(x);
    }
    if (include_lo) v.push_back(lo);
    if (include_hi) v.push_back(hi);
    for (double& x : v) {
        if (std::abs(x - lo) <= tol) x = lo;
        if (std::abs(x - hi) <= tol) x = hi;
    }
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

namespace detail {

inline void push_unique(ThetaList& list, const ThetaVector& t) {
    for (const auto& u : list)
        if ((u - t).cwiseAbs().maxCoeff() < 1e-12) return;
    list.push_back(t);
}

}  // namespace detail

// Unit hemisphere: every phi_i in (-pi/2, pi/2] on a grid anchored at 0.
// Q = 1 gives {1}.
inline ThetaList full_theta_grid(int q_types, double step) {
    if (q_types < 1) throw ConfigError("Q must be at least 1");
    if (q_types == 1) return {ThetaVector::Ones(1)};
    const std::vector<double> axis = anchored_range(-kPi / 2, kPi / 2, step, false, true);
    const auto dims = static_cast<std::size_t>(q_types - 1);
    std::vector<std::size_t> idx(dims, 0);
    ThetaList out;
    for (;;) {
        std::vector<double> phi(dims);
        for (std::size_t i = 0; i < dims; ++i) phi[i] = axis[idx[i]];
        detail::push_unique(out, angles_to_theta(phi));
        std::size_t i = dims;
        while (i > 0 && ++idx[i - 1] == axis.size()) idx[--i] = 0;
        if (i == 0) break;
    }
    return out;
}

// Reduced direction set whose signed permutation images cover the
// hemisphere: theta_1 >= |theta_2| (Q = 2) and theta_1 >= |theta_2| >=
// |theta_3| (Q = 3).
inline ThetaList theta0_grid(int q_types, double step) {
    if (q_types == 2) {
        ThetaList out;
        for (double phi : anchored_range(-kPi / 4, kPi / 4, step, true, true))
            detail::push_unique(out, angles_to_theta({phi}));
        return out;
    }
    if (q_types == 3) {
        ThetaList out;
        const double phi1_max = std::acos(1.0 / std::sqrt(3.0));
        for (double phi1 : anchored_range(0.0, phi1_max, step, true, true)) {
            double kappa = 0.0;
            if (phi1 > kPi / 4) kappa = std::acos(std::clamp(std::cos(phi1) / std::sin(phi1), -1.0, 1.0));
            for (double phi2 : anchored_range(kappa, kPi / 4, step, true, true)) {
                const double a = std::cos(phi1);
                const double b = std::sin(phi1) * std::cos(phi2);
                const double c = std::sin(phi1) * std::sin(phi2);
                for (int s2 : {1, -1})
                    for (int s3 : {1, -1}) {
                        ThetaVector t(3);
                        t << a, s2 * b, s3 * c;
                        detail::push_unique(out, t);
                    }
            }
        }
        return out;
    }
    throw ConfigError("reduced direction set is only defined for Q = 2 or 3; use the full grid");
}

inline constexpr double kP1Min = 6.0, kP1Max = 9.0, kP6Min = 0.0, kP6Max = 2.0;

// HRF parameter grid over [6, 9] x [0, 2] anchored at (6, 0), endpoints
// included; p1 varies slowest.
inline std::vector<hrf::HrfParams> p_grid_axes(double p1_step, double p6_step) {
    if (!(p1_step > 0.0) || !(p6_step > 0.0)) throw ConfigError("p grid step must be positive");
    auto axis = [](double lo, double hi, double step) {
        std::vector<double> v;
        const auto n = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
        for (long long k = 0; k <= n; ++k) v.push_back(lo + static_cast<double>(k) * step);
        if (hi - v.back() > 1e-9) v.push_back(hi);
        else v.back() = hi;
        return v;
    };
    std::vector<hrf::HrfParams> out;
    for (double p1 : axis(kP1Min, kP1Max, p1_step))
        for (double p6 : axis(kP6Min, kP6Max, p6_step)) out.emplace_back(p1, p6);
    return out;
}

inline std::vector<hrf::HrfParams> p_grid(double step) {
    return p_grid_axes(step, step);
}

// n1 x n6 points evenly spaced over the parameter box, endpoints included.
inline std::vector<hrf::HrfParams> p_grid_counts(std::size_t n1, std::size_t n6) {
    if (n1 < 2 || n6 < 2) throw ConfigError("p grid needs at least two values per axis");
    return p_grid_axes((kP1Max - kP1Min) / static_cast<double>(n1 - 1), (kP6Max - kP6Min) / static_cast<double>(n6 - 1));
}

struct GridResolution {
    double p_step;
    double phi_step;
};

inline constexpr GridResolution kSearchGrid{0.2, 0.1 * kPi};
inline constexpr GridResolution kComparisonGrid{0.1, 0.05 * kPi};

// Points are ordered p-major: index = p_index * thetas.size() + theta_index.
struct GridPoint {
    std::size_t p_index = 0;
    std::size_t theta_index = 0;
};

struct GridMin {
    double value = std::numeric_limits<double>::infinity();
    GridPoint at;
};

// Phi_A at every (p, theta) point of the evaluator's bank x thetas.
inline std::vector<double> phi_a_values(const Evaluator& ev, const PreparedDesign& pd, const ThetaList& thetas) {
    const auto moments = ev.all_moments(pd);
    std::vector<double> out;
    out.reserve(moments.size() * thetas.size());
    for (std::size_t i = 0; i < moments.size(); ++i)
        for (const auto& t : thetas) out.push_back(ev.phi_a(pd, moments[i], t, i));
    return out;
}

// Minimum of values[i] / denominators[i] (denominators empty -> plain
// minimum); the first minimizer in grid order wins ties.
inline GridMin grid_min(const std::vector<double>& values, std::size_t theta_count,
                        const std::vector<double>& denominators = {}) {
    GridMin best;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = denominators.empty() ? values[i] : values[i] / denominators[i];
        if (v < best.value) best = {v, {i / theta_count, i % theta_count}};
    }
    return best;
}

inline GridMin min_phi_a(const Evaluator& ev, const PreparedDesign& pd, const ThetaList& thetas) {
    if (thetas.empty() || ev.point_count() == 0) throw ConfigError("empty parameter grid");
    return grid_min(phi_a_values(ev, pd, thetas), thetas.size());
}

inline GridMin min_phi_a(const Evaluator& ev, const Design& d, const ThetaList& thetas) {
    return min_phi_a(ev, ev.prepare(d), thetas);
}

// Locally optimal designs keyed by amplitude direction and HRF parameters.
// Scaling theta by any nonzero c (including -1) maps to the same entry.
class LocalOptTable {
public:
    struct Entry {
        ThetaVector theta;
        hrf::HrfParams p;
        double phi_a = 0.0;
        std::vector<int> design;
    };

    using Key = std::tuple<std::vector<std::int64_t>, std::int64_t, std::int64_t>;

    static Key key(const ThetaVector& theta, const hrf::HrfParams& p) {
        auto quant = [](double x) { return static_cast<std::int64_t>(std::llround(x * 1e9)); };
        std::vector<std::int64_t> dir(static_cast<std::size_t>(theta.size()), 0);
        const double norm = theta.norm();
        if (norm > 1e-12) {
            ThetaVector u = theta / norm;
            for (Eigen::Index i = 0; i < u.size(); ++i)
                if (std::abs(u[i]) > 1e-9) {
                    if (u[i] < 0) u = -u;
                    break;
                }
            for (Eigen::Index i = 0; i < u.size(); ++i) dir[static_cast<std::size_t>(i)] = quant(u[i]);
        }
        return {dir, quant(p.p1), quant(p.p6)};
    }

    // Keeps whichever of the stored and offered entries has the larger Phi_A.
    // Returns true when the table changed.
    bool merge(Entry e) {
        const Key k = key(e.theta, e.p);
        auto it = entries_.find(k);
        if (it == entries_.end()) {
            entries_.emplace(k, std::move(e));
            return true;
        }
        if (e.phi_a > it->second.phi_a) {
            it->second = std::move(e);
            return true;
        }
        return false;
    }

    void merge(const LocalOptTable& other) {
        for (const auto& [k, e] : other.entries_) merge(e);
    }

    const Entry* find(const ThetaVector& theta, const hrf::HrfParams& p) const {
        auto it = entries_.find(key(theta, p));
        return it == entries_.end() ? nullptr : &it->second;
    }

    const Entry& at(const ThetaVector& theta, const hrf::HrfParams& p) const {
        if (const Entry* e = find(theta, p)) return *e;
        std::string t;
        for (Eigen::Index i = 0; i < theta.size(); ++i) t += (i ? "," : "") + std::to_string(theta[i]);
        throw LookupError("no locally optimal design for theta=(" + t + "), p=(" + std::to_string(p.p1) + "," +
                          std::to_string(p.p6) + ")");
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::map<Key, Entry> entries_;
};

// Table values aligned with the evaluator's grid (p-major). Throws
// LookupError for the first missing point.
inline std::vector<double> table_denominators(const LocalOptTable& table, const Evaluator& ev,
                                              const ThetaList& thetas) {
    std::vector<double> out;
    out.reserve(ev.point_count() * thetas.size());
    for (const auto& p : ev.points())
        for (const auto& t : thetas) {
            const double v = table.at(t, p).phi_a;
            if (!(v > 0.0)) throw NumericalError("locally optimal Phi_A is not positive");
            out.push_back(v);
        }
    return out;
}

// RE(d; theta, p) = Phi_A(d; theta, p) / Phi_A(d*_{theta,p}; theta, p).
inline double relative_efficiency(const Evaluator& ev, const PreparedDesign& pd, const ThetaVector& theta,
                                  std::size_t p_index, const LocalOptTable& table) {
    const double best = table.at(theta, ev.points()[p_index]).phi_a;
    if (!(best > 0.0)) throw NumericalError("locally optimal Phi_A is not positive");
    return ev.phi_a(pd, ev.moments(pd, p_index), theta, p_index) / best;
}

inline GridMin min_re(const Evaluator& ev, const PreparedDesign& pd, const ThetaList& thetas,
                      const std::vector<double>& denominators) {
    if (thetas.empty() || ev.point_count() == 0) throw ConfigError("empty parameter grid");
    return grid_min(phi_a_values(ev, pd, thetas), thetas.size(), denominators);
}

inline GridMin min_re(const Evaluator& ev, const PreparedDesign& pd, const ThetaList& thetas,
                      const LocalOptTable& table) {
    return min_re(ev, pd, thetas, table_denominators(table, ev, thetas));
}

// Amplitude vector after relabeling types by perm: entry q moves to perm[q].
inline ThetaVector permute_theta(const ThetaVector& theta, const LabelPermutation& perm) {
    ThetaVector out(theta.size());
    for (Eigen::Index q = 0; q < theta.size(); ++q) out[perm[static_cast<std::size_t>(q)] - 1] = theta[q];
    return out;
}

// Signed image tau * G theta of a direction set, with tau the sign of the
// first entry (1 when it is zero).
inline ThetaList permuted_region(const ThetaList& base, const LabelPermutation& perm) {
    ThetaList out;
    out.reserve(base.size());
    for (const auto& t : base) {
        ThetaVector g = permute_theta(t, perm);
        if (g[0] < 0.0) g = -g;
        out.push_back(g);
    }
    return out;
}

struct PermutationRatios {
    std::vector<LabelPermutation> perms;  // perms[0] is the identity
    std::vector<double> ratios;           // R_g; ratios[0] == 1
    double base_min = 0.0;                // min over the reduced region

    // Lower bound on the efficiency relative to a full-space maximin design:
    // min over g != 0 of R_g, capped at 1.
    double min_ratio() const {
        double m = 1.0;
        for (std::size_t g = 1; g < ratios.size(); ++g) m = std::min(m, ratios[g]);
        return m;
    }
};

// R_g = min over Theta*_g x P / min over Theta_0 x P for every permutation g.
inline PermutationRatios rg_ratios(const Evaluator& ev, const PreparedDesign& pd, const ThetaList& theta0) {
    PermutationRatios out;
    out.perms = all_permutations(ev.experiment().q_types);
    const auto moments = ev.all_moments(pd);
    auto region_min = [&](const ThetaList& thetas) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < moments.size(); ++i)
            for (const auto& t : thetas) m = std::min(m, ev.phi_a(pd, moments[i], t, i));
        return m;
    };
    out.base_min = region_min(theta0);
    for (const auto& perm : out.perms) {
        const double m = region_min(permuted_region(theta0, perm));
        out.ratios.push_back(out.base_min > 0.0 ? m / out.base_min : 0.0);
    }
    out.ratios[0] = 1.0;
    return out;
}

inline double rg_ratio(const Evaluator& ev, const PreparedDesign& pd, const ThetaList& theta0, std::size_t g) {
    const auto r = rg_ratios(ev, pd, theta0);
    if (g >= r.ratios.size()) throw ConfigError("permutation index out of range");
    return r.ratios[g];
}

inline double min_rg(const Evaluator& ev, const PreparedDesign& pd, const ThetaList& theta0) {
    return rg_ratios(ev, pd, theta0).min_ratio();
}

}  // namespace mmdesign
