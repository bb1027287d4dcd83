#pragma once

// Helpers shared by the command-line tool and the acceptance runner: seed
// statistics, multi-seed searches with a final evaluation on a finer grid,
// and the comparison baselines.

#include <cmath>
#include <cstdint>
#include <ctime>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "design.hpp"
#include "glsmodel.hpp"
#include "search.hpp"

namespace mmdesign {

// Max, mean and standard error (sample sd / sqrt(n)) across seeds. The
// standard error is undefined for a single value.
struct SeedStats {
    double max = 0.0;
    double mean = 0.0;
    double std_err = 0.0;
    bool has_std_err = false;
};

inline SeedStats summarize(const std::vector<double>& v) {
    if (v.empty()) throw ConfigError("no values to summarize");
    SeedStats s;
    s.max = v.front();
    double sum = 0.0;
    for (double x : v) {
        s.max = std::max(s.max, x);
        sum += x;
    }
    const double n = static_cast<double>(v.size());
    s.mean = sum / n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std_err = std::sqrt(ss / (n - 1.0) / n);
        s.has_std_err = true;
    }
    return s;
}

// {0} followed by the directions: the grid of the maximin-efficiency
// criterion.
inline ThetaList with_zero(const ThetaList& thetas, int q_types) {
    ThetaList out{ThetaVector::Zero(q_types)};
    out.insert(out.end(), thetas.begin(), thetas.end());
    return out;
}

struct SeedRun {
    std::uint64_t seed = 0;
    SearchResult result;
    double final_value = 0.0;  // criterion re-evaluated by the final evaluator
    double cpu_seconds = 0.0;
};

// One GA per seed. `final_value` maps the found design to the reported
// criterion (typically a finer grid than the search objective).
template <class Final>
std::vector<SeedRun> run_seeds(const Objective& objective, const SearchSpace& space, GaConfig config,
                               const std::vector<std::uint64_t>& seeds, const std::vector<Design>& knowledge,
                               Final&& final_value) {
    std::vector<SeedRun> out;
    for (std::uint64_t seed : seeds) {
        config.seed = seed;
        const std::clock_t c0 = std::clock();
        SeedRun run;
        run.seed = seed;
        run.result = ga_search(objective, space, config, knowledge);
        run.cpu_seconds = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
        run.final_value = final_value(run.result.best_design);
        out.push_back(std::move(run));
    }
    return out;
}

// Index of the run with the largest final value; earliest wins ties.
inline std::size_t best_run(const std::vector<SeedRun>& runs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (runs[i].final_value > runs[best].final_value) best = i;
    return best;
}

// Random designs drawn with seeds splitmix64(i), i = 1..count.
inline std::vector<Design> random_designs(int q_types, std::size_t length, double isi, std::size_t count) {
    std::vector<Design> out;
    out.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) out.push_back(random_design(q_types, length, splitmix64(i), isi));
    return out;
}

// Half-rest, half-stimulus permutations with mean onset gap in the window.
inline std::vector<Design> constrained_random_designs(std::size_t length, double isi, std::size_t count,
                                                      double gap_lo = 4.9, double gap_hi = 5.1) {
    std::vector<Design> out;
    out.reserve(count);
    for (std::size_t i = 1; i <= count; ++i)
        out.push_back(constrained_random(length, 0.5, gap_lo, gap_hi, splitmix64(i), isi));
    return out;
}

// Position of the design maximizing score; earliest wins ties.
template <class Score>
std::size_t argmax_design(const std::vector<Design>& designs, Score&& score, double* best_value = nullptr) {
    if (designs.empty()) throw ConfigError("no designs to choose from");
    std::size_t best = 0;
    double bv = score(designs[0]);
    for (std::size_t i = 1; i < designs.size(); ++i) {
        const double v = score(designs[i]);
        if (v > bv) {
            bv = v;
            best = i;
        }
    }
    if (best_value) *best_value = bv;
    return best;
}

// m-sequence over GF(Q+1) of the given degree, truncated or wrapped to the
// length (e.g. degree 7 extended to 132 when no exact-length one exists).
inline Design wrapped_m_sequence(int q_types, int degree, std::size_t length, double isi) {
    const auto seq = m_sequence(default_primitive_polynomial(q_types + 1, degree));
    std::vector<int> labels = seq.size() >= length
                                  ? std::vector<int>(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(length))
                                  : extend_cyclic(seq, length);
    return {std::move(labels), q_types, isi};
}

}  // namespace mmdesign
