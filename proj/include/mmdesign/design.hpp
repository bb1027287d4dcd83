#pragma once

// Stimulus sequences, their 0-1 design matrices and the design families used
// as search seeds and baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "galois.hpp"

namespace mmdesign {

// A sequence of onsets on the ISI grid: label q > 0 is a type-q stimulus at
// time (k-1)*isi, 0 is rest.
struct Design {
    std::vector<int> labels;
    int q_types = 1;
    double isi = 4.0;

    Design() = default;
    Design(std::vector<int> l, int q, double interval) : labels(std::move(l)), q_types(q), isi(interval) {
        validate();
    }

    void validate() const {
        if (q_types < 1) throw ConfigError("design needs at least one stimulus type");
        if (labels.empty()) throw ConfigError("design must not be empty");
        if (!(isi > 0.0)) throw ConfigError("ISI must be positive");
        for (int x : labels)
            if (x < 0 || x > q_types)
                throw ConfigError("label " + std::to_string(x) + " outside 0.." + std::to_string(q_types));
    }

    std::size_t length() const { return labels.size(); }

    // Every stimulus type occurs at least once.
    bool covers_all_types() const {
        std::vector<bool> seen(static_cast<std::size_t>(q_types) + 1, false);
        for (int x : labels) seen[static_cast<std::size_t>(x)] = true;
        return std::all_of(seen.begin() + 1, seen.end(), [](bool b) { return b; });
    }

    friend bool operator==(const Design&, const Design&) = default;
};

// 1-based image table: perm[q-1] is the new label of type q.
using LabelPermutation = std::vector<int>;

inline void check_permutation(const LabelPermutation& perm, int q_types) {
    if (static_cast<int>(perm.size()) != q_types) throw ConfigError("permutation size differs from Q");
    std::vector<bool> hit(perm.size(), false);
    for (int v : perm) {
        if (v < 1 || v > q_types || hit[static_cast<std::size_t>(v - 1)])
            throw ConfigError("label map is not a permutation of 1..Q");
        hit[static_cast<std::size_t>(v - 1)] = true;
    }
}

inline LabelPermutation inverse(const LabelPermutation& perm) {
    LabelPermutation inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i] - 1)] = static_cast<int>(i) + 1;
    return inv;
}

// All Q! permutations in lexicographic order; the identity comes first.
inline std::vector<LabelPermutation> all_permutations(int q_types) {
    LabelPermutation p(static_cast<std::size_t>(q_types));
    std::iota(p.begin(), p.end(), 1);
    std::vector<LabelPermutation> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

inline Design relabel(const Design& d, const LabelPermutation& perm) {
    check_permutation(perm, d.q_types);
    Design out = d;
    for (int& x : out.labels)
        if (x != 0) x = perm[static_cast<std::size_t>(x - 1)];
    return out;
}

// ISI/TR must reduce to a/b with a, b at most this.
inline constexpr long long kMaxRatioDenominator = 1000;

// Greatest duration dividing both isi and tr (the HRF sampling step).
inline double delta_t(double isi, double tr) {
    if (!(isi > 0.0) || !(tr > 0.0)) throw ConfigError("ISI and TR must be positive");
    // isi/tr = a/b in lowest terms gives delta = isi/a; continued fraction
    const double ratio = isi / tr;
    double x = ratio;
    long long h0 = 1, h1 = 0, k0 = 0, k1 = 1;  // convergents h/k
    for (int iter = 0; iter < 64; ++iter) {
        const double fl = std::floor(x);
        const auto a = static_cast<long long>(fl);
        const long long h2 = a * h0 + h1;
        const long long k2 = a * k0 + k1;
        h1 = h0;
        h0 = h2;
        k1 = k0;
        k0 = k2;
        if (k0 > kMaxRatioDenominator || h0 > kMaxRatioDenominator) break;
        if (std::abs(static_cast<double>(h0) / static_cast<double>(k0) - ratio) <= 1e-9 * ratio)
            return isi / static_cast<double>(h0);
        const double frac = x - fl;
        if (frac < 1e-15) break;
        x = 1.0 / frac;
    }
    throw ConfigError("ISI and TR are not rationally related on a usable grid");
}

// Rounds value/unit to an integer, failing if it is not one within tolerance.
inline long long whole_multiple(double value, double unit, const char* what) {
    const double q = value / unit;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q))) throw ConfigError(what);
    return static_cast<long long>(r);
}

struct ScanLayout {
    double delta = 0.0;       // HRF sampling step
    std::size_t fine_steps;   // N = L*isi/delta
    std::size_t scans;        // T = L*isi/tr
    std::size_t isi_steps;    // isi/delta
    std::size_t tr_steps;     // tr/delta
};

inline ScanLayout scan_layout(std::size_t length, double isi, double tr) {
    ScanLayout s{};
    s.delta = delta_t(isi, tr);
    const double duration = static_cast<double>(length) * isi;
    s.scans = static_cast<std::size_t>(whole_multiple(duration, tr, "design duration L*ISI is not a multiple of TR"));
    s.fine_steps = static_cast<std::size_t>(whole_multiple(duration, s.delta, "design duration off the sampling grid"));
    s.isi_steps = static_cast<std::size_t>(whole_multiple(isi, s.delta, "ISI off the sampling grid"));
    s.tr_steps = static_cast<std::size_t>(whole_multiple(tr, s.delta, "TR off the sampling grid"));
    return s;
}

struct DesignMatrix {
    std::vector<Eigen::MatrixXd> blocks;  // X_{d,q}, q = 1..Q, each T x K
    std::size_t scans = 0;
    std::size_t hrf_length = 0;
    double tr = 0.0;

    // [X_{d,1}, ..., X_{d,Q}]
    Eigen::MatrixXd stacked() const {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(scans), static_cast<Eigen::Index>(hrf_length * blocks.size()));
        for (std::size_t q = 0; q < blocks.size(); ++q)
            x.middleCols(static_cast<Eigen::Index>(q * hrf_length), static_cast<Eigen::Index>(hrf_length)) = blocks[q];
        return x;
    }
};

namespace detail {

// Fills out(row, q*K + k) = 1 for every onset of type q whose k-th HRF height
// contributes at fine time index row_step*row. The Q blocks sit side by side.
inline void fill_indicator(const Design& d, std::size_t rows, std::size_t row_step, std::size_t isi_steps,
                           std::size_t k_len, Eigen::MatrixXd& out) {
    out.setZero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k_len * static_cast<std::size_t>(d.q_types)));
    for (std::size_t j = 0; j < d.labels.size(); ++j) {
        const int q = d.labels[j];
        if (q == 0) continue;
        const std::size_t onset = j * isi_steps;
        const std::size_t col0 = static_cast<std::size_t>(q - 1) * k_len;
        // first row at or after the onset
        std::size_t row = (onset + row_step - 1) / row_step;
        for (; row < rows; ++row) {
            const std::size_t k = row * row_step - onset;
            if (k >= k_len) break;
            out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col0 + k)) = 1.0;
        }
    }
}

inline DesignMatrix split_blocks(const Eigen::MatrixXd& stacked, int q_types, std::size_t k_len, double tr) {
    DesignMatrix m;
    m.scans = static_cast<std::size_t>(stacked.rows());
    m.hrf_length = k_len;
    m.tr = tr;
    for (int q = 0; q < q_types; ++q)
        m.blocks.push_back(stacked.middleCols(static_cast<Eigen::Index>(static_cast<std::size_t>(q) * k_len),
                                              static_cast<Eigen::Index>(k_len)));
    return m;
}

}  // namespace detail

// Scan-resolution design matrix: the first scan is at time 0 and the run
// ends at the last scan, so T = L*isi/tr.
inline Eigen::MatrixXd stacked_design_matrix(const Design& d, double tr, std::size_t hrf_length) {
    const ScanLayout s = scan_layout(d.length(), d.isi, tr);
    Eigen::MatrixXd x;
    detail::fill_indicator(d, s.scans, s.tr_steps, s.isi_steps, hrf_length, x);
    return x;
}

inline DesignMatrix design_matrix(const Design& d, double tr, std::size_t hrf_length) {
    return detail::split_blocks(stacked_design_matrix(d, tr, hrf_length), d.q_types, hrf_length, tr);
}

// The same indicator at every delta step (before subsampling to scans).
inline DesignMatrix fine_design_matrix(const Design& d, double tr, std::size_t hrf_length) {
    const ScanLayout s = scan_layout(d.length(), d.isi, tr);
    Eigen::MatrixXd x;
    detail::fill_indicator(d, s.fine_steps, 1, s.isi_steps, hrf_length, x);
    return detail::split_blocks(x, d.q_types, hrf_length, s.delta);
}

// Repetitions of {0..0 1..1 ... Q..Q}, truncated to L.
inline Design block_design(int q_types, std::size_t block_size, std::size_t length, double isi = 4.0) {
    if (q_types < 1 || block_size < 1) throw ConfigError("block design needs Q >= 1 and block size >= 1");
    std::vector<int> labels(length);
    const std::size_t period = block_size * static_cast<std::size_t>(q_types + 1);
    for (std::size_t i = 0; i < length; ++i) labels[i] = static_cast<int>((i % period) / block_size);
    return {std::move(labels), q_types, isi};
}

// Wraps seq cyclically up to target_len.
inline std::vector<int> extend_cyclic(const std::vector<int>& seq, std::size_t target_len) {
    if (seq.empty()) throw ConfigError("cannot extend an empty sequence");
    if (target_len < seq.size()) throw ConfigError("target length is shorter than the sequence");
    std::vector<int> out(target_len);
    for (std::size_t i = 0; i < target_len; ++i) out[i] = seq[i % seq.size()];
    return out;
}

// m-sequence over GF(Q+1) of the given degree as a design; field elements are
// the labels.
inline Design m_sequence_design(int field_order, int degree, double isi = 4.0) {
    return {m_sequence(default_primitive_polynomial(field_order, degree)), field_order - 1, isi};
}

inline Design random_design(int q_types, std::size_t length, std::uint64_t seed, double isi = 4.0) {
    if (q_types < 1 || length < 1) throw ConfigError("random design needs Q >= 1 and L >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> label(0, q_types);
    std::vector<int> labels(length);
    for (int& x : labels) x = label(rng);
    return {std::move(labels), q_types, isi};
}

// Mean time between consecutive onsets (any type), in seconds; 0 if fewer
// than two onsets.
inline double mean_onset_gap(const Design& d) {
    std::size_t first = 0, last = 0, count = 0;
    for (std::size_t i = 0; i < d.labels.size(); ++i) {
        if (d.labels[i] == 0) continue;
        if (count == 0) first = i;
        last = i;
        ++count;
    }
    if (count < 2) return 0.0;
    return d.isi * static_cast<double>(last - first) / static_cast<double>(count - 1);
}

inline constexpr int kRejectionBudget = 10000;

// Random permutation of round(zero_fraction*L) zeros and the rest ones whose
// mean onset gap lies in [gap_lo, gap_hi] seconds.
inline Design constrained_random(std::size_t length, double zero_fraction, double gap_lo, double gap_hi,
                                 std::uint64_t seed, double isi) {
    if (!(zero_fraction > 0.0 && zero_fraction < 1.0)) throw ConfigError("zero fraction must lie in (0, 1)");
    if (gap_lo > gap_hi) throw ConfigError("empty onset-gap window");
    const auto zeros = static_cast<std::size_t>(std::llround(zero_fraction * static_cast<double>(length)));
    std::vector<int> labels(length, 1);
    std::fill_n(labels.begin(), std::min(zeros, length), 0);
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
        std::shuffle(labels.begin(), labels.end(), rng);
        Design d(labels, 1, isi);
        const double gap = mean_onset_gap(d);
        if (gap >= gap_lo && gap <= gap_hi) return d;
    }
    throw NumericalError("constrained random design: rejection budget exhausted");
}

inline std::size_t short_length(std::size_t length, int q_types) {
    return (length + static_cast<std::size_t>(q_types) - 1) / static_cast<std::size_t>(q_types);
}

// Concatenates the Q cyclic relabelings (q -> q+1, Q -> 1, 0 fixed) of the
// short design and drops the tail beyond L.
inline Design cyclic_design(const std::vector<int>& short_labels, int q_types, std::size_t length, double isi = 4.0) {
    if (short_labels.size() != short_length(length, q_types))
        throw ConfigError("short design must have length ceil(L/Q)");
    std::vector<int> labels;
    labels.reserve(short_labels.size() * static_cast<std::size_t>(q_types));
    for (int shift = 0; shift < q_types; ++shift)
        for (int x : short_labels) {
            if (x < 0 || x > q_types) throw ConfigError("short design label outside 0..Q");
            labels.push_back(x == 0 ? 0 : (x - 1 + shift) % q_types + 1);
        }
    labels.resize(length);
    return {std::move(labels), q_types, isi};
}

}  // namespace mmdesign
