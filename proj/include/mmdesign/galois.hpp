#pragma once

// Maximal-length linear recurring sequences over small Galois fields.

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace mmdesign {

// Arithmetic in GF(q) for q prime or q = 4. Elements are the integers
// 0 .. q-1; GF(4) uses the 2-bit representation of GF(2)[u]/(u^2+u+1), so
// 2 = u and 3 = u + 1.
class GaloisField {
public:
    explicit GaloisField(int order) : order_(order) {
        if (order == 4) {
            binary_ext_ = true;
        } else if (order < 2 || !is_prime(order)) {
            throw ConfigError("unsupported field order " + std::to_string(order) +
                              " (primes and 4 are supported)");
        }
    }

    int order() const noexcept { return order_; }

    int add(int a, int b) const { return binary_ext_ ? (a ^ b) : (a + b) % order_; }
    int neg(int a) const { return binary_ext_ ? a : (order_ - a) % order_; }

    int mul(int a, int b) const {
        if (!binary_ext_) return (a * b) % order_;
        int r = 0;
        for (int i = 0; i < 2; ++i)
            if ((b >> i) & 1) r ^= a << i;
        if (r & 4) r ^= 0b111;
        return r;
    }

private:
    static bool is_prime(int n) {
        for (int d = 2; d * d <= n; ++d)
            if (n % d == 0) return false;
        return true;
    }

    int order_;
    bool binary_ext_ = false;
};

// Monic polynomial x^r + c[r-1] x^(r-1) + ... + c[0] over GF(q), stored as
// the low-order coefficients c[0..r-1].
struct FieldPolynomial {
    int field_order = 2;
    std::vector<int> low_coefficients;

    int degree() const { return static_cast<int>(low_coefficients.size()); }

    std::string to_string() const {
        auto element = [&](int c) {
            if (field_order == 4 && c == 2) return std::string("u");
            if (field_order == 4 && c == 3) return std::string("(u+1)");
            return std::to_string(c);
        };
        std::string s = "x^" + std::to_string(degree());
        for (int i = degree() - 1; i >= 0; --i) {
            const int c = low_coefficients[static_cast<std::size_t>(i)];
            if (c == 0) continue;
            const std::string mono = i == 0 ? "" : (i == 1 ? "x" : "x^" + std::to_string(i));
            std::string coef = (c == 1 && i > 0) ? "" : element(c);
            if (!coef.empty() && !mono.empty()) coef += "*";
            s += " + " + coef + mono;
        }
        return s;
    }
};

// Primitive polynomials used for the case-study m-sequences. Each one is
// re-verified by m_sequence() through its period.
inline FieldPolynomial default_primitive_polynomial(int field_order, int degree) {
    if (field_order == 2 && degree == 8) return {2, {1, 0, 1, 1, 1, 0, 0, 0}};  // x^8+x^4+x^3+x^2+1
    if (field_order == 2 && degree == 7) return {2, {1, 1, 0, 0, 0, 0, 0}};     // x^7+x+1
    if (field_order == 3 && degree == 5) return {3, {1, 2, 0, 0, 0}};           // x^5+2x+1
    if (field_order == 4 && degree == 4) return {4, {2, 0, 1, 1}};              // x^4+x^3+x^2+u
    throw ConfigError("no default primitive polynomial for GF(" + std::to_string(field_order) +
                      ") of degree " + std::to_string(degree));
}

inline std::uint64_t int_pow(std::uint64_t base, int exp) {
    std::uint64_t r = 1;
    while (exp-- > 0) r *= base;
    return r;
}

// Output of the shift register s[n+r] = -sum_i c[i] s[n+i] over one full
// period. Throws NumericalError when the period is not q^r - 1.
inline std::vector<int> m_sequence(const FieldPolynomial& poly, std::vector<int> init_state = {}) {
    const GaloisField field(poly.field_order);
    const int r = poly.degree();
    if (r < 1) throw ConfigError("m-sequence degree must be at least 1");
    for (int c : poly.low_coefficients)
        if (c < 0 || c >= field.order()) throw ConfigError("polynomial coefficient outside the field");
    if (init_state.empty()) {
        init_state.assign(static_cast<std::size_t>(r), 0);
        init_state.back() = 1;
    }
    if (static_cast<int>(init_state.size()) != r) throw ConfigError("initial state must have degree entries");
    bool nonzero = false;
    for (int s : init_state) {
        if (s < 0 || s >= field.order()) throw ConfigError("initial state entry outside the field");
        nonzero = nonzero || s != 0;
    }
    if (!nonzero) throw ConfigError("initial state must be nonzero");

    const std::uint64_t full_period = int_pow(static_cast<std::uint64_t>(field.order()), r) - 1;
    // state[i] holds s[n + i]
    std::vector<int> state = init_state;
    std::vector<int> out;
    out.reserve(full_period);
    for (std::uint64_t n = 0; n < full_period; ++n) {
        out.push_back(state.front());
        int next = 0;
        for (std::size_t i = 0; i < state.size(); ++i)
            next = field.add(next, field.neg(field.mul(poly.low_coefficients[i], state[i])));
        state.erase(state.begin());
        state.push_back(next);
        const bool back = state == init_state;
        if (back != (n + 1 == full_period))
            throw NumericalError("polynomial " + poly.to_string() + " over GF(" +
                                 std::to_string(field.order()) + ") is not primitive");
    }
    return out;
}

}  // namespace mmdesign
