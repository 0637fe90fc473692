// dissipaton_algebra.hpp — Generalized-normal-ordering algebra of a single
// dissipaton: Hermite expansion, ordered products and the contraction of
// exp(+-i lambda f) into an ordered monomial.
//
// Two polynomial spaces appear here and share one representation:
//   Polynomial         sum_j c[j] f^j       (plain powers)
//   OrderedPolynomial  sum_j c[j] O(f^j)    (ordered monomials)
// Multi-dissipaton objects are products of independent single-dissipaton
// factors and are composed by the hierarchy builder. The right-action
// variants use conj(eta_{pair(k)}) in place of eta.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "pcl/core.hpp"

namespace pcl::algebra {

struct Polynomial {
    std::vector<cplx> coeffs; // coeffs[j] multiplies f^j

    std::size_t degree() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }
    cplx operator[](std::size_t j) const { return j < coeffs.size() ? coeffs[j] : cplx{0.0}; }

    cplx evaluate(cplx f) const {
        cplx acc{0.0};
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * f + *it;
        return acc;
    }
};

struct OrderedPolynomial {
    std::vector<cplx> coeffs; // coeffs[j] multiplies O(f^j)

    cplx operator[](std::size_t j) const { return j < coeffs.size() ? coeffs[j] : cplx{0.0}; }

    void add(std::size_t j, cplx v) {
        if (coeffs.size() <= j) coeffs.resize(j + 1, cplx{0.0});
        coeffs[j] += v;
    }
};

inline double factorial(std::size_t n) {
    if (n > 170) throw config_error("factorial: argument exceeds 170 (double overflow)");
    double r = 1.0;
    for (std::size_t i = 2; i <= n; ++i) r *= static_cast<double>(i);
    return r;
}

inline double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
}

// Integer power by repeated multiplication; ipow(0, 0) == 1.
inline cplx ipow(cplx z, std::size_t n) {
    cplx r{1.0};
    for (std::size_t i = 0; i < n; ++i) r *= z;
    return r;
}

// H_n^>(f) in plain powers of f, from H_{n+1} = f H_n - eta n H_{n-1}.
inline Polynomial hermite_expand(std::size_t n, cplx eta) {
    std::vector<cplx> prev{1.0};
    if (n == 0) return {prev};
    std::vector<cplx> cur{0.0, 1.0};
    for (std::size_t k = 1; k < n; ++k) {
        std::vector<cplx> next(k + 2, cplx{0.0});
        for (std::size_t j = 0; j < cur.size(); ++j) next[j + 1] += cur[j];
        for (std::size_t j = 0; j < prev.size(); ++j) next[j] -= eta * static_cast<double>(k) * prev[j];
        prev = std::move(cur);
        cur = std::move(next);
    }
    return {cur};
}

// f^n = i^{-n} O[H_n^>(i f)]: the coefficient of O(f^j) is h_j i^{j-n}.
inline OrderedPolynomial power_to_ordered(std::size_t n, cplx eta) {
    const Polynomial h = hermite_expand(n, eta);
    OrderedPolynomial out;
    out.coeffs.assign(n + 1, cplx{0.0});
    for (std::size_t j = 0; j <= n; ++j) {
        if (h[j] == cplx{0.0}) continue;
        // (n - j) is even whenever h_j != 0
        const double sign = ((n - j) / 2) % 2 == 0 ? 1.0 : -1.0;
        out.coeffs[j] = sign * h[j];
    }
    return out;
}

// O(f^m) O(f^n) = sum_l C(m,l) C(n,l) eta^l l! O(f^{m+n-2l})
inline OrderedPolynomial ordered_product(std::size_t m, std::size_t n, cplx eta) {
    OrderedPolynomial out;
    out.coeffs.assign(m + n + 1, cplx{0.0});
    cplx eta_l{1.0};
    for (std::size_t l = 0; l <= std::min(m, n); ++l) {
        out.coeffs[m + n - 2 * l] += binomial(m, l) * binomial(n, l) * factorial(l) * eta_l;
        eta_l *= eta;
    }
    return out;
}

// O(f^n) exp(sign * i lambda f^>) expanded over O(f^j), j <= max_degree:
//   exp(-eta lambda^2/2) sum_{m,l} (sign i lambda)^m eta^l / (m-l)! C(n,l) O(f^{n+m-2l}).
// For a given output degree j the admissible terms are l = 0..n with
// m = j - n + 2l >= l, so each coefficient is a finite sum.
inline OrderedPolynomial exp_contraction(std::size_t n, double lambda, cplx eta, int sign, std::size_t max_degree) {
    const cplx z = static_cast<double>(sign >= 0 ? 1 : -1) * I * lambda;
    const cplx prefactor = std::exp(-eta * lambda * lambda / 2.0);
    OrderedPolynomial out;
    out.coeffs.assign(max_degree + 1, cplx{0.0});
    for (std::size_t j = 0; j <= max_degree; ++j) {
        cplx acc{0.0};
        for (std::size_t l = 0; l <= n; ++l) {
            const long m = static_cast<long>(j) - static_cast<long>(n) + 2 * static_cast<long>(l);
            if (m < static_cast<long>(l)) continue;
            const auto mu = static_cast<std::size_t>(m);
            acc += ipow(z, mu) * ipow(eta, l) / factorial(mu - l) *
                   binomial(n, l);
        }
        out.coeffs[j] = prefactor * acc;
    }
    return out;
}

} // namespace pcl::algebra
