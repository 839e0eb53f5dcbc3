// Hermite and generalized Laguerre polynomials.
//
// H_beta(t) = e^{|t|^2} (-d)^beta e^{-|t|^2} is the tensor product of 1-D
// physicists' polynomials; evaluation goes through the stable three-term
// recurrence, values at zero through exact integer arithmetic.

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "hqi/multi_index.hpp"
#include "hqi/rational.hpp"

namespace hqi {

// H_{k+1}(t) = 2 t H_k(t) - 2 k H_{k-1}(t)
template <typename T>
T hermite_1d(int degree, T t) {
    if (degree < 0) throw std::invalid_argument("hermite_1d: negative degree");
    T hk = T(1);
    if (degree == 0) return hk;
    T hk1 = 2 * t;
    for (int k = 1; k < degree; ++k) {
        T next = 2 * t * hk1 - T(2 * k) * hk;
        hk = hk1;
        hk1 = next;
    }
    return hk1;
}

template <typename T>
T hermite_eval(const MultiIndex& beta, std::span<const T> t) {
    if (static_cast<int>(t.size()) != beta.size())
        throw std::invalid_argument("hermite_eval: dimension mismatch");
    T r = T(1);
    for (int j = 0; j < beta.size(); ++j) r *= hermite_1d(beta[j], t[j]);
    return r;
}

inline double hermite_eval(const MultiIndex& beta, std::span<const double> t) {
    return hermite_eval<double>(beta, t);
}

// H_beta(0): zero when any component is odd, else for beta = 2 gamma equal to
// (-1)^{|gamma|} (2 gamma)! / gamma!, exact.
inline Rational hermite_at_zero(const MultiIndex& beta) {
    if (beta.has_odd_component()) return Rational(0);
    const MultiIndex gamma = beta.half();
    BigInt v = beta.fact() / gamma.fact();
    if (gamma.order() % 2 != 0) v = -v;
    return Rational(v);
}

// Coefficients of H_k as a polynomial in t: result[j] multiplies t^j.
inline std::vector<BigInt> hermite_monomial_coefficients(int degree) {
    std::vector<BigInt> hk{BigInt(1)};
    if (degree == 0) return hk;
    std::vector<BigInt> hk1{BigInt(0), BigInt(2)};
    for (int k = 1; k < degree; ++k) {
        std::vector<BigInt> next(static_cast<size_t>(k) + 2, BigInt(0));
        for (size_t j = 0; j < hk1.size(); ++j) next[j + 1] += 2 * hk1[j];
        for (size_t j = 0; j < hk.size(); ++j) next[j] -= 2 * k * hk[j];
        hk = std::move(hk1);
        hk1 = std::move(next);
    }
    return hk1;
}

// Generalized Laguerre polynomial L_k^{(gamma)}(y), gamma > -1, via
// (k+1) L_{k+1} = (2k + 1 + gamma - y) L_k - (k + gamma) L_{k-1}.
inline double laguerre_eval(int degree, double gamma, double y) {
    if (degree < 0) throw std::invalid_argument("laguerre_eval: negative degree");
    if (gamma <= -1.0) throw std::invalid_argument("laguerre_eval: parameter must be > -1");
    double lk = 1.0;
    if (degree == 0) return lk;
    double lk1 = 1.0 + gamma - y;
    for (int k = 1; k < degree; ++k) {
        double next = ((2.0 * k + 1.0 + gamma - y) * lk1 - (k + gamma) * lk) / (k + 1.0);
        lk = lk1;
        lk1 = next;
    }
    return lk1;
}

}  // namespace hqi
