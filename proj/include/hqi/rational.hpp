// Exact rational arithmetic used by the moment pipeline.
//
// Moment tables and triangular-matrix inverses are kept exact as long as the
// derivative polynomial has rational coefficients; values are converted to
// double only when they enter a floating-point kernel.

#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

namespace hqi {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::rational<BigInt>;

inline BigInt factorial(int k) {
    BigInt r = 1;
    for (int i = 2; i <= k; ++i) r *= i;
    return r;
}

inline BigInt int_pow(BigInt base, int exp) {
    BigInt r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

inline double to_double(const Rational& q) {
    return boost::rational_cast<double>(q);
}

inline Rational rat(long long num, long long den = 1) {
    return Rational(BigInt(num), BigInt(den));
}

// Every finite double is a dyadic rational; the conversion is exact.
inline Rational rational_from_double(double x) {
    if (x == 0.0) return Rational(0);
    int exp = 0;
    double mant = std::frexp(x, &exp);  // x = mant * 2^exp, |mant| in [0.5, 1)
    long long scaled = static_cast<long long>(std::ldexp(mant, 53));
    exp -= 53;
    BigInt num(scaled);
    if (exp >= 0) return Rational(num * int_pow(BigInt(2), exp));
    return Rational(num, int_pow(BigInt(2), -exp));
}

}  // namespace hqi
