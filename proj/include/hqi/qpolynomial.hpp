// The derivative polynomial Q(t) = sum_{|gamma| < N} a_gamma t^gamma with
// a_0 = 1. Its coefficients drive both the data channels of the
// quasi-interpolant and the moment conditions on the generating function.

#pragma once

#include <stdexcept>
#include <utility>

#include "hqi/multi_index.hpp"
#include "hqi/rational.hpp"

namespace hqi {

class QPolynomial {
public:
    QPolynomial(int dimension, int order, IndexMap<Rational> coeffs = {})
        : n_(dimension), order_(order), coeffs_(std::move(coeffs)) {
        if (dimension < 1) throw std::invalid_argument("QPolynomial: dimension must be >= 1");
        if (order < 1) throw std::invalid_argument("QPolynomial: order must be >= 1");
        const MultiIndex zero(dimension);
        auto it = coeffs_.find(zero);
        if (it == coeffs_.end()) {
            coeffs_.emplace(zero, Rational(1));
        } else if (it->second != Rational(1)) {
            throw std::invalid_argument("QPolynomial: a_0 must equal 1");
        }
        for (const auto& [gamma, a] : coeffs_) {
            if (gamma.size() != dimension) throw std::invalid_argument("QPolynomial: mixed dimensions");
            if (gamma.order() > order - 1)
                throw std::invalid_argument("QPolynomial: coefficient degree exceeds N-1");
            (void)a;
        }
    }

    static QPolynomial one(int dimension, int order) { return QPolynomial(dimension, order); }

    int dimension() const { return n_; }
    int order() const { return order_; }
    int degree_bound() const { return order_ - 1; }

    Rational coefficient(const MultiIndex& gamma) const {
        auto it = coeffs_.find(gamma);
        return it == coeffs_.end() ? Rational(0) : it->second;
    }

    const IndexMap<Rational>& coefficients() const { return coeffs_; }

    // true when only even multi-indices carry nonzero coefficients
    bool even_only() const {
        for (const auto& [gamma, a] : coeffs_)
            if (a != Rational(0) && gamma.has_odd_component()) return false;
        return true;
    }

private:
    int n_;
    int order_;
    IndexMap<Rational> coeffs_;
};

// Coefficients a_{2 gamma} = (-1)^{|gamma|} / (gamma! 4^{|gamma|}) for
// |gamma| <= M-1; together with the plain Gaussian these give the
// order-2M Laplacian-power interpolant.
inline QPolynomial laplacian_polynomial(int dimension, int half_order) {
    if (half_order < 1) throw std::invalid_argument("laplacian_polynomial: M must be >= 1");
    const int order = 2 * half_order;
    IndexMap<Rational> coeffs;
    IndexSet gammas(dimension, half_order - 1);
    for (const auto& g : gammas.indices()) {
        MultiIndex two_g = g + g;
        Rational a(BigInt(1), g.fact() * int_pow(BigInt(4), g.order()));
        if (g.order() % 2 != 0) a = -a;
        coeffs.emplace(std::move(two_g), a);
    }
    return QPolynomial(dimension, order, std::move(coeffs));
}

}  // namespace hqi
