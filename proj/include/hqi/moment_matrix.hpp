// The unit upper triangular matrix A_{alpha beta} = a_{beta-alpha} over the
// graded-lex index set, its exact inverse, and the moment targets
// integral x^alpha H = alpha! * Ainv_{0 alpha} derived from it.

#pragma once

#include <vector>

#include "hqi/multi_index.hpp"
#include "hqi/qpolynomial.hpp"
#include "hqi/rational.hpp"

namespace hqi {

class MomentMatrix {
public:
    explicit MomentMatrix(const QPolynomial& q)
        : set_(q.dimension(), q.degree_bound()) {
        const size_t m = set_.count();
        a_.assign(m, std::vector<Rational>(m, Rational(0)));
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < m; ++j)
                if (componentwise_leq(set_[i], set_[j]))
                    a_[i][j] = q.coefficient(set_[j] - set_[i]);
        invert();
    }

    const IndexSet& index_set() const { return set_; }

    Rational entry(const MultiIndex& alpha, const MultiIndex& beta) const {
        return a_[set_.position(alpha)][set_.position(beta)];
    }
    Rational inverse_entry(const MultiIndex& alpha, const MultiIndex& beta) const {
        return ainv_[set_.position(alpha)][set_.position(beta)];
    }
    // Ainv_{0 alpha}, the row that sets the moment targets
    Rational inverse_row0(const MultiIndex& alpha) const {
        return ainv_[0][set_.position(alpha)];
    }

    const std::vector<std::vector<Rational>>& entries() const { return a_; }
    const std::vector<std::vector<Rational>>& inverse_entries() const { return ainv_; }

private:
    // Back-substitution on the unit upper triangular structure: graded-lex
    // ordering guarantees a_[i][j] = 0 for i > j and a_[i][i] = a_0 = 1.
    void invert() {
        const size_t m = set_.count();
        ainv_.assign(m, std::vector<Rational>(m, Rational(0)));
        for (size_t j = 0; j < m; ++j) {
            ainv_[j][j] = Rational(1);
            for (size_t i = j; i-- > 0;) {
                Rational s(0);
                for (size_t k = i + 1; k <= j; ++k)
                    if (a_[i][k] != Rational(0) && ainv_[k][j] != Rational(0))
                        s += a_[i][k] * ainv_[k][j];
                ainv_[i][j] = -s;
            }
        }
    }

    IndexSet set_;
    std::vector<std::vector<Rational>> a_;
    std::vector<std::vector<Rational>> ainv_;
};

inline MomentMatrix build_moment_matrix(const QPolynomial& q) { return MomentMatrix(q); }

// pi^{-n/2} integral x^alpha e^{-|x|^2} dx, exact: zero for odd components,
// else prod_j alpha_j! / ((alpha_j/2)! 2^{alpha_j}).
inline Rational gaussian_moment(const MultiIndex& alpha) {
    if (alpha.has_odd_component()) return Rational(0);
    Rational r(1);
    for (int j = 0; j < alpha.size(); ++j) {
        const int aj = alpha[j];
        r *= Rational(factorial(aj), factorial(aj / 2) * int_pow(BigInt(2), aj));
    }
    return r;
}

// Moments a generating function for Q must realize:
// integral x^alpha H = alpha! * Ainv_{0 alpha}, |alpha| <= N-1.
inline IndexMap<Rational> target_moments(const QPolynomial& q) {
    const MomentMatrix mat(q);
    IndexMap<Rational> t;
    for (const auto& alpha : mat.index_set().indices())
        t.emplace(alpha, Rational(alpha.fact()) * mat.inverse_row0(alpha));
    return t;
}

}  // namespace hqi
