// Construction of generating functions for a given derivative polynomial.
//
// For the Gaussian family the expansion coefficients are
//   c_beta = sum_{2 gamma <= beta} (-1)^{|gamma|} / (gamma! 4^{|gamma|})
//            * Ainv_{0, beta - 2 gamma},
// which keeps the whole synthesis exact until the coefficients enter a
// GeneratingFunction. The general construction from a table of
// Fourier-inverse derivatives of eta and the closed-form moment check
// live here as well.

#pragma once

#include <complex>
#include <map>

#include "hqi/generating_function.hpp"
#include "hqi/moment_matrix.hpp"
#include "hqi/qpolynomial.hpp"

namespace hqi {

inline IndexMap<Rational> hermite_generator_coefficients(const QPolynomial& q) {
    const MomentMatrix mat(q);
    const int n = q.dimension();
    IndexMap<Rational> c;
    for (const auto& beta : mat.index_set().indices()) {
        Rational s(0);
        IndexSet gammas(n, beta.order() / 2);
        for (const auto& gamma : gammas.indices()) {
            const MultiIndex two_gamma = gamma + gamma;
            if (!componentwise_leq(two_gamma, beta)) continue;
            Rational w(BigInt(1), gamma.fact() * int_pow(BigInt(4), gamma.order()));
            if (gamma.order() % 2 != 0) w = -w;
            s += w * mat.inverse_row0(beta - two_gamma);
        }
        c.emplace(beta, s);
    }
    return c;
}

inline GeneratingFunction build_hermite_generator(const QPolynomial& q) {
    IndexMap<double> c;
    for (const auto& [beta, v] : hermite_generator_coefficients(q)) c.emplace(beta, to_double(v));
    return GeneratingFunction(q.dimension(), q.order(), std::move(c));
}

// Coefficient table d_beta of the expansion H = sum_beta d_beta d^beta eta
// from a user-supplied table of values d^delta (F eta)^{-1}(0). Intended for
// real, even eta (odd entries vanish there); a nonzero imaginary residue in
// any coefficient is reported and rejected.
struct GeneralGenerator {
    IndexMap<double> eta_derivative_coefficients;
    double max_imag_residual = 0.0;
};

inline GeneralGenerator build_general_generator(const QPolynomial& q,
                                                const IndexMap<double>& fourier_inv_derivs) {
    const MultiIndex zero(q.dimension());
    auto it0 = fourier_inv_derivs.find(zero);
    if (it0 == fourier_inv_derivs.end() || it0->second == 0.0)
        throw std::invalid_argument("build_general_generator: (F eta)(0) must be nonzero");

    const MomentMatrix mat(q);
    const double two_pi = 2.0 * 3.14159265358979323846;
    const std::complex<double> inv_i_pow[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};  // i^{-k}

    GeneralGenerator out;
    for (const auto& beta : mat.index_set().indices()) {
        std::complex<double> d(0.0, 0.0);
        for (const auto& alpha : mat.index_set().indices()) {
            if (!componentwise_leq(alpha, beta)) continue;
            const MultiIndex delta = beta - alpha;
            auto it = fourier_inv_derivs.find(delta);
            if (it == fourier_inv_derivs.end())
                throw std::invalid_argument("build_general_generator: missing table entry");
            if (it->second == 0.0) continue;
            double w = to_double(mat.inverse_row0(alpha)) * it->second /
                       (to_double(Rational(delta.fact())) * std::pow(two_pi, delta.order()));
            if (alpha.order() % 2 != 0) w = -w;
            d += w * inv_i_pow[delta.order() % 4];
        }
        out.max_imag_residual = std::max(out.max_imag_residual, std::abs(d.imag()));
        out.eta_derivative_coefficients.emplace(beta, d.real());
    }
    const double scale = std::abs(it0->second);
    if (out.max_imag_residual > 1e-9 * scale)
        throw std::invalid_argument(
            "build_general_generator: table yields complex coefficients (eta not even?)");
    return out;
}

// pi^{-1/2} integral tau^a H_b(tau) e^{-tau^2} d tau, exact.
inline Rational hermite_gaussian_moment_1d(int a, int b) {
    const auto coeffs = hermite_monomial_coefficients(b);
    Rational s(0);
    for (size_t k = 0; k < coeffs.size(); ++k) {
        if (coeffs[k] == 0) continue;
        s += Rational(coeffs[k]) * gaussian_moment(MultiIndex{a + static_cast<int>(k)});
    }
    return s;
}

// integral x^alpha H(x) dx for a Hermite-Gaussian expansion, via the exact
// 1-D factors above. Rejects anisotropic kernels.
inline double generator_moment(const GeneratingFunction& h, const MultiIndex& alpha) {
    if (h.anisotropy())
        throw std::invalid_argument("generator_moment: anisotropic kernel not supported");
    if (alpha.size() != h.dimension())
        throw std::invalid_argument("generator_moment: dimension mismatch");
    double s = 0.0;
    for (const auto& [beta, c] : h.coefficients()) {
        if (c == 0.0) continue;
        Rational factor(1);
        for (int j = 0; j < alpha.size(); ++j) {
            factor *= hermite_gaussian_moment_1d(alpha[j], beta[j]);
            if (factor == Rational(0)) break;
        }
        s += c * to_double(factor);
    }
    return s;
}

struct MomentReport {
    IndexMap<double> residuals;
    double max_abs_residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Residuals of conditions (sum_{alpha <= beta} a_{beta-alpha}/alpha! int x^alpha H)
// against delta_{|beta| 0}, computed through the closed-form moment route.
inline MomentReport verify_moment_conditions(const GeneratingFunction& h, const QPolynomial& q,
                                             double tol) {
    if (h.dimension() != q.dimension())
        throw std::invalid_argument("verify_moment_conditions: dimension mismatch");
    MomentReport report;
    report.tolerance = tol;
    IndexSet betas(q.dimension(), q.degree_bound());
    for (const auto& beta : betas.indices()) {
        double s = 0.0;
        for (const auto& alpha : betas.indices()) {
            if (!componentwise_leq(alpha, beta)) continue;
            const Rational a = q.coefficient(beta - alpha);
            if (a == Rational(0)) continue;
            s += to_double(a / Rational(alpha.fact())) * generator_moment(h, alpha);
        }
        const double r = s - (beta.order() == 0 ? 1.0 : 0.0);
        report.residuals.emplace(beta, r);
        report.max_abs_residual = std::max(report.max_abs_residual, std::abs(r));
    }
    report.pass = report.max_abs_residual <= tol;
    return report;
}

}  // namespace hqi
