// Fourier-side analysis of the lattice defect.
//
// sigma_beta(x, D) = (pi D)^{-n/2} sum_m H_beta((x-m)/sqrt(D)) e^{-|x-m|^2/D}
//                    (minus 1 for beta = 0)
//                  = (-2 pi i)^{|beta|} D^{|beta|/2} sum_{m != 0} m^beta
//                    e^{-pi^2 D |m|^2} e^{2 pi i <m,x>}.
//
// The production route is the dual series; +-m contributions are combined in
// closed real form, so the advertised imaginary residue is identically zero.
// Direct lattice summation is kept alongside as the cross-check route of the
// Poisson identity.

#pragma once

#include <cmath>
#include <complex>
#include <functional>

#include "hqi/accumulate.hpp"
#include "hqi/generating_function.hpp"
#include "hqi/lattice.hpp"
#include "hqi/linalg.hpp"
#include "hqi/qpolynomial.hpp"

namespace hqi {

inline constexpr double kPi = 3.14159265358979323846;

struct SigmaValue {
    double value = 0.0;
    double imag_residual = 0.0;
    int cutoff = 0;  // frequency box |nu|_inf <= cutoff actually used
};

namespace detail {

// Smallest nu_max with e^{-pi^2 D nu^2} nu^{deg} below budget * leading term.
inline int frequency_cutoff(double shape, int degree, double budget) {
    const double leading = std::exp(-kPi * kPi * shape);
    int nu = 1;
    while (nu < 64) {
        const double next = (nu + 1.0);
        const double env = std::exp(-kPi * kPi * shape * next * next) * std::pow(next, degree);
        if (env < budget * std::max(leading, 1e-300)) break;
        ++nu;
    }
    return nu;
}

// reduce to the periodicity cell so sigma(x + k) is bitwise sigma(x)
inline std::vector<double> reduce_mod_one(std::span<const double> x) {
    std::vector<double> r(x.size());
    for (size_t j = 0; j < x.size(); ++j) r[j] = x[j] - std::round(x[j]);
    return r;
}

// first nonzero component positive: picks one of each +-m pair
inline bool lex_positive(std::span<const long long> m) {
    for (long long v : m) {
        if (v > 0) return true;
        if (v < 0) return false;
    }
    return false;
}

}  // namespace detail

// Dual-series evaluation of sigma_beta; x in lattice units.
inline SigmaValue sigma_beta(const MultiIndex& beta, std::span<const double> x, double shape,
                             double tail_tol = 1e-16) {
    if (static_cast<int>(x.size()) != beta.size())
        throw std::invalid_argument("sigma_beta: dimension mismatch");
    if (!(shape > 0.0)) throw std::invalid_argument("sigma_beta: D must be positive");

    const int n = beta.size();
    const auto xr = detail::reduce_mod_one(x);
    const int cutoff = detail::frequency_cutoff(shape, beta.order(), 1e-2 * tail_tol);

    // (-2 pi i)^{|beta|} = (2 pi)^{|beta|} (-i)^{|beta|}; the +-m pair combines
    // to 2 cos / +-2 sin of the phase, always real.
    const int mod = beta.order() % 4;
    const double amp = std::pow(2.0 * kPi, beta.order()) * std::pow(shape, beta.order() / 2.0);

    LatticeBox box;
    box.ranges.assign(static_cast<size_t>(n), {-cutoff, cutoff});
    NeumaierSum<long double> acc;
    for_each_lattice_point(box, [&](std::span<const long long> m) {
        if (!detail::lex_positive(m)) return;
        long double m2 = 0.0L, phase = 0.0L;
        long double mono = 1.0L;
        for (int j = 0; j < n; ++j) {
            const long double mj = static_cast<long double>(m[static_cast<size_t>(j)]);
            m2 += mj * mj;
            phase += mj * xr[static_cast<size_t>(j)];
            for (int k = 0; k < beta[j]; ++k) mono *= mj;
        }
        const long double envelope = std::exp(-static_cast<long double>(kPi * kPi) * shape * m2);
        const long double theta = 2.0L * static_cast<long double>(kPi) * phase;
        long double trig = 0.0L;
        switch (mod) {
            case 0: trig = 2.0L * std::cos(theta); break;
            case 1: trig = 2.0L * std::sin(theta); break;
            case 2: trig = -2.0L * std::cos(theta); break;
            case 3: trig = -2.0L * std::sin(theta); break;
        }
        acc.add(mono * envelope * trig);
    });

    return {static_cast<double>(amp * acc.total()), 0.0, cutoff};
}

// Direct lattice summation of the same object; the oracle side of the
// Poisson identity and of the saturation CLI cross-checks.
inline double sigma_beta_lattice(const MultiIndex& beta, std::span<const double> x, double shape,
                                 double tol = 1e-16) {
    const int n = beta.size();
    const double radius = truncation_radius(tol, beta.order()) * std::sqrt(shape);
    LatticeBox box;
    box.ranges.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        box.ranges[static_cast<size_t>(j)] = {
            static_cast<long long>(std::ceil(x[j] - radius)),
            static_cast<long long>(std::floor(x[j] + radius))};

    NeumaierSum<long double> acc;
    std::vector<long double> t(static_cast<size_t>(n));
    for_each_lattice_point(box, [&](std::span<const long long> m) {
        long double q2 = 0.0L;
        for (int j = 0; j < n; ++j) {
            t[static_cast<size_t>(j)] =
                (static_cast<long double>(x[j]) - m[static_cast<size_t>(j)]) /
                std::sqrt(static_cast<long double>(shape));
            q2 += t[static_cast<size_t>(j)] * t[static_cast<size_t>(j)];
        }
        acc.add(hermite_eval<long double>(beta, std::span<const long double>(t)) * std::exp(-q2));
    });
    const long double pref =
        std::pow(static_cast<long double>(kPi) * shape, -static_cast<long double>(n) / 2);
    double v = static_cast<double>(pref * acc.total());
    if (beta.order() == 0) v -= 1.0;
    return v;
}

// Poisson sum on the affine lattice C Z^n:
//   Sigma_alpha(xi, D) = det C (pi D)^{-n/2} sum_m ((xi - C m)/sqrt(D))^alpha
//                        e^{-|xi - C m|^2/D}
//                      = sum_nu (i/2pi)^{|alpha|} d^alpha F eta(sqrt(D) C^{-T} nu)
//                        e^{2 pi i <xi, C^{-T} nu>},
// with eta the normalized Gaussian. The nu = 0 term contributes
// alpha!/(2^{|alpha|} gamma!) when alpha = 2 gamma. Pairing +-nu keeps the
// series manifestly real.
inline SigmaValue sigma_affine(const MultiIndex& alpha, std::span<const double> xi, double shape,
                               const SquareMatrix& c, double tail_tol = 1e-16) {
    const int n = alpha.size();
    if (static_cast<int>(xi.size()) != n || c.size() != n)
        throw std::invalid_argument("sigma_affine: dimension mismatch");
    const SquareMatrix ct = c.transpose();
    const SquareMatrix cinv_t = inverse(ct);

    SigmaValue out;
    // nu = 0 term
    if (!alpha.has_odd_component()) {
        const MultiIndex g = alpha.half();
        out.value = to_double(Rational(alpha.fact(), g.fact() * int_pow(BigInt(2), alpha.order())));
    }

    // box big enough that |C^{-T} nu| >= cutoff is outside:
    // |C^{-T} nu| >= |nu| / ||C^T||_2 >= |nu| / ||C||_F
    const double cnorm = c.frobenius_norm();
    const int freq = detail::frequency_cutoff(shape / std::max(cnorm * cnorm, 1e-12),
                                              alpha.order(), 1e-2 * tail_tol);
    const int nu_max = freq;
    out.cutoff = nu_max;

    const int mod = alpha.order() % 4;
    LatticeBox box;
    box.ranges.assign(static_cast<size_t>(n), {-nu_max, nu_max});
    NeumaierSum<long double> acc;
    std::vector<long double> lambda(static_cast<size_t>(n));
    for_each_lattice_point(box, [&](std::span<const long long> nu) {
        if (!detail::lex_positive(nu)) return;
        long double phase = 0.0L, l2 = 0.0L;
        for (int i = 0; i < n; ++i) {
            long double li = 0.0L;
            for (int j = 0; j < n; ++j)
                li += static_cast<long double>(cinv_t(i, j)) * nu[static_cast<size_t>(j)];
            lambda[static_cast<size_t>(i)] = li;
            l2 += li * li;
            phase += li * xi[static_cast<size_t>(i)];
        }
        // d^delta F eta(lambda) = (-pi)^{|delta|} H_delta(pi lambda) e^{-pi^2 |lambda|^2}
        const long double pi_l = static_cast<long double>(kPi);
        std::vector<long double> arg(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            arg[static_cast<size_t>(i)] = pi_l * std::sqrt(static_cast<long double>(shape)) *
                                          lambda[static_cast<size_t>(i)];
        const long double herm = hermite_eval<long double>(alpha, std::span<const long double>(arg));
        const long double envelope = std::exp(-pi_l * pi_l * shape * l2);
        const long double theta = 2.0L * pi_l * phase;
        // (i/2pi)^{|a|} (-pi)^{|a|} = (-i/2)^{|a|}
        long double trig = 0.0L;
        switch (mod) {
            case 0: trig = 2.0L * std::cos(theta); break;
            case 1: trig = 2.0L * std::sin(theta); break;
            case 2: trig = -2.0L * std::cos(theta); break;
            case 3: trig = -2.0L * std::sin(theta); break;
        }
        acc.add(herm * envelope * trig);
    });
    out.value += static_cast<double>(acc.total() / std::pow(2.0L, alpha.order()));
    return out;
}

// direct affine lattice sum, the oracle side
inline double sigma_affine_lattice(const MultiIndex& alpha, std::span<const double> xi, double shape,
                                   const SquareMatrix& c, double tol = 1e-16) {
    const int n = alpha.size();
    const double r_scaled = truncation_radius(tol, alpha.order());
    const double radius = r_scaled * std::sqrt(shape);
    // |xi - C m| <= radius implies |m - C^{-1} xi| <= radius ||C^{-1}||
    const SquareMatrix cinv = inverse(c);
    std::vector<double> center = cinv.apply(xi);
    const double inflate = radius * cinv.frobenius_norm();
    LatticeBox box;
    box.ranges.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        box.ranges[static_cast<size_t>(j)] = {
            static_cast<long long>(std::ceil(center[static_cast<size_t>(j)] - inflate)),
            static_cast<long long>(std::floor(center[static_cast<size_t>(j)] + inflate))};

    const double det_c = std::abs(determinant(c));
    NeumaierSum<long double> acc;
    std::vector<long double> t(static_cast<size_t>(n));
    for_each_lattice_point(box, [&](std::span<const long long> m) {
        long double q2 = 0.0L;
        for (int i = 0; i < n; ++i) {
            long double cm = 0.0L;
            for (int j = 0; j < n; ++j)
                cm += static_cast<long double>(c(i, j)) * m[static_cast<size_t>(j)];
            t[static_cast<size_t>(i)] = (static_cast<long double>(xi[static_cast<size_t>(i)]) - cm) /
                                        std::sqrt(static_cast<long double>(shape));
            q2 += t[static_cast<size_t>(i)] * t[static_cast<size_t>(i)];
        }
        if (q2 > r_scaled * r_scaled) return;
        long double mono = 1.0L;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < alpha[i]; ++k) mono *= t[static_cast<size_t>(i)];
        acc.add(mono * std::exp(-q2));
    });
    const long double pref =
        det_c * std::pow(static_cast<long double>(kPi) * shape, -static_cast<long double>(n) / 2);
    return static_cast<double>(pref * acc.total());
}

// Polynomial-times-Gaussian representation of F H,
//   F H(lambda) = P(lambda) e^{-pi^2 |lambda|^2},
// with P(lambda) = sum_beta c_beta (-2 pi i lambda)^beta. Differentiation
// stays in the family: d_j (P e^G) = (d_j P - 2 pi^2 lambda_j P) e^G.
class FourierTransformPoly {
public:
    static FourierTransformPoly from_generator(const GeneratingFunction& h) {
        if (h.anisotropy())
            throw std::invalid_argument("FourierTransformPoly: anisotropic kernels unsupported");
        FourierTransformPoly p;
        p.n_ = h.dimension();
        const std::complex<double> minus_i_pow[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
        for (const auto& [beta, c] : h.coefficients()) {
            if (c == 0.0) continue;
            const std::complex<double> coef =
                c * std::pow(2.0 * kPi, beta.order()) * minus_i_pow[beta.order() % 4];
            p.coeffs_[beta] += coef;
        }
        return p;
    }

    int dimension() const { return n_; }

    int degree() const {
        int d = 0;
        for (const auto& [m, c] : coeffs_)
            if (std::abs(c) != 0.0) d = std::max(d, m.order());
        return d;
    }

    FourierTransformPoly differentiated(int axis) const {
        FourierTransformPoly out;
        out.n_ = n_;
        for (const auto& [m, c] : coeffs_) {
            if (m[axis] > 0) {
                MultiIndex down(m);
                down[axis] -= 1;
                out.coeffs_[down] += c * double(m[axis]);
            }
            MultiIndex up(m);
            up[axis] += 1;
            out.coeffs_[up] += c * (-2.0 * kPi * kPi);
        }
        return out;
    }

    std::complex<double> eval(std::span<const double> lambda) const {
        std::complex<double> poly{0.0, 0.0};
        for (const auto& [m, c] : coeffs_) poly += c * m.monomial<double>(lambda);
        double l2 = 0.0;
        for (double v : lambda) l2 += v * v;
        return poly * std::exp(-kPi * kPi * l2);
    }

private:
    IndexMap<std::complex<double>> coeffs_;
    int n_ = 0;
};

struct SaturationBound {
    double shape = 0.0;
    IndexMap<double> per_alpha;  // bounds on |E_alpha|
    IndexMap<double> per_beta;   // the aggregated combinations per beta
    double epsilon = 0.0;        // max over beta
    int cutoff = 0;
};

// |E_alpha| <= (2 pi)^{-|alpha|} sum_{nu != 0} |d^alpha F H(sqrt(D) nu)|,
// aggregated over beta as sum_{alpha <= beta} |a_{beta-alpha}|/alpha! |E_alpha|.
inline SaturationBound epsilon_bound(const GeneratingFunction& h, const QPolynomial& q,
                                     double shape) {
    if (h.dimension() != q.dimension())
        throw std::invalid_argument("epsilon_bound: dimension mismatch");
    const int n = h.dimension();
    SaturationBound out;
    out.shape = shape;

    // d^alpha F H by walking the index set upward from the base transform
    IndexMap<FourierTransformPoly> transforms;
    const IndexSet alphas(n, q.degree_bound());
    transforms.emplace(MultiIndex(n), FourierTransformPoly::from_generator(h));
    for (const auto& alpha : alphas.indices()) {
        if (alpha.order() == 0) continue;
        int axis = 0;
        while (alpha[axis] == 0) ++axis;
        MultiIndex parent(alpha);
        parent[axis] -= 1;
        transforms.emplace(alpha, transforms.at(parent).differentiated(axis));
    }

    for (const auto& alpha : alphas.indices()) {
        const auto& p = transforms.at(alpha);
        const int cutoff = detail::frequency_cutoff(shape, p.degree(), 1e-4);
        out.cutoff = std::max(out.cutoff, cutoff);
        LatticeBox box;
        box.ranges.assign(static_cast<size_t>(n), {-cutoff, cutoff});
        NeumaierSum<long double> acc;
        std::vector<double> lambda(static_cast<size_t>(n));
        for_each_lattice_point(box, [&](std::span<const long long> nu) {
            bool zero = true;
            for (int j = 0; j < n; ++j) {
                lambda[static_cast<size_t>(j)] = std::sqrt(shape) * nu[static_cast<size_t>(j)];
                if (nu[static_cast<size_t>(j)] != 0) zero = false;
            }
            if (zero) return;
            acc.add(std::abs(p.eval(lambda)));
        });
        out.per_alpha.emplace(alpha,
                              static_cast<double>(acc.total()) / std::pow(2.0 * kPi, alpha.order()));
    }

    for (const auto& beta : alphas.indices()) {
        double s = 0.0;
        for (const auto& alpha : alphas.indices()) {
            if (!componentwise_leq(alpha, beta)) continue;
            const Rational a = q.coefficient(beta - alpha);
            if (a == Rational(0)) continue;
            s += std::abs(to_double(a / Rational(alpha.fact()))) * out.per_alpha.at(alpha);
        }
        out.per_beta.emplace(beta, s);
        out.epsilon = std::max(out.epsilon, s);
    }
    return out;
}

// Saturation-floor prediction at a point:
// epsilon * sum_{|beta| <= N-1} (h sqrt(D))^{|beta|} |d^beta u(x)| with the
// derivative magnitudes supplied by the caller (sup bounds are fine).
inline double saturation_floor(const SaturationBound& bound, double step,
                               const IndexMap<double>& deriv_sups) {
    double s = 0.0;
    for (const auto& [beta, amp] : bound.per_beta) {
        auto it = deriv_sups.find(beta);
        if (it == deriv_sups.end()) continue;
        s += amp * std::pow(step, beta.order()) * std::abs(it->second);
    }
    return s;
}

// Saturation bounds for the anisotropic kernel on the lattice C Z^n:
// |E_beta - delta_{|beta| 0}| <= sum_{2 gamma <= beta}
//   pi^{|beta - 2 gamma|} / (gamma! (beta-2gamma)! 2^{|beta|})
//   sum_{nu != 0} |d^{beta-2gamma} F eta(sqrt(D) C^{-T} nu)|.
inline SaturationBound epsilon_bound_anisotropic(const SquareMatrix& b, int half_order,
                                                 double shape) {
    const int n = b.size();
    const Anisotropy aniso = Anisotropy::from_matrix(b);
    const SquareMatrix cinv_t = inverse(aniso.factor.transpose());
    const double cnorm = aniso.factor.frobenius_norm();

    SaturationBound out;
    out.shape = shape;

    const IndexSet deltas(n, 2 * half_order - 1);
    // S_delta = sum_{nu != 0} |d^delta F eta(sqrt(D) C^{-T} nu)|
    IndexMap<double> dual_sums;
    for (const auto& delta : deltas.indices()) {
        const int cutoff = detail::frequency_cutoff(shape / std::max(cnorm * cnorm, 1e-12),
                                                    delta.order(), 1e-4);
        out.cutoff = std::max(out.cutoff, cutoff);
        LatticeBox box;
        box.ranges.assign(static_cast<size_t>(n), {-cutoff, cutoff});
        NeumaierSum<long double> acc;
        std::vector<double> arg(static_cast<size_t>(n));
        for_each_lattice_point(box, [&](std::span<const long long> nu) {
            bool zero = true;
            double l2 = 0.0;
            for (int i = 0; i < n; ++i) {
                double li = 0.0;
                for (int j = 0; j < n; ++j) li += cinv_t(i, j) * nu[static_cast<size_t>(j)];
                if (nu[static_cast<size_t>(i)] != 0) zero = false;
                arg[static_cast<size_t>(i)] = kPi * std::sqrt(shape) * li;
                l2 += li * li;
            }
            if (zero) return;
            acc.add(std::abs(hermite_eval<double>(delta, arg)) *
                    std::exp(-kPi * kPi * shape * l2));
        });
        dual_sums.emplace(delta,
                          std::pow(kPi, delta.order()) * static_cast<double>(acc.total()));
    }

    for (const auto& beta : deltas.indices()) {
        double s = 0.0;
        const IndexSet gammas(n, beta.order() / 2);
        for (const auto& gamma : gammas.indices()) {
            const MultiIndex two_gamma = gamma + gamma;
            if (!componentwise_leq(two_gamma, beta)) continue;
            const MultiIndex delta = beta - two_gamma;
            const double w = 1.0 / (to_double(Rational(gamma.fact() * delta.fact())) *
                                    std::pow(4.0, gamma.order()) *
                                    std::pow(2.0 * kPi, delta.order()));
            s += w * dual_sums.at(delta);
        }
        out.per_beta.emplace(beta, s);
        out.epsilon = std::max(out.epsilon, s);
    }
    return out;
}

using AnalyticExtension =
    std::function<std::complex<double>(std::span<const std::complex<double>>)>;

struct SaturationPrediction {
    double value = 0.0;
    double imag_residual = 0.0;
    int cutoff = 0;
};

// Exact saturation series for harmonic u sampled on the full lattice:
//   sum_{m != 0} u~(x + i pi h D m) e^{-pi^2 D |m|^2} e^{2 pi i <m, x>/h}.
inline SaturationPrediction predict_harmonic_saturation(const AnalyticExtension& u_ext, int n,
                                                        std::span<const double> x, double h,
                                                        double shape, int cutoff = 0) {
    if (static_cast<int>(x.size()) != n)
        throw std::invalid_argument("predict_harmonic_saturation: dimension mismatch");
    if (cutoff <= 0) cutoff = detail::frequency_cutoff(shape, 0, 1e-6) + 2;

    std::vector<double> xi(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) xi[static_cast<size_t>(j)] = x[j] / h;
    const auto xr = detail::reduce_mod_one(xi);

    LatticeBox box;
    box.ranges.assign(static_cast<size_t>(n), {-cutoff, cutoff});
    NeumaierSum<long double> re, im;
    std::vector<std::complex<double>> z(static_cast<size_t>(n));
    for_each_lattice_point(box, [&](std::span<const long long> m) {
        double m2 = 0.0, phase = 0.0;
        bool zero = true;
        for (int j = 0; j < n; ++j) {
            const double mj = static_cast<double>(m[static_cast<size_t>(j)]);
            if (m[static_cast<size_t>(j)] != 0) zero = false;
            m2 += mj * mj;
            phase += mj * xr[static_cast<size_t>(j)];
            z[static_cast<size_t>(j)] = {x[j], kPi * h * shape * mj};
        }
        if (zero) return;
        const std::complex<double> term = u_ext(z) * std::exp(-kPi * kPi * shape * m2) *
                                          std::exp(std::complex<double>(0.0, 2.0 * kPi * phase));
        re.add(term.real());
        im.add(term.imag());
    });
    return {static_cast<double>(re.total()), static_cast<double>(im.total()), cutoff};
}

// The polynomially truncated variant of the same series, built from grid-point
// derivatives through the sigma functions:
//   sum_{|beta| <= K-1} (-h sqrt(D)/2)^{|beta|} (d^beta u(x)/beta!) sigma_beta(x/h, D).
inline double predict_harmonic_saturation_taylor(const IndexMap<double>& derivs, int n,
                                                 std::span<const double> x, double h,
                                                 double shape, double tail_tol = 1e-16) {
    std::vector<double> xi(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) xi[static_cast<size_t>(j)] = x[j] / h;
    const double half_step = -0.5 * h * std::sqrt(shape);
    NeumaierSum<long double> acc;
    for (const auto& [beta, du] : derivs) {
        if (du == 0.0) continue;
        const SigmaValue sv = sigma_beta(beta, xi, shape, tail_tol);
        acc.add(std::pow(half_step, beta.order()) * du / to_double(Rational(beta.fact())) *
                sv.value);
    }
    return static_cast<double>(acc.total());
}

// triangle-inequality amplitude bound sup_x |sigma_beta(x, D)|
inline double sigma_sup_amplitude(const MultiIndex& beta, double shape) {
    const int n = beta.size();
    const int cutoff = detail::frequency_cutoff(shape, beta.order(), 1e-18);
    LatticeBox box;
    box.ranges.assign(static_cast<size_t>(n), {-cutoff, cutoff});
    NeumaierSum<long double> acc;
    for_each_lattice_point(box, [&](std::span<const long long> m) {
        long double m2 = 0.0L, mono = 1.0L;
        bool zero = true;
        for (int j = 0; j < n; ++j) {
            const long double mj = static_cast<long double>(m[static_cast<size_t>(j)]);
            if (m[static_cast<size_t>(j)] != 0) zero = false;
            m2 += mj * mj;
            for (int k = 0; k < beta[j]; ++k) mono *= std::abs(mj);
        }
        if (zero) return;
        acc.add(mono * std::exp(-static_cast<long double>(kPi * kPi) * shape * m2));
    });
    return std::pow(2.0 * kPi, beta.order()) * std::pow(shape, beta.order() / 2.0) *
           static_cast<double>(acc.total());
}

}  // namespace hqi
