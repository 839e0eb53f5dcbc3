// Simultaneous approximation of derivatives.
//
// d_j [H_k(x) e^{-|x|^2}] = -H_{k+e_j}(x) e^{-|x|^2} turns differentiation of
// a Hermite-Gaussian generator into an exact coefficient shift, and the
// operator identity d^beta M u = (h sqrt(D))^{-|beta|} M_{d^beta H} u reduces
// derivative evaluation to an ordinary lattice sum with the derived kernel.
// The continuous convolution C_delta is a quadrature-backed comparison object
// for tests, not a production path.

#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include "hqi/generating_function.hpp"
#include "hqi/interpolant.hpp"

namespace hqi {

struct DerivedGenerator {
    GeneratingFunction generator;  // the Hermite-Gaussian expansion of d^beta H
    MultiIndex beta;
};

inline DerivedGenerator differentiate_generator(const GeneratingFunction& h,
                                                const MultiIndex& beta) {
    if (h.anisotropy())
        throw std::invalid_argument("differentiate_generator: anisotropic kernels unsupported");
    if (beta.size() != h.dimension())
        throw std::invalid_argument("differentiate_generator: dimension mismatch");
    IndexMap<double> shifted;
    const double sign = beta.order() % 2 == 0 ? 1.0 : -1.0;
    for (const auto& [b, c] : h.coefficients()) {
        if (c == 0.0) continue;
        shifted[b + beta] += sign * c;
    }
    return {GeneratingFunction(h.dimension(), h.order() + beta.order(), std::move(shifted)),
            MultiIndex(beta)};
}

// d^beta M u (x) = (h sqrt(D))^{-|beta|} M_{d^beta H} u (x)
inline QIResult evaluate_qi_derivative(const GeneratingFunction& h, const QPolynomial& q,
                                       const HermiteData& data, const QIConfig& cfg,
                                       std::span<const double> x, const MultiIndex& beta) {
    if (beta.order() > 3)
        throw std::invalid_argument("evaluate_qi_derivative: |beta| <= 3 supported");
    const DerivedGenerator derived = differentiate_generator(h, beta);
    QIResult r = evaluate_qi(derived.generator, q, data, cfg, x);
    r.value *= std::pow(cfg.step(), -beta.order());
    return r;
}

struct QuadratureSpec {
    double radius = 9.0;       // half-width of the integration window in kernel units
    double panel_width = 0.5;  // composite panel width, same units
};

// C_delta u(x) = delta^{-n} integral H((x-y)/delta) Q(-delta d) u(y) dy,
// computed as integral H(t) sum_gamma a_gamma (-delta)^{|gamma|}
// d^gamma u(x - delta t) dt by tensorized composite 20-point Gauss-Legendre.
inline double convolution_oracle(const GeneratingFunction& h, const QPolynomial& q,
                                 const FieldSet& fields, double delta, std::span<const double> x,
                                 const QuadratureSpec& spec = {}) {
    if (!(delta > 0.0)) throw std::invalid_argument("convolution_oracle: delta must be positive");
    const int n = h.dimension();
    if (static_cast<int>(x.size()) != n || q.dimension() != n)
        throw std::invalid_argument("convolution_oracle: dimension mismatch");

    std::vector<std::pair<const ScalarField*, double>> channels;
    for (const auto& [gamma, a] : q.coefficients()) {
        if (a == Rational(0)) continue;
        auto it = fields.derivatives.find(gamma);
        if (it == fields.derivatives.end())
            throw std::invalid_argument("convolution_oracle: closure missing for a channel");
        channels.emplace_back(&it->second, to_double(a) * std::pow(-delta, gamma.order()));
    }

    using G = boost::math::quadrature::gauss<double, 20>;
    const int panels = std::max(1, static_cast<int>(std::ceil(2.0 * spec.radius / spec.panel_width)));
    // 1-D composite nodes and weights on [-radius, radius]
    std::vector<double> nodes, weights;
    for (int p = 0; p < panels; ++p) {
        const double a = -spec.radius + 2.0 * spec.radius * p / panels;
        const double b = -spec.radius + 2.0 * spec.radius * (p + 1) / panels;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (size_t i = 0; i < G::abscissa().size(); ++i) {
            const double t = G::abscissa()[i], w = G::weights()[i];
            nodes.push_back(mid + half * t);
            weights.push_back(w * half);
            if (t != 0.0) {
                nodes.push_back(mid - half * t);
                weights.push_back(w * half);
            }
        }
    }

    std::vector<size_t> idx(static_cast<size_t>(n), 0);
    std::vector<double> t(static_cast<size_t>(n)), y(static_cast<size_t>(n));
    NeumaierSum<long double> acc;
    while (true) {
        double wprod = 1.0;
        for (int j = 0; j < n; ++j) {
            t[static_cast<size_t>(j)] = nodes[idx[static_cast<size_t>(j)]];
            wprod *= weights[idx[static_cast<size_t>(j)]];
            y[static_cast<size_t>(j)] = x[j] - delta * t[static_cast<size_t>(j)];
        }
        double combo = 0.0;
        for (const auto& [field, w] : channels) combo += w * (*field)(y);
        acc.add(wprod * combo * h.eval(std::span<const double>(t)));
        int axis = n - 1;
        while (axis >= 0) {
            if (++idx[static_cast<size_t>(axis)] < nodes.size()) break;
            idx[static_cast<size_t>(axis)] = 0;
            --axis;
        }
        if (axis < 0) break;
    }
    return static_cast<double>(acc.total());
}

}  // namespace hqi
