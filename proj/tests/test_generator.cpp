#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "hqi/generator_synthesis.hpp"
#include "oracles.hpp"

using namespace hqi;
namespace oracle = hqi::testing;

namespace {
const double kPi = 3.14159265358979323846;

QPolynomial example2_polynomial(Rational a1, Rational a2, Rational a3) {
    IndexMap<Rational> coeffs;
    if (a1 != Rational(0)) coeffs.emplace(MultiIndex{1}, a1);
    if (a2 != Rational(0)) coeffs.emplace(MultiIndex{2}, a2);
    if (a3 != Rational(0)) coeffs.emplace(MultiIndex{3}, a3);
    return QPolynomial(1, 4, std::move(coeffs));
}
}  // namespace

TEST_CASE("Q = 1, N = 2M generator equals the Laguerre closed form") {
    std::mt19937_64 rng(37);
    for (int n = 1; n <= 3; ++n) {
        for (int m = 1; m <= 4; ++m) {
            const GeneratingFunction h = build_hermite_generator(QPolynomial::one(n, 2 * m));
            for (int trial = 0; trial < 25; ++trial) {
                const auto x = oracle::random_point(rng, n, -2.0, 2.0);
                double r2 = 0.0;
                for (double v : x) r2 += v * v;
                const double want =
                    std::pow(kPi, -n / 2.0) * laguerre_eval(m - 1, n / 2.0, r2) * std::exp(-r2);
                const double got = h.eval(std::span<const double>(x));
                CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
            }
        }
    }
}

TEST_CASE("N = 2 generator matches pi^{-n/2}(1 - 2 sum a_beta x^beta) e^{-|x|^2}") {
    IndexMap<Rational> coeffs;
    coeffs.emplace(MultiIndex{1, 0}, rat(1, 4));
    coeffs.emplace(MultiIndex{0, 1}, rat(-1, 2));
    const QPolynomial q(2, 2, std::move(coeffs));
    const GeneratingFunction h = build_hermite_generator(q);

    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        const auto x = oracle::random_point(rng, 2, -2.0, 2.0);
        const double want = (1.0 / kPi) * (1.0 - 2.0 * (0.25 * x[0] - 0.5 * x[1])) *
                            std::exp(-(x[0] * x[0] + x[1] * x[1]));
        CHECK(std::abs(h.eval(std::span<const double>(x)) - want) < 1e-14);
    }
}

TEST_CASE("Example 2 generators have the printed coefficient tables") {
    // a = 0: classical eta(x) = pi^{-1/2} e^{-x^2} (3/2 - x^2)
    {
        const auto c = hermite_generator_coefficients(QPolynomial::one(1, 4));
        CHECK(c.at(MultiIndex{0}) == Rational(1));
        CHECK(c.at(MultiIndex{1}) == Rational(0));
        CHECK(c.at(MultiIndex{2}) == rat(-1, 4));
        CHECK(c.at(MultiIndex{3}) == Rational(0));
    }
    // a1 = -1/2: H(x) = pi^{-1/2} (1 + x) e^{-x^2}
    {
        const auto c = hermite_generator_coefficients(example2_polynomial(rat(-1, 2), rat(0), rat(0)));
        CHECK(c.at(MultiIndex{0}) == Rational(1));
        CHECK(c.at(MultiIndex{1}) == rat(1, 2));
        CHECK(c.at(MultiIndex{2}) == Rational(0));
        CHECK(c.at(MultiIndex{3}) == Rational(0));
    }
    // a2 = -1/4: H(x) = pi^{-1/2} e^{-x^2}
    {
        const auto c = hermite_generator_coefficients(example2_polynomial(rat(0), rat(-1, 4), rat(0)));
        CHECK(c.at(MultiIndex{0}) == Rational(1));
        CHECK(c.at(MultiIndex{1}) == Rational(0));
        CHECK(c.at(MultiIndex{2}) == Rational(0));
        CHECK(c.at(MultiIndex{3}) == Rational(0));
    }
}

TEST_CASE("Laguerre recovery holds at coefficient level") {
    // For Q = 1, N = 2M: sum_{|beta|=j} H_{2 beta}/beta! = Delta^j e^{-|x|^2}/j!
    // expansion, i.e. c_{2 gamma} = (-1)^{|gamma|}/(gamma! 4^{|gamma|}), zero otherwise.
    for (int n = 1; n <= 3; ++n) {
        for (int m = 1; m <= 3; ++m) {
            const auto c = hermite_generator_coefficients(QPolynomial::one(n, 2 * m));
            for (const auto& [beta, v] : c) {
                if (beta.has_odd_component()) {
                    CHECK(v == Rational(0));
                } else {
                    const MultiIndex g = beta.half();
                    Rational want(BigInt(1), g.fact() * int_pow(BigInt(4), g.order()));
                    if (g.order() % 2 != 0) want = -want;
                    CHECK(v == want);
                }
            }
        }
    }
}

TEST_CASE("radial Q yields no odd-degree coefficients") {
    IndexMap<Rational> coeffs;
    coeffs.emplace(MultiIndex{2, 0}, rat(1, 4));
    coeffs.emplace(MultiIndex{0, 2}, rat(1, 4));
    coeffs.emplace(MultiIndex{2, 2}, rat(-1, 2));
    const QPolynomial q(2, 6, std::move(coeffs));
    REQUIRE(q.even_only());
    for (const auto& [beta, v] : hermite_generator_coefficients(q))
        if (beta.has_odd_component()) CHECK(v == Rational(0));
}

TEST_CASE("synthesized generators satisfy the moment conditions") {
    std::mt19937_64 rng(43);
    for (int n = 1; n <= 3; ++n) {
        for (int order = 2; order <= (n == 3 ? 4 : 6); ++order) {
            const QPolynomial q = oracle::random_qpolynomial(rng, n, order);
            const GeneratingFunction h = build_hermite_generator(q);
            const MomentReport r = verify_moment_conditions(h, q, 1e-10);
            CHECK(r.pass);
        }
    }
}

TEST_CASE("normalization: synthesized generators integrate to one") {
    std::mt19937_64 rng(47);
    const QPolynomial q = oracle::random_qpolynomial(rng, 2, 4);
    const GeneratingFunction h = build_hermite_generator(q);
    CHECK(std::abs(generator_moment(h, MultiIndex{0, 0}) - 1.0) < 1e-12);
}

TEST_CASE("plain Gaussian with Laplacian coefficients passes; with Q = 1, N = 4 fails at beta = 2") {
    const GeneratingFunction gauss2 = GeneratingFunction::gaussian(2);
    const MomentReport ok = verify_moment_conditions(gauss2, laplacian_polynomial(2, 2), 1e-12);
    CHECK(ok.pass);
    CHECK(ok.max_abs_residual == 0.0);

    const GeneratingFunction gauss1 = GeneratingFunction::gaussian(1);
    const MomentReport bad = verify_moment_conditions(gauss1, QPolynomial::one(1, 4), 1e-12);
    CHECK_FALSE(bad.pass);
    CHECK(std::abs(bad.residuals.at(MultiIndex{2}) - 0.25) < 1e-15);
}

TEST_CASE("moment conditions cross-checked by quadrature") {
    std::mt19937_64 rng(53);
    const QPolynomial q = oracle::random_qpolynomial(rng, 1, 5);
    const GeneratingFunction h = build_hermite_generator(q);
    for (int a = 0; a < 5; ++a) {
        const double closed = generator_moment(h, MultiIndex{a});
        const double quad = oracle::quad_1d(
            [&](double t) {
                const std::vector<double> x{t};
                return std::pow(t, a) * h.eval(std::span<const double>(x));
            },
            -10.0, 10.0, 24);
        CHECK(std::abs(closed - quad) < 1e-10);
    }
}

TEST_CASE("general generator from the Gaussian derivative table") {
    const int n = 1;
    // table: d^{2 gamma}(F eta)^{-1}(0) = pi^{2|gamma|} (2 gamma)!/gamma!
    auto gaussian_table = [&](int order) {
        IndexMap<double> t;
        const IndexSet deltas(n, order - 1);
        for (const auto& delta : deltas.indices()) {
            if (delta.has_odd_component()) {
                t.emplace(delta, 0.0);
            } else {
                const MultiIndex g = delta.half();
                t.emplace(delta, std::pow(kPi, delta.order()) *
                                     to_double(Rational(delta.fact(), g.fact())));
            }
        }
        return t;
    };

    SECTION("Q = 1, N = 4 reproduces the 3/2 - x^2 expansion") {
        const auto gg = build_general_generator(QPolynomial::one(n, 4), gaussian_table(4));
        // d_beta multiplies d^beta eta = (-1)^{|beta|} pi^{-1/2} H_beta e^{-x^2}
        CHECK(std::abs(gg.eta_derivative_coefficients.at(MultiIndex{0}) - 1.0) < 1e-14);
        CHECK(std::abs(gg.eta_derivative_coefficients.at(MultiIndex{1})) < 1e-14);
        CHECK(std::abs(gg.eta_derivative_coefficients.at(MultiIndex{2}) - (-0.25)) < 1e-14);
        CHECK(std::abs(gg.eta_derivative_coefficients.at(MultiIndex{3})) < 1e-14);
    }

    SECTION("single-entry table with N = 1 returns eta itself") {
        IndexMap<double> t;
        t.emplace(MultiIndex{0}, 1.0);
        const auto gg = build_general_generator(QPolynomial::one(n, 1), t);
        REQUIRE(gg.eta_derivative_coefficients.size() == 1);
        CHECK(gg.eta_derivative_coefficients.at(MultiIndex{0}) == 1.0);
    }

    SECTION("random Q coincides with the Hermite synthesis") {
        std::mt19937_64 rng(59);
        const int order = 3;
        IndexMap<double> table;
        const IndexSet deltas2(2, order - 1);
        for (const auto& delta : deltas2.indices()) {
            if (delta.has_odd_component()) {
                table.emplace(delta, 0.0);
            } else {
                const MultiIndex g = delta.half();
                table.emplace(delta, std::pow(kPi, delta.order()) *
                                         to_double(Rational(delta.fact(), g.fact())));
            }
        }
        const QPolynomial q = oracle::random_qpolynomial(rng, 2, order);
        const auto gg = build_general_generator(q, table);
        const auto hermite = hermite_generator_coefficients(q);
        for (const auto& [beta, c] : hermite) {
            const double sign = beta.order() % 2 == 0 ? 1.0 : -1.0;
            CHECK(std::abs(sign * gg.eta_derivative_coefficients.at(beta) - to_double(c)) < 1e-12);
        }
    }

    SECTION("zero value at delta = 0 is rejected") {
        IndexMap<double> t;
        t.emplace(MultiIndex{0}, 0.0);
        t.emplace(MultiIndex{1}, 0.0);
        CHECK_THROWS_AS(build_general_generator(QPolynomial::one(n, 2), t), std::invalid_argument);
    }
}

TEST_CASE("generating function text round-trip") {
    std::mt19937_64 rng(61);
    const QPolynomial q = oracle::random_qpolynomial(rng, 2, 4);
    const GeneratingFunction h = build_hermite_generator(q);
    const GeneratingFunction back = GeneratingFunction::from_text(h.to_text());
    REQUIRE(back.dimension() == h.dimension());
    REQUIRE(back.order() == h.order());
    for (const auto& [beta, c] : h.coefficients()) CHECK(back.coefficient(beta) == c);

    // anisotropic round-trip keeps B
    const SquareMatrix b(2, {2.0, 1.0, 1.0, 2.0});
    IndexMap<double> c0;
    c0.emplace(MultiIndex(2), 1.0);
    const GeneratingFunction aniso(2, 1, std::move(c0), Anisotropy::from_matrix(b));
    const GeneratingFunction aniso_back = GeneratingFunction::from_text(aniso.to_text());
    REQUIRE(aniso_back.anisotropy().has_value());
    CHECK(aniso_back.anisotropy()->b(0, 1) == 1.0);
    CHECK(std::abs(aniso_back.anisotropy()->det_b - 3.0) < 1e-14);
}

TEST_CASE("anisotropy factor satisfies C^T C B = I") {
    const SquareMatrix b(3, {4.0, 1.0, 0.5, 1.0, 3.0, 0.25, 0.5, 0.25, 2.0});
    const Anisotropy a = Anisotropy::from_matrix(b);
    const SquareMatrix prod = a.factor.transpose().multiply(a.factor).multiply(b);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(prod(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);

    const SquareMatrix notspd(2, {1.0, 3.0, 3.0, 1.0});
    CHECK_THROWS_AS(Anisotropy::from_matrix(notspd), std::invalid_argument);
}
