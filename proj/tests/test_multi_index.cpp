#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hqi/multi_index.hpp"

using namespace hqi;

TEST_CASE("enumerate_indices covers 1-D degrees in order") {
    const IndexSet s = enumerate_indices(1, 3);
    REQUIRE(s.count() == 4);
    CHECK(s[0] == MultiIndex{0});
    CHECK(s[1] == MultiIndex{1});
    CHECK(s[2] == MultiIndex{2});
    CHECK(s[3] == MultiIndex{3});
}

TEST_CASE("enumerate_indices graded-lex order in 2-D") {
    const IndexSet s = enumerate_indices(2, 1);
    REQUIRE(s.count() == 3);
    CHECK(s[0] == MultiIndex{0, 0});
    CHECK(s[1] == MultiIndex{1, 0});
    CHECK(s[2] == MultiIndex{0, 1});
}

TEST_CASE("enumerate_indices count matches (N+n-1)!/((N-1)! n!)") {
    // n = 3, max degree 3 corresponds to N = 4: 6!/(3! 3!) = 20
    CHECK(enumerate_indices(3, 3).count() == 20);
    CHECK(enumerate_indices(2, 5).count() == 21);
}

TEST_CASE("enumerate_indices rejects dimension zero") {
    CHECK_THROWS_AS(enumerate_indices(0, 2), std::invalid_argument);
}

TEST_CASE("graded-lex ordering is deterministic and graded") {
    const IndexSet s = enumerate_indices(3, 4);
    for (size_t i = 1; i < s.count(); ++i) {
        CHECK(graded_lex_less(s[i - 1], s[i]));
        CHECK(s[i - 1].order() <= s[i].order());
    }
}

TEST_CASE("componentwise partial order on random pairs") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> d(0, 4);
    for (int trial = 0; trial < 200; ++trial) {
        MultiIndex a{d(rng), d(rng), d(rng)};
        MultiIndex b{d(rng), d(rng), d(rng)};
        const bool leq = componentwise_leq(a, b);
        bool expect = true;
        for (int j = 0; j < 3; ++j) expect = expect && a[j] <= b[j];
        CHECK(leq == expect);
        if (leq) {
            const MultiIndex diff = b - a;
            CHECK(diff + a == b);
            CHECK(diff.order() == b.order() - a.order());
        }
    }
}

TEST_CASE("multi-index factorial and monomial") {
    CHECK(MultiIndex{3, 2}.fact() == BigInt(12));
    const std::vector<double> x{2.0, 3.0};
    CHECK(MultiIndex{2, 1}.monomial(std::span<const double>(x)) == 12.0);
    CHECK(MultiIndex{0, 0}.monomial(std::span<const double>(x)) == 1.0);
}
