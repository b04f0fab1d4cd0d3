#include <catch2/catch_amalgamated.hpp>

#include <slag/exterior.hpp>

#include "oracles.hpp"

#include <cmath>
#include <vector>

using slag::KForm;
using slag::Vec6;

namespace {
Vec6 e(int i) { return Vec6::basis(i); }
}  // namespace

TEST_CASE("standard symplectic form has the three unit pairs", "[exterior]") {
    KForm w = slag::standard_symplectic_form();
    REQUIRE(w.degree() == 2);
    REQUIRE(w.term_count() == 3);
    CHECK(w.coefficient({1, 5}) == 1.0);
    CHECK(w.coefficient({2, 6}) == 1.0);
    CHECK(w.coefficient({3, 4}) == 1.0);

    CHECK(w.evaluate({e(1), e(5)}) == 1.0);
    CHECK(w.evaluate({e(1), e(2)}) == 0.0);
    CHECK(w.evaluate({e(5), e(1)}) == -1.0);
}

TEST_CASE("holomorphic three-form splits into 4+4 terms", "[exterior]") {
    auto [re, im] = slag::holomorphic_three_form();
    REQUIRE(re.degree() == 3);
    REQUIRE(im.degree() == 3);
    CHECK(re.term_count() == 4);
    CHECK(im.term_count() == 4);

    CHECK(re.evaluate({e(1), e(2), e(3)}) == 1.0);
    CHECK(im.evaluate({e(1), e(2), e(3)}) == 0.0);
    CHECK(im.evaluate({e(1), e(2), e(4)}) == 1.0);
}

TEST_CASE("holomorphic form matches the brute-force expander", "[exterior][oracle]") {
    auto [re, im] = slag::holomorphic_three_form();
    auto [ore, oim] = oracle::expand_holomorphic_form();

    std::uint64_t rng = 20260810ULL;
    for (int trial = 0; trial < 200; ++trial) {
        Vec6 a = oracle::random_vec6(rng), b = oracle::random_vec6(rng),
             c = oracle::random_vec6(rng);
        double lib_re = re.evaluate({a, b, c});
        double lib_im = im.evaluate({a, b, c});
        CHECK(lib_re == Catch::Approx(oracle::evaluate_table(ore, a, b, c)).margin(1e-12));
        CHECK(lib_im == Catch::Approx(oracle::evaluate_table(oim, a, b, c)).margin(1e-12));
    }
}

TEST_CASE("evaluation is multilinear and alternating", "[exterior][property]") {
    auto [re, im] = slag::holomorphic_three_form();
    KForm w = slag::standard_symplectic_form();
    std::uint64_t rng = 7ULL;

    for (int trial = 0; trial < 100; ++trial) {
        Vec6 v = oracle::random_vec6(rng), u = oracle::random_vec6(rng),
             x = oracle::random_vec6(rng), y = oracle::random_vec6(rng);
        double a = oracle::uniform(rng, -2, 2), b = oracle::uniform(rng, -2, 2);

        // multilinearity in the middle slot
        double lhs = im.evaluate({x, v * a + u * b, y});
        double rhs = a * im.evaluate({x, v, y}) + b * im.evaluate({x, u, y});
        double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
        CHECK(std::abs(lhs - rhs) / scale <= 1e-12);

        // alternation: repeated vector kills the value exactly
        CHECK(w.evaluate({v, v}) == 0.0);
        CHECK(re.evaluate({v, x, v}) == 0.0);
    }
}

TEST_CASE("arity mismatch is rejected", "[exterior][errors]") {
    KForm w = slag::standard_symplectic_form();
    std::vector<Vec6> three{e(1), e(2), e(3)};
    CHECK_THROWS_AS(w.evaluate(std::span<const Vec6>(three)), std::invalid_argument);
    CHECK_THROWS_AS(Vec6(1, 2, std::nan(""), 4, 5, 6), std::invalid_argument);
}

TEST_CASE("complex structure squares to minus identity and tames omega", "[exterior]") {
    auto J = slag::ComplexStructure::standard();
    KForm w = slag::standard_symplectic_form();

    for (int i = 1; i <= 6; ++i) {
        Vec6 jj = J.apply(J.apply(e(i)));
        for (int k = 0; k < 6; ++k)
            CHECK(jj[k] == Catch::Approx(k == i - 1 ? -1.0 : 0.0).margin(1e-15));
    }

    std::uint64_t rng = 99ULL;
    for (int trial = 0; trial < 100; ++trial) {
        Vec6 v = oracle::random_vec6(rng), u = oracle::random_vec6(rng);
        // invariance
        CHECK(w.evaluate({J.apply(v), J.apply(u)}) ==
              Catch::Approx(w.evaluate({v, u})).margin(1e-12));
        // tameness: omega(v, Jv) = |v|^2 > 0
        if (v.norm() > 1e-8) CHECK(w.evaluate({v, J.apply(v)}) > 0.0);
    }
}

TEST_CASE("calibration identity holds and detects tampering", "[exterior]") {
    KForm w = slag::standard_symplectic_form();
    auto [re, im] = slag::holomorphic_three_form();

    CHECK(slag::calibration_identity_check(w, re, im) <= 1e-12);

    // scaling omega by 2 scales omega^3 by 8: identity must break
    CHECK(slag::calibration_identity_check(w * 2.0, re, im) > 1e-6);

    // swapping e5 and e6 in the construction of xi must break it too;
    // verified against the brute-force expander on the swapped factors
    auto [sre, sim] = oracle::expand_holomorphic_form({{{1, 6}, {2, 5}, {3, 4}}});
    KForm sre_form(3), sim_form(3);
    for (const auto& [idx, c] : sre.coeff) sre_form.add({idx[0], idx[1], idx[2]}, c);
    for (const auto& [idx, c] : sim.coeff) sim_form.add({idx[0], idx[1], idx[2]}, c);
    CHECK(slag::calibration_identity_check(w, sre_form, sim_form) > 1e-6);
}
