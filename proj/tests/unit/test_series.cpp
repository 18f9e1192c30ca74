#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "kam/series.hpp"

using namespace kam;

namespace {

constexpr cplx kI{0.0, 1.0};

double max_diff(const CrownSeries& a, const CrownSeries& b) { return (a - b).max_abs(); }

}  // namespace

TEST_CASE("graded-lex index layout") {
    CHECK(CrownSeries::index(0, 0) == 0);
    CHECK(CrownSeries::index(1, 0) == 1);
    CHECK(CrownSeries::index(0, 1) == 2);
    CHECK(CrownSeries::index(2, 0) == 3);
    CHECK(CrownSeries::index(0, 2) == 5);
    CHECK(CrownSeries::size_for(4) == 15);
}

TEST_CASE("multiply agrees with schoolbook product") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int D = 6 + trial % 5;
        const CrownSeries f = oracle::random_series(rng, 0, D, D);
        const CrownSeries g = oracle::random_series(rng, 0, D, D);
        const CrownSeries ref = oracle::from_poly(oracle::multiply(oracle::to_poly(f), oracle::to_poly(g), D), D);
        CHECK(max_diff(multiply(f, g), ref) <= 1e-13 * (1.0 + ref.max_abs()));
    }
}

TEST_CASE("multiply rejects mismatched truncations") {
    CHECK_THROWS_AS(multiply(CrownSeries(4), CrownSeries(5)), KamError);
}

TEST_CASE("crown decomposition round-trips and matches monomial bookkeeping") {
    std::mt19937_64 rng(12);
    const int D = 9;
    const CrownSeries f = oracle::random_series(rng, 0, D, D);
    const auto entries = crown_decompose(f);
    CHECK(entries.size() == 2 * D + 1);
    CHECK(max_diff(crown_assemble(entries, D), f) == 0.0);
    const auto poly = oracle::to_poly(f);
    for (const auto& e : entries) {
        const auto ref = oracle::crown_coeff(poly, e.l, e.j, D / 2);
        for (int k = 0; k <= D / 2; ++k) CHECK(std::abs(e.f[k] - ref[static_cast<std::size_t>(k)]) == 0.0);
    }
}

TEST_CASE("exp, log and pow of coefficient series") {
    CoeffSeries f(8);
    f[0] = 1.0;
    f[1] = 0.3;
    f[2] = cplx{0.1, -0.2};
    f[5] = 0.05;
    const CoeffSeries l = log(f);
    const CoeffSeries back = exp(l);
    for (int k = 0; k <= 8; ++k) CHECK(std::abs(back[k] - f[k]) < 1e-14);
    // exp(z) has coefficients 1/k!
    const CoeffSeries e = exp(CoeffSeries::variable(8));
    double fact = 1.0;
    for (int k = 0; k <= 8; ++k) {
        if (k > 0) fact *= k;
        CHECK(std::abs(e[k] - 1.0 / fact) < 1e-15);
    }
    const CoeffSeries sq = pow(f, 0.5);
    const CoeffSeries prod = sq * sq;
    for (int k = 0; k <= 8; ++k) CHECK(std::abs(prod[k] - f[k]) < 1e-14);
    const CoeffSeries inv = reciprocal(f) * f;
    CHECK(std::abs(inv[0] - 1.0) < 1e-15);
    for (int k = 1; k <= 8; ++k) CHECK(std::abs(inv[k]) < 1e-14);
    CHECK_THROWS_AS(log(CoeffSeries::variable(4)), KamError);
    CHECK_THROWS_AS(pow(CoeffSeries::variable(4), 0.25), KamError);
}

TEST_CASE("crown norm of monomials and domain errors") {
    // xi^3 has norm r^3; (xi eta)^2 has norm sup |z|^2 = (|omega| + beta)^2
    const int D = 8;
    const CrownNormParams np{0.01, 0.002, 0.3, 64};
    CHECK(crown_norm(CrownSeries::monomial(3, 0, 1.0, D), np) == doctest::Approx(0.027).epsilon(1e-14));
    CHECK(crown_norm(CrownSeries::monomial(2, 2, 1.0, D), np) == doctest::Approx(0.012 * 0.012).epsilon(1e-12));
    CHECK(crown_norm(CrownSeries::monomial(3, 1, 2.0, D), np) ==
          doctest::Approx(2.0 * 0.012 * 0.09).epsilon(1e-12));
    CHECK_THROWS_AS(crown_norm(CrownSeries::xi(D), CrownNormParams{0.08, 0.02, 0.3, 64}), KamError);
    CHECK_THROWS_AS(crown_norm(CrownSeries::xi(D), CrownNormParams{0.0, 0.01, 0.3, 4}), KamError);
}

TEST_CASE("crown norm against a direct evaluation of the definition") {
    std::mt19937_64 rng(13);
    const int D = 10;
    const CrownSeries f = oracle::random_series(rng, 0, D, D);
    const auto poly = oracle::to_poly(f);
    const double omega = -0.004, beta = 0.003, r = 0.2;
    double ref = oracle::circle_sup(oracle::crown_coeff(poly, 0, 0, D / 2), omega, beta, 64);
    for (int l = 1; l <= D; ++l) {
        ref += oracle::circle_sup(oracle::crown_coeff(poly, l, 0, D / 2), omega, beta, 64) * std::pow(r, l);
        ref += oracle::circle_sup(oracle::crown_coeff(poly, 0, l, D / 2), omega, beta, 64) * std::pow(r, l);
    }
    CHECK(crown_norm(f, {omega, beta, r, 64}) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("substitute matches pointwise composition") {
    std::mt19937_64 rng(14);
    const int D = 10;
    const CrownSeries h = oracle::random_series(rng, 0, 6, D);
    const CrownSeries x = CrownSeries::xi(D) + oracle::random_series(rng, 2, 4, D, 0.1);
    const CrownSeries y = CrownSeries::eta(D) + oracle::random_series(rng, 2, 4, D, 0.1);
    const CrownSeries hs = substitute(h, x, y);
    const auto ph = oracle::to_poly(h), px = oracle::to_poly(x), py = oracle::to_poly(y);
    const cplx a{0.01, 0.004}, b{-0.007, 0.009};
    const cplx ref = oracle::eval(ph, oracle::eval(px, a, b), oracle::eval(py, a, b));
    CHECK(std::abs(hs.eval(a, b) - ref) < 1e-15);
}

TEST_CASE("rotate_swap and compose_rotated match pointwise composition") {
    std::mt19937_64 rng(15);
    const int D = 12;
    const CrownSeries h = oracle::random_series(rng, 1, D, D);
    CoeffSeries alpha(D / 2);
    alpha[0] = 2.1;
    alpha[1] = 0.7;
    alpha[2] = -0.3;
    const CrownSeries f = oracle::random_series(rng, 2, 5, D, 0.1);
    const CrownSeries g = oracle::random_series(rng, 2, 5, D, 0.1);
    const auto ph = oracle::to_poly(h), pf = oracle::to_poly(f), pg = oracle::to_poly(g);
    const cplx x{0.02, -0.01}, y{0.015, 0.012};
    for (double b : {0.5, -0.5, 1.0}) {
        const cplx ea = std::exp(kI * b * alpha.eval(x * y));
        const cplx ref_swap = oracle::eval(ph, ea * y, x / ea);
        CHECK(std::abs(rotate_swap(h, alpha, b).eval(x, y) - ref_swap) < 1e-14);
        const cplx ref_rot = oracle::eval(ph, ea * x, y / ea);
        CHECK(std::abs(rotate(h, alpha, b).eval(x, y) - ref_rot) < 1e-14);
        const cplx ref_c = oracle::eval(ph, ea * x + oracle::eval(pf, x, y), y / ea + oracle::eval(pg, x, y));
        CHECK(std::abs(compose_rotated(h, b, alpha, f, g).eval(x, y) - ref_c) < 1e-14);
    }
    CHECK_THROWS_AS(compose_rotated(h, 1.5, alpha, f, g), KamError);
}

TEST_CASE("invert_near_identity and invert_map") {
    std::mt19937_64 rng(16);
    const int D = 10;
    const CrownMap u{oracle::random_series(rng, 2, 6, D, 0.2), oracle::random_series(rng, 2, 6, D, 0.2)};
    const InverseResult inv = invert_near_identity(u);
    const CrownMap id = identity_map(D);
    const CrownMap comp = compose(id + u, id + inv.v);
    CHECK((comp.x - id.x).max_abs() < 1e-13);
    CHECK((comp.y - id.y).max_abs() < 1e-13);

    const CrownMap g = linear_map(2.0, 1.0, 0.5, 3.0, D) + u;
    const CrownMap gi = invert_map(g);
    const CrownMap c2 = compose(g, gi);
    CHECK((c2.x - id.x).max_abs() < 1e-12);
    CHECK((c2.y - id.y).max_abs() < 1e-12);
    CHECK_THROWS_AS(invert_map(linear_map(1.0, 2.0, 2.0, 4.0, D)), KamError);
}

TEST_CASE("exp_series of a product-preserving exponent") {
    const int D = 8;
    CrownSeries f = CrownSeries::monomial(1, 1, 0.5, D);
    const CrownSeries e = exp_series(f, kI);
    // exp(i z/2) restricted to the diagonal
    CoeffSeries z = CoeffSeries::variable(D / 2) * cplx{0.0, 0.5};
    const CoeffSeries ref = exp(z);
    for (int k = 0; k <= D / 2; ++k) CHECK(std::abs(e.coeff(k, k) - ref[k]) < 1e-15);
    CHECK_THROWS_AS(exp_series(CrownSeries::constant(60.0, D), 1.0), KamError);
}

TEST_CASE("conj, swapped and realness projection") {
    const int D = 4;
    CrownSeries f(D);
    f.at(2, 1) = cplx{1.0, 2.0};
    f.at(0, 3) = cplx{0.0, -1.0};
    CHECK(f.conj().coeff(2, 1) == cplx{1.0, -2.0});
    CHECK(f.swapped().coeff(1, 2) == cplx{1.0, 2.0});
    CHECK_THROWS_AS(f.real_projected(1e-10), KamError);
    CrownSeries g(D);
    g.at(1, 1) = cplx{3.0, 1e-13};
    CHECK(g.real_projected(1e-10).coeff(1, 1) == cplx{3.0, 0.0});
}
