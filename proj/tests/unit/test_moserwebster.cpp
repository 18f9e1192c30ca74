#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../oracles.hpp"
#include "kam/moserwebster.hpp"

using namespace kam;

namespace {

CrownSeries cubic(int D) {
    CrownSeries f(D);
    f.at(3, 0) = 0.1;
    f.at(2, 1) = 0.05;
    f.at(1, 2) = 0.05;
    f.at(0, 3) = 0.1;
    return f;
}

}  // namespace

TEST_CASE("surface validation") {
    CHECK_THROWS_AS(make_surface(0.5, CrownSeries(6)), KamError);
    CHECK_THROWS_AS(make_surface(1.0, CrownSeries::monomial(1, 1, 1.0, 6)), KamError);
    CHECK_THROWS_AS(make_surface(1.0, CrownSeries::monomial(2, 1, cplx{0.0, 1.0}, 6)), KamError);
    CHECK_NOTHROW(make_surface(1.0, cubic(6)));
}

TEST_CASE("quadric deck map is linear and exact") {
    for (double gamma : {0.6, 1.0, 2.5}) {
        const CrownMap deck = deck_transformation(make_surface(gamma, CrownSeries(8)));
        CHECK(std::abs(deck.y.coeff(1, 0) + 1.0 / gamma) < 1e-16);
        CHECK(std::abs(deck.y.coeff(0, 1) + 1.0) == 0.0);
        CHECK(deck.y.from_degree(2).max_abs() == 0.0);
    }
}

TEST_CASE("perturbed deck map solves the defining identity pointwise") {
    const int D = 10;
    const BishopSurface m = make_surface(1.2, cubic(D));
    const CrownMap deck = deck_transformation(m);
    CHECK(deck_residual(m, deck).max_abs() < 1e-12);
    const auto h = oracle::to_poly(quadric(1.2, D) + m.f);
    const auto phi = oracle::to_poly(deck.y);
    const cplx z{0.01, 0.003}, w{0.01, -0.003};
    const cplx lhs = oracle::eval(h, z, oracle::eval(phi, z, w));
    CHECK(std::abs(lhs - oracle::eval(h, z, w)) < 1e-15);
}

TEST_CASE("diagonal frame eigenvalue") {
    const DiagonalFrame fr = diagonal_frame(1.0);
    CHECK(fr.lambda == doctest::Approx(2.0 * std::numbers::pi / 3.0).epsilon(1e-15));
    for (double gamma : {0.7, 1.379884, 4.0}) {
        const DiagonalFrame f2 = diagonal_frame(gamma);
        CHECK(2.0 * std::cos(f2.lambda / 2.0) == doctest::Approx(1.0 / gamma).epsilon(1e-14));
        CHECK(std::abs(std::abs(f2.root) - 1.0) < 1e-15);
    }
    CHECK_THROWS_AS(diagonal_frame(0.4), KamError);
}

TEST_CASE("diagonalized quadric is the linear involution") {
    const Diagonalization dg = diagonalize(make_surface(1.0, CrownSeries(8)));
    CHECK(dg.pair.lambda() == doctest::Approx(2.0 * std::numbers::pi / 3.0));
    CHECK(dg.pair.p.max_abs() < 1e-15);
    CHECK(dg.pair.q.max_abs() < 1e-15);
}

TEST_CASE("diagonalized cubic gives a real-form involution") {
    const Diagonalization dg = diagonalize(make_surface(1.379884, cubic(12)));
    CHECK(dg.pair.p.order() == 2);
    const NormSet ns{{-0.001, 0.0, 0.001}, 0.0005, 0.05, 64};
    CHECK(involution_residual(dg.pair, ns) < 1e-12);
}

TEST_CASE("reconstruction recovers the quadric") {
    const double lambda = 2.4;
    const ReconstructedSurface s = reconstruct_surface(linear_involution(lambda, 8));
    CHECK(s.gamma == doctest::Approx(1.0 / (2.0 * std::cos(lambda / 2.0))));
    CHECK(std::abs(s.z2.coeff(1, 1) - 1.0) < 1e-14);
    CHECK(std::abs(s.z2.coeff(2, 0) - s.gamma) < 1e-13);
    CHECK(std::abs(s.z2.coeff(0, 2) - s.gamma) < 1e-13);
}

TEST_CASE("reconstructed height is real on real points only in normal form") {
    const auto lin = hyperbola_image(linear_involution(2.4, 8), nullptr, 1e-4, 0.05, 8);
    for (const auto& p : lin)
        if (p.is_real_branch) CHECK(p.realness_residual < 1e-15);
    const Diagonalization dg = diagonalize(make_surface(1.379884, cubic(12)));
    double worst = 0.0;
    for (const auto& p : hyperbola_image(dg.pair, nullptr, 1e-4, 0.05, 8)) {
        if (!p.is_real_branch) continue;
        CHECK(std::abs(p.w1 - std::conj(p.z1)) < 1e-15);
        worst = std::max(worst, p.realness_residual);
    }
    CHECK(worst > 1e-9);
}

TEST_CASE("hyperbola image real branches are real") {
    const Diagonalization dg = diagonalize(make_surface(1.379884, cubic(12)));
    const auto pts = hyperbola_image(make_surface(1.379884, cubic(12)), nullptr, 1e-4, 0.05, 8);
    CHECK(pts.size() == 32);
    for (const auto& p : pts)
        if (p.is_real_branch) CHECK(p.realness_residual < 1e-12);
    CHECK_THROWS_AS(hyperbola_image(dg.pair, nullptr, 0.0, 0.05, 8), KamError);
}
