#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../oracles.hpp"
#include "kam/prenormal.hpp"

using namespace kam;

namespace {

InvolutionPair constant_alpha_pair(double lambda, int D, std::uint64_t seed, double c) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    // a real polynomial change of coordinates keeps the pair in real form
    CrownMap psi = identity_map(D);
    for (int deg = 2; deg <= 3; ++deg)
        for (int n = 0; n <= deg; ++n) {
            psi.x.at(deg - n, n) = c * u(rng);
            psi.y.at(deg - n, n) = c * u(rng);
        }
    return conjugated_involution(CoeffSeries::constant(lambda, D / 2), psi);
}

}  // namespace

TEST_CASE("Poincare-Dulac keeps only resonant monomials") {
    const int D = 12, N = 2;
    const InvolutionPair t = constant_alpha_pair(2.4, D, 5, 0.3);
    const PoincareDulacResult pd = poincare_dulac(t, N);
    REQUIRE(pd.stages.size() == 4);
    CHECK(pd.stages[0].resonant == 0);
    CHECK(pd.stages[0].eliminated == 3);
    CHECK(pd.stages[1].resonant == 1);
    CHECK(pd.stages[1].eliminated == 3);
    double worst = 0.0;
    for (int deg = 2; deg <= 2 * N + 1; ++deg)
        for (int n = 0; n <= deg; ++n) {
            const int m = deg - n;
            if (!p_resonant(m, n)) worst = std::max(worst, std::abs(pd.pair.p.coeff(m, n)));
            if (!q_resonant(m, n)) worst = std::max(worst, std::abs(pd.pair.q.coeff(m, n)));
        }
    CHECK(worst < 1e-13);
    CHECK(std::abs(pd.c_tilde[1] - pd.pair.p.coeff(1, 2)) < 1e-15);
    for (int k = N + 1; k <= pd.c_tilde.trunc(); ++k) CHECK(pd.c_tilde[k] == cplx{});
    const NormSet ns{{-0.001, 0.0, 0.001}, 0.0005, 0.05, 64};
    CHECK(involution_residual(pd.pair, ns) < 1e-12);
}

TEST_CASE("Poincare-Dulac transform conjugates the pair pointwise") {
    const int D = 12;
    const InvolutionPair t = constant_alpha_pair(2.4, D, 6, 0.3);
    const PoincareDulacResult pd = poincare_dulac(t, 1);
    // tau_new = T^{-1} o tau o T, so T o tau_new = tau o T
    const auto tx = oracle::to_poly(as_map(t).x), ty = oracle::to_poly(as_map(t).y);
    const auto nx = oracle::to_poly(as_map(pd.pair).x), ny = oracle::to_poly(as_map(pd.pair).y);
    const auto Tx = oracle::to_poly(pd.transform.x), Ty = oracle::to_poly(pd.transform.y);
    const cplx x{0.01, 0.002}, y{-0.004, 0.008};
    const cplx a = oracle::eval(nx, x, y), b = oracle::eval(ny, x, y);
    const cplx u = oracle::eval(Tx, x, y), v = oracle::eval(Ty, x, y);
    CHECK(std::abs(oracle::eval(Tx, a, b) - oracle::eval(tx, u, v)) < 1e-14);
    CHECK(std::abs(oracle::eval(Ty, a, b) - oracle::eval(ty, u, v)) < 1e-14);
}

TEST_CASE("Poincare-Dulac argument checks and small divisors") {
    const InvolutionPair t = constant_alpha_pair(2.4, 8, 7, 0.3);
    CHECK_THROWS_AS(poincare_dulac(t, 2), KamError);
    InvolutionPair varying = t;
    varying.alpha[1] = 0.5;
    CHECK_THROWS_AS(poincare_dulac(varying, 1), KamError);
    // at lambda = 2 pi / 3 the xi^2 monomial has divisor |e^{3 i lambda} - 1| = 0
    const InvolutionPair res = constant_alpha_pair(2.0 * std::numbers::pi / 3.0, 8, 7, 0.3);
    try {
        poincare_dulac(res, 1);
        FAIL("expected a small-divisor error");
    } catch (const KamError& e) {
        CHECK(e.kind() == ErrorKind::SmallDivisor);
    }
}

TEST_CASE("real-form scaling of C = c z") {
    const int D = 8;
    const double lambda = 2.0 * std::numbers::pi / 3.0, c = 0.01;
    InvolutionPair t = linear_involution(lambda, D);
    t.p.at(1, 2) = c;
    t.q.at(2, 1) = c;
    CoeffSeries ct(D / 2);
    ct[1] = c;
    const RealFormResult rf = realform_scaling(t, ct);
    CHECK(rf.pair.alpha[0].real() == doctest::Approx(lambda));
    CHECK(rf.pair.alpha[1].real() == doctest::Approx(-c * std::sqrt(3.0)).epsilon(1e-12));
    CHECK(rf.alpha_imag_before_projection < 1e-15);
    // mu^4 = (e^{i l/2} + C)(e^{-i l/2} + conj C)
    const cplx z{0.003, 0.0};
    const cplx w = (std::exp(cplx{0.0, lambda / 2.0}) + c * z) * (std::exp(cplx{0.0, -lambda / 2.0}) + c * z);
    CHECK(std::abs(std::pow(rf.mu.eval(z), 4) - w) < 1e-15);
    ct[0] = 0.1;
    CHECK_THROWS_AS(realform_scaling(t, ct), KamError);
}

TEST_CASE("nondegeneracy detection") {
    CoeffSeries g(4);
    Nondegeneracy nd = detect_nondegeneracy(g);
    CHECK(nd.degenerate);
    g[2] = -0.25;
    nd = detect_nondegeneracy(g);
    CHECK_FALSE(nd.degenerate);
    CHECK(nd.s == 2);
    CHECK(nd.coefficient == -0.25);
    CHECK(0.25 * std::pow(nd.rescale, 4) == doctest::Approx(1.0));
    g[1] = 1e-13;
    CHECK(detect_nondegeneracy(g).s == 2);
    g[1] = 1e-3;
    CHECK(detect_nondegeneracy(g).s == 1);
}

TEST_CASE("rescale_pair is conjugation by a dilation") {
    const InvolutionPair t = constant_alpha_pair(2.4, 10, 8, 0.3);
    InvolutionPair ta = t;
    ta.alpha[1] = 0.7;
    const double f = 0.5;
    const InvolutionPair r = rescale_pair(ta, f);
    CHECK(r.alpha[1].real() == doctest::Approx(0.7 * f * f));
    const cplx x{0.02, 0.01}, y{0.01, -0.03};
    CHECK(std::abs(r.p.eval(x, y) - ta.p.eval(f * x, f * y) / f) < 1e-16);
    CHECK_THROWS_AS(rescale_pair(t, 0.0), KamError);
}

TEST_CASE("omega grid") {
    const auto g = omega_grid(0.01, 5);
    REQUIRE(g.size() == 10);
    CHECK(std::is_sorted(g.begin(), g.end()));
    CHECK(g.front() == doctest::Approx(-0.009));
    CHECK(g.back() == doctest::Approx(0.009));
    CHECK(g[5] == doctest::Approx(1e-6));
    CHECK_THROWS_AS(omega_grid(0.0, 3), KamError);
}

TEST_CASE("radius search") {
    const int D = 12;
    CoeffSeries alpha(D / 2);
    alpha[0] = 2.4;
    alpha[1] = 1.0;
    CrownSeries h(D);
    h.at(2, 0) = 3e-4;
    h.at(1, 1) = -2e-4;
    h.at(0, 3) = 1e-4;
    const InvolutionPair t = conjugated_involution(alpha, product_preserving_map(h));
    RadiusOptions opts;
    const RadiusResult rr = radius_search(t, opts);
    CHECK(rr.r_star > 0.0);
    CHECK(rr.eps0 < 1.0);
    CHECK(rr.trials.back().practical_ok);
    CHECK(rr.skew_threshold == doctest::Approx(std::pow(rr.A, 1.5) / 3.0));
    // the strict inequality needs A below floating-point range
    CHECK(smallness_A_lhs(1e-3, 0.1, 1) > 1.0);
    opts.mode = Mode::Rigorous;
    opts.max_halvings = 3;
    CHECK_THROWS_AS(radius_search(t, opts), KamError);
}
