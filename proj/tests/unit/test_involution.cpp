#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "kam/involution.hpp"

using namespace kam;

namespace {

constexpr cplx kI{0.0, 1.0};

InvolutionPair sample_pair(std::uint64_t seed, int D, double c) {
    std::mt19937_64 rng(seed);
    CoeffSeries alpha(D / 2);
    alpha[0] = 2.4;
    alpha[1] = 1.0;
    CrownSeries h(D);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int deg = 1; deg <= 3; ++deg)
        for (int n = 0; n <= deg; ++n) h.at(deg - n, n) = c * u(rng);
    return conjugated_involution(alpha, product_preserving_map(h));
}

}  // namespace

TEST_CASE("linear involution composes to a rotation") {
    const InvolutionPair t = linear_involution(2.0, 8);
    const ReversibleMap s = compose_sigma(t);
    CHECK(s.f.max_abs() < 1e-15);
    CHECK(s.g.max_abs() < 1e-15);
    CHECK(s.alpha[0].real() == 2.0);
    const CrownMap m = as_map(t);
    CHECK(std::abs(m.x.coeff(0, 1) - std::exp(kI)) < 1e-15);
    CHECK(std::abs(m.y.coeff(1, 0) - std::exp(-kI)) < 1e-15);
    CHECK(skew_term(t).max_abs() == 0.0);
}

TEST_CASE("make_involution validates alpha") {
    CoeffSeries alpha(3);
    alpha[0] = cplx{1.0, 0.1};
    CHECK_THROWS_AS(make_involution(alpha, CrownSeries(6), CrownSeries(6)), KamError);
    alpha[0] = 1.0;
    CHECK_THROWS_AS(make_involution(alpha, CrownSeries(6), CrownSeries(7)), KamError);
}

TEST_CASE("product-preserving maps keep xi*eta") {
    std::mt19937_64 rng(3);
    const int D = 10;
    const CrownMap m = product_preserving_map(oracle::random_series(rng, 1, 3, D, 0.1));
    const CrownSeries prod = multiply(m.x, m.y);
    CHECK((prod - CrownSeries::monomial(1, 1, 1.0, D)).max_abs() < 1e-15);
}

TEST_CASE("conjugated instances are involutions pointwise") {
    const int D = 12;
    const InvolutionPair t = sample_pair(7, D, 0.05);
    const CrownMap m = as_map(t);
    const auto px = oracle::to_poly(m.x), py = oracle::to_poly(m.y);
    const cplx x{0.012, -0.004}, y{-0.003, 0.01};
    const cplx x1 = oracle::eval(px, x, y), y1 = oracle::eval(py, x, y);
    CHECK(std::abs(oracle::eval(px, x1, y1) - x) < 1e-14);
    CHECK(std::abs(oracle::eval(py, x1, y1) - y) < 1e-14);
    const NormSet ns{{-0.002, 0.0, 0.002}, 0.001, 0.1, 64};
    CHECK(involution_residual(t, ns) < 1e-12);
    CHECK(t.p.order() >= 2);
}

TEST_CASE("compose_sigma equals tau_1 o tau_2 pointwise") {
    const int D = 12;
    const InvolutionPair t = sample_pair(8, D, 0.05);
    const ReversibleMap s = compose_sigma(t);
    const CrownMap m = as_map(t);
    const auto px = oracle::to_poly(m.x), py = oracle::to_poly(m.y);
    const cplx x{0.01, 0.003}, y{0.004, -0.011};
    // tau_2 = rho o tau_1 o rho
    const cplx x2 = std::conj(oracle::eval(px, std::conj(x), std::conj(y)));
    const cplx y2 = std::conj(oracle::eval(py, std::conj(x), std::conj(y)));
    const cplx ref_x = oracle::eval(px, x2, y2), ref_y = oracle::eval(py, x2, y2);
    const cplx ea = std::exp(kI * s.alpha.eval(x * y));
    CHECK(std::abs(ea * x + s.f.eval(x, y) - ref_x) < 1e-14);
    CHECK(std::abs(y / ea + s.g.eval(x, y) - ref_y) < 1e-14);
    const NormSet ns{{-0.002, 0.0, 0.002}, 0.001, 0.1, 64};
    CHECK(reversibility_residual(s, ns) < 1e-12);
}

TEST_CASE("tau2_of conjugates the data") {
    const InvolutionPair t = sample_pair(9, 8, 0.05);
    const InvolutionPair t2 = tau2_of(t);
    CHECK(t2.alpha[0].real() == -t.alpha[0].real());
    CHECK(std::abs(t2.p.coeff(2, 0) - std::conj(t.p.coeff(2, 0))) == 0.0);
}

TEST_CASE("skew term pointwise") {
    const int D = 10;
    const InvolutionPair t = sample_pair(10, D, 0.05);
    const cplx x{0.02, 0.01}, y{-0.01, 0.02};
    const cplx eh = std::exp(0.5 * kI * t.alpha.eval(x * y));
    const cplx ref = eh * y * t.q.eval(x, y) + x * t.p.eval(x, y) / eh;
    CHECK(std::abs(skew_term(t).eval(x, y) - ref) < 1e-14);
}

TEST_CASE("structural residuals of a conjugated instance") {
    const InvolutionPair t = sample_pair(11, 12, 0.01);
    const NormSet ns{{-0.002, 0.0, 0.002}, 0.001, 0.1, 64};
    const StructuralReport rep = structural_residuals(t, ns);
    CHECK(rep.eps > 0.0);
    CHECK(rep.get("involution").passed());
    CHECK(rep.get("tau2_involution").passed());
    CHECK(rep.get("reversibility").passed());
    CHECK_THROWS_AS(rep.get("no_such_entry"), KamError);
}
