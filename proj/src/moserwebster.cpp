#include "kam/moserwebster.hpp"

#include <cmath>
#include <numbers>

namespace kam {

namespace {

constexpr cplx kI{0.0, 1.0};

}  // namespace

BishopSurface make_surface(double gamma, const CrownSeries& f, double realness_tol) {
    require(gamma > 0.5, ErrorKind::Domain, "surface: gamma must exceed 1/2 (hyperbolic regime)");
    require(f.order() >= 3, ErrorKind::InvalidArgument, "surface: perturbation must have order >= 3");
    require(f.is_real(realness_tol), ErrorKind::InvalidArgument, "surface: perturbation coefficients must be real");
    return {gamma, f.real_projected(realness_tol)};
}

CrownSeries quadric(double gamma, int trunc_total) {
    CrownSeries q(trunc_total);
    if (trunc_total >= 2) {
        q.at(1, 1) = 1.0;
        q.at(2, 0) = gamma;
        q.at(0, 2) = gamma;
    }
    return q;
}

CrownMap deck_transformation(const BishopSurface& m) {
    // Q(z, phi) - Q(z, w) = (phi - w)(z + gamma (phi + w)), so the nontrivial
    // root satisfies phi = -z/gamma - w - (1/gamma) [f(z,phi) - f(z,w)]/(phi - w).
    // The divided difference has order >= 2, so each pass fixes one more degree.
    const int d = m.f.trunc();
    const CrownSeries z = CrownSeries::xi(d), w = CrownSeries::eta(d);
    const CrownSeries lin = z * cplx{-1.0 / m.gamma, 0.0} - w;
    int bmax = 0;
    for (int deg = 0; deg <= d; ++deg)
        for (int n = 0; n <= deg; ++n)
            if (m.f.coeff(deg - n, n) != cplx{}) bmax = std::max(bmax, n);
    std::vector<CrownSeries> zpoly(static_cast<std::size_t>(bmax) + 1, CrownSeries(d));
    for (int b = 1; b <= bmax; ++b)
        for (int a = 0; a + b <= d; ++a) zpoly[static_cast<std::size_t>(b)].at(a, 0) = m.f.coeff(a, b);
    std::vector<CrownSeries> wpow{CrownSeries::constant(1.0, d)};
    for (int b = 1; b <= bmax; ++b) wpow.push_back(multiply(wpow.back(), w));

    CrownSeries phi = lin;
    for (int it = 0; it <= d + 1; ++it) {
        CrownSeries dd(d);
        CrownSeries sb = CrownSeries::constant(1.0, d);  // sum_{k<b} phi^k w^{b-1-k}
        for (int b = 1; b <= bmax; ++b) {
            dd += multiply(zpoly[static_cast<std::size_t>(b)], sb);
            sb = multiply(phi, sb) + wpow[static_cast<std::size_t>(b)];
        }
        CrownSeries next = lin - dd * cplx{1.0 / m.gamma, 0.0};
        const double change = (next - phi).max_abs();
        phi = std::move(next);
        if (change == 0.0) break;
    }
    const CrownMap deck{z, phi};
    const double res = deck_residual(m, deck).max_abs();
    require(res <= 1e-8 * std::max(1.0, m.f.max_abs()), ErrorKind::NonConvergence,
            "deck_transformation: defining identity not solved (residual " + std::to_string(res) + ")");
    return deck;
}

CrownSeries deck_residual(const BishopSurface& m, const CrownMap& deck) {
    const int d = m.f.trunc();
    const CrownSeries h = quadric(m.gamma, d) + m.f;
    return substitute(h, deck.x, deck.y) - h;
}

DiagonalFrame diagonal_frame(double gamma) {
    require(gamma > 0.5, ErrorKind::Domain, "diagonal_frame: gamma must exceed 1/2 (hyperbolic regime)");
    DiagonalFrame fr;
    fr.root = cplx{1.0, std::sqrt(4.0 * gamma * gamma - 1.0)} / (2.0 * gamma);
    fr.lambda = 2.0 * std::arg(fr.root);
    if (fr.lambda < 0.0) fr.lambda += 4.0 * std::numbers::pi;
    const cplx a = -kI * std::exp(-kI * (fr.lambda / 4.0)) / std::sqrt(2.0);
    const cplx b = fr.root * a;
    fr.basis = {a, b, std::conj(a), std::conj(b)};
    return fr;
}

Diagonalization diagonalize(const BishopSurface& m) {
    const int d = m.f.trunc();
    const DiagonalFrame fr = diagonal_frame(m.gamma);
    const auto& c = fr.basis;
    require(std::abs(fr.root + 1.0 / fr.root - 1.0 / m.gamma) < 1e-12, ErrorKind::Structural,
            "diagonalize: root check e^{i l/2} + e^{-i l/2} = 1/gamma failed");
    const CrownMap cmap = linear_map(c[0], c[1], c[2], c[3], d);
    const cplx det = c[0] * c[3] - c[1] * c[2];
    const CrownMap cinv = linear_map(c[3] / det, -c[1] / det, -c[2] / det, c[0] / det, d);
    const CrownMap tau = compose(cinv, compose(deck_transformation(m), cmap));
    CrownSeries p = tau.x - CrownSeries::eta(d) * fr.root;
    CrownSeries q = tau.y - CrownSeries::xi(d) * std::conj(fr.root);
    const double lin = std::max(p.truncated(1).max_abs(), q.truncated(1).max_abs());
    require(lin < 1e-12, ErrorKind::Structural,
            "diagonalize: linear part not in swapped form (residual " + std::to_string(lin) + ")");
    p = p.from_degree(2);
    q = q.from_degree(2);
    return {fr, make_involution(CoeffSeries::constant(fr.lambda, d / 2), p, q)};
}

ReconstructedSurface reconstruct_surface(const InvolutionPair& t) {
    const int d = t.trunc();
    const CrownMap tau = as_map(t);
    ReconstructedSurface out;
    const CrownSeries phi1 = CrownSeries::xi(d) + tau.x;
    out.phi = {phi1, phi1.conj()};
    out.Phi = multiply(tau.x, CrownSeries::xi(d));
    const CrownMap inv = invert_map(out.phi);
    out.z2_raw = substitute(out.Phi, inv.x, inv.y);
    out.gamma = 1.0 / (2.0 * std::cos(t.lambda() / 2.0));
    const cplx qa = out.z2_raw.coeff(2, 0), qb = out.z2_raw.coeff(1, 1);
    require(std::abs(qa) > 1e-300 && std::abs(qb) > 1e-300, ErrorKind::Structural,
            "reconstruct_surface: degenerate quadratic part");
    out.kappa = std::sqrt(out.gamma * qb / qa);
    out.scale = qb;
    out.z2 = out.z2_raw.scaled_vars(out.kappa, std::conj(out.kappa)) * (1.0 / qb);
    return out;
}

namespace {

using SurfacePoint = std::function<std::array<cplx, 3>(cplx, cplx)>;

// Shared sampling of {xi eta = omega}; `to_surface` returns (z1, w1, z2).
std::vector<HyperbolaPoint> sample_hyperbola(const PointMap& psi, const SurfacePoint& to_surface, cplx scale,
                                             double omega, double R, int n_pts) {
    require(omega != 0.0 && std::abs(omega) < R * R, ErrorKind::Domain,
            "hyperbola_image: need omega in (-R^2, R^2) \\ {0}");
    std::vector<HyperbolaPoint> out;
    const double lo = std::log(std::abs(omega) / R), hi = std::log(R);
    for (int k = 0; k < n_pts; ++k) {
        const double mod = std::exp(lo + (k + 0.5) / n_pts * (hi - lo));
        for (int a = 0; a < 4; ++a) {
            const cplx x = std::polar(mod, a * std::numbers::pi / 2.0);
            const cplx y = omega / x;
            const auto [px, py] = psi ? psi(x, y) : std::pair<cplx, cplx>{x, y};
            const auto pt3 = to_surface(px, py);
            HyperbolaPoint pt;
            pt.omega = omega;
            pt.arg_index = a;
            pt.z1 = pt3[0];
            pt.w1 = pt3[1];
            pt.z2 = pt3[2];
            pt.is_real_branch = (a % 2 == 0);
            if (pt.is_real_branch)
                pt.realness_residual = std::abs(pt.w1 - std::conj(pt.z1)) + std::abs((pt.z2 / scale).imag());
            out.push_back(pt);
        }
    }
    return out;
}

}  // namespace

std::vector<HyperbolaPoint> hyperbola_image(const InvolutionPair& t, const PointMap& psi, double omega, double R,
                                            int n_pts) {
    if (n_pts <= 0) return {};
    const ReconstructedSurface surf = reconstruct_surface(t);
    const SurfacePoint to_surface = [&](cplx x, cplx y) {
        return std::array<cplx, 3>{surf.phi.x.eval(x, y), surf.phi.y.eval(x, y), surf.Phi.eval(x, y)};
    };
    return sample_hyperbola(psi, to_surface, surf.scale, omega, R, n_pts);
}

std::vector<HyperbolaPoint> hyperbola_image(const BishopSurface& m, const PointMap& psi, double omega, double R,
                                            int n_pts) {
    if (n_pts <= 0) return {};
    const DiagonalFrame fr = diagonal_frame(m.gamma);
    const auto& c = fr.basis;
    const CrownSeries h = quadric(m.gamma, m.f.trunc()) + m.f;
    const SurfacePoint to_surface = [&](cplx x, cplx y) {
        const cplx z1 = c[0] * x + c[1] * y, w1 = c[2] * x + c[3] * y;
        return std::array<cplx, 3>{z1, w1, h.eval(z1, w1)};
    };
    return sample_hyperbola(psi, to_surface, 1.0, omega, R, n_pts);
}

}  // namespace kam
