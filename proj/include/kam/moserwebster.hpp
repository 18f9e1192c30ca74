#pragma once

#include <array>
#include <functional>
#include <vector>

#include "kam/involution.hpp"
#include "kam/series.hpp"

namespace kam {

/// Real-analytic surface z2 = Q_gamma(z1, w1) + f(z1, w1) with w1 standing for conj(z1)
/// and Q_gamma = z1 w1 + gamma (z1^2 + w1^2).  Series in (z1, w1) reuse CrownSeries.
struct BishopSurface {
    double gamma = 1.0;
    CrownSeries f;
};

/// Validates gamma > 1/2, order >= 3 and real coefficients of f.
BishopSurface make_surface(double gamma, const CrownSeries& f, double realness_tol = kRealnessTol);
/// Q_gamma as a series of truncation D.
CrownSeries quadric(double gamma, int trunc_total);

/// Deck transformation (z1, w1) -> (z1, phi1(z1, w1)) of the first projection.
CrownMap deck_transformation(const BishopSurface& m);
/// Q+f evaluated at (z1, phi1) minus Q+f at (z1, w1).
CrownSeries deck_residual(const BishopSurface& m, const CrownMap& deck);

/// Eigen-coordinates of the linear deck map.  z1 = a xi + b eta and w1 = conj(a) xi + conj(b) eta,
/// with b = e^{i lambda/2} a and a = -i e^{-i lambda/4}/sqrt(2).
struct DiagonalFrame {
    double lambda = 0.0;
    cplx root;                 ///< e^{i lambda/2}, the root of gamma X^2 - X + gamma with Im >= 0
    std::array<cplx, 4> basis; ///< row-major [[a, b], [conj a, conj b]]
};

DiagonalFrame diagonal_frame(double gamma);

struct Diagonalization {
    DiagonalFrame frame;
    InvolutionPair pair;
};

/// tau_1 of the surface in (xi, eta) coordinates, with constant alpha = lambda.
Diagonalization diagonalize(const BishopSurface& m);

struct ReconstructedSurface {
    CrownMap phi;      ///< (phi1, phi2) with phi2 the conjugate series of phi1
    CrownSeries Phi;   ///< (xi o tau_1) xi
    CrownSeries z2_raw;  ///< Phi o phi^{-1} in (z1, w1)
    CrownSeries z2;    ///< normalised so that its quadratic part is Q_gamma
    cplx kappa;        ///< z1 = kappa z1', w1 = conj(kappa) w1'
    cplx scale;        ///< z2 = scale z2'
    double gamma = 0.0;
};

/// Surface z2 = (Phi o phi^{-1})(z1, w1) attached to the pair.
ReconstructedSurface reconstruct_surface(const InvolutionPair& t);

/// Pointwise map applied before (phi1, Phi); the identity when empty.
using PointMap = std::function<std::pair<cplx, cplx>(cplx, cplx)>;

struct HyperbolaPoint {
    double omega = 0.0;
    int arg_index = 0;
    cplx z1;
    cplx w1;
    cplx z2;
    bool is_real_branch = false;
    /// |w1 - conj z1| + |Im(z2/scale)| on real-branch points, 0 elsewhere.
    double realness_residual = 0.0;
};

/// Samples (xi, omega/xi) on {xi eta = omega} for n_pts log-spaced |xi| in (|omega|/R, R)
/// and four arguments (0, pi/2, pi, 3pi/2), maps them through psi and then (phi1, Phi).
/// Arguments 0 and pi are the two real branches.  Phi = xi (xi o tau_1) is tau_1-invariant
/// but equals the surface height only when the pair is in normal form, so Im z2 on the
/// real branches measures the distance from normal form.
std::vector<HyperbolaPoint> hyperbola_image(const InvolutionPair& t, const PointMap& psi, double omega, double R,
                                            int n_pts);
/// Same sampling, mapped through psi and the diagonal frame of `m` into (z1, w1), with
/// z2 = Q_gamma + f evaluated there.  The realness residual is |w1 - conj z1| + |Im z2|.
std::vector<HyperbolaPoint> hyperbola_image(const BishopSurface& m, const PointMap& psi, double omega, double R,
                                            int n_pts);

}  // namespace kam
