#pragma once

#include <string>
#include <vector>

#include "kam/series.hpp"

namespace kam {

/// Default realness tolerance for series that must have real coefficients.
inline constexpr double kRealnessTol = 1e-10;

/// The involution tau_1(xi, eta) = (e^{i alpha/2} eta + p, e^{-i alpha/2} xi + q),
/// with alpha = alpha(xi*eta) real.  tau_2 = rho o tau_1 o rho and
/// sigma = tau_1 o tau_2 are derived from it.
struct InvolutionPair {
    CoeffSeries alpha;
    CrownSeries p;
    CrownSeries q;
    int s_order = 1;

    int trunc() const { return p.trunc(); }
    double lambda() const { return alpha[0].real(); }
};

/// Validates shapes and realness of alpha, then projects alpha onto the reals.
InvolutionPair make_involution(const CoeffSeries& alpha, const CrownSeries& p, const CrownSeries& q, int s_order = 1,
                               double realness_tol = kRealnessTol);
/// The pair with p = q = 0 and constant alpha = lambda.
InvolutionPair linear_involution(double lambda, int trunc_total);

/// The reversible map sigma(xi, eta) = (e^{i alpha} xi + f, e^{-i alpha} eta + g).
struct ReversibleMap {
    CoeffSeries alpha;
    CrownSeries f;
    CrownSeries g;
};

/// tau_1 as an explicit pair of series.
CrownMap as_map(const InvolutionPair& t);
CrownMap as_map(const ReversibleMap& s);

/// Series data of rho o tau_1 o rho: alpha negated, p and q conjugated.
InvolutionPair tau2_of(const InvolutionPair& t);
/// sigma = tau_1 o tau_2 by exact truncated substitution.
ReversibleMap compose_sigma(const InvolutionPair& t);
/// e^{i alpha/2} eta q + e^{-i alpha/2} xi p.
CrownSeries skew_term(const InvolutionPair& t);
/// e^{-i h} xi p1 + e^{i h} eta p2 with h = h(xi*eta).
CrownSeries skew_operator_L(const CoeffSeries& h, const CrownSeries& p1, const CrownSeries& p2);

/// One measured quantity paired with the bound it is compared against.
struct ResidualEntry {
    std::string name;
    double measured = 0.0;
    double bound = 0.0;
    bool has_bound = true;

    bool passed() const { return !has_bound || measured <= bound; }
};

/// Norm data for structural residuals: an omega grid plus crown width and radius.
struct NormSet {
    std::vector<double> omegas{0.0};
    double beta = 0.0;
    double radius = 1.0;
    int samples = 64;

    double norm(const CrownSeries& f) const { return crown_norm_over(f, omegas, beta, radius, samples); }
    double norm(const CrownMap& m) const { return map_norm_over(m, omegas, beta, radius, samples); }
    double norm(const CoeffSeries& a) const { return product_norm_over(a, omegas, beta, samples); }
};

struct StructuralReport {
    double eps = 0.0;
    std::vector<ResidualEntry> entries;

    const ResidualEntry& get(const std::string& name) const;
};

/// 10 * max(|p|, |q|) at the given norm data.
double measured_eps(const InvolutionPair& t, const NormSet& ns);

/// Involution, reversibility, skew and coefficient-identity residuals, each
/// with the matching bound evaluated at `eps` (or the measured eps when eps <= 0).
StructuralReport structural_residuals(const InvolutionPair& t, const NormSet& ns, double eps = -1.0,
                                      double structural_tol = 1e-9);

/// psi^{-1} o L o psi with L = (e^{i alpha/2} eta, e^{-i alpha/2} xi).  Conjugating the
/// linear involution keeps tau_1 o tau_1 = Id exact up to truncation, which makes
/// this the generator for involution-closed instances.
InvolutionPair conjugated_involution(const CoeffSeries& alpha, const CrownMap& psi, double inverse_tol = 1e-14,
                                     int max_inverse_iters = 50);
/// (e^{h} xi, e^{-h} eta), which preserves the product xi*eta.
CrownMap product_preserving_map(const CrownSeries& h);

/// |tau_1 o tau_1 - Id| at the given norm data.
double involution_residual(const InvolutionPair& t, const NormSet& ns);
/// |sigma-bar o sigma - Id|, the reversibility residual rho sigma rho o sigma - Id.
double reversibility_residual(const ReversibleMap& s, const NormSet& ns);

}  // namespace kam
