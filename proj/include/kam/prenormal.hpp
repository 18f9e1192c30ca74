#pragma once

#include <string>
#include <vector>

#include "kam/involution.hpp"
#include "kam/kamstep.hpp"
#include "kam/series.hpp"

namespace kam {

/// Bookkeeping for one homogeneous degree of the Poincare-Dulac normalisation.
struct PDStage {
    int degree = 0;
    int eliminated = 0;      ///< non-resonant monomial pairs removed
    int resonant = 0;        ///< resonant monomials kept in the principal part
    double min_divisor = 0.0;
};

struct PoincareDulacResult {
    InvolutionPair pair;      ///< alpha = lambda; resonant terms remain in p_{0,1} and q_{1,0}
    std::vector<CrownMap> chain;  ///< one near-identity map per degree, innermost last
    CrownMap transform;       ///< composite of the chain, new coordinates to old
    std::vector<PDStage> stages;
    CoeffSeries c_tilde;      ///< resonant part of p_{0,1}, z-degree <= N
};

/// Removes every non-resonant monomial of total degree <= 2N+1 from p and q by
/// real-coefficient polynomial conjugations (so each stage commutes with rho).
/// The input must have constant alpha.
PoincareDulacResult poincare_dulac(const InvolutionPair& t, int N, double divisor_floor = 1e-8,
                                   double inverse_tol = 1e-14);

/// True when the crown index (l, j) of a p-monomial xi^m eta^n is resonant (n = m + 1).
inline bool p_resonant(int m, int n) { return n == m + 1; }
/// True when the q-monomial xi^m eta^n is resonant (m = n + 1).
inline bool q_resonant(int m, int n) { return m == n + 1; }

struct RealFormResult {
    InvolutionPair pair;   ///< alpha-check real, p-check and q-check of order >= 2N+2
    CoeffSeries mu;        ///< the fourth root used for the scaling
    CrownMap scaling;      ///< (mu xi, mu^{-1} eta)
    double alpha_imag_before_projection = 0.0;
};

/// Product-preserving scaling (mu xi, mu^{-1} eta) turning the principal part
/// (e^{i lambda/2} + C(xi eta)) eta into e^{i alpha(xi eta)/2} eta with alpha real, where
/// alpha = lambda - i [log(1 + e^{-i lambda/2} C) - log(1 + e^{i lambda/2} conj C)].
RealFormResult realform_scaling(const InvolutionPair& t, const CoeffSeries& c_tilde, double realness_tol = 1e-12);

struct Nondegeneracy {
    bool degenerate = true;
    int s = 0;
    double coefficient = 0.0;  ///< the z^s coefficient before rescaling
    double rescale = 1.0;      ///< t with |coefficient| t^{2s} = 1
};

/// Smallest s >= 1 with |g_s| > tol, for g = alpha - lambda (or C-tilde).
Nondegeneracy detect_nondegeneracy(const CoeffSeries& g, double degeneracy_tol = 1e-12);

/// Conjugation by (t xi, t eta): alpha(z) -> alpha(t^2 z), p -> p(t xi, t eta)/t.
InvolutionPair rescale_pair(const InvolutionPair& t, double factor);

enum class Branch { Case1, Case2 };
const char* to_string(Branch b);

struct RadiusTrial {
    double r = 0.0;
    double A = 0.0;
    bool smallness_A = false;   ///< the rigorous inequality
    bool practical_ok = false;  ///< one trial step contracted
    std::string note;
};

struct RadiusOptions {
    Mode mode = Mode::Practical;
    int N = 1;
    double window_fraction = 0.2;  ///< omega window is |omega| <= window_fraction r^2
    int omega_count = 9;
    int samples = 64;
    int max_halvings = 12;
    double r_start = 0.25;
};

struct RadiusResult {
    double r_star = 0.0;
    double A = 0.0;
    double eps0 = 0.0;     ///< measured 10 max(|p|,|q|) at the chosen radius
    double skew = 0.0;
    double skew_threshold = 0.0;  ///< A^{3/2}/3
    Branch branch = Branch::Case1;
    bool smallness_A = false;
    std::vector<RadiusTrial> trials;
};

/// Left side of the rigorous smallness inequality for A at radius r.
double smallness_A_lhs(double A, double r, int s);

/// omega grid: `count` log-spaced |omega| in (1e-4 R2, 0.9 R2), both signs, ascending.
std::vector<double> omega_grid(double R2, int count);

/// Halves r from r_start until the active predicate holds.
RadiusResult radius_search(const InvolutionPair& prepared, const RadiusOptions& opts);

}  // namespace kam
