#pragma once

#include <string>
#include <vector>

#include "kam/involution.hpp"
#include "kam/series.hpp"

namespace kam {

/// Rigorous mode uses the full constants unchanged; practical mode relaxes
/// the ones that presume an astronomically small epsilon.
enum class Mode { Practical, Rigorous };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

/// Radii, crown widths, truncation index and divisor threshold of one step.
struct StepGeometry {
    double eps = 0.0;
    int s = 1;
    double r = 0.0;
    double r_plus = 0.0;
    double beta = 0.0;
    double beta_plus = 0.0;
    double beta_tilde = 0.0;
    double K_formula = 0.0;  ///< |ln eps| / |ln(r^{(7)}/r)|
    double K = 0.0;      ///< real-valued K used in bounds (capped at D in practical mode)
    int K_index = 0;     ///< integer cutoff used for crown indices
    double delta = 0.0;
    std::vector<double> omegas;  ///< omega grid standing for the parameter set
    int samples = 64;
    Mode mode = Mode::Practical;

    /// r^{(m)} = r_+ + (m/8)(r - r_+).
    double r_m(int m) const { return r_plus + (m / 8.0) * (r - r_plus); }
};

/// min over the omega grid and 0 < n <= n_max of |e^{i n alpha(omega)} - 1|.
double min_divisor(const CoeffSeries& alpha, const std::vector<double>& omegas, int n_max);

/// Builds the geometry for a step from (r, r_+, beta, eps).  In practical mode
/// K is capped at the truncation degree, the crown widths are capped so the
/// crowns stay nonempty, and delta = min(eps^{1/(64s)}, 0.9 * smallest divisor).
StepGeometry make_geometry(double eps, int s, double r, double r_plus, double beta, const std::vector<double>& omegas,
                           const CoeffSeries& alpha, int trunc_total, Mode mode, int samples = 64);

struct TruncatedPQ {
    CrownSeries p_K;
    CrownSeries q_K;
    double tail_norm = 0.0;  ///< max(|p - p_K|, |q - q_K|) at (beta_tilde, r^{(7)})
    double tail_bound = 0.0; ///< eps^2/10
};

/// Keeps crown indices l, j <= floor(K).
TruncatedPQ truncate_K(const CrownSeries& p, const CrownSeries& q, const StepGeometry& geom);
/// Crown-index truncation of a single series.
CrownSeries truncate_crown(const CrownSeries& f, int k_index);

struct CohomologicalSolution {
    CrownSeries u;
    CrownSeries v;
    double min_divisor = 0.0;  ///< smallest |divisor| seen on the evaluation disks
};

/// u-hat, v-hat from the divisor formulas with u_{1,0} = v_{0,1} = 0.
CohomologicalSolution solve_cohomological(const InvolutionPair& t, const ReversibleMap& sigma,
                                          const StepGeometry& geom, double realness_tol = kRealnessTol);

/// Left-hand sides of the two approximate cohomological equations.
CrownMap cohomological_residual(const InvolutionPair& t, const CohomologicalSolution& uv, const StepGeometry& geom);

/// tau_1 conjugated by Id + U-hat, before the product-preserving scaling.
struct IntermediatePair {
    CoeffSeries alpha;
    CoeffSeries A;     ///< p_{0,1} of the input, the correction of the principal part
    CrownMap tau;      ///< the conjugated involution as explicit series
    CrownMap phi;      ///< Id + U-hat
    CrownSeries p_tilde;
    CrownSeries q_tilde;
};

IntermediatePair conjugate_step(const InvolutionPair& t, const CohomologicalSolution& uv, const StepGeometry& geom,
                                double inverse_tol = 1e-14, int max_inverse_iters = 50);

struct ThetaResult {
    InvolutionPair pair;
    CoeffSeries theta;
    CrownMap scaling;  ///< (Theta xi, Theta^{-1} eta)
};

/// Conjugates by (Theta xi, Theta^{-1} eta) with Theta = ((e^{i alpha/2}+A)(e^{-i alpha/2}+conj A))^{1/4}
/// and sets alpha_+ = alpha - i (e^{-i alpha/2} A - e^{i alpha/2} conj A).
ThetaResult theta_scaling(const IntermediatePair& inter, const StepGeometry& geom, double realness_tol = kRealnessTol);

struct StepReport {
    int nu = 0;
    Mode mode = Mode::Practical;
    double eps = 0.0;
    double K = 0.0;
    double K_formula = 0.0;
    int K_index = 0;
    double delta = 0.0;
    double min_divisor = 0.0;
    double norm_p = 0.0;
    double norm_q = 0.0;
    double skew = 0.0;
    double norm_u = 0.0;
    double norm_v = 0.0;
    double norm_p_plus = 0.0;
    double norm_q_plus = 0.0;
    double skew_plus = 0.0;
    double eps_plus = 0.0;  ///< 10 * max(|p_+|, |q_+|) at (beta_+, r_+)
    std::vector<double> alpha_derivs;  ///< sup over the grid of |(alpha_+ - alpha)^{(k)}|
    double tail_norm = 0.0;
    std::vector<ResidualEntry> bounds;  ///< measured values against the full-constant bounds
    bool practical_pq = false;    ///< |p_+| + |q_+| <= eps^{1.15}
    bool practical_skew = false;  ///< skew_+ <= eps^{1.4}

    const ResidualEntry& get(const std::string& name) const;
};

struct StepResult {
    InvolutionPair pair;
    CrownMap psi;       ///< (Id + U-hat) o scaling, mapping new coordinates to old
    CoeffSeries theta;
    StepReport report;
};

/// One full step: truncate_K, compose_sigma, solve_cohomological, conjugate_step, theta_scaling.
StepResult main_step(const InvolutionPair& t, const StepGeometry& geom, double inverse_tol = 1e-14,
                     int max_inverse_iters = 50);

}  // namespace kam
