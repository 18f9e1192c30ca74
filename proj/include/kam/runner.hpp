#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kam/involution.hpp"
#include "kam/kamstep.hpp"
#include "kam/moserwebster.hpp"
#include "kam/prenormal.hpp"
#include "kam/series.hpp"
#include "kam/sieve.hpp"

namespace kam {

using json = nlohmann::json;

struct Tolerances {
    double realness = 1e-10;
    double exp_tail = 1e-16;
    double inverse = 1e-14;
    int max_inverse_iters = 50;
    double structural = 1e-9;
    double divisor_floor = 1e-8;
    double degeneracy = 1e-12;
    double root_tol = 1e-12;
    int grid_per_unit = 4096;
    double merge_tol = 1e-13;
    double convergence_floor = 1e-13;
};

/// A (m, n, value) monomial of a series given in the config.
struct Term {
    int m = 0;
    int n = 0;
    cplx value;
};

struct RunConfig {
    std::string name = "custom";
    Mode mode = Mode::Practical;
    int degree = 16;             ///< D, total truncation degree; Dz = D/2
    int normal_form_order = 1;   ///< N of the Poincare-Dulac stage
    int s_hint = 1;
    int max_nu = 3;
    // instance: either a surface (gamma, f) or a direct pair (alpha, p, q)
    bool is_surface = true;
    double gamma = 1.0;
    std::vector<Term> f;
    std::vector<cplx> alpha;
    std::vector<Term> p;
    std::vector<Term> q;
    // omega sampling
    int omega_count = 9;
    double window_fraction = 0.2;
    int samples = 64;
    double r_start = 0.25;
    int max_halvings = 12;
    int curve_points = 64;
    Tolerances tol;
    std::string output_dir = "kam_out";
};

/// Parses a config; errors are KamError(Config) naming the offending field path.
RunConfig config_from_json(const json& j);
json config_to_json(const RunConfig& c);
/// Reads the file at `path` (JSON syntax).
RunConfig load_config(const std::string& path);
/// The bundled fixtures: "linear" (unperturbed quadric) and "cubic".
RunConfig fixture_config(const std::string& name);
std::vector<std::string> fixture_names();

/// Series of the configured instance.
CrownSeries series_from_terms(const std::vector<Term>& terms, int trunc_total);

struct ExcludedOmega {
    double omega = 0.0;
    int n = 0;          ///< the resonance order responsible
    double divisor = 0.0;
};

struct SieveRecord {
    int nu = 0;
    double delta = 0.0;
    double K = 0.0;
    double surviving_measure = 0.0;
    double excluded_measure = 0.0;
    MeasureReport measure;
    double pyartli = 0.0;  ///< summed Pyartli bound over the excised harmonics
    std::vector<ExcludedOmega> excluded_samples;
};

/// Data of the normalisation that precedes the iteration.
struct Preparation {
    RunConfig config;
    InvolutionPair original;    ///< tau_1 in diagonal coordinates, never conjugated
    CrownMap tau1_original;     ///< the same involution as explicit series
    std::optional<Diagonalization> diag;
    double deck_residual = 0.0;
    StructuralReport original_structure;
    std::vector<PDStage> pd_stages;
    CoeffSeries c_tilde;
    CoeffSeries alpha_check;    ///< alpha after the real-form scaling, before rescaling
    Nondegeneracy nondeg;
    bool trivial = false;       ///< p = q = 0 after normalisation
    RadiusResult radius;
    std::optional<StepReport> case2_step;
    CrownMap psi_pre_case2;     ///< Psi-check without the Case-2 step
    CrownMap psi_check;         ///< Psi-check with the Case-2 step folded in
    InvolutionPair prepared;    ///< the pair at nu = 0, in the coordinates of Psi-check
    double r0 = 0.0;            ///< starting radius of the iteration
    double alpha0_lambda = 0.0; ///< sup over the grid of |alpha_0 - lambda|
};

struct KamState {
    int nu = 0;
    double r0 = 0.0;
    double r = 0.0;
    double beta = 0.0;
    double window = 0.0;        ///< R^2, the half-width of the parameter window
    InvolutionPair pair;
    IntervalSet O;
    std::vector<double> samples;  ///< omega grid before sieving
    std::vector<CrownMap> chain;
    std::vector<StepReport> history;
    std::vector<StepGeometry> geometries;
    std::vector<SieveRecord> sieve;
    std::vector<double> eps_measured;    ///< eps_nu at (O_nu, beta_nu, r_nu)
    std::vector<double> skew_measured;
    std::vector<double> chain_deltas;    ///< |Psi_{nu+1} - Psi_nu|
    std::vector<double> involution_residuals;  ///< |tau o tau - Id| of each new pair
    CrownMap composite;                  ///< psi_0 o ... o psi_{nu-1}
    std::string status = "running";
    std::string failure;

    /// Grid points still in O.
    std::vector<double> grid() const;
};

/// moserwebster (surface input) -> prenormal -> radius_search, with the Case-2 step when needed.
Preparation prepare(const RunConfig& cfg);
/// The state at nu = 0 built from a preparation.
KamState initial_state(const Preparation& prep);
/// Runs rounds of excision + main_step until max_nu, the convergence floor or a failed step.
void iterate(KamState& state, const Preparation& prep, int max_nu);

struct CurvePoint {
    cplx xi;
    cplx eta;
    cplx x;   ///< Psi_omega(xi, eta), first component
    cplx y;
    double residual = 0.0;
};

struct CurveResult {
    double omega = 0.0;
    double mu_omega = 0.0;
    double conjugacy_residual = 0.0;
    double equivariance_residual = 0.0;
    double chain_tail = 0.0;
    double radius = 0.0;  ///< samples satisfy |xi|, |eta| < radius
    bool mu_in_window = false;
    std::vector<CurvePoint> points;
};

/// Pointwise Psi_omega = Psi-check o psi_0 o ... o psi_last.
std::pair<cplx, cplx> eval_chain(const KamState& state, const Preparation& prep, cplx x, cplx y);
/// Pointwise sigma_o of the original pair.
std::pair<cplx, cplx> eval_original_sigma(const Preparation& prep, cplx x, cplx y);

CurveResult extract_curve(const KamState& state, const Preparation& prep, double omega, int n_pts);
/// One curve per surviving grid point, computed concurrently and merged in omega order.
std::vector<CurveResult> extract_curves(const KamState& state, const Preparation& prep, int n_pts);

struct SmoothnessTable {
    std::vector<double> omegas;
    std::vector<double> mu;
    std::vector<std::vector<double>> differences;  ///< orders 1..min(3, count-1)
    double lipschitz = 0.0;
};

/// Divided differences of omega -> mu_omega; a diagnostic, not a Whitney estimate.
SmoothnessTable smoothness_diagnostic(const std::vector<CurveResult>& results);

/// Everything a run produces, serialisable deterministically.
struct RunOutput {
    Preparation prep;
    KamState state;
    std::vector<CurveResult> curves;
    SmoothnessTable smoothness;
    Schedule schedule;
    bool have_schedule = false;
};

RunOutput run_all(const RunConfig& cfg, bool with_curves = true);

json to_json(const StepReport& r);
json to_json(const IntervalSet& s);
json to_json(const CoeffSeries& a);
json to_json(const CrownSeries& f);
json report_json(const RunOutput& out);

std::string steps_csv(const KamState& state);
std::string sieve_csv(const KamState& state);
std::string curves_csv(const std::vector<CurveResult>& curves);
std::string curves_summary_csv(const std::vector<CurveResult>& curves);

/// Pass/fail list of the invariant suite run by `verify`.
std::vector<ResidualEntry> verify_suite(const RunOutput& out);

/// Writes run_report.json, steps.csv, sieve.csv, curves.csv, curves_summary.csv and plotdata/.
void write_outputs(const RunOutput& out, const std::string& dir);

}  // namespace kam
