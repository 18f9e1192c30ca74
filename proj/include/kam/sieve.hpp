#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kam/kamstep.hpp"
#include "kam/series.hpp"

namespace kam {

/// Finite union of closed intervals on the real line, kept sorted and merged.
class IntervalSet {
public:
    IntervalSet() = default;
    /// Builds from arbitrary intervals; pieces closer than merge_tol are joined.
    explicit IntervalSet(std::vector<std::pair<double, double>> pieces, double merge_tol = 1e-13);
    static IntervalSet interval(double a, double b) { return IntervalSet({{a, b}}); }

    const std::vector<std::pair<double, double>>& pieces() const { return pieces_; }
    bool empty() const { return pieces_.empty(); }
    double measure() const;
    bool contains(double x) const;
    /// True when every piece of `o` lies inside this set (up to tol).
    bool contains(const IntervalSet& o, double tol = 1e-12) const;

    IntervalSet unite(const IntervalSet& o) const;
    IntervalSet intersect(const IntervalSet& o) const;
    /// Closure of this set minus the open interior of `o`.
    IntervalSet subtract(const IntervalSet& o) const;

private:
    std::vector<std::pair<double, double>> pieces_;
    double merge_tol_ = 1e-13;
};

struct SieveOptions {
    int grid_per_unit = 4096;
    int min_grid = 100;
    double root_tol = 1e-12;
    double merge_tol = 1e-13;
};

struct ExcisionResult {
    IntervalSet kept;
    IntervalSet removed;
    int resonances_hit = 0;  ///< number of (n, k) pairs that removed something
};

/// Removes from O every omega where |e^{i n alpha(omega)} - 1| < delta for some
/// 0 < n <= floor(K) + 1.  Zone boundaries are the zeros of n alpha - 2 pi k -/+ theta,
/// theta = 2 arcsin(delta/2), bracketed on a grid and refined by bisection; removed
/// intervals are inflated by root_tol.  delta = 0 returns O unchanged.
ExcisionResult excise_resonances(const IntervalSet& O, const CoeffSeries& alpha, double K, double delta,
                                 const SieveOptions& opts = {});

/// 4 (q! A / (2 delta))^{1/q}, the sublevel-set measure bound for |f^{(q)}| >= delta.
double pyartli_bound(int q, double delta, double A);

struct MeasureReport {
    double excluded = 0.0;
    double bound_100 = 0.0;  ///< eps^{1/(100 s^2)}
    double bound_80 = 0.0;   ///< eps^{1/(80 s^2)}
    bool within_100 = false;
    bool within_80 = false;
};

/// |(before \ after) within window| against the two measure bounds.  Throws when
/// `after` is not contained in `before`.
MeasureReport measure_excluded(const IntervalSet& before, const IntervalSet& after, const IntervalSet& window,
                               double eps, int s);

struct Schedule {
    std::vector<double> eps;
    std::vector<double> r;
    std::vector<double> beta;
    std::vector<double> beta_tilde;
    std::vector<double> zeta;
    std::vector<double> K;
    double feasibility_lhs = 0.0;  ///< must be < 1
    bool feasible = false;
    double cube_root_sum = 0.0;    ///< sum of eps_nu^{1/3}, must be < 1/240
    bool cube_root_ok = false;
};

/// eps_{nu+1} = eps_nu^{5/4}, beta_nu = eps_nu^{1/(40s)}, beta-tilde_nu = 16 eps_nu^{1/(32s)},
/// zeta_0 = eps_0^{1/3}, zeta_{nu+1} = zeta_nu + eps_nu^{1/3}, r_{nu+1} = r_nu - r_0/2^{nu+2} and
/// K_nu = |ln eps_nu| / |ln((7 r_nu + r_{nu+1}) / (8 r_nu))|, for nu = 0..max_nu.
Schedule build_schedule(int s, double r0, double eps0, int max_nu);

}  // namespace kam
