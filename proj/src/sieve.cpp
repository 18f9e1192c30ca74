#include "kam/sieve.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

namespace kam {

IntervalSet::IntervalSet(std::vector<std::pair<double, double>> pieces, double merge_tol) : merge_tol_(merge_tol) {
    for (const auto& [a, b] : pieces)
        require(a <= b, ErrorKind::InvalidArgument, "IntervalSet: interval with a > b");
    std::sort(pieces.begin(), pieces.end());
    for (const auto& pc : pieces) {
        if (!pieces_.empty() && pc.first <= pieces_.back().second + merge_tol_)
            pieces_.back().second = std::max(pieces_.back().second, pc.second);
        else
            pieces_.push_back(pc);
    }
}

double IntervalSet::measure() const {
    double m = 0.0;
    for (const auto& [a, b] : pieces_) m += b - a;
    return m;
}

bool IntervalSet::contains(double x) const {
    return std::any_of(pieces_.begin(), pieces_.end(), [x](const auto& p) { return p.first <= x && x <= p.second; });
}

bool IntervalSet::contains(const IntervalSet& o, double tol) const {
    for (const auto& [a, b] : o.pieces_) {
        const bool inside = std::any_of(pieces_.begin(), pieces_.end(), [&](const auto& p) {
            return p.first - tol <= a && b <= p.second + tol;
        });
        if (!inside) return false;
    }
    return true;
}

IntervalSet IntervalSet::unite(const IntervalSet& o) const {
    auto all = pieces_;
    all.insert(all.end(), o.pieces_.begin(), o.pieces_.end());
    return IntervalSet(all, merge_tol_);
}

IntervalSet IntervalSet::intersect(const IntervalSet& o) const {
    std::vector<std::pair<double, double>> out;
    std::size_t i = 0, j = 0;
    while (i < pieces_.size() && j < o.pieces_.size()) {
        const double a = std::max(pieces_[i].first, o.pieces_[j].first);
        const double b = std::min(pieces_[i].second, o.pieces_[j].second);
        if (a <= b) out.emplace_back(a, b);
        if (pieces_[i].second < o.pieces_[j].second)
            ++i;
        else
            ++j;
    }
    return IntervalSet(out, merge_tol_);
}

IntervalSet IntervalSet::subtract(const IntervalSet& o) const {
    std::vector<std::pair<double, double>> out;
    for (auto [a, b] : pieces_) {
        double lo = a;
        bool alive = true;
        for (const auto& [c, d] : o.pieces_) {
            if (d <= lo || c >= b) continue;
            if (c > lo) out.emplace_back(lo, c);
            lo = d;
            if (lo >= b) {
                alive = false;
                break;
            }
        }
        if (alive && lo < b) out.emplace_back(lo, b);
    }
    return IntervalSet(out, merge_tol_);
}

namespace {

double real_alpha(const CoeffSeries& alpha, double w) { return alpha.eval(w).real(); }

// Roots of g on [a, b] bracketed on the grid xs and refined by bisection.
template <class F>
void collect_roots(const F& g, const std::vector<double>& xs, const std::vector<double>& gs, double tol,
                   std::vector<double>& roots) {
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        double lo = xs[i], hi = xs[i + 1];
        double glo = gs[i];
        const double ghi = gs[i + 1];
        if (glo == 0.0) {
            roots.push_back(lo);
            continue;
        }
        if ((glo < 0.0) == (ghi < 0.0)) continue;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            const double gm = g(mid);
            if ((gm < 0.0) == (glo < 0.0)) {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        roots.push_back(0.5 * (lo + hi));
    }
}

// Excised pieces for one harmonic n.
std::vector<std::pair<double, double>> excise_one(const IntervalSet& O, const CoeffSeries& alpha, int n, double delta,
                                                  const SieveOptions& opts, int& hits) {
    std::vector<std::pair<double, double>> removed;
    const double theta = 2.0 * std::asin(std::min(1.0, delta / 2.0));
    const double two_pi = 2.0 * std::numbers::pi;
    auto divisor = [&](double w) { return std::abs(std::exp(cplx{0.0, n * real_alpha(alpha, w)}) - 1.0); };
    for (const auto& [a, b] : O.pieces()) {
        if (delta >= 2.0) {
            removed.emplace_back(a, b);
            ++hits;
            continue;
        }
        const int npts = std::max(opts.min_grid, static_cast<int>(std::ceil((b - a) * opts.grid_per_unit))) + 1;
        std::vector<double> xs(npts), phase(npts);
        double pmin = 1e300, pmax = -1e300;
        for (int i = 0; i < npts; ++i) {
            xs[i] = (i == npts - 1) ? b : a + (b - a) * i / (npts - 1);
            phase[i] = n * real_alpha(alpha, xs[i]);
            pmin = std::min(pmin, phase[i]);
            pmax = std::max(pmax, phase[i]);
        }
        std::vector<double> roots{a, b};
        const long k_lo = static_cast<long>(std::floor((pmin - theta) / two_pi));
        const long k_hi = static_cast<long>(std::ceil((pmax + theta) / two_pi));
        std::vector<double> gs(npts);
        for (long k = k_lo; k <= k_hi; ++k) {
            for (double sgn : {-1.0, 1.0}) {
                const double shift = two_pi * k + sgn * theta;
                for (int i = 0; i < npts; ++i) gs[i] = phase[i] - shift;
                collect_roots([&](double w) { return n * real_alpha(alpha, w) - shift; }, xs, gs, opts.root_tol,
                              roots);
            }
        }
        std::sort(roots.begin(), roots.end());
        for (std::size_t i = 0; i + 1 < roots.size(); ++i) {
            const double lo = roots[i], hi = roots[i + 1];
            if (hi - lo <= 0.0) continue;
            if (divisor(0.5 * (lo + hi)) < delta) {
                removed.emplace_back(std::max(a, lo - opts.root_tol), std::min(b, hi + opts.root_tol));
                ++hits;
            }
        }
    }
    return removed;
}

}  // namespace

ExcisionResult excise_resonances(const IntervalSet& O, const CoeffSeries& alpha, double K, double delta,
                                 const SieveOptions& opts) {
    require(delta >= 0.0, ErrorKind::InvalidArgument, "excise_resonances: delta must be nonnegative");
    require(K >= 0.0, ErrorKind::InvalidArgument, "excise_resonances: K must be nonnegative");
    require(alpha.is_real(kRealnessTol), ErrorKind::InvalidArgument, "excise_resonances: alpha must be real");
    if (delta == 0.0) return {O, IntervalSet{}, 0};
    const int n_max = static_cast<int>(std::floor(K)) + 1;
    std::vector<std::future<std::vector<std::pair<double, double>>>> jobs;
    std::vector<int> hits(static_cast<std::size_t>(n_max), 0);
    for (int n = 1; n <= n_max; ++n) {
        int* h = &hits[static_cast<std::size_t>(n - 1)];
        jobs.push_back(std::async(std::launch::async, [&, n, h] { return excise_one(O, alpha, n, delta, opts, *h); }));
    }
    std::vector<std::pair<double, double>> removed;
    for (auto& j : jobs) {
        const auto part = j.get();
        removed.insert(removed.end(), part.begin(), part.end());
    }
    ExcisionResult res;
    res.removed = IntervalSet(removed, opts.merge_tol);
    res.kept = O.subtract(res.removed);
    for (int h : hits) res.resonances_hit += h;
    return res;
}

double pyartli_bound(int q, double delta, double A) {
    require(q >= 1, ErrorKind::InvalidArgument, "pyartli_bound: q must be >= 1");
    require(delta > 0.0 && A >= 0.0, ErrorKind::InvalidArgument, "pyartli_bound: need delta > 0 and A >= 0");
    return 4.0 * std::pow(std::tgamma(q + 1.0) * A / (2.0 * delta), 1.0 / q);
}

MeasureReport measure_excluded(const IntervalSet& before, const IntervalSet& after, const IntervalSet& window,
                               double eps, int s) {
    require(before.contains(after), ErrorKind::Structural, "measure_excluded: surviving set is not contained in O");
    MeasureReport rep;
    rep.excluded = before.subtract(after).intersect(window).measure();
    const double s2 = static_cast<double>(s) * s;
    rep.bound_100 = std::pow(eps, 1.0 / (100.0 * s2));
    rep.bound_80 = std::pow(eps, 1.0 / (80.0 * s2));
    rep.within_100 = rep.excluded <= rep.bound_100;
    rep.within_80 = rep.excluded <= rep.bound_80;
    return rep;
}

Schedule build_schedule(int s, double r0, double eps0, int max_nu) {
    require(s >= 1 && r0 > 0.0 && eps0 > 0.0 && eps0 < 1.0 && max_nu >= 0, ErrorKind::InvalidArgument,
            "build_schedule: need s >= 1, r0 > 0, 0 < eps0 < 1, max_nu >= 0");
    Schedule sc;
    double e = eps0, r = r0, zeta = std::cbrt(eps0);
    for (int nu = 0; nu <= max_nu; ++nu) {
        const double r_next = r - r0 / std::pow(2.0, nu + 2);
        sc.eps.push_back(e);
        sc.r.push_back(r);
        sc.beta.push_back(std::pow(e, 1.0 / (40.0 * s)));
        sc.beta_tilde.push_back(16.0 * std::pow(e, 1.0 / (32.0 * s)));
        sc.zeta.push_back(zeta);
        sc.K.push_back(std::abs(std::log(e)) / std::abs(std::log((7.0 * r + r_next) / (8.0 * r))));
        sc.cube_root_sum += std::cbrt(e);
        zeta += std::cbrt(e);
        e = std::pow(e, 1.25);
        r = r_next;
    }
    const double r1 = r0 - r0 / 4.0;
    const double s2 = static_cast<double>(s) * s;
    const double log_lhs = std::log(std::abs(std::log(eps0)) / std::abs(std::log(7.0 / 8.0 + r1 / (8.0 * r0))) + 2.0) +
                           16.0 * s * std::log(16.0 * s + 1.0) + std::log(eps0) / (2400.0 * s2) -
                           std::log((r0 - r1) * r1);
    sc.feasibility_lhs = std::exp(log_lhs);
    sc.feasible = sc.feasibility_lhs < 1.0;
    sc.cube_root_ok = sc.cube_root_sum < 1.0 / 240.0;
    return sc;
}

}  // namespace kam
