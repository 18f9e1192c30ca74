#include "kam/prenormal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kam {

namespace {

constexpr cplx kI{0.0, 1.0};

CoeffSeries eia(const CoeffSeries& alpha, double c, int dz) { return exp(alpha.resized(dz) * (kI * c)); }

// p and q of a map written against the principal part of `alpha`.
InvolutionPair pair_from_map(const CrownMap& tau, const CoeffSeries& alpha, int s_order) {
    const int d = tau.x.trunc();
    const int dz = d / 2;
    const CrownSeries p = tau.x - multiply_product_series(eia(alpha, 0.5, dz), CrownSeries::eta(d));
    const CrownSeries q = tau.y - multiply_product_series(eia(alpha, -0.5, dz), CrownSeries::xi(d));
    return make_involution(alpha, p, q, s_order);
}

}  // namespace

PoincareDulacResult poincare_dulac(const InvolutionPair& t, int N, double divisor_floor, double inverse_tol) {
    require(N >= 0, ErrorKind::InvalidArgument, "poincare_dulac: N must be >= 0");
    const int d = t.trunc();
    require(d >= 2 * (2 * N + 2), ErrorKind::InvalidArgument,
            "poincare_dulac: truncation degree must be at least 2(2N+2)");
    for (int k = 1; k <= t.alpha.trunc(); ++k)
        require(std::abs(t.alpha[k]) == 0.0, ErrorKind::InvalidArgument, "poincare_dulac: alpha must be constant");
    require(t.p.order() >= 2 && t.q.order() >= 2, ErrorKind::InvalidArgument,
            "poincare_dulac: p and q must vanish to second order");

    const double lambda = t.lambda();
    const cplx a = std::exp(kI * (0.5 * lambda));
    PoincareDulacResult res;
    res.pair = t;
    res.transform = identity_map(d);

    for (int deg = 2; deg <= 2 * N + 1; ++deg) {
        PDStage st;
        st.degree = deg;
        st.min_divisor = std::numeric_limits<double>::infinity();
        CrownSeries u(d), v(d);
        // Coefficient of xi^m eta^n in the first component gives the real 2x2 system
        // e^{i lambda/2} v_{mn} - e^{i(n-m) lambda/2} u_{nm} = -p_{mn}.
        for (int n = 0; n <= deg; ++n) {
            const int m = deg - n;
            if (p_resonant(m, n)) {
                ++st.resonant;
                continue;
            }
            const cplx P = res.pair.p.coeff(m, n);
            const cplx b = std::exp(kI * (0.5 * (n - m) * lambda));
            const double div = std::abs(std::exp(kI * ((m - n + 1) * lambda)) - 1.0);
            st.min_divisor = std::min(st.min_divisor, div);
            require(div >= divisor_floor, ErrorKind::SmallDivisor,
                    "poincare_dulac: divisor " + std::to_string(div) + " at degree " + std::to_string(deg) +
                        " below the floor");
            const double s_ab = (a * std::conj(b)).imag();
            v.at(m, n) = -(P * std::conj(b)).imag() / s_ab;
            u.at(n, m) = -(P * std::conj(a)).imag() / s_ab;
            ++st.eliminated;
        }
        const CrownMap phi = identity_map(d) + CrownMap{u, v};
        InverseOptions opts;
        opts.tol = inverse_tol;
        const InverseResult inv = invert_near_identity(CrownMap{u, v}, opts);
        const CrownMap tau = compose(identity_map(d) + inv.v, compose(as_map(res.pair), phi));
        res.pair = pair_from_map(tau, t.alpha, t.s_order);
        res.chain.push_back(phi);
        res.transform = compose(res.transform, phi);
        res.stages.push_back(st);
    }
    res.c_tilde = res.pair.p.crown_coeff(0, 1).resized(N).resized(d / 2);
    return res;
}

RealFormResult realform_scaling(const InvolutionPair& t, const CoeffSeries& c_tilde, double realness_tol) {
    const int d = t.trunc();
    const int dz = d / 2;
    const double lambda = t.lambda();
    const cplx eh = std::exp(kI * (0.5 * lambda));
    const CoeffSeries c = c_tilde.resized(dz);
    require(std::abs(c[0]) == 0.0, ErrorKind::InvalidArgument, "realform_scaling: C-tilde must vanish at 0");
    const CoeffSeries w = (c + eh) * (c.conj() + std::conj(eh));
    RealFormResult out;
    out.mu = pow(w, 0.25);
    const CoeffSeries mu_inv = pow(w, -0.25);
    const CrownSeries xi = CrownSeries::xi(d), eta = CrownSeries::eta(d);
    out.scaling = {multiply_product_series(out.mu, xi), multiply_product_series(mu_inv, eta)};
    const CrownMap scaling_inv{multiply_product_series(mu_inv, xi), multiply_product_series(out.mu, eta)};
    const CoeffSeries one = CoeffSeries::constant(1.0, dz);
    CoeffSeries alpha = CoeffSeries::constant(lambda, dz) -
                        (log(one + c * std::conj(eh)) - log(one + c.conj() * eh)) * kI;
    out.alpha_imag_before_projection = alpha.max_imag();
    require(alpha.is_real(realness_tol), ErrorKind::Structural,
            "realform_scaling: alpha-check is not real (max |Im| = " + std::to_string(alpha.max_imag()) + ")");
    alpha = alpha.real_projected(realness_tol);
    const CrownMap tau = compose(scaling_inv, compose(as_map(t), out.scaling));
    out.pair = pair_from_map(tau, alpha, t.s_order);
    return out;
}

Nondegeneracy detect_nondegeneracy(const CoeffSeries& g, double degeneracy_tol) {
    Nondegeneracy out;
    for (int k = 1; k <= g.trunc(); ++k) {
        if (std::abs(g[k]) > degeneracy_tol) {
            out.degenerate = false;
            out.s = k;
            out.coefficient = g[k].real();
            out.rescale = std::pow(std::abs(g[k]), -1.0 / (2.0 * k));
            return out;
        }
    }
    return out;
}

InvolutionPair rescale_pair(const InvolutionPair& t, double factor) {
    require(factor > 0.0, ErrorKind::InvalidArgument, "rescale_pair: factor must be positive");
    InvolutionPair out = t;
    double f2 = 1.0;
    for (int k = 0; k <= out.alpha.trunc(); ++k) {
        out.alpha[k] *= f2;
        f2 *= factor * factor;
    }
    out.p = t.p.scaled_vars(factor, factor) * cplx{1.0 / factor, 0.0};
    out.q = t.q.scaled_vars(factor, factor) * cplx{1.0 / factor, 0.0};
    return out;
}

const char* to_string(Branch b) { return b == Branch::Case1 ? "case1" : "case2"; }

double smallness_A_lhs(double A, double r, int s) {
    const double s2 = static_cast<double>(s) * s;
    const double lead = std::abs(std::log(A)) / std::abs(std::log(7.0 / 8.0 + 3.0 / 32.0)) + 2.0;
    const double log_lhs = std::log(lead) + 16.0 * s * std::log(16.0 * s + 1.0) +
                           (49.0 / 50.0) / (2400.0 * s2) * std::log(A) - std::log((3.0 / 16.0) * r * (9.0 / 16.0) * r);
    return std::exp(log_lhs);
}

std::vector<double> omega_grid(double R2, int count) {
    require(R2 > 0.0 && count >= 1, ErrorKind::InvalidArgument, "omega_grid: need R2 > 0 and count >= 1");
    std::vector<double> pos;
    const double lo = std::log(1e-4 * R2), hi = std::log(0.9 * R2);
    for (int k = 0; k < count; ++k) pos.push_back(std::exp(count == 1 ? hi : lo + (hi - lo) * k / (count - 1)));
    std::vector<double> out;
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) out.push_back(-*it);
    out.insert(out.end(), pos.begin(), pos.end());
    return out;
}

RadiusResult radius_search(const InvolutionPair& prepared, const RadiusOptions& opts) {
    const int s = prepared.s_order;
    RadiusResult res;
    double r = opts.r_start;
    for (int h = 0; h <= opts.max_halvings; ++h, r /= 2.0) {
        RadiusTrial tr;
        tr.r = r;
        tr.A = 10.0 * std::max(prepared.p.weighted_l1(r), prepared.q.weighted_l1(r));
        tr.smallness_A = tr.A > 0.0 && smallness_A_lhs(tr.A, r, s) < 1.0;
        bool ok = false;
        if (opts.mode == Mode::Rigorous) {
            ok = tr.smallness_A;
        } else {
            const std::vector<double> grid = omega_grid(opts.window_fraction * r * r, opts.omega_count);
            const double beta = r * r / 8.0;
            const NormSet ns{grid, beta, r, opts.samples};
            const double eps = measured_eps(prepared, ns);
            if (eps == 0.0) {
                tr.practical_ok = true;
                tr.note = "vanishing perturbation";
            } else if (eps >= 1.0) {
                tr.note = "eps " + std::to_string(eps) + " >= 1";
            } else {
                try {
                    const StepGeometry g = make_geometry(eps, s, r, 0.75 * r, beta, grid, prepared.alpha,
                                                         prepared.trunc(), Mode::Practical, opts.samples);
                    const StepResult st = main_step(prepared, g);
                    tr.practical_ok = st.report.practical_pq;
                    tr.note = "eps " + std::to_string(eps) + " -> |p+|+|q+| " +
                              std::to_string(st.report.norm_p_plus + st.report.norm_q_plus);
                } catch (const KamError& e) {
                    tr.note = e.what();
                }
            }
            ok = tr.practical_ok;
            if (ok) {
                res.eps0 = eps;
                res.skew = ns.norm(skew_term(prepared));
            }
        }
        res.trials.push_back(tr);
        if (ok) {
            res.r_star = r;
            res.A = tr.A;
            res.smallness_A = tr.smallness_A;
            res.skew_threshold = std::pow(tr.A, 1.5) / 3.0;
            if (opts.mode == Mode::Rigorous) {
                const std::vector<double> grid = omega_grid(opts.window_fraction * r * r, opts.omega_count);
                const NormSet ns{grid, r * r / 8.0, r, opts.samples};
                res.eps0 = measured_eps(prepared, ns);
                res.skew = ns.norm(skew_term(prepared));
            }
            res.branch = res.skew < res.skew_threshold ? Branch::Case1 : Branch::Case2;
            return res;
        }
    }
    throw KamError(ErrorKind::Domain, "radius_search: r_* underflow after " + std::to_string(opts.max_halvings) +
                                          " halvings (" + to_string(opts.mode) + " predicate never held)");
}

}  // namespace kam
