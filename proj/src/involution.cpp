#include "kam/involution.hpp"

#include <algorithm>
#include <cmath>

namespace kam {

namespace {

constexpr cplx kI{0.0, 1.0};

// e^{i c alpha(z)} as a univariate series truncated at dz.
CoeffSeries eia(const CoeffSeries& alpha, double c, int dz) { return exp(alpha.resized(dz) * (kI * c)); }

}  // namespace

InvolutionPair make_involution(const CoeffSeries& alpha, const CrownSeries& p, const CrownSeries& q, int s_order,
                               double realness_tol) {
    require(p.trunc() == q.trunc(), ErrorKind::InvalidArgument, "involution: p and q truncations differ");
    require(s_order >= 1, ErrorKind::InvalidArgument, "involution: s_order must be >= 1");
    InvolutionPair t;
    t.alpha = alpha.real_projected(realness_tol).resized(p.trunc() / 2);
    t.p = p;
    t.q = q;
    t.s_order = s_order;
    return t;
}

InvolutionPair linear_involution(double lambda, int trunc_total) {
    return make_involution(CoeffSeries::constant(lambda, trunc_total / 2), CrownSeries(trunc_total),
                           CrownSeries(trunc_total));
}

CrownMap as_map(const InvolutionPair& t) {
    const int d = t.trunc();
    return {multiply_product_series(eia(t.alpha, 0.5, d / 2), CrownSeries::eta(d)) + t.p,
            multiply_product_series(eia(t.alpha, -0.5, d / 2), CrownSeries::xi(d)) + t.q};
}

CrownMap as_map(const ReversibleMap& s) {
    const int d = s.f.trunc();
    return {multiply_product_series(eia(s.alpha, 1.0, d / 2), CrownSeries::xi(d)) + s.f,
            multiply_product_series(eia(s.alpha, -1.0, d / 2), CrownSeries::eta(d)) + s.g};
}

InvolutionPair tau2_of(const InvolutionPair& t) {
    InvolutionPair out = t;
    out.alpha = -t.alpha;
    out.p = t.p.conj();
    out.q = t.q.conj();
    return out;
}

ReversibleMap compose_sigma(const InvolutionPair& t) {
    // tau_2 = S o R with S the swap and R = (e^{i alpha/2} xi + q-bar, e^{-i alpha/2} eta + p-bar),
    // so h o tau_2 = (h o S) o R is a rotated composition with b = 1/2.
    const int d = t.trunc();
    const CrownMap t1 = as_map(t);
    const CrownSeries pb = t.p.conj();
    const CrownSeries qb = t.q.conj();
    const CrownSeries sx = compose_rotated(t1.x.swapped(), 0.5, t.alpha, qb, pb);
    const CrownSeries sy = compose_rotated(t1.y.swapped(), 0.5, t.alpha, qb, pb);
    ReversibleMap s;
    s.alpha = t.alpha;
    s.f = sx - multiply_product_series(eia(t.alpha, 1.0, d / 2), CrownSeries::xi(d));
    s.g = sy - multiply_product_series(eia(t.alpha, -1.0, d / 2), CrownSeries::eta(d));
    return s;
}

CrownSeries skew_term(const InvolutionPair& t) {
    const int d = t.trunc();
    return multiply_product_series(eia(t.alpha, 0.5, d / 2), multiply(CrownSeries::eta(d), t.q)) +
           multiply_product_series(eia(t.alpha, -0.5, d / 2), multiply(CrownSeries::xi(d), t.p));
}

CrownSeries skew_operator_L(const CoeffSeries& h, const CrownSeries& p1, const CrownSeries& p2) {
    require(p1.trunc() == p2.trunc(), ErrorKind::InvalidArgument, "skew_operator_L: truncations differ");
    const int d = p1.trunc();
    return multiply_product_series(eia(h, -1.0, d / 2), multiply(CrownSeries::xi(d), p1)) +
           multiply_product_series(eia(h, 1.0, d / 2), multiply(CrownSeries::eta(d), p2));
}

InvolutionPair conjugated_involution(const CoeffSeries& alpha, const CrownMap& psi, double inverse_tol,
                                     int max_inverse_iters) {
    const int d = psi.x.trunc();
    const InvolutionPair lin = make_involution(alpha, CrownSeries(d), CrownSeries(d));
    InverseOptions opts;
    opts.tol = inverse_tol;
    opts.max_iters = max_inverse_iters;
    const CrownMap psi_inv = invert_map(psi, opts);
    const CrownMap tau = compose(psi_inv, compose(as_map(lin), psi));
    const CrownMap l = as_map(lin);
    return make_involution(lin.alpha, tau.x - l.x, tau.y - l.y, lin.s_order);
}

CrownMap product_preserving_map(const CrownSeries& h) {
    require(h.coeff(0, 0) == cplx{}, ErrorKind::InvalidArgument, "product_preserving_map: h(0) must vanish");
    const int d = h.trunc();
    return {multiply(exp_series(h, 1.0), CrownSeries::xi(d)), multiply(exp_series(h, -1.0), CrownSeries::eta(d))};
}

const ResidualEntry& StructuralReport::get(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw KamError(ErrorKind::InvalidArgument, "structural report has no entry " + name);
}

double measured_eps(const InvolutionPair& t, const NormSet& ns) {
    return 10.0 * std::max(ns.norm(t.p), ns.norm(t.q));
}

double involution_residual(const InvolutionPair& t, const NormSet& ns) {
    const CrownMap m = as_map(t);
    return ns.norm(compose(m, m) - identity_map(t.trunc()));
}

double reversibility_residual(const ReversibleMap& s, const NormSet& ns) {
    const CrownMap m = as_map(s);
    return ns.norm(compose(conj(m), m) - identity_map(s.f.trunc()));
}

StructuralReport structural_residuals(const InvolutionPair& t, const NormSet& ns, double eps, double structural_tol) {
    const int d = t.trunc();
    const int dz = d / 2;
    const double r = ns.radius;
    StructuralReport rep;
    rep.eps = eps > 0.0 ? eps : measured_eps(t, ns);
    const double e = rep.eps;
    const double e3116 = std::pow(e, 31.0 / 16.0);
    const double e6132 = std::pow(e, 61.0 / 32.0);

    const ReversibleMap s = compose_sigma(t);
    const InvolutionPair t2 = tau2_of(t);
    rep.entries.push_back({"involution", involution_residual(t, ns), structural_tol});
    rep.entries.push_back({"tau2_involution", involution_residual(t2, ns), structural_tol});
    rep.entries.push_back({"reversibility", reversibility_residual(s, ns), structural_tol});
    const CrownSeries skew = skew_term(t);
    rep.entries.push_back({"skew", ns.norm(skew), 0.0, false});
    rep.entries.push_back({"cor_fg", std::max(ns.norm(s.f), ns.norm(s.g)), e / 4.0});

    const CoeffSeries ap = t.alpha.derivative() * (kI * 0.5);
    const CoeffSeries eh = eia(t.alpha, 0.5, dz), emh = eia(t.alpha, -0.5, dz);
    const CoeffSeries e1 = eia(t.alpha, 1.0, dz), em1 = eia(t.alpha, -1.0, dz);
    const CrownSeries xi = CrownSeries::xi(d), eta = CrownSeries::eta(d);
    const CrownSeries pb = t.p.conj(), qb = t.q.conj();

    // first-order expansions of f and g
    const CrownSeries skew_bar = multiply_product_series(emh, multiply(eta, qb)) +
                                 multiply_product_series(eh, multiply(xi, pb));
    const CrownSeries c_term = multiply_product_series(ap, skew_bar);
    const CrownSeries f_lin = multiply_product_series(e1, multiply(c_term, xi)) + multiply_product_series(eh, qb) +
                              rotate_swap(t.p, t.alpha, -0.5);
    const CrownSeries g_lin = -multiply_product_series(em1, multiply(c_term, eta)) +
                              multiply_product_series(emh, pb) + rotate_swap(t.q, t.alpha, -0.5);
    rep.entries.push_back({"appro_f", ns.norm(s.f - f_lin), e3116 / 80.0});
    rep.entries.push_back({"appro_g", ns.norm(s.g - g_lin), e3116 / 80.0});

    // first-order consequences of tau_1 o tau_1 = Id
    const CrownSeries a_skew = multiply_product_series(ap, skew);
    const CrownSeries p_res = multiply(a_skew, xi) + multiply_product_series(eh, t.q) + rotate_swap(t.p, t.alpha, 0.5);
    const CrownSeries q_res = -multiply(a_skew, eta) + multiply_product_series(emh, t.p) + rotate_swap(t.q, t.alpha, 0.5);
    rep.entries.push_back({"appro_p_", ns.norm(p_res), e3116 / 80.0});
    rep.entries.push_back({"appro_q_", ns.norm(q_res), e3116 / 80.0});

    // coefficient identities
    auto pc = [&](int l, int j) { return t.p.crown_coeff(l, j); };
    auto qc = [&](int l, int j) { return t.q.crown_coeff(l, j); };
    const CoeffSeries z = CoeffSeries::variable(dz);
    const CoeffSeries res01 = eh * qc(1, 0) + emh * pc(0, 1);
    rep.entries.push_back({"pq_0110_", ns.norm(z * res01), r * e3116 / 80.0});

    auto worst = [&](const std::string& name, auto&& expr) {
        ResidualEntry best{name, 0.0, e3116 / 40.0};
        double ratio = -1.0;
        for (int l = 1; l < d; ++l) {
            const double m = ns.norm(expr(l));
            const double b = e3116 / (40.0 * std::pow(r, l - 1));
            if (m / b > ratio) {
                ratio = m / b;
                best = {name, m, b};
            }
        }
        rep.entries.push_back(best);
    };
    worst("pq_l+-1", [&](int l) {
        return z * (eh * qc(l + 1, 0) + eia(t.alpha, -0.5 * (l + 1), dz) * pc(0, l + 1)) + emh * pc(l - 1, 0) +
               eia(t.alpha, -0.5 * (l - 1), dz) * qc(0, l - 1);
    });
    worst("pq_j+-1", [&](int j) {
        return z * (emh * pc(0, j + 1) + eia(t.alpha, 0.5 * (j + 1), dz) * qc(j + 1, 0)) + eh * qc(0, j - 1) +
               eia(t.alpha, 0.5 * (j - 1), dz) * pc(j - 1, 0);
    });

    const double cb = e6132 / (60.0 * r);
    rep.entries.push_back({"coeff_res_pq", ns.norm(res01), cb});
    rep.entries.push_back(
        {"coeff_res_f", ns.norm(eh * qc(1, 0).conj() + eh * pc(0, 1) - s.f.crown_coeff(1, 0)), cb});
    rep.entries.push_back(
        {"coeff_res_g", ns.norm(emh * pc(0, 1).conj() + emh * qc(1, 0) - s.g.crown_coeff(0, 1)), cb});
    return rep;
}

}  // namespace kam
