#include "kam/kamstep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace kam {

namespace {

constexpr cplx kI{0.0, 1.0};

CoeffSeries eia(const CoeffSeries& alpha, double c, int dz) { return exp(alpha.resized(dz) * (kI * c)); }

// Smallest |a(z)| over the omega grid, sampling the circles |z - omega| = beta.
double min_modulus(const CoeffSeries& a, const std::vector<double>& omegas, double beta, int samples) {
    double m = std::numeric_limits<double>::infinity();
    for (double w : omegas) {
        if (beta == 0.0) {
            m = std::min(m, std::abs(a.eval(w)));
            continue;
        }
        for (int s = 0; s < samples; ++s) {
            const double th = 2.0 * std::numbers::pi * s / samples;
            m = std::min(m, std::abs(a.eval(cplx{w, 0.0} + beta * cplx{std::cos(th), std::sin(th)})));
        }
    }
    return m;
}

CrownSeries project_real(const CrownSeries& f, double tol, const char* what) {
    const double scale = std::max(1.0, f.max_abs());
    require(f.is_real(tol * scale), ErrorKind::Structural,
            std::string(what) + ": realness check failed (max |Im| = " + std::to_string(f.max_imag()) + ")");
    return f.real_projected(tol * scale);
}

}  // namespace

const char* to_string(Mode m) { return m == Mode::Practical ? "practical" : "rigorous"; }

Mode mode_from_string(const std::string& s) {
    if (s == "practical") return Mode::Practical;
    if (s == "rigorous") return Mode::Rigorous;
    throw KamError(ErrorKind::Config, "mode must be 'practical' or 'rigorous', got '" + s + "'");
}

double min_divisor(const CoeffSeries& alpha, const std::vector<double>& omegas, int n_max) {
    double m = std::numeric_limits<double>::infinity();
    for (double w : omegas) {
        const double a = alpha.eval(w).real();
        for (int n = 1; n <= n_max; ++n) m = std::min(m, std::abs(std::exp(kI * (n * a)) - 1.0));
    }
    return m;
}

StepGeometry make_geometry(double eps, int s, double r, double r_plus, double beta, const std::vector<double>& omegas,
                           const CoeffSeries& alpha, int trunc_total, Mode mode, int samples) {
    require(r > r_plus && r_plus > 0.0, ErrorKind::InvalidArgument, "geometry: need r > r_plus > 0");
    require(beta > 0.0, ErrorKind::InvalidArgument, "geometry: need beta > 0");
    StepGeometry g;
    g.eps = eps;
    g.s = s;
    g.r = r;
    g.r_plus = r_plus;
    g.beta = beta;
    g.omegas = omegas;
    g.samples = samples;
    g.mode = mode;
    const double b54 = std::pow(beta, 1.25);
    if (mode == Mode::Rigorous) {
        g.beta_plus = b54;
        g.beta_tilde = 16.0 * b54;
    } else {
        g.beta_tilde = std::min(16.0 * b54, beta / 2.0);
        g.beta_plus = std::min({b54, g.beta_tilde / 2.0, r_plus * r_plus / 8.0});
    }
    const double r7 = g.r_m(7);
    g.K_formula = (eps > 0.0) ? std::abs(std::log(eps)) / std::abs(std::log(r7 / r))
                              : static_cast<double>(trunc_total);
    // crown indices past the truncation degree carry nothing, so practical bounds use the cap
    g.K = (mode == Mode::Rigorous) ? g.K_formula : std::min<double>(g.K_formula, trunc_total);
    g.K_index = std::max(1, static_cast<int>(std::min<double>(std::floor(g.K), trunc_total)));
    const double dmin = min_divisor(alpha, omegas, g.K_index + 1);
    const double base_delta = (eps > 0.0) ? std::pow(eps, 1.0 / (64.0 * s)) : 1.0;
    g.delta = (mode == Mode::Rigorous) ? base_delta : std::min(base_delta, 0.9 * dmin);
    return g;
}

CrownSeries truncate_crown(const CrownSeries& f, int k_index) {
    CrownSeries out(f.trunc());
    for (const auto& e : crown_decompose(f))
        if (e.l <= k_index && e.j <= k_index) out.add_crown_term(e.l, e.j, e.f);
    return out;
}

TruncatedPQ truncate_K(const CrownSeries& p, const CrownSeries& q, const StepGeometry& geom) {
    require(geom.K >= 1.0, ErrorKind::InvalidArgument, "truncate_K: need K >= 1");
    TruncatedPQ out;
    out.p_K = truncate_crown(p, geom.K_index);
    out.q_K = truncate_crown(q, geom.K_index);
    const double r7 = geom.r_m(7);
    out.tail_norm = std::max(crown_norm_over(p - out.p_K, geom.omegas, geom.beta_tilde, r7, geom.samples),
                             crown_norm_over(q - out.q_K, geom.omegas, geom.beta_tilde, r7, geom.samples));
    out.tail_bound = geom.eps * geom.eps / 10.0;
    return out;
}

CohomologicalSolution solve_cohomological(const InvolutionPair& t, const ReversibleMap& sigma,
                                          const StepGeometry& geom, double realness_tol) {
    const int d = t.trunc();
    const int dz = d / 2;
    const int kk = std::min(geom.K_index, d);
    auto e = [&](double c) { return eia(t.alpha, c, dz); };
    CohomologicalSolution sol{CrownSeries(d), CrownSeries(d), std::numeric_limits<double>::infinity()};

    auto term = [&](const CoeffSeries& num, const CoeffSeries& den) {
        const double m = min_modulus(den, geom.omegas, 0.0, geom.samples);
        sol.min_divisor = std::min(sol.min_divisor, m);
        require(m >= geom.delta / 2.0, ErrorKind::SmallDivisor,
                "solve_cohomological: divisor " + std::to_string(m) + " below delta/2 = " +
                    std::to_string(geom.delta / 2.0));
        return num * reciprocal(den) * cplx{0.5, 0.0};
    };

    for (int l = 2; l <= kk; ++l) {
        const CoeffSeries f = sigma.f.crown_coeff(l, 0);
        sol.u.add_crown_term(l, 0, term(f - e(l + 1) * f.conj(), e(l) - e(1)));
    }
    for (int j = 0; j <= kk; ++j) {
        const CoeffSeries f = sigma.f.crown_coeff(0, j);
        sol.u.add_crown_term(0, j, term(f - e(-(j - 1.0)) * f.conj(), e(-j) - e(1)));
    }
    for (int l = 0; l <= kk; ++l) {
        const CoeffSeries g = sigma.g.crown_coeff(l, 0);
        sol.v.add_crown_term(l, 0, term(g - e(l - 1.0) * g.conj(), e(l) - e(-1)));
    }
    for (int j = 2; j <= kk; ++j) {
        const CoeffSeries g = sigma.g.crown_coeff(0, j);
        sol.v.add_crown_term(0, j, term(g - e(-(j + 1.0)) * g.conj(), e(-j) - e(-1)));
    }
    sol.u = project_real(sol.u, realness_tol, "solve_cohomological u");
    sol.v = project_real(sol.v, realness_tol, "solve_cohomological v");
    return sol;
}

CrownMap cohomological_residual(const InvolutionPair& t, const CohomologicalSolution& uv, const StepGeometry& geom) {
    const int d = t.trunc();
    const int dz = d / 2;
    const TruncatedPQ pq = truncate_K(t.p, t.q, geom);
    CrownSeries p01(d), q10(d);
    p01.add_crown_term(0, 1, t.p.crown_coeff(0, 1));
    q10.add_crown_term(1, 0, t.q.crown_coeff(1, 0));
    return {multiply_product_series(eia(t.alpha, 0.5, dz), uv.v) - rotate_swap(uv.u, t.alpha, 0.5) + pq.p_K - p01,
            multiply_product_series(eia(t.alpha, -0.5, dz), uv.u) - rotate_swap(uv.v, t.alpha, 0.5) + pq.q_K - q10};
}

IntermediatePair conjugate_step(const InvolutionPair& t, const CohomologicalSolution& uv, const StepGeometry& geom,
                                double inverse_tol, int max_inverse_iters) {
    const int d = t.trunc();
    const int dz = d / 2;
    const CrownMap u{uv.u, uv.v};
    InverseOptions opts;
    opts.tol = inverse_tol;
    opts.max_iters = max_inverse_iters;
    InverseCheck check;
    if (geom.mode == Mode::Rigorous) {
        check = {geom.omegas, geom.beta_tilde, geom.r_m(7), geom.r_m(6), geom.samples};
        opts.check = &check;
    }
    const InverseResult inv = invert_near_identity(u, opts);
    IntermediatePair out;
    out.alpha = t.alpha;
    out.A = t.p.crown_coeff(0, 1);
    out.phi = identity_map(d) + u;
    out.tau = compose(identity_map(d) + inv.v, compose(as_map(t), out.phi));
    const CoeffSeries lam = eia(t.alpha, 0.5, dz) + out.A;
    out.p_tilde = out.tau.x - multiply_product_series(lam, CrownSeries::eta(d));
    out.q_tilde = out.tau.y - multiply_product_series(reciprocal(lam), CrownSeries::xi(d));
    return out;
}

ThetaResult theta_scaling(const IntermediatePair& inter, const StepGeometry& geom, double realness_tol) {
    const int d = inter.tau.x.trunc();
    const int dz = d / 2;
    const CoeffSeries eh = eia(inter.alpha, 0.5, dz), emh = eia(inter.alpha, -0.5, dz);
    const CoeffSeries A = inter.A.resized(dz);
    const CoeffSeries w = (eh + A) * (emh + A.conj());
    for (double om : geom.omegas) {
        for (int s = 0; s < geom.samples; ++s) {
            const double th = 2.0 * std::numbers::pi * s / geom.samples;
            const cplx val = w.eval(cplx{om, 0.0} + geom.beta_tilde * cplx{std::cos(th), std::sin(th)});
            require(val.real() > 0.0 && std::abs(std::arg(val)) < std::numbers::pi / 2.0, ErrorKind::Domain,
                    "theta_scaling: radicand too close to the branch cut");
        }
    }
    ThetaResult out;
    out.theta = pow(w, 0.25);
    const CoeffSeries theta_inv = pow(w, -0.25);
    const CrownSeries xi = CrownSeries::xi(d), eta = CrownSeries::eta(d);
    out.scaling = {multiply_product_series(out.theta, xi), multiply_product_series(theta_inv, eta)};
    const CrownMap scaling_inv{multiply_product_series(theta_inv, xi), multiply_product_series(out.theta, eta)};
    const CrownMap tau = compose(scaling_inv, compose(inter.tau, out.scaling));
    CoeffSeries da = (emh * A - eh * A.conj()) * (-kI);
    const double tol = realness_tol * std::max(1.0, da.max_abs());
    const CoeffSeries alpha_plus = (inter.alpha.resized(dz) + da).real_projected(tol);
    const CrownSeries p = tau.x - multiply_product_series(eia(alpha_plus, 0.5, dz), eta);
    const CrownSeries q = tau.y - multiply_product_series(eia(alpha_plus, -0.5, dz), xi);
    out.pair = make_involution(alpha_plus, p, q, 1, realness_tol);
    return out;
}

const ResidualEntry& StepReport::get(const std::string& name) const {
    for (const auto& e : bounds)
        if (e.name == name) return e;
    throw KamError(ErrorKind::InvalidArgument, "step report has no entry " + name);
}

StepResult main_step(const InvolutionPair& t, const StepGeometry& geom, double inverse_tol, int max_inverse_iters) {
    const int d = t.trunc();
    const int dz = d / 2;
    const double r7 = geom.r_m(7);
    const NormSet n0{geom.omegas, geom.beta, geom.r, geom.samples};
    const NormSet n7{geom.omegas, geom.beta_tilde, r7, geom.samples};
    const NormSet np{geom.omegas, geom.beta_plus, geom.r_plus, geom.samples};
    const double eps = geom.eps;
    const double e6132 = std::pow(eps, 61.0 / 32.0);

    StepResult res;
    StepReport& rep = res.report;
    rep.mode = geom.mode;
    rep.eps = eps;
    rep.K = geom.K;
    rep.K_formula = geom.K_formula;
    rep.K_index = geom.K_index;
    rep.delta = geom.delta;
    rep.norm_p = n0.norm(t.p);
    rep.norm_q = n0.norm(t.q);
    rep.skew = n0.norm(skew_term(t));
    const double sk = rep.skew;
    const double kd = (geom.K + 1.0) / geom.delta;

    const TruncatedPQ pq = truncate_K(t.p, t.q, geom);
    rep.tail_norm = pq.tail_norm;
    rep.bounds.push_back({"rest_pq", pq.tail_norm, pq.tail_bound});
    rep.bounds.push_back({"delta_hypothesis", 80.0 * std::pow(eps, 1.0 / (60.0 * geom.s)), geom.delta,
                          geom.mode == Mode::Rigorous});

    CohomologicalSolution uv;
    try {
        uv = solve_cohomological(t, compose_sigma(t), geom);
    } catch (const KamError& e) {
        throw KamError(e.kind(), std::string("main_step[solve_cohomological]: ") + e.what());
    }
    rep.min_divisor = uv.min_divisor;
    rep.norm_u = n7.norm(uv.u);
    rep.norm_v = n7.norm(uv.v);
    rep.bounds.push_back({"esti_uv", std::max(rep.norm_u, rep.norm_v), std::pow(eps, 49.0 / 50.0) / 20.0});
    const CrownSeries xi = CrownSeries::xi(d), eta = CrownSeries::eta(d);
    rep.bounds.push_back({"esti_Luv", n7.norm(multiply(eta, uv.u) + multiply(xi, uv.v)),
                          e6132 / 16.0 + 5.0 * kd * sk});
    const CrownMap cr = cohomological_residual(t, uv, geom);
    rep.bounds.push_back({"cohomo1", n7.norm(cr.x), e6132 / 80.0 + 6.0 * kd * sk});
    rep.bounds.push_back({"cohomo2", n7.norm(cr.y), e6132 / 80.0 + 6.0 * kd * sk});
    rep.bounds.push_back({"crossing_cohomo", n7.norm(skew_operator_L(t.alpha * cplx{0.5, 0.0}, cr.x, cr.y)),
                          e6132 / 20.0});

    IntermediatePair inter;
    try {
        inter = conjugate_step(t, uv, geom, inverse_tol, max_inverse_iters);
    } catch (const KamError& e) {
        throw KamError(e.kind(), std::string("main_step[conjugate_step]: ") + e.what());
    }
    rep.bounds.push_back({"esti_pq+", std::max(np.norm(inter.p_tilde), np.norm(inter.q_tilde)),
                          e6132 / 3.0 + 22.0 * kd * sk});
    rep.bounds.push_back({"esti_Lpq+",
                          np.norm(skew_operator_L(t.alpha * cplx{0.5, 0.0}, inter.p_tilde, inter.q_tilde)),
                          e6132 / 2.0});

    ThetaResult th;
    try {
        th = theta_scaling(inter, geom);
    } catch (const KamError& e) {
        throw KamError(e.kind(), std::string("main_step[theta_scaling]: ") + e.what());
    }
    const double norm_a = n7.norm(inter.A);
    const CoeffSeries one = CoeffSeries::constant(1.0, dz);
    rep.bounds.push_back({"lambda_k", std::max(n7.norm(th.theta - one), n7.norm(reciprocal(th.theta) - one)),
                          0.75 * norm_a});

    res.pair = th.pair;
    res.theta = th.theta;
    res.psi = compose(inter.phi, th.scaling);
    rep.norm_p_plus = np.norm(res.pair.p);
    rep.norm_q_plus = np.norm(res.pair.q);
    rep.skew_plus = np.norm(skew_term(res.pair));
    rep.eps_plus = 10.0 * std::max(rep.norm_p_plus, rep.norm_q_plus);
    const double pt = std::max(np.norm(inter.p_tilde), np.norm(inter.q_tilde));
    rep.bounds.push_back(
        {"p_plus_theta", std::max(rep.norm_p_plus, rep.norm_q_plus), (1.0 + 0.75 * norm_a) * pt + norm_a * norm_a});
    rep.bounds.push_back({"crossing_theta_+", rep.skew_plus,
                          np.norm(skew_operator_L(t.alpha * cplx{0.5, 0.0}, inter.p_tilde, inter.q_tilde)) +
                              norm_a * 2.0 * pt + norm_a * norm_a});
    const double pq_plus = std::max(rep.norm_p_plus, rep.norm_q_plus);
    rep.bounds.push_back({"esti_p_+q_+", pq_plus, e6132 / 2.0 + 24.0 * kd * sk});
    rep.bounds.push_back({"esti_p_+q_+_18", pq_plus, e6132 / 2.0 + 18.0 * kd * sk});
    rep.bounds.push_back({"esti_Lp_+q_+", rep.skew_plus, e6132});

    const int kmax = std::min(16 * geom.s, dz);
    CoeffSeries diff = res.pair.alpha.resized(dz) - t.alpha.resized(dz);
    double worst = 0.0, worst_scaled = 0.0, cauchy = 1.0;
    for (int k = 0; k <= kmax; ++k) {
        double sup = 0.0;
        for (double om : geom.omegas) sup = std::max(sup, std::abs(diff.eval(om)));
        rep.alpha_derivs.push_back(sup);
        worst = std::max(worst, sup);
        // beta^k/k! undoes the Cauchy factor of a disk of radius beta
        worst_scaled = std::max(worst_scaled, sup * cauchy);
        cauchy *= geom.beta / (k + 1);
        diff = diff.derivative();
    }
    rep.bounds.push_back({"error_alpha", worst, std::pow(eps, 1.0 / 3.0) / 10.0});
    rep.bounds.push_back({"error_alpha_scaled", worst_scaled, std::pow(eps, 1.0 / 3.0) / 10.0});
    rep.practical_pq = rep.norm_p_plus + rep.norm_q_plus <= std::pow(eps, 1.15);
    rep.practical_skew = rep.skew_plus <= std::pow(eps, 1.4);
    return res;
}

}  // namespace kam
