#include "kam/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <numbers>
#include <sstream>

namespace kam {

namespace {

constexpr cplx kI{0.0, 1.0};

// ---- config parsing -------------------------------------------------------

[[noreturn]] void config_error(const std::string& path, const std::string& msg) {
    throw KamError(ErrorKind::Config, "config" + path + ": " + msg);
}

const json* field(const json& j, const std::string& path, const char* key) {
    if (!j.is_object()) config_error(path, "expected an object");
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double get_number(const json& v, const std::string& path) {
    if (!v.is_number()) config_error(path, "expected a number");
    return v.get<double>();
}

int get_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) config_error(path, "expected an integer");
    return v.get<int>();
}

template <class T, class F>
void optional_field(const json& j, const std::string& path, const char* key, T& out, F&& conv) {
    if (const json* v = field(j, path, key)) out = conv(*v, path + "." + key);
}

cplx get_cplx(const json& v, const std::string& path) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return {v[0].get<double>(), v[1].get<double>()};
    config_error(path, "expected a number or a [re, im] pair");
}

std::vector<Term> get_terms(const json& v, const std::string& path) {
    if (!v.is_array()) config_error(path, "expected a list of [m, n, re] or [m, n, re, im] terms");
    std::vector<Term> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        const json& t = v[i];
        if (!t.is_array() || (t.size() != 3 && t.size() != 4)) config_error(p, "expected [m, n, re] or [m, n, re, im]");
        Term term;
        term.m = get_int(t[0], p + "[0]");
        term.n = get_int(t[1], p + "[1]");
        if (term.m < 0 || term.n < 0) config_error(p, "exponents must be nonnegative");
        const double re = get_number(t[2], p + "[2]");
        const double im = t.size() == 4 ? get_number(t[3], p + "[3]") : 0.0;
        term.value = {re, im};
        out.push_back(term);
    }
    return out;
}

json terms_to_json(const std::vector<Term>& terms) {
    json a = json::array();
    for (const auto& t : terms) {
        if (t.value.imag() == 0.0)
            a.push_back({t.m, t.n, t.value.real()});
        else
            a.push_back({t.m, t.n, t.value.real(), t.value.imag()});
    }
    return a;
}

// ---- small helpers --------------------------------------------------------

double sup_over(const std::vector<double>& grid, const std::function<double(double)>& f) {
    double m = 0.0;
    for (double w : grid) m = std::max(m, f(w));
    return m;
}

std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json num(double x) {
    if (std::isfinite(x)) return x;
    return std::isnan(x) ? json("nan") : json(x > 0 ? "inf" : "-inf");
}

double map_norm(const CrownMap& m, const std::vector<double>& grid, double beta, double r, int samples) {
    return map_norm_over(m, grid, beta, r, samples);
}

bool is_zero(const CrownSeries& f) { return f.max_abs() == 0.0; }

}  // namespace

// ---- config ---------------------------------------------------------------

RunConfig config_from_json(const json& j) {
    RunConfig c;
    const std::string root;
    if (!j.is_object()) config_error(root, "expected an object at top level");
    optional_field(j, root, "name", c.name, [](const json& v, const std::string& p) {
        if (!v.is_string()) config_error(p, "expected a string");
        return v.get<std::string>();
    });
    optional_field(j, root, "mode", c.mode, [](const json& v, const std::string& p) {
        if (!v.is_string()) config_error(p, "expected a string");
        try {
            return mode_from_string(v.get<std::string>());
        } catch (const KamError& e) {
            config_error(p, e.what());
        }
    });
    optional_field(j, root, "degree", c.degree, get_int);
    optional_field(j, root, "normal_form_order", c.normal_form_order, get_int);
    optional_field(j, root, "s_hint", c.s_hint, get_int);
    optional_field(j, root, "max_nu", c.max_nu, get_int);
    optional_field(j, root, "output_dir", c.output_dir, [](const json& v, const std::string& p) {
        if (!v.is_string()) config_error(p, "expected a string");
        return v.get<std::string>();
    });

    const json* inst = field(j, root, "instance");
    if (!inst) config_error(root, "missing field 'instance'");
    const std::string ip = ".instance";
    const json* type = field(*inst, ip, "type");
    if (!type || !type->is_string()) config_error(ip + ".type", "expected \"surface\" or \"pair\"");
    const std::string ty = type->get<std::string>();
    if (ty == "surface") {
        c.is_surface = true;
        const json* g = field(*inst, ip, "gamma");
        if (!g) config_error(ip, "missing field 'gamma'");
        c.gamma = get_number(*g, ip + ".gamma");
        if (!(c.gamma > 0.5)) config_error(ip + ".gamma", "must exceed 1/2");
        optional_field(*inst, ip, "f", c.f, get_terms);
        for (std::size_t i = 0; i < c.f.size(); ++i) {
            if (c.f[i].value.imag() != 0.0)
                config_error(ip + ".f[" + std::to_string(i) + "]", "surface coefficients must be real");
            if (c.f[i].m + c.f[i].n < 3)
                config_error(ip + ".f[" + std::to_string(i) + "]", "surface perturbation must have degree >= 3");
        }
    } else if (ty == "pair") {
        c.is_surface = false;
        const json* a = field(*inst, ip, "alpha");
        if (!a || !a->is_array() || a->empty()) config_error(ip + ".alpha", "expected a nonempty list");
        for (std::size_t i = 0; i < a->size(); ++i) c.alpha.push_back(get_cplx((*a)[i], ip + ".alpha[" + std::to_string(i) + "]"));
        optional_field(*inst, ip, "p", c.p, get_terms);
        optional_field(*inst, ip, "q", c.q, get_terms);
    } else {
        config_error(ip + ".type", "expected \"surface\" or \"pair\", got \"" + ty + "\"");
    }

    if (const json* om = field(j, root, "omega")) {
        optional_field(*om, ".omega", "count", c.omega_count, get_int);
        optional_field(*om, ".omega", "window_fraction", c.window_fraction, get_number);
    }
    optional_field(j, root, "samples", c.samples, get_int);
    if (const json* rs = field(j, root, "radius")) {
        optional_field(*rs, ".radius", "r_start", c.r_start, get_number);
        optional_field(*rs, ".radius", "max_halvings", c.max_halvings, get_int);
    }
    if (const json* cv = field(j, root, "curves")) optional_field(*cv, ".curves", "n_pts", c.curve_points, get_int);
    if (const json* t = field(j, root, "tolerances")) {
        const std::string tp = ".tolerances";
        Tolerances& o = c.tol;
        optional_field(*t, tp, "realness", o.realness, get_number);
        optional_field(*t, tp, "exp_tail", o.exp_tail, get_number);
        optional_field(*t, tp, "inverse", o.inverse, get_number);
        optional_field(*t, tp, "max_inverse_iters", o.max_inverse_iters, get_int);
        optional_field(*t, tp, "structural", o.structural, get_number);
        optional_field(*t, tp, "divisor_floor", o.divisor_floor, get_number);
        optional_field(*t, tp, "degeneracy", o.degeneracy, get_number);
        optional_field(*t, tp, "root_tol", o.root_tol, get_number);
        optional_field(*t, tp, "grid_per_unit", o.grid_per_unit, get_int);
        optional_field(*t, tp, "merge_tol", o.merge_tol, get_number);
        optional_field(*t, tp, "convergence_floor", o.convergence_floor, get_number);
        for (const auto& [k, v] : t->items())
            if (v.is_number() && v.get<double>() <= 0.0) config_error(tp + "." + k, "tolerances must be positive");
    }

    if (c.degree < 2 * (2 * c.normal_form_order + 2))
        config_error(".degree", "must be at least 2(2N+2) = " + std::to_string(2 * (2 * c.normal_form_order + 2)));
    if (c.normal_form_order < 0) config_error(".normal_form_order", "must be >= 0");
    if (c.s_hint < 1) config_error(".s_hint", "must be >= 1");
    if (c.max_nu < 0) config_error(".max_nu", "must be >= 0");
    if (c.omega_count < 1) config_error(".omega.count", "must be >= 1");
    if (!(c.window_fraction > 0.0 && c.window_fraction <= 0.2))
        config_error(".omega.window_fraction", "must lie in (0, 0.2]");
    if (c.samples < 8) config_error(".samples", "must be >= 8");
    if (!(c.r_start > 0.0 && c.r_start <= 0.25)) config_error(".radius.r_start", "must lie in (0, 1/4]");
    if (c.curve_points < 1) config_error(".curves.n_pts", "must be >= 1");
    for (const auto* terms : {&c.f, &c.p, &c.q})
        for (const auto& t : *terms)
            if (t.m + t.n > c.degree) config_error(".instance", "monomial degree exceeds the truncation degree");
    return c;
}

json config_to_json(const RunConfig& c) {
    json j;
    j["name"] = c.name;
    j["mode"] = to_string(c.mode);
    j["degree"] = c.degree;
    j["normal_form_order"] = c.normal_form_order;
    j["s_hint"] = c.s_hint;
    j["max_nu"] = c.max_nu;
    json inst;
    if (c.is_surface) {
        inst["type"] = "surface";
        inst["gamma"] = c.gamma;
        inst["f"] = terms_to_json(c.f);
    } else {
        inst["type"] = "pair";
        json a = json::array();
        for (const auto& x : c.alpha) a.push_back(json::array({x.real(), x.imag()}));
        inst["alpha"] = a;
        inst["p"] = terms_to_json(c.p);
        inst["q"] = terms_to_json(c.q);
    }
    j["instance"] = inst;
    j["omega"] = {{"count", c.omega_count}, {"window_fraction", c.window_fraction}};
    j["samples"] = c.samples;
    j["radius"] = {{"r_start", c.r_start}, {"max_halvings", c.max_halvings}};
    j["curves"] = {{"n_pts", c.curve_points}};
    const Tolerances& t = c.tol;
    j["tolerances"] = {{"realness", t.realness},
                       {"exp_tail", t.exp_tail},
                       {"inverse", t.inverse},
                       {"max_inverse_iters", t.max_inverse_iters},
                       {"structural", t.structural},
                       {"divisor_floor", t.divisor_floor},
                       {"degeneracy", t.degeneracy},
                       {"root_tol", t.root_tol},
                       {"grid_per_unit", t.grid_per_unit},
                       {"merge_tol", t.merge_tol},
                       {"convergence_floor", t.convergence_floor}};
    j["output_dir"] = c.output_dir;
    return j;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw KamError(ErrorKind::Config, "config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw KamError(ErrorKind::Config, std::string("config: malformed JSON: ") + e.what());
    }
    return config_from_json(j);
}

std::vector<std::string> fixture_names() { return {"linear", "cubic"}; }

RunConfig fixture_config(const std::string& name) {
    // gamma puts lambda/(2 pi) near (3 - sqrt 5)/2, far from low-order resonances
    json j = {{"name", name},
              {"mode", "practical"},
              {"normal_form_order", 1},
              {"s_hint", 1},
              {"max_nu", 3},
              {"omega", {{"count", 9}, {"window_fraction", 0.2}}}};
    if (name == "linear") {
        j["degree"] = 12;
        j["instance"] = {{"type", "surface"}, {"gamma", 1.379884}, {"f", json::array()}};
    } else if (name == "cubic") {
        j["degree"] = 16;
        j["instance"] = {{"type", "surface"},
                         {"gamma", 1.379884},
                         {"f", json::array({{3, 0, 0.1}, {2, 1, 0.05}, {1, 2, 0.05}, {0, 3, 0.1}})}};
    } else {
        throw KamError(ErrorKind::Config, "unknown fixture '" + name + "' (known: linear, cubic)");
    }
    return config_from_json(j);
}

CrownSeries series_from_terms(const std::vector<Term>& terms, int trunc_total) {
    CrownSeries f(trunc_total);
    for (const auto& t : terms) {
        require(t.m + t.n <= trunc_total, ErrorKind::Config, "term degree exceeds the truncation");
        f.at(t.m, t.n) += t.value;
    }
    return f;
}

// ---- preparation ----------------------------------------------------------

Preparation prepare(const RunConfig& cfg) {
    Preparation prep;
    prep.config = cfg;
    const int d = cfg.degree;
    const int dz = d / 2;
    if (cfg.is_surface) {
        const BishopSurface m = make_surface(cfg.gamma, series_from_terms(cfg.f, d), cfg.tol.realness);
        const CrownMap deck = deck_transformation(m);
        prep.deck_residual = deck_residual(m, deck).max_abs();
        prep.diag = diagonalize(m);
        prep.original = prep.diag->pair;
    } else {
        CoeffSeries alpha(dz);
        for (std::size_t k = 0; k < cfg.alpha.size() && static_cast<int>(k) <= dz; ++k)
            alpha[static_cast<int>(k)] = cfg.alpha[k];
        prep.original = make_involution(alpha, series_from_terms(cfg.p, d), series_from_terms(cfg.q, d), cfg.s_hint,
                                        cfg.tol.realness);
    }
    prep.tau1_original = as_map(prep.original);
    {
        const double r = cfg.r_start;
        const NormSet ns{omega_grid(cfg.window_fraction * r * r, cfg.omega_count), r * r / 8.0, r, cfg.samples};
        prep.original_structure = structural_residuals(prep.original, ns, -1.0, cfg.tol.structural);
    }

    // Poincare-Dulac and real form when alpha is constant
    InvolutionPair pair = prep.original;
    CrownMap psi = identity_map(d);
    bool alpha_constant = true;
    for (int k = 1; k <= pair.alpha.trunc(); ++k) alpha_constant = alpha_constant && pair.alpha[k] == cplx{};
    if (alpha_constant && pair.p.order() >= 2 && pair.q.order() >= 2) {
        PoincareDulacResult pd;
        try {
            pd = poincare_dulac(pair, cfg.normal_form_order, cfg.tol.divisor_floor, cfg.tol.inverse);
        } catch (const KamError& e) {
            throw KamError(e.kind(), std::string("prepare[poincare_dulac]: ") + e.what());
        }
        prep.pd_stages = pd.stages;
        prep.c_tilde = pd.c_tilde;
        const RealFormResult rf = realform_scaling(pd.pair, pd.c_tilde, 1e-12);
        pair = rf.pair;
        psi = compose(pd.transform, rf.scaling);
    } else {
        prep.c_tilde = CoeffSeries(dz);
    }
    prep.alpha_check = pair.alpha;

    CoeffSeries twist = pair.alpha;
    twist[0] = 0.0;
    prep.nondeg = detect_nondegeneracy(twist, cfg.tol.degeneracy);
    prep.trivial = is_zero(pair.p) && is_zero(pair.q);
    if (prep.nondeg.degenerate) {
        require(prep.trivial, ErrorKind::Domain,
                "prepare[detect_nondegeneracy]: alpha is constant to the truncation order; no twist");
        pair.s_order = cfg.s_hint;
    } else {
        pair = rescale_pair(pair, prep.nondeg.rescale);
        pair.s_order = prep.nondeg.s;
        const double t = prep.nondeg.rescale;
        psi = compose(psi, linear_map(t, 0.0, 0.0, t, d));
    }

    RadiusOptions ro;
    ro.mode = cfg.mode;
    ro.N = cfg.normal_form_order;
    ro.window_fraction = cfg.window_fraction;
    ro.omega_count = cfg.omega_count;
    ro.samples = cfg.samples;
    ro.max_halvings = cfg.max_halvings;
    ro.r_start = cfg.r_start;
    if (prep.trivial) {
        prep.radius.r_star = cfg.r_start;
        prep.radius.branch = Branch::Case1;
        prep.radius.trials.push_back({cfg.r_start, 0.0, false, true, "vanishing perturbation"});
    } else {
        try {
            prep.radius = radius_search(pair, ro);
        } catch (const KamError& e) {
            throw KamError(e.kind(), std::string("prepare[radius_search]: ") + e.what());
        }
    }
    prep.psi_pre_case2 = psi;

    if (prep.radius.branch == Branch::Case2) {
        const double r = prep.radius.r_star;
        const std::vector<double> grid = omega_grid(cfg.window_fraction * r * r, cfg.omega_count);
        const double beta = r * r / 8.0;
        const double eps = measured_eps(pair, NormSet{grid, beta, r, cfg.samples});
        try {
            const StepGeometry g =
                make_geometry(eps, pair.s_order, r, 0.75 * r, beta, grid, pair.alpha, d, cfg.mode, cfg.samples);
            StepResult st = main_step(pair, g, cfg.tol.inverse, cfg.tol.max_inverse_iters);
            const int s = pair.s_order;
            pair = st.pair;
            pair.s_order = s;
            psi = compose(psi, st.psi);
            prep.case2_step = st.report;
        } catch (const KamError& e) {
            throw KamError(e.kind(), std::string("prepare[case2_step]: ") + e.what());
        }
    }
    prep.psi_check = psi;
    const double r0 = prep.radius.branch == Branch::Case2 ? 0.75 * prep.radius.r_star : prep.radius.r_star;
    const std::vector<double> grid = omega_grid(cfg.window_fraction * r0 * r0, cfg.omega_count);
    const double lam = pair.lambda();
    prep.alpha0_lambda = sup_over(grid, [&](double w) { return std::abs(pair.alpha.eval(w).real() - lam); });
    prep.prepared = pair;
    prep.r0 = r0;
    return prep;
}


// ---- iteration ------------------------------------------------------------

std::vector<double> KamState::grid() const {
    std::vector<double> g;
    for (double w : samples)
        if (O.contains(w)) g.push_back(w);
    return g;
}

KamState initial_state(const Preparation& prep) {
    const RunConfig& cfg = prep.config;
    KamState st;
    st.r0 = prep.r0;
    st.r = prep.r0;
    st.window = cfg.window_fraction * st.r0 * st.r0;
    st.O = IntervalSet::interval(-st.window, st.window);
    st.samples = omega_grid(st.window, cfg.omega_count);
    st.pair = prep.prepared;
    st.composite = identity_map(cfg.degree);
    const int s = st.pair.s_order;
    const double cap = st.r0 * st.r0 / 8.0;
    if (cfg.mode == Mode::Rigorous) {
        const double eps = measured_eps(st.pair, NormSet{st.samples, cap, st.r0, cfg.samples});
        st.beta = eps > 0.0 ? std::pow(eps, 1.0 / (40.0 * s)) : cap;
    } else {
        st.beta = cap;
    }
    return st;
}

namespace {

// Pyartli bound summed over the harmonics n <= n_max, each with q = s and the
// lower bound n min|alpha^{(s)}| on the s-th derivative of n alpha - 2 pi k.
double pyartli_total(const CoeffSeries& alpha, const std::vector<double>& grid, int s, int n_max, double delta,
                     double window) {
    if (grid.empty() || delta >= 2.0) return std::numeric_limits<double>::infinity();
    CoeffSeries ds = alpha;
    for (int k = 0; k < s; ++k) ds = ds.derivative();
    double m_s = std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double w : grid) {
        m_s = std::min(m_s, std::abs(ds.eval(w).real()));
        const double a = alpha.eval(w).real();
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    for (double w : {-window, window}) {
        const double a = alpha.eval(w).real();
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    if (m_s == 0.0) return std::numeric_limits<double>::infinity();
    const double theta = 2.0 * std::asin(delta / 2.0);
    const double two_pi = 2.0 * std::numbers::pi;
    double total = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        const double k_lo = std::ceil((n * lo - theta) / two_pi), k_hi = std::floor((n * hi + theta) / two_pi);
        const double count = std::max(0.0, k_hi - k_lo + 1.0);
        total += count * pyartli_bound(s, n * m_s, theta);
    }
    return total;
}

}  // namespace

void iterate(KamState& st, const Preparation& prep, int max_nu) {
    const RunConfig& cfg = prep.config;
    const int d = cfg.degree;
    const int s = st.pair.s_order;
    SieveOptions so;
    so.grid_per_unit = cfg.tol.grid_per_unit;
    so.root_tol = cfg.tol.root_tol;
    so.merge_tol = cfg.tol.merge_tol;
    const IntervalSet window = IntervalSet::interval(-st.window, st.window);

    auto measure = [&](const std::vector<double>& grid) {
        const NormSet ns{grid, st.beta, st.r, cfg.samples};
        return std::pair{measured_eps(st.pair, ns), ns.norm(skew_term(st.pair))};
    };

    while (true) {
        const std::vector<double> grid = st.grid();
        if (grid.empty()) {
            st.status = "empty-parameter-set";
            st.failure = "no sampled omega survives the sieve";
            return;
        }
        const auto [eps, skew] = measure(grid);
        st.eps_measured.push_back(eps);
        st.skew_measured.push_back(skew);
        if (eps == 0.0) {
            st.status = "unperturbed";
            return;
        }
        if (eps <= cfg.tol.convergence_floor) {
            st.status = "converged-to-truncation";
            return;
        }
        if (st.nu >= max_nu) {
            st.status = "max-nu-reached";
            return;
        }
        const double r_plus = st.r - st.r0 / std::pow(2.0, st.nu + 2);
        StepGeometry geom;
        try {
            geom = make_geometry(eps, s, st.r, r_plus, st.beta, grid, st.pair.alpha, d, cfg.mode, cfg.samples);
        } catch (const KamError& e) {
            st.status = "step-failed";
            st.failure = std::string("iterate[make_geometry]: ") + e.what();
            return;
        }

        // sieve: O_{nu+1} from O_nu
        SieveRecord rec;
        rec.nu = st.nu;
        rec.delta = cfg.mode == Mode::Rigorous ? std::pow(eps, 1.0 / (64.0 * s)) : geom.delta;
        rec.K = cfg.mode == Mode::Rigorous ? geom.K : static_cast<double>(geom.K_index);
        const ExcisionResult ex = excise_resonances(st.O, st.pair.alpha, rec.K, rec.delta, so);
        rec.measure = measure_excluded(st.O, ex.kept, window, eps, s);
        rec.surviving_measure = ex.kept.intersect(window).measure();
        rec.excluded_measure = rec.measure.excluded;
        const int n_max = static_cast<int>(std::floor(rec.K)) + 1;
        rec.pyartli = pyartli_total(st.pair.alpha, grid, s, n_max, rec.delta, st.window);
        for (double w : grid) {
            if (ex.kept.contains(w)) continue;
            ExcludedOmega e{w, 0, std::numeric_limits<double>::infinity()};
            const double a = st.pair.alpha.eval(w).real();
            for (int n = 1; n <= n_max; ++n) {
                const double dv = std::abs(std::exp(kI * (n * a)) - 1.0);
                if (dv < e.divisor) e = {w, n, dv};
            }
            rec.excluded_samples.push_back(e);
        }
        st.sieve.push_back(rec);
        st.O = ex.kept;
        const std::vector<double> grid_next = st.grid();
        if (grid_next.empty()) {
            st.status = "empty-parameter-set";
            st.failure = "the sieve removed every sampled omega";
            return;
        }
        if (grid_next.size() != grid.size())
            geom = make_geometry(eps, s, st.r, r_plus, st.beta, grid_next, st.pair.alpha, d, cfg.mode, cfg.samples);

        StepResult res;
        try {
            res = main_step(st.pair, geom, cfg.tol.inverse, cfg.tol.max_inverse_iters);
        } catch (const KamError& e) {
            st.status = "step-failed";
            st.failure = e.what();
            return;
        }
        res.report.nu = st.nu;
        res.pair.s_order = s;
        const CrownMap next = compose(st.composite, res.psi);
        st.chain_deltas.push_back(
            map_norm(next - st.composite, grid_next, geom.beta_plus, geom.r_plus, cfg.samples));
        st.composite = next;
        st.involution_residuals.push_back(
            involution_residual(res.pair, NormSet{grid_next, geom.beta_plus, geom.r_plus, cfg.samples}));
        st.chain.push_back(res.psi);
        st.history.push_back(res.report);
        st.geometries.push_back(geom);
        st.pair = res.pair;
        st.r = r_plus;
        st.beta = cfg.mode == Mode::Rigorous ? std::pow(std::pow(eps, 1.25), 1.0 / (40.0 * s)) : geom.beta_plus;
        ++st.nu;
    }
}

// ---- curves ---------------------------------------------------------------

std::pair<cplx, cplx> eval_chain(const KamState& state, const Preparation& prep, cplx x, cplx y) {
    std::pair<cplx, cplx> pt{x, y};
    for (auto it = state.chain.rbegin(); it != state.chain.rend(); ++it) pt = eval(*it, pt.first, pt.second);
    return eval(prep.psi_check, pt.first, pt.second);
}

std::pair<cplx, cplx> eval_original_sigma(const Preparation& prep, cplx x, cplx y) {
    const auto [ux, uy] = eval(prep.tau1_original, std::conj(x), std::conj(y));
    return eval(prep.tau1_original, std::conj(ux), std::conj(uy));
}

CurveResult extract_curve(const KamState& state, const Preparation& prep, double omega, int n_pts) {
    require(state.O.contains(omega), ErrorKind::Domain, "extract_curve: omega " + fmt(omega) + " was excluded");
    require(omega != 0.0, ErrorKind::Domain, "extract_curve: omega must be nonzero");
    CurveResult cr;
    cr.omega = omega;
    cr.radius = state.r;
    require(std::abs(omega) < cr.radius * cr.radius, ErrorKind::Domain, "extract_curve: |omega| >= R^2");
    cr.mu_omega = state.pair.alpha.eval(omega).real();
    const double lam = state.pair.lambda();
    cr.mu_in_window = std::abs(cr.mu_omega - lam) < std::numbers::pi / 4.0;
    const cplx rot = std::exp(kI * cr.mu_omega);
    const double root = std::sqrt(std::abs(omega));
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int k = 0; k < n_pts; ++k) {
        const double u = -0.8 + 1.6 * (k + 0.5) / n_pts;
        const double mod = root * std::pow(cr.radius / root, u);
        const double frac = k * golden - std::floor(k * golden);
        CurvePoint pt;
        pt.xi = std::polar(mod, 2.0 * std::numbers::pi * frac);
        pt.eta = omega / pt.xi;
        const auto img = eval_chain(state, prep, pt.xi, pt.eta);
        pt.x = img.first;
        pt.y = img.second;
        const auto lhs = eval_original_sigma(prep, img.first, img.second);
        const auto rhs = eval_chain(state, prep, rot * pt.xi, pt.eta / rot);
        pt.residual = std::max(std::abs(lhs.first - rhs.first), std::abs(lhs.second - rhs.second));
        cr.conjugacy_residual = std::max(cr.conjugacy_residual, pt.residual);
        const auto cimg = eval_chain(state, prep, std::conj(pt.xi), std::conj(pt.eta));
        cr.equivariance_residual = std::max(
            cr.equivariance_residual,
            std::max(std::abs(cimg.first - std::conj(img.first)), std::abs(cimg.second - std::conj(img.second))));
        cr.points.push_back(pt);
    }
    // geometric tail of |Psi_{nu+1} - Psi_nu| from the last two measured increments
    const auto& dl = state.chain_deltas;
    if (dl.size() >= 2 && dl.back() < dl[dl.size() - 2]) {
        const double ratio = dl.back() / dl[dl.size() - 2];
        cr.chain_tail = dl.back() * ratio / (1.0 - ratio);
    } else if (!dl.empty()) {
        cr.chain_tail = dl.back();
    }
    return cr;
}

std::vector<CurveResult> extract_curves(const KamState& state, const Preparation& prep, int n_pts) {
    std::vector<double> omegas = state.grid();
    std::vector<std::future<CurveResult>> jobs;
    for (double w : omegas)
        jobs.push_back(std::async(std::launch::async, [&, w] { return extract_curve(state, prep, w, n_pts); }));
    std::vector<CurveResult> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

SmoothnessTable smoothness_diagnostic(const std::vector<CurveResult>& results) {
    require(results.size() >= 2, ErrorKind::InvalidArgument, "smoothness_diagnostic: need at least two curves");
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : results) pts.emplace_back(r.omega, r.mu_omega);
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        require(pts[i].first != pts[i + 1].first, ErrorKind::InvalidArgument, "smoothness_diagnostic: duplicate omega");
    SmoothnessTable t;
    for (const auto& [w, m] : pts) {
        t.omegas.push_back(w);
        t.mu.push_back(m);
    }
    const std::size_t orders = std::min<std::size_t>(3, pts.size() - 1);
    std::vector<double> prev = t.mu;
    for (std::size_t k = 1; k <= orders; ++k) {
        std::vector<double> cur;
        for (std::size_t i = 0; i + k < t.omegas.size(); ++i)
            cur.push_back((prev[i + 1] - prev[i]) / (t.omegas[i + k] - t.omegas[i]));
        t.differences.push_back(cur);
        prev = cur;
    }
    for (double v : t.differences.front()) t.lipschitz = std::max(t.lipschitz, std::abs(v));
    return t;
}

RunOutput run_all(const RunConfig& cfg, bool with_curves) {
    RunOutput out;
    out.prep = prepare(cfg);
    out.state = initial_state(out.prep);
    iterate(out.state, out.prep, cfg.max_nu);
    if (!out.state.eps_measured.empty() && out.state.eps_measured.front() > 0.0 &&
        out.state.eps_measured.front() < 1.0 && out.prep.r0 * out.prep.r0 < 1.0 / 16.0) {
        out.schedule = build_schedule(out.state.pair.s_order, out.prep.r0, out.state.eps_measured.front(), cfg.max_nu);
        out.have_schedule = true;
    }
    if (with_curves && out.state.status != "step-failed" && out.state.status != "empty-parameter-set") {
        out.curves = extract_curves(out.state, out.prep, cfg.curve_points);
        if (out.curves.size() >= 2) out.smoothness = smoothness_diagnostic(out.curves);
    }
    return out;
}

// ---- serialisation --------------------------------------------------------

json to_json(const CoeffSeries& a) {
    json j = json::array();
    for (const auto& c : a.coeffs()) j.push_back(json::array({c.real(), c.imag()}));
    return j;
}

json to_json(const CrownSeries& f) {
    json j = json::array();
    for (int deg = 0; deg <= f.trunc(); ++deg)
        for (int n = 0; n <= deg; ++n) {
            const cplx c = f.coeff(deg - n, n);
            if (c != cplx{}) j.push_back(json::array({deg - n, n, c.real(), c.imag()}));
        }
    return j;
}

json to_json(const IntervalSet& s) {
    json j = json::array();
    for (const auto& [a, b] : s.pieces()) j.push_back(json::array({a, b}));
    return j;
}

namespace {

json entries_json(const std::vector<ResidualEntry>& es) {
    json j = json::array();
    for (const auto& e : es) {
        json o = {{"name", e.name}, {"measured", num(e.measured)}};
        if (e.has_bound) {
            o["bound"] = num(e.bound);
            o["passed"] = e.passed();
        }
        j.push_back(o);
    }
    return j;
}

json geometry_json(const StepGeometry& g) {
    return {{"eps", num(g.eps)},         {"s", g.s},
            {"r", num(g.r)},             {"r_plus", num(g.r_plus)},
            {"beta", num(g.beta)},       {"beta_plus", num(g.beta_plus)},
            {"beta_tilde", num(g.beta_tilde)}, {"K", num(g.K)}, {"K_formula", num(g.K_formula)},
            {"K_index", g.K_index},      {"delta", num(g.delta)},
            {"omegas", g.omegas}};
}

json doubles(const std::vector<double>& v) {
    json j = json::array();
    for (double x : v) j.push_back(num(x));
    return j;
}

}  // namespace

json to_json(const StepReport& r) {
    json j = {{"nu", r.nu},
              {"mode", to_string(r.mode)},
              {"eps", num(r.eps)},
              {"K", num(r.K)},
              {"K_formula", num(r.K_formula)},
              {"K_index", r.K_index},
              {"delta", num(r.delta)},
              {"min_divisor", num(r.min_divisor)},
              {"norm_p", num(r.norm_p)},
              {"norm_q", num(r.norm_q)},
              {"skew", num(r.skew)},
              {"norm_u", num(r.norm_u)},
              {"norm_v", num(r.norm_v)},
              {"norm_p_plus", num(r.norm_p_plus)},
              {"norm_q_plus", num(r.norm_q_plus)},
              {"skew_plus", num(r.skew_plus)},
              {"eps_plus", num(r.eps_plus)},
              {"tail_norm", num(r.tail_norm)},
              {"alpha_derivatives", doubles(r.alpha_derivs)},
              {"bounds", entries_json(r.bounds)},
              {"practical_pq", r.practical_pq},
              {"practical_skew", r.practical_skew}};
    j["bound_constant_note"] =
        "esti_p_+q_+ uses the constant 24 of the step estimate; esti_p_+q_+_18 repeats it with the constant 18 "
        "used when the estimate is instantiated for the preliminary step";
    return j;
}

json report_json(const RunOutput& out) {
    const Preparation& p = out.prep;
    const KamState& st = out.state;
    json j;
    j["mode"] = to_string(p.config.mode);
    j["config"] = config_to_json(p.config);

    json inst;
    inst["lambda"] = p.original.lambda();
    inst["truncation_degree"] = p.config.degree;
    if (p.diag) {
        inst["gamma"] = p.config.gamma;
        inst["deck_residual"] = num(p.deck_residual);
        inst["frame_root"] = json::array({p.diag->frame.root.real(), p.diag->frame.root.imag()});
    }
    inst["structural_residuals"] = entries_json(p.original_structure.entries);
    inst["measured_eps"] = num(p.original_structure.eps);
    j["instance"] = inst;

    json pre;
    json stages = json::array();
    for (const auto& s : p.pd_stages)
        stages.push_back({{"degree", s.degree},
                          {"eliminated", s.eliminated},
                          {"resonant", s.resonant},
                          {"min_divisor", num(s.min_divisor)}});
    pre["poincare_dulac"] = stages;
    pre["c_tilde"] = to_json(p.c_tilde);
    pre["alpha_check"] = to_json(p.alpha_check);
    pre["degenerate"] = p.nondeg.degenerate;
    pre["s"] = st.pair.s_order;
    pre["twist_coefficient"] = num(p.nondeg.coefficient);
    pre["rescale"] = num(p.nondeg.rescale);
    pre["trivial"] = p.trivial;
    pre["alpha0_minus_lambda_sup"] = num(p.alpha0_lambda);
    j["prenormal"] = pre;

    json rad;
    rad["r_star"] = num(p.radius.r_star);
    rad["A"] = num(p.radius.A);
    rad["eps0"] = num(p.radius.eps0);
    rad["skew"] = num(p.radius.skew);
    rad["skew_threshold"] = num(p.radius.skew_threshold);
    rad["branch"] = to_string(p.radius.branch);
    rad["smallness_A"] = p.radius.smallness_A;
    json trials = json::array();
    for (const auto& t : p.radius.trials)
        trials.push_back({{"r", num(t.r)},
                          {"A", num(t.A)},
                          {"smallness_A", t.smallness_A},
                          {"practical_ok", t.practical_ok},
                          {"note", t.note}});
    rad["trials"] = trials;
    if (p.case2_step) rad["case2_step"] = to_json(*p.case2_step);
    rad["psi_check_factorizations"] = {
        {"folded", "Psi-check includes the Case-2 step"},
        {"without_case2_step", to_json(p.psi_pre_case2.x)},
        {"with_case2_step", to_json(p.psi_check.x)}};
    j["radius"] = rad;

    if (out.have_schedule) {
        const Schedule& s = out.schedule;
        j["schedule"] = {{"eps", doubles(s.eps)},
                         {"r", doubles(s.r)},
                         {"beta", doubles(s.beta)},
                         {"beta_tilde", doubles(s.beta_tilde)},
                         {"zeta", doubles(s.zeta)},
                         {"K", doubles(s.K)},
                         {"feasibility_lhs", num(s.feasibility_lhs)},
                         {"rigorous_feasible", s.feasible},
                         {"cube_root_sum", num(s.cube_root_sum)},
                         {"cube_root_ok", s.cube_root_ok}};
    }

    json it;
    it["status"] = st.status;
    it["failure"] = st.failure;
    it["nu"] = st.nu;
    it["r0"] = num(st.r0);
    it["window"] = num(st.window);
    it["eps_measured"] = doubles(st.eps_measured);
    it["skew_measured"] = doubles(st.skew_measured);
    it["chain_deltas"] = doubles(st.chain_deltas);
    it["involution_residuals"] = doubles(st.involution_residuals);
    json steps = json::array();
    for (std::size_t i = 0; i < st.history.size(); ++i) {
        json sj = to_json(st.history[i]);
        sj["geometry"] = geometry_json(st.geometries[i]);
        steps.push_back(sj);
    }
    it["steps"] = steps;
    json sieve = json::array();
    for (const auto& r : st.sieve) {
        json ex = json::array();
        for (const auto& e : r.excluded_samples) ex.push_back({{"omega", e.omega}, {"n", e.n}, {"divisor", num(e.divisor)}});
        sieve.push_back({{"nu", r.nu},
                         {"delta", num(r.delta)},
                         {"K", num(r.K)},
                         {"surviving_measure", num(r.surviving_measure)},
                         {"excluded_measure", num(r.excluded_measure)},
                         {"bound_mes_100", num(r.measure.bound_100)},
                         {"bound_meas_80", num(r.measure.bound_80)},
                         {"pyartli", num(r.pyartli)},
                         {"excluded_samples", ex}});
    }
    it["sieve"] = sieve;
    it["surviving_set"] = to_json(st.O);
    it["final_alpha"] = to_json(st.pair.alpha);
    j["iteration"] = it;

    json curves = json::array();
    for (const auto& c : out.curves)
        curves.push_back({{"omega", c.omega},
                          {"mu_omega", num(c.mu_omega)},
                          {"conjugacy_residual", num(c.conjugacy_residual)},
                          {"equivariance_residual", num(c.equivariance_residual)},
                          {"chain_tail", num(c.chain_tail)},
                          {"radius", num(c.radius)},
                          {"mu_in_window", c.mu_in_window}});
    j["curves"] = curves;
    if (!out.smoothness.omegas.empty()) {
        json diffs = json::array();
        for (const auto& d : out.smoothness.differences) diffs.push_back(doubles(d));
        j["smoothness_diagnostic"] = {{"label", "divided differences of omega -> mu_omega (diagnostic only)"},
                                      {"omegas", out.smoothness.omegas},
                                      {"mu", doubles(out.smoothness.mu)},
                                      {"differences", diffs},
                                      {"lipschitz", num(out.smoothness.lipschitz)}};
    }
    j["verify"] = entries_json(verify_suite(out));
    return j;
}

std::string steps_csv(const KamState& st) {
    std::ostringstream o;
    o << "nu,eps_measured,skew_measured,K,delta,min_divisor,norm_p_plus,norm_q_plus,eps_plus,skew_plus,"
         "esti_p+q+_measured,esti_p+q+_bound,esti_Lp+q+_bound,error_alpha_measured,error_alpha_bound,"
         "practical_pq,practical_skew\n";
    for (const auto& r : st.history) {
        const auto& pq = r.get("esti_p_+q_+");
        const auto& lpq = r.get("esti_Lp_+q_+");
        const auto& ea = r.get("error_alpha");
        o << r.nu << ',' << fmt(r.eps) << ',' << fmt(r.skew) << ',' << fmt(r.K) << ',' << fmt(r.delta) << ','
          << fmt(r.min_divisor) << ',' << fmt(r.norm_p_plus) << ',' << fmt(r.norm_q_plus) << ',' << fmt(r.eps_plus)
          << ',' << fmt(r.skew_plus) << ',' << fmt(pq.measured) << ',' << fmt(pq.bound) << ',' << fmt(lpq.bound)
          << ',' << fmt(ea.measured) << ',' << fmt(ea.bound) << ',' << (r.practical_pq ? 1 : 0) << ','
          << (r.practical_skew ? 1 : 0) << '\n';
    }
    return o.str();
}

std::string sieve_csv(const KamState& st) {
    std::ostringstream o;
    o << "nu,surviving_measure,excluded_measure,bound_measure,bound_pyartli\n";
    for (const auto& r : st.sieve)
        o << r.nu << ',' << fmt(r.surviving_measure) << ',' << fmt(r.excluded_measure) << ','
          << fmt(r.measure.bound_100) << ',' << fmt(r.pyartli) << '\n';
    return o.str();
}

std::string curves_csv(const std::vector<CurveResult>& curves) {
    std::ostringstream o;
    o << "omega,sample,xi_re,xi_im,eta_re,eta_im,x_re,x_im,y_re,y_im,residual\n";
    for (const auto& c : curves)
        for (std::size_t k = 0; k < c.points.size(); ++k) {
            const auto& p = c.points[k];
            o << fmt(c.omega) << ',' << k << ',' << fmt(p.xi.real()) << ',' << fmt(p.xi.imag()) << ','
              << fmt(p.eta.real()) << ',' << fmt(p.eta.imag()) << ',' << fmt(p.x.real()) << ',' << fmt(p.x.imag())
              << ',' << fmt(p.y.real()) << ',' << fmt(p.y.imag()) << ',' << fmt(p.residual) << '\n';
        }
    return o.str();
}

std::string curves_summary_csv(const std::vector<CurveResult>& curves) {
    std::ostringstream o;
    o << "omega,mu_omega,residual,equivariance_residual,chain_tail\n";
    for (const auto& c : curves)
        o << fmt(c.omega) << ',' << fmt(c.mu_omega) << ',' << fmt(c.conjugacy_residual) << ','
          << fmt(c.equivariance_residual) << ',' << fmt(c.chain_tail) << '\n';
    return o.str();
}

std::vector<ResidualEntry> verify_suite(const RunOutput& out) {
    const Preparation& p = out.prep;
    const KamState& st = out.state;
    const double tol = p.config.tol.structural;
    std::vector<ResidualEntry> v;
    if (p.diag) v.push_back({"deck_identity", p.deck_residual, tol});
    for (const char* name : {"involution", "tau2_involution", "reversibility"})
        v.push_back({std::string("original_") + name, p.original_structure.get(name).measured, tol});
    const int need = 2 * p.config.normal_form_order + 2;
    const int ord = std::min(p.prepared.p.order(1e-12), p.prepared.q.order(1e-12));
    v.push_back({"prenormal_order_deficit", static_cast<double>(std::max(0, need - ord)), 0.0});
    double inv = 0.0;
    for (double r : st.involution_residuals) inv = std::max(inv, r);
    v.push_back({"step_involution", inv, tol});
    double imag = 0.0;
    for (const auto& m : st.chain) imag = std::max({imag, m.x.max_imag(), m.y.max_imag()});
    imag = std::max({imag, p.psi_check.x.max_imag(), p.psi_check.y.max_imag()});
    v.push_back({"chain_realness", imag, p.config.tol.realness});
    const bool failed = st.status == "step-failed" || st.status == "empty-parameter-set";
    v.push_back({"iteration_completed", failed ? 1.0 : 0.0, 0.0});
    double conj_res = 0.0, eq = 0.0, mu_off = 0.0;
    for (const auto& c : out.curves) {
        conj_res = std::max(conj_res, c.conjugacy_residual);
        eq = std::max(eq, c.equivariance_residual);
        mu_off = std::max(mu_off, std::abs(c.mu_omega - st.pair.lambda()));
    }
    v.push_back({"curve_conjugacy", conj_res, 1e-7});
    v.push_back({"curve_equivariance", eq, 1e-9});
    v.push_back({"mu_window", mu_off, std::numbers::pi / 4.0});
    return v;
}

void write_outputs(const RunOutput& out, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "plotdata");
    auto write = [&](const fs::path& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw KamError(ErrorKind::Config, "cannot write '" + path.string() + "'");
        f << text;
    };
    write(fs::path(dir) / "run_report.json", report_json(out).dump(2) + "\n");
    write(fs::path(dir) / "steps.csv", steps_csv(out.state));
    write(fs::path(dir) / "sieve.csv", sieve_csv(out.state));
    write(fs::path(dir) / "curves.csv", curves_csv(out.curves));
    write(fs::path(dir) / "curves_summary.csv", curves_summary_csv(out.curves));
    for (std::size_t i = 0; i < out.curves.size(); ++i) {
        const CurveResult& c = out.curves[i];
        std::ostringstream o;
        char name[64];
        std::snprintf(name, sizeof name, "curve_%02zu.csv", i);
        if (out.prep.diag) {
            const PointMap psi = [&](cplx x, cplx y) { return eval_chain(out.state, out.prep, x, y); };
            o << "omega,arg_index,z1_re,z1_im,w1_re,w1_im,z2_re,z2_im,real_branch,realness_residual\n";
            const RunConfig& cfg = out.prep.config;
            const BishopSurface m = make_surface(cfg.gamma, series_from_terms(cfg.f, cfg.degree), cfg.tol.realness);
            for (const auto& h : hyperbola_image(m, psi, c.omega, c.radius, cfg.curve_points))
                o << fmt(h.omega) << ',' << h.arg_index << ',' << fmt(h.z1.real()) << ',' << fmt(h.z1.imag()) << ','
                  << fmt(h.w1.real()) << ',' << fmt(h.w1.imag()) << ',' << fmt(h.z2.real()) << ','
                  << fmt(h.z2.imag()) << ',' << (h.is_real_branch ? 1 : 0) << ',' << fmt(h.realness_residual)
                  << '\n';
        } else {
            o << "omega,sample,x_re,x_im,y_re,y_im\n";
            for (std::size_t k = 0; k < c.points.size(); ++k)
                o << fmt(c.omega) << ',' << k << ',' << fmt(c.points[k].x.real()) << ',' << fmt(c.points[k].x.imag())
                  << ',' << fmt(c.points[k].y.real()) << ',' << fmt(c.points[k].y.imag()) << '\n';
        }
        write(fs::path(dir) / "plotdata" / name, o.str());
    }
}

}  // namespace kam
