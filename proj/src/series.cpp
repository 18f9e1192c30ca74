#include "kam/series.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kam {

namespace {

constexpr cplx kI{0.0, 1.0};

void require_same_trunc(const CrownSeries& a, const CrownSeries& b, const char* op) {
    require(a.trunc() == b.trunc(), ErrorKind::InvalidArgument,
            std::string(op) + ": mismatched truncation degrees " + std::to_string(a.trunc()) + " and " +
                std::to_string(b.trunc()));
}

// Degree-graded 1-norms, used for the dropped-mass estimate of a product.
std::vector<double> graded_l1(const CrownSeries& f) {
    const int d = f.trunc();
    std::vector<double> out(static_cast<std::size_t>(d) + 1, 0.0);
    for (int deg = 0; deg <= d; ++deg)
        for (int n = 0; n <= deg; ++n) out[static_cast<std::size_t>(deg)] += std::abs(f.coeff(deg - n, n));
    return out;
}

std::vector<cplx> circle_points(double omega, double beta, int samples) {
    if (beta == 0.0) return {cplx{omega, 0.0}};
    std::vector<cplx> pts(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) {
        const double t = 2.0 * std::numbers::pi * s / samples;
        pts[static_cast<std::size_t>(s)] = cplx{omega, 0.0} + beta * cplx{std::cos(t), std::sin(t)};
    }
    return pts;
}

}  // namespace

// ---------------------------------------------------------------- CoeffSeries

CoeffSeries::CoeffSeries(int trunc_z) {
    require(trunc_z >= 0, ErrorKind::InvalidArgument, "CoeffSeries: negative truncation");
    c_.assign(static_cast<std::size_t>(trunc_z) + 1, cplx{});
}

CoeffSeries::CoeffSeries(std::vector<cplx> coeffs) : c_(std::move(coeffs)) {
    require(!c_.empty(), ErrorKind::InvalidArgument, "CoeffSeries: empty coefficient list");
}

CoeffSeries CoeffSeries::constant(cplx c, int trunc_z) {
    CoeffSeries out(trunc_z);
    out[0] = c;
    return out;
}

CoeffSeries CoeffSeries::variable(int trunc_z) {
    CoeffSeries out(trunc_z);
    if (trunc_z >= 1) out[1] = 1.0;
    return out;
}

cplx CoeffSeries::eval(cplx z) const {
    cplx acc{};
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
    return acc;
}

CoeffSeries CoeffSeries::derivative() const {
    CoeffSeries out(trunc());
    for (int k = 1; k <= trunc(); ++k) out[k - 1] = static_cast<double>(k) * (*this)[k];
    return out;
}

CoeffSeries CoeffSeries::conj() const {
    CoeffSeries out(*this);
    for (auto& c : out.c_) c = std::conj(c);
    return out;
}

CoeffSeries CoeffSeries::resized(int new_trunc) const {
    CoeffSeries out(new_trunc);
    for (int k = 0; k <= std::min(new_trunc, trunc()); ++k) out[k] = (*this)[k];
    return out;
}

double CoeffSeries::max_abs() const {
    double m = 0.0;
    for (const auto& c : c_) m = std::max(m, std::abs(c));
    return m;
}

double CoeffSeries::max_imag() const {
    double m = 0.0;
    for (const auto& c : c_) m = std::max(m, std::abs(c.imag()));
    return m;
}

CoeffSeries CoeffSeries::real_projected(double tol) const {
    require(is_real(tol), ErrorKind::Structural,
            "realness check failed: max |Im c_k| = " + std::to_string(max_imag()));
    CoeffSeries out(*this);
    for (auto& c : out.c_) c = cplx{c.real(), 0.0};
    return out;
}

CoeffSeries& CoeffSeries::operator+=(const CoeffSeries& o) {
    if (o.trunc() < trunc()) c_.resize(o.c_.size());
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
}

CoeffSeries& CoeffSeries::operator-=(const CoeffSeries& o) {
    if (o.trunc() < trunc()) c_.resize(o.c_.size());
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
}

CoeffSeries& CoeffSeries::operator*=(cplx s) {
    for (auto& c : c_) c *= s;
    return *this;
}

CoeffSeries operator+(CoeffSeries a, const CoeffSeries& b) { return a += b; }
CoeffSeries operator-(CoeffSeries a, const CoeffSeries& b) { return a -= b; }
CoeffSeries operator-(const CoeffSeries& a) { return a * cplx{-1.0, 0.0}; }
CoeffSeries operator*(CoeffSeries a, cplx s) { return a *= s; }
CoeffSeries operator*(cplx s, CoeffSeries a) { return a *= s; }

CoeffSeries operator+(CoeffSeries a, cplx s) {
    a[0] += s;
    return a;
}

CoeffSeries operator*(const CoeffSeries& a, const CoeffSeries& b) {
    const int d = std::min(a.trunc(), b.trunc());
    CoeffSeries out(d);
    for (int i = 0; i <= d; ++i) {
        if (a[i] == cplx{}) continue;
        for (int j = 0; i + j <= d; ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

// The recurrences below follow from g' = f' g (exp), f h' = f' (log) and
// f g' = a f' g (power), solved coefficient by coefficient.

CoeffSeries exp(const CoeffSeries& f) {
    const int d = f.trunc();
    CoeffSeries g(d);
    g[0] = std::exp(f[0]);
    for (int n = 1; n <= d; ++n) {
        cplx acc{};
        for (int k = 1; k <= n; ++k) acc += static_cast<double>(k) * f[k] * g[n - k];
        g[n] = acc / static_cast<double>(n);
    }
    return g;
}

CoeffSeries log(const CoeffSeries& f) {
    require(f[0] != cplx{}, ErrorKind::Domain, "log: series vanishes at the origin");
    const int d = f.trunc();
    CoeffSeries h(d);
    h[0] = std::log(f[0]);
    for (int n = 1; n <= d; ++n) {
        cplx acc = static_cast<double>(n) * f[n];
        for (int k = 1; k < n; ++k) acc -= static_cast<double>(k) * h[k] * f[n - k];
        h[n] = acc / (static_cast<double>(n) * f[0]);
    }
    return h;
}

CoeffSeries pow(const CoeffSeries& f, double a) {
    require(f[0] != cplx{}, ErrorKind::Domain, "pow: series vanishes at the origin");
    const int d = f.trunc();
    CoeffSeries g(d);
    g[0] = std::pow(f[0], a);
    for (int n = 1; n <= d; ++n) {
        cplx acc{};
        for (int k = 1; k <= n; ++k) acc += ((a + 1.0) * k - n) * f[k] * g[n - k];
        g[n] = acc / (static_cast<double>(n) * f[0]);
    }
    return g;
}

CoeffSeries reciprocal(const CoeffSeries& f) { return pow(f, -1.0); }

CoeffSeries compose(const CoeffSeries& a, const CoeffSeries& w) {
    CoeffSeries acc(w.trunc());
    for (int k = a.trunc(); k >= 0; --k) {
        acc = acc * w;
        acc[0] += a[k];
    }
    return acc;
}

double disk_sup(const CoeffSeries& f, double omega, double beta, int samples) {
    double m = 0.0;
    for (const cplx& z : circle_points(omega, beta, samples)) m = std::max(m, std::abs(f.eval(z)));
    return m;
}

// ---------------------------------------------------------------- CrownSeries

CrownSeries::CrownSeries(int trunc_total) : d_(trunc_total) {
    require(trunc_total >= 0, ErrorKind::InvalidArgument, "CrownSeries: negative truncation");
    a_.assign(size_for(trunc_total), cplx{});
}

CrownSeries CrownSeries::constant(cplx c, int trunc_total) { return monomial(0, 0, c, trunc_total); }
CrownSeries CrownSeries::xi(int trunc_total) { return monomial(1, 0, 1.0, trunc_total); }
CrownSeries CrownSeries::eta(int trunc_total) { return monomial(0, 1, 1.0, trunc_total); }

CrownSeries CrownSeries::monomial(int m, int n, cplx c, int trunc_total) {
    CrownSeries out(trunc_total);
    if (m + n <= trunc_total) out.at(m, n) = c;
    return out;
}

CrownSeries CrownSeries::from_product_series(const CoeffSeries& a, int trunc_total) {
    CrownSeries out(trunc_total);
    out.add_crown_term(0, 0, a);
    return out;
}

cplx CrownSeries::eval(cplx x, cplx y) const {
    std::vector<cplx> xp(static_cast<std::size_t>(d_) + 1), yp(static_cast<std::size_t>(d_) + 1);
    xp[0] = yp[0] = 1.0;
    for (int k = 1; k <= d_; ++k) {
        xp[static_cast<std::size_t>(k)] = xp[static_cast<std::size_t>(k) - 1] * x;
        yp[static_cast<std::size_t>(k)] = yp[static_cast<std::size_t>(k) - 1] * y;
    }
    cplx acc{};
    for (int deg = d_; deg >= 0; --deg)
        for (int n = 0; n <= deg; ++n)
            acc += a_[index(deg - n, n)] * xp[static_cast<std::size_t>(deg - n)] * yp[static_cast<std::size_t>(n)];
    return acc;
}

CrownSeries CrownSeries::conj() const {
    CrownSeries out(*this);
    for (auto& c : out.a_) c = std::conj(c);
    return out;
}

CrownSeries CrownSeries::swapped() const {
    CrownSeries out(d_);
    for (int deg = 0; deg <= d_; ++deg)
        for (int n = 0; n <= deg; ++n) out.at(n, deg - n) = coeff(deg - n, n);
    out.tail_ = tail_;
    return out;
}

CrownSeries CrownSeries::scaled_vars(cplx a, cplx b) const {
    CrownSeries out(d_);
    std::vector<cplx> ap(static_cast<std::size_t>(d_) + 1), bp(static_cast<std::size_t>(d_) + 1);
    ap[0] = bp[0] = 1.0;
    for (int k = 1; k <= d_; ++k) {
        ap[static_cast<std::size_t>(k)] = ap[static_cast<std::size_t>(k) - 1] * a;
        bp[static_cast<std::size_t>(k)] = bp[static_cast<std::size_t>(k) - 1] * b;
    }
    for (int deg = 0; deg <= d_; ++deg)
        for (int n = 0; n <= deg; ++n)
            out.at(deg - n, n) =
                coeff(deg - n, n) * ap[static_cast<std::size_t>(deg - n)] * bp[static_cast<std::size_t>(n)];
    return out;
}

CrownSeries CrownSeries::truncated(int d) const {
    CrownSeries out(*this);
    for (int deg = std::max(d + 1, 0); deg <= d_; ++deg)
        for (int n = 0; n <= deg; ++n) out.at(deg - n, n) = 0.0;
    return out;
}

CrownSeries CrownSeries::from_degree(int d) const {
    CrownSeries out(*this);
    for (int deg = 0; deg < std::min(d, d_ + 1); ++deg)
        for (int n = 0; n <= deg; ++n) out.at(deg - n, n) = 0.0;
    return out;
}

CrownSeries CrownSeries::homogeneous(int d) const { return truncated(d).from_degree(d); }

CrownSeries CrownSeries::resized(int new_trunc) const {
    CrownSeries out(new_trunc);
    const int d = std::min(new_trunc, d_);
    std::copy(a_.begin(), a_.begin() + static_cast<std::ptrdiff_t>(size_for(d)), out.a_.begin());
    out.tail_ = tail_;
    return out;
}

int CrownSeries::order(double tol) const {
    for (int deg = 0; deg <= d_; ++deg)
        for (int n = 0; n <= deg; ++n)
            if (std::abs(coeff(deg - n, n)) > tol) return deg;
    return d_ + 1;
}

double CrownSeries::max_abs() const {
    double m = 0.0;
    for (const auto& c : a_) m = std::max(m, std::abs(c));
    return m;
}

double CrownSeries::max_imag() const {
    double m = 0.0;
    for (const auto& c : a_) m = std::max(m, std::abs(c.imag()));
    return m;
}

CrownSeries CrownSeries::real_projected(double tol) const {
    require(is_real(tol), ErrorKind::Structural,
            "realness check failed: max |Im a_mn| = " + std::to_string(max_imag()));
    CrownSeries out(*this);
    for (auto& c : out.a_) c = cplx{c.real(), 0.0};
    return out;
}

double CrownSeries::weighted_l1(double r) const {
    double acc = 0.0;
    double rp = 1.0;
    for (int deg = 0; deg <= d_; ++deg, rp *= r)
        for (int n = 0; n <= deg; ++n) acc += std::abs(coeff(deg - n, n)) * rp;
    return acc;
}

CoeffSeries CrownSeries::crown_coeff(int l, int j) const {
    require(l >= 0 && j >= 0 && l * j == 0, ErrorKind::InvalidArgument, "crown_coeff: need l*j == 0");
    CoeffSeries out(d_ / 2);
    for (int k = 0; 2 * k + l + j <= d_; ++k) out[k] = coeff(k + l, k + j);
    return out;
}

void CrownSeries::add_crown_term(int l, int j, const CoeffSeries& g) {
    require(l >= 0 && j >= 0 && l * j == 0, ErrorKind::InvalidArgument, "add_crown_term: need l*j == 0");
    for (int k = 0; k <= g.trunc() && 2 * k + l + j <= d_; ++k) at(k + l, k + j) += g[k];
}

CrownSeries& CrownSeries::operator+=(const CrownSeries& o) {
    require_same_trunc(*this, o, "add");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    tail_ += o.tail_;
    return *this;
}

CrownSeries& CrownSeries::operator-=(const CrownSeries& o) {
    require_same_trunc(*this, o, "subtract");
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    tail_ += o.tail_;
    return *this;
}

CrownSeries& CrownSeries::operator*=(cplx s) {
    for (auto& c : a_) c *= s;
    tail_ *= std::abs(s);
    return *this;
}

CrownSeries operator+(CrownSeries a, const CrownSeries& b) { return a += b; }
CrownSeries operator-(CrownSeries a, const CrownSeries& b) { return a -= b; }
CrownSeries operator-(const CrownSeries& a) { return a * cplx{-1.0, 0.0}; }
CrownSeries operator*(CrownSeries a, cplx s) { return a *= s; }
CrownSeries operator*(cplx s, CrownSeries a) { return a *= s; }
CrownSeries operator*(const CrownSeries& f, const CrownSeries& g) { return multiply(f, g); }

CrownSeries multiply(const CrownSeries& f, const CrownSeries& g) {
    require_same_trunc(f, g, "multiply");
    const int d = f.trunc();
    CrownSeries out(d);
    const auto& fa = f.data();
    const auto& ga = g.data();
    auto& oa = out.data();
    for (int d1 = 0; d1 <= d; ++d1) {
        for (int n1 = 0; n1 <= d1; ++n1) {
            const cplx a = fa[CrownSeries::index(d1 - n1, n1)];
            if (a == cplx{}) continue;
            for (int d2 = 0; d1 + d2 <= d; ++d2) {
                const std::size_t src = CrownSeries::index(d2, 0);
                const std::size_t dst = CrownSeries::index(d1 + d2 - n1, n1);
                for (int n2 = 0; n2 <= d2; ++n2)
                    oa[dst + static_cast<std::size_t>(n2)] += a * ga[src + static_cast<std::size_t>(n2)];
            }
        }
    }
    const auto fl = graded_l1(f);
    const auto gl = graded_l1(g);
    double dropped = 0.0, f1 = 0.0, g1 = 0.0;
    for (int d1 = 0; d1 <= d; ++d1) {
        f1 += fl[static_cast<std::size_t>(d1)];
        g1 += gl[static_cast<std::size_t>(d1)];
        for (int d2 = d - d1 + 1; d2 <= d; ++d2)
            dropped += fl[static_cast<std::size_t>(d1)] * gl[static_cast<std::size_t>(d2)];
    }
    out.set_tail(dropped + f.tail() * g1 + g.tail() * f1 + f.tail() * g.tail());
    return out;
}

CrownSeries multiply_product_series(const CoeffSeries& g, const CrownSeries& f) {
    const int d = f.trunc();
    CrownSeries out(d);
    for (int deg = 0; deg <= d; ++deg) {
        for (int n = 0; n <= deg; ++n) {
            const cplx a = f.coeff(deg - n, n);
            if (a == cplx{}) continue;
            for (int k = 0; k <= g.trunc() && deg + 2 * k <= d; ++k) out.at(deg - n + k, n + k) += g[k] * a;
        }
    }
    out.set_tail(f.tail() * std::max(1.0, g.max_abs()));
    return out;
}

std::vector<CrownEntry> crown_decompose(const CrownSeries& f) {
    const int d = f.trunc();
    std::vector<CrownEntry> out;
    out.reserve(2 * static_cast<std::size_t>(d) + 1);
    out.push_back({0, 0, f.crown_coeff(0, 0)});
    for (int l = 1; l <= d; ++l) out.push_back({l, 0, f.crown_coeff(l, 0)});
    for (int j = 1; j <= d; ++j) out.push_back({0, j, f.crown_coeff(0, j)});
    return out;
}

CrownSeries crown_assemble(const std::vector<CrownEntry>& entries, int trunc_total) {
    CrownSeries out(trunc_total);
    for (const auto& e : entries) out.add_crown_term(e.l, e.j, e.f);
    return out;
}

// ---------------------------------------------------------------- norms

double crown_norm(const CrownSeries& f, const CrownNormParams& np) {
    require(np.radius > 0.0 && np.beta >= 0.0, ErrorKind::InvalidArgument, "crown_norm: bad radius or beta");
    require(np.boundary_samples >= 8, ErrorKind::InvalidArgument, "crown_norm: need at least 8 samples");
    require(std::abs(np.omega) + np.beta < np.radius * np.radius, ErrorKind::Domain,
            "crown_norm: empty crown (|omega| + beta >= r^2)");
    const int d = f.trunc();
    const int dz = d / 2;
    const auto pts = circle_points(np.omega, np.beta, np.boundary_samples);
    // sup per crown entry, laid out as (0,0), (l,0) l=1..d, (0,j) j=1..d
    std::vector<double> sup(2 * static_cast<std::size_t>(d) + 1, 0.0);
    std::vector<cplx> zp(static_cast<std::size_t>(dz) + 1);
    for (const cplx& z : pts) {
        zp[0] = 1.0;
        for (int k = 1; k <= dz; ++k) zp[static_cast<std::size_t>(k)] = zp[static_cast<std::size_t>(k) - 1] * z;
        for (int e = 0; e <= 2 * d; ++e) {
            const int l = (e >= 1 && e <= d) ? e : 0;
            const int j = (e > d) ? e - d : 0;
            cplx acc{};
            for (int k = 0; 2 * k + l + j <= d; ++k) acc += f.coeff(k + l, k + j) * zp[static_cast<std::size_t>(k)];
            sup[static_cast<std::size_t>(e)] = std::max(sup[static_cast<std::size_t>(e)], std::abs(acc));
        }
    }
    double norm = sup[0];
    double rp = 1.0;
    for (int l = 1; l <= d; ++l) {
        rp *= np.radius;
        norm += (sup[static_cast<std::size_t>(l)] + sup[static_cast<std::size_t>(l + d)]) * rp;
    }
    return norm;
}

double crown_norm_over(const CrownSeries& f, const std::vector<double>& omegas, double beta, double radius,
                       int samples) {
    double m = 0.0;
    for (double w : omegas) m = std::max(m, crown_norm(f, {w, beta, radius, samples}));
    return m;
}

double product_norm_over(const CoeffSeries& a, const std::vector<double>& omegas, double beta, int samples) {
    double m = 0.0;
    for (double w : omegas) m = std::max(m, disk_sup(a, w, beta, samples));
    return m;
}

// ---------------------------------------------------------------- exp and composition

CrownSeries exp_series(const CrownSeries& f, cplx a, double tail_tol) {
    const int d = f.trunc();
    const cplx c0 = a * f.coeff(0, 0);
    require(std::abs(c0) < 50.0, ErrorKind::Domain, "exp_series: overflow guard tripped (|a f(0)| >= 50)");
    CrownSeries g = f * a;
    g.at(0, 0) = 0.0;
    CrownSeries sum = CrownSeries::constant(1.0, d);
    CrownSeries term = sum;
    for (int k = 1; k <= d + 1; ++k) {
        term = multiply(term, g) * cplx{1.0 / k, 0.0};
        sum += term;
        if (term.max_abs() < tail_tol) break;
    }
    return sum * std::exp(c0);
}

CrownSeries substitute(const CrownSeries& h, const CrownSeries& x, const CrownSeries& y) {
    require_same_trunc(h, x, "substitute");
    require_same_trunc(h, y, "substitute");
    const int d = h.trunc();
    int top = -1;
    for (int m = d; m >= 0 && top < 0; --m)
        for (int n = 0; m + n <= d; ++n)
            if (h.coeff(m, n) != cplx{}) {
                top = m;
                break;
            }
    if (top < 0) return CrownSeries(d);
    int ymax = 0;
    for (int m = 0; m <= top; ++m)
        for (int n = 0; m + n <= d; ++n)
            if (h.coeff(m, n) != cplx{}) ymax = std::max(ymax, n);
    std::vector<CrownSeries> ypow;
    ypow.reserve(static_cast<std::size_t>(ymax) + 1);
    ypow.push_back(CrownSeries::constant(1.0, d));
    for (int n = 1; n <= ymax; ++n) ypow.push_back(multiply(ypow.back(), y));
    auto inner = [&](int m) {
        CrownSeries acc(d);
        for (int n = 0; m + n <= d; ++n) {
            const cplx c = h.coeff(m, n);
            if (c == cplx{}) continue;
            auto& dst = acc.data();
            const auto& src = ypow[static_cast<std::size_t>(n)].data();
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += c * src[k];
        }
        return acc;
    };
    CrownSeries acc = inner(top);
    for (int m = top - 1; m >= 0; --m) acc = multiply(acc, x) + inner(m);
    return acc;
}

CrownSeries compose_product(const CoeffSeries& a, const CrownSeries& w) {
    const int d = w.trunc();
    CrownSeries acc(d);
    for (int k = a.trunc(); k >= 0; --k) {
        acc = multiply(acc, w);
        acc.at(0, 0) += a[k];
    }
    return acc;
}

CrownSeries rotation_factor(const CoeffSeries& alpha, double b, int trunc_total) {
    return CrownSeries::from_product_series(exp(alpha.resized(trunc_total / 2) * (kI * b)), trunc_total);
}

namespace {

// Applies xi^l -> c_l(z) X^l and eta^j -> c_{-j}(z) Y^j where X, Y are xi or eta.
CrownSeries rotate_impl(const CrownSeries& h, const CoeffSeries& alpha, double b, bool swap) {
    const int d = h.trunc();
    const CoeffSeries a = alpha.resized(d / 2);
    const CoeffSeries ep = exp(a * (kI * b));
    const CoeffSeries em = exp(a * (-kI * b));
    CrownSeries out(d);
    out.add_crown_term(0, 0, h.crown_coeff(0, 0));
    CoeffSeries pp = CoeffSeries::constant(1.0, d / 2), pm = pp;
    for (int l = 1; l <= d; ++l) {
        pp = pp * ep;
        pm = pm * em;
        const CoeffSeries fx = h.crown_coeff(l, 0) * pp;
        const CoeffSeries fy = h.crown_coeff(0, l) * pm;
        out.add_crown_term(swap ? 0 : l, swap ? l : 0, fx);
        out.add_crown_term(swap ? l : 0, swap ? 0 : l, fy);
    }
    out.set_tail(h.tail());
    return out;
}

}  // namespace

CrownSeries rotate(const CrownSeries& h, const CoeffSeries& alpha, double b) {
    return rotate_impl(h, alpha, b, false);
}

CrownSeries rotate_swap(const CrownSeries& h, const CoeffSeries& alpha, double b) {
    return rotate_impl(h, alpha, b, true);
}

CrownSeries compose_rotated(const CrownSeries& h, double b, const CoeffSeries& alpha, const CrownSeries& f,
                            const CrownSeries& g) {
    require(std::abs(b) <= 1.0, ErrorKind::InvalidArgument, "compose_rotated: need -1 <= b <= 1");
    require_same_trunc(h, f, "compose_rotated");
    require_same_trunc(h, g, "compose_rotated");
    if (f.max_abs() == 0.0 && g.max_abs() == 0.0) return rotate(h, alpha, b);
    const int d = h.trunc();
    const CrownSeries x = multiply_product_series(exp(alpha.resized(d / 2) * (kI * b)), CrownSeries::xi(d)) + f;
    const CrownSeries y = multiply_product_series(exp(alpha.resized(d / 2) * (-kI * b)), CrownSeries::eta(d)) + g;
    return substitute(h, x, y);
}

// ---------------------------------------------------------------- maps

CrownMap identity_map(int trunc_total) { return {CrownSeries::xi(trunc_total), CrownSeries::eta(trunc_total)}; }

CrownMap compose(const CrownMap& outer, const CrownMap& inner) {
    return {substitute(outer.x, inner.x, inner.y), substitute(outer.y, inner.x, inner.y)};
}

CrownMap operator+(const CrownMap& a, const CrownMap& b) { return {a.x + b.x, a.y + b.y}; }
CrownMap operator-(const CrownMap& a, const CrownMap& b) { return {a.x - b.x, a.y - b.y}; }
CrownMap conj(const CrownMap& m) { return {m.x.conj(), m.y.conj()}; }

std::pair<cplx, cplx> eval(const CrownMap& m, cplx x, cplx y) { return {m.x.eval(x, y), m.y.eval(x, y)}; }

double map_norm_over(const CrownMap& m, const std::vector<double>& omegas, double beta, double radius,
                     int samples) {
    return std::max(crown_norm_over(m.x, omegas, beta, radius, samples),
                    crown_norm_over(m.y, omegas, beta, radius, samples));
}

InverseResult invert_near_identity(const CrownMap& u, const InverseOptions& opts) {
    require_same_trunc(u.x, u.y, "invert_near_identity");
    if (opts.check != nullptr) {
        const auto& c = *opts.check;
        const double un = map_norm_over(u, c.omegas, c.beta_prime, c.r_prime, c.samples);
        const double lim = c.beta_prime * (c.r_prime - c.r_second) / (30.0 * c.r_prime);
        require(un < lim, ErrorKind::Domain,
                "invert_near_identity: |U| = " + std::to_string(un) + " exceeds " + std::to_string(lim));
    }
    const int d = u.x.trunc();
    InverseResult res;
    res.v = {-u.x, -u.y};
    for (int it = 1; it <= opts.max_iters; ++it) {
        const CrownMap shifted{CrownSeries::xi(d) + res.v.x, CrownSeries::eta(d) + res.v.y};
        CrownMap next{-substitute(u.x, shifted.x, shifted.y), -substitute(u.y, shifted.x, shifted.y)};
        const double change = std::max((next.x - res.v.x).max_abs(), (next.y - res.v.y).max_abs());
        res.v = std::move(next);
        res.iterations = it;
        res.last_change = change;
        if (change < opts.tol) return res;
    }
    throw KamError(ErrorKind::NonConvergence,
                   "invert_near_identity: no convergence after " + std::to_string(opts.max_iters) +
                       " iterations (last change " + std::to_string(res.last_change) + ")");
}

CrownMap linear_map(cplx m00, cplx m01, cplx m10, cplx m11, int trunc_total) {
    const CrownSeries x = CrownSeries::xi(trunc_total), y = CrownSeries::eta(trunc_total);
    return {x * m00 + y * m01, x * m10 + y * m11};
}

CrownMap invert_map(const CrownMap& g, const InverseOptions& opts) {
    const int d = g.x.trunc();
    require(std::abs(g.x.coeff(0, 0)) == 0.0 && std::abs(g.y.coeff(0, 0)) == 0.0, ErrorKind::InvalidArgument,
            "invert_map: map does not fix the origin");
    const cplx m00 = g.x.coeff(1, 0), m01 = g.x.coeff(0, 1), m10 = g.y.coeff(1, 0), m11 = g.y.coeff(0, 1);
    const cplx det = m00 * m11 - m01 * m10;
    require(std::abs(det) > 1e-300, ErrorKind::Domain, "invert_map: singular linear part");
    // g = M o (Id + U), so g^{-1} = (Id + V) o M^{-1} with V the near-identity inverse of U.
    const CrownMap minv = linear_map(m11 / det, -m01 / det, -m10 / det, m00 / det, d);
    const CrownMap u = compose(minv, g) - identity_map(d);
    const InverseResult r = invert_near_identity(u, opts);
    return compose(identity_map(d) + r.v, minv);
}

}  // namespace kam
