#pragma once

// Test-side reference implementations.  Each one works on plain maps of
// monomials and shares no code with the library it checks.

#include <cmath>
#include <complex>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "kam/series.hpp"

namespace oracle {

using cplx = std::complex<double>;
using Poly = std::map<std::pair<int, int>, cplx>;

inline Poly to_poly(const kam::CrownSeries& f) {
    Poly p;
    for (int d = 0; d <= f.trunc(); ++d)
        for (int n = 0; n <= d; ++n)
            if (f.coeff(d - n, n) != cplx{}) p[{d - n, n}] = f.coeff(d - n, n);
    return p;
}

inline kam::CrownSeries from_poly(const Poly& p, int trunc_total) {
    kam::CrownSeries f(trunc_total);
    for (const auto& [mn, c] : p)
        if (mn.first + mn.second <= trunc_total) f.at(mn.first, mn.second) += c;
    return f;
}

/// Schoolbook product keeping total degree <= trunc_total.
inline Poly multiply(const Poly& a, const Poly& b, int trunc_total) {
    Poly out;
    for (const auto& [ma, ca] : a)
        for (const auto& [mb, cb] : b) {
            const int m = ma.first + mb.first, n = ma.second + mb.second;
            if (m + n <= trunc_total) out[{m, n}] += ca * cb;
        }
    return out;
}

inline cplx eval(const Poly& p, cplx x, cplx y) {
    cplx s{};
    for (const auto& [mn, c] : p) s += c * std::pow(x, mn.first) * std::pow(y, mn.second);
    return s;
}

/// Coefficients of f_{l,j}(z) read straight off the monomials xi^{k+l} eta^{k+j}.
inline std::vector<cplx> crown_coeff(const Poly& p, int l, int j, int trunc_z) {
    std::vector<cplx> c(static_cast<std::size_t>(trunc_z) + 1, cplx{});
    for (const auto& [mn, v] : p) {
        const int k = std::min(mn.first, mn.second);
        if (mn.first - k == l && mn.second - k == j && k <= trunc_z) c[static_cast<std::size_t>(k)] += v;
    }
    return c;
}

inline cplx eval_z(const std::vector<cplx>& c, cplx z) {
    cplx s{};
    for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * z + *it;
    return s;
}

/// sup of |c(z)| on a dense sampling of |z - omega| = beta.
inline double circle_sup(const std::vector<cplx>& c, double omega, double beta, int samples) {
    double m = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double th = 2.0 * M_PI * k / samples;
        m = std::max(m, std::abs(eval_z(c, omega + beta * std::polar(1.0, th))));
    }
    return m;
}

/// Random polynomial with every monomial of total degree in [lo, hi], coefficients in the unit box.
inline kam::CrownSeries random_series(std::mt19937_64& rng, int lo, int hi, int trunc_total, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    kam::CrownSeries f(trunc_total);
    for (int d = lo; d <= hi && d <= trunc_total; ++d)
        for (int n = 0; n <= d; ++n) f.at(d - n, n) = scale * cplx{u(rng), u(rng)};
    return f;
}

/// Lebesgue measure of {x in [a, b] : |f(x)| < delta} on a uniform grid of step h.
template <class F>
double sublevel_measure(const F& f, double a, double b, double delta, double h) {
    const long n = static_cast<long>(std::ceil((b - a) / h));
    const double step = (b - a) / n;
    double m = 0.0;
    for (long i = 0; i < n; ++i)
        if (std::abs(f(a + (i + 0.5) * step)) < delta) m += step;
    return m;
}

}  // namespace oracle
