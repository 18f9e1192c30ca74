#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "kam/error.hpp"

namespace kam {

using cplx = std::complex<double>;

/// Truncated power series in one variable z with coefficients c_0..c_Dz.
///
/// Used for the coefficient functions of the crown decomposition and for the
/// rotation exponent alpha(z), where z stands for the product xi*eta.
class CoeffSeries {
public:
    CoeffSeries() : c_(1, cplx{0.0, 0.0}) {}
    explicit CoeffSeries(int trunc_z);
    explicit CoeffSeries(std::vector<cplx> coeffs);

    static CoeffSeries constant(cplx c, int trunc_z);
    /// The series z.
    static CoeffSeries variable(int trunc_z);

    int trunc() const { return static_cast<int>(c_.size()) - 1; }
    cplx operator[](int k) const { return c_[static_cast<std::size_t>(k)]; }
    cplx& operator[](int k) { return c_[static_cast<std::size_t>(k)]; }
    const std::vector<cplx>& coeffs() const { return c_; }

    cplx eval(cplx z) const;
    CoeffSeries derivative() const;
    /// Coefficientwise complex conjugate, i.e. the series of conj(f(conj z)).
    CoeffSeries conj() const;
    /// Pads with zeros or drops high coefficients so that trunc() == new_trunc.
    CoeffSeries resized(int new_trunc) const;

    double max_abs() const;
    double max_imag() const;
    bool is_real(double tol) const { return max_imag() <= tol; }
    /// Zeroes imaginary parts after checking they are at most `tol`.
    CoeffSeries real_projected(double tol) const;

    CoeffSeries& operator+=(const CoeffSeries& o);
    CoeffSeries& operator-=(const CoeffSeries& o);
    CoeffSeries& operator*=(cplx s);

private:
    std::vector<cplx> c_;
};

CoeffSeries operator+(CoeffSeries a, const CoeffSeries& b);
CoeffSeries operator-(CoeffSeries a, const CoeffSeries& b);
CoeffSeries operator-(const CoeffSeries& a);
CoeffSeries operator*(CoeffSeries a, cplx s);
CoeffSeries operator*(cplx s, CoeffSeries a);
/// Truncated product; the result has the smaller of the two truncations.
CoeffSeries operator*(const CoeffSeries& a, const CoeffSeries& b);
CoeffSeries operator+(CoeffSeries a, cplx s);

/// exp(f) computed exactly in the truncated ring.
CoeffSeries exp(const CoeffSeries& f);
/// Principal logarithm; requires f(0) != 0.
CoeffSeries log(const CoeffSeries& f);
/// Principal power f^a; requires f(0) != 0.
CoeffSeries pow(const CoeffSeries& f, double a);
CoeffSeries reciprocal(const CoeffSeries& f);
/// a(w) by Horner evaluation in the truncated ring, truncated at w.trunc().
CoeffSeries compose(const CoeffSeries& a, const CoeffSeries& w);

/// Max of |f(z)| over `samples` equispaced points of |z - omega| = beta.
/// With beta == 0 this is |f(omega)|.
double disk_sup(const CoeffSeries& f, double omega, double beta, int samples);

/// Truncated power series in (xi, eta) with total degree at most D.
///
/// Storage is a dense triangular array in graded-lexicographic order:
/// degree ascending, and within a degree the xi exponent descending, so
/// a_{m,n} lives at index d(d+1)/2 + n with d = m + n.
class CrownSeries {
public:
    CrownSeries() : CrownSeries(0) {}
    explicit CrownSeries(int trunc_total);

    static CrownSeries constant(cplx c, int trunc_total);
    static CrownSeries xi(int trunc_total);
    static CrownSeries eta(int trunc_total);
    static CrownSeries monomial(int m, int n, cplx c, int trunc_total);
    /// The series a(xi*eta), i.e. c_k placed on a_{k,k}.
    static CrownSeries from_product_series(const CoeffSeries& a, int trunc_total);

    static std::size_t index(int m, int n) {
        const auto d = static_cast<std::size_t>(m + n);
        return d * (d + 1) / 2 + static_cast<std::size_t>(n);
    }
    static std::size_t size_for(int trunc_total) { return index(0, trunc_total) + 1; }

    int trunc() const { return d_; }
    /// Returns 0 for m + n > D.
    cplx coeff(int m, int n) const { return (m + n > d_) ? cplx{} : a_[index(m, n)]; }
    cplx& at(int m, int n) { return a_[index(m, n)]; }
    const std::vector<cplx>& data() const { return a_; }
    std::vector<cplx>& data() { return a_; }

    /// Accumulated 1-norm of coefficients dropped by truncated products.
    double tail() const { return tail_; }
    void set_tail(double t) { tail_ = t; }

    cplx eval(cplx x, cplx y) const;
    /// Coefficientwise conjugate (the series of rho o f o rho).
    CrownSeries conj() const;
    /// f(eta, xi).
    CrownSeries swapped() const;
    /// f(a*xi, b*eta).
    CrownSeries scaled_vars(cplx a, cplx b) const;
    /// Zeroes all coefficients of total degree above d (keeps D).
    CrownSeries truncated(int d) const;
    /// Zeroes all coefficients of total degree below d.
    CrownSeries from_degree(int d) const;
    CrownSeries homogeneous(int d) const;
    /// Same coefficients with a different truncation degree.
    CrownSeries resized(int new_trunc) const;

    /// Smallest total degree carrying a coefficient of modulus > tol, or D+1.
    int order(double tol = 0.0) const;
    double max_abs() const;
    double max_imag() const;
    bool is_real(double tol) const { return max_imag() <= tol; }
    CrownSeries real_projected(double tol) const;
    /// Sum of |a_{m,n}| r^{m+n}.
    double weighted_l1(double r) const;

    /// Crown coefficient f_{l,j}(z) with z^k coefficient a_{k+l,k+j}; needs l*j == 0.
    CoeffSeries crown_coeff(int l, int j) const;
    /// Adds g(xi*eta) xi^l eta^j (l*j == 0); coefficients past D are dropped.
    void add_crown_term(int l, int j, const CoeffSeries& g);

    CrownSeries& operator+=(const CrownSeries& o);
    CrownSeries& operator-=(const CrownSeries& o);
    CrownSeries& operator*=(cplx s);

private:
    int d_ = 0;
    std::vector<cplx> a_;
    double tail_ = 0.0;
};

CrownSeries operator+(CrownSeries a, const CrownSeries& b);
CrownSeries operator-(CrownSeries a, const CrownSeries& b);
CrownSeries operator-(const CrownSeries& a);
CrownSeries operator*(CrownSeries a, cplx s);
CrownSeries operator*(cplx s, CrownSeries a);
CrownSeries operator*(const CrownSeries& f, const CrownSeries& g);

/// Exact truncated product; throws on mismatched truncation degrees.
CrownSeries multiply(const CrownSeries& f, const CrownSeries& g);
/// g(xi*eta) * f, computed without a full bivariate product.
CrownSeries multiply_product_series(const CoeffSeries& g, const CrownSeries& f);

/// One term f_{l,j}(xi*eta) xi^l eta^j of the crown decomposition.
struct CrownEntry {
    int l = 0;
    int j = 0;
    CoeffSeries f;
};

/// Crown decomposition: (0,0), then (l,0) for l = 1..D, then (0,j) for j = 1..D.
std::vector<CrownEntry> crown_decompose(const CrownSeries& f);
CrownSeries crown_assemble(const std::vector<CrownEntry>& entries, int trunc_total);

/// Parameters of the crown {|xi*eta - omega| <= beta, |xi|,|eta| < r}.
struct CrownNormParams {
    double omega = 0.0;
    double beta = 0.0;
    double radius = 1.0;
    int boundary_samples = 64;
};

/// sum_{l*j=0} sup_{|z-omega|=beta} |f_{l,j}(z)| r^{l+j}.
double crown_norm(const CrownSeries& f, const CrownNormParams& np);
/// Max of crown_norm over a grid of omega values (the norm over a parameter set).
double crown_norm_over(const CrownSeries& f, const std::vector<double>& omegas, double beta,
                       double radius, int samples = 64);

/// Crown norm of a function of xi*eta alone, i.e. sup_{|z-omega|=beta} |a(z)|,
/// maximised over the omega grid.
double product_norm_over(const CoeffSeries& a, const std::vector<double>& omegas, double beta,
                         int samples = 64);

/// exp(a f) truncated at D; the nilpotent part is summed until it vanishes or
/// its largest coefficient drops below tail_tol.
CrownSeries exp_series(const CrownSeries& f, cplx a, double tail_tol = 1e-16);

/// h(X, Y) in the truncated ring, by Horner evaluation in X.
CrownSeries substitute(const CrownSeries& h, const CrownSeries& x, const CrownSeries& y);
/// a(W) for a univariate a and a bivariate W.
CrownSeries compose_product(const CoeffSeries& a, const CrownSeries& w);
/// exp(i*b*alpha(xi*eta)) as a bivariate series.
CrownSeries rotation_factor(const CoeffSeries& alpha, double b, int trunc_total);
/// h(e^{i b alpha(xi eta)} xi, e^{-i b alpha(xi eta)} eta), computed exactly on crown coefficients.
CrownSeries rotate(const CrownSeries& h, const CoeffSeries& alpha, double b);
/// h(e^{i b alpha(xi eta)} eta, e^{-i b alpha(xi eta)} xi), computed exactly on crown coefficients.
CrownSeries rotate_swap(const CrownSeries& h, const CoeffSeries& alpha, double b);
/// h(e^{i b alpha(xi eta)} xi + f, e^{-i b alpha(xi eta)} eta + g); requires |b| <= 1.
CrownSeries compose_rotated(const CrownSeries& h, double b, const CoeffSeries& alpha,
                            const CrownSeries& f, const CrownSeries& g);

/// A holomorphic map (xi, eta) -> (x(xi,eta), y(xi,eta)).
struct CrownMap {
    CrownSeries x;
    CrownSeries y;
};

CrownMap identity_map(int trunc_total);
/// outer o inner.
CrownMap compose(const CrownMap& outer, const CrownMap& inner);
CrownMap operator+(const CrownMap& a, const CrownMap& b);
CrownMap operator-(const CrownMap& a, const CrownMap& b);
CrownMap conj(const CrownMap& m);
std::pair<cplx, cplx> eval(const CrownMap& m, cplx x, cplx y);
/// Max of the crown norms of the two components over the omega grid.
double map_norm_over(const CrownMap& m, const std::vector<double>& omegas, double beta, double radius,
                     int samples = 64);

/// Norm data for the smallness precondition of invert_near_identity.
struct InverseCheck {
    std::vector<double> omegas;
    double beta_prime = 0.0;
    double r_prime = 1.0;
    double r_second = 0.5;
    int samples = 64;
};

struct InverseOptions {
    double tol = 1e-14;
    int max_iters = 50;
    /// When set, the smallness precondition is enforced.
    const InverseCheck* check = nullptr;
};

struct InverseResult {
    CrownMap v;
    int iterations = 0;
    double last_change = 0.0;
};

/// V with (Id+U) o (Id+V) = Id up to truncation, by iterating V <- -U o (Id+V).
InverseResult invert_near_identity(const CrownMap& u, const InverseOptions& opts = {});

/// Inverse of a map fixing the origin with invertible linear part.
CrownMap invert_map(const CrownMap& g, const InverseOptions& opts = {});
/// The linear map (xi, eta) -> (m00 xi + m01 eta, m10 xi + m11 eta).
CrownMap linear_map(cplx m00, cplx m01, cplx m10, cplx m11, int trunc_total);

}  // namespace kam
