// Python bindings for the kam library.

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <utility>

#include "kam/runner.hpp"

namespace py = pybind11;
using namespace kam;

namespace {

using Terms = std::map<std::pair<int, int>, cplx>;

CrownSeries series_from_dict(const Terms& terms, int trunc_total) {
    CrownSeries f(trunc_total);
    for (const auto& [mn, c] : terms) {
        require(mn.first >= 0 && mn.second >= 0, ErrorKind::InvalidArgument, "negative exponent");
        if (mn.first + mn.second <= trunc_total) f.at(mn.first, mn.second) += c;
    }
    return f;
}

Terms dict_from_series(const CrownSeries& f) {
    Terms out;
    for (int d = 0; d <= f.trunc(); ++d)
        for (int n = 0; n <= d; ++n)
            if (f.coeff(d - n, n) != cplx{}) out[{d - n, n}] = f.coeff(d - n, n);
    return out;
}

CoeffSeries coeff_from_list(const std::vector<cplx>& c, int trunc_z) {
    CoeffSeries a(trunc_z);
    for (std::size_t k = 0; k < c.size() && static_cast<int>(k) <= trunc_z; ++k) a[static_cast<int>(k)] = c[k];
    return a;
}

InvolutionPair pair_from(const std::vector<cplx>& alpha, const Terms& p, const Terms& q, int degree, int s) {
    return make_involution(coeff_from_list(alpha, degree / 2), series_from_dict(p, degree), series_from_dict(q, degree),
                           s);
}

std::vector<std::pair<double, double>> pieces_of(const IntervalSet& s) { return s.pieces(); }

}  // namespace

PYBIND11_MODULE(kampy, m) {
    m.doc() = "Bindings for the truncated-series KAM iteration";

    py::register_exception<KamError>(m, "KamError", PyExc_RuntimeError);

    m.def(
        "multiply",
        [](const Terms& f, const Terms& g, int degree) {
            return dict_from_series(multiply(series_from_dict(f, degree), series_from_dict(g, degree)));
        },
        py::arg("f"), py::arg("g"), py::arg("degree"), "Truncated product of two series given as {(m, n): c}.");
    m.def(
        "crown_norm",
        [](const Terms& f, int degree, double omega, double beta, double radius, int samples) {
            return crown_norm(series_from_dict(f, degree), CrownNormParams{omega, beta, radius, samples});
        },
        py::arg("f"), py::arg("degree"), py::arg("omega"), py::arg("beta"), py::arg("radius"), py::arg("samples") = 64,
        "Weighted crown norm at one parameter value.");
    m.def(
        "sigma_residual",
        [](const std::vector<cplx>& alpha, const Terms& p, const Terms& q, int degree, cplx x, cplx y) {
            const InvolutionPair t = pair_from(alpha, p, q, degree, 1);
            const auto sig = eval(as_map(compose_sigma(t)), x, y);
            const auto inner = eval(as_map(tau2_of(t)), x, y);
            const auto outer = eval(as_map(t), inner.first, inner.second);
            return std::max(std::abs(sig.first - outer.first), std::abs(sig.second - outer.second));
        },
        py::arg("alpha"), py::arg("p"), py::arg("q"), py::arg("degree"), py::arg("x"), py::arg("y"),
        "Pointwise |sigma - tau_1 o tau_2| for the pair (alpha, p, q).");
    m.def(
        "main_step",
        [](const std::vector<cplx>& alpha, const Terms& p, const Terms& q, int degree, double r, double r_plus,
           double beta, const std::vector<double>& omegas, const std::string& mode) {
            const InvolutionPair t = pair_from(alpha, p, q, degree, 1);
            const double eps = measured_eps(t, NormSet{omegas, beta, r, 64});
            const StepGeometry g =
                make_geometry(eps, 1, r, r_plus, beta, omegas, t.alpha, degree, mode_from_string(mode));
            return to_json(main_step(t, g).report).dump();
        },
        py::arg("alpha"), py::arg("p"), py::arg("q"), py::arg("degree"), py::arg("r"), py::arg("r_plus"),
        py::arg("beta"), py::arg("omegas"), py::arg("mode") = "practical",
        "Runs one iteration step and returns its report as a JSON string.");
    m.def("pyartli_bound", &pyartli_bound, py::arg("q"), py::arg("delta"), py::arg("A"),
          "Measure bound for the sublevel set of a function whose q-th derivative stays above delta.");
    m.def(
        "excise",
        [](const std::vector<std::pair<double, double>>& O, const std::vector<double>& alpha, double K, double delta) {
            std::vector<cplx> a(alpha.begin(), alpha.end());
            const auto res = excise_resonances(IntervalSet(O), coeff_from_list(a, static_cast<int>(a.size()) - 1), K,
                                               delta);
            return py::make_tuple(pieces_of(res.kept), pieces_of(res.removed));
        },
        py::arg("O"), py::arg("alpha"), py::arg("K"), py::arg("delta"),
        "Removes the small-divisor zones from a union of intervals; returns (kept, removed).");
    m.def("fixture_names", &fixture_names);
    m.def(
        "fixture_config", [](const std::string& name) { return config_to_json(fixture_config(name)).dump(); },
        py::arg("name"), "Configuration of a bundled fixture as a JSON string.");
    m.def(
        "run",
        [](const std::string& config_json, bool with_curves) {
            const RunOutput out = [&] {
                py::gil_scoped_release release;
                return run_all(config_from_json(json::parse(config_json)), with_curves);
            }();
            return report_json(out).dump();
        },
        py::arg("config_json"), py::arg("with_curves") = true,
        "Runs the full pipeline on a JSON configuration and returns the report as a JSON string.");
}
