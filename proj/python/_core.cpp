// _core.cpp: Python bindings for the spinboson library

#include "spinboson/bath_correlations.hpp"
#include "spinboson/constants_ledger.hpp"
#include "spinboson/errors.hpp"
#include "spinboson/relaxation.hpp"
#include "spinboson/spectral_density.hpp"
#include "spinboson/textio.hpp"
#include "spinboson/truncated_oracle.hpp"

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

namespace py = pybind11;
using namespace sb;

namespace {

FormFactor make_form_factor(const std::string& family, double p, const std::string& cutoff) {
    if (family == "zero") return FormFactor::zero();
    if (family != "power_exp") throw UsageError("form factor family must be power_exp or zero");
    if (cutoff == "exponential") return FormFactor::power_exp(p, Cutoff::exponential);
    if (cutoff == "gaussian") return FormFactor::power_exp(p, Cutoff::gaussian);
    throw UsageError("cutoff must be exponential or gaussian");
}

KernelTable table_for(const BathSpec& s, double t_max) {
    TableOptions o;
    o.t_max = t_max;
    return tabulate_kernels(s, o);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.attr("__version__") = std::string(kToolVersion);

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<DivergentIntegralError>(m, "DivergentIntegralError", PyExc_ArithmeticError);
    py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_RuntimeError);
    py::register_exception<AccuracyError>(m, "AccuracyError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

    py::class_<FormFactor>(m, "FormFactor")
        .def(py::init(&make_form_factor), py::arg("family") = "power_exp", py::arg("p") = 1.0,
             py::arg("cutoff") = "exponential")
        .def("__call__", &FormFactor::operator())
        .def("__repr__", &FormFactor::describe);

    py::class_<BathSpec>(m, "BathSpec")
        .def(py::init([](double beta, double eps, double delta, double q0, const FormFactor& h) {
                 BathSpec s{beta, eps, delta, q0, h};
                 s.validate();
                 return s;
             }),
             py::arg("beta") = 1.0, py::arg("eps") = 0.0, py::arg("delta") = 0.0, py::arg("q0") = 0.0,
             py::arg("h") = FormFactor::power_exp(1.0, Cutoff::exponential))
        .def_readwrite("beta", &BathSpec::beta)
        .def_readwrite("eps", &BathSpec::eps)
        .def_readwrite("delta", &BathSpec::delta)
        .def_readwrite("q0", &BathSpec::q0)
        .def_readwrite("h", &BathSpec::h)
        .def("__repr__", &BathSpec::describe);

    m.def("q1", [](const BathSpec& s, double t) { return q1(s, t).value; }, py::arg("spec"), py::arg("t"));
    m.def("q2", [](const BathSpec& s, double t) { return q2(s, t).value; }, py::arg("spec"), py::arg("t"));
    m.def("qz", [](const BathSpec& s, double t) { return qz(s, t).value; }, py::arg("spec"), py::arg("t"));

    m.def("f_norm", [](const BathSpec& s) { return coupling_function(s).norm(); }, py::arg("spec"));
    m.def("sign_relation_residual", [](const BathSpec& s) { return sign_relation_residual(coupling_function(s)); },
          py::arg("spec"));
    m.def(
        "condition_a",
        [](const BathSpec& s, double alpha, int budget) {
            const ConditionReport r = check_condition_A(s, alpha, budget);
            return py::dict(py::arg("verdict") = to_string(r.verdict), py::arg("values") = r.values,
                            py::arg("note") = r.note);
        },
        py::arg("spec"), py::arg("alpha"), py::arg("refinement_budget") = 3);

    m.def(
        "rate",
        [](const BathSpec& s, double t_max) {
            const RateReport r = gamma_rate(s, table_for(s, t_max));
            return py::dict(py::arg("tau_inv") = r.tau_inv, py::arg("tau0_inv") = r.tau0_inv,
                            py::arg("p_inf") = r.p_inf, py::arg("err") = r.err,
                            py::arg("damping_ok") = r.damping_ok);
        },
        py::arg("spec"), py::arg("t_max") = 300.0);
    m.def("p_infinity", &p_infinity, py::arg("spec"));

    m.def(
        "lso_matrix",
        [](const BathSpec& s, double t_max) {
            const LevelShiftMatrix r = lso_matrix(s, table_for(s, t_max));
            return py::dict(py::arg("x_plus") = r.x_plus, py::arg("x_minus") = r.x_minus, py::arg("z") = r.z,
                            py::arg("eigenvalues") = r.eigenvalues, py::arg("tau0_inv") = r.tau0_inv,
                            py::arg("db_residual") = r.db_residual, py::arg("trace_gap") = r.trace_gap,
                            py::arg("kernel_residual") = r.kernel_residual, py::arg("norm") = r.norm,
                            py::arg("err") = r.err);
        },
        py::arg("spec"), py::arg("t_max") = 300.0);

    m.def("delta0_formula", &delta0_formula, py::arg("c_kms"), py::arg("c3"), py::arg("c5"), py::arg("tau0"),
          py::arg("eps"));

    m.def(
        "lso_truncated",
        [](const BathSpec& s, int m_pos, double u_max, int n_max, double eta) {
            TruncationSpec t;
            t.m_pos = m_pos;
            t.u_max = u_max;
            t.n_max = n_max;
            t.eta = eta;
            t.validate();
            GlueGrid g = default_glue_grid(s.h, s.beta);
            g.u_max = std::max(g.u_max, t.resolved_u_max(s.beta) * 1.01);
            const auto bath = discretize(coupling_function(s, g), t);
            const Eigen::Matrix2cd r = lso_factorized(bath, s.eps, n_max, eta);
            return std::vector<std::vector<cplx>>{{r(0, 0), r(0, 1)}, {r(1, 0), r(1, 1)}};
        },
        py::arg("spec"), py::arg("m_pos") = 8, py::arg("u_max") = 0.0, py::arg("n_max") = 3, py::arg("eta") = 0.05);
}
