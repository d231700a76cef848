// relaxation.cpp

#include "spinboson/relaxation.hpp"

#include "spinboson/errors.hpp"
#include "spinboson/textio.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gsl/gsl_sum.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <vector>

namespace sb {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEnvelopeFloor = 1e-12;

using Fn = std::function<double(double)>;

struct Sum {
    double value{0.0};
    double err{0.0};
};

// GK15 over [a, b] split into pieces no wider than `cap`.
Sum panels(const Fn& f, double a, double b, double cap) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    const auto& ax = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = G::weights();
    Sum s;
    if (!(b > a)) return s;
    const std::size_t n = std::max<std::size_t>(1, std::size_t(std::ceil((b - a) / cap)));
    const double h = (b - a) / double(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double lo = a + double(j) * h;
        const double hi = j + 1 == n ? b : lo + h;
        const double c = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
        const double f0 = f(c);
        double k = wk[0] * f0, g = wg[0] * f0;
        for (int i = 1; i < 8; ++i) {
            const double fp = f(c + hw * ax[i]), fm = f(c - hw * ax[i]);
            k += wk[i] * (fp + fm);
            if (i % 2 == 0) g += wg[i / 2] * (fp + fm);
        }
        s.value += hw * k;
        s.err += std::abs(hw * (k - g));
    }
    return s;
}

// Refines the panel cap until the estimate meets tol or max_refine halvings are spent.
Sum refined_panels(const Fn& f, double a, double b, double cap, double tol, int max_refine) {
    Sum s = panels(f, a, b, cap);
    for (int r = 0; r < max_refine && s.err > tol; ++r) {
        cap /= 2;
        s = panels(f, a, b, cap);
    }
    return s;
}

// Integral of R over [0, inf) given the remainder R (asymptotic part already
// subtracted) and an envelope bounding |R|.
TimeIntegral integrate_remainder(const Fn& R, const Fn& envelope, const KernelTable& tab, double eps,
                                 const RelaxationOptions& o) {
    TimeIntegral out;
    const double t_max = tab.t_max();
    if (t_max <= 0) throw PreconditionError("relaxation: kernel table covers only t = 0");
    double cap = 0.5;
    if (eps != 0) cap = std::min(cap, kPi / (2 * std::abs(eps)));
    const double tol_abs = o.abs_tol;

    // Last table time at which the envelope is still above the floor.
    double t_decay = 0;
    for (std::size_t i = tab.size(); i-- > 0;) {
        if (envelope(tab.t[i]) >= kEnvelopeFloor) {
            t_decay = i + 1 < tab.size() ? tab.t[i + 1] : t_max;
            break;
        }
    }
    if (t_decay < t_max) {
        const Sum s = refined_panels(R, 0.0, t_decay, cap, tol_abs, o.max_refine);
        out.value = s.value;
        out.err = s.err + kEnvelopeFloor * (t_max - t_decay);
        out.damping_ok = true;
        out.t_end = t_decay;
        out.tail = "decayed";
        return out;
    }

    if (eps != 0) {
        const double half = kPi / std::abs(eps);
        const int cycles = std::min(o.max_cycles, int(std::floor(0.8 * t_max / half)));
        if (cycles >= 8) {
            const double t0 = t_max - cycles * half;
            const Sum head = refined_panels(R, 0.0, t0, cap, tol_abs, o.max_refine);
            std::vector<double> terms(static_cast<std::size_t>(cycles));
            double term_err = 0, biggest = 0;
            for (int k = 0; k < cycles; ++k) {
                const Sum c = refined_panels(R, t0 + k * half, t0 + (k + 1) * half, cap, tol_abs / cycles,
                                             o.max_refine);
                terms[std::size_t(k)] = c.value;
                term_err += c.err;
                biggest = std::max(biggest, std::abs(c.value));
            }
            double tail = 0, tail_err = 0;
            if (biggest > 0) {
                std::unique_ptr<gsl_sum_levin_u_workspace, decltype(&gsl_sum_levin_u_free)> ws(
                    gsl_sum_levin_u_alloc(std::size_t(cycles)), &gsl_sum_levin_u_free);
                gsl_sum_levin_u_accel(terms.data(), std::size_t(cycles), ws.get(), &tail, &tail_err);
            }
            out.value = head.value + tail;
            out.err = head.err + term_err + tail_err;
            out.t_end = t_max;
            out.tail = "levin";
            out.damping_ok = std::isfinite(out.value) &&
                             tail_err <= std::max(o.rel_tol * std::abs(out.value), 10 * tol_abs);
            return out;
        }
    }

    // No oscillation to exploit: integrate what the table covers and charge the
    // remaining envelope, extrapolated exponentially, to the error.
    const Sum s = refined_panels(R, 0.0, t_max, cap, tol_abs, o.max_refine);
    const double e1 = envelope(t_max), e0 = envelope(t_max / 2);
    double tail = e1 * t_max;
    if (e0 > e1 && e1 > 0) tail = std::min(tail, e1 / (std::log(e0 / e1) / (t_max / 2)));
    out.value = s.value;
    out.err = s.err + tail;
    out.damping_ok = false;
    out.t_end = t_max;
    out.tail = "truncated";
    return out;
}

struct Setup {
    double a;       // q0^2 / pi
    double g_inf;   // e^{-a C}
    double q1_inf;
};

Setup setup(const BathSpec& spec, const KernelTable& tab) {
    spec.validate();
    if (spec.q0 == 0)
        throw DivergentIntegralError(
            "relaxation: q0 = 0 leaves the integrand undamped; the time integral diverges");
    if (tab.size() < 2) throw PreconditionError("relaxation: kernel table is too short");
    if (std::abs(tab.beta - spec.beta) > 1e-12 * spec.beta)
        throw PreconditionError("relaxation: kernel table was built for beta = " + fmt17(tab.beta) +
                                ", spec has beta = " + fmt17(spec.beta));
    Setup s;
    s.a = spec.q0 * spec.q0 / kPi;
    s.q1_inf = tab.tail.q1_limit;
    s.g_inf = std::isfinite(tab.tail.plateau) ? std::exp(-s.a * tab.tail.plateau) : 0.0;
    if (s.g_inf > 0 && spec.eps == 0)
        throw DivergentIntegralError(
            "relaxation: Q2 saturates (plateau weight " + fmt17(s.g_inf) +
            "), so at eps = 0 the time integral diverges; use eps != 0 or a spectral density with "
            "linear infrared behaviour");
    if (s.g_inf == 0 && tab.tail.q2_slope <= 0 && !(tab.tail.ir_exponent <= 2))
        throw PreconditionError("relaxation: Q2 neither saturates nor grows; cannot control the time integral");
    return s;
}

// x(sigma eps) / i = (1/2) int cos(sigma eps t - a Q1) e^{-a Q2}
TimeIntegral x_integral(const Setup& s, const KernelTable& tab, double eps, const RelaxationOptions& o) {
    auto R = [&](double t) {
        const auto k = tab.at(t);
        return std::cos(eps * t - s.a * k.q1) * std::exp(-s.a * k.q2) - s.g_inf * std::cos(eps * t - s.a * s.q1_inf);
    };
    auto env = [&](double t) {
        const auto k = tab.at(t);
        return std::abs(std::exp(-s.a * k.q2) - s.g_inf) + s.g_inf * std::abs(s.a * (k.q1 - s.q1_inf));
    };
    TimeIntegral r = integrate_remainder(R, env, tab, eps, o);
    r.value *= 0.5;
    r.err *= 0.5;
    return r;
}

// z(eps) / (-i) = (1/2) int cos(eps t) e^{-a Qz}
TimeIntegral z_integral(const Setup& s, const KernelTable& tab, double eps, const RelaxationOptions& o) {
    auto R = [&](double t) { return std::cos(eps * t) * (std::exp(-s.a * tab.at(t).qz) - s.g_inf); };
    auto env = [&](double t) { return std::abs(std::exp(-s.a * tab.at(t).qz) - s.g_inf); };
    TimeIntegral r = integrate_remainder(R, env, tab, eps, o);
    r.value *= 0.5;
    r.err *= 0.5;
    return r;
}

// tau0^{-1} = int cos(eps t) cos(a Q1) e^{-a Q2}
TimeIntegral rate_integral(const Setup& s, const KernelTable& tab, double eps, const RelaxationOptions& o) {
    const double c_inf = std::cos(s.a * s.q1_inf);
    auto R = [&](double t) {
        const auto k = tab.at(t);
        return std::cos(eps * t) * (std::cos(s.a * k.q1) * std::exp(-s.a * k.q2) - s.g_inf * c_inf);
    };
    auto env = [&](double t) {
        const auto k = tab.at(t);
        return std::abs(std::exp(-s.a * k.q2) - s.g_inf) + s.g_inf * std::abs(s.a * (k.q1 - s.q1_inf));
    };
    return integrate_remainder(R, env, tab, eps, o);
}

} // namespace

double p_infinity(const BathSpec& spec) {
    spec.validate();
    return -std::tanh(spec.beta * spec.eps / 2);
}

double p_of_t(const BathSpec& spec, const RateReport& rate, double t) {
    if (!(t >= 0)) throw DomainError("p_of_t: t must be >= 0");
    const double pinf = p_infinity(spec);
    if (t == 0) return 1.0;
    return pinf + (1 - pinf) * std::exp(-t * rate.tau_inv);
}

Eigen::Vector2cd gibbs_vector(double beta, double eps) {
    // Normalize in log space so large beta*eps does not overflow.
    const double x = beta * eps / 4;
    const double m = std::abs(x);
    Eigen::Vector2cd v(std::exp(-x - m), std::exp(x - m));
    return v / v.norm();
}

RateReport gamma_rate(const BathSpec& spec, const KernelTable& tab, const RelaxationOptions& o) {
    const Setup s = setup(spec, tab);
    const TimeIntegral r = rate_integral(s, tab, spec.eps, o);
    RateReport rep;
    rep.tau0_inv = r.value;
    rep.tau_inv = spec.delta * spec.delta * r.value;
    rep.p_inf = p_infinity(spec);
    rep.err = r.err;
    rep.damping_ok = r.damping_ok;
    rep.plateau_weight = s.g_inf;
    return rep;
}

LsoEntries lso_entries(const BathSpec& spec, const KernelTable& tab, const RelaxationOptions& o) {
    const Setup s = setup(spec, tab);
    const TimeIntegral xp = x_integral(s, tab, spec.eps, o);
    const TimeIntegral xm = x_integral(s, tab, -spec.eps, o);
    const TimeIntegral z = z_integral(s, tab, spec.eps, o);
    LsoEntries e;
    e.x_plus = cplx(0.0, xp.value);
    e.x_minus = cplx(0.0, xm.value);
    e.z = cplx(0.0, -z.value);
    e.err = std::max({xp.err, xm.err, z.err});
    e.damping_ok = xp.damping_ok && xm.damping_ok && z.damping_ok;
    return e;
}

LevelShiftMatrix lso_matrix(const BathSpec& spec, const KernelTable& tab, const RelaxationOptions& o) {
    const LsoEntries e = lso_entries(spec, tab, o);
    const RateReport rate = gamma_rate(spec, tab, o);
    LevelShiftMatrix m;
    m.x_plus = e.x_plus;
    m.x_minus = e.x_minus;
    m.z = e.z;
    m.matrix << e.x_plus, e.z, e.z, e.x_minus;
    m.tau0_inv = rate.tau0_inv;
    m.err = std::max(e.err, rate.err);
    m.damping_ok = e.damping_ok && rate.damping_ok;

    m.db_residual = std::abs(e.x_plus + std::exp(spec.beta * spec.eps / 2) * e.z) /
                    std::max(std::abs(e.x_plus), 1e-300);
    m.trace_gap = std::abs((e.x_plus + e.x_minus).imag() - rate.tau0_inv) / std::abs(rate.tau0_inv);
    m.kernel_residual = (m.matrix * gibbs_vector(spec.beta, spec.eps)).norm();

    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(m.matrix);
    m.norm = svd.singularValues()(0);
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(m.matrix, false);
    cplx l0 = es.eigenvalues()(0), l1 = es.eigenvalues()(1);
    if (std::abs(l1) < std::abs(l0)) std::swap(l0, l1);
    m.eigenvalues = {l0, l1};
    return m;
}

FgrResult fgr_check(const BathSpec& spec, const KernelTable& tab, const RelaxationOptions& o) {
    const RateReport r = gamma_rate(spec, tab, o);
    return {r.tau0_inv > 10 * r.err, r.tau0_inv, r.err};
}

} // namespace sb
