// test_relaxation.cpp: rate, P(t), level-shift operator

#include <doctest.h>

#include "spinboson/errors.hpp"
#include "spinboson/relaxation.hpp"

#include <cmath>
#include <map>
#include <numbers>

using namespace sb;
using std::numbers::pi;

namespace {

BathSpec make_spec(double beta, double eps, double q0, double delta = 0.1) {
    BathSpec s;
    s.beta = beta;
    s.eps = eps;
    s.q0 = q0;
    s.delta = delta;
    s.h = FormFactor::power_exp(1.0, Cutoff::exponential);
    return s;
}

const KernelTable& table_for(double beta) {
    static std::map<double, KernelTable> cache;
    auto it = cache.find(beta);
    if (it == cache.end()) it = cache.emplace(beta, tabulate_kernels(make_spec(beta, 1, 1), TableOptions{})).first;
    return it->second;
}

// h = w e^{-w}. Abel-regularized integrals from an independent double
// precision oracle (closed-form kernels, QAWF Fourier quadrature).
// x values are Im x(+-eps); z value is -Im z.
struct RateRef {
    double beta, eps, q0, tau0, xp, xm, z;
};
constexpr RateRef kRates[] = {
    {1.0, 1.0, 1.0, 0.3665012090192535, 0.2679338529317938, 0.09856735608745969, 0.16251009657806856},
    {0.5, 0.25, 2.0, 0.06753696321540732, 0.03587626790922295, 0.03166069530618437, 0.033702634718919974},
    {2.0, 0.5, 0.5, 0.3122298380514884, 0.22825830161179783, 0.08397153643969058, 0.13844565826148925},
};

} // namespace

TEST_CASE("equilibrium polarization") {
    CHECK(p_infinity(make_spec(1, 0, 1)) == 0.0);
    CHECK(p_infinity(make_spec(2, 0.5, 1)) == doctest::Approx(-std::tanh(0.5)).epsilon(1e-15));
    CHECK(p_infinity(make_spec(1e3, 1, 1)) == doctest::Approx(-1.0));
    CHECK(p_infinity(make_spec(1, -1, 1)) == doctest::Approx(std::tanh(0.5)));
}

TEST_CASE("rate and level-shift entries against oracle") {
    for (const auto& r : kRates) {
        const auto spec = make_spec(r.beta, r.eps, r.q0);
        INFO("beta=" << r.beta << " eps=" << r.eps << " q0=" << r.q0);
        const auto rate = gamma_rate(spec, table_for(r.beta));
        CHECK(rate.tau0_inv == doctest::Approx(r.tau0).epsilon(1e-8));
        CHECK(rate.tau_inv == doctest::Approx(spec.delta * spec.delta * r.tau0).epsilon(1e-8));
        CHECK(rate.damping_ok);
        const auto e = lso_entries(spec, table_for(r.beta));
        CHECK(std::abs(e.x_plus - cplx(0, r.xp)) < 1e-8 * r.tau0);
        CHECK(std::abs(e.x_minus - cplx(0, r.xm)) < 1e-8 * r.tau0);
        CHECK(std::abs(e.z - cplx(0, -r.z)) < 1e-8 * r.tau0);
        CHECK(e.damping_ok);
    }
}

TEST_CASE("P(t) law") {
    const auto spec = make_spec(1, 1, 1);
    const auto rate = gamma_rate(spec, table_for(1.0));
    CHECK(p_of_t(spec, rate, 0.0) == 1.0);
    const double pinf = p_infinity(spec);
    for (double t : {1.0, 30.0, 400.0}) {
        const double want = pinf + (1 - pinf) * std::exp(-rate.tau_inv * t);
        CHECK(p_of_t(spec, rate, t) == doctest::Approx(want).epsilon(1e-14));
    }
    CHECK(p_of_t(spec, rate, 1e9) == doctest::Approx(pinf));
    CHECK_THROWS_AS(p_of_t(spec, rate, -1.0), DomainError);
}

TEST_CASE("symmetries") {
    const auto& tab = table_for(1.0);
    const auto a = lso_entries(make_spec(1, 1, 1), tab);
    const auto b = lso_entries(make_spec(1, -1, 1), tab);
    CHECK(std::abs(a.x_plus - b.x_minus) < 1e-10);
    CHECK(std::abs(a.x_minus - b.x_plus) < 1e-10);
    CHECK(std::abs(a.z - b.z) < 1e-10);
    // tau0 is Delta-independent and even in q0
    const auto r1 = gamma_rate(make_spec(1, 1, 1, 0.01), tab);
    const auto r2 = gamma_rate(make_spec(1, 1, 1, 0.3), tab);
    const auto r3 = gamma_rate(make_spec(1, 1, -1, 0.3), tab);
    CHECK(r1.tau0_inv == r2.tau0_inv);
    CHECK(r3.tau0_inv == r2.tau0_inv);
    CHECK(r2.tau_inv == doctest::Approx(0.09 * r2.tau0_inv).epsilon(1e-15));
}

TEST_CASE("entries shrink with coupling") {
    const auto& tab = table_for(1.0);
    double prev_x = INFINITY, prev_z = INFINITY;
    for (double q0 : {0.5, 1.0, 1.5, 2.0}) {
        const auto e = lso_entries(make_spec(1, 1, q0), tab);
        CHECK(std::abs(e.x_plus) < prev_x);
        CHECK(std::abs(e.z) < prev_z);
        prev_x = std::abs(e.x_plus);
        prev_z = std::abs(e.z);
    }
}

TEST_CASE("level-shift matrix: detailed balance, trace and kernel") {
    for (const auto& r : kRates) {
        const auto spec = make_spec(r.beta, r.eps, r.q0);
        const auto m = lso_matrix(spec, table_for(r.beta));
        INFO("beta=" << r.beta);
        CHECK(m.db_residual < 1e-8);
        CHECK(m.trace_gap < 1e-8 * m.tau0_inv);
        CHECK(m.kernel_residual < 1e-8 * m.norm);
        CHECK(std::abs(m.eigenvalues[0]) < 1e-8 * m.norm);
        // nonzero eigenvalue = trace = i tau0 (up to the Abel regularization)
        CHECK(std::abs(m.eigenvalues[1] - cplx(0, m.tau0_inv)) < 1e-8 * m.norm);
        const auto psi = gibbs_vector(spec.beta, spec.eps);
        CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("gibbs vector is stable at extreme beta eps") {
    const auto psi = gibbs_vector(1e4, 1.0);
    CHECK(std::isfinite(psi.norm()));
    CHECK(std::abs(psi(1)) == doctest::Approx(1.0));
    CHECK(std::abs(psi(0)) < 1e-300);
}

TEST_CASE("divergences and preconditions") {
    CHECK_THROWS_AS(gamma_rate(make_spec(1, 1, 0), table_for(1.0)), DivergentIntegralError);
    CHECK_THROWS_AS(gamma_rate(make_spec(1, 0, 1), table_for(1.0)), DivergentIntegralError);
    CHECK_THROWS_AS(gamma_rate(make_spec(2, 1, 1), table_for(1.0)), PreconditionError);
}

TEST_CASE("Fermi golden rule is effective") {
    const auto f = fgr_check(make_spec(1, 1, 1), table_for(1.0));
    CHECK(f.effective);
    CHECK(f.tau0_inv > 0);

    // Linear-infrared J gives a finite eps = 0 rate.
    const auto J = SpectralDensity::power_law(1.0, 1.0, 1.0);
    TableOptions o;
    const auto tab = tabulate_kernels(J, 1.0, o);
    const auto z = fgr_check(make_spec(1, 0, 1), tab);
    CHECK(z.effective);
    CHECK(z.tau0_inv > 0);
}
