// test_spectral_density.cpp: form factors, J, glueing, Condition (A_alpha)

#include <doctest.h>

#include "spinboson/errors.hpp"
#include "spinboson/spectral_density.hpp"

#include <cmath>
#include <numbers>

using namespace sb;
using std::numbers::pi;

namespace {

const FormFactor kExp1 = FormFactor::power_exp(1.0, Cutoff::exponential);
const FormFactor kGauss = FormFactor::power_exp(0.5, Cutoff::gaussian);
const FormFactor kExp35 = FormFactor::power_exp(3.5, Cutoff::exponential);

BathSpec spec_for(const FormFactor& h, double beta, double q0) {
    BathSpec s;
    s.beta = beta;
    s.q0 = q0;
    s.h = h;
    return s;
}

} // namespace

TEST_CASE("eval_J closed forms") {
    CHECK(eval_J(kGauss, 0.0) == 0.0);
    for (double w : {0.1, 1.0, 2.5}) {
        CHECK(eval_J(kGauss, w) == doctest::Approx(2 * pi * pi * w * w * w * std::exp(-2 * w * w)).epsilon(1e-14));
        CHECK(eval_J(kExp1, w) == doctest::Approx(2 * pi * pi * std::pow(w, 4) * std::exp(-2 * w)).epsilon(1e-14));
    }
    // 2 pi^2 e^{-2} at omega = 1 for both families.
    CHECK(eval_J(kExp1, 1.0) == doctest::Approx(2.671411414109495).epsilon(1e-15));
    CHECK_THROWS_AS(eval_J(kExp1, -1.0), DomainError);
}

TEST_CASE("tabulated form factor interpolates and vanishes outside its grid") {
    const auto h = FormFactor::tabulated({0.5, 1.0, 2.0}, {1.0, 3.0, 1.0});
    CHECK(h(0.75) == doctest::Approx(2.0));
    CHECK(h(0.25) == 0.0);
    CHECK(h(2.5) == 0.0);
    CHECK(h(2.0) == 1.0);
    CHECK_THROWS_AS(FormFactor::tabulated({1.0, 1.0}, {0.0, 0.0}), DomainError);
    CHECK_THROWS_AS(FormFactor::power_exp(0.0, Cutoff::gaussian), DomainError);
}

TEST_CASE("infrared exponent") {
    CHECK(infrared_exponent(kExp1) == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(infrared_exponent(kGauss) == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(infrared_exponent(FormFactor::tabulated({0.0, 1.0}, {2.0, 2.0})) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::isinf(infrared_exponent(FormFactor::zero())));
}

TEST_CASE("thermal weight is continuous through its series branch") {
    for (double beta : {0.5, 1.0, 4.0}) {
        const double u = 1e-4 / beta;
        CHECK(thermal_weight(u * 0.999, beta) == doctest::Approx(thermal_weight(u * 1.001, beta)).epsilon(1e-6));
        CHECK(thermal_weight(-u * 0.999, beta) == doctest::Approx(thermal_weight(-u * 1.001, beta)).epsilon(1e-6));
        CHECK(thermal_weight(1e-12, beta) == doctest::Approx(1 / beta));
    }
}

TEST_CASE("glue: sign relation and zero input") {
    for (const auto* h : {&kExp1, &kGauss, &kExp35}) {
        for (double beta : {0.5, 1.0, 2.0}) {
            const auto f = coupling_function(spec_for(*h, beta, 1.0));
            CHECK(f.is_symmetric());
            CHECK(sign_relation_residual(f) < 1e-12);
        }
    }
    const auto z = glue([](double) { return cplx{}; }, 1.0, GlueGrid{});
    CHECK(z.norm() == 0.0);
    CHECK_THROWS_AS(glue([](double) { return cplx{}; }, 0.0, GlueGrid{}), DomainError);
    CHECK_THROWS_AS(glue([](double u) { return cplx(1.0 / (u - u)); }, 1.0, GlueGrid{}), EvaluationError);
}

TEST_CASE("glue: norm identity against radial quadrature") {
    // pi * int_0^inf h(u)^2 coth(beta u / 2) du, 30-digit quadrature.
    struct Row { const FormFactor* h; double beta; double expected; };
    const Row rows[] = {
        {&kExp1, 0.5, 3.2378375936672843455},  {&kExp1, 1.0, 1.7537237668956944453},
        {&kExp1, 2.0, 1.102788404684091154},   {&kGauss, 0.5, 7.9156923548067855325},
        {&kGauss, 1.0, 4.0184355923540826712}, {&kGauss, 2.0, 2.1253930331548986183},
        {&kExp35, 0.5, 89.669609456756759048}, {&kExp35, 1.0, 67.268568789960879524},
        {&kExp35, 2.0, 62.354475188476827562},
    };
    for (const auto& r : rows) {
        const auto f = coupling_function(spec_for(*r.h, r.beta, 1.0));
        const double n2 = f.norm() * f.norm();
        CAPTURE(r.beta);
        CHECK(std::abs(n2 - r.expected) <= 1e-6 * r.expected);
    }
}

TEST_CASE("glue: symplectic form is preserved") {
    const double beta = 1.0;
    const GlueGrid grid{40.0, 1 << 14};
    auto fe = [](double u) { return cplx(u * std::exp(-u)); };
    auto ge = [](double u) { return std::polar(std::sqrt(u) * std::exp(-u * u), u); };
    const double im = glue(fe, beta, grid).inner(glue(ge, beta, grid)).imag();
    CHECK(std::abs(im - 1.6262091746668846375) <= 1e-6 * 1.6262091746668846375);

    auto g2 = [](double u) { return std::polar(std::pow(u, 3.5) * std::exp(-u), 2 * u); };
    const double im2 = glue(fe, 0.5, GlueGrid{80.0, 1 << 15}).inner(glue(g2, 0.5, GlueGrid{80.0, 1 << 15})).imag();
    CHECK(std::abs(im2 + 3.6948336145661280959) <= 1e-6 * 3.6948336145661280959);
}

TEST_CASE("coupling function: point value, linearity, q0 = 0") {
    const auto s = spec_for(kExp35, 1.0, 1.0);
    auto f = [&](double u) { return cplx(0.0, -0.5) * (kExp35(u) / u); };
    const cplx expected = cplx(0.0, -0.5) * std::sqrt(1.0 / (1.0 - std::exp(-1.0))) * std::exp(-1.0);
    CHECK(std::abs(glued_value(f, 1.0, 1.0) - expected) < 1e-15);

    const auto f1 = coupling_function(s);
    auto s2 = s;
    s2.q0 = 2.0;
    const auto f2 = coupling_function(s2);
    for (std::size_t i = 0; i < f1.size(); i += 97) CHECK(std::abs(f2.values[i] - 2.0 * f1.values[i]) < 1e-15);

    auto s0 = s;
    s0.q0 = 0.0;
    CHECK(coupling_function(s0).norm() == 0.0);

    // J ~ omega^2: f_beta not square integrable near 0.
    auto sflat = spec_for(FormFactor::tabulated({0.0, 1.0, 2.0}, {1.0, 1.0, 0.0}), 1.0, 1.0);
    CHECK_THROWS_AS(coupling_function(sflat), PreconditionError);
}

TEST_CASE("regularity norm") {
    const auto z = glue([](double) { return cplx{}; }, 1.0, GlueGrid{});
    const auto rz = regularity_norm(z, 2.2);
    CHECK(rz.value == 0.0);
    CHECK(rz.converged);

    const auto f = coupling_function(spec_for(kExp35, 1.0, 1.0));
    const auto r = regularity_norm(f, 2.2);
    CHECK(std::isfinite(r.value));
    CHECK(r.converged);

    // alpha = 0 is the plain-midpoint L^2 norm (Parseval), with weight (1+1)^2.
    double plain = 0;
    for (std::size_t i = 0; i < f.size(); ++i) plain += std::norm(f.values[i]);
    plain = std::sqrt(kAngularFactor * plain * (f.grid[1] - f.grid[0]));
    CHECK(regularity_value(f, 0.0) == doctest::Approx(2 * plain).epsilon(1e-12));

    // Sobolev regularity of (ih/u)_beta for p = 3.5 is below 3.5.
    CHECK_FALSE(regularity_norm(f, 5.0).converged);

    GluedFunction bad = f;
    bad.grid[3] += 1e-3;
    CHECK_THROWS_AS(regularity_value(bad, 1.0), UsageError);
}

TEST_CASE("regularity norm is monotone in alpha for spectra at |xi| >= 1") {
    // Monotonicity of (1+|xi|^alpha) needs |xi| >= 1; a band-limited signal above 1.
    GluedFunction g;
    const double du = 80.0 / 4096;
    for (int i = 0; i < 4096; ++i) {
        const double u = -40.0 + (i + 0.5) * du;
        g.grid.push_back(u);
        g.values.push_back(std::polar(std::exp(-0.05 * u * u), 3.0 * u));
        g.weights.push_back(du);
    }
    double prev = 0;
    for (double a : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
        const double v = regularity_value(g, a);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("Condition A verdicts") {
    CHECK(check_condition_A(kGauss, 1.0, 2.2).verdict == Verdict::pass);
    CHECK(check_condition_A(kExp35, 1.0, 2.2).verdict == Verdict::pass);
    CHECK(check_condition_A(FormFactor::zero(), 1.0, 2.2).verdict == Verdict::pass);
    const auto rough = check_condition_A(kExp1, 1.0, 2.2);
    CAPTURE(rough.note);
    CHECK(rough.verdict == Verdict::fail);
}
