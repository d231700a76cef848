// test_bath_correlations.cpp: kernels Q1, Q2, Qz and the cached tables

#include <doctest.h>

#include "spinboson/bath_correlations.hpp"
#include "spinboson/errors.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace sb;
using std::numbers::pi;

namespace {

// J = 2 pi^2 w^4 e^{-2w}, i.e. h = w e^{-w}. Reference values come from the
// rational closed form of Q1 and Hurwitz-type sums for Q2 and Qz (Qz through
// analytic continuation t -> t - i beta/2).
struct KernelRef {
    double beta, t, q1, q2, qz;
};
constexpr KernelRef kRefs[] = {
    {1.0, 0.5, 3.021348467176551, 2.226577010814318, 3.1158154157333477},
    {1.0, 3.0, 0.161723149039243, 12.271959011375584, 12.143453329174461},
    {1.0, 17.0, -0.00739069986638255, 11.149825800667234, 11.150133916715127},
    {0.5, 0.5, 3.021348467176551, 3.6483832120903275, 4.102579084631235},
    {0.5, 3.0, 0.161723149039243, 22.72140312609266, 22.659070448760353},
    {0.5, 17.0, -0.00739069986638255, 20.605950502924866, 20.606104420100728},
};
constexpr double kPlateauBeta1 = 11.018971405010632;
constexpr double kPlateauBetaHalf = 20.3439335955638;

const SpectralDensity& exp1() {
    static const SpectralDensity J = SpectralDensity::from_form_factor(FormFactor::power_exp(1.0, Cutoff::exponential));
    return J;
}

std::filesystem::path scratch_dir(const char* name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("ohmic kernels at vanishing temperature match arctan and log") {
    const auto J = SpectralDensity::power_law(1.0, 1.0, 1.0);
    KernelEvaluator ev(J, 1e6);
    for (double t : {0.1, 1.0, 4.0, 10.0}) {
        const auto k = ev.eval(t);
        CHECK(k.q1.value == doctest::Approx(std::atan(t)).epsilon(1e-12));
        CHECK(k.q2.value == doctest::Approx(0.5 * std::log1p(t * t)).epsilon(1e-9));
    }
}

TEST_CASE("superohmic kernels against frozen closed-form values") {
    for (const auto& r : kRefs) {
        KernelEvaluator ev(exp1(), r.beta);
        const auto k = ev.eval(r.t);
        INFO("beta=" << r.beta << " t=" << r.t);
        CHECK(std::abs(k.q1.value - r.q1) <= 1e-11 * std::max(1.0, std::abs(r.q1)));
        CHECK(std::abs(k.q2.value - r.q2) <= 1e-11 * std::abs(r.q2));
        CHECK(std::abs(k.qz.value - r.qz) <= 1e-11 * std::abs(r.qz));
    }
    CHECK(KernelEvaluator(exp1(), 1.0).plateau() == doctest::Approx(kPlateauBeta1).epsilon(1e-11));
    CHECK(KernelEvaluator(exp1(), 0.5).plateau() == doctest::Approx(kPlateauBetaHalf).epsilon(1e-11));
}

TEST_CASE("error estimates are honest at loose tolerance") {
    QuadratureOptions loose;
    loose.rel_tol = 1e-5;
    for (const auto& r : kRefs) {
        KernelEvaluator ev(exp1(), r.beta, loose);
        const auto k = ev.eval(r.t);
        INFO("beta=" << r.beta << " t=" << r.t);
        CHECK(std::abs(k.q2.value - r.q2) <= 5 * k.q2.err + 1e-13);
        CHECK(std::abs(k.qz.value - r.qz) <= 5 * k.qz.err + 1e-13);
        CHECK(std::abs(k.q1.value - r.q1) <= 5 * k.q1.err + 1e-13);
    }
}

TEST_CASE("kernels are linear in J") {
    const auto J3 = SpectralDensity::custom([](double w) { return 3 * exp1()(w); }, 1.0, "3J");
    KernelEvaluator a(exp1(), 1.0), b(J3, 1.0);
    for (double t : {0.7, 5.0}) {
        const auto ka = a.eval(t), kb = b.eval(t);
        CHECK(kb.q1.value == doctest::Approx(3 * ka.q1.value).epsilon(1e-12));
        CHECK(kb.q2.value == doctest::Approx(3 * ka.q2.value).epsilon(1e-12));
        CHECK(kb.qz.value == doctest::Approx(3 * ka.qz.value).epsilon(1e-12));
    }
}

TEST_CASE("structural properties") {
    KernelEvaluator ev(exp1(), 1.0);
    const auto k0 = ev.eval(0.0);
    CHECK(k0.q1.value == 0.0);
    CHECK(k0.q2.value == 0.0);
    // Qz(0) = int J/w^2 tanh(beta w/4) > 0
    CHECK(k0.qz.value > 0);
    double prev = 0;
    for (double t = 0.05; t < 1.5; t += 0.05) {
        const double v = ev.q2(t).value;
        CHECK(v > prev);
        prev = v;
    }
    for (double t : {0.0, 0.3, 2.0, 9.0, 40.0}) CHECK(ev.qz(t).value >= 0);
    // Qz - Q2 -> 0 at large t: both approach the plateau.
    const auto kl = ev.eval(200.0);
    CHECK(std::abs(kl.qz.value - kl.q2.value) < 1e-3);
    CHECK(std::abs(kl.q2.value - kPlateauBeta1) < 1e-3);

    const auto zero = SpectralDensity::custom([](double) { return 0.0; }, 1.0, "zero");
    const auto kz = KernelEvaluator(zero, 1.0).eval(3.0);
    CHECK(kz.q1.value == 0.0);
    CHECK(kz.q2.value == 0.0);
    CHECK(kz.qz.value == 0.0);
}

TEST_CASE("ohmic Q2 grows linearly at finite temperature") {
    TableOptions o;
    o.t_max = 60;
    const auto tab = tabulate_kernels(SpectralDensity::power_law(1.0, 1.0, 1.0), 1.0, o);
    // Q2 ~ (pi/beta) t for ohmic J
    CHECK(tab.tail.q2_slope == doctest::Approx(pi).epsilon(2e-2));
    CHECK(std::isinf(tab.tail.plateau));
    const auto sup = tabulate_kernels(exp1(), 1.0, o);
    CHECK(sup.tail.q2_slope == 0.0);
    CHECK(sup.tail.plateau == doctest::Approx(kPlateauBeta1).epsilon(1e-11));
}

TEST_CASE("preconditions and domain checks") {
    const auto sub = SpectralDensity::custom([](double w) { return std::exp(-w); }, 1.0, "flat");
    CHECK_THROWS_AS(KernelEvaluator(sub, 1.0), PreconditionError);
    CHECK_THROWS_AS(KernelEvaluator(exp1(), 0.0), DomainError);
    CHECK_THROWS_AS(KernelEvaluator(exp1(), 1.0).eval(-1.0), DomainError);
}

TEST_CASE("tables: single row, interpolation and bounds") {
    BathSpec s;
    s.q0 = 1;
    s.h = FormFactor::power_exp(1.0, Cutoff::exponential);
    const auto one = tabulate_kernels(s, 10.0, 1);
    REQUIRE(one.size() == 1);
    CHECK(one.t[0] == 0.0);
    CHECK(one.q2[0] == 0.0);

    TableOptions o;
    o.t_max = 40;
    const auto tab = tabulate_kernels(exp1(), 1.0, o);
    CHECK(tab.t.front() == 0.0);
    CHECK(tab.t_max() == doctest::Approx(40.0));
    KernelEvaluator ev(exp1(), 1.0);
    for (double t : {0.013, 1.7, 17.0, 33.3}) {
        const auto smp = tab.at(t);
        const auto k = ev.eval(t);
        CHECK(std::abs(smp.q1 - k.q1.value) < 1e-11);
        CHECK(std::abs(smp.q2 - k.q2.value) < 1e-11);
        CHECK(std::abs(smp.qz - k.qz.value) < 1e-11);
    }
    CHECK_THROWS_AS(tab.at(41.0), DomainError);
}

TEST_CASE("table cache round-trip is bit-identical and key-checked") {
    const auto dir = scratch_dir("spinboson_cache_test");
    TableOptions o;
    o.t_max = 20;
    o.cache_dir = dir.string();
    const auto first = tabulate_kernels(exp1(), 1.0, o);
    const auto key = table_key(exp1(), 1.0, o);
    KernelTable loaded;
    const auto csv = (dir / ("kernels-" + key + ".csv")).string();
    REQUIRE(load_table(csv, key, loaded));
    CHECK(table_to_csv(loaded) == table_to_csv(first));
    CHECK(loaded.t == first.t);
    CHECK(loaded.q2 == first.q2);
    CHECK(loaded.qz == first.qz);
    CHECK_FALSE(load_table(csv, "not-the-key", loaded));

    const auto second = tabulate_kernels(exp1(), 1.0, o);
    CHECK(second.q1 == first.q1);

    TableOptions other = o;
    other.t_max = 22;
    CHECK(table_key(exp1(), 1.0, other) != key);
    CHECK(table_key(exp1(), 2.0, o) != key);
    std::filesystem::remove_all(dir);
}

TEST_CASE("parallel tabulation is deterministic") {
    TableOptions o;
    o.t_max = 30;
    const auto a = tabulate_kernels(exp1(), 1.0, o);
    o.jobs = 3;
    const auto b = tabulate_kernels(exp1(), 1.0, o);
    CHECK(a.q1 == b.q1);
    CHECK(a.q2 == b.q2);
    CHECK(a.qz == b.qz);
}
