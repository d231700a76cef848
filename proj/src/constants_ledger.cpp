// constants_ledger.cpp

#include "spinboson/constants_ledger.hpp"

#include "spinboson/errors.hpp"
#include "spinboson/textio.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <limits>

namespace sb {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(const ConstantInput& c, const char* name) {
    if (!(c.value > 0) || !std::isfinite(c.value))
        throw DomainError(std::string("delta0: ") + name + " must be finite and > 0, got " + fmt17(c.value));
}
} // namespace

std::string to_string(Provenance p) {
    switch (p) {
    case Provenance::computed: return "computed";
    case Provenance::user: return "user";
    case Provenance::heuristic_default: return "heuristic_default";
    }
    return "user";
}

C1C2 constants_c1_c2(const GluedFunction& f_beta, double alpha, std::optional<double> eps_hat) {
    if (!(alpha > 1.5)) throw DomainError("constants_c1_c2: alpha must be > 3/2");
    const double e = eps_hat.value_or((alpha - 1.5) / 2);
    if (!(e > 0) || !(e < alpha - 1.5))
        throw DomainError("constants_c1_c2: eps_hat must lie in (0, alpha - 3/2) = (0, " + fmt17(alpha - 1.5) +
                          "), got " + fmt17(e));
    C1C2 out;
    out.eps_hat = e;
    const RegularityResult r = regularity_norm(f_beta, 1.5 + e);
    if (!r.converged)
        throw PreconditionError("constants_c1_c2: regularity norm at order " + fmt17(1.5 + e) +
                                " did not converge (value " + fmt17(r.value) + ")");
    out.regularity = r.value;
    out.f_norm = f_beta.norm();
    out.c1 = 4 * std::sqrt(2.0) * r.value;
    out.c2 = out.c1 * (1 + out.f_norm) / std::sqrt(2.0);
    return out;
}

double n_bound_at(double delta, const C1C2& c, double xi) {
    if (!(xi > 0 && xi < 1)) throw DomainError("n_bound: xi must lie in (0, 1)");
    return (delta * delta * c.c1 * c.c1 / (4 * xi) + std::abs(delta) * c.c2) / (1 - xi);
}

EigenvectorBounds eigenvector_bounds(const BathSpec& spec, const C1C2& c, double xi) {
    spec.validate();
    EigenvectorBounds b;
    b.xi = xi;
    b.n_bound = n_bound_at(spec.delta, c, xi);
    const auto best = boost::math::tools::brent_find_minima(
        [&](double x) { return n_bound_at(spec.delta, c, x); }, 1e-9, 1 - 1e-9, 52);
    b.xi_star = best.first;
    b.n_bound_min = best.second;
    const double ad = std::abs(spec.delta);
    b.pbar_bound = 10 * c.c2 * ad;
    b.dist_bound = b.pbar_bound < 1 ? (2 / std::sqrt(3.0)) * ad / std::sqrt(1 - b.pbar_bound * b.pbar_bound) : kInf;
    b.q_bound = spec.eps != 0 ? 2 * ad / std::abs(spec.eps) : (ad == 0 ? 0.0 : kInf);
    return b;
}

ResolvedInputs resolve_inputs(const ThresholdInputs& in, const C1C2& c, bool allow_heuristics,
                              std::optional<double> computed_tau0) {
    ResolvedInputs r;
    if (!in.c_kms) throw ConfigError("constants.c_kms is required (no computed default exists)");
    if (!in.c5) throw ConfigError("constants.c5 is required (no computed default exists)");
    r.c_kms = {*in.c_kms, Provenance::user};
    r.c5 = {*in.c5, Provenance::user};
    if (in.c3) {
        r.c3 = {*in.c3, Provenance::user};
    } else if (allow_heuristics) {
        r.c3 = {10 * c.c2, Provenance::heuristic_default};
    } else {
        throw ConfigError("constants.c3 is undefined in the source analysis; supply it or pass --allow-heuristics "
                          "to use the flagged default c3 = 10 c2");
    }
    if (in.tau0) {
        r.tau0 = {*in.tau0, Provenance::user};
    } else if (computed_tau0) {
        r.tau0 = {*computed_tau0, Provenance::computed};
    } else {
        throw ConfigError("constants.tau0 is required when no rate computation is available");
    }
    return r;
}

double delta0_formula(double c_kms, double c3, double c5, double tau0, double eps) {
    const double inv_e2 = eps != 0 ? 4 / (eps * eps) : kInf;
    const double bracket = c_kms * c_kms + c3 * c3 + inv_e2 + 2 * tau0 * (4 * c3 * c3 + inv_e2 + c5 / 2);
    if (bracket <= 0) return 1.0;
    return std::min(1.0, 1 / (bracket * bracket));
}

double delta0_threshold(const BathSpec& spec, const ResolvedInputs& in) {
    spec.validate();
    require_positive(in.c_kms, "c_kms");
    require_positive(in.c3, "c3");
    require_positive(in.c5, "c5");
    require_positive(in.tau0, "tau0");
    return delta0_formula(in.c_kms.value, in.c3.value, in.c5.value, in.tau0.value, spec.eps);
}

ConstantsReport constants_report(const BathSpec& spec, const GluedFunction& f_beta, double alpha,
                                 std::optional<double> eps_hat, double xi, const ResolvedInputs& inputs) {
    ConstantsReport rep;
    rep.c = constants_c1_c2(f_beta, alpha, eps_hat);
    rep.bounds = eigenvector_bounds(spec, rep.c, xi);
    rep.inputs = inputs;
    rep.delta0 = delta0_threshold(spec, inputs);
    for (const auto* c : {&inputs.c_kms, &inputs.c3, &inputs.c5, &inputs.tau0})
        if (c->provenance == Provenance::heuristic_default) rep.heuristics_used = true;
    rep.small_enough = std::abs(spec.delta) < rep.delta0;
    return rep;
}

} // namespace sb
