// constants_ledger.hpp: Explicit constants c1, c2, eigenvector bounds and the
// smallness threshold delta0, with provenance for every input constant

#pragma once

#include "spinboson/spectral_density.hpp"

#include <optional>
#include <string>

namespace sb {

enum class Provenance { computed, user, heuristic_default };
std::string to_string(Provenance p);

struct C1C2 {
    double c1{0.0};
    double c2{0.0};
    double eps_hat{0.0};
    double f_norm{0.0};
    double regularity{0.0}; // ||(1+|i d_u|^{3/2+eps_hat}) f_beta||
};

// eps_hat must lie in (0, alpha - 3/2); nullopt picks (alpha - 3/2)/2.
C1C2 constants_c1_c2(const GluedFunction& f_beta, double alpha, std::optional<double> eps_hat = std::nullopt);

struct EigenvectorBounds {
    double xi{0.5};
    double n_bound{0.0};      // at the given xi
    double xi_star{0.5};      // minimizer of n_bound over (0, 1)
    double n_bound_min{0.0};
    double pbar_bound{0.0};
    double dist_bound{0.0};   // +inf when pbar_bound >= 1
    double q_bound{0.0};      // +inf when eps = 0
};

double n_bound_at(double delta, const C1C2& c, double xi);
EigenvectorBounds eigenvector_bounds(const BathSpec& spec, const C1C2& c, double xi);

struct ConstantInput {
    double value{0.0};
    Provenance provenance{Provenance::user};
};

struct ThresholdInputs {
    std::optional<double> c_kms, c3, c5, tau0;
};

struct ResolvedInputs {
    ConstantInput c_kms, c3, c5, tau0;
};

// Fills missing constants: c3 := 10 c2 only with allow_heuristics, tau0 from
// the supplied computed value. Missing c_kms or c5 is a ConfigError.
ResolvedInputs resolve_inputs(const ThresholdInputs& in, const C1C2& c, bool allow_heuristics,
                              std::optional<double> computed_tau0 = std::nullopt);

// min{1, [c_kms^2 + c3^2 + 4/eps^2 + 2 tau0 (4 c3^2 + 4/eps^2 + c5/2)]^{-2}}
double delta0_formula(double c_kms, double c3, double c5, double tau0, double eps);
double delta0_threshold(const BathSpec& spec, const ResolvedInputs& in);

struct ConstantsReport {
    C1C2 c;
    EigenvectorBounds bounds;
    ResolvedInputs inputs;
    double delta0{0.0};
    bool heuristics_used{false};
    bool small_enough{false}; // |Delta| < delta0
};

ConstantsReport constants_report(const BathSpec& spec, const GluedFunction& f_beta, double alpha,
                                 std::optional<double> eps_hat, double xi, const ResolvedInputs& inputs);

} // namespace sb
