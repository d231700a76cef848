// relaxation.hpp: Relaxation rate, P(t) law and the level-shift operator Lambda_0
//
// With a = q0^2/pi and the kernels of bath_correlations.hpp:
//   tau^{-1} = Delta^2 int_0^inf cos(eps t) cos(a Q1) e^{-a Q2} dt
//   x(+-eps) = (i/2) int_0^inf cos(+-eps t - a Q1) e^{-a Q2} dt
//   z(eps)   = -(i/2) int_0^inf cos(eps t) e^{-a Qz} dt
// When Q2 saturates at a finite plateau C the integrands tend to
// e^{-aC} cos(eps t - a Q1(inf)); the integrals are then taken in the Abel
// sense, which for eps != 0 amounts to dropping that oscillating constant.

#pragma once

#include "spinboson/bath_correlations.hpp"
#include "spinboson/spectral_density.hpp"

#include <Eigen/Core>

#include <array>
#include <complex>
#include <string>

namespace sb {

struct RelaxationOptions {
    double rel_tol{1e-8};
    double abs_tol{1e-13};
    int max_cycles{40};  // half-periods fed to the tail acceleration
    int max_refine{5};   // panel halvings before giving up
};

// One semi-infinite integral over the kernel table.
struct TimeIntegral {
    double value{0.0};
    double err{0.0};
    bool damping_ok{false}; // envelope decayed, or the tail acceleration converged
    double t_end{0.0};      // last time sampled from the table
    std::string tail;       // "decayed", "levin", or "truncated"
};

struct RateReport {
    double tau_inv{0.0};
    double tau0_inv{0.0};
    double p_inf{0.0};
    double err{0.0};     // absolute error estimate on tau0_inv
    bool damping_ok{false};
    double plateau_weight{0.0}; // e^{-a C}, the asymptotic envelope subtracted from the integrand
};

struct LsoEntries {
    cplx x_plus, x_minus, z;
    double err{0.0};
    bool damping_ok{false};
};

struct LevelShiftMatrix {
    cplx x_plus, x_minus, z;
    Eigen::Matrix2cd matrix;        // [[x(eps), z], [z, x(-eps)]] in the {++, --} basis
    std::array<cplx, 2> eigenvalues; // ascending modulus
    double db_residual{0.0};
    double trace_gap{0.0};
    double kernel_residual{0.0};    // ||Lambda_0 psi_{S,beta}||
    double norm{0.0};               // spectral norm of the matrix
    double tau0_inv{0.0};
    double err{0.0};
    bool damping_ok{false};
};

struct FgrResult {
    bool effective{false};
    double tau0_inv{0.0};
    double err{0.0};
};

double p_infinity(const BathSpec& spec);
double p_of_t(const BathSpec& spec, const RateReport& rate, double t);

RateReport gamma_rate(const BathSpec& spec, const KernelTable& table, const RelaxationOptions& opts = {});
LsoEntries lso_entries(const BathSpec& spec, const KernelTable& table, const RelaxationOptions& opts = {});
LevelShiftMatrix lso_matrix(const BathSpec& spec, const KernelTable& table, const RelaxationOptions& opts = {});
FgrResult fgr_check(const BathSpec& spec, const KernelTable& table, const RelaxationOptions& opts = {});

// psi_{S,beta} in the {++, --} basis: (e^{-beta eps/4}, e^{beta eps/4}), normalized.
Eigen::Vector2cd gibbs_vector(double beta, double eps);

} // namespace sb
