// truncated_oracle.hpp: Finite-dimensional realization of the transformed
// Liouvillean on a truncated Fock space, used as an independent oracle.
//
// Basis: spin_left (x) spin_right (x) occupations, spin factors outermost,
// occupations little-endian over modes (mode 0 varies fastest). Spin index 0
// is sigma_z = +1. Modes 0..m-1 sit at u_k = (k+1/2) du, modes m..2m-1 at -u_k.
// The field is phi(g) = (a*(g) + a(g))/sqrt 2 and W(g) = exp(i phi(g)) is the
// exponential of the truncated field, hence exactly unitary.

#pragma once

#include "spinboson/relaxation.hpp"
#include "spinboson/spectral_density.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sb {

struct TruncationSpec {
    int m_pos{8};
    double u_max{0.0}; // 0 picks 12/beta
    int n_max{3};
    double eta{0.05};
    std::size_t budget{200000}; // limit on the explicit model dimension

    double resolved_u_max(double beta) const { return u_max > 0 ? u_max : 12.0 / beta; }
    // 4 (n_max+1)^{2 m_pos}; saturates at SIZE_MAX
    std::size_t dimension() const;
    void validate() const; // DomainError
};

struct DiscretizedBath {
    double beta{1.0};
    double du{0.0};
    int m_pos{0};
    std::vector<double> u;         // 2 m_pos mode frequencies
    std::vector<cplx> c;           // discretization of 2 f_beta (angular factor included)
    std::vector<double> bin_edges; // positive half-axis; mirrored for u < 0
    double sign_residual{0.0};     // independent negative-bin integrals vs the enforced relation
    double target_weight{0.0};     // 4 ||f_beta||^2 restricted to [-u_max, u_max]

    std::size_t modes() const { return u.size(); }
    int mirror(int j) const { return j < m_pos ? j + m_pos : j - m_pos; }
    // c~_j = conj(c at -u_j)
    std::vector<cplx> tilde() const;
    double weight() const; // sum |c_j|^2
};

// Bins of width u_max/m_pos on each half-axis; |c_k|^2 = 4 pi int_bin |2 f_beta|^2,
// phase of f_beta at the midpoint, and c(-u_k) = -e^{-beta u_k/2} conj c(u_k).
DiscretizedBath discretize(const GluedFunction& f_beta, const TruncationSpec& t);

// Sum of Kronecker-structured terms coef * left (x) right (x) prod_j M_j, plus
// an optional full diagonal. Applied matrix-free.
class KronOperator {
public:
    struct Term {
        cplx coef{1.0};
        Eigen::Matrix2cd left{Eigen::Matrix2cd::Identity()};
        Eigen::Matrix2cd right{Eigen::Matrix2cd::Identity()};
        std::vector<std::pair<int, Eigen::MatrixXcd>> modes; // absent modes act as identity
    };

    KronOperator() = default;
    KronOperator(std::size_t modes, std::size_t mode_dim);

    void add(Term t) { terms_.push_back(std::move(t)); }
    void add_diagonal(const Eigen::VectorXcd& d);
    // this += scale * other
    void add_scaled(const KronOperator& other, cplx scale);

    std::size_t dim() const { return 4 * block_; }
    std::size_t block() const { return block_; }
    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
    Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& x) const;
    Eigen::SparseMatrix<cplx> to_sparse(double drop_tol = 0.0) const;

private:
    Eigen::VectorXcd apply_impl(const Eigen::VectorXcd& x, bool adjoint) const;
    std::size_t modes_{0}, mode_dim_{1}, block_{1};
    std::vector<Term> terms_;
    Eigen::VectorXcd diag_;
};

using LinearMap = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

// Largest |eigenvalue| of a Hermitian map by Lanczos with full
// reorthogonalization from a fixed pseudo-random start vector.
double hermitian_norm(const LinearMap& op, std::size_t dim, int max_steps = 80);

struct FiniteModel {
    BathSpec spec;
    TruncationSpec trunc;
    DiscretizedBath bath;
    std::size_t mode_dim{0};
    std::size_t dim{0};

    Eigen::VectorXd calL0_diag;  // (eps/2)(sz(x)1 - 1(x)sz) + dGamma(u)
    KronOperator calL0;
    KronOperator L0;             // calL0 - (Delta/2)(sx(x)1 - 1(x)sx)
    KronOperator calV, JcalVJ;   // Weyl parts with 2f_beta and its J-image
    KronOperator I;              // -(calV - JcalVJ)/2
    KronOperator V, JVJ;         // (q0/2) sz(x)1(x)phi(h_beta) and its J-image
    KronOperator U;
    KronOperator L;              // L0 + V - JVJ
    KronOperator calL;           // calL0 + Delta I
    double weyl_unitarity{0.0};  // max over modes of ||W^dag W - 1||

    std::size_t index(int spin_left, int spin_right, std::size_t occupation_index = 0) const {
        return (std::size_t(spin_left) * 2 + std::size_t(spin_right)) * (dim / 4) + occupation_index;
    }
    Eigen::VectorXcd basis_vector(int spin_left, int spin_right) const;
};

// Throws ConfigError when the explicit dimension exceeds the budget.
FiniteModel build_model(const DiscretizedBath& bath, const BathSpec& spec, const TruncationSpec& t);

struct StructureReport {
    double calv_square_residual{0.0};   // ||calV^2 - 1||
    double commutator_ratio{0.0};       // ||[V, JVJ]|| / ||V||^2
    double calv_commutator_ratio{0.0};  // ||[calV, JcalVJ]|| / ||calV||^2
    double I_norm{0.0};
    double self_adjoint_L0{0.0}, self_adjoint_I{0.0}, self_adjoint_L{0.0}; // ||M - M^dag|| / ||M||
    double weyl_unitarity{0.0};
};
StructureReport structure_report(const FiniteModel& m);

// ||U L U^dag - calL|| / ||calL||
double check_unitary_equivalence(const FiniteModel& m);

// Pi0 I Pibar0 (calL0 - i eta)^{-1} I Pi0 in the {phi_++ (x) Omega, phi_-- (x) Omega} basis.
// calL0 is diagonal, so the shifted solves are exact divisions.
Eigen::Matrix2cd lso_finite(const FiniteModel& m, double eta);

// Same matrix without materializing the Fock space: the vectors I Pi0 are
// products of per-mode coherent vectors and calL0 has energies on the lattice
// (du/2) Z, so each entry is a convolution over modes. Exact for the truncated model.
Eigen::Matrix2cd lso_factorized(const DiscretizedBath& bath, double eps, int n_max, double eta);

struct OraclePoint {
    double eta{0.0};
    int m_pos{0};
    double u_max{0.0};
    int n_max{0};
    cplx x_plus, x_minus, z, z_other; // z_other is the (--, ++) entry
};

struct OracleSchedule {
    std::vector<double> etas{0.2, 0.1, 0.05};
    bool match_m_pos{true}; // m_pos grows as 1/eta, reaching the truncation's m_pos at the last eta
    std::optional<double> exponent{1.0 / 3}; // Richardson exponent; nullopt fits it from the last three points
};

struct OracleReport {
    std::vector<OraclePoint> points;
    cplx x_plus, x_minus, z;                // eta -> 0 extrapolation
    std::array<double, 3> exponents{};     // Richardson exponent used per entry
    std::array<bool, 3> fitted{};          // exponent fitted (true) or fixed/fallback 1/3
    double max_real_fraction{0.0};         // max |Re|/|entry| of the extrapolated entries
    std::optional<LsoEntries> continuum;
    std::array<std::vector<double>, 3> point_rel_err; // per entry, along the schedule
    std::array<double, 3> extrapolated_rel_err{};
    bool monotone{false};                  // every entry's error shrinks along the schedule
    double target{0.10};
    bool within_target{false};
};

OracleReport run_oracle(const BathSpec& spec, const TruncationSpec& final_point, const OracleSchedule& schedule,
                        const std::optional<LsoEntries>& continuum, int jobs = 1);

struct KmsResult {
    Eigen::VectorXcd psi;
    double residual{0.0};   // ||calL psi||
    double log_growth{0.0}; // log of the unnormalized norm
};
// psi = normalize(exp(-beta (calL0 - Delta calV/2)/2) psi_{S,beta} (x) Omega)
KmsResult kms_vector(const FiniteModel& m, double exponent_budget = 1400.0);

// ||calL psi_n - s psi_n|| for psi_n ~ a*(f_n) psi_KMS, f_n uniform on the modes in [s-1/n, s+1/n].
std::vector<double> weyl_sequence_check(const FiniteModel& m, double s, int n_seq);

// Reference settings for the structural checks: h = u e^{-u}, beta = 1, eps = 1,
// Delta = 0.1, q0 = 0.5; m_pos = 2, u_max = 4.
BathSpec standard_test_bath();
TruncationSpec small_truncation(int n_max);

// "rows cols nnz" header, then one "row col re im" line per nonzero (0-based, %.17g).
void write_coo(const KronOperator& op, std::ostream& os, double drop_tol = 0.0);

} // namespace sb
