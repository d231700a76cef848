// truncated_oracle.cpp

#include "spinboson/truncated_oracle.hpp"

#include "spinboson/errors.hpp"
#include "spinboson/parallel.hpp"
#include "spinboson/textio.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace sb {

namespace {

using Eigen::Matrix2cd;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

const cplx kI{0.0, 1.0};

Matrix2cd sigma_z() { return (Matrix2cd() << 1, 0, 0, -1).finished(); }
Matrix2cd sigma_x() { return (Matrix2cd() << 0, 1, 1, 0).finished(); }
Matrix2cd sigma_plus() { return (Matrix2cd() << 0, 1, 0, 0).finished(); }
Matrix2cd sigma_minus() { return (Matrix2cd() << 0, 0, 1, 0).finished(); }
Matrix2cd projector(int s) {
    Matrix2cd p = Matrix2cd::Zero();
    p(s, s) = 1;
    return p;
}

MatrixXcd annihilation(int d) {
    MatrixXcd a = MatrixXcd::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

// Truncated phi(a) on one mode.
MatrixXcd field(cplx a, int d) {
    const MatrixXcd A = annihilation(d);
    return (a * A.adjoint() + std::conj(a) * A) / std::sqrt(2.0);
}

MatrixXcd weyl(cplx a, int d) {
    MatrixXcd x = (kI * field(a, d)).eval();
    return x.exp();
}

// Applies M to mode j of a block of length d^modes, in place.
void apply_mode(VectorXcd& v, std::size_t stride, std::size_t d, const MatrixXcd& M) {
    const std::size_t span = stride * d;
    const std::size_t n = std::size_t(v.size());
    VectorXcd col(d), out(d);
    for (std::size_t base = 0; base < n; base += span)
        for (std::size_t inner = 0; inner < stride; ++inner) {
            for (std::size_t k = 0; k < d; ++k) col(k) = v(base + inner + k * stride);
            out.noalias() = M * col;
            for (std::size_t k = 0; k < d; ++k) v(base + inner + k * stride) = out(k);
        }
}

std::size_t saturating_pow(std::size_t b, std::size_t e) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < e; ++i) {
        if (r > std::numeric_limits<std::size_t>::max() / b) return std::numeric_limits<std::size_t>::max();
        r *= b;
    }
    return r;
}

LinearMap as_map(const KronOperator& op) {
    return [&op](const VectorXcd& x) { return op.apply(x); };
}

} // namespace

// --- truncation and discretization -------------------------------------------

std::size_t TruncationSpec::dimension() const {
    const std::size_t b = saturating_pow(std::size_t(n_max + 1), std::size_t(2 * m_pos));
    return b > std::numeric_limits<std::size_t>::max() / 4 ? std::numeric_limits<std::size_t>::max() : 4 * b;
}

void TruncationSpec::validate() const {
    if (m_pos < 1) throw DomainError("truncation: m_pos must be >= 1");
    if (n_max < 1) throw DomainError("truncation: n_max must be >= 1");
    if (!(eta > 0) || !std::isfinite(eta)) throw DomainError("truncation: eta must be finite and > 0");
    if (!(u_max >= 0) || !std::isfinite(u_max)) throw DomainError("truncation: u_max must be finite and >= 0");
}

std::vector<cplx> DiscretizedBath::tilde() const {
    std::vector<cplx> t(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) t[j] = std::conj(c[std::size_t(mirror(int(j)))]);
    return t;
}

double DiscretizedBath::weight() const {
    double s = 0;
    for (const auto& x : c) s += std::norm(x);
    return s;
}

DiscretizedBath discretize(const GluedFunction& f, const TruncationSpec& t) {
    t.validate();
    if (!f.source) throw UsageError("discretize: glued function has no source to integrate over bins");
    DiscretizedBath b;
    b.beta = f.beta;
    b.m_pos = t.m_pos;
    const double u_max = t.resolved_u_max(f.beta);
    const double spacing = f.size() > 1 ? f.grid[1] - f.grid[0] : 0.0;
    if (f.grid.empty() || f.grid.back() + spacing < u_max * (1 - 1e-12))
        throw PreconditionError("discretize: glued grid ends at " + fmt17(f.grid.empty() ? 0.0 : f.grid.back()) +
                                ", below u_max = " + fmt17(u_max));
    const int m = t.m_pos;
    b.du = u_max / m;
    b.u.resize(2 * std::size_t(m));
    b.c.resize(2 * std::size_t(m));
    for (int k = 0; k <= m; ++k) b.bin_edges.push_back(k * b.du);

    auto sq = [&](double u) { return 4 * std::norm(glued_value(f.source, f.beta, u)); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double max_c2 = 0, max_dev = 0;
    std::vector<double> neg(std::size_t(m), 0.0);
    for (int k = 0; k < m; ++k) {
        const double lo = k * b.du, hi = (k + 1) * b.du, uk = (k + 0.5) * b.du;
        const double c2 = f.angular_factor * GK::integrate(sq, lo, hi, 8, 1e-13);
        neg[std::size_t(k)] = f.angular_factor * GK::integrate(sq, -hi, -lo, 8, 1e-13);
        const cplx g = glued_value(f.source, f.beta, uk);
        const cplx phase = std::abs(g) > 0 ? g / std::abs(g) : cplx(0);
        b.u[std::size_t(k)] = uk;
        b.u[std::size_t(k + m)] = -uk;
        b.c[std::size_t(k)] = std::sqrt(c2) * phase;
        b.c[std::size_t(k + m)] = -std::exp(-f.beta * uk / 2) * std::conj(b.c[std::size_t(k)]);
        max_c2 = std::max(max_c2, c2);
        b.target_weight += c2 + neg[std::size_t(k)];
    }
    for (int k = 0; k < m; ++k)
        max_dev = std::max(max_dev, std::abs(neg[std::size_t(k)] - std::norm(b.c[std::size_t(k + m)])));
    b.sign_residual = max_c2 > 0 ? max_dev / max_c2 : 0.0;
    return b;
}

// --- Kronecker operators -----------------------------------------------------

KronOperator::KronOperator(std::size_t modes, std::size_t mode_dim)
    : modes_(modes), mode_dim_(mode_dim), block_(saturating_pow(mode_dim, modes)) {}

void KronOperator::add_diagonal(const VectorXcd& d) {
    if (std::size_t(d.size()) != dim()) throw UsageError("KronOperator: diagonal has the wrong length");
    if (diag_.size() == 0) diag_ = VectorXcd::Zero(d.size());
    diag_ += d;
}

void KronOperator::add_scaled(const KronOperator& other, cplx scale) {
    if (other.dim() != dim()) throw UsageError("KronOperator: dimension mismatch");
    for (auto t : other.terms_) {
        t.coef *= scale;
        terms_.push_back(std::move(t));
    }
    if (other.diag_.size()) add_diagonal(scale * other.diag_);
}

VectorXcd KronOperator::apply(const VectorXcd& x) const { return apply_impl(x, false); }
VectorXcd KronOperator::apply_adjoint(const VectorXcd& x) const { return apply_impl(x, true); }

VectorXcd KronOperator::apply_impl(const VectorXcd& x, bool adjoint) const {
    if (std::size_t(x.size()) != dim()) throw UsageError("KronOperator: vector has the wrong length");
    const auto B = Eigen::Index(block_);
    VectorXcd y = VectorXcd::Zero(x.size());
    if (diag_.size()) y = (adjoint ? diag_.conjugate() : diag_).cwiseProduct(x);
    VectorXcd tmp;
    for (const auto& t : terms_) {
        const Matrix2cd l = adjoint ? Matrix2cd(t.left.adjoint()) : t.left;
        const Matrix2cd r = adjoint ? Matrix2cd(t.right.adjoint()) : t.right;
        const cplx coef = adjoint ? std::conj(t.coef) : t.coef;
        for (int li = 0; li < 2; ++li)
            for (int ri = 0; ri < 2; ++ri) {
                if (l.col(li).isZero(0) || r.col(ri).isZero(0)) continue;
                tmp = x.segment((li * 2 + ri) * B, B);
                for (const auto& [j, M] : t.modes)
                    apply_mode(tmp, saturating_pow(mode_dim_, std::size_t(j)), mode_dim_,
                               adjoint ? MatrixXcd(M.adjoint()) : M);
                for (int lo = 0; lo < 2; ++lo)
                    for (int ro = 0; ro < 2; ++ro) {
                        const cplx w = coef * l(lo, li) * r(ro, ri);
                        if (w != cplx(0)) y.segment((lo * 2 + ro) * B, B) += w * tmp;
                    }
            }
    }
    return y;
}

Eigen::SparseMatrix<cplx> KronOperator::to_sparse(double drop_tol) const {
    const auto n = Eigen::Index(dim());
    std::vector<Eigen::Triplet<cplx>> trips;
    VectorXcd e = VectorXcd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        e(k) = 1;
        const VectorXcd col = apply(e);
        e(k) = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::abs(col(i)) > drop_tol) trips.emplace_back(i, k, col(i));
    }
    Eigen::SparseMatrix<cplx> s(n, n);
    s.setFromTriplets(trips.begin(), trips.end());
    return s;
}

double hermitian_norm(const LinearMap& op, std::size_t dim, int max_steps) {
    if (dim == 0) return 0.0;
    const int steps = int(std::min<std::size_t>(std::size_t(std::max(1, max_steps)), dim));
    std::mt19937_64 rng(0x5eedULL);
    auto unit = [&] { return double(rng() >> 11) * 0x1.0p-53 - 0.5; };
    const auto n = Eigen::Index(dim);
    VectorXcd q(n);
    for (Eigen::Index i = 0; i < n; ++i) q(i) = cplx(unit(), unit());
    q.normalize();
    std::vector<VectorXcd> Q{q};
    std::vector<double> alpha, beta;
    double scale = 0;
    for (int k = 0; k < steps; ++k) {
        VectorXcd w = op(Q.back());
        const double a = Q.back().dot(w).real();
        alpha.push_back(a);
        scale = std::max(scale, w.norm());
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& v : Q) w -= v.dot(w) * v;
        const double b = w.norm();
        if (k + 1 == steps || b <= 1e-13 * std::max(scale, 1e-300)) break;
        beta.push_back(b);
        Q.push_back(w / b);
    }
    const auto m = Eigen::Index(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        T(i, i) = alpha[std::size_t(i)];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[std::size_t(i)];
    }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T, Eigen::EigenvaluesOnly).eigenvalues();
    return std::max(std::abs(ev(0)), std::abs(ev(m - 1)));
}

// --- finite model ------------------------------------------------------------

VectorXcd FiniteModel::basis_vector(int spin_left, int spin_right) const {
    VectorXcd e = VectorXcd::Zero(Eigen::Index(dim));
    e(Eigen::Index(index(spin_left, spin_right))) = 1;
    return e;
}

FiniteModel build_model(const DiscretizedBath& bath, const BathSpec& spec, const TruncationSpec& t) {
    spec.validate();
    t.validate();
    if (bath.m_pos != t.m_pos) throw UsageError("build_model: bath and truncation disagree on m_pos");
    const std::size_t dim = t.dimension();
    if (dim > t.budget) {
        int n_fit = 0, m_fit = 0;
        while (TruncationSpec{t.m_pos, t.u_max, n_fit + 1, t.eta, t.budget}.dimension() <= t.budget) ++n_fit;
        while (TruncationSpec{m_fit + 1, t.u_max, t.n_max, t.eta, t.budget}.dimension() <= t.budget) ++m_fit;
        throw ConfigError("truncation: dimension 4(n_max+1)^(2 m_pos) = " +
                          (dim == std::numeric_limits<std::size_t>::max() ? std::string("overflow") : std::to_string(dim)) +
                          " exceeds the budget " + std::to_string(t.budget) + "; use n_max <= " +
                          std::to_string(n_fit) + " at m_pos = " + std::to_string(t.m_pos) + " or m_pos <= " +
                          std::to_string(m_fit) + " at n_max = " + std::to_string(t.n_max));
    }

    FiniteModel m;
    m.spec = spec;
    m.trunc = t;
    m.bath = bath;
    const int d = t.n_max + 1;
    const std::size_t M = bath.modes();
    m.mode_dim = std::size_t(d);
    m.dim = dim;
    const std::size_t D = dim / 4;
    auto op = [&] { return KronOperator(M, std::size_t(d)); };

    // calL0 is diagonal in the occupation basis.
    m.calL0_diag.resize(Eigen::Index(dim));
    std::vector<int> occ(M, 0);
    for (std::size_t idx = 0; idx < D; ++idx) {
        double e = 0;
        for (std::size_t j = 0; j < M; ++j) e += bath.u[j] * occ[j];
        for (int s = 0; s < 4; ++s) {
            const double sz_l = (s / 2 == 0) ? 1 : -1, sz_r = (s % 2 == 0) ? 1 : -1;
            m.calL0_diag(Eigen::Index(std::size_t(s) * D + idx)) = spec.eps / 2 * (sz_l - sz_r) + e;
        }
        for (std::size_t j = 0; j < M && ++occ[j] == d; ++j) occ[j] = 0;
    }
    m.calL0 = op();
    m.calL0.add_diagonal(m.calL0_diag.cast<cplx>());

    m.L0 = op();
    m.L0.add_scaled(m.calL0, 1.0);
    m.L0.add({-spec.delta / 2, sigma_x(), Matrix2cd::Identity(), {}});
    m.L0.add({spec.delta / 2, Matrix2cd::Identity(), sigma_x(), {}});

    const std::vector<cplx>& c = bath.c;
    const std::vector<cplx> ct = bath.tilde();
    auto weyl_modes = [&](const std::vector<cplx>& a, double sign) {
        std::vector<std::pair<int, MatrixXcd>> out;
        for (std::size_t j = 0; j < M; ++j) {
            if (a[j] == cplx(0)) continue;
            MatrixXcd w = weyl(sign * a[j], d);
            m.weyl_unitarity = std::max(m.weyl_unitarity, (w.adjoint() * w - MatrixXcd::Identity(d, d)).norm());
            out.emplace_back(int(j), std::move(w));
        }
        return out;
    };
    m.calV = op();
    m.calV.add({1.0, sigma_plus(), Matrix2cd::Identity(), weyl_modes(c, 1)});
    m.calV.add({1.0, sigma_minus(), Matrix2cd::Identity(), weyl_modes(c, -1)});
    m.JcalVJ = op();
    m.JcalVJ.add({1.0, Matrix2cd::Identity(), sigma_plus(), weyl_modes(ct, 1)});
    m.JcalVJ.add({1.0, Matrix2cd::Identity(), sigma_minus(), weyl_modes(ct, -1)});
    if (m.weyl_unitarity > 1e-6)
        throw EvaluationError("build_model: truncated Weyl operators deviate from unitarity by " +
                                  fmt17(m.weyl_unitarity) + "; increase n_max",
                              m.weyl_unitarity);
    m.I = op();
    m.I.add_scaled(m.calV, -0.5);
    m.I.add_scaled(m.JcalVJ, 0.5);

    // (q0/2) phi(h_beta) = phi(g) with g = i u c / 2; J phi(g) J = -phi(g~).
    std::vector<cplx> g(M), gt(M);
    for (std::size_t j = 0; j < M; ++j) g[j] = kI * bath.u[j] * c[j] / 2.0;
    for (std::size_t j = 0; j < M; ++j) gt[j] = std::conj(g[std::size_t(bath.mirror(int(j)))]);
    m.V = op();
    m.JVJ = op();
    for (std::size_t j = 0; j < M; ++j) {
        if (g[j] != cplx(0)) m.V.add({1.0, sigma_z(), Matrix2cd::Identity(), {{int(j), field(g[j], d)}}});
        if (gt[j] != cplx(0)) m.JVJ.add({-1.0, Matrix2cd::Identity(), sigma_z(), {{int(j), field(gt[j], d)}}});
    }
    m.L = op();
    m.L.add_scaled(m.L0, 1.0);
    m.L.add_scaled(m.V, 1.0);
    m.L.add_scaled(m.JVJ, -1.0);

    // U = exp(i[sz phi(f) + sz' phi(f~)]), f = c/2; diagonal in both spins.
    m.U = op();
    for (int sl = 0; sl < 2; ++sl)
        for (int sr = 0; sr < 2; ++sr) {
            const double zl = sl == 0 ? 1 : -1, zr = sr == 0 ? 1 : -1;
            std::vector<std::pair<int, MatrixXcd>> mats;
            for (std::size_t j = 0; j < M; ++j) {
                const cplx a = zl * c[j] / 2.0 + zr * ct[j] / 2.0;
                if (a != cplx(0)) mats.emplace_back(int(j), weyl(a, d));
            }
            m.U.add({1.0, projector(sl), projector(sr), std::move(mats)});
        }

    m.calL = op();
    m.calL.add_scaled(m.calL0, 1.0);
    m.calL.add_scaled(m.I, spec.delta);
    return m;
}

StructureReport structure_report(const FiniteModel& m) {
    StructureReport r;
    const std::size_t n = m.dim;
    r.calv_square_residual =
        hermitian_norm([&](const VectorXcd& x) { return VectorXcd(m.calV.apply(m.calV.apply(x)) - x); }, n);
    auto commutator_ratio = [&](const KronOperator& A, const KronOperator& B) {
        const double a = hermitian_norm(as_map(A), n);
        if (a == 0) return 0.0;
        const double c = hermitian_norm(
            [&](const VectorXcd& x) { return VectorXcd(kI * (A.apply(B.apply(x)) - B.apply(A.apply(x)))); }, n);
        return c / (a * a);
    };
    r.commutator_ratio = commutator_ratio(m.V, m.JVJ);
    r.calv_commutator_ratio = commutator_ratio(m.calV, m.JcalVJ);
    r.I_norm = hermitian_norm(as_map(m.I), n);
    auto sa = [&](const KronOperator& A) {
        const double a = hermitian_norm([&](const VectorXcd& x) { return VectorXcd((A.apply(x) + A.apply_adjoint(x)) / 2.0); }, n);
        const double d = hermitian_norm([&](const VectorXcd& x) { return VectorXcd(kI * (A.apply(x) - A.apply_adjoint(x))); }, n);
        return a > 0 ? d / a : d;
    };
    r.self_adjoint_L0 = sa(m.L0);
    r.self_adjoint_I = sa(m.I);
    r.self_adjoint_L = sa(m.L);
    r.weyl_unitarity = m.weyl_unitarity;
    return r;
}

double check_unitary_equivalence(const FiniteModel& m) {
    const double ref = hermitian_norm(as_map(m.calL), m.dim);
    const double res = hermitian_norm(
        [&](const VectorXcd& x) { return VectorXcd(m.U.apply(m.L.apply(m.U.apply_adjoint(x))) - m.calL.apply(x)); },
        m.dim);
    return ref > 0 ? res / ref : res;
}

// --- level-shift matrix --------------------------------------------------------

Eigen::Matrix2cd lso_finite(const FiniteModel& m, double eta) {
    if (!(eta > 0)) throw DomainError("lso_finite: eta must be > 0");
    const std::array<std::size_t, 2> idx{m.index(0, 0), m.index(1, 1)};
    std::array<VectorXcd, 2> y, x;
    for (int b = 0; b < 2; ++b) {
        y[b] = m.I.apply(m.basis_vector(b, b));
        for (auto i : idx) y[b](Eigen::Index(i)) = 0;
        x[b] = y[b].array() / (m.calL0_diag.cast<cplx>().array() - kI * eta);
    }
    Eigen::Matrix2cd out;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) out(a, b) = y[a].dot(x[b]);
    return out;
}

Eigen::Matrix2cd lso_factorized(const DiscretizedBath& bath, double eps, int n_max, double eta) {
    if (!(eta > 0)) throw DomainError("lso_factorized: eta must be > 0");
    if (n_max < 1) throw DomainError("lso_factorized: n_max must be >= 1");
    const int d = n_max + 1;
    const int m = bath.m_pos;
    const std::size_t M = bath.modes();
    const long off = long(n_max) * m * m;
    const std::vector<cplx>& c = bath.c;
    const std::vector<cplx> ct = bath.tilde();
    std::vector<long> step(M);
    for (int k = 0; k < m; ++k) {
        step[std::size_t(k)] = 2 * k + 1;
        step[std::size_t(k + m)] = -(2 * k + 1);
    }
    auto coherent = [&](const std::vector<cplx>& a, double sign) {
        std::vector<VectorXcd> v(M);
        for (std::size_t j = 0; j < M; ++j) v[j] = weyl(sign * a[j], d).col(0);
        return v;
    };
    const auto cp = coherent(c, 1), cm = coherent(c, -1), tp = coherent(ct, 1), tm = coherent(ct, -1);

    // <W(a) Omega, (dGamma - E - i eta)^{-1} W(b) Omega>
    auto pair = [&](const std::vector<VectorXcd>& va, const std::vector<VectorXcd>& vb, double E) {
        std::vector<cplx> w(std::size_t(2 * off + 1), 0.0), next(w.size());
        w[std::size_t(off)] = 1;
        long lo = off, hi = off; // occupied range
        for (std::size_t j = 0; j < M; ++j) {
            std::fill(next.begin(), next.end(), cplx(0));
            long nlo = lo, nhi = hi;
            for (int n = 0; n < d; ++n) {
                const cplx loc = std::conj(va[j](n)) * vb[j](n);
                if (loc == cplx(0)) continue;
                const long sh = n * step[j];
                for (long K = lo; K <= hi; ++K) next[std::size_t(K + sh)] += w[std::size_t(K)] * loc;
                nlo = std::min(nlo, lo + sh);
                nhi = std::max(nhi, hi + sh);
            }
            lo = nlo;
            hi = nhi;
            w.swap(next);
        }
        cplx s = 0;
        for (long K = lo; K <= hi; ++K)
            if (w[std::size_t(K)] != cplx(0)) s += w[std::size_t(K)] / (double(K - off) * bath.du / 2 - E - kI * eta);
        return s;
    };

    Eigen::Matrix2cd out;
    out(0, 0) = 0.25 * (pair(cm, cm, eps) + pair(tm, tm, -eps));
    out(1, 1) = 0.25 * (pair(cp, cp, -eps) + pair(tp, tp, eps));
    out(0, 1) = -0.25 * (pair(cm, tp, eps) + pair(tm, cp, -eps));
    out(1, 0) = -0.25 * (pair(cp, tm, -eps) + pair(tp, cm, eps));
    return out;
}

OracleReport run_oracle(const BathSpec& spec, const TruncationSpec& final_point, const OracleSchedule& schedule,
                        const std::optional<LsoEntries>& continuum, int jobs) {
    spec.validate();
    final_point.validate();
    if (schedule.etas.empty()) throw DomainError("oracle: empty eta schedule");
    for (std::size_t i = 0; i < schedule.etas.size(); ++i) {
        if (!(schedule.etas[i] > 0)) throw DomainError("oracle: eta values must be > 0");
        if (i > 0 && !(schedule.etas[i] < schedule.etas[i - 1]))
            throw DomainError("oracle: eta schedule must be strictly decreasing");
    }
    const double u_max = final_point.resolved_u_max(spec.beta);
    GlueGrid grid = default_glue_grid(spec.h, spec.beta);
    grid.u_max = std::max(grid.u_max, 1.01 * u_max);
    const GluedFunction f = coupling_function(spec, grid);

    OracleReport rep;
    const std::size_t np = schedule.etas.size();
    rep.points.resize(np);
    const double eta_last = schedule.etas.back();
    parallel_for(np, jobs, [&](std::size_t i) {
        TruncationSpec t = final_point;
        t.eta = schedule.etas[i];
        t.u_max = u_max;
        if (schedule.match_m_pos)
            t.m_pos = std::max(1, int(std::lround(final_point.m_pos * eta_last / t.eta)));
        const DiscretizedBath bath = discretize(f, t);
        const Eigen::Matrix2cd lam = lso_factorized(bath, spec.eps, t.n_max, t.eta);
        rep.points[i] = {t.eta, t.m_pos, u_max, t.n_max, lam(0, 0), lam(1, 1), lam(0, 1), lam(1, 0)};
    });

    auto entry = [&](std::size_t i, int e) {
        const auto& p = rep.points[i];
        return e == 0 ? p.x_plus : e == 1 ? p.x_minus : p.z;
    };
    std::array<cplx, 3> extrap{};
    for (int e = 0; e < 3; ++e) {
        double p = schedule.exponent.value_or(1.0 / 3);
        rep.fitted[std::size_t(e)] = false;
        if (np == 1) {
            extrap[std::size_t(e)] = entry(0, e);
            rep.exponents[std::size_t(e)] = p;
            continue;
        }
        const cplx dl = entry(np - 1, e) - entry(np - 2, e);
        const double r = schedule.etas[np - 2] / schedule.etas[np - 1];
        if (np >= 3 && !schedule.exponent) {
            const cplx d1 = entry(np - 2, e) - entry(np - 3, e);
            const double r1 = schedule.etas[np - 3] / schedule.etas[np - 2];
            if (std::abs(dl) > 0 && std::abs(d1) > std::abs(dl)) {
                p = std::clamp(std::log(std::abs(d1) / std::abs(dl)) / std::log(r1), 0.05, 4.0);
                rep.fitted[std::size_t(e)] = true;
            }
        }
        rep.exponents[std::size_t(e)] = p;
        extrap[std::size_t(e)] = entry(np - 1, e) + dl / (std::pow(r, p) - 1);
    }
    rep.x_plus = extrap[0];
    rep.x_minus = extrap[1];
    rep.z = extrap[2];
    for (const auto& v : extrap)
        if (std::abs(v) > 0) rep.max_real_fraction = std::max(rep.max_real_fraction, std::abs(v.real()) / std::abs(v));

    if (continuum) {
        rep.continuum = continuum;
        const std::array<cplx, 3> ref{continuum->x_plus, continuum->x_minus, continuum->z};
        rep.monotone = true;
        rep.within_target = true;
        for (int e = 0; e < 3; ++e) {
            const double scale = std::abs(ref[std::size_t(e)]);
            auto rel = [&](cplx v) { return scale > 0 ? std::abs(v - ref[std::size_t(e)]) / scale : std::abs(v); };
            auto& errs = rep.point_rel_err[std::size_t(e)];
            for (std::size_t i = 0; i < np; ++i) errs.push_back(rel(entry(i, e)));
            for (std::size_t i = 1; i < np; ++i)
                if (!(errs[i] < errs[i - 1])) rep.monotone = false;
            rep.extrapolated_rel_err[std::size_t(e)] = rel(extrap[std::size_t(e)]);
            if (!(rep.extrapolated_rel_err[std::size_t(e)] <= rep.target)) rep.within_target = false;
        }
    }
    return rep;
}

// --- KMS vector and Weyl sequences ---------------------------------------------

KmsResult kms_vector(const FiniteModel& m, double exponent_budget) {
    const double bound = m.calL0_diag.cwiseAbs().maxCoeff() + std::abs(m.spec.delta) / 2;
    const double beta = m.spec.beta;
    if (beta * bound > exponent_budget)
        throw EvaluationError("kms_vector: beta * ||calL0 - Delta calV/2|| = " + fmt17(beta * bound) +
                                  " exceeds the exponential budget; reduce beta or the truncation",
                              beta * bound);
    VectorXcd v = VectorXcd::Zero(Eigen::Index(m.dim));
    const Eigen::Vector2cd gibbs = gibbs_vector(beta, m.spec.eps);
    v(Eigen::Index(m.index(0, 0))) = gibbs(0);
    v(Eigen::Index(m.index(1, 1))) = gibbs(1);

    // A = -(beta/2)(calL0 - Delta calV/2), applied in s Taylor steps with ||A/s|| <= 1/2.
    const int s = std::max(1, int(std::ceil(beta * bound)));
    auto A = [&](const VectorXcd& x) {
        return VectorXcd(-(beta / 2) * (m.calL0.apply(x) - (m.spec.delta / 2) * m.calV.apply(x)) / double(s));
    };
    KmsResult out;
    for (int step = 0; step < s; ++step) {
        VectorXcd term = v, acc = v;
        for (int k = 1; k <= 60; ++k) {
            term = A(term) / double(k);
            acc += term;
            if (term.norm() <= 1e-17 * acc.norm()) break;
        }
        const double n = acc.norm();
        if (!std::isfinite(n) || n == 0)
            throw EvaluationError("kms_vector: exponential lost scale; reduce beta", n);
        out.log_growth += std::log(n);
        v = acc / n;
    }
    out.psi = v;
    out.residual = m.calL.apply(v).norm();
    return out;
}

std::vector<double> weyl_sequence_check(const FiniteModel& m, double s, int n_seq) {
    const double u_max = m.bath.du * m.bath.m_pos;
    if (!(std::abs(s) < u_max)) throw PreconditionError("weyl_sequence_check: |s| must be below u_max = " + fmt17(u_max));
    if (n_seq < 1) throw DomainError("weyl_sequence_check: n_seq must be >= 1");
    const KmsResult kms = kms_vector(m);
    const int d = int(m.mode_dim);
    const MatrixXcd adag = annihilation(d).adjoint();
    std::vector<double> out;
    for (int n = 1; n <= n_seq; ++n) {
        std::vector<int> sel;
        for (std::size_t j = 0; j < m.bath.modes(); ++j)
            if (std::abs(m.bath.u[j] - s) <= 1.0 / n) sel.push_back(int(j));
        if (sel.empty())
            throw PreconditionError("weyl_sequence_check: window [s-1/n, s+1/n] at n = " + std::to_string(n) +
                                    " contains no mode (spacing " + fmt17(m.bath.du) + ")");
        KronOperator create(m.bath.modes(), m.mode_dim);
        const double amp = 1 / std::sqrt(double(sel.size()));
        for (int j : sel) create.add({amp, Matrix2cd::Identity(), Matrix2cd::Identity(), {{j, adag}}});
        VectorXcd psi = create.apply(kms.psi);
        const double nrm = psi.norm();
        if (!(nrm > 0)) throw PreconditionError("weyl_sequence_check: a*(f_n) annihilates the KMS vector");
        psi /= nrm;
        out.push_back((m.calL.apply(psi) - s * psi).norm());
    }
    return out;
}

BathSpec standard_test_bath() {
    BathSpec s;
    s.beta = 1.0;
    s.eps = 1.0;
    s.delta = 0.1;
    s.q0 = 0.5;
    s.h = FormFactor::power_exp(1.0, Cutoff::exponential);
    return s;
}

TruncationSpec small_truncation(int n_max) {
    TruncationSpec t;
    t.m_pos = 2;
    t.u_max = 4.0;
    t.n_max = n_max;
    return t;
}

void write_coo(const KronOperator& op, std::ostream& os, double drop_tol) {
    const auto s = op.to_sparse(drop_tol);
    os << s.rows() << ' ' << s.cols() << ' ' << s.nonZeros() << '\n';
    for (Eigen::Index k = 0; k < s.outerSize(); ++k)
        for (Eigen::SparseMatrix<cplx>::InnerIterator it(s, k); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << fmt17(it.value().real()) << ' ' << fmt17(it.value().imag())
               << '\n';
}

} // namespace sb
