// spectral_density.hpp: Form factors, spectral density J(omega), the
// positive-temperature glueing map and the Condition (A_alpha) check

#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

namespace sb {

using cplx = std::complex<double>;

inline constexpr double kAngularFactor = 4.0 * std::numbers::pi; // |S^2|

enum class Cutoff { exponential, gaussian };

// h(omega) = omega^p * exp(-omega) or omega^p * exp(-omega^2)
struct PowerExp {
    double p{1.0};
    Cutoff cutoff{Cutoff::exponential};
};

// Linear interpolation on an ascending grid, zero outside [grid.front(), grid.back()].
struct TabulatedForm {
    std::vector<double> grid;
    std::vector<double> values;
};

// Radially symmetric form factor h(k) = h(|k|).
class FormFactor {
public:
    using Family = std::variant<PowerExp, TabulatedForm>;

    FormFactor() = default;
    static FormFactor power_exp(double p, Cutoff cutoff);
    static FormFactor tabulated(std::vector<double> grid, std::vector<double> values);
    static FormFactor zero();

    double operator()(double omega) const;

    // Radius beyond which h is negligible (used to size default grids).
    double support_scale() const;

    // Canonical text form; stable across runs and used for content hashes.
    std::string describe() const;

    const Family& family() const { return family_; }
    bool is_zero() const;

private:
    explicit FormFactor(Family f) : family_(std::move(f)) {}
    Family family_{PowerExp{}};
};

// Physical parameters of one problem instance.
struct BathSpec {
    double beta{1.0};  // inverse temperature
    double eps{0.0};   // detuning
    double delta{0.0}; // tunneling matrix element
    double q0{0.0};    // coupling constant
    FormFactor h{};

    void validate() const; // throws DomainError
    std::string describe() const;
};

// J(omega) = (pi/2) omega^2 * 4pi |h(omega)|^2.
double eval_J(const FormFactor& h, double omega);

// Spectral density as seen by the kernel quadratures. Usually derived from a
// form factor; tests and the CLI may also inject J directly (e.g. ohmic J,
// which has no L^2 glued coupling function but well-defined kernels).
class SpectralDensity {
public:
    static SpectralDensity from_form_factor(const FormFactor& h);
    // J(omega) = eta * omega^s * exp(-omega / omega_c)
    static SpectralDensity power_law(double eta, double s, double omega_c);
    static SpectralDensity custom(std::function<double(double)> J, double scale, std::string tag);

    double operator()(double omega) const { return J_(omega); }
    double scale() const { return scale_; }
    // Frequency beyond which J stays below 1e-16 of its peak.
    double support_end() const { return support_end_; }
    double peak() const { return peak_; }
    const std::string& tag() const { return tag_; }

private:
    SpectralDensity(std::function<double(double)> J, double scale, std::string tag);
    std::function<double(double)> J_;
    double scale_{1.0};
    double support_end_{0.0};
    double peak_{0.0};
    std::string tag_;
};

// Least-squares slope of log J against log omega over the lowest decade of the
// sampling range. Returns +infinity when J vanishes there.
double infrared_exponent(const FormFactor& h);
double infrared_exponent(const SpectralDensity& J);

// --- glueing ---------------------------------------------------------------

using RadialFunction = std::function<cplx(double)>;

// Uniform midpoint grid on [-u_max, u_max]; n even, so u = 0 is never sampled.
struct GlueGrid {
    double u_max{40.0};
    std::size_t n{std::size_t{1} << 14};
};

GlueGrid default_glue_grid(const FormFactor& h, double beta);

// u / (1 - exp(-beta u)), with its Taylor series near u = 0.
double thermal_weight(double u, double beta);

// Samples of a function on R x S^2 after angular reduction.
struct GluedFunction {
    std::vector<double> grid;
    std::vector<cplx> values;
    std::vector<double> weights;
    double angular_factor{kAngularFactor};
    double beta{1.0};
    RadialFunction source; // generating radial function; empty if not resamplable

    std::size_t size() const { return grid.size(); }
    double norm() const;
    // <this, other> on the common grid, including the angular factor.
    cplx inner(const GluedFunction& other) const;
    bool is_uniform(double rel_tol = 1e-9) const;
    bool is_symmetric(double rel_tol = 1e-9) const;
    // Same source resampled on a grid of twice the extent and twice the resolution.
    GluedFunction refined() const;
};

// f_beta(u) = sqrt(u/(1-e^{-beta u})) |u|^{1/2} { f(u), u >= 0; -conj f(-u), u < 0 }
cplx glued_value(const RadialFunction& f, double beta, double u);
GluedFunction glue(const RadialFunction& f, double beta, const GlueGrid& grid);

// f_beta = glue(-(i/2) q0 h/u, beta).
GluedFunction coupling_function(const BathSpec& spec, const GlueGrid& grid);
GluedFunction coupling_function(const BathSpec& spec);

// (i h/u)_beta, the function entering Condition (A_alpha).
GluedFunction regularity_function(const FormFactor& h, double beta, const GlueGrid& grid);

// max_u |conj g(-u) + e^{-beta u/2} g(u)| / max|g| (0 for g == 0).
double sign_relation_residual(const GluedFunction& g);

// --- Condition (A_alpha) ----------------------------------------------------

struct RegularityResult {
    double value{0.0};
    bool converged{false};
};

// ||(1 + |xi|^alpha) g^(xi)||_{L^2} from the DFT of the samples on g's own grid.
double regularity_value(const GluedFunction& g, double alpha);

// Value plus a convergence flag: stable to 1% under one simultaneous doubling
// of resolution and extent. Without a source the comparison runs against the
// half-resolution, half-extent subsample instead.
RegularityResult regularity_norm(const GluedFunction& g, double alpha);

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

struct ConditionReport {
    Verdict verdict{Verdict::inconclusive};
    double alpha{0.0};
    std::vector<double> values;      // norm estimate per refinement level
    std::vector<std::size_t> sizes;  // grid size per level
    std::vector<double> extents;     // u_max per level
    std::string note;
};

ConditionReport check_condition_A(const BathSpec& spec, double alpha, int refinement_budget = 3);
ConditionReport check_condition_A(const FormFactor& h, double beta, double alpha,
                                  int refinement_budget = 3);

} // namespace sb
