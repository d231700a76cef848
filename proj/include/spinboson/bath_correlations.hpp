// bath_correlations.hpp: Bath kernels Q1, Q2, Qz and their tabulation
//
// All kernels exclude the q0^2/pi prefactor:
//   Q1(t) = int J/w^2 sin(wt)
//   Q2(t) = int J/w^2 (1 - cos wt) coth(beta w/2)
//   Qz(t) = int J/w^2 [cosh(beta w/2) - cos wt] / sinh(beta w/2)
// Qz is evaluated as int J/w^2 [tanh(beta w/4) + 2 sin^2(wt/2) / sinh(beta w/2)].

#pragma once

#include "spinboson/spectral_density.hpp"

#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace sb {

struct KernelValue {
    double value{0.0};
    double err{0.0};
};

struct KernelTriple {
    KernelValue q1, q2, qz;
};

struct QuadratureOptions {
    double rel_tol{1e-11};
    double abs_tol{1e-15}; // relative to int |J/w^2| coth
    int max_extra_levels{6};
};

// Evaluates the three kernels for one (J, beta). Node data for each panel
// level is built once and shared; evaluation is thread-safe.
class KernelEvaluator {
public:
    KernelEvaluator(SpectralDensity J, double beta, QuadratureOptions opts = {});

    KernelTriple eval(double t) const;
    KernelValue q1(double t) const { return eval(t).q1; }
    KernelValue q2(double t) const { return eval(t).q2; }
    KernelValue qz(double t) const { return eval(t).qz; }

    // int J/w^2 coth(beta w/2): the common limit of Q2 and Qz when finite.
    double plateau() const { return plateau_; }
    double ir_exponent() const { return ir_exponent_; }
    double beta() const { return beta_; }
    const SpectralDensity& density() const { return J_; }
    double omega_max() const { return omega_max_; }

private:
    struct Level {
        std::size_t panels{0};
        double width{0.0};
        std::vector<double> offset;   // graded nodes: w; uniform panels: w minus the panel edge
        std::vector<double> wk, wg;   // Kronrod / Gauss weights with Jacobian
        std::vector<double> g1, g1coth, g1tanh, g1csch;
    };
    const Level& level(int k) const;
    int base_level(double t) const;

    SpectralDensity J_;
    double beta_;
    QuadratureOptions opts_;
    double omega_max_{0.0};
    double ir_exponent_{0.0};
    double plateau_{std::numeric_limits<double>::infinity()};
    double scale_abs_{0.0};
    mutable std::mutex mu_;
    mutable std::vector<std::unique_ptr<Level>> levels_;
};

// Throws PreconditionError unless the infrared exponent of J is > min_exponent.
void require_infrared(const SpectralDensity& J, double min_exponent, const char* op);

KernelValue q1(const BathSpec& spec, double t);
KernelValue q2(const BathSpec& spec, double t);
KernelValue qz(const BathSpec& spec, double t);
KernelValue q1(const SpectralDensity& J, double beta, double t);
KernelValue q2(const SpectralDensity& J, double beta, double t);
KernelValue qz(const SpectralDensity& J, double beta, double t);

struct KernelTail {
    double q2_slope{0.0};  // large-t slope of Q2, >= 0
    double q1_limit{0.0};  // large-t limit of Q1
    double plateau{std::numeric_limits<double>::infinity()}; // Q2(inf) when finite
    double ir_exponent{0.0};
};

// Kernels on Chebyshev-Lobatto panels (adjacent panels share endpoints).
// Panel breakpoints are geometric near t = 0, then uniform.
struct KernelTable {
    std::vector<double> t, q1, q2, qz, err1, err2, errz;
    std::size_t nodes_per_panel{1};
    KernelTail tail;
    double beta{1.0};
    std::string source; // description of J and beta used for the cache key

    std::size_t size() const { return t.size(); }
    double t_max() const { return t.empty() ? 0.0 : t.back(); }
    std::size_t panels() const;

    struct Sample {
        double q1, q2, qz;
    };
    // Barycentric interpolation inside the table; throws DomainError beyond t_max.
    Sample at(double t) const;
};

struct TableOptions {
    double t_max{300.0};
    std::size_t n{0};             // total points; 0 picks one panel per 2 time units
    std::size_t nodes_per_panel{25};
    int jobs{1};
    std::string cache_dir;        // empty disables caching
    QuadratureOptions quad{};
};

KernelTable tabulate_kernels(const SpectralDensity& J, double beta, const TableOptions& opts);
KernelTable tabulate_kernels(const BathSpec& spec, double t_max, std::size_t n);
KernelTable tabulate_kernels(const BathSpec& spec, const TableOptions& opts);

// Cache key: content hash over J, beta, grid and quadrature parameters.
std::string table_key(const SpectralDensity& J, double beta, const TableOptions& opts);

std::string table_to_csv(const KernelTable& table);
void save_table(const KernelTable& table, const std::string& csv_path, const std::string& key);
// Returns false if the files are missing or the sidecar key does not match.
bool load_table(const std::string& csv_path, const std::string& key, KernelTable& out);

} // namespace sb
