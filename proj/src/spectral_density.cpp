// spectral_density.cpp

#include "spinboson/spectral_density.hpp"

#include "spinboson/errors.hpp"
#include "spinboson/textio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>

namespace sb {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW's planner is not reentrant; execution on distinct arrays is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

double fit_log_slope(const std::function<double(double)>& J, double lo, double hi) {
    constexpr int kSamples = 32;
    std::vector<double> xs, ys;
    for (int k = 0; k < kSamples; ++k) {
        const double w = lo * std::pow(hi / lo, double(k) / (kSamples - 1));
        const double v = J(w);
        if (v > 0 && std::isfinite(v)) {
            xs.push_back(std::log(w));
            ys.push_back(std::log(v));
        }
    }
    if (xs.size() < 2) return std::numeric_limits<double>::infinity();
    const double n = double(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

void require_finite(double x, const char* name) {
    if (!std::isfinite(x)) throw DomainError(std::string(name) + " must be finite");
}

} // namespace

// --- FormFactor ---------------------------------------------------------------

FormFactor FormFactor::power_exp(double p, Cutoff cutoff) {
    if (!(p > 0) || !std::isfinite(p)) throw DomainError("power_exp: p must be finite and > 0");
    return FormFactor(PowerExp{p, cutoff});
}

FormFactor FormFactor::tabulated(std::vector<double> grid, std::vector<double> values) {
    if (grid.size() != values.size() || grid.size() < 2)
        throw DomainError("tabulated form factor: need >= 2 points and matching lengths");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        require_finite(grid[i], "tabulated grid");
        require_finite(values[i], "tabulated value");
        if (grid[i] < 0) throw DomainError("tabulated form factor: grid must be >= 0");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw DomainError("tabulated form factor: grid must be strictly ascending");
    }
    return FormFactor(TabulatedForm{std::move(grid), std::move(values)});
}

FormFactor FormFactor::zero() { return FormFactor(TabulatedForm{{0.0, 1.0}, {0.0, 0.0}}); }

double FormFactor::operator()(double omega) const {
    if (omega < 0 || std::isnan(omega)) throw DomainError("form factor evaluated at negative frequency");
    if (const auto* pe = std::get_if<PowerExp>(&family_)) {
        if (omega == 0) return 0.0;
        const double damp = pe->cutoff == Cutoff::exponential ? std::exp(-omega) : std::exp(-omega * omega);
        if (damp == 0) return 0.0;
        return std::pow(omega, pe->p) * damp;
    }
    const auto& t = std::get<TabulatedForm>(family_);
    if (omega < t.grid.front() || omega > t.grid.back()) return 0.0;
    const auto it = std::upper_bound(t.grid.begin(), t.grid.end(), omega);
    if (it == t.grid.end()) return t.values.back();
    const std::size_t j = std::size_t(it - t.grid.begin());
    const double x0 = t.grid[j - 1], x1 = t.grid[j];
    const double s = (omega - x0) / (x1 - x0);
    return (1 - s) * t.values[j - 1] + s * t.values[j];
}

double FormFactor::support_scale() const {
    if (const auto* pe = std::get_if<PowerExp>(&family_))
        return pe->cutoff == Cutoff::exponential ? 40.0 + 2.0 * pe->p : 6.5 + std::sqrt(pe->p);
    return std::get<TabulatedForm>(family_).grid.back();
}

std::string FormFactor::describe() const {
    if (const auto* pe = std::get_if<PowerExp>(&family_))
        return "power_exp(p=" + fmt17(pe->p) +
               ",cutoff=" + (pe->cutoff == Cutoff::exponential ? "exponential" : "gaussian") + ")";
    const auto& t = std::get<TabulatedForm>(family_);
    std::string body;
    for (std::size_t i = 0; i < t.grid.size(); ++i) body += fmt17(t.grid[i]) + ":" + fmt17(t.values[i]) + ";";
    return "tabulated(n=" + std::to_string(t.grid.size()) + ",hash=" + content_hash(body) + ")";
}

bool FormFactor::is_zero() const {
    if (std::holds_alternative<PowerExp>(family_)) return false;
    const auto& v = std::get<TabulatedForm>(family_).values;
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0; });
}

// --- BathSpec -----------------------------------------------------------------

void BathSpec::validate() const {
    require_finite(beta, "beta");
    require_finite(eps, "eps");
    require_finite(delta, "delta");
    require_finite(q0, "q0");
    if (!(beta > 0)) throw DomainError("beta must be > 0");
}

std::string BathSpec::describe() const {
    return "beta=" + fmt17(beta) + ";eps=" + fmt17(eps) + ";delta=" + fmt17(delta) + ";q0=" + fmt17(q0) +
           ";h=" + h.describe();
}

double eval_J(const FormFactor& h, double omega) {
    if (omega < 0 || std::isnan(omega)) throw DomainError("eval_J: omega must be >= 0");
    const double hv = h(omega);
    return 0.5 * kPi * omega * omega * kAngularFactor * hv * hv;
}

// --- SpectralDensity ----------------------------------------------------------

SpectralDensity::SpectralDensity(std::function<double(double)> J, double scale, std::string tag)
    : J_(std::move(J)), scale_(scale), tag_(std::move(tag)) {
    if (!(scale_ > 0) || !std::isfinite(scale_)) throw DomainError("spectral density scale must be > 0");
    // Log scan over 1e-6..1e6 scale to locate the peak and the numerical support.
    constexpr int kScan = 2400;
    std::vector<double> ws(kScan + 1), vs(kScan + 1);
    for (int k = 0; k <= kScan; ++k) {
        ws[k] = scale_ * std::pow(10.0, -6.0 + 12.0 * k / kScan);
        vs[k] = J_(ws[k]);
        if (!std::isfinite(vs[k]) || vs[k] < 0)
            throw EvaluationError("spectral density not finite and nonnegative", ws[k]);
        peak_ = std::max(peak_, vs[k]);
    }
    if (peak_ == 0) return;
    for (int k = kScan; k >= 0; --k) {
        if (vs[k] >= 1e-16 * peak_) {
            support_end_ = ws[std::min(k + 1, kScan)];
            break;
        }
    }
}

SpectralDensity SpectralDensity::from_form_factor(const FormFactor& h) {
    double scale = 1.0;
    if (const auto* t = std::get_if<TabulatedForm>(&h.family())) scale = std::max(t->grid.back() / 10.0, 1e-300);
    return SpectralDensity([h](double w) { return eval_J(h, w); }, scale, "J[" + h.describe() + "]");
}

SpectralDensity SpectralDensity::power_law(double eta, double s, double omega_c) {
    if (!(eta >= 0) || !(s > 0) || !(omega_c > 0)) throw DomainError("power_law: need eta >= 0, s > 0, omega_c > 0");
    return SpectralDensity(
        [eta, s, omega_c](double w) { return w <= 0 ? 0.0 : eta * std::pow(w, s) * std::exp(-w / omega_c); },
        omega_c, "power_law(eta=" + fmt17(eta) + ",s=" + fmt17(s) + ",omega_c=" + fmt17(omega_c) + ")");
}

SpectralDensity SpectralDensity::custom(std::function<double(double)> J, double scale, std::string tag) {
    return SpectralDensity(std::move(J), scale, "custom(" + tag + ")");
}

double infrared_exponent(const FormFactor& h) {
    auto J = [&h](double w) { return eval_J(h, w); };
    if (const auto* t = std::get_if<TabulatedForm>(&h.family())) {
        const double lo = t->grid.front() > 0 ? t->grid.front() : 1e-4 * t->grid.back();
        const double hi = std::min(10 * lo, t->grid.back());
        if (!(hi > lo)) return std::numeric_limits<double>::infinity();
        return fit_log_slope(J, lo, hi);
    }
    return fit_log_slope(J, 1e-4, 1e-3);
}

double infrared_exponent(const SpectralDensity& J) {
    return fit_log_slope([&J](double w) { return J(w); }, 1e-4 * J.scale(), 1e-3 * J.scale());
}

// --- glueing ------------------------------------------------------------------

GlueGrid default_glue_grid(const FormFactor& h, double beta) {
    if (!(beta > 0)) throw DomainError("beta must be > 0");
    return GlueGrid{std::max(40.0 / beta, h.support_scale()), std::size_t{1} << 14};
}

double thermal_weight(double u, double beta) {
    const double x = beta * u;
    if (std::abs(x) < 1e-4) return (1.0 + x / 2 + x * x / 12) / beta;
    if (u > 0) return u / -std::expm1(-x);
    return -u / std::expm1(-x);
}

cplx glued_value(const RadialFunction& f, double beta, double u) {
    const double a = std::abs(u);
    const cplx fv = u >= 0 ? f(a) : -std::conj(f(a));
    if (!std::isfinite(fv.real()) || !std::isfinite(fv.imag()))
        throw EvaluationError("glue: function not finite at u = " + fmt17(u), u);
    const double w = std::sqrt(thermal_weight(u, beta) * a);
    if (w == 0) return 0.0;
    return w * fv;
}

GluedFunction glue(const RadialFunction& f, double beta, const GlueGrid& grid) {
    if (!(beta > 0) || !std::isfinite(beta)) throw DomainError("glue: beta must be > 0");
    if (grid.n < 2 || grid.n % 2 != 0) throw DomainError("glue: grid size must be even and >= 2");
    if (!(grid.u_max > 0) || !std::isfinite(grid.u_max)) throw DomainError("glue: u_max must be > 0");
    GluedFunction g;
    g.beta = beta;
    g.source = f;
    const double du = 2 * grid.u_max / double(grid.n);
    g.grid.resize(grid.n);
    g.values.resize(grid.n);
    g.weights.assign(grid.n, du);
    // Fill the positive half and mirror, so the grid is exactly symmetric.
    const std::size_t half = grid.n / 2;
    for (std::size_t j = 0; j < half; ++j) {
        const double u = (double(j) + 0.5) * du;
        g.grid[half + j] = u;
        g.grid[half - 1 - j] = -u;
        g.values[half + j] = glued_value(f, beta, u);
        g.values[half - 1 - j] = glued_value(f, beta, -u);
    }
    // Glued integrands such as |f_beta|^2 have a kink at u = 0, which is a cell
    // edge. Cancel the leading midpoint error -(du^2/24)[f'] there with a
    // one-sided quadratic derivative estimate on each side.
    if (half >= 3) {
        for (int side : {1, -1}) {
            auto at = [&](std::size_t j) -> double& {
                return side > 0 ? g.weights[half + j] : g.weights[half - 1 - j];
            };
            at(0) += 2 * du / 24;
            at(1) -= 3 * du / 24;
            at(2) += du / 24;
        }
    }
    return g;
}

GluedFunction coupling_function(const BathSpec& spec, const GlueGrid& grid) {
    spec.validate();
    if (spec.q0 == 0 || spec.h.is_zero()) {
        return glue([](double) { return cplx{}; }, spec.beta, grid);
    }
    // |f_beta|^2 ~ u^{-1} |h|^2 near 0, i.e. J(u) u^{-3}; square-integrable iff J ~ u^s with s > 2.
    const double s = infrared_exponent(spec.h);
    if (!(s > 2.01))
        throw PreconditionError("coupling_function: infrared divergence, fitted exponent of J is " + fmt17(s) +
                                " (need > 2)");
    const FormFactor h = spec.h;
    const double q0 = spec.q0;
    return glue([h, q0](double u) { return cplx(0.0, -0.5 * q0) * (h(u) / u); }, spec.beta, grid);
}

GluedFunction coupling_function(const BathSpec& spec) {
    return coupling_function(spec, default_glue_grid(spec.h, spec.beta));
}

GluedFunction regularity_function(const FormFactor& h, double beta, const GlueGrid& grid) {
    return glue([h](double u) { return cplx(0.0, 1.0) * (h(u) / u); }, beta, grid);
}

double sign_relation_residual(const GluedFunction& g) {
    double gmax = 0;
    for (const auto& v : g.values) gmax = std::max(gmax, std::abs(v));
    if (gmax == 0) return 0.0;
    const std::size_t n = g.size();
    double worst = 0;
    for (std::size_t i = n / 2; i < n; ++i) {
        const double u = g.grid[i];
        const std::size_t m = n - 1 - i;
        if (std::abs(g.grid[m] + u) > 1e-9 * std::max(1.0, std::abs(u)))
            throw UsageError("sign_relation_residual: grid is not symmetric");
        const cplx r = std::conj(g.values[m]) + std::exp(-g.beta * u / 2) * g.values[i];
        worst = std::max(worst, std::abs(r));
    }
    return worst / gmax;
}

double GluedFunction::norm() const {
    double s = 0;
    for (std::size_t i = 0; i < size(); ++i) s += weights[i] * std::norm(values[i]);
    return std::sqrt(angular_factor * s);
}

cplx GluedFunction::inner(const GluedFunction& other) const {
    if (other.size() != size()) throw UsageError("inner: grids differ");
    cplx s{};
    for (std::size_t i = 0; i < size(); ++i) {
        if (std::abs(grid[i] - other.grid[i]) > 1e-12 * std::max(1.0, std::abs(grid[i])))
            throw UsageError("inner: grids differ");
        s += weights[i] * std::conj(values[i]) * other.values[i];
    }
    return angular_factor * s;
}

bool GluedFunction::is_uniform(double rel_tol) const {
    if (size() < 2) return true;
    const double du = grid[1] - grid[0];
    for (std::size_t i = 1; i < size(); ++i)
        if (std::abs(grid[i] - grid[i - 1] - du) > rel_tol * std::abs(du) * 1e3) return false;
    return true;
}

bool GluedFunction::is_symmetric(double rel_tol) const {
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(grid[i] + grid[n - 1 - i]) > rel_tol * std::max(1.0, std::abs(grid[i]))) return false;
    return true;
}

GluedFunction GluedFunction::refined() const {
    if (!source) throw UsageError("refined: glued function has no source");
    const double u_max = grid.empty() ? 1.0 : -grid.front() + 0.5 * (grid[1] - grid[0]);
    GluedFunction g = glue(source, beta, GlueGrid{2 * u_max, 4 * size()});
    g.angular_factor = angular_factor;
    return g;
}

// --- Condition (A_alpha) --------------------------------------------------------

double regularity_value(const GluedFunction& g, double alpha) {
    if (!(alpha >= 0)) throw DomainError("regularity_norm: alpha must be >= 0");
    if (!g.is_uniform()) throw UsageError("regularity_norm: grid must be uniform");
    const std::size_t n = g.size();
    if (n < 2) return 0.0;
    if (std::all_of(g.values.begin(), g.values.end(), [](cplx v) { return v == cplx{}; })) return 0.0;
    const double du = g.grid[1] - g.grid[0];

    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(int(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n; ++i) {
        buf[i][0] = g.values[i].real();
        buf[i][1] = g.values[i].imag();
    }
    fftw_execute(plan);
    // ||(1+|xi|^a) g^||^2 = sum_k (1+|xi_k|^a)^2 du^2 |G_k|^2 / (2 pi) * dxi, dxi = 2 pi / (n du)
    const double dxi = 2 * kPi / (double(n) * du);
    double s = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double idx = k < n / 2 ? double(k) : double(k) - double(n);
        const double xi = std::abs(idx) * dxi;
        const double wgt = 1.0 + std::pow(xi, alpha);
        s += wgt * wgt * (buf[k][0] * buf[k][0] + buf[k][1] * buf[k][1]);
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);
    return std::sqrt(g.angular_factor * s * du / double(n));
}

RegularityResult regularity_norm(const GluedFunction& g, double alpha) {
    const double v = regularity_value(g, alpha);
    if (v == 0 && !g.source) return {0.0, true};
    double other;
    if (g.source) {
        other = regularity_value(g.refined(), alpha);
    } else {
        // Half resolution over the central half of the domain.
        GluedFunction c;
        c.angular_factor = g.angular_factor;
        c.beta = g.beta;
        const double u_half = 0.5 * std::max(-g.grid.front(), g.grid.back());
        for (std::size_t i = 0; i < g.size(); i += 2) {
            if (std::abs(g.grid[i]) > u_half) continue;
            c.grid.push_back(g.grid[i]);
            c.values.push_back(g.values[i]);
            c.weights.push_back(2 * g.weights[i]);
        }
        other = regularity_value(c, alpha);
    }
    const double scale = std::max(std::abs(v), std::abs(other));
    const bool converged = scale == 0 || std::abs(v - other) <= 0.01 * scale;
    return {v, converged};
}

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

ConditionReport check_condition_A(const FormFactor& h, double beta, double alpha, int refinement_budget) {
    ConditionReport rep;
    rep.alpha = alpha;
    if (!(beta > 0) || !std::isfinite(beta)) {
        rep.note = "beta must be > 0";
        return rep;
    }
    if (h.is_zero()) {
        rep.verdict = Verdict::pass;
        rep.values = {0.0};
        rep.note = "zero form factor";
        return rep;
    }
    // Refine until the value is stable to 1% under one doubling of resolution
    // and extent, or the budget runs out.
    const int levels = std::max(1, refinement_budget) + 1;
    GlueGrid grid = default_glue_grid(h, beta);
    auto& v = rep.values;
    try {
        for (int l = 0; l < levels; ++l) {
            const GluedFunction g = regularity_function(h, beta, grid);
            v.push_back(regularity_value(g, alpha));
            rep.sizes.push_back(grid.n);
            rep.extents.push_back(grid.u_max);
            grid.u_max *= 2;
            grid.n *= 4;
            if (!std::isfinite(v.back())) break;
            const std::size_t m = v.size();
            if (m >= 2 && std::abs(v[m - 1] - v[m - 2]) <= 0.01 * std::max(v[m - 1], v[m - 2])) {
                rep.verdict = Verdict::pass;
                rep.note = "stable to 1% under doubling of resolution and extent";
                return rep;
            }
        }
    } catch (const EvaluationError& e) {
        rep.verdict = Verdict::fail;
        rep.note = std::string("(ih/u)_beta not finite on the grid: ") + e.what();
        return rep;
    }
    if (!std::isfinite(v.back())) {
        rep.verdict = Verdict::fail;
        rep.note = "norm not finite";
        return rep;
    }
    // Divergence: every increment exceeds 1% and increments do not shrink.
    bool growing = v.size() >= 3;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const double d = v[i + 1] - v[i];
        if (!(d > 0.01 * v[i + 1])) growing = false;
        if (i > 0 && d < 0.95 * (v[i] - v[i - 1])) growing = false;
    }
    if (growing) {
        rep.verdict = Verdict::fail;
        rep.note = "norm grows under refinement without shrinking increments";
    } else {
        rep.note = "neither convergence nor divergence established within the refinement budget";
    }
    return rep;
}

ConditionReport check_condition_A(const BathSpec& spec, double alpha, int refinement_budget) {
    spec.validate();
    return check_condition_A(spec.h, spec.beta, alpha, refinement_budget);
}

} // namespace sb
