// bath_correlations.cpp

#include "spinboson/bath_correlations.hpp"

#include "spinboson/errors.hpp"
#include "spinboson/parallel.hpp"
#include "spinboson/textio.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sb {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kGraded = 30;       // geometric sub-panels inside the first panel
constexpr int kReseed = 32;       // exact phase every kReseed panels

// 15 Kronrod nodes on [-1, 1] with the embedded 7-point Gauss weights (0 off-grid).
struct Rule {
    std::array<double, 15> x{}, wk{}, wg{};
};

const Rule& gk15() {
    static const Rule r = [] {
        using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
        using G = boost::math::quadrature::gauss<double, 7>;
        const auto& ax = GK::abscissa();
        const auto& wk = GK::weights();
        const auto& wg = G::weights();
        Rule out;
        // ax[0] = 0; Gauss nodes are ax[0], ax[2], ax[4], ax[6].
        out.x[7] = 0.0;
        out.wk[7] = wk[0];
        out.wg[7] = wg[0];
        for (int i = 1; i < 8; ++i) {
            out.x[7 + i] = ax[i];
            out.x[7 - i] = -ax[i];
            out.wk[7 + i] = out.wk[7 - i] = wk[i];
            const double g = (i % 2 == 0) ? wg[i / 2] : 0.0;
            out.wg[7 + i] = out.wg[7 - i] = g;
        }
        return out;
    }();
    return r;
}

// coth(x), tanh(x/2), 1/sinh(x) for x = beta w / 2 > 0.
struct Thermal {
    double coth, tanh_half, csch;
};

Thermal thermal(double x) {
    if (x < 1e-4) {
        return {1.0 / x + x / 3.0, x / 2.0 - x * x * x / 24.0, 1.0 / x - x / 6.0};
    }
    if (x > 350) return {1.0, 1.0, 2.0 * std::exp(-x)};
    const double em = std::exp(-x);
    const double em2 = em * em;
    return {(1 + em2) / (1 - em2), std::tanh(x / 2), 2 * em / (1 - em2)};
}

} // namespace

void require_infrared(const SpectralDensity& J, double min_exponent, const char* op) {
    if (J.peak() == 0) return;
    const double s = infrared_exponent(J);
    if (!(s > min_exponent))
        throw PreconditionError(std::string(op) + ": infrared exponent of J is " + fmt17(s) + ", need > " +
                                fmt17(min_exponent));
}

KernelEvaluator::KernelEvaluator(SpectralDensity J, double beta, QuadratureOptions opts)
    : J_(std::move(J)), beta_(beta), opts_(opts) {
    if (!(beta_ > 0) || !std::isfinite(beta_)) throw DomainError("kernels: beta must be > 0");
    omega_max_ = J_.support_end();
    if (omega_max_ == 0) {
        plateau_ = 0;
        ir_exponent_ = std::numeric_limits<double>::infinity();
        return;
    }
    ir_exponent_ = infrared_exponent(J_);
    require_infrared(J_, 0.0, "kernels");

    const Level& l4 = level(4);
    for (std::size_t i = 0; i < l4.wk.size(); ++i)
        scale_abs_ += std::abs(l4.wk[i]) * (std::abs(l4.g1[i]) + std::abs(l4.g1coth[i]));

    // |J/w^2| coth ~ w^{s-3} near 0: integrable iff s > 2.
    if (ir_exponent_ > 2.05) {
        boost::math::quadrature::tanh_sinh<double> ts;
        auto f = [this](double w) {
            if (w * w == 0) return 0.0;
            return J_(w) / (w * w) * thermal(beta_ * w / 2).coth;
        };
        plateau_ = ts.integrate(f, 0.0, omega_max_, 1e-13);
    }
}

const KernelEvaluator::Level& KernelEvaluator::level(int k) const {
    std::lock_guard lock(mu_);
    if (levels_.size() <= std::size_t(k)) levels_.resize(std::size_t(k) + 1);
    if (levels_[k]) return *levels_[k];

    auto lv = std::make_unique<Level>();
    const Rule& r = gk15();
    lv->panels = std::size_t{1} << k;
    lv->width = omega_max_ / double(lv->panels);
    const double h = lv->width;
    const std::size_t n = (kGraded + lv->panels - 1) * 15;
    lv->offset.reserve(n);
    lv->wk.reserve(n);
    lv->wg.reserve(n);
    for (auto* v : {&lv->g1, &lv->g1coth, &lv->g1tanh, &lv->g1csch}) v->reserve(n);

    auto add = [&](double a, double b, bool store_absolute) {
        const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
        for (int i = 0; i < 15; ++i) {
            const double w = c + hw * r.x[i];
            const double g = J_(w) / (w * w);
            const Thermal th = thermal(beta_ * w / 2);
            // Graded nodes keep their absolute position; uniform-panel nodes
            // store the offset from their panel's left edge.
            lv->offset.push_back(store_absolute ? w : w - std::floor(a / h + 0.5) * h);
            lv->wk.push_back(hw * r.wk[i]);
            lv->wg.push_back(hw * r.wg[i]);
            lv->g1.push_back(g);
            lv->g1coth.push_back(g * th.coth);
            lv->g1tanh.push_back(g * th.tanh_half);
            lv->g1csch.push_back(g * th.csch);
        }
    };
    double lo = h * std::ldexp(1.0, -(kGraded - 1));
    add(0.0, lo, true);
    for (int g = 1; g < kGraded; ++g) {
        add(lo, 2 * lo, true);
        lo *= 2;
    }
    for (std::size_t j = 1; j < lv->panels; ++j) add(double(j) * h, double(j + 1) * h, false);
    levels_[k] = std::move(lv);
    return *levels_[k];
}

int KernelEvaluator::base_level(double t) const {
    double cap = J_.scale() / 4;
    if (t > 0) cap = std::min(cap, kPi / (2 * t));
    int k = 4;
    while (omega_max_ / std::ldexp(1.0, k) > cap) ++k;
    return k;
}

KernelTriple KernelEvaluator::eval(double t) const {
    if (!(t >= 0) || !std::isfinite(t)) throw DomainError("kernels: t must be finite and >= 0");
    KernelTriple out;
    if (omega_max_ == 0) return out;
    const double eps = std::numeric_limits<double>::epsilon();

    const int k0 = base_level(t);
    for (int k = k0; k <= k0 + opts_.max_extra_levels; ++k) {
        const Level& lv = level(k);
        std::array<double, 3> K{}, A{}, err{};
        // Sums one panel with both rules; err collects |Kronrod - Gauss| per panel.
        auto run_panel = [&](std::size_t base, const std::complex<double>* phase, std::complex<double> rot) {
            std::array<double, 3> pk{}, pg{};
            for (std::size_t i = base; i < base + 15; ++i) {
                const std::complex<double> e =
                    phase ? phase[i - base] * rot : std::polar(1.0, lv.offset[i] * t / 2);
                const double s = e.imag(), c = e.real();
                const double two_s2 = 2 * s * s;
                const double f[3] = {lv.g1[i] * 2 * s * c, lv.g1coth[i] * two_s2,
                                     lv.g1tanh[i] + lv.g1csch[i] * two_s2};
                for (int q = 0; q < 3; ++q) {
                    pk[q] += lv.wk[i] * f[q];
                    pg[q] += lv.wg[i] * f[q];
                    A[q] += std::abs(lv.wk[i] * f[q]);
                }
            }
            for (int q = 0; q < 3; ++q) {
                K[q] += pk[q];
                err[q] += std::abs(pk[q] - pg[q]);
            }
        };

        for (int g = 0; g < kGraded; ++g) run_panel(std::size_t(g) * 15, nullptr, {});

        // Uniform panels: e^{i w t/2} = e^{i offset t/2} * e^{i j h t/2}.
        std::array<std::complex<double>, 15> base_phase;
        const std::size_t first = std::size_t(kGraded) * 15;
        for (int i = 0; i < 15; ++i) base_phase[i] = std::polar(1.0, lv.offset[first + i] * t / 2);
        const std::complex<double> step = std::polar(1.0, lv.width * t / 2);
        std::complex<double> rot = step; // panel j = 1
        for (std::size_t j = 1; j < lv.panels; ++j) {
            if (j % kReseed == 0) rot = std::polar(1.0, double(j) * lv.width * t / 2);
            run_panel(first + (j - 1) * 15, base_phase.data(), rot);
            rot *= step;
        }

        bool ok = true;
        KernelValue* outs[3] = {&out.q1, &out.q2, &out.qz};
        for (int q = 0; q < 3; ++q) {
            const double roundoff = 50 * eps * A[q] + 1e3 * eps * eps * A[q];
            const double tol = std::max({opts_.rel_tol * std::abs(K[q]), opts_.abs_tol * scale_abs_, roundoff});
            if (err[q] > tol) ok = false;
            *outs[q] = {K[q], err[q] + roundoff};
        }
        if (t == 0) {
            out.q1 = {0.0, 0.0};
            out.q2 = {0.0, 0.0};
        }
        if (ok) return out;
    }
    const double worst = std::max({out.q1.err, out.q2.err, out.qz.err});
    throw AccuracyError("kernels: quadrature did not converge at t = " + fmt17(t), out.q2.value, worst);
}

KernelValue q1(const SpectralDensity& J, double beta, double t) { return KernelEvaluator(J, beta).q1(t); }
KernelValue q2(const SpectralDensity& J, double beta, double t) { return KernelEvaluator(J, beta).q2(t); }
KernelValue qz(const SpectralDensity& J, double beta, double t) { return KernelEvaluator(J, beta).qz(t); }

KernelValue q1(const BathSpec& spec, double t) {
    spec.validate();
    return q1(SpectralDensity::from_form_factor(spec.h), spec.beta, t);
}
KernelValue q2(const BathSpec& spec, double t) {
    spec.validate();
    return q2(SpectralDensity::from_form_factor(spec.h), spec.beta, t);
}
KernelValue qz(const BathSpec& spec, double t) {
    spec.validate();
    return qz(SpectralDensity::from_form_factor(spec.h), spec.beta, t);
}

// --- tables -------------------------------------------------------------------

std::size_t KernelTable::panels() const {
    if (t.size() <= 1 || nodes_per_panel < 2) return 0;
    return (t.size() - 1) / (nodes_per_panel - 1);
}

KernelTable::Sample KernelTable::at(double tq) const {
    if (t.empty()) throw DomainError("kernel table is empty");
    if (tq < 0 || tq > t.back() * (1 + 1e-14) || std::isnan(tq))
        throw DomainError("kernel table evaluated outside [0, " + fmt17(t.back()) + "] at " + fmt17(tq));
    if (t.size() == 1) return {q1[0], q2[0], qz[0]};
    const std::size_t m = nodes_per_panel;
    const std::size_t np = panels();
    // Locate the panel by its left endpoint.
    std::size_t lo = 0, hi = np;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (t[mid * (m - 1)] <= tq) lo = mid;
        else hi = mid;
    }
    const std::size_t b = lo * (m - 1);
    // Second-kind barycentric formula on Chebyshev-Lobatto points.
    double num1 = 0, num2 = 0, numz = 0, den = 0;
    for (std::size_t j = 0; j < m; ++j) {
        const double d = tq - t[b + j];
        if (d == 0) return {q1[b + j], q2[b + j], qz[b + j]};
        double w = (j % 2 == 0) ? 1.0 : -1.0;
        if (j == 0 || j + 1 == m) w *= 0.5;
        const double c = w / d;
        num1 += c * q1[b + j];
        num2 += c * q2[b + j];
        numz += c * qz[b + j];
        den += c;
    }
    return {num1 / den, num2 / den, numz / den};
}

namespace {

std::vector<double> panel_breaks(double t_max, std::size_t panels) {
    // The first uniform panel [0, L] is split geometrically at L/2^g, g = geo..1.
    const std::size_t geo = std::min<std::size_t>(4, panels - 1);
    const double L = t_max / double(panels - geo);
    std::vector<double> b{0.0};
    for (std::size_t g = geo; g >= 1; --g) b.push_back(L * std::ldexp(1.0, -int(g)));
    for (std::size_t j = 1; j <= panels - geo; ++j) b.push_back(double(j) * L);
    b.back() = t_max;
    return b;
}

void fit_tail(KernelTable& tab, double plateau, double ir) {
    tab.tail.plateau = plateau;
    tab.tail.ir_exponent = ir;
    if (tab.size() < 8) return;
    const double t_hi = tab.t.back();
    const double t_lo = t_hi / 10;
    double n = 0, mx = 0, my = 0, m1 = 0;
    for (std::size_t i = 0; i < tab.size(); ++i) {
        if (tab.t[i] < t_lo) continue;
        n += 1;
        mx += tab.t[i];
        my += tab.q2[i];
        m1 += tab.q1[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < tab.size(); ++i) {
        if (tab.t[i] < t_lo) continue;
        sxy += (tab.t[i] - mx) * (tab.q2[i] - my);
        sxx += (tab.t[i] - mx) * (tab.t[i] - mx);
    }
    double slope = sxx > 0 ? sxy / sxx : 0.0;
    // A finite plateau means Q2 saturates; the fitted slope is then fit noise.
    if (std::isfinite(plateau) || slope < 0) slope = 0.0;
    tab.tail.q2_slope = slope;
    // Q1(inf) = (pi/2) lim J(w)/w, which vanishes for J ~ w^s with s > 1.
    tab.tail.q1_limit = ir > 1.05 ? 0.0 : m1 / n;
}

KernelTable build_table(const KernelEvaluator& ev, const TableOptions& opts) {
    KernelTable tab;
    tab.beta = ev.beta();
    std::size_t n = opts.n;
    if (!(opts.t_max >= 0) || !std::isfinite(opts.t_max)) throw DomainError("tabulate: t_max must be >= 0");
    const std::size_t m = std::max<std::size_t>(opts.nodes_per_panel, 2);
    if (n == 0) n = opts.t_max == 0 ? 1 : 1 + (m - 1) * std::max<std::size_t>(1, std::size_t(std::ceil(opts.t_max / 2)));
    if (n == 1 || opts.t_max == 0) {
        tab.t = {0.0};
        tab.nodes_per_panel = 1;
    } else {
        std::size_t mm = m;
        std::size_t panels = std::max<std::size_t>(1, (n - 1) / (mm - 1));
        if (n - 1 < mm - 1) {
            mm = n;
            panels = 1;
        }
        tab.nodes_per_panel = mm;
        const auto br = panel_breaks(opts.t_max, panels);
        for (std::size_t p = 0; p + 1 < br.size(); ++p) {
            const double a = br[p], b = br[p + 1];
            for (std::size_t j = (p == 0 ? 0 : 1); j < mm; ++j) {
                // Lobatto points in ascending order.
                const double x = -std::cos(kPi * double(j) / double(mm - 1));
                double tv = 0.5 * (a + b) + 0.5 * (b - a) * x;
                if (j == 0) tv = a;
                if (j + 1 == mm) tv = b;
                tab.t.push_back(tv);
            }
        }
    }
    const std::size_t N = tab.t.size();
    for (auto* v : {&tab.q1, &tab.q2, &tab.qz, &tab.err1, &tab.err2, &tab.errz}) v->assign(N, 0.0);
    parallel_for(N, opts.jobs, [&](std::size_t i) {
        const KernelTriple k = ev.eval(tab.t[i]);
        tab.q1[i] = k.q1.value;
        tab.q2[i] = k.q2.value;
        tab.qz[i] = k.qz.value;
        tab.err1[i] = k.q1.err;
        tab.err2[i] = k.q2.err;
        tab.errz[i] = k.qz.err;
    });
    fit_tail(tab, ev.plateau(), ev.ir_exponent());
    return tab;
}

} // namespace

std::string table_key(const SpectralDensity& J, double beta, const TableOptions& opts) {
    std::ostringstream s;
    s << "kernel-table;v=" << kToolVersion << ";J=" << J.tag() << ";beta=" << fmt17(beta)
      << ";t_max=" << fmt17(opts.t_max) << ";n=" << opts.n << ";m=" << opts.nodes_per_panel
      << ";rel=" << fmt17(opts.quad.rel_tol) << ";abs=" << fmt17(opts.quad.abs_tol)
      << ";lv=" << opts.quad.max_extra_levels;
    return content_hash(s.str());
}

std::string table_to_csv(const KernelTable& tab) {
    std::string out = "t,q1,q2,qz,err1,err2,errz\n";
    for (std::size_t i = 0; i < tab.size(); ++i) {
        out += fmt17(tab.t[i]) + ',' + fmt17(tab.q1[i]) + ',' + fmt17(tab.q2[i]) + ',' + fmt17(tab.qz[i]) + ',' +
               fmt17(tab.err1[i]) + ',' + fmt17(tab.err2[i]) + ',' + fmt17(tab.errz[i]) + '\n';
    }
    return out;
}

void save_table(const KernelTable& tab, const std::string& csv_path, const std::string& key) {
    nlohmann::ordered_json meta;
    meta["key"] = key;
    meta["source"] = tab.source;
    meta["beta"] = fmt17(tab.beta);
    meta["nodes_per_panel"] = tab.nodes_per_panel;
    meta["points"] = tab.size();
    meta["tail"] = {{"q2_slope", fmt17(tab.tail.q2_slope)},
                    {"q1_limit", fmt17(tab.tail.q1_limit)},
                    {"plateau", fmt17(tab.tail.plateau)},
                    {"ir_exponent", fmt17(tab.tail.ir_exponent)}};
    const std::string csv = table_to_csv(tab);
    meta["csv_hash"] = content_hash(csv);
    write_file_atomic(csv_path, csv);
    write_file_atomic(csv_path + ".json", meta.dump(2) + "\n");
}

bool load_table(const std::string& csv_path, const std::string& key, KernelTable& out) {
    namespace fs = std::filesystem;
    if (!fs::exists(csv_path) || !fs::exists(csv_path + ".json")) return false;
    try {
        const auto meta = nlohmann::json::parse(read_file(csv_path + ".json"));
        if (meta.at("key").get<std::string>() != key) return false;
        const std::string csv = read_file(csv_path);
        if (meta.at("csv_hash").get<std::string>() != content_hash(csv)) return false;
        KernelTable tab;
        tab.source = meta.at("source").get<std::string>();
        tab.beta = std::stod(meta.at("beta").get<std::string>());
        tab.nodes_per_panel = meta.at("nodes_per_panel").get<std::size_t>();
        const auto& tail = meta.at("tail");
        tab.tail.q2_slope = std::stod(tail.at("q2_slope").get<std::string>());
        tab.tail.q1_limit = std::stod(tail.at("q1_limit").get<std::string>());
        tab.tail.plateau = std::stod(tail.at("plateau").get<std::string>());
        tab.tail.ir_exponent = std::stod(tail.at("ir_exponent").get<std::string>());
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::array<double, 7> v{};
            std::istringstream ls(line);
            std::string cell;
            for (double& x : v) {
                if (!std::getline(ls, cell, ',')) return false;
                x = std::stod(cell);
            }
            tab.t.push_back(v[0]);
            tab.q1.push_back(v[1]);
            tab.q2.push_back(v[2]);
            tab.qz.push_back(v[3]);
            tab.err1.push_back(v[4]);
            tab.err2.push_back(v[5]);
            tab.errz.push_back(v[6]);
        }
        if (tab.size() != meta.at("points").get<std::size_t>()) return false;
        out = std::move(tab);
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

KernelTable tabulate_kernels(const SpectralDensity& J, double beta, const TableOptions& opts) {
    const std::string key = table_key(J, beta, opts);
    std::string path;
    if (!opts.cache_dir.empty()) {
        path = (std::filesystem::path(opts.cache_dir) / ("kernels-" + key + ".csv")).string();
        KernelTable cached;
        if (load_table(path, key, cached)) return cached;
    }
    const KernelEvaluator ev(J, beta, opts.quad);
    KernelTable tab = build_table(ev, opts);
    tab.source = J.tag() + ";beta=" + fmt17(beta);
    if (!path.empty()) save_table(tab, path, key);
    return tab;
}

KernelTable tabulate_kernels(const BathSpec& spec, const TableOptions& opts) {
    spec.validate();
    return tabulate_kernels(SpectralDensity::from_form_factor(spec.h), spec.beta, opts);
}

KernelTable tabulate_kernels(const BathSpec& spec, double t_max, std::size_t n) {
    TableOptions o;
    o.t_max = t_max;
    o.n = n;
    return tabulate_kernels(spec, o);
}

} // namespace sb
