// commands.cpp

#include "commands.hpp"

#include "spinboson/errors.hpp"
#include "spinboson/parallel.hpp"
#include "spinboson/textio.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>

namespace sb::cli {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

// JSON has no infinities; those are written as strings.
ordered num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}
ordered pair(cplx z) { return ordered::array({num(z.real()), num(z.imag())}); }

ordered header(const RunConfig& c, const std::string& command) {
    ordered h;
    h["tool"] = "spinboson";
    h["tool_version"] = std::string(kToolVersion);
    h["config_hash"] = c.hash;
    h["command"] = command;
    return h;
}

std::string csv_preamble(const RunConfig& c) {
    return "# spinboson " + std::string(kToolVersion) + " config " + c.hash + "\n";
}

ordered params(const BathSpec& s) {
    ordered p;
    p["beta"] = s.beta;
    p["eps"] = s.eps;
    p["delta"] = s.delta;
    p["q0"] = s.q0;
    p["form_factor"] = s.h.describe();
    return p;
}

class Writer {
public:
    Writer(const RunConfig& c, const Flags& f, std::ostream& log)
        : c_(c), dir_(f.out.empty() ? c.output.dir : f.out), log_(log) {
        std::filesystem::create_directories(dir_);
    }
    void json_file(const std::string& name, const ordered& body) {
        if (c_.output.json) put(name, body.dump(2) + "\n");
    }
    void csv_file(const std::string& name, const std::string& body) {
        if (c_.output.csv) put(name, csv_preamble(c_) + body);
    }
    void text_file(const std::string& name, const std::string& body) { put(name, body); }

private:
    void put(const std::string& name, const std::string& body) {
        const auto path = (std::filesystem::path(dir_) / name).string();
        write_file_atomic(path, body);
        log_ << "wrote " << path << "\n";
    }
    const RunConfig& c_;
    std::string dir_;
    std::ostream& log_;
};

TableOptions table_options(const RunConfig& c, const Flags& f) {
    TableOptions o = c.kernels;
    o.jobs = f.jobs;
    return o;
}

struct SweepRow {
    double value{0.0};
    RateReport rate;
};

std::vector<SweepRow> run_sweep(const RunConfig& c, const Flags& f) {
    const Sweep& w = *c.sweep;
    std::vector<SweepRow> rows(w.values.size());
    // The kernel table depends on beta and h only.
    std::optional<KernelTable> shared;
    if (w.param != "beta") shared = tabulate_kernels(c.bath, table_options(c, f));
    TableOptions per_point = c.kernels;
    per_point.jobs = 1;
    parallel_for(rows.size(), f.jobs, [&](std::size_t i) {
        const BathSpec s = with_param(c.bath, w.param, w.values[i]);
        rows[i].value = w.values[i];
        rows[i].rate = shared ? gamma_rate(s, *shared, c.lso) : gamma_rate(s, tabulate_kernels(s, per_point), c.lso);
    });
    return rows;
}

void write_sweep(const RunConfig& c, const std::vector<SweepRow>& rows, Writer& w) {
    const std::string& p = c.sweep->param;
    std::ostringstream csv;
    csv << p << ",tau_inv,tau0_inv,p_inf,err\n";
    ordered js = header(c, "sweep");
    js["params"] = params(c.bath);
    js["param"] = p;
    js["rows"] = ordered::array();
    for (const auto& r : rows) {
        csv << fmt17(r.value) << ',' << fmt17(r.rate.tau_inv) << ',' << fmt17(r.rate.tau0_inv) << ','
            << fmt17(r.rate.p_inf) << ',' << fmt17(r.rate.err) << '\n';
        ordered row;
        row[p] = r.value;
        row["tau_inv"] = num(r.rate.tau_inv);
        row["tau0_inv"] = num(r.rate.tau0_inv);
        row["p_inf"] = num(r.rate.p_inf);
        row["err"] = num(r.rate.err);
        row["damping_ok"] = r.rate.damping_ok;
        js["rows"].push_back(row);
    }
    w.csv_file("sweep.csv", csv.str());
    w.json_file("sweep.json", js);
}

ordered rate_json(const RunConfig& c, const RateReport& r) {
    ordered j = header(c, "rate");
    j["params"] = params(c.bath);
    j["tau_inv"] = num(r.tau_inv);
    j["tau0_inv"] = num(r.tau0_inv);
    j["p_inf"] = num(r.p_inf);
    j["err"] = num(r.err);
    j["damping_ok"] = r.damping_ok;
    j["plateau_weight"] = num(r.plateau_weight);
    return j;
}

ordered regularity_json(const ConditionReport& r) {
    ordered j;
    j["verdict"] = to_string(r.verdict);
    j["alpha"] = r.alpha;
    j["values"] = ordered::array();
    for (double v : r.values) j["values"].push_back(num(v));
    j["sizes"] = r.sizes;
    j["extents"] = r.extents;
    j["note"] = r.note;
    return j;
}

ordered input_json(const ConstantInput& in) {
    ordered j;
    j["value"] = num(in.value);
    j["provenance"] = to_string(in.provenance);
    return j;
}

} // namespace

int cmd_rate(const RunConfig& c, const Flags& f, std::ostream& log) {
    Writer w(c, f, log);
    const KernelTable table = tabulate_kernels(c.bath, table_options(c, f));
    const RateReport r = gamma_rate(c.bath, table, c.lso);
    w.json_file("rate.json", rate_json(c, r));

    std::ostringstream csv;
    csv << "t,P\n";
    const std::size_t n = c.p_t.points;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = c.p_t.t_max * double(i) / double(n - 1);
        csv << fmt17(t) << ',' << fmt17(p_of_t(c.bath, r, t)) << '\n';
    }
    w.csv_file("p_t.csv", csv.str());

    if (c.sweep) write_sweep(c, run_sweep(c, f), w);
    return kExitOk;
}

int cmd_lso(const RunConfig& c, const Flags& f, std::ostream& log) {
    Writer w(c, f, log);
    const KernelTable table = tabulate_kernels(c.bath, table_options(c, f));
    const LevelShiftMatrix m = lso_matrix(c.bath, table, c.lso);
    const RateReport r = gamma_rate(c.bath, table, c.lso);
    ordered j = header(c, "lso");
    j["params"] = params(c.bath);
    j["tau_inv"] = num(r.tau_inv);
    j["tau0_inv"] = num(m.tau0_inv);
    j["p_inf"] = num(r.p_inf);
    j["lso"] = {{"x_plus", pair(m.x_plus)}, {"x_minus", pair(m.x_minus)}, {"z", pair(m.z)}};
    j["eigenvalues"] = ordered::array({pair(m.eigenvalues[0]), pair(m.eigenvalues[1])});
    j["norm"] = num(m.norm);
    j["db_residual"] = num(m.db_residual);
    j["trace_gap"] = num(m.trace_gap);
    j["kernel_residual"] = num(m.kernel_residual);
    j["err"] = num(m.err);
    j["damping_ok"] = m.damping_ok && r.damping_ok;
    w.json_file("lso.json", j);
    return kExitOk;
}

int cmd_regularity(const RunConfig& c, const Flags& f, std::ostream& log) {
    Writer w(c, f, log);
    const double alpha = f.alpha.value_or(c.regularity.alpha);
    const ConditionReport r = check_condition_A(c.bath.h, c.bath.beta, alpha, c.regularity.refinements);
    ordered j = header(c, "regularity");
    j["params"] = params(c.bath);
    j.update(regularity_json(r));
    w.json_file("regularity.json", j);
    log << "condition A at alpha = " << alpha << ": " << to_string(r.verdict) << "\n";
    return r.verdict == Verdict::pass ? kExitOk : kExitFail;
}

int cmd_threshold(const RunConfig& c, const Flags& f, std::ostream& log) {
    const auto& k = c.constants;
    const GluedFunction fb = coupling_function(c.bath);
    const C1C2 c12 = constants_c1_c2(fb, k.alpha, k.eps_hat);
    std::optional<double> computed_tau0;
    if (!k.inputs.tau0 && k.inputs.c_kms && k.inputs.c5 && (k.inputs.c3 || f.allow_heuristics)) {
        const FgrResult g = fgr_check(c.bath, tabulate_kernels(c.bath, table_options(c, f)), c.lso);
        if (!(g.tau0_inv > 10 * g.err))
            throw PreconditionError("threshold: computed tau0_inv = " + fmt17(g.tau0_inv) +
                                    " is not resolved above its error estimate " + fmt17(g.err) +
                                    "; supply constants.tau0");
        computed_tau0 = 1 / g.tau0_inv;
    }
    const ResolvedInputs in = resolve_inputs(k.inputs, c12, f.allow_heuristics, computed_tau0);
    const ConstantsReport r = constants_report(c.bath, fb, k.alpha, k.eps_hat, k.xi, in);

    Writer w(c, f, log);
    ordered j = header(c, "threshold");
    j["params"] = params(c.bath);
    j["alpha"] = k.alpha;
    j["c1"] = num(r.c.c1);
    j["c2"] = num(r.c.c2);
    j["eps_hat"] = num(r.c.eps_hat);
    j["f_norm"] = num(r.c.f_norm);
    j["regularity_norm"] = num(r.c.regularity);
    j["xi"] = num(r.bounds.xi);
    j["n_bound"] = num(r.bounds.n_bound);
    j["xi_star"] = num(r.bounds.xi_star);
    j["n_bound_min"] = num(r.bounds.n_bound_min);
    j["pbar_bound"] = num(r.bounds.pbar_bound);
    j["dist_bound"] = num(r.bounds.dist_bound);
    j["q_bound"] = num(r.bounds.q_bound);
    j["inputs_used"] = {{"c_kms", input_json(in.c_kms)}, {"c3", input_json(in.c3)}, {"c5", input_json(in.c5)},
                        {"tau0", input_json(in.tau0)}};
    ordered heur = ordered::array();
    for (const auto& [name, v] : {std::pair{"c_kms", in.c_kms}, {"c3", in.c3}, {"c5", in.c5}, {"tau0", in.tau0}})
        if (v.provenance == Provenance::heuristic_default) heur.push_back(name);
    j["heuristic_constants"] = heur;
    j["heuristics_used"] = r.heuristics_used;
    j["delta0"] = num(r.delta0);
    j["small_enough"] = r.small_enough;
    w.json_file("constants.json", j);
    if (r.heuristics_used) log << "warning: heuristic constants in use: " << heur.dump() << "\n";
    return r.small_enough ? kExitOk : kExitFail;
}

int cmd_oracle(const RunConfig& c, const Flags& f, std::ostream& log) {
    const LsoEntries cont = lso_entries(c.bath, tabulate_kernels(c.bath, table_options(c, f)), c.lso);
    const OracleReport r = run_oracle(c.bath, c.oracle, c.schedule, cont, f.jobs);
    Writer w(c, f, log);

    ordered j = header(c, "oracle");
    j["params"] = params(c.bath);
    j["evaluator"] = "factorized";
    ordered trunc;
    trunc["m_pos"] = c.oracle.m_pos;
    trunc["u_max"] = c.oracle.resolved_u_max(c.bath.beta);
    trunc["n_max"] = c.oracle.n_max;
    trunc["budget"] = c.oracle.budget;
    j["truncation"] = trunc;
    ordered sched;
    sched["etas"] = c.schedule.etas;
    sched["match_m_pos"] = c.schedule.match_m_pos;
    sched["exponent"] = c.schedule.exponent ? ordered(*c.schedule.exponent) : ordered("fit");
    j["schedule"] = sched;
    const char* names[] = {"x_plus", "x_minus", "z"};
    j["points"] = ordered::array();
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        const auto& p = r.points[i];
        ordered q;
        q["eta"] = p.eta;
        q["m_pos"] = p.m_pos;
        q["u_max"] = p.u_max;
        q["n_max"] = p.n_max;
        q["x_plus"] = pair(p.x_plus);
        q["x_minus"] = pair(p.x_minus);
        q["z"] = pair(p.z);
        q["z_other"] = pair(p.z_other);
        ordered e;
        for (int k = 0; k < 3; ++k) e[names[k]] = num(r.point_rel_err[std::size_t(k)][i]);
        q["rel_err"] = e;
        j["points"].push_back(q);
    }
    ordered ex;
    ex["x_plus"] = pair(r.x_plus);
    ex["x_minus"] = pair(r.x_minus);
    ex["z"] = pair(r.z);
    ordered exps, fitted, rel;
    for (int k = 0; k < 3; ++k) {
        exps[names[k]] = r.exponents[std::size_t(k)];
        fitted[names[k]] = bool(r.fitted[std::size_t(k)]);
        rel[names[k]] = num(r.extrapolated_rel_err[std::size_t(k)]);
    }
    ex["exponents"] = exps;
    ex["fitted"] = fitted;
    ex["rel_err"] = rel;
    ex["max_real_fraction"] = num(r.max_real_fraction);
    j["extrapolated"] = ex;
    j["continuum"] = {{"x_plus", pair(cont.x_plus)}, {"x_minus", pair(cont.x_minus)}, {"z", pair(cont.z)},
                      {"err", num(cont.err)}};
    j["monotone"] = r.monotone;
    j["target"] = r.target;
    j["within_target"] = r.within_target;
    w.json_file("oracle.json", j);

    if (!c.dump_coo.empty()) {
        TruncationSpec t = c.oracle;
        t.u_max = t.resolved_u_max(c.bath.beta);
        GlueGrid g = default_glue_grid(c.bath.h, c.bath.beta);
        g.u_max = std::max(g.u_max, 1.01 * t.u_max);
        const FiniteModel m = build_model(discretize(coupling_function(c.bath, g), t), c.bath, t);
        const std::map<std::string, const KronOperator*> ops{
            {"L0", &m.L0}, {"calL0", &m.calL0}, {"calV", &m.calV}, {"JcalVJ", &m.JcalVJ}, {"I", &m.I},
            {"V", &m.V},   {"JVJ", &m.JVJ},     {"U", &m.U},       {"L", &m.L},           {"calL", &m.calL}};
        for (const auto& name : c.dump_coo) {
            std::ostringstream os;
            os << "# spinboson " << kToolVersion << " config " << c.hash << " operator " << name << "\n";
            write_coo(*ops.at(name), os);
            w.text_file("oracle_" + name + ".coo", os.str());
        }
    }
    log << "oracle: monotone " << (r.monotone ? "yes" : "no") << ", within target "
        << (r.within_target ? "yes" : "no") << "\n";
    return r.monotone ? kExitOk : kExitFail;
}

int cmd_sweep(const RunConfig& c, const Flags& f, std::ostream& log) {
    if (!c.sweep) throw ConfigError("sweep: missing section");
    Writer w(c, f, log);
    write_sweep(c, run_sweep(c, f), w);
    return kExitOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spin-boson relaxation toolkit", "spinboson"};
    app.fallthrough();
    app.require_subcommand(1);
    std::string config_path;
    Flags flags;
    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--out", flags.out, "output directory (overrides output.dir)");
    app.add_flag("--allow-heuristics", flags.allow_heuristics, "permit heuristic default constants");
    app.add_option("--jobs", flags.jobs, "worker threads")->check(CLI::Range(1, 1024));
    app.set_version_flag("--version", std::string(kToolVersion));

    using Cmd = int (*)(const RunConfig&, const Flags&, std::ostream&);
    Cmd chosen = nullptr;
    auto sub = [&](const char* name, const char* help, Cmd fn) {
        auto* s = app.add_subcommand(name, help);
        s->callback([&chosen, fn] { chosen = fn; });
        return s;
    };
    sub("rate", "relaxation rate report and P(t) table", cmd_rate);
    sub("lso", "level-shift matrix with its identity residuals", cmd_lso);
    auto* reg = sub("regularity", "Condition (A_alpha) verdict", cmd_regularity);
    reg->add_option("--alpha", flags.alpha, "regularity order (overrides regularity.alpha)");
    sub("threshold", "explicit constants and the smallness threshold", cmd_threshold);
    sub("oracle", "truncated-Fock cross-check of the level-shift matrix", cmd_oracle);
    sub("sweep", "rate over one parameter axis", cmd_sweep);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }

    try {
        const RunConfig c = load_config(config_path);
        return chosen(c, flags, out);
    } catch (const AccuracyError& e) {
        err << "error: " << e.what() << " (partial " << fmt17(e.partial) << ", err " << fmt17(e.err) << ")\n";
    } catch (const EvaluationError& e) {
        err << "error: " << e.what() << " (at " << fmt17(e.point) << ")\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kExitError;
}

} // namespace sb::cli
