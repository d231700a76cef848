// config.cpp

#include "config.hpp"

#include "spinboson/errors.hpp"
#include "spinboson/textio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace sb::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& why) { throw ConfigError(path + ": " + why); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Strict view of one JSON object: every key must be consumed by a getter.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
    }
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (const auto& [k, v] : j_.items())
            if (!known_.count(k)) fail(join(path_, k), "unknown key");
    }

    bool has(const std::string& k) {
        known_.insert(k);
        return j_.contains(k) && !j_.at(k).is_null();
    }
    std::string at_path(const std::string& k) const { return join(path_, k); }
    const json& raw(const std::string& k) { return has(k), j_.at(k); }

    double number(const std::string& k, double def, const std::function<bool(double)>& ok, const char* range) {
        if (!has(k)) return def;
        return number_value(raw(k), at_path(k), ok, range);
    }
    std::optional<double> optional_number(const std::string& k, const std::function<bool(double)>& ok, const char* range) {
        if (!has(k)) return std::nullopt;
        return number_value(raw(k), at_path(k), ok, range);
    }
    long long integer(const std::string& k, long long def, long long lo, long long hi) {
        if (!has(k)) return def;
        const json& v = raw(k);
        if (!v.is_number_integer()) fail(at_path(k), "expected an integer");
        const long long x = v.get<long long>();
        if (x < lo || x > hi) fail(at_path(k), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return x;
    }
    bool boolean(const std::string& k, bool def) {
        if (!has(k)) return def;
        if (!raw(k).is_boolean()) fail(at_path(k), "expected true or false");
        return raw(k).get<bool>();
    }
    std::string string(const std::string& k, const std::string& def) {
        if (!has(k)) return def;
        if (!raw(k).is_string()) fail(at_path(k), "expected a string");
        return raw(k).get<std::string>();
    }
    std::vector<double> numbers(const std::string& k, const std::function<bool(double)>& ok, const char* range) {
        const json& v = raw(k);
        if (!v.is_array()) fail(at_path(k), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(number_value(v[i], at_path(k) + "[" + std::to_string(i) + "]", ok, range));
        return out;
    }

    static double number_value(const json& v, const std::string& path, const std::function<bool(double)>& ok,
                               const char* range) {
        if (!v.is_number()) fail(path, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x) || !ok(x)) fail(path, std::string("must be ") + range);
        return x;
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> known_;
};

const auto positive = [](double x) { return x > 0; };
const auto nonnegative = [](double x) { return x >= 0; };
const auto any = [](double) { return true; };

FormFactor parse_form_factor(Section& parent, const std::string& key) {
    if (!parent.has(key)) return FormFactor::power_exp(1.0, Cutoff::exponential);
    Section s(parent.raw(key), parent.at_path(key));
    const std::string family = s.string("family", "power_exp");
    try {
        if (family == "power_exp") {
            const double p = s.number("p", 1.0, any, "finite");
            const std::string c = s.string("cutoff", "exponential");
            Cutoff cut;
            if (c == "exponential") cut = Cutoff::exponential;
            else if (c == "gaussian") cut = Cutoff::gaussian;
            else fail(s.at_path("cutoff"), "must be \"exponential\" or \"gaussian\"");
            return FormFactor::power_exp(p, cut);
        }
        if (family == "tabulated") {
            if (!s.has("grid") || !s.has("values")) fail(parent.at_path(key), "tabulated form factor needs grid and values");
            auto grid = s.numbers("grid", nonnegative, ">= 0");
            auto values = s.numbers("values", any, "finite");
            return FormFactor::tabulated(std::move(grid), std::move(values));
        }
        if (family == "zero") return FormFactor::zero();
    } catch (const DomainError& e) {
        fail(parent.at_path(key), e.what());
    }
    fail(s.at_path("family"), "must be \"power_exp\", \"tabulated\" or \"zero\"");
}

void parse_bath(Section& root, RunConfig& c) {
    if (!root.has("bath")) fail("bath", "missing section");
    Section s(root.raw("bath"), "bath");
    c.bath.beta = s.number("beta", 1.0, positive, "> 0");
    c.bath.eps = s.number("eps", 0.0, any, "finite");
    c.bath.delta = s.number("delta", 0.0, any, "finite");
    c.bath.q0 = s.number("q0", 0.0, any, "finite");
    c.bath.h = parse_form_factor(s, "form_factor");
    try {
        c.bath.validate();
    } catch (const DomainError& e) {
        fail("bath", e.what());
    }
}

void parse_kernels(Section& root, RunConfig& c) {
    if (!root.has("kernels")) return;
    Section s(root.raw("kernels"), "kernels");
    c.kernels.t_max = s.number("t_max", c.kernels.t_max, positive, "> 0");
    c.kernels.n = std::size_t(s.integer("n", 0, 0, 10'000'000));
    c.kernels.quad.rel_tol = s.number("tol", c.kernels.quad.rel_tol, [](double x) { return x > 0 && x < 1; }, "in (0, 1)");
    c.kernels.cache_dir = s.string("cache_dir", "");
}

void parse_lso(Section& root, RunConfig& c) {
    if (!root.has("lso")) return;
    Section s(root.raw("lso"), "lso");
    c.lso.rel_tol = s.number("tol", c.lso.rel_tol, [](double x) { return x > 0 && x < 1; }, "in (0, 1)");
}

void parse_rate(Section& root, RunConfig& c) {
    if (!root.has("rate")) return;
    Section s(root.raw("rate"), "rate");
    c.p_t.t_max = s.number("p_t_max", c.p_t.t_max, positive, "> 0");
    c.p_t.points = std::size_t(s.integer("p_t_points", (long long)c.p_t.points, 2, 1'000'000));
}

void parse_oracle(Section& root, RunConfig& c) {
    if (!root.has("oracle")) return;
    Section s(root.raw("oracle"), "oracle");
    c.oracle.m_pos = int(s.integer("m_pos", c.oracle.m_pos, 1, 4096));
    c.oracle.u_max = s.number("u_max", c.oracle.u_max, nonnegative, ">= 0 (0 picks 12/beta)");
    c.oracle.n_max = int(s.integer("n_max", c.oracle.n_max, 1, 64));
    const auto eta = s.optional_number("eta", positive, "> 0");
    c.oracle.budget = std::size_t(s.integer("budget", (long long)c.oracle.budget, 4, 100'000'000));
    if (s.has("etas")) {
        c.schedule.etas = s.numbers("etas", positive, "> 0");
        if (c.schedule.etas.empty()) fail(s.at_path("etas"), "must not be empty");
        for (std::size_t i = 1; i < c.schedule.etas.size(); ++i)
            if (!(c.schedule.etas[i] < c.schedule.etas[i - 1])) fail(s.at_path("etas"), "must be strictly decreasing");
    }
    if (eta && !s.has("etas")) c.schedule.etas = {4 * *eta, 2 * *eta, *eta};
    if (eta && *eta != c.schedule.etas.back()) fail(s.at_path("eta"), "must equal the last entry of oracle.etas");
    c.oracle.eta = c.schedule.etas.back();
    c.schedule.match_m_pos = s.boolean("match_m_pos", c.schedule.match_m_pos);
    if (s.has("exponent")) {
        const json& e = s.raw("exponent");
        if (e.is_string() && e.get<std::string>() == "fit") c.schedule.exponent.reset();
        else c.schedule.exponent = Section::number_value(e, s.at_path("exponent"), positive, "> 0 or \"fit\"");
    }
    if (s.has("dump_coo")) {
        const json& d = s.raw("dump_coo");
        if (!d.is_array()) fail(s.at_path("dump_coo"), "expected an array of operator names");
        const auto& names = coo_operator_names();
        for (std::size_t i = 0; i < d.size(); ++i) {
            const std::string p = s.at_path("dump_coo") + "[" + std::to_string(i) + "]";
            if (!d[i].is_string()) fail(p, "expected a string");
            const auto n = d[i].get<std::string>();
            if (std::find(names.begin(), names.end(), n) == names.end()) fail(p, "unknown operator \"" + n + "\"");
            c.dump_coo.push_back(n);
        }
    }
}

void parse_constants(Section& root, RunConfig& c) {
    if (!root.has("constants")) return;
    Section s(root.raw("constants"), "constants");
    auto& k = c.constants;
    k.alpha = s.number("alpha", k.alpha, [](double x) { return x > 1.5; }, "> 1.5");
    k.eps_hat = s.optional_number("eps_hat", positive, "> 0");
    if (k.eps_hat && !(*k.eps_hat < k.alpha - 1.5)) fail(s.at_path("eps_hat"), "must lie in (0, alpha - 3/2)");
    k.xi = s.number("xi", k.xi, [](double x) { return x > 0 && x < 1; }, "in (0, 1)");
    k.inputs.c_kms = s.optional_number("c_kms", positive, "> 0");
    k.inputs.c3 = s.optional_number("c3", positive, "> 0");
    k.inputs.c5 = s.optional_number("c5", positive, "> 0");
    k.inputs.tau0 = s.optional_number("tau0", positive, "> 0");
}

void parse_regularity(Section& root, RunConfig& c) {
    if (!root.has("regularity")) return;
    Section s(root.raw("regularity"), "regularity");
    c.regularity.alpha = s.number("alpha", c.regularity.alpha, positive, "> 0");
    c.regularity.refinements = int(s.integer("refinements", c.regularity.refinements, 1, 6));
}

void parse_sweep(Section& root, RunConfig& c) {
    if (!root.has("sweep")) return;
    Section s(root.raw("sweep"), "sweep");
    Sweep w;
    w.param = s.string("param", "");
    if (w.param != "beta" && w.param != "eps" && w.param != "delta" && w.param != "q0")
        fail(s.at_path("param"), "must be one of beta, eps, delta, q0");
    if (!s.has("values")) fail(s.at_path("values"), "missing");
    w.values = s.numbers("values", any, "finite");
    if (w.values.empty()) fail(s.at_path("values"), "must not be empty");
    for (std::size_t i = 0; i < w.values.size(); ++i) {
        try {
            with_param(c.bath, w.param, w.values[i]).validate();
        } catch (const DomainError& e) {
            fail(s.at_path("values") + "[" + std::to_string(i) + "]", e.what());
        }
    }
    c.sweep = std::move(w);
}

void parse_output(Section& root, RunConfig& c) {
    if (!root.has("output")) return;
    Section s(root.raw("output"), "output");
    c.output.dir = s.string("dir", c.output.dir);
    if (s.has("formats")) {
        const json& f = s.raw("formats");
        if (!f.is_array()) fail(s.at_path("formats"), "expected an array");
        c.output.csv = c.output.json = false;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const std::string p = s.at_path("formats") + "[" + std::to_string(i) + "]";
            if (!f[i].is_string()) fail(p, "expected a string");
            const auto v = f[i].get<std::string>();
            if (v == "csv") c.output.csv = true;
            else if (v == "json") c.output.json = true;
            else fail(p, "must be \"csv\" or \"json\"");
        }
    }
}

} // namespace

BathSpec with_param(BathSpec s, const std::string& param, double value) {
    if (param == "beta") s.beta = value;
    else if (param == "eps") s.eps = value;
    else if (param == "delta") s.delta = value;
    else if (param == "q0") s.q0 = value;
    else throw ConfigError("sweep.param: must be one of beta, eps, delta, q0");
    return s;
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("<root>: not valid JSON (") + e.what() + ")");
    }
    RunConfig c;
    {
        Section root(j, "");
        parse_bath(root, c);
        parse_kernels(root, c);
        parse_lso(root, c);
        parse_rate(root, c);
        parse_oracle(root, c);
        parse_constants(root, c);
        parse_regularity(root, c);
        parse_sweep(root, c);
        parse_output(root, c);
    }
    c.canonical = j.dump();
    c.hash = content_hash(c.canonical);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError("--config: cannot read " + path + " (" + e.what() + ")");
    }
    return parse_config(text);
}

} // namespace sb::cli
