// config.hpp: Run configuration for the command-line tool
//
// One JSON file with nested sections. Unknown keys and out-of-range values are
// rejected at parse time with the offending field path.

#pragma once

#include "spinboson/bath_correlations.hpp"
#include "spinboson/constants_ledger.hpp"
#include "spinboson/relaxation.hpp"
#include "spinboson/truncated_oracle.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sb::cli {

struct PtGrid {
    double t_max{20.0};
    std::size_t points{201};
};

struct ConstantsConfig {
    double alpha{2.2};
    std::optional<double> eps_hat;
    double xi{0.5};
    ThresholdInputs inputs;
};

struct RegularityConfig {
    double alpha{2.2};
    int refinements{3};
};

struct Sweep {
    std::string param; // beta | eps | delta | q0
    std::vector<double> values;
};

struct OutputConfig {
    std::string dir{"out"};
    bool csv{true};
    bool json{true};
};

struct RunConfig {
    BathSpec bath;
    TableOptions kernels;
    RelaxationOptions lso;
    PtGrid p_t;
    TruncationSpec oracle;
    OracleSchedule schedule;
    std::vector<std::string> dump_coo; // operator names
    ConstantsConfig constants;
    RegularityConfig regularity;
    std::optional<Sweep> sweep;
    OutputConfig output;

    std::string canonical; // sorted-key JSON of the input file
    std::string hash;      // content hash of `canonical`
};

// Throws ConfigError("<field.path>: <reason>").
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// BathSpec with one field replaced; `param` must be a sweepable name.
BathSpec with_param(BathSpec s, const std::string& param, double value);

inline const std::vector<std::string>& coo_operator_names() {
    static const std::vector<std::string> names{"L0", "calL0", "calV", "JcalVJ", "I", "V", "JVJ", "U", "L", "calL"};
    return names;
}

} // namespace sb::cli
