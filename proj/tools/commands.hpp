// commands.hpp: Subcommands of the spinboson tool

#pragma once

#include "config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace sb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitFail = 2; // computation finished with a fail verdict

struct Flags {
    std::string out; // overrides output.dir when non-empty
    bool allow_heuristics{false};
    int jobs{1};
    std::optional<double> alpha; // regularity subcommand only
};

// Each returns an exit code; exceptions propagate to run_cli.
int cmd_rate(const RunConfig& c, const Flags& f, std::ostream& log);
int cmd_lso(const RunConfig& c, const Flags& f, std::ostream& log);
int cmd_regularity(const RunConfig& c, const Flags& f, std::ostream& log);
int cmd_threshold(const RunConfig& c, const Flags& f, std::ostream& log);
int cmd_oracle(const RunConfig& c, const Flags& f, std::ostream& log);
int cmd_sweep(const RunConfig& c, const Flags& f, std::ostream& log);

// Full command line, argv[0] included. Errors go to `err` and yield exit code 1.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sb::cli
