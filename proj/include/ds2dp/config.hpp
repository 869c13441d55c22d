#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ds2dp/noise.hpp"
#include "ds2dp/solver.hpp"
#include "ds2dp/synth.hpp"

namespace ds2dp {

/// Everything a command can be configured with.
///
/// Text form is one `key = value` per line; `#` starts a comment, blank lines are
/// ignored. Lists are comma-separated and ranges are written `lo,hi`. The `arch` key
/// (`reference` or `desk`) selects a preset for the spatial network and is applied before
/// any other key, so explicit architecture keys override it regardless of position.
struct RunConfig {
  SolverConfig solver;
  NoiseSpec noise;
  SynthSpec synth;

  void validate() const;
};

/// Keys in the order used by to_text().
const std::vector<std::string> &config_keys();

/// Current value of one key, in the same form parse accepts.
std::string config_value(const RunConfig &cfg, const std::string &key);

/// Sets one key. Throws ParseError naming the key for unknown keys or bad values; `line`
/// is attached to the error when non-zero.
void set_config_value(RunConfig &cfg, const std::string &key, const std::string &value,
                      int line = 0);

/// Parses `key = value` text on top of `base`. Unknown and repeated keys are rejected.
RunConfig parse_config(const std::string &text, const RunConfig &base = {});
RunConfig load_config(const std::filesystem::path &path, const RunConfig &base = {});

/// Every key with its value, one `key = value` line each.
std::string to_text(const RunConfig &cfg);

/// Default lambda sweep: i x 10^j for i in {2, 5, 8} and j = -6 ... -2, ascending.
std::vector<double> lambda_grid();

} // namespace ds2dp
