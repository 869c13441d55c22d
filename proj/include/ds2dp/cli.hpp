#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ds2dp/config.hpp"
#include "ds2dp/metrics.hpp"

namespace ds2dp::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kParse = 2,      ///< bad flags, config or file content
  kShape = 3,      ///< dimension mismatch
  kDivergence = 4, ///< solver blew up
  kIo = 5,         ///< file could not be read or written
  kContract = 6,   ///< value outside its valid domain
};

int exit_code(const std::exception &e);

struct SimulateOptions {
  std::optional<fs::path> input; ///< clean cube; synthesized from config.synth when absent
  fs::path output;
  RunConfig config;
};

/// Writes noisy.hsc and mask.hsc (plus clean.hsc and the true factors when synthesizing)
/// and a manifest.
void cmd_simulate(const SimulateOptions &opts);

struct DenoiseOptions {
  fs::path input;
  fs::path output;
  std::optional<fs::path> reference; ///< clean cube for the PSNR trace and gain
  RunConfig config;
  bool deterministic = false; ///< leave wall time out of the manifest
  std::ostream *log = nullptr;
};

struct DenoiseSummary {
  Index param_count = 0;
  double final_loss = 0.0;
  double wall_time_s = 0.0;
  std::optional<double> mpsnr_input;
  std::optional<double> mpsnr_output;
};

/// Writes denoised.hsc, outliers.hsc, abundances.hsc, signatures.csv, loss_trace.csv and
/// manifest.txt into opts.output.
DenoiseSummary cmd_denoise(const DenoiseOptions &opts);

/// Writes metrics.csv and metrics.txt into `output`.
MetricReport cmd_evaluate(const fs::path &reference, const fs::path &input, const fs::path &output);

enum class SweepAxis { rank, lambda };

struct SweepOptions {
  fs::path input;
  fs::path reference;
  fs::path output;
  SweepAxis axis = SweepAxis::rank;
  std::vector<double> values; ///< empty means 1..5 for rank, the default grid for lambda
  RunConfig config;
};

struct SweepRow {
  double value = 0.0;
  MetricReport report;
  double final_loss = 0.0;
  Index param_count = 0;
};

/// Writes sweep.csv into opts.output.
std::vector<SweepRow> cmd_sweep(const SweepOptions &opts);

enum class AblationMode { full, no_spectral_prior, no_spatial_prior, no_sparsity };

AblationMode parse_ablation_mode(const std::string &name);
std::string to_string(AblationMode mode);
/// Config for one ablation arm.
RunConfig ablated(const RunConfig &cfg, AblationMode mode);

struct AblateOptions {
  fs::path input;
  fs::path reference;
  fs::path output;
  AblationMode mode = AblationMode::full;
  RunConfig config;
  bool deterministic = false;
};

struct AblationRow {
  AblationMode mode = AblationMode::full;
  MetricReport report;
  Index param_count = 0;
};

/// Runs the full method and the requested arm (once when mode is full), each into its own
/// subdirectory, and writes ablation.csv.
std::vector<AblationRow> cmd_ablate(const AblateOptions &opts);

/// Parses argv and dispatches to a subcommand. Returns the process exit code.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace ds2dp::cli
