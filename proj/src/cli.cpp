#include "ds2dp/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ostream>
#include <sstream>

#include "ds2dp/format.hpp"
#include "ds2dp/io.hpp"
#include "ds2dp/noise.hpp"
#include "ds2dp/solver.hpp"
#include "ds2dp/synth.hpp"

namespace ds2dp::cli {

namespace {

std::string line(const std::string &key, const std::string &value) { return key + " = " + value + "\n"; }
std::string line(const std::string &key, double value) { return line(key, format_double(value)); }
std::string line(const std::string &key, Index value) { return line(key, std::to_string(value)); }

std::string dims_lines(const Cube &c) {
  return line("rows", c.rows()) + line("cols", c.cols()) + line("bands", c.bands());
}

std::string trace_csv(const std::vector<double> &loss, const std::vector<double> &psnr) {
  std::string out = psnr.empty() ? "iteration,loss\n" : "iteration,loss,mpsnr_db\n";
  for (std::size_t t = 0; t < loss.size(); ++t) {
    out += std::to_string(t + 1) + "," + format_double(loss[t]);
    if (!psnr.empty()) out += "," + format_double(psnr[t]);
    out += "\n";
  }
  return out;
}

struct Solved {
  DenoiseResult result;
  double seconds = 0.0;
};

Solved solve(const Cube &noisy, const RunConfig &cfg, const Cube *reference, std::ostream *log) {
  RunOptions run_opts;
  run_opts.reference = reference;
  if (log != nullptr)
    run_opts.progress = [log](const Progress &p) {
      *log << "iter " << p.iteration << " loss " << format_double(p.loss);
      if (p.mpsnr) *log << " mpsnr " << format_double(*p.mpsnr);
      *log << "\n";
    };
  const auto t0 = std::chrono::steady_clock::now();
  Solved s{run(noisy, cfg.solver, run_opts), 0.0};
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

// Artifacts shared by denoise and each ablation arm.
DenoiseSummary write_denoise(const fs::path &dir, const std::string &command, const Cube &noisy,
                             const RunConfig &cfg, const Cube *reference, const Solved &solved,
                             bool deterministic) {
  const DenoiseResult &r = solved.result;
  io::save_cube(dir / "denoised.hsc", r.denoised);
  io::save_cube(dir / "outliers.hsc", r.outliers);
  io::save_abundances(dir / "abundances.hsc", r.maps);
  io::save_signatures(dir / "signatures.csv", r.signatures);
  io::write_text(dir / "loss_trace.csv", trace_csv(r.loss_trace, r.psnr_trace));

  DenoiseSummary summary;
  summary.param_count = r.param_count;
  summary.final_loss = r.loss_trace.empty() ? 0.0 : r.loss_trace.back();
  summary.wall_time_s = solved.seconds;

  Index spatial = 0;
  {
    SolverState probe = initialize(noisy.rows(), noisy.cols(), noisy.bands(), cfg.solver);
    for (const auto &s : probe.spatial) spatial += ad::param_count(s);
  }

  std::string manifest = line("command", command) + to_text(cfg) + dims_lines(noisy);
  manifest += line("param_count", r.param_count);
  manifest += line("param_count_spatial", spatial);
  manifest += line("param_count_spectral", r.param_count - spatial);
  manifest += line("input_scale", r.scale);
  manifest += line("iterations_run", static_cast<Index>(r.loss_trace.size()));
  manifest += line("final_loss", summary.final_loss);
  if (reference != nullptr) {
    summary.mpsnr_input = psnr(*reference, noisy).mean;
    summary.mpsnr_output = psnr(*reference, r.denoised).mean;
    manifest += line("mpsnr_input_db", *summary.mpsnr_input);
    manifest += line("mpsnr_output_db", *summary.mpsnr_output);
    manifest += line("mpsnr_gain_db", *summary.mpsnr_output - *summary.mpsnr_input);
  }
  if (!deterministic) manifest += line("wall_time_s", solved.seconds);
  io::write_text(dir / "manifest.txt", manifest);
  return summary;
}

std::optional<Cube> load_reference(const std::optional<fs::path> &path, const Cube &noisy) {
  if (!path) return std::nullopt;
  Cube ref = io::load_cube(*path);
  require_same_shape(ref, noisy, "reference");
  return ref;
}

std::string report_row(const std::string &label, const MetricReport &m) {
  return label + "," + format_double(m.mpsnr) + "," + format_double(m.mssim) + "," +
         format_double(m.sam) + "," + format_double(m.snr);
}

std::vector<double> parse_values(const std::string &text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_double(item);
    if (!v) throw ParseError("--values: expected a number, got '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

} // namespace

int exit_code(const std::exception &e) {
  if (dynamic_cast<const ParseError *>(&e)) return kParse;
  if (dynamic_cast<const ShapeError *>(&e)) return kShape;
  if (dynamic_cast<const DivergenceError *>(&e)) return kDivergence;
  if (dynamic_cast<const IoError *>(&e) || dynamic_cast<const fs::filesystem_error *>(&e)) return kIo;
  if (dynamic_cast<const ContractError *>(&e) || dynamic_cast<const UndefinedError *>(&e))
    return kContract;
  return kFailure;
}

void cmd_simulate(const SimulateOptions &opts) {
  opts.config.noise.validate();
  std::string manifest = line("command", "simulate") + to_text(opts.config);
  Cube clean;
  if (opts.input) {
    clean = io::load_cube(*opts.input);
    manifest += line("source", "file");
  } else {
    const SynthCube synth = make_lmm_cube(opts.config.synth);
    // Stored in single precision; corrupt the stored values so clean.hsc is the exact reference.
    clean = synth.cube.cast<float>().cast<double>();
    io::save_cube(opts.output / "clean.hsc", clean);
    io::save_abundances(opts.output / "abundances_true.hsc", synth.maps);
    io::save_signatures(opts.output / "signatures_true.csv", synth.signatures);
    manifest += line("source", "synthetic");
  }
  const Corruption c = corrupt(clean, opts.config.noise);
  io::save_cube(opts.output / "noisy.hsc", c.cube);
  io::save_mask(opts.output / "mask.hsc", c.mask);
  Index masked = 0;
  for (Index n = 0; n < c.mask.size(); ++n) masked += c.mask.data()[n];
  manifest += dims_lines(clean);
  manifest += line("masked_entries", masked);
  manifest += line("mpsnr_noisy_db", psnr(clean, c.cube.cast<float>().cast<double>()).mean);
  io::write_text(opts.output / "manifest.txt", manifest);
}

DenoiseSummary cmd_denoise(const DenoiseOptions &opts) {
  opts.config.validate();
  const Cube noisy = io::load_cube(opts.input);
  const auto reference = load_reference(opts.reference, noisy);
  const Cube *ref = reference ? &*reference : nullptr;
  try {
    const Solved solved = solve(noisy, opts.config, ref, opts.log);
    return write_denoise(opts.output, "denoise", noisy, opts.config, ref, solved, opts.deterministic);
  } catch (const SolverDivergence &e) {
    io::write_text(opts.output / "loss_trace.csv", trace_csv(e.trace(), {}));
    throw;
  }
}

MetricReport cmd_evaluate(const fs::path &reference, const fs::path &input, const fs::path &output) {
  const Cube ref = io::load_cube(reference);
  const Cube test = io::load_cube(input);
  const MetricReport report = evaluate(ref, test);
  io::write_text(output / "metrics.csv", to_csv(report));
  io::write_text(output / "metrics.txt", to_summary(report));
  return report;
}

std::vector<SweepRow> cmd_sweep(const SweepOptions &opts) {
  const Cube noisy = io::load_cube(opts.input);
  const Cube ref = io::load_cube(opts.reference);
  require_same_shape(ref, noisy, "sweep reference");
  std::vector<double> values = opts.values;
  if (values.empty()) values = opts.axis == SweepAxis::rank ? std::vector<double>{1, 2, 3, 4, 5} : lambda_grid();

  const std::string name = opts.axis == SweepAxis::rank ? "rank" : "lambda";
  std::vector<SweepRow> rows;
  std::string csv = name + ",mpsnr_db,mssim,sam_rad,snr_db,final_loss,param_count\n";
  for (const double v : values) {
    RunConfig cfg = opts.config;
    if (opts.axis == SweepAxis::rank) {
      if (v != std::floor(v) || v < 1) throw ContractError("rank values must be positive integers");
      cfg.solver.rank = static_cast<int>(v);
    } else {
      cfg.solver.lambda = v;
    }
    cfg.validate();
    const Solved solved = solve(noisy, cfg, nullptr, nullptr);
    SweepRow row{v, evaluate(ref, solved.result.denoised),
                 solved.result.loss_trace.empty() ? 0.0 : solved.result.loss_trace.back(),
                 solved.result.param_count};
    csv += report_row(format_double(v), row.report) + "," + format_double(row.final_loss) + "," +
           std::to_string(row.param_count) + "\n";
    rows.push_back(std::move(row));
  }
  io::write_text(opts.output / "sweep.csv", csv);
  io::write_text(opts.output / "manifest.txt",
                 line("command", "sweep") + line("axis", name) + to_text(opts.config) + dims_lines(noisy));
  return rows;
}

AblationMode parse_ablation_mode(const std::string &name) {
  if (name == "full") return AblationMode::full;
  if (name == "no-spectral-prior") return AblationMode::no_spectral_prior;
  if (name == "no-spatial-prior") return AblationMode::no_spatial_prior;
  if (name == "no-sparsity") return AblationMode::no_sparsity;
  throw ParseError("mode: unknown ablation '" + name +
                   "' (expected full, no-spectral-prior, no-spatial-prior or no-sparsity)");
}

std::string to_string(AblationMode mode) {
  switch (mode) {
  case AblationMode::full: return "full";
  case AblationMode::no_spectral_prior: return "no-spectral-prior";
  case AblationMode::no_spatial_prior: return "no-spatial-prior";
  case AblationMode::no_sparsity: return "no-sparsity";
  }
  return "full";
}

RunConfig ablated(const RunConfig &cfg, AblationMode mode) {
  RunConfig out = cfg;
  switch (mode) {
  case AblationMode::full: break;
  case AblationMode::no_spectral_prior: out.solver.spectral_prior = SpectralPrior::free; break;
  case AblationMode::no_spatial_prior: out.solver.spatial_prior = SpatialPrior::free; break;
  case AblationMode::no_sparsity:
    out.solver.sparse_outliers = false;
    out.solver.lambda = 0.0;
    break;
  }
  return out;
}

std::vector<AblationRow> cmd_ablate(const AblateOptions &opts) {
  const Cube noisy = io::load_cube(opts.input);
  const Cube ref = io::load_cube(opts.reference);
  require_same_shape(ref, noisy, "ablation reference");
  std::vector<AblationMode> arms{AblationMode::full};
  if (opts.mode != AblationMode::full) arms.push_back(opts.mode);

  std::vector<AblationRow> rows;
  std::string csv = "mode,mpsnr_db,mssim,sam_rad,snr_db,param_count\n";
  for (const AblationMode mode : arms) {
    const RunConfig cfg = ablated(opts.config, mode);
    cfg.validate();
    const Solved solved = solve(noisy, cfg, nullptr, nullptr);
    write_denoise(opts.output / to_string(mode), "ablate", noisy, cfg, nullptr, solved, opts.deterministic);
    AblationRow row{mode, evaluate(ref, solved.result.denoised), solved.result.param_count};
    csv += report_row(to_string(mode), row.report) + "," + std::to_string(row.param_count) + "\n";
    rows.push_back(std::move(row));
  }
  io::write_text(opts.output / "ablation.csv", csv);
  return rows;
}

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Hyperspectral denoising with generative spatial and spectral priors"};
  app.require_subcommand(1);

  std::string input, output, reference, config_path, axis = "rank", values, mode = "full";
  std::vector<std::string> overrides;
  int noise_case = 0, rank = 0, iters = 0, band = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0, lr = 0.0;
  bool share = false, deterministic = false, verbose = false;
  std::vector<Index> pixel;

  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "config override, key=value (repeatable)");
    sub->add_option("--seed", seed, "random seed");
  };
  auto solver_flags = [&](CLI::App *sub) {
    sub->add_option("--rank", rank, "number of endmembers R");
    sub->add_option("--lambda", lambda, "outlier sparsity weight");
    sub->add_option("--iters", iters, "iteration budget T");
    sub->add_option("--lr", lr, "Adam step size");
    sub->add_flag("--share-params", share, "share one spatial trunk across endmembers");
    sub->add_flag("--deterministic", deterministic, "omit wall time from manifests");
  };

  auto *simulate = app.add_subcommand("simulate", "corrupt a clean or synthetic cube");
  simulate->add_option("--input", input, "clean cube (.hsc); synthesized when omitted");
  simulate->add_option("--output", output, "output directory")->required();
  simulate->add_option("--case", noise_case, "noise case 1-6");
  common(simulate);

  auto *denoise = app.add_subcommand("denoise", "denoise a cube");
  denoise->add_option("--input", input, "noisy cube (.hsc)")->required();
  denoise->add_option("--output", output, "output directory")->required();
  denoise->add_option("--reference", reference, "clean cube for PSNR tracking");
  denoise->add_flag("--verbose", verbose, "print progress every snapshot_stride iterations");
  common(denoise);
  solver_flags(denoise);

  auto *eval = app.add_subcommand("evaluate", "compare a cube against a reference");
  eval->add_option("--reference", reference, "reference cube")->required();
  eval->add_option("--input", input, "test cube")->required();
  eval->add_option("--output", output, "output directory")->required();

  auto *sweep = app.add_subcommand("sweep", "metric versus R or lambda");
  sweep->add_option("--input", input, "noisy cube")->required();
  sweep->add_option("--reference", reference, "clean cube")->required();
  sweep->add_option("--output", output, "output directory")->required();
  sweep->add_option("--axis", axis, "rank or lambda")->check(CLI::IsMember({"rank", "lambda"}));
  sweep->add_option("--values", values, "comma-separated values (default 1..5 or the lambda grid)");
  common(sweep);
  solver_flags(sweep);

  auto *ablate = app.add_subcommand("ablate", "compare the full method with one ablation");
  ablate->add_option("--input", input, "noisy cube")->required();
  ablate->add_option("--reference", reference, "clean cube")->required();
  ablate->add_option("--output", output, "output directory")->required();
  ablate->add_option("--mode", mode, "full | no-spectral-prior | no-spatial-prior | no-sparsity");
  common(ablate);
  solver_flags(ablate);

  auto *band_cmd = app.add_subcommand("export-band", "write one band as an 8-bit PGM");
  band_cmd->add_option("--input", input, "cube")->required();
  band_cmd->add_option("--band", band, "band index")->required();
  band_cmd->add_option("--output", output, "image path")->required();

  auto *spec_cmd = app.add_subcommand("export-spectrum", "write one pixel's spectrum as CSV");
  spec_cmd->add_option("--input", input, "cube")->required();
  spec_cmd->add_option("--pixel", pixel, "row,col")->delimiter(',')->expected(2)->required();
  spec_cmd->add_option("--output", output, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kParse;
  }

  auto build_config = [&](CLI::App *sub, bool noise_seed) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto &kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'");
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (sub->count("--seed") != 0u) (noise_seed ? cfg.noise.seed : cfg.solver.seed) = seed;
    if (sub->get_option_no_throw("--rank") && sub->count("--rank") != 0u) cfg.solver.rank = rank;
    if (sub->get_option_no_throw("--lambda") && sub->count("--lambda") != 0u) cfg.solver.lambda = lambda;
    if (sub->get_option_no_throw("--iters") && sub->count("--iters") != 0u) cfg.solver.iterations = iters;
    if (sub->get_option_no_throw("--lr") && sub->count("--lr") != 0u) cfg.solver.adam.lr = lr;
    if (share) cfg.solver.share_spatial = true;
    if (sub->get_option_no_throw("--case") && sub->count("--case") != 0u) {
      if (noise_case < 1 || noise_case > 6)
        throw ParseError("case: must be between 1 and 6, got " + std::to_string(noise_case));
      cfg.noise.case_id = noise_case;
    }
    return cfg;
  };

  try {
    if (simulate->parsed()) {
      SimulateOptions opts{std::nullopt, output, build_config(simulate, true)};
      if (!input.empty()) opts.input = input;
      cmd_simulate(opts);
      out << "wrote " << (fs::path(output) / "noisy.hsc").string() << "\n";
    } else if (denoise->parsed()) {
      DenoiseOptions opts{input, output, std::nullopt, build_config(denoise, false), deterministic,
                          verbose ? &err : nullptr};
      if (!reference.empty()) opts.reference = reference;
      const DenoiseSummary s = cmd_denoise(opts);
      out << "params " << s.param_count << " final_loss " << format_double(s.final_loss);
      if (s.mpsnr_output)
        out << " mpsnr " << format_double(*s.mpsnr_output) << " gain "
            << format_double(*s.mpsnr_output - *s.mpsnr_input);
      out << "\n";
    } else if (eval->parsed()) {
      out << to_summary(cmd_evaluate(reference, input, output));
    } else if (sweep->parsed()) {
      SweepOptions opts{input, reference, output,
                        axis == "rank" ? SweepAxis::rank : SweepAxis::lambda,
                        values.empty() ? std::vector<double>{} : parse_values(values),
                        build_config(sweep, false)};
      for (const auto &row : cmd_sweep(opts))
        out << format_double(row.value) << " mpsnr " << format_double(row.report.mpsnr) << "\n";
    } else if (ablate->parsed()) {
      AblateOptions opts{input, reference, output, parse_ablation_mode(mode),
                         build_config(ablate, false), deterministic};
      for (const auto &row : cmd_ablate(opts))
        out << to_string(row.mode) << " mpsnr " << format_double(row.report.mpsnr) << "\n";
    } else if (band_cmd->parsed()) {
      io::export_band(io::load_cube(input), band, output);
    } else if (spec_cmd->parsed()) {
      io::export_spectrum(io::load_cube(input), pixel[0], pixel[1], output);
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  }
  return kOk;
}

} // namespace ds2dp::cli
