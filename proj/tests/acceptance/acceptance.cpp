// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ds2dp/generators.hpp"
#include "ds2dp/metrics.hpp"
#include "ds2dp/noise.hpp"
#include "ds2dp/solver.hpp"
#include "ds2dp/synth.hpp"
#include "gradient_cases.hpp"
#include "oracles.hpp"

using namespace ds2dp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string &detail) {
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  if (!pass) ++failures;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// Benchmark: 32x32x16 synthetic cube of rank 3.
SolverConfig bench_config(int rank = 3) {
  SolverConfig cfg;
  cfg.rank = rank;
  cfg.iterations = 500;
  cfg.lambda = 0.01;
  cfg.spatial = SpatialNetConfig::desk();
  cfg.adam.lr = 0.001;
  return cfg;
}

const Cube &bench_clean() {
  static const Cube clean = make_lmm_cube(SynthSpec{}).cube;
  return clean;
}

Cube bench_noisy(int case_id, std::uint64_t seed = 0) {
  NoiseSpec spec;
  spec.case_id = case_id;
  spec.seed = seed;
  return corrupt(bench_clean(), spec).cube;
}

struct BenchRun {
  double mpsnr = 0.0;
  double seconds = 0.0;
  DenoiseResult result;
};

BenchRun bench_run(const Cube &noisy, const SolverConfig &cfg) {
  RunOptions opts;
  opts.reference = &bench_clean();
  const auto start = Clock::now();
  BenchRun out;
  out.result = run(noisy, cfg, opts);
  out.seconds = seconds_since(start);
  out.mpsnr = psnr(bench_clean(), out.result.denoised).mean;
  return out;
}

Cube random_cube(Index i, Index j, Index k, Rng &rng, double lo = 0.0, double hi = 1.0) {
  Cube c(i, j, k);
  for (Index n = 0; n < c.size(); ++n) c.data()[n] = rng.uniform(lo, hi);
  return c;
}

void criterion_gradients() {
  const auto start = Clock::now();
  double worst = 0.0;
  Index checked = 0, skipped = 0;
  std::string worst_case;
  for (const auto &c : oracle::gradient_cases())
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = c.run(seed);
      checked += r.checked;
      skipped += r.skipped;
      if (r.rel_error > worst) {
        worst = r.rel_error;
        worst_case = c.name;
      }
    }
  const double elapsed = seconds_since(start);
  const bool pass = worst < 1e-6 && elapsed < 120.0 && skipped * 100 <= checked;
  report(1, pass,
         "max relative error " + fmt(worst) + " (" + worst_case + ") over " +
             std::to_string(oracle::gradient_cases().size()) + " cases x 20 seeds, " +
             std::to_string(checked) + " entries checked, " + std::to_string(skipped) +
             " kink-skipped, " + fmt(elapsed, 3) + " s");
}

void criterion_prox() {
  Rng rng(2024);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const double r = rng.uniform(-2.0, 2.0);
    const double lambda = rng.uniform(0.0, 2.0);
    worst = std::max(worst, std::abs(soft_threshold(r, lambda / 2.0) - oracle::grid_prox(r, lambda)));
  }
  double worst_increase = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 100; ++s) {
    SolverConfig cfg;
    cfg.rank = 1 + static_cast<int>(s % 3);
    cfg.spatial = SpatialNetConfig::desk();
    cfg.spectral_code = 8;
    cfg.spectral_hidden = 8;
    cfg.seed = s;
    cfg.lambda = rng.uniform(1e-3, 1.0);
    SolverState state = initialize(8, 8, 4, cfg);
    const Cube x = random_cube(8, 8, 4, rng);
    state.outliers = random_cube(8, 8, 4, rng, -0.5, 0.5);
    const double before = loss(x, state, cfg.lambda);
    state.outliers = update_outliers(x, reconstruct(state), cfg.lambda);
    worst_increase = std::max(worst_increase, loss(x, state, cfg.lambda) - before);
  }
  report(2, worst <= 1e-4 && worst_increase <= 1e-10,
         "max |soft_threshold - grid| " + fmt(worst) + " on 1000 pairs; max loss change after "
         "outlier update " + fmt(worst_increase) + " on 100 states");
}

void criterion_lmm() {
  Rng rng(7);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    const Index rows = static_cast<Index>(rng.integer(1, 16));
    const Index cols = static_cast<Index>(rng.integer(1, 16));
    const Index bands = static_cast<Index>(rng.integer(1, 16));
    const int rank = static_cast<int>(rng.integer(1, 5));
    std::vector<AbundanceMap> maps;
    std::vector<Signature> sigs;
    Eigen::MatrixXd a(rows * cols, rank), c(bands, rank);
    for (int r = 0; r < rank; ++r) {
      AbundanceMap m(rows, cols);
      for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) {
          m(i, j) = rng.uniform();
          a(j * rows + i, r) = m(i, j);
        }
      Signature s(bands);
      for (Index k = 0; k < bands; ++k) c(k, r) = s[k] = rng.uniform();
      maps.push_back(m);
      sigs.push_back(s);
    }
    const Eigen::MatrixXd expected = c * a.transpose();
    const Eigen::MatrixXd got = mode3_unfold(outer_accumulate(maps, sigs));
    worst = std::max(worst, (got - expected).norm() / expected.norm());
  }
  report(3, worst < 1e-12, "max relative Frobenius error " + fmt(worst) + " over 50 instances");
}

void criterion_end_to_end(const BenchRun &run3, double noisy_mpsnr) {
  const double gain = run3.mpsnr - noisy_mpsnr;
  report(4, gain >= 5.0 && run3.seconds < 600.0,
         "Case 2, R=3, T=500: MPSNR " + fmt(noisy_mpsnr) + " -> " + fmt(run3.mpsnr) + " dB (gain " +
             fmt(gain) + " dB), " + fmt(run3.seconds, 3) + " s");
}

void criterion_sparsity() {
  const Cube noisy = bench_noisy(3);
  const BenchRun with = bench_run(noisy, bench_config());
  SolverConfig off = bench_config();
  off.lambda = 0.0;
  const BenchRun without = bench_run(noisy, off);
  const auto &trace = with.result.psnr_trace;
  double running = -std::numeric_limits<double>::infinity(), collapse = 0.0;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    running = std::max(running, trace[t]);
    if (2 * t >= trace.size()) collapse = std::max(collapse, running - trace[t]);
  }
  report(5, with.mpsnr >= without.mpsnr && collapse <= 1.0,
         "Case 3: lambda=0.01 " + fmt(with.mpsnr) + " dB vs lambda=0 " + fmt(without.mpsnr) +
             " dB; largest drop from running max over the second half " + fmt(collapse) + " dB");
}

void criterion_sharing(const BenchRun &unshared) {
  SolverConfig ref;
  ref.share_spatial = false;
  const Index separate = initialize(64, 64, 191, ref).param_count();
  ref.share_spatial = true;
  const Index shared = initialize(64, 64, 191, ref).param_count();
  const double ratio = static_cast<double>(shared) / static_cast<double>(separate);

  SolverConfig cfg = bench_config();
  cfg.share_spatial = true;
  const BenchRun s = bench_run(bench_noisy(2), cfg);
  const double diff = std::abs(s.mpsnr - unshared.mpsnr);
  report(6, ratio <= 0.30 && diff <= 1.0,
         "reference R=5, K=191: " + std::to_string(shared) + " / " + std::to_string(separate) +
             " parameters (ratio " + fmt(ratio, 3) + "); benchmark shared " + fmt(s.mpsnr) +
             " dB vs unshared " + fmt(unshared.mpsnr) + " dB");
}

void criterion_seeds() {
  const Cube noisy = bench_noisy(1);
  std::vector<double> values;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SolverConfig cfg = bench_config();
    cfg.seed = seed;
    values.push_back(bench_run(noisy, cfg).mpsnr);
  }
  double mean = 0.0;
  for (double v : values) mean += v / 5.0;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean) / 4.0;
  const double sd = std::sqrt(var);
  std::string list;
  for (double v : values) list += (list.empty() ? "" : ", ") + fmt(v);
  report(7, sd <= 0.5, "Case 1 MPSNR over solver seeds 0-4: " + list + " (mean " + fmt(mean) +
                           ", std " + fmt(sd) + " dB)");
}

void criterion_metrics() {
  Rng rng(11);
  double psnr_err = 0.0, sam_err = 0.0, ssim_err = 0.0;
  bool identities = true;
  for (int n = 0; n < 10; ++n) {
    const Cube ref = random_cube(20, 22, 4, rng, 0.1, 1.0);
    Cube test = ref;
    for (Index e = 0; e < test.size(); ++e) test.data()[e] += 0.05 * rng.normal();
    const auto p = psnr(ref, test);
    const auto naive = oracle::naive_psnr(ref, test);
    for (std::size_t k = 0; k < naive.size(); ++k)
      psnr_err = std::max(psnr_err, std::abs(p.per_band[k] - naive[k]));
    psnr_err = std::max(psnr_err, std::abs(p.mean - oracle::naive_mean(naive)));
    const Cube other = random_cube(20, 22, 4, rng, 0.1, 1.0);
    sam_err = std::max(sam_err, std::abs(sam(ref, other).radians - oracle::naive_sam(ref, other)));
    ssim_err = std::max(ssim_err, std::abs(ssim(ref, test).mean - oracle::windowed_ssim(ref, test)));
    identities = identities && ssim(ref, ref).mean == 1.0 && sam(ref, ref).radians == 0.0;
  }
  report(8, psnr_err <= 1e-9 && sam_err <= 1e-10 && ssim_err <= 1e-4 && identities,
         "PSNR error " + fmt(psnr_err) + " dB, SAM error " + fmt(sam_err) + " rad, SSIM error " +
             fmt(ssim_err) + ", identities " + (identities ? "exact" : "violated"));
}

void criterion_noise() {
  const Cube zero(64, 64, 32); // 131072 samples
  const Cube g = add_gaussian(zero, 0.1, 1);
  const double mean = g.data().mean();
  const double var = (g.data().array() - mean).square().sum() / static_cast<double>(g.size() - 1);
  const bool var_ok = std::abs(var - 0.1) <= 0.005;

  std::string fractions;
  bool frac_ok = true, ranges_ok = true;
  const Cube flat = Cube::Constant(32, 32, 16, 0.5);
  for (int id = 3; id <= 5; ++id) {
    Index affected = 0, bands = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      NoiseSpec spec;
      spec.case_id = id;
      spec.seed = seed;
      const Corruption c = corrupt(flat, spec);
      const auto &events = id == 3 ? c.trace.deadlines : id == 4 ? c.trace.diagonal : c.trace.vertical;
      const IntRange range = id == 3 ? spec.deadline_count : id == 4 ? spec.diag_stripe_count
                                                                     : spec.vert_stripe_count;
      affected += static_cast<Index>(events.size());
      bands += flat.bands();
      for (const auto &e : events) ranges_ok = ranges_ok && e.count >= range.lo && e.count <= range.hi;
      for (double v : c.trace.stripe_values)
        ranges_ok = ranges_ok && v >= spec.vert_stripe_value.lo && v <= spec.vert_stripe_value.hi;
    }
    const double fraction = static_cast<double>(affected) / static_cast<double>(bands);
    frac_ok = frac_ok && std::abs(fraction - 0.30) <= 0.02;
    fractions += (fractions.empty() ? "" : ", ") + ("case " + std::to_string(id) + " " + fmt(fraction, 3));
  }
  report(9, var_ok && frac_ok && ranges_ok,
         "Gaussian variance " + fmt(var) + " on 131072 samples; affected band fraction " + fractions +
             "; counts and values " + (ranges_ok ? "within range" : "out of range"));
}

bool same_tree(const fs::path &a, const fs::path &b, std::string &diff) {
  std::map<std::string, std::string> files_a, files_b;
  auto load = [](const fs::path &root, std::map<std::string, std::string> &out) {
    for (const auto &e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) {
        std::ifstream in(e.path(), std::ios::binary);
        out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
      }
  };
  load(a, files_a);
  load(b, files_b);
  if (files_a.size() != files_b.size()) {
    diff = "file count differs";
    return false;
  }
  for (const auto &[name, bytes] : files_a) {
    const auto it = files_b.find(name);
    if (it == files_b.end() || it->second != bytes) {
      diff = name;
      return false;
    }
  }
  diff = std::to_string(files_a.size()) + " files identical";
  return true;
}

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "ds2dp_acceptance_determinism";
  fs::remove_all(root);
  const std::string tool = std::string("\"") + DS2DP_TOOL + "\"";
  bool ok = true;
  for (const char *name : {"a", "b"}) {
    const fs::path d = root / name;
    const std::string p = d.string();
    const std::vector<std::string> commands{
        tool + " simulate --case 6 --seed 5 --output \"" + p + "/sim\"",
        tool + " denoise --input \"" + p + "/sim/noisy.hsc\" --reference \"" + p +
            "/sim/clean.hsc\" --output \"" + p + "/den\" --set arch=desk --lr 0.001 --rank 3 "
            "--iters 100 --seed 2 --deterministic",
        tool + " evaluate --reference \"" + p + "/sim/clean.hsc\" --input \"" + p +
            "/den/denoised.hsc\" --output \"" + p + "/eval\""};
    for (const auto &cmd : commands) ok = ok && std::system((cmd + " > /dev/null").c_str()) == 0;
  }
  std::string diff = "pipeline command failed";
  if (ok) ok = same_tree(root / "a", root / "b", diff);
  report(10, ok, "simulate -> denoise -> evaluate twice with equal seeds: " + diff);
}

void criterion_rank(const std::map<int, BenchRun> &runs) {
  int best = 0;
  std::string list;
  for (const auto &[rank, r] : runs) {
    if (best == 0 || r.mpsnr > runs.at(best).mpsnr) best = rank;
    list += (list.empty() ? "" : ", ") + ("R=" + std::to_string(rank) + " " + fmt(r.mpsnr));
  }
  report(11, best == 3, "Case 2 MPSNR by rank: " + list + " dB; maximum at R=" + std::to_string(best));
}

} // namespace

int main() {
  criterion_gradients();
  criterion_prox();
  criterion_lmm();

  const Cube noisy = bench_noisy(2);
  const double noisy_mpsnr = psnr(bench_clean(), noisy).mean;
  std::map<int, BenchRun> by_rank;
  for (int rank = 1; rank <= 5; ++rank) by_rank[rank] = bench_run(noisy, bench_config(rank));

  criterion_end_to_end(by_rank.at(3), noisy_mpsnr);
  criterion_sparsity();
  criterion_sharing(by_rank.at(3));
  criterion_seeds();
  criterion_metrics();
  criterion_noise();
  criterion_determinism();
  criterion_rank(by_rank);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
