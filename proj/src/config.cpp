#include "ds2dp/config.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "ds2dp/format.hpp"
#include "ds2dp/io.hpp"

namespace ds2dp {

namespace {

using Getter = std::function<std::string(const RunConfig &)>;
using Setter = std::function<void(RunConfig &, const std::string &)>;

struct Entry {
  std::string key;
  Getter get;
  Setter set;
};

// Thrown by setters; rewrapped with the key and line by set_config_value.
struct BadValue {
  std::string reason;
};

std::string trim(const std::string &s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string &text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string &v) {
  const auto d = parse_double(v);
  if (!d) throw BadValue{"expected a number, got '" + v + "'"};
  return *d;
}

template <typename Int> Int to_int(const std::string &v) {
  const auto i = parse_integer<Int>(v);
  if (!i) throw BadValue{"expected an integer, got '" + v + "'"};
  return *i;
}

bool to_bool(const std::string &v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw BadValue{"expected true or false, got '" + v + "'"};
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::vector<int> to_int_list(const std::string &v) {
  std::vector<int> out;
  for (const auto &item : split_list(v)) out.push_back(to_int<int>(item));
  return out;
}

std::string from_int_list(const std::vector<int> &v) {
  std::string out;
  for (std::size_t n = 0; n < v.size(); ++n) out += (n ? "," : "") + std::to_string(v[n]);
  return out;
}

template <typename Range, typename Parse> Range to_range(const std::string &v, Parse parse) {
  const auto items = split_list(v);
  if (items.size() != 2) throw BadValue{"expected 'lo,hi', got '" + v + "'"};
  return Range{parse(items[0]), parse(items[1])};
}

template <typename Field> Entry number_entry(std::string key, Field field) {
  using T = std::remove_cvref_t<decltype(field(std::declval<RunConfig &>()))>;
  return {std::move(key),
          [field](const RunConfig &c) {
            const T v = field(const_cast<RunConfig &>(c));
            if constexpr (std::is_floating_point_v<T>) return format_double(v);
            else return std::to_string(v);
          },
          [field](RunConfig &c, const std::string &v) {
            if constexpr (std::is_floating_point_v<T>) field(c) = to_double(v);
            else field(c) = to_int<T>(v);
          }};
}

template <typename Field> Entry bool_entry(std::string key, Field field) {
  return {std::move(key),
          [field](const RunConfig &c) { return from_bool(field(const_cast<RunConfig &>(c))); },
          [field](RunConfig &c, const std::string &v) { field(c) = to_bool(v); }};
}

template <typename Field> Entry int_range_entry(std::string key, Field field) {
  return {std::move(key),
          [field](const RunConfig &c) {
            const IntRange &r = field(const_cast<RunConfig &>(c));
            return std::to_string(r.lo) + "," + std::to_string(r.hi);
          },
          [field](RunConfig &c, const std::string &v) {
            field(c) = to_range<IntRange>(v, [](const std::string &s) { return to_int<Index>(s); });
          }};
}

template <typename Field> Entry int_list_entry(std::string key, Field field) {
  return {std::move(key),
          [field](const RunConfig &c) { return from_int_list(field(const_cast<RunConfig &>(c))); },
          [field](RunConfig &c, const std::string &v) { field(c) = to_int_list(v); }};
}

std::string prior_name(bool network) { return network ? "network" : "free"; }

bool parse_prior(const std::string &v) {
  if (v == "network") return true;
  if (v == "free") return false;
  throw BadValue{"expected network or free, got '" + v + "'"};
}

std::string arch_name(const SpatialNetConfig &s) {
  if (s.down_channels == SpatialNetConfig::reference().down_channels &&
      s.up_channels == SpatialNetConfig::reference().up_channels &&
      s.input_channels == SpatialNetConfig::reference().input_channels)
    return "reference";
  if (s.down_channels == SpatialNetConfig::desk().down_channels &&
      s.up_channels == SpatialNetConfig::desk().up_channels &&
      s.input_channels == SpatialNetConfig::desk().input_channels)
    return "desk";
  return "custom";
}

const std::vector<Entry> &entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    // Solver.
    t.push_back(number_entry("rank", [](RunConfig &c) -> int & { return c.solver.rank; }));
    t.push_back(number_entry("lambda", [](RunConfig &c) -> double & { return c.solver.lambda; }));
    t.push_back(number_entry("iterations", [](RunConfig &c) -> int & { return c.solver.iterations; }));
    t.push_back(number_entry("lr", [](RunConfig &c) -> double & { return c.solver.adam.lr; }));
    t.push_back(number_entry("beta1", [](RunConfig &c) -> double & { return c.solver.adam.beta1; }));
    t.push_back(number_entry("beta2", [](RunConfig &c) -> double & { return c.solver.adam.beta2; }));
    t.push_back(number_entry("epsilon", [](RunConfig &c) -> double & { return c.solver.adam.epsilon; }));
    t.push_back(number_entry("seed", [](RunConfig &c) -> std::uint64_t & { return c.solver.seed; }));
    t.push_back(bool_entry("share_params", [](RunConfig &c) -> bool & { return c.solver.share_spatial; }));
    t.push_back(bool_entry("sparse_outliers",
                           [](RunConfig &c) -> bool & { return c.solver.sparse_outliers; }));
    t.push_back({"spatial_prior",
                 [](const RunConfig &c) { return prior_name(c.solver.spatial_prior == SpatialPrior::network); },
                 [](RunConfig &c, const std::string &v) {
                   c.solver.spatial_prior = parse_prior(v) ? SpatialPrior::network : SpatialPrior::free;
                 }});
    t.push_back({"spectral_prior",
                 [](const RunConfig &c) { return prior_name(c.solver.spectral_prior == SpectralPrior::network); },
                 [](RunConfig &c, const std::string &v) {
                   c.solver.spectral_prior = parse_prior(v) ? SpectralPrior::network : SpectralPrior::free;
                 }});
    t.push_back(number_entry("snapshot_stride",
                             [](RunConfig &c) -> int & { return c.solver.snapshot_stride; }));
    t.push_back(bool_entry("normalize_input",
                           [](RunConfig &c) -> bool & { return c.solver.normalize_input; }));
    t.push_back(number_entry("divergence_factor",
                             [](RunConfig &c) -> double & { return c.solver.divergence_factor; }));

    // Architecture.
    t.push_back({"arch", [](const RunConfig &c) { return arch_name(c.solver.spatial); },
                 [](RunConfig &c, const std::string &v) {
                   if (v == "reference") c.solver.spatial = SpatialNetConfig::reference();
                   else if (v == "desk") c.solver.spatial = SpatialNetConfig::desk();
                   else if (v == "custom") return;
                   else throw BadValue{"expected reference, desk or custom, got '" + v + "'"};
                 }});
    t.push_back(int_list_entry("down_channels",
                               [](RunConfig &c) -> std::vector<int> & { return c.solver.spatial.down_channels; }));
    t.push_back(int_list_entry("up_channels",
                               [](RunConfig &c) -> std::vector<int> & { return c.solver.spatial.up_channels; }));
    t.push_back(number_entry("kernel_size", [](RunConfig &c) -> int & { return c.solver.spatial.kernel_size; }));
    t.push_back(number_entry("skip_channels",
                             [](RunConfig &c) -> int & { return c.solver.spatial.skip_channels; }));
    t.push_back(number_entry("input_channels",
                             [](RunConfig &c) -> int & { return c.solver.spatial.input_channels; }));
    t.push_back(number_entry("slope", [](RunConfig &c) -> double & { return c.solver.spatial.slope; }));
    t.push_back(bool_entry("normalize", [](RunConfig &c) -> bool & { return c.solver.spatial.normalize; }));
    t.push_back(number_entry("spectral_code", [](RunConfig &c) -> int & { return c.solver.spectral_code; }));
    t.push_back(number_entry("spectral_hidden",
                             [](RunConfig &c) -> int & { return c.solver.spectral_hidden; }));

    // Noise.
    t.push_back({"case", [](const RunConfig &c) { return std::to_string(c.noise.case_id); },
                 [](RunConfig &c, const std::string &v) {
                   const int id = to_int<int>(v);
                   if (id < 1 || id > 6) throw BadValue{"must be between 1 and 6, got " + v};
                   c.noise.case_id = id;
                 }});
    t.push_back(number_entry("gaussian_variance",
                             [](RunConfig &c) -> double & { return c.noise.gaussian_variance; }));
    t.push_back(number_entry("laplace_density",
                             [](RunConfig &c) -> double & { return c.noise.laplace_density; }));
    t.push_back(number_entry("affected_band_fraction",
                             [](RunConfig &c) -> double & { return c.noise.affected_band_fraction; }));
    t.push_back(int_range_entry("deadline_count",
                                [](RunConfig &c) -> IntRange & { return c.noise.deadline_count; }));
    t.push_back(int_range_entry("deadline_width",
                                [](RunConfig &c) -> IntRange & { return c.noise.deadline_width; }));
    t.push_back(int_range_entry("diag_stripe_count",
                                [](RunConfig &c) -> IntRange & { return c.noise.diag_stripe_count; }));
    t.push_back(int_range_entry("vert_stripe_count",
                                [](RunConfig &c) -> IntRange & { return c.noise.vert_stripe_count; }));
    t.push_back({"vert_stripe_value",
                 [](const RunConfig &c) {
                   return format_double(c.noise.vert_stripe_value.lo) + "," +
                          format_double(c.noise.vert_stripe_value.hi);
                 },
                 [](RunConfig &c, const std::string &v) {
                   c.noise.vert_stripe_value = to_range<RealRange>(v, to_double);
                 }});
    t.push_back(number_entry("noise_seed", [](RunConfig &c) -> std::uint64_t & { return c.noise.seed; }));

    // Synthetic data.
    t.push_back(number_entry("synth_rows", [](RunConfig &c) -> Index & { return c.synth.rows; }));
    t.push_back(number_entry("synth_cols", [](RunConfig &c) -> Index & { return c.synth.cols; }));
    t.push_back(number_entry("synth_bands", [](RunConfig &c) -> Index & { return c.synth.bands; }));
    t.push_back(number_entry("synth_rank", [](RunConfig &c) -> int & { return c.synth.rank; }));
    t.push_back(number_entry("synth_spatial_scale",
                             [](RunConfig &c) -> double & { return c.synth.spatial_scale; }));
    t.push_back(number_entry("synth_spectral_scale",
                             [](RunConfig &c) -> double & { return c.synth.spectral_scale; }));
    t.push_back(number_entry("synth_seed", [](RunConfig &c) -> std::uint64_t & { return c.synth.seed; }));
    return t;
  }();
  return table;
}

const Entry &find_entry(const std::string &key, int line) {
  const auto &table = entries();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Entry &e) { return e.key == key; });
  if (it == table.end()) throw ParseError("unknown config key '" + key + "'", line);
  return *it;
}

} // namespace

void RunConfig::validate() const {
  solver.validate();
  noise.validate();
  synth.validate();
}

const std::vector<std::string> &config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto &e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

std::string config_value(const RunConfig &cfg, const std::string &key) {
  return find_entry(key, 0).get(cfg);
}

void set_config_value(RunConfig &cfg, const std::string &key, const std::string &value, int line) {
  const Entry &entry = find_entry(key, line);
  try {
    entry.set(cfg, trim(value));
  } catch (const BadValue &bad) {
    throw ParseError(key + ": " + bad.reason, line);
  }
}

RunConfig parse_config(const std::string &text, const RunConfig &base) {
  struct Assignment {
    std::string key, value;
    int line;
  };
  std::vector<Assignment> assignments;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", number);
    Assignment a{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), number};
    find_entry(a.key, number);
    if (!seen.insert(a.key).second) throw ParseError("duplicate key '" + a.key + "'", number);
    assignments.push_back(std::move(a));
  }

  RunConfig cfg = base;
  std::stable_partition(assignments.begin(), assignments.end(),
                        [](const Assignment &a) { return a.key == "arch"; });
  for (const auto &a : assignments) set_config_value(cfg, a.key, a.value, a.line);
  return cfg;
}

RunConfig load_config(const std::filesystem::path &path, const RunConfig &base) {
  try {
    return parse_config(io::read_text(path), base);
  } catch (const ParseError &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string to_text(const RunConfig &cfg) {
  std::string out;
  for (const auto &e : entries()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

std::vector<double> lambda_grid() {
  std::vector<double> grid;
  for (int j = -6; j <= -2; ++j)
    for (const int i : {2, 5, 8})
      grid.push_back(*parse_double(std::to_string(i) + "e" + std::to_string(j)));
  return grid;
}

} // namespace ds2dp
