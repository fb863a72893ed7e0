#pragma once

// Run configuration: INI-style `[section]` headers and `key = value` lines,
// `#` or `;` comments. Every key has a default; unknown sections and keys
// are rejected with the offending line number. Lists are comma separated.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "downwash/eval.hpp"
#include "downwash/field.hpp"
#include "downwash/formations.hpp"
#include "downwash/io.hpp"
#include "downwash/models.hpp"

namespace downwash {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A formation kind with its neighbour count, written `kind:k`.
struct FormationEntry {
  FormationKind kind = FormationKind::kSingle;
  std::size_t k = 1;

  std::string label() const { return std::string(to_string(kind)) + "_k" + std::to_string(k); }
  friend bool operator==(const FormationEntry&, const FormationEntry&) = default;
};

/// 100 epochs keeps the full gen -> train -> eval pipeline inside 15
/// minutes on one core.
inline TrainConfig pipeline_train_defaults() {
  TrainConfig t;
  t.epochs = 100;
  return t;
}

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";

  DownwashParams field;
  MergeParams merge;
  double sigma_force = 0.025;
  double sigma_torque = 0.005;

  SweepConfig sweep;
  std::size_t single_legs = 71;
  std::size_t single_samples_per_leg = 800;

  std::vector<FormationEntry> datasets = {{FormationKind::kSingle, 1},
                                          {FormationKind::kSideBySide, 2},
                                          {FormationKind::kStack, 2},
                                          {FormationKind::kLeaderFollower, 3},
                                          {FormationKind::kHybrid3, 3}};
  OracleKind dataset_oracle = OracleKind::kMerging;

  std::string naive_dataset = "single_k1";
  double naive_e_step = 0.02;

  std::vector<std::string> train_datasets;  // empty: every generated dataset
  std::size_t max_records_per_dataset = 21600;
  TrainConfig train = pipeline_train_defaults();
  std::size_t hidden = 64;
  std::size_t embed = 64;
  std::size_t psi_depth = 2;
  std::size_t phi_depth = 2;
  std::size_t rho_depth = 1;

  OracleKind eval_oracle = OracleKind::kMerging;
  std::vector<FormationEntry> eval_formations = {{FormationKind::kLeaderFollower, 3},
                                                 {FormationKind::kSideBySide, 2},
                                                 {FormationKind::kStack, 2},
                                                 {FormationKind::kHybrid3, 3},
                                                 {FormationKind::kLeaderFollower, 4}};
  std::vector<double> eval_altitudes = {0.3, 0.8, 1.3};
  double eval_extent = 2.0;
  std::size_t eval_resolution = 64;
  SliceAxis slice_axis = SliceAxis::kE;
  std::size_t slice_resolution = 201;
  std::size_t contour_resolution = 64;
  std::vector<OracleKind> reference_oracles = {OracleKind::kAdditive};

  NoiseParams noise_for(const FormationEntry& f) const {
    return {sigma_force, sigma_torque, derive_seed(seed, "dataset/" + f.label())};
  }

  SweepConfig sweep_for(const FormationEntry& f) const {
    SweepConfig s = sweep;
    if (f.k == 1) {
      s.legs = single_legs;
      s.samples_per_leg = single_samples_per_leg;
    }
    return s;
  }

  FormationSpec formation_spec(const FormationEntry& f) const {
    return {f.kind, f.k, sweep.spacing, sweep.speed};
  }

  std::vector<std::string> effective_train_datasets() const {
    if (!train_datasets.empty()) return train_datasets;
    std::vector<std::string> out;
    for (const auto& d : datasets) out.push_back(d.label());
    return out;
  }

  /// Cross-field checks; throws ConfigError.
  void validate() const {
    try {
      field.validate();
      merge.validate();
      NoiseParams{sigma_force, sigma_torque, 0}.validate();
      sweep.validate();
      sweep_for({FormationKind::kSingle, 1}).validate();
      train.validate();
      for (const auto& d : datasets) formation_offsets(d.kind, d.k, sweep.spacing);
      for (const auto& d : eval_formations) formation_offsets(d.kind, d.k, sweep.spacing);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (out.empty()) throw ConfigError("run.out must not be empty");
    if (!(naive_e_step > 0)) throw ConfigError("naive.e_step must be > 0");
    if (max_records_per_dataset == 0) throw ConfigError("train.max_records_per_dataset must be > 0");
    if (hidden == 0 || embed == 0) throw ConfigError("train.hidden and train.embed must be > 0");
    if (eval_resolution < 8) throw ConfigError("eval.resolution must be >= 8");
    if (slice_resolution < 3 || contour_resolution < 2) throw ConfigError("eval slice/contour resolution too small");
    if (!(eval_extent > 0) || eval_altitudes.empty()) throw ConfigError("eval.extent and eval.altitudes must be set");
    for (double a : eval_altitudes) {
      if (!(a > 0)) throw ConfigError("eval.altitudes must be > 0");
    }
    std::vector<std::string> labels;
    for (const auto& d : datasets) labels.push_back(d.label());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (std::count(labels.begin(), labels.end(), labels[i]) > 1) {
        throw ConfigError("datasets.formations lists " + labels[i] + " twice");
      }
    }
    const auto known = [&](const std::string& l) {
      return std::find(labels.begin(), labels.end(), l) != labels.end();
    };
    if (!known(naive_dataset)) throw ConfigError("naive.dataset '" + naive_dataset + "' is not generated");
    for (const auto& t : train_datasets) {
      if (!known(t)) throw ConfigError("train.datasets entry '" + t + "' is not generated");
    }
    for (const auto& d : datasets) {
      if (d.label() == naive_dataset && d.k != 1) throw ConfigError("naive.dataset must have k = 1");
    }
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> parse_list(std::string_view v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  for (auto item : split(v, ',')) {
    const auto t = trim(item);
    if (t.empty()) throw ConfigError("empty list item");
    out.emplace_back(t);
  }
  return out;
}

inline double parse_number(std::string_view v) {
  try {
    const double d = parse_double(trim(v));
    if (!std::isfinite(d)) throw ConfigError("value must be finite");
    return d;
  } catch (const IoError&) {
    throw ConfigError("expected a number, got '" + std::string(trim(v)) + "'");
  }
}

inline std::uint64_t parse_unsigned(std::string_view v) {
  const auto t = trim(v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(t) + "'");
  }
  return out;
}

inline FormationEntry parse_formation_entry(std::string_view v) {
  const auto parts = split(v, ':');
  if (parts.size() != 2) throw ConfigError("expected kind:k, got '" + std::string(v) + "'");
  try {
    return {formation_from_string(trim(parts[0])), static_cast<std::size_t>(parse_unsigned(parts[1]))};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

template <typename T>
T parse_value(std::string_view v) {
  static_assert(std::is_unsigned_v<T>, "no parser for this config value type");
  return static_cast<T>(parse_unsigned(v));
}

template <> inline double parse_value<double>(std::string_view v) { return parse_number(v); }
template <> inline std::string parse_value<std::string>(std::string_view v) {
  const auto t = trim(v);
  if (t.empty()) throw ConfigError("value must not be empty");
  return std::string(t);
}
template <> inline std::vector<double> parse_value<std::vector<double>>(std::string_view v) {
  std::vector<double> out;
  for (const auto& s : parse_list(v)) out.push_back(parse_number(s));
  return out;
}
template <> inline std::vector<std::string> parse_value<std::vector<std::string>>(std::string_view v) {
  return parse_list(v);
}
template <> inline std::vector<FormationEntry> parse_value<std::vector<FormationEntry>>(std::string_view v) {
  std::vector<FormationEntry> out;
  for (const auto& s : parse_list(v)) out.push_back(parse_formation_entry(s));
  return out;
}
template <> inline OracleKind parse_value<OracleKind>(std::string_view v) {
  try {
    return oracle_from_string(trim(v));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}
template <> inline std::vector<OracleKind> parse_value<std::vector<OracleKind>>(std::string_view v) {
  std::vector<OracleKind> out;
  for (const auto& s : parse_list(v)) out.push_back(parse_value<OracleKind>(s));
  return out;
}
template <> inline SliceAxis parse_value<SliceAxis>(std::string_view v) {
  try {
    return slice_axis_from_string(trim(v));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}
template <> inline LrSchedule parse_value<LrSchedule>(std::string_view v) {
  const auto t = trim(v);
  if (t == "cosine") return LrSchedule::kCosine;
  if (t == "constant") return LrSchedule::kConstant;
  throw ConfigError("schedule must be cosine or constant, got '" + std::string(t) + "'");
}

inline std::string format_value(double v) { return format_double(v); }
template <typename T>
  requires std::is_unsigned_v<T>
std::string format_value(T v) { return std::to_string(v); }
inline std::string format_value(const std::string& v) { return v; }
inline std::string format_value(OracleKind v) { return std::string(to_string(v)); }
inline std::string format_value(SliceAxis v) { return v == SliceAxis::kN ? "N" : "E"; }
inline std::string format_value(LrSchedule v) { return v == LrSchedule::kCosine ? "cosine" : "constant"; }
inline std::string format_value(const FormationEntry& v) {
  return std::string(to_string(v.kind)) + ":" + std::to_string(v.k);
}
template <typename T>
std::string format_value(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_value(v[i]);
  return out;
}

struct ConfigKey {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
ConfigKey make_key(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key),
          [access](RunConfig& c, std::string_view v) { access(c) = parse_value<T>(v); },
          [access](const RunConfig& c) { return format_value(access(const_cast<RunConfig&>(c))); }};
}

#define DOWNWASH_KEY(T, section, key, expr) \
  make_key<T>(section, key, [](RunConfig& c) -> T& { return expr; })

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back(DOWNWASH_KEY(std::uint64_t, "run", "seed", c.seed));
    k.push_back(DOWNWASH_KEY(std::string, "run", "out", c.out));

    k.push_back(DOWNWASH_KEY(double, "field", "peak_force", c.field.peak_force));
    k.push_back(DOWNWASH_KEY(double, "field", "core_radius", c.field.core_radius));
    k.push_back(DOWNWASH_KEY(double, "field", "expansion_rate", c.field.expansion_rate));
    k.push_back(DOWNWASH_KEY(double, "field", "vertical_decay_length", c.field.vertical_decay_length));
    k.push_back(DOWNWASH_KEY(double, "field", "torque_gain", c.field.torque_gain));
    k.push_back(DOWNWASH_KEY(double, "field", "lateral_gain", c.field.lateral_gain));

    k.push_back(DOWNWASH_KEY(double, "merge", "merge_radius", c.merge.merge_radius));
    k.push_back(DOWNWASH_KEY(double, "merge", "contraction_rate", c.merge.contraction_rate));
    k.push_back(DOWNWASH_KEY(double, "merge", "advect_gain", c.merge.advect_gain));

    k.push_back(DOWNWASH_KEY(double, "noise", "sigma_force", c.sigma_force));
    k.push_back(DOWNWASH_KEY(double, "noise", "sigma_torque", c.sigma_torque));

    k.push_back(DOWNWASH_KEY(double, "sweep", "lateral_extent", c.sweep.lateral_extent));
    k.push_back(DOWNWASH_KEY(double, "sweep", "vertical_extent", c.sweep.vertical_extent));
    k.push_back(DOWNWASH_KEY(double, "sweep", "speed", c.sweep.speed));
    k.push_back(DOWNWASH_KEY(std::size_t, "sweep", "legs", c.sweep.legs));
    k.push_back(DOWNWASH_KEY(std::size_t, "sweep", "samples_per_leg", c.sweep.samples_per_leg));
    k.push_back(DOWNWASH_KEY(double, "sweep", "spacing", c.sweep.spacing));
    k.push_back(DOWNWASH_KEY(std::vector<double>, "sweep", "altitudes", c.sweep.altitudes));
    k.push_back(DOWNWASH_KEY(std::size_t, "sweep", "single_legs", c.single_legs));
    k.push_back(DOWNWASH_KEY(std::size_t, "sweep", "single_samples_per_leg", c.single_samples_per_leg));

    k.push_back(DOWNWASH_KEY(std::vector<FormationEntry>, "datasets", "formations", c.datasets));
    k.push_back(DOWNWASH_KEY(OracleKind, "datasets", "oracle", c.dataset_oracle));

    k.push_back(DOWNWASH_KEY(std::string, "naive", "dataset", c.naive_dataset));
    k.push_back(DOWNWASH_KEY(double, "naive", "e_step", c.naive_e_step));

    k.push_back(DOWNWASH_KEY(std::vector<std::string>, "train", "datasets", c.train_datasets));
    k.push_back(DOWNWASH_KEY(std::size_t, "train", "max_records_per_dataset", c.max_records_per_dataset));
    k.push_back(DOWNWASH_KEY(double, "train", "learning_rate", c.train.learning_rate));
    k.push_back(DOWNWASH_KEY(double, "train", "beta1", c.train.beta1));
    k.push_back(DOWNWASH_KEY(double, "train", "beta2", c.train.beta2));
    k.push_back(DOWNWASH_KEY(double, "train", "epsilon", c.train.epsilon));
    k.push_back(DOWNWASH_KEY(std::size_t, "train", "batch_size", c.train.batch_size));
    k.push_back(DOWNWASH_KEY(std::size_t, "train", "epochs", c.train.epochs));
    k.push_back(DOWNWASH_KEY(LrSchedule, "train", "schedule", c.train.schedule));
    k.push_back(DOWNWASH_KEY(std::size_t, "train", "hidden", c.hidden));
    k.push_back(DOWNWASH_KEY(std::size_t, "train", "embed", c.embed));
    k.push_back(DOWNWASH_KEY(std::size_t, "train", "psi_depth", c.psi_depth));
    k.push_back(DOWNWASH_KEY(std::size_t, "train", "phi_depth", c.phi_depth));
    k.push_back(DOWNWASH_KEY(std::size_t, "train", "rho_depth", c.rho_depth));

    k.push_back(DOWNWASH_KEY(OracleKind, "eval", "oracle", c.eval_oracle));
    k.push_back(DOWNWASH_KEY(std::vector<FormationEntry>, "eval", "formations", c.eval_formations));
    k.push_back(DOWNWASH_KEY(std::vector<double>, "eval", "altitudes", c.eval_altitudes));
    k.push_back(DOWNWASH_KEY(double, "eval", "extent", c.eval_extent));
    k.push_back(DOWNWASH_KEY(std::size_t, "eval", "resolution", c.eval_resolution));
    k.push_back(DOWNWASH_KEY(SliceAxis, "eval", "slice_axis", c.slice_axis));
    k.push_back(DOWNWASH_KEY(std::size_t, "eval", "slice_resolution", c.slice_resolution));
    k.push_back(DOWNWASH_KEY(std::size_t, "eval", "contour_resolution", c.contour_resolution));
    k.push_back(DOWNWASH_KEY(std::vector<OracleKind>, "eval", "reference_oracles", c.reference_oracles));
    return k;
  }();
  return keys;
}

#undef DOWNWASH_KEY

inline const ConfigKey* find_key(std::string_view section, std::string_view key) {
  for (const auto& k : config_keys()) {
    if (k.section == section && k.key == key) return &k;
  }
  return nullptr;
}

inline bool known_section(std::string_view section) {
  for (const auto& k : config_keys()) {
    if (k.section == section) return true;
  }
  return false;
}

}  // namespace detail

/// Applies `text` on top of `base`. Does not validate.
inline RunConfig parse_config(std::string_view text, const std::string& source,
                              RunConfig base = {}) {
  std::string section;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    auto line = detail::trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (!detail::known_section(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    if (section.empty()) throw ConfigError(where + "key '" + std::string(key) + "' outside a section");
    const auto* entry = detail::find_key(section, key);
    if (!entry) throw ConfigError(where + "unknown key '" + std::string(key) + "' in [" + section + "]");
    try {
      entry->set(base, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + section + "." + std::string(key) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string(), std::move(base));
}

/// `section.key=value`, as passed to --set.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    throw ConfigError("--set " + std::string(assignment) + ": expected section.key=value");
  }
  const auto section = detail::trim(assignment.substr(0, dot));
  const auto key = detail::trim(assignment.substr(dot + 1, eq - dot - 1));
  const auto* entry = detail::find_key(section, key);
  if (!entry) throw ConfigError("--set " + std::string(assignment) + ": unknown key");
  try {
    entry->set(cfg, assignment.substr(eq + 1));
  } catch (const ConfigError& e) {
    throw ConfigError("--set " + std::string(assignment) + ": " + e.what());
  }
}

/// Full configuration with every key, in schema order.
inline std::string config_to_ini(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : detail::config_keys()) {
    if (k.section != section) {
      out += (section.empty() ? "[" : "\n[") + k.section + "]\n";
      section = k.section;
    }
    out += k.key + " = " + k.get(cfg) + "\n";
  }
  return out;
}

}  // namespace downwash
