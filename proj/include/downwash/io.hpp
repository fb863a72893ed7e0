#pragma once

// Dataset persistence: UTF-8 CSV rows plus a JSON metadata sidecar with the
// same basename. Numbers are written in shortest round-trip form, so a
// save/load cycle reproduces every double exactly.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "downwash/formations.hpp"

namespace downwash {

/// Raised for unreadable, unwritable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw IoError("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  while (begin < end && *begin == ' ') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw IoError("cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::ordered_json to_json(const DownwashParams& p) {
  return {{"peak_force", p.peak_force},
          {"core_radius", p.core_radius},
          {"expansion_rate", p.expansion_rate},
          {"vertical_decay_length", p.vertical_decay_length},
          {"torque_gain", p.torque_gain},
          {"lateral_gain", p.lateral_gain}};
}

inline nlohmann::ordered_json to_json(const MergeParams& m) {
  return {{"merge_radius", m.merge_radius},
          {"contraction_rate", m.contraction_rate},
          {"advect_gain", m.advect_gain}};
}

inline nlohmann::ordered_json to_json(const NoiseParams& n) {
  return {{"sigma_force", n.sigma_force},
          {"sigma_torque", n.sigma_torque},
          {"seed", n.seed}};
}

inline nlohmann::ordered_json to_json(const SweepConfig& s) {
  return {{"lateral_extent", s.lateral_extent},
          {"vertical_extent", s.vertical_extent},
          {"speed", s.speed},
          {"legs", s.legs},
          {"samples_per_leg", s.samples_per_leg},
          {"spacing", s.spacing},
          {"altitudes", s.altitudes}};
}

inline nlohmann::ordered_json to_json(const DatasetMetadata& m) {
  return {{"format", "downwash-dataset"},
          {"version", m.version},
          {"formation", std::string(to_string(m.formation))},
          {"k", m.k},
          {"oracle", std::string(to_string(m.oracle))},
          {"field", to_json(m.field)},
          {"merge", to_json(m.merge)},
          {"noise", to_json(m.noise)},
          {"sweep", to_json(m.sweep)}};
}

inline DatasetMetadata metadata_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "downwash-dataset") throw IoError("not a downwash dataset sidecar");
    DatasetMetadata m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw IoError("unsupported dataset version " + std::to_string(m.version));
    m.formation = formation_from_string(j.at("formation").get<std::string>());
    m.k = j.at("k").get<std::size_t>();
    m.oracle = oracle_from_string(j.at("oracle").get<std::string>());
    const auto& f = j.at("field");
    m.field = {f.at("peak_force"),   f.at("core_radius"), f.at("expansion_rate"),
               f.at("vertical_decay_length"), f.at("torque_gain"), f.at("lateral_gain")};
    const auto& mg = j.at("merge");
    m.merge = {mg.at("merge_radius"), mg.at("contraction_rate"), mg.at("advect_gain")};
    const auto& n = j.at("noise");
    m.noise = {n.at("sigma_force"), n.at("sigma_torque"), n.at("seed").get<std::uint64_t>()};
    const auto& s = j.at("sweep");
    m.sweep.lateral_extent = s.at("lateral_extent");
    m.sweep.vertical_extent = s.at("vertical_extent");
    m.sweep.speed = s.at("speed");
    m.sweep.legs = s.at("legs");
    m.sweep.samples_per_leg = s.at("samples_per_leg");
    m.sweep.spacing = s.at("spacing");
    m.sweep.altitudes = s.at("altitudes").get<std::vector<double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed dataset sidecar: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("malformed dataset sidecar: ") + e.what());
  }
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

inline std::vector<std::string> dataset_columns(std::size_t k) {
  std::vector<std::string> cols = {"time"};
  const char* state[] = {"pn", "pe", "pd", "vn", "ve", "vd", "yaw"};
  for (const char* s : state) cols.push_back(std::string("sufferer_") + s);
  cols.push_back("k");
  for (std::size_t j = 0; j < k; ++j) {
    for (const char* s : state) cols.push_back("n" + std::to_string(j) + "_" + s);
  }
  const char* axes[] = {"fn", "fe", "fd", "tpitch", "troll", "tyaw"};
  for (const char* a : axes) cols.push_back(std::string("truth_") + a);
  for (const char* a : axes) cols.push_back(std::string("meas_") + a);
  return cols;
}

namespace detail {

inline void append_state(std::string& line, const VehicleState& s) {
  for (double v : {s.position[0], s.position[1], s.position[2], s.velocity[0],
                   s.velocity[1], s.velocity[2], s.yaw}) {
    line += ',';
    line += format_double(v);
  }
}

inline VehicleState read_state(const std::vector<std::string_view>& f, std::size_t at) {
  VehicleState s;
  s.position = Vec3(parse_double(f[at]), parse_double(f[at + 1]), parse_double(f[at + 2]));
  s.velocity = Vec3(parse_double(f[at + 3]), parse_double(f[at + 4]), parse_double(f[at + 5]));
  s.yaw = parse_double(f[at + 6]);
  return s;
}

}  // namespace detail

/// First line: `# downwash-dataset version=1 formation=... k=... oracle=...`,
/// second line: column names, then one row per record.
inline std::string dataset_to_csv(const Dataset& ds) {
  std::string out = "# downwash-dataset version=" + std::to_string(ds.meta.version) +
                    " formation=" + std::string(to_string(ds.meta.formation)) +
                    " k=" + std::to_string(ds.meta.k) +
                    " oracle=" + std::string(to_string(ds.meta.oracle)) +
                    " seed=" + std::to_string(ds.meta.noise.seed) + "\n";
  const auto cols = dataset_columns(ds.meta.k);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  out += '\n';
  std::string line;
  for (const auto& rec : ds.records) {
    if (rec.snapshot.k() != ds.meta.k) {
      throw IoError("dataset record K differs from dataset K");
    }
    line = format_double(rec.time);
    detail::append_state(line, rec.snapshot.sufferer);
    line += ',';
    line += std::to_string(rec.snapshot.k());
    for (const auto& n : rec.snapshot.neighbours) detail::append_state(line, n);
    for (double v : rec.truth.to_array()) {
      line += ',';
      line += format_double(v);
    }
    for (double v : rec.measured.to_array()) {
      line += ',';
      line += format_double(v);
    }
    line += '\n';
    out += line;
  }
  return out;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& csv) {
  write_text_file(csv, dataset_to_csv(ds));
  write_text_file(sidecar_path(csv), to_json(ds.meta).dump(2) + "\n");
}

inline Dataset load_dataset(const std::filesystem::path& csv) {
  Dataset ds;
  try {
    ds.meta = metadata_from_json(nlohmann::json::parse(read_text_file(sidecar_path(csv))));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("cannot parse sidecar for '" + csv.string() + "': " + e.what());
  }
  const std::string text = read_text_file(csv);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  const auto cols = dataset_columns(ds.meta.k);
  const auto where = [&] { return csv.string() + ":" + std::to_string(line_no) + ": "; };

  if (!std::getline(in, line) || (++line_no, line.rfind("# downwash-dataset", 0) != 0)) {
    throw IoError(where() + "missing dataset header record");
  }
  if (!std::getline(in, line)) throw IoError(where() + "missing column header");
  ++line_no;
  if (split(line, ',').size() != cols.size()) throw IoError(where() + "column header mismatch");

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != cols.size()) throw IoError(where() + "wrong field count");
    try {
      DatasetRecord rec;
      rec.time = parse_double(f[0]);
      rec.snapshot.sufferer = detail::read_state(f, 1);
      if (static_cast<std::size_t>(parse_double(f[8])) != ds.meta.k) {
        throw IoError("record K differs from metadata");
      }
      std::size_t at = 9;
      for (std::size_t j = 0; j < ds.meta.k; ++j, at += 7) {
        rec.snapshot.neighbours.push_back(detail::read_state(f, at));
      }
      std::array<double, 6> t{}, m{};
      for (std::size_t a = 0; a < 6; ++a) t[a] = parse_double(f[at + a]);
      for (std::size_t a = 0; a < 6; ++a) m[a] = parse_double(f[at + 6 + a]);
      rec.truth = Wrench6::from_array(t);
      rec.measured = Wrench6::from_array(m);
      ds.records.push_back(std::move(rec));
    } catch (const IoError& e) {
      throw IoError(where() + e.what());
    }
  }
  return ds;
}

}  // namespace downwash
