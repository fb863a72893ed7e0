#pragma once

// Integrated plane error, slice profiles, contour grids and the benchmark
// table. Any model, oracle or lambda can be evaluated through Predictor.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "downwash/field.hpp"
#include "downwash/formations.hpp"
#include "downwash/io.hpp"
#include "downwash/models.hpp"

namespace downwash {

using Predictor = std::function<Wrench6(const FormationSnapshot&)>;

struct NamedPredictor {
  std::string name;
  Predictor predict;
};

inline Predictor oracle_predictor(OracleKind kind, const DownwashParams& field,
                                  const MergeParams& merge) {
  return [=](const FormationSnapshot& s) { return aggregate(kind, s, field, merge); };
}

inline Predictor zero_predictor() {
  return [](const FormationSnapshot&) { return Wrench6::zero(); };
}

inline Predictor as_predictor(const LinearAggModel& m) {
  return [&m](const FormationSnapshot& s) { return predict_linear(m, s); };
}
inline Predictor as_predictor(const DeepSetModel& m) {
  return [&m](const FormationSnapshot& s) { return predict_deepset(m, s); };
}
inline Predictor as_predictor(const GridLookupModel& m) {
  return [&m](const FormationSnapshot& s) { return predict_naive(m, s); };
}

/// A lateral plane of formation-centroid positions at fixed altitude.
struct PlaneSpec {
  FormationSpec formation;
  double altitude = 1.3;
  double extent = 2.0;
  std::size_t resolution = 64;
};

/// Cell midpoints of `count` equal cells across [-extent/2, extent/2].
inline std::vector<double> midpoint_nodes(double extent, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = -extent / 2.0 + extent * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
  }
  return out;
}

/// Per-axis error; nullopt marks an axis whose truth integrates to zero.
using AxisErrors = std::array<std::optional<double>, 6>;

/// Midpoint-rule integral of |prediction - truth| over the plane divided by
/// the integral of |truth|, per axis.
inline AxisErrors integrated_plane_error(const Predictor& model, const Predictor& truth,
                                         const PlaneSpec& plane) {
  if (plane.resolution < 8) throw std::invalid_argument("integrated_plane_error: resolution must be >= 8");
  if (!(plane.extent > 0)) throw std::invalid_argument("integrated_plane_error: extent must be > 0");
  const auto offsets = formation_offsets(plane.formation.kind, plane.formation.k, plane.formation.spacing);
  const auto nodes = midpoint_nodes(plane.extent, plane.resolution);
  const double cell = (plane.extent / static_cast<double>(plane.resolution)) *
                      (plane.extent / static_cast<double>(plane.resolution));
  std::array<double, 6> err{}, ref{};
  for (double n : nodes) {
    for (double e : nodes) {
      const auto snap = snapshot_at(plane.formation, offsets, n, e, plane.altitude);
      const auto t = truth(snap).to_array();
      const auto p = model(snap).to_array();
      for (std::size_t a = 0; a < 6; ++a) {
        err[a] += std::abs(p[a] - t[a]) * cell;
        ref[a] += std::abs(t[a]) * cell;
      }
    }
  }
  AxisErrors out;
  for (std::size_t a = 0; a < 6; ++a) {
    if (ref[a] > 0.0) out[a] = err[a] / ref[a];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Slice profiles

enum class SliceAxis { kN, kE };

inline SliceAxis slice_axis_from_string(std::string_view s) {
  if (s == "N" || s == "n") return SliceAxis::kN;
  if (s == "E" || s == "e") return SliceAxis::kE;
  throw std::invalid_argument("slice axis must be N or E, got '" + std::string(s) + "'");
}

/// D-axis force along a transect through the formation centroid.
struct SliceProfile {
  SliceAxis axis = SliceAxis::kE;
  double altitude = 0.0;
  std::vector<double> positions;
  std::vector<std::string> model_names;
  std::vector<std::vector<double>> model_values;  // [model][position]
  std::vector<double> truth;
};

inline SliceProfile slice_profile(const std::vector<NamedPredictor>& models, const Predictor& truth,
                                  const FormationSpec& formation, double altitude, SliceAxis axis,
                                  double extent, std::size_t resolution) {
  if (resolution < 2) throw std::invalid_argument("slice_profile: resolution must be >= 2");
  const auto offsets = formation_offsets(formation.kind, formation.k, formation.spacing);
  SliceProfile out;
  out.axis = axis;
  out.altitude = altitude;
  out.positions = uniform_nodes(extent, resolution);
  out.model_values.resize(models.size());
  for (const auto& m : models) out.model_names.push_back(m.name);
  for (double x : out.positions) {
    const double n = axis == SliceAxis::kN ? x : 0.0;
    const double e = axis == SliceAxis::kE ? x : 0.0;
    const auto snap = snapshot_at(formation, offsets, n, e, altitude);
    for (std::size_t i = 0; i < models.size(); ++i) {
      out.model_values[i].push_back(models[i].predict(snap).f_d);
    }
    out.truth.push_back(truth(snap).f_d);
  }
  return out;
}

/// Local maxima at least `min_height` x global max tall and standing at
/// least `min_prominence` x global max above the higher of the two
/// surrounding valleys.
inline std::size_t count_peaks(const std::vector<double>& y, double min_height = 0.25,
                               double min_prominence = 0.1) {
  if (y.size() < 3) return 0;
  const double top = *std::max_element(y.begin(), y.end());
  if (!(top > 0.0)) return 0;
  std::size_t peaks = 0;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (!(y[i] >= y[i - 1] && y[i] > y[i + 1])) continue;
    if (y[i] < min_height * top) continue;
    double left = y[i];
    for (std::size_t j = i; j-- > 0;) {
      if (y[j] > y[i]) break;
      left = std::min(left, y[j]);
    }
    double right = y[i];
    // Equal-height maxima: only the rightmost keeps full prominence.
    for (std::size_t j = i + 1; j < y.size(); ++j) {
      if (y[j] >= y[i]) break;
      right = std::min(right, y[j]);
    }
    if (y[i] - std::max(left, right) >= min_prominence * top) ++peaks;
  }
  return peaks;
}

// ---------------------------------------------------------------------------
// Contour grids

/// D force over the same midpoint lattice integrated_plane_error uses.
/// values[i * e.size() + j] is at (n[i], e[j]).
struct ContourGrid {
  double altitude = 0.0;
  std::vector<double> n;
  std::vector<double> e;
  std::vector<double> values;

  double cell_area() const {
    const double dn = n.size() > 1 ? n[1] - n[0] : 0.0;
    const double de = e.size() > 1 ? e[1] - e[0] : 0.0;
    return dn * de;
  }
  double max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
};

inline ContourGrid contour_grid(const Predictor& model, const FormationSpec& formation, double altitude,
                                double extent, std::size_t resolution) {
  if (resolution < 2) throw std::invalid_argument("contour_grid: resolution must be >= 2");
  const auto offsets = formation_offsets(formation.kind, formation.k, formation.spacing);
  ContourGrid g;
  g.altitude = altitude;
  g.n = midpoint_nodes(extent, resolution);
  g.e = g.n;
  g.values.reserve(resolution * resolution);
  for (double n : g.n) {
    for (double e : g.e) g.values.push_back(model(snapshot_at(formation, offsets, n, e, altitude)).f_d);
  }
  return g;
}

/// Area of cells at or above `fraction` of the grid maximum.
inline double support_area(const ContourGrid& g, double fraction = 0.5) {
  const double top = g.max();
  if (!(top > 0.0)) return 0.0;
  const auto cells = std::count_if(g.values.begin(), g.values.end(),
                                   [&](double v) { return v >= fraction * top; });
  return static_cast<double>(cells) * g.cell_area();
}

/// Radius of the disc with the same area as the support.
inline double support_radius(const ContourGrid& g, double fraction = 0.5) {
  return std::sqrt(support_area(g, fraction) / std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchmarkRequest {
  std::vector<NamedPredictor> models;
  std::vector<NamedPredictor> references;  // tabulated, never marked as winners
  std::vector<FormationSpec> formations;
  OracleKind oracle = OracleKind::kMerging;
  std::vector<double> altitudes = {1.3};
  double extent = 2.0;
  std::size_t resolution = 64;
  DownwashParams field;
  MergeParams merge;
};

struct ReportRow {
  FormationSpec formation;
  double altitude = 0.0;
  std::string model;
  AxisErrors errors;
  std::array<bool, 6> wins{};  // lowest error in its (formation, altitude) group
};

struct EvalReport {
  OracleKind oracle = OracleKind::kMerging;
  double extent = 2.0;
  std::size_t resolution = 64;
  std::vector<ReportRow> rows;

  const ReportRow* find(const std::string& label, double altitude, const std::string& model) const {
    for (const auto& r : rows) {
      if (r.formation.label() == label && r.altitude == altitude && r.model == model) return &r;
    }
    return nullptr;
  }
};

/// Rows come out in (formation, altitude, model) order, references last.
/// Ties go to the earlier model.
inline EvalReport benchmark(const BenchmarkRequest& req) {
  EvalReport report{req.oracle, req.extent, req.resolution, {}};
  const auto truth = oracle_predictor(req.oracle, req.field, req.merge);
  for (const auto& f : req.formations) {
    for (double alt : req.altitudes) {
      const std::size_t first = report.rows.size();
      for (const auto& m : req.models) {
        const PlaneSpec plane{f, alt, req.extent, req.resolution};
        report.rows.push_back({f, alt, m.name, integrated_plane_error(m.predict, truth, plane), {}});
      }
      for (std::size_t a = 0; a < 6; ++a) {
        std::optional<std::size_t> best;
        for (std::size_t r = first; r < report.rows.size(); ++r) {
          const auto& v = report.rows[r].errors[a];
          if (v && (!best || *v < *report.rows[*best].errors[a])) best = r;
        }
        if (best) report.rows[*best].wins[a] = true;
      }
      for (const auto& m : req.references) {
        const PlaneSpec plane{f, alt, req.extent, req.resolution};
        report.rows.push_back({f, alt, m.name, integrated_plane_error(m.predict, truth, plane), {}});
      }
    }
  }
  return report;
}

inline std::vector<std::string> report_columns() {
  std::vector<std::string> c = {"formation", "k", "altitude", "model"};
  for (const char* a : Wrench6::kAxisNames) c.push_back(std::string("err_") + a);
  c.push_back("wins");
  return c;
}

/// Table 1 layout: one row per (formation, altitude, model), six axis
/// columns, `n/a` where the truth is identically zero, and `wins` listing
/// the axes on which the row has the lowest error.
inline std::string report_to_csv(const EvalReport& r) {
  std::string out;
  const auto cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& row : r.rows) {
    out += std::string(to_string(row.formation.kind)) + "," + std::to_string(row.formation.k) + "," +
           format_double(row.altitude) + "," + row.model;
    std::string wins;
    for (std::size_t a = 0; a < 6; ++a) {
      out += ',';
      out += row.errors[a] ? format_double(*row.errors[a]) : "n/a";
      if (row.wins[a]) wins += (wins.empty() ? "" : " ") + std::string(Wrench6::kAxisNames[a]);
    }
    out += "," + wins + "\n";
  }
  return out;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["oracle"] = std::string(to_string(r.oracle));
  j["extent"] = r.extent;
  j["resolution"] = r.resolution;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json e;
    e["formation"] = std::string(to_string(row.formation.kind));
    e["k"] = row.formation.k;
    e["altitude"] = row.altitude;
    e["model"] = row.model;
    nlohmann::ordered_json errs, wins = nlohmann::ordered_json::array();
    for (std::size_t a = 0; a < 6; ++a) {
      errs[Wrench6::kAxisNames[a]] = row.errors[a] ? nlohmann::ordered_json(*row.errors[a]) : nullptr;
      if (row.wins[a]) wins.push_back(Wrench6::kAxisNames[a]);
    }
    e["errors"] = errs;
    e["wins"] = wins;
    rows.push_back(e);
  }
  j["rows"] = rows;
  return j;
}

/// position, one column per model, ground_truth.
inline std::string slice_to_csv(const SliceProfile& s) {
  std::string out = s.axis == SliceAxis::kN ? "n" : "e";
  for (const auto& name : s.model_names) out += "," + name;
  out += ",ground_truth\n";
  for (std::size_t i = 0; i < s.positions.size(); ++i) {
    out += format_double(s.positions[i]);
    for (const auto& col : s.model_values) out += "," + format_double(col[i]);
    out += "," + format_double(s.truth[i]) + "\n";
  }
  return out;
}

/// Long format: n, e, f_d.
inline std::string contour_to_csv(const ContourGrid& g) {
  std::string out = "n,e,f_d\n";
  for (std::size_t i = 0; i < g.n.size(); ++i) {
    for (std::size_t j = 0; j < g.e.size(); ++j) {
      out += format_double(g.n[i]) + "," + format_double(g.e[j]) + "," +
             format_double(g.values[i * g.e.size() + j]) + "\n";
    }
  }
  return out;
}

}  // namespace downwash
