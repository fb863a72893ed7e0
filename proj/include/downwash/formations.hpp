#pragma once

// Formation geometry, grid-sweep trajectory datasets and noiseless grid
// slices. The sufferer is fixed at the origin with zero velocity, like the
// load-stand mounted vehicle.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "downwash/core.hpp"
#include "downwash/field.hpp"

namespace downwash {

enum class FormationKind { kSingle, kSideBySide, kLeaderFollower, kStack, kHybrid3 };

inline std::string_view to_string(FormationKind kind) {
  switch (kind) {
    case FormationKind::kSingle: return "single";
    case FormationKind::kSideBySide: return "side_by_side";
    case FormationKind::kLeaderFollower: return "leader_follower";
    case FormationKind::kStack: return "stack";
    case FormationKind::kHybrid3: return "hybrid3";
  }
  return "unknown";
}

inline FormationKind formation_from_string(std::string_view s) {
  for (auto k : {FormationKind::kSingle, FormationKind::kSideBySide,
                 FormationKind::kLeaderFollower, FormationKind::kStack,
                 FormationKind::kHybrid3}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown formation '" + std::string(s) + "'");
}

inline std::string_view to_string(OracleKind kind) {
  return kind == OracleKind::kAdditive ? "additive" : "merging";
}

inline OracleKind oracle_from_string(std::string_view s) {
  if (s == "additive") return OracleKind::kAdditive;
  if (s == "merging") return OracleKind::kMerging;
  throw std::invalid_argument("unknown oracle '" + std::string(s) + "'");
}

/// Offsets of each vehicle from the formation centroid (NED, metres).
/// Travel is along +E. Lateral offsets always have zero mean.
inline std::vector<Vec3> formation_offsets(FormationKind kind, std::size_t k,
                                           double spacing) {
  if (k < 1) throw std::invalid_argument("formation_offsets: k must be >= 1");
  if (!(spacing > 0)) throw std::invalid_argument("formation_offsets: spacing must be > 0");

  std::vector<Vec3> out;
  const double mid = (static_cast<double>(k) - 1.0) / 2.0;
  switch (kind) {
    case FormationKind::kSingle:
      if (k != 1) throw std::invalid_argument("single formation requires k == 1");
      out.push_back(Vec3::Zero());
      break;
    case FormationKind::kSideBySide:
      for (std::size_t i = 0; i < k; ++i) {
        out.emplace_back((static_cast<double>(i) - mid) * spacing, 0.0, 0.0);
      }
      break;
    case FormationKind::kLeaderFollower:
      for (std::size_t i = 0; i < k; ++i) {
        out.emplace_back(0.0, (static_cast<double>(i) - mid) * spacing, 0.0);
      }
      break;
    case FormationKind::kStack:
      // Vehicle 0 is highest and trails; each lower one sits half a spacing
      // ahead, at the edge of the column above it.
      for (std::size_t i = 0; i < k; ++i) {
        const double s = static_cast<double>(i) - mid;
        out.emplace_back(0.0, s * spacing / 2.0, s * spacing);
      }
      break;
    case FormationKind::kHybrid3: {
      if (k != 3) throw std::invalid_argument("hybrid3 formation requires k == 3");
      const double h = spacing * std::numbers::sqrt3 / 2.0;
      out.emplace_back(0.0, 2.0 * h / 3.0, 0.0);
      out.emplace_back(spacing / 2.0, -h / 3.0, 0.0);
      out.emplace_back(-spacing / 2.0, -h / 3.0, 0.0);
      break;
    }
  }
  return out;
}

struct FormationSpec {
  FormationKind kind = FormationKind::kLeaderFollower;
  std::size_t k = 3;
  double spacing = 0.5;
  double speed = 0.5;  // m/s along +E

  std::string label() const {
    return std::string(to_string(kind)) + "_k" + std::to_string(k);
  }
};

/// Snapshot with the formation centroid at lateral (n, e) and `altitude`
/// metres above the sufferer.
inline FormationSnapshot snapshot_at(const FormationSpec& spec,
                                     const std::vector<Vec3>& offsets, double n,
                                     double e, double altitude) {
  FormationSnapshot snap;
  const Vec3 centroid(n, e, -altitude);
  const Vec3 velocity(0.0, spec.speed, 0.0);
  snap.neighbours.reserve(offsets.size());
  for (const auto& off : offsets) {
    snap.neighbours.push_back({centroid + off, velocity, 0.0});
  }
  return snap;
}

inline FormationSnapshot snapshot_at(const FormationSpec& spec, double n, double e,
                                     double altitude) {
  return snapshot_at(spec, formation_offsets(spec.kind, spec.k, spec.spacing), n, e,
                     altitude);
}

struct SweepConfig {
  double lateral_extent = 2.0;   // m, side of the swept square
  double vertical_extent = 1.4;  // m
  double speed = 0.5;            // m/s
  std::size_t legs = 36;
  std::size_t samples_per_leg = 200;
  double spacing = 0.5;  // m
  std::vector<double> altitudes = {0.3, 0.8, 1.3};

  void validate() const {
    if (!(lateral_extent > 0) || !(vertical_extent > 0) || !(speed > 0) ||
        legs == 0 || samples_per_leg == 0 || !(spacing > 0) || altitudes.empty()) {
      throw std::invalid_argument("SweepConfig: all fields must be positive");
    }
    for (double a : altitudes) {
      if (!(a > 0) || a > vertical_extent) {
        throw std::invalid_argument("SweepConfig: altitude " + std::to_string(a) +
                                    " outside (0, vertical_extent]");
      }
    }
  }
};

/// Uniform points across [-extent/2, extent/2]; a single point sits at 0.
inline std::vector<double> uniform_nodes(double extent, std::size_t count) {
  std::vector<double> out(count, 0.0);
  if (count == 1) return out;
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = -extent / 2.0 + extent * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

struct DatasetRecord {
  double time = 0.0;
  FormationSnapshot snapshot;
  Wrench6 truth;
  Wrench6 measured;
};

struct DatasetMetadata {
  int version = 1;
  FormationKind formation = FormationKind::kSingle;
  std::size_t k = 1;
  OracleKind oracle = OracleKind::kAdditive;
  DownwashParams field;
  MergeParams merge;
  NoiseParams noise;
  SweepConfig sweep;
};

struct Dataset {
  DatasetMetadata meta;
  std::vector<DatasetRecord> records;

  std::size_t k() const { return meta.k; }
};

struct SweepRequest {
  FormationKind kind = FormationKind::kSingle;
  std::size_t k = 1;
  OracleKind oracle = OracleKind::kAdditive;
  SweepConfig sweep;
  DownwashParams field;
  MergeParams merge;
  NoiseParams noise;
};

/// Legs are E-aligned segments through the square, offset in N on a uniform
/// grid, flown for each altitude. Records come out in (altitude, leg, sample)
/// order; the noise stream index is the record index.
inline Dataset generate_sweep(const SweepRequest& req) {
  req.sweep.validate();
  req.field.validate();
  req.merge.validate();
  req.noise.validate();
  const FormationSpec spec{req.kind, req.k, req.sweep.spacing, req.sweep.speed};
  const auto offsets = formation_offsets(req.kind, req.k, req.sweep.spacing);

  Dataset ds;
  ds.meta = {1, req.kind, req.k, req.oracle, req.field, req.merge, req.noise, req.sweep};

  const auto& sw = req.sweep;
  const auto leg_n = uniform_nodes(sw.lateral_extent, sw.legs);
  const auto along_e = uniform_nodes(sw.lateral_extent, sw.samples_per_leg);
  const double leg_duration = sw.lateral_extent / sw.speed;

  ds.records.reserve(sw.altitudes.size() * sw.legs * sw.samples_per_leg);
  std::uint64_t index = 0;
  std::size_t leg_counter = 0;
  for (double altitude : sw.altitudes) {
    for (double n : leg_n) {
      const double leg_start = static_cast<double>(leg_counter++) * leg_duration;
      for (double e : along_e) {
        DatasetRecord rec;
        rec.time = leg_start + (e - along_e.front()) / sw.speed;
        rec.snapshot = snapshot_at(spec, offsets, n, e, altitude);
        rec.truth = aggregate(req.oracle, rec.snapshot, req.field, req.merge);
        rec.measured = add_noise(rec.truth, req.noise, index++);
        ds.records.push_back(std::move(rec));
      }
    }
  }
  return ds;
}

struct SlicePoint {
  double n = 0.0;
  double e = 0.0;
  Wrench6 wrench;
};

/// Noiseless oracle evaluated with the formation centroid on a uniform
/// resolution x resolution lattice (corners included) at fixed altitude.
inline std::vector<SlicePoint> grid_slice(const FormationSpec& spec, double altitude,
                                          double extent, std::size_t resolution,
                                          OracleKind oracle, const DownwashParams& field,
                                          const MergeParams& merge) {
  if (resolution < 2) throw std::invalid_argument("grid_slice: resolution must be >= 2");
  const auto offsets = formation_offsets(spec.kind, spec.k, spec.spacing);
  const auto nodes = uniform_nodes(extent, resolution);
  std::vector<SlicePoint> out;
  out.reserve(resolution * resolution);
  for (double n : nodes) {
    for (double e : nodes) {
      const auto snap = snapshot_at(spec, offsets, n, e, altitude);
      out.push_back({n, e, aggregate(oracle, snap, field, merge)});
    }
  }
  return out;
}

}  // namespace downwash
