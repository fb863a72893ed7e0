#pragma once

// Synthetic ground truth: a parametric single-vehicle downwash column, the
// additive and merging K-vehicle aggregation oracles, and measurement noise.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "downwash/core.hpp"
#include "downwash/rng.hpp"

namespace downwash {

/// Gaussian downwash column below a single vehicle.
struct DownwashParams {
  double peak_force = 4.0;             // N, directly beneath at zero separation
  double core_radius = 0.12;           // m, lateral 1/e radius
  double expansion_rate = 0.05;        // radius growth per metre of drop
  double vertical_decay_length = 3.0;  // m
  double torque_gain = 0.2;            // N·m per N per m of lateral offset
  double lateral_gain = 0.1;           // fraction of D-force pushed outward

  void validate() const {
    if (!(peak_force > 0) || !(core_radius > 0) || !(expansion_rate >= 0) ||
        !(vertical_decay_length > 0) || !std::isfinite(torque_gain) ||
        !std::isfinite(lateral_gain)) {
      throw std::invalid_argument("DownwashParams: out of range");
    }
  }
};

/// Lateral merging of columns shed by nearby vehicles.
struct MergeParams {
  double merge_radius = 0.6;      // m
  double contraction_rate = 0.6;  // pull toward cluster centroid per metre of drop
  double advect_gain = 0.15;      // forward drift per metre of drop

  void validate() const {
    if (!(merge_radius > 0) || !(contraction_rate >= 0) || !(advect_gain >= 0)) {
      throw std::invalid_argument("MergeParams: out of range");
    }
  }
};

/// Zero-mean Gaussian load-cell noise; +-0.05 N is roughly a 2-sigma band.
struct NoiseParams {
  double sigma_force = 0.025;   // N
  double sigma_torque = 0.005;  // N·m
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma_force >= 0) || !(sigma_torque >= 0)) {
      throw std::invalid_argument("NoiseParams: negative sigma");
    }
  }
};

enum class OracleKind { kAdditive, kMerging };

inline Wrench6 single_vehicle_wrench(const RelativeState& rel,
                                     const DownwashParams& p) {
  const double dz = rel.height_above();
  if (!(dz > 0.0)) return Wrench6::zero();

  const double dn = rel.dpos[kN];
  const double de = rel.dpos[kE];
  const double r = std::hypot(dn, de);
  const double radius = p.core_radius * (1.0 + p.expansion_rate * dz);
  const double q = r / radius;
  const double gauss = std::exp(-q * q);
  const double widening = p.core_radius / radius;
  const double f_d = p.peak_force * gauss * std::exp(-dz / p.vertical_decay_length) *
                     widening * widening;

  Wrench6 w;
  w.f_d = f_d;
  // Force applied at the column offset: tau = r x F with F = (0, 0, f_d).
  w.t_pitch = -p.torque_gain * f_d * dn;
  w.t_roll = p.torque_gain * f_d * de;
  if (r > 0.0) {
    // Pushes the sufferer away from the column axis.
    const double lateral = p.lateral_gain * f_d * q * gauss;
    w.f_n = -lateral * dn / r;
    w.f_e = -lateral * de / r;
  }
  return w;
}

inline Wrench6 aggregate_additive(const FormationSnapshot& snap,
                                  const DownwashParams& p) {
  Wrench6 total;
  for (const auto& rel : canonical_relative_states(snap)) {
    total += single_vehicle_wrench(rel, p);
  }
  return total;
}

namespace detail {

// Single-linkage components over lateral distance. Connectivity does not
// depend on the visiting order; labels are the smallest canonical index in
// each component.
inline std::vector<std::size_t> merge_clusters(
    const std::vector<RelativeState>& rel, const DownwashParams& p,
    const MergeParams& m) {
  const std::size_t k = rel.size();
  std::vector<std::size_t> parent(k);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  const double core_regime = 2.0 * p.core_radius;
  for (std::size_t a = 0; a < k; ++a) {
    if (!(rel[a].height_above() > core_regime)) continue;
    for (std::size_t b = a + 1; b < k; ++b) {
      if (!(rel[b].height_above() > core_regime)) continue;
      const double d = std::hypot(rel[a].dpos[kN] - rel[b].dpos[kN],
                                  rel[a].dpos[kE] - rel[b].dpos[kE]);
      if (d < m.merge_radius) {
        const auto ra = find(a);
        const auto rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  std::vector<std::size_t> label(k);
  for (std::size_t a = 0; a < k; ++a) label[a] = find(a);
  return label;
}

}  // namespace detail

/// Clusters of nearby columns merge: each source is pulled toward the
/// cluster centroid, drifts forward along the cluster velocity, and narrows,
/// all in proportion to its height above the sufferer. Singletons are
/// evaluated exactly as in aggregate_additive.
inline Wrench6 aggregate_merging(const FormationSnapshot& snap,
                                 const DownwashParams& p, const MergeParams& m) {
  const auto rel = canonical_relative_states(snap);
  const auto label = detail::merge_clusters(rel, p, m);
  const std::size_t k = rel.size();

  Wrench6 total;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t size = 0;
    double cn = 0.0, ce = 0.0, vn = 0.0, ve = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (label[j] != label[i]) continue;
      ++size;
      cn += rel[j].dpos[kN];
      ce += rel[j].dpos[kE];
      vn += rel[j].dvel[kN];
      ve += rel[j].dvel[kE];
    }
    if (size == 1) {
      total += single_vehicle_wrench(rel[i], p);
      continue;
    }
    const double c = static_cast<double>(size);
    cn /= c;
    ce /= c;
    const double speed = std::hypot(vn, ve);
    const double dir_n = speed > 1e-12 ? vn / speed : 0.0;
    const double dir_e = speed > 1e-12 ? ve / speed : 0.0;

    const double dz = rel[i].height_above();
    const double pull = std::min(1.0, m.contraction_rate * dz);
    const double drift = m.advect_gain * dz;
    RelativeState virt = rel[i];
    virt.dpos[kN] += pull * (cn - rel[i].dpos[kN]) + drift * dir_n;
    virt.dpos[kE] += pull * (ce - rel[i].dpos[kE]) + drift * dir_e;

    const double root_c = std::sqrt(c);
    DownwashParams narrowed = p;
    narrowed.core_radius *=
        (1.0 / root_c) * (1.0 + (root_c - 1.0) * std::exp(-dz / p.vertical_decay_length));
    total += single_vehicle_wrench(virt, narrowed);
  }
  return total;
}

inline Wrench6 aggregate(OracleKind kind, const FormationSnapshot& snap,
                         const DownwashParams& p, const MergeParams& m) {
  return kind == OracleKind::kAdditive ? aggregate_additive(snap, p)
                                       : aggregate_merging(snap, p, m);
}

/// Deterministic in (n.seed, stream_index).
inline Wrench6 add_noise(const Wrench6& w, const NoiseParams& n,
                         std::uint64_t stream_index) {
  if (n.sigma_force == 0.0 && n.sigma_torque == 0.0) return w;
  Rng rng(n.seed, stream_index);
  Wrench6 out = w;
  out.f_n += n.sigma_force * rng.normal();
  out.f_e += n.sigma_force * rng.normal();
  out.f_d += n.sigma_force * rng.normal();
  out.t_pitch += n.sigma_torque * rng.normal();
  out.t_roll += n.sigma_torque * rng.normal();
  out.t_yaw += n.sigma_torque * rng.normal();
  return out;
}

}  // namespace downwash
