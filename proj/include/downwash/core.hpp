#pragma once

// Frames, vehicle states and 6-DOF wrenches shared by every other header.
//
// Everything is expressed in the North-East-Down frame: a vehicle *above*
// the sufferer has a negative relative D coordinate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace downwash {

using Vec3 = Eigen::Vector3d;

enum Axis : std::size_t { kN = 0, kE = 1, kD = 2 };

struct VehicleState {
  Vec3 position = Vec3::Zero();  // m, NED
  Vec3 velocity = Vec3::Zero();  // m/s, NED
  double yaw = 0.0;              // rad

  bool finite() const {
    return position.allFinite() && velocity.allFinite() && std::isfinite(yaw);
  }
};

/// Neighbour state relative to the sufferer (neighbour minus sufferer).
struct RelativeState {
  Vec3 dpos = Vec3::Zero();
  Vec3 dvel = Vec3::Zero();

  /// Height of the neighbour above the sufferer, positive when above.
  double height_above() const { return -dpos[kD]; }
  double lateral_distance() const { return std::hypot(dpos[kN], dpos[kE]); }

  /// Model input features: relative position followed by relative velocity.
  std::array<double, 6> features() const {
    return {dpos[0], dpos[1], dpos[2], dvel[0], dvel[1], dvel[2]};
  }
};

inline RelativeState relative_state(const VehicleState& neighbour,
                                    const VehicleState& sufferer) {
  return {neighbour.position - sufferer.position,
          neighbour.velocity - sufferer.velocity};
}

/// Force (N) and torque (N·m) acting on the sufferer.
struct Wrench6 {
  double f_n = 0.0;
  double f_e = 0.0;
  double f_d = 0.0;
  double t_pitch = 0.0;
  double t_roll = 0.0;
  double t_yaw = 0.0;

  static constexpr std::size_t kSize = 6;
  static constexpr std::array<const char*, kSize> kAxisNames = {
      "N", "E", "D", "Pitch", "Roll", "Yaw"};

  static Wrench6 zero() { return {}; }

  static Wrench6 from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  template <typename Derived>
  static Wrench6 from_eigen(const Eigen::MatrixBase<Derived>& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5)};
  }

  std::array<double, kSize> to_array() const {
    return {f_n, f_e, f_d, t_pitch, t_roll, t_yaw};
  }

  double operator[](std::size_t axis) const {
    switch (axis) {
      case 0: return f_n;
      case 1: return f_e;
      case 2: return f_d;
      case 3: return t_pitch;
      case 4: return t_roll;
      case 5: return t_yaw;
    }
    throw std::out_of_range("Wrench6 axis index " + std::to_string(axis));
  }

  bool finite() const {
    for (double v : to_array()) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  Wrench6& operator+=(const Wrench6& o) {
    f_n += o.f_n;
    f_e += o.f_e;
    f_d += o.f_d;
    t_pitch += o.t_pitch;
    t_roll += o.t_roll;
    t_yaw += o.t_yaw;
    return *this;
  }

  friend bool operator==(const Wrench6&, const Wrench6&) = default;
};

inline Wrench6 wrench_add(const Wrench6& a, const Wrench6& b) {
  Wrench6 out = a;
  out += b;
  return out;
}

inline Wrench6 wrench_scale(const Wrench6& a, double s) {
  return {a.f_n * s,     a.f_e * s,    a.f_d * s,
          a.t_pitch * s, a.t_roll * s, a.t_yaw * s};
}

inline std::array<double, Wrench6::kSize> wrench_abs_sum(const Wrench6& a) {
  auto v = a.to_array();
  for (auto& x : v) x = std::abs(x);
  return v;
}

inline Wrench6 operator+(const Wrench6& a, const Wrench6& b) {
  return wrench_add(a, b);
}
inline Wrench6 operator-(const Wrench6& a, const Wrench6& b) {
  return wrench_add(a, wrench_scale(b, -1.0));
}

constexpr double kMinSeparation = 1e-6;

/// Sufferer plus K neighbours observed at one instant.
struct FormationSnapshot {
  VehicleState sufferer;
  std::vector<VehicleState> neighbours;

  std::size_t k() const { return neighbours.size(); }

  std::vector<RelativeState> relative_states() const {
    std::vector<RelativeState> out;
    out.reserve(neighbours.size());
    for (const auto& n : neighbours) out.push_back(relative_state(n, sufferer));
    return out;
  }

  /// Throws std::invalid_argument when a state is non-finite or a
  /// neighbour sits on top of the sufferer.
  void validate() const {
    if (!sufferer.finite()) {
      throw std::invalid_argument("snapshot: non-finite sufferer state");
    }
    for (std::size_t j = 0; j < neighbours.size(); ++j) {
      if (!neighbours[j].finite()) {
        throw std::invalid_argument("snapshot: non-finite neighbour " +
                                    std::to_string(j));
      }
      if ((neighbours[j].position - sufferer.position).norm() <=
          kMinSeparation) {
        throw std::invalid_argument("snapshot: neighbour " + std::to_string(j) +
                                    " coincides with the sufferer");
      }
    }
  }
};

/// Ordering key used wherever neighbours are summed: (D, N, E) of the
/// relative position, then relative velocity. Summing in this order makes
/// every aggregate bitwise independent of the input neighbour order.
inline bool canonical_less(const RelativeState& a, const RelativeState& b) {
  const std::array<double, 6> ka = {a.dpos[kD], a.dpos[kN], a.dpos[kE],
                                    a.dvel[kD], a.dvel[kN], a.dvel[kE]};
  const std::array<double, 6> kb = {b.dpos[kD], b.dpos[kN], b.dpos[kE],
                                    b.dvel[kD], b.dvel[kN], b.dvel[kE]};
  return ka < kb;
}

inline std::vector<RelativeState> canonical_relative_states(
    const FormationSnapshot& snap) {
  auto rel = snap.relative_states();
  std::sort(rel.begin(), rel.end(), canonical_less);
  return rel;
}

}  // namespace downwash
