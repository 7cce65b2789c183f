#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace leomoe {

using NodeId = std::int32_t;
using Vec3 = std::array<double, 3>;

inline constexpr double kGravParamKm3S2 = 398600.4418;
inline constexpr double kSpeedOfLightKmS = 299792.458;
inline constexpr double kPi = 3.14159265358979323846;

/// Satellite identity: orbit-plane index x and in-plane index y.
struct GridCoord {
  int x = 0;
  int y = 0;
  auto operator<=>(const GridCoord&) const = default;
};

enum class PlaneSpread {
  star,   // right ascensions spread over pi; seam between planes 0 and N_x-1
  delta,  // right ascensions spread over 2*pi
};

struct ConstellationConfig {
  int n_planes = 33;
  int sats_per_plane = 32;
  double altitude_km = 550.0;
  double inclination_deg = 87.0;
  int phasing = 13;
  double earth_radius_km = 6371.0;
  int n_slots = 200;
  double slot_duration_s = 10.0;
  PlaneSpread spread = PlaneSpread::star;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;

  int n_sats() const { return n_planes * sats_per_plane; }
  double orbit_radius_km() const { return altitude_km + earth_radius_km; }
  /// Orbital angular rate in rad/s.
  double mean_motion() const;

  NodeId id(GridCoord c) const { return c.x * sats_per_plane + c.y; }
  GridCoord coord(NodeId id) const { return {id / sats_per_plane, id % sats_per_plane}; }
  bool contains(GridCoord c) const {
    return c.x >= 0 && c.x < n_planes && c.y >= 0 && c.y < sats_per_plane;
  }
};

std::string to_string(PlaneSpread s);
PlaneSpread plane_spread_from_string(const std::string& s);

/// All N_x * N_y coordinates in flat-id order.
std::vector<GridCoord> build_grid(const ConstellationConfig& config);

/// Orbital state of one satellite on its circular orbit at time t.
struct OrbitState {
  Vec3 position;     // km, Earth-centered inertial
  Vec3 radial;       // unit
  Vec3 along_track;  // unit, direction of motion
  Vec3 cross_track;  // unit, orbit normal
};

OrbitState orbit_state(const ConstellationConfig& config, GridCoord c, double t_s);

/// Circular-orbit positions of every satellite at every slot.
class Ephemeris {
 public:
  explicit Ephemeris(ConstellationConfig config);

  const ConstellationConfig& config() const { return config_; }
  int n_slots() const { return config_.n_slots; }

  const Vec3& position(int slot, GridCoord c) const {
    return positions_[static_cast<std::size_t>(slot) * config_.n_sats() + config_.id(c)];
  }
  double slot_time(int slot) const { return slot * config_.slot_duration_s; }

 private:
  ConstellationConfig config_;
  std::vector<Vec3> positions_;
};

Ephemeris propagate(const ConstellationConfig& config);

/// Central angle in [0, pi] between two satellites at a slot.
double central_angle(const Ephemeris& eph, GridCoord u, GridCoord v, int slot);

/// Line-of-sight angular rate (rad/s) of the u-v link at a slot.
///
/// The line-of-sight direction is expressed in each terminal's local orbital
/// frame and differentiated by a central difference of one slot duration on
/// either side; the larger of the two terminal rates is returned. Throws
/// std::domain_error when the satellites coincide at a sample time.
double los_angular_rate(const Ephemeris& eph, GridCoord u, GridCoord v, int slot);

// Small vector helpers shared by the geometry code.
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

/// Angle between two (not necessarily unit) vectors, robust near 0 and pi.
double angle_between(const Vec3& a, const Vec3& b);

}  // namespace leomoe
