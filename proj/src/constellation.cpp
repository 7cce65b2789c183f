#include "leomoe/constellation.hpp"

#include <algorithm>
#include <stdexcept>

namespace leomoe {

void ConstellationConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("constellation: " + msg); };
  if (n_planes < 1) fail("n_planes must be >= 1");
  if (sats_per_plane < 1) fail("sats_per_plane must be >= 1");
  if (!(altitude_km > 0.0)) fail("altitude_km must be > 0");
  if (!(earth_radius_km > 0.0)) fail("earth_radius_km must be > 0");
  if (phasing < 0 || phasing >= n_planes) fail("phasing must satisfy 0 <= phasing < n_planes");
  if (n_slots < 1) fail("n_slots must be >= 1");
  if (!(slot_duration_s > 0.0)) fail("slot_duration_s must be > 0");
  if (!(inclination_deg >= 0.0 && inclination_deg <= 180.0))
    fail("inclination_deg must lie in [0, 180]");
}

double ConstellationConfig::mean_motion() const {
  const double r = orbit_radius_km();
  return std::sqrt(kGravParamKm3S2 / (r * r * r));
}

std::string to_string(PlaneSpread s) { return s == PlaneSpread::star ? "star" : "delta"; }

PlaneSpread plane_spread_from_string(const std::string& s) {
  if (s == "star") return PlaneSpread::star;
  if (s == "delta") return PlaneSpread::delta;
  throw std::invalid_argument("unknown plane spread '" + s + "' (expected star|delta)");
}

std::vector<GridCoord> build_grid(const ConstellationConfig& config) {
  std::vector<GridCoord> grid;
  grid.reserve(static_cast<std::size_t>(config.n_sats()));
  for (int x = 0; x < config.n_planes; ++x)
    for (int y = 0; y < config.sats_per_plane; ++y) grid.push_back({x, y});
  return grid;
}

OrbitState orbit_state(const ConstellationConfig& config, GridCoord c, double t_s) {
  const double spread = config.spread == PlaneSpread::star ? kPi : 2.0 * kPi;
  const double raan = spread * c.x / config.n_planes;
  const double inc = config.inclination_deg * kPi / 180.0;
  const double phase = 2.0 * kPi * c.y / config.sats_per_plane +
                       2.0 * kPi * config.phasing * c.x /
                           (static_cast<double>(config.n_planes) * config.sats_per_plane) +
                       config.mean_motion() * t_s;

  const double cO = std::cos(raan), sO = std::sin(raan);
  const double ci = std::cos(inc), si = std::sin(inc);
  const double cu = std::cos(phase), su = std::sin(phase);
  const double r = config.orbit_radius_km();

  OrbitState s;
  s.radial = {cO * cu - sO * su * ci, sO * cu + cO * su * ci, su * si};
  s.along_track = {-cO * su - sO * cu * ci, -sO * su + cO * cu * ci, cu * si};
  s.cross_track = {sO * si, -cO * si, ci};
  s.position = {r * s.radial[0], r * s.radial[1], r * s.radial[2]};
  return s;
}

Ephemeris::Ephemeris(ConstellationConfig config) : config_(std::move(config)) {
  config_.validate();
  const int n = config_.n_sats();
  positions_.resize(static_cast<std::size_t>(config_.n_slots) * n);
  for (int slot = 0; slot < config_.n_slots; ++slot) {
    const double t = slot_time(slot);
    for (NodeId id = 0; id < n; ++id)
      positions_[static_cast<std::size_t>(slot) * n + id] =
          orbit_state(config_, config_.coord(id), t).position;
  }
}

Ephemeris propagate(const ConstellationConfig& config) { return Ephemeris(config); }

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

double central_angle(const Ephemeris& eph, GridCoord u, GridCoord v, int slot) {
  if (u == v) return 0.0;
  return angle_between(eph.position(slot, u), eph.position(slot, v));
}

namespace {

// Line-of-sight unit vector from `from` to `to`, in the local orbital frame of `from`.
Vec3 local_los(const OrbitState& from, const OrbitState& to) {
  const Vec3 d = sub(to.position, from.position);
  const double len = norm(d);
  if (!(len > 1e-9)) throw std::domain_error("los_angular_rate: coincident satellite positions");
  return {dot(d, from.radial) / len, dot(d, from.along_track) / len,
          dot(d, from.cross_track) / len};
}

}  // namespace

double los_angular_rate(const Ephemeris& eph, GridCoord u, GridCoord v, int slot) {
  const auto& cfg = eph.config();
  const double h = cfg.slot_duration_s;
  const double t = eph.slot_time(slot);
  const OrbitState u0 = orbit_state(cfg, u, t - h), u1 = orbit_state(cfg, u, t + h);
  const OrbitState v0 = orbit_state(cfg, v, t - h), v1 = orbit_state(cfg, v, t + h);
  const double rate_u = angle_between(local_los(u0, v0), local_los(u1, v1)) / (2.0 * h);
  const double rate_v = angle_between(local_los(v0, u0), local_los(v1, u1)) / (2.0 * h);
  return std::max(rate_u, rate_v);
}

}  // namespace leomoe
