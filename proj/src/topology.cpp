#include "leomoe/topology.hpp"

#include <algorithm>
#include <stdexcept>

namespace leomoe {

std::string to_string(SeamPolicy p) {
  return p == SeamPolicy::angular_rate_test ? "angular-rate-test" : "hard-disable";
}

SeamPolicy seam_policy_from_string(const std::string& s) {
  if (s == "angular-rate-test") return SeamPolicy::angular_rate_test;
  if (s == "hard-disable") return SeamPolicy::hard_disable;
  throw std::invalid_argument("unknown seam policy '" + s +
                              "' (expected angular-rate-test|hard-disable)");
}

void LinkParams::validate() const {
  if (!(survival_prob >= 0.0 && survival_prob <= 1.0))
    throw std::invalid_argument("links: survival_prob must lie in [0, 1]");
  if (!(rate_threshold_rad_s > 0.0))
    throw std::invalid_argument("links: rate_threshold_rad_s must be > 0");
  if (!(isl_rate_bps > 0.0)) throw std::invalid_argument("links: isl_rate_bps must be > 0");
  for (const auto& [edge, p] : survival_override)
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("links: survival override must lie in [0, 1]");
}

double LinkParams::survival_for(const Edge& e) const {
  auto it = survival_override.find(e);
  return it == survival_override.end() ? survival_prob : it->second;
}

std::vector<GridCoord> candidate_neighbors(GridCoord coord, const ConstellationConfig& config) {
  const int nx = config.n_planes, ny = config.sats_per_plane;
  std::vector<GridCoord> out;
  auto add = [&](GridCoord c) {
    if (c != coord && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  };
  if (ny > 1) {
    add({coord.x, (coord.y + 1) % ny});
    add({coord.x, (coord.y + ny - 1) % ny});
  }
  if (nx > 1) {
    if (config.spread == PlaneSpread::delta) {
      add({(coord.x + 1) % nx, coord.y});
      add({(coord.x + nx - 1) % nx, coord.y});
    } else {
      if (coord.x > 0) add({coord.x - 1, coord.y});
      if (coord.x < nx - 1) add({coord.x + 1, coord.y});
      if (nx >= 3 && coord.x == 0) add({nx - 1, coord.y});
      if (nx >= 3 && coord.x == nx - 1) add({0, coord.y});
    }
  }
  std::sort(out.begin(), out.end(),
            [&](GridCoord a, GridCoord b) { return config.id(a) < config.id(b); });
  return out;
}

std::vector<Edge> candidate_edges(const ConstellationConfig& config) {
  std::vector<Edge> edges;
  for (NodeId id = 0; id < config.n_sats(); ++id)
    for (GridCoord nb : candidate_neighbors(config.coord(id), config)) {
      const NodeId other = config.id(nb);
      if (id < other) edges.push_back({id, other});
    }
  std::sort(edges.begin(), edges.end());
  return edges;
}

bool is_seam_link(GridCoord u, GridCoord v, const ConstellationConfig& config) {
  if (config.spread != PlaneSpread::star || config.n_planes < 3 || u.y != v.y) return false;
  const int last = config.n_planes - 1;
  return (u.x == 0 && v.x == last) || (u.x == last && v.x == 0);
}

bool clears_earth(const Ephemeris& eph, GridCoord u, GridCoord v, int slot) {
  const Vec3& p = eph.position(slot, u);
  const Vec3& q = eph.position(slot, v);
  const Vec3 d = sub(q, p);
  const double len2 = dot(d, d);
  double t = len2 > 0.0 ? -dot(p, d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec3 closest = {p[0] + t * d[0], p[1] + t * d[1], p[2] + t * d[2]};
  return norm(closest) > eph.config().earth_radius_km;
}

namespace {

void require_candidate(GridCoord u, GridCoord v, const ConstellationConfig& config) {
  const auto nbs = candidate_neighbors(u, config);
  if (std::find(nbs.begin(), nbs.end(), v) == nbs.end())
    throw std::invalid_argument("link endpoints are not grid neighbors");
}

}  // namespace

bool deterministic_feasible(const Ephemeris& eph, const LinkParams& params, GridCoord u,
                            GridCoord v, int slot) {
  const auto& config = eph.config();
  require_candidate(u, v, config);
  if (params.seam_policy == SeamPolicy::hard_disable && is_seam_link(u, v, config)) return false;
  if (!clears_earth(eph, u, v, slot)) return false;
  return los_angular_rate(eph, u, v, slot) <= params.rate_threshold_rad_s;
}

TopologyRealization sample_realization(const Ephemeris& eph, const LinkParams& params, int slot,
                                       RandomStream& stream) {
  const auto& config = eph.config();
  TopologyRealization r;
  r.slot = slot;
  for (const Edge& e : candidate_edges(config)) {
    const double draw = stream.uniform();
    if (deterministic_feasible(eph, params, config.coord(e.u), config.coord(e.v), slot) &&
        draw < params.survival_for(e))
      r.edges.push_back(e);
  }
  return r;
}

std::vector<TopologyRealization> realization_sequence(const Ephemeris& eph,
                                                      const LinkParams& params,
                                                      std::uint64_t seed) {
  const RandomStream root(seed);
  std::vector<TopologyRealization> seq;
  seq.reserve(static_cast<std::size_t>(eph.n_slots()));
  for (int slot = 0; slot < eph.n_slots(); ++slot) {
    RandomStream s = root.derive(static_cast<std::uint64_t>(slot));
    seq.push_back(sample_realization(eph, params, slot, s));
  }
  return seq;
}

TopologyModel::TopologyModel(const Ephemeris& eph, LinkParams params)
    : eph_(&eph), params_(std::move(params)), candidates_(candidate_edges(eph.config())) {
  params_.validate();
  const auto& config = eph.config();
  const std::size_t ne = candidates_.size();
  feasible_.resize(ne * static_cast<std::size_t>(eph.n_slots()));
  angles_.resize(feasible_.size());
  survival_.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) survival_[e] = params_.survival_for(candidates_[e]);
  for (int slot = 0; slot < eph.n_slots(); ++slot) {
    for (std::size_t e = 0; e < ne; ++e) {
      const GridCoord u = config.coord(candidates_[e].u);
      const GridCoord v = config.coord(candidates_[e].v);
      const std::size_t k = static_cast<std::size_t>(slot) * ne + e;
      angles_[k] = central_angle(eph, u, v, slot);
      bool ok = !(params_.seam_policy == SeamPolicy::hard_disable && is_seam_link(u, v, config));
      ok = ok && clears_earth(eph, u, v, slot);
      ok = ok && los_angular_rate(eph, u, v, slot) <= params_.rate_threshold_rad_s;
      feasible_[k] = ok ? 1 : 0;
    }
  }
}

void TopologyModel::sample_alive(int slot, RandomStream& stream, std::vector<char>& alive) const {
  alive.resize(candidates_.size());
  for (std::size_t e = 0; e < candidates_.size(); ++e) {
    const double draw = stream.uniform();
    alive[e] = (feasible(slot, e) && draw < survival_[e]) ? 1 : 0;
  }
}

void TopologyModel::feasible_alive(int slot, std::vector<char>& alive) const {
  alive.resize(candidates_.size());
  for (std::size_t e = 0; e < candidates_.size(); ++e) alive[e] = feasible(slot, e) ? 1 : 0;
}

TopologyRealization TopologyModel::sample(int slot, RandomStream& stream) const {
  std::vector<char> alive;
  sample_alive(slot, stream, alive);
  return to_realization(slot, alive);
}

TopologyRealization TopologyModel::to_realization(int slot, const std::vector<char>& alive) const {
  TopologyRealization r;
  r.slot = slot;
  for (std::size_t e = 0; e < candidates_.size(); ++e)
    if (alive[e]) r.edges.push_back(candidates_[e]);
  return r;
}

}  // namespace leomoe
