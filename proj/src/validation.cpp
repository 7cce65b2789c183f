#include "leomoe/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "leomoe/activation.hpp"
#include "leomoe/placement.hpp"
#include "leomoe/rng.hpp"
#include "leomoe/routing.hpp"

namespace leomoe {

std::string to_string(ValidationLevel l) { return l == ValidationLevel::small ? "small" : "full"; }

ValidationLevel validation_level_from_string(const std::string& s) {
  if (s == "small") return ValidationLevel::small;
  if (s == "full") return ValidationLevel::full;
  throw std::invalid_argument("unknown validation level '" + s + "' (expected small|full)");
}

namespace {

constexpr double kTol = 1e-12;

int draw_int(RandomStream& r, int lo, int hi) {
  return lo + static_cast<int>(r.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
}

std::vector<double> draw_weights(RandomStream& r, int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (double& x : w) x = 0.02 + r.uniform();
  return w;
}

std::vector<double> draw_sorted_latencies(RandomStream& r, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (double& x : t) x = r.uniform();
  std::sort(t.begin(), t.end());
  return t;
}

/// Every K-subset of {0..n-1} as a bitmask.
std::vector<unsigned> subsets(int n, int k) {
  std::vector<unsigned> out;
  for (unsigned m = 0; m < (1u << n); ++m)
    if (std::popcount(m) == k) out.push_back(m);
  return out;
}

double product(const std::vector<double>& w, unsigned mask) {
  double p = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (mask >> i & 1u) p *= w[i];
  return p;
}

struct Tally {
  PropertyResult r;
  void check(double err, double tol = kTol) {
    r.max_error = std::max(r.max_error, err);
    if (!(err <= tol)) ++r.failures;
  }
};

PropertyResult check_set_distribution(int instances, RandomStream rng) {
  Tally t{{"topk_set_distribution", instances, 0, 0.0}};
  for (int n = 0; n < instances; ++n) {
    const int I = draw_int(rng, 2, 10);
    const int K = draw_int(rng, 1, std::min(4, I));
    const std::vector<double> w = draw_weights(rng, I);
    const ActivationModel model(w, K);
    double total = 0.0;
    std::vector<double> marginal(static_cast<std::size_t>(I), 0.0);
    double err = 0.0;
    for (unsigned m : subsets(I, K)) {
      std::vector<int> idx;
      for (int i = 0; i < I; ++i)
        if (m >> i & 1u) idx.push_back(i);
      const double p = model.subset_pmf(idx);
      total += p;
      for (int i : idx) marginal[i] += p;
    }
    err = std::max(err, std::abs(total - 1.0));
    double sum_p = 0.0;
    for (int i = 0; i < I; ++i) {
      const double p = model.activation_prob(i);
      err = std::max(err, std::abs(p - marginal[i]));
      sum_p += p;
    }
    err = std::max(err, std::abs(sum_p - K));
    t.check(err);
  }
  return t.r;
}

PropertyResult check_objective_identity(int instances, RandomStream rng) {
  Tally t{{"bottleneck_objective_identity", instances, 0, 0.0}};
  for (int n = 0; n < instances; ++n) {
    const int I = draw_int(rng, 2, 10);
    const int K = draw_int(rng, 1, std::min(4, I));
    const RankedWeights ranked{draw_weights(rng, I)};
    const std::vector<double> tau = draw_sorted_latencies(rng, I);
    t.check(std::abs(layer_comp_latency(ranked, K, tau) -
                     layer_comp_latency_direct(ranked, K, tau)));
  }
  return t.r;
}

PropertyResult check_slowest_rank_cdf(int instances, RandomStream rng) {
  Tally t{{"slowest_rank_cdf", instances, 0, 0.0}};
  for (int n = 0; n < instances; ++n) {
    const int I = draw_int(rng, 2, 10);
    const int K = draw_int(rng, 1, std::min(4, I));
    const RankedWeights ranked{draw_weights(rng, I)};
    const std::vector<unsigned> all = subsets(I, K);
    double z = 0.0;
    for (unsigned m : all) z += product(ranked.values, m);
    double err = 0.0;
    for (int s = 1; s <= I + 1; ++s) {
      // Pr(R < s): every active rank (1-based) is below s.
      double mass = 0.0;
      for (unsigned m : all)
        if (m >> (s - 1) == 0u) mass += product(ranked.values, m);
      err = std::max(err, std::abs(slowest_rank_cdf(ranked, K, s) - mass / z));
    }
    t.check(err);
  }
  return t.r;
}

std::vector<PropertyResult> check_sorted_placement(int per_cell, bool inject, RandomStream rng) {
  Tally opt{{"sorted_placement_optimal", 0, 0, 0.0}};
  Tally exch{{"adjacent_exchange_nonincreasing", 0, 0, 0.0}};
  for (int I = 2; I <= 6; ++I) {
    for (int K = 1; K <= 3; ++K) {
      if (K > I) continue;
      for (int n = 0; n < per_cell; ++n) {
        const ActivationModel model(draw_weights(rng, I), K);
        const std::vector<double> tau = draw_sorted_latencies(rng, I);
        // Sorted rule: most popular expert on the fastest rank.
        std::vector<int> order(static_cast<std::size_t>(I));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
          return model.weights()[a] > model.weights()[b];
        });
        if (inject) std::swap(order[0], order[1]);
        std::vector<int> rank_of(static_cast<std::size_t>(I));
        for (int r = 0; r < I; ++r) rank_of[order[r]] = r;
        const double sorted_obj = enumerated_layer_latency(model, rank_of, tau);
        const BruteForceResult best = brute_force_placement(model, tau);
        ++opt.r.instances;
        opt.check(std::abs(sorted_obj - best.objective));

        // Exchange step from a random assignment: fixing an adjacent
        // inversion (less popular expert on the faster rank) never hurts.
        std::vector<int> perm(static_cast<std::size_t>(I));
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = I - 1; i > 0; --i)
          std::swap(perm[i], perm[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
        std::vector<int> rank(static_cast<std::size_t>(I));
        for (int r = 0; r < I; ++r) rank[perm[r]] = r;
        const double base = enumerated_layer_latency(model, rank, tau);
        double worst = 0.0;
        for (int r = 0; r + 1 < I; ++r) {
          const int fast = perm[r], slow = perm[r + 1];
          if (model.weights()[fast] >= model.weights()[slow]) continue;
          std::vector<int> swapped = rank;
          std::swap(swapped[fast], swapped[slow]);
          worst = std::max(worst, enumerated_layer_latency(model, swapped, tau) - base);
        }
        ++exch.r.instances;
        exch.check(worst);
      }
    }
  }
  return {opt.r, exch.r};
}

PropertyResult check_shortest_paths(int instances, RandomStream rng) {
  Tally t{{"shortest_paths_match_relaxation", instances, 0, 0.0}};
  for (int n = 0; n < instances; ++n) {
    const int V = draw_int(rng, 2, 30);
    std::vector<Edge> edges;
    for (int u = 0; u < V; ++u)
      for (int v = u + 1; v < V; ++v)
        if (rng.uniform() < 0.15) edges.push_back({u, v});
    std::vector<double> cost(edges.size());
    for (double& c : cost) c = 1e-3 * (0.1 + rng.uniform());
    const Graph g(V, edges);
    const DistanceMatrix dm = distance_matrix(g, cost, 0);
    // Iterated relaxation per source, summing along the path like Dijkstra.
    bool ok = true;
    for (int s = 0; s < V && ok; ++s) {
      std::vector<double> d(static_cast<std::size_t>(V), kUnreachable);
      d[s] = 0.0;
      for (int it = 0; it < V; ++it)
        for (std::size_t e = 0; e < edges.size(); ++e) {
          const auto [a, b] = edges[e];
          if (d[a] + cost[e] < d[b]) d[b] = d[a] + cost[e];
          if (d[b] + cost[e] < d[a]) d[a] = d[b] + cost[e];
        }
      const ShortestPathTree tree = shortest_paths(g, cost, s);
      for (int v = 0; v < V; ++v) ok = ok && tree.dist[v] == d[v];
    }
    for (int a = 0; a < V && ok; ++a) {
      ok = ok && dm.at(a, a) == 0.0;
      for (int b = 0; b < V && ok; ++b) {
        ok = ok && dm.at(a, b) == dm.at(b, a);
        for (int c = 0; c < V && ok; ++c)
          if (dm.at(a, c) != kUnreachable && dm.at(c, b) != kUnreachable)
            ok = dm.at(a, b) <= (dm.at(a, c) + dm.at(c, b)) * (1.0 + kTol);
      }
    }
    if (!ok) ++t.r.failures;
  }
  return t.r;
}

}  // namespace

std::vector<PropertyResult> run_validation(const ValidationOptions& options) {
  const bool full = options.level == ValidationLevel::full;
  const RandomStream root = RandomStream(options.seed).derive("validation");
  std::vector<PropertyResult> out;
  out.push_back(check_set_distribution(full ? 100 : 20, root.derive("set_distribution")));
  out.push_back(check_objective_identity(full ? 200 : 40, root.derive("objective_identity")));
  out.push_back(check_slowest_rank_cdf(full ? 200 : 40, root.derive("slowest_rank_cdf")));
  for (PropertyResult& r :
       check_sorted_placement(full ? 200 : 20, options.inject_inversion, root.derive("placement")))
    out.push_back(r);
  out.push_back(check_shortest_paths(full ? 100 : 20, root.derive("shortest_paths")));
  return out;
}

}  // namespace leomoe
