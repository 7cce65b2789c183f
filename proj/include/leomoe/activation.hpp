#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "leomoe/rng.hpp"

namespace leomoe {

/// K-th elementary symmetric polynomial by the O(I*K) recurrence
/// e_k(w_1..w_m) = e_k(w_1..w_{m-1}) + w_m * e_{k-1}(w_1..w_{m-1}).
/// Returns 0 when k exceeds the number of weights.
double elementary_symmetric(std::span<const double> weights, int k);

/// log e_k computed with log-sum-exp at every recurrence step; -inf when
/// k exceeds the number of weights.
double log_elementary_symmetric(std::span<const double> weights, int k);

/// Weight spread above which ratios of e_K are taken in the log domain.
inline constexpr double kLogDomainSpread = 1e6;

/// PPSWOR top-K activation: a set U of K experts is drawn with probability
/// prod_{i in U} w_i / e_K(w).
class ActivationModel {
 public:
  ActivationModel(std::vector<double> weights, int k);

  const std::vector<double>& weights() const { return weights_; }
  int k() const { return k_; }
  int n_experts() const { return static_cast<int>(weights_.size()); }
  bool log_domain() const { return log_domain_; }

  /// Throws std::invalid_argument unless the subset has K distinct valid indices.
  double subset_pmf(std::span<const int> subset) const;

  /// P_i = 1 - e_K(w without w_i) / e_K(w).
  double activation_prob(int i) const;
  std::vector<double> activation_probs() const;

  /// e_K(subset of weights) / e_K(all weights).
  double normalized_esp(std::span<const double> weights) const;

 private:
  std::vector<double> weights_;
  int k_;
  bool log_domain_;
  double e_all_;
  double log_e_all_;
};

/// Weights reordered by latency rank: values[s] is the weight of the expert
/// placed on the satellite with the (s+1)-th smallest expected latency.
struct RankedWeights {
  std::vector<double> values;
};

/// rank_to_expert[s] is the expert placed at latency rank s (0-based).
RankedWeights rank_weights(const ActivationModel& model, std::span<const int> rank_to_expert);

/// e_K(numerator) / e_K(denominator), taken in the log domain when the
/// denominator weights span more than kLogDomainSpread.
double esp_ratio(std::span<const double> numerator, std::span<const double> denominator, int k);

/// Pr(R < s) for the 1-based rank s of the slowest active expert:
/// e_K(ranked_1..ranked_{s-1}) / e_K(all). Returns 0 for s <= K and 1 for s > I.
double slowest_rank_cdf(const RankedWeights& ranked, int k, int s);

/// Expected bottleneck latency sum_s (1 - Pr(R < s)) * (tau_s - tau_{s-1}).
/// `sorted_latencies` must be nondecreasing and match the number of ranks;
/// throws std::invalid_argument otherwise.
double layer_comp_latency(const RankedWeights& ranked, int k,
                          std::span<const double> sorted_latencies);

/// Same objective in the direct form sum_{s=K..I} Pr(R = s) * tau_s.
double layer_comp_latency_direct(const RankedWeights& ranked, int k,
                                 std::span<const double> sorted_latencies);

/// Sequential PPSWOR: K successive draws proportional to the remaining weights.
/// Returns the chosen indices in ascending order.
std::vector<int> sample_topk_sequential(const ActivationModel& model, RandomStream& stream);

enum class SamplerKind { automatic, exact, sequential };
std::string to_string(SamplerKind k);
SamplerKind sampler_kind_from_string(const std::string& s);

/// Top-K sampler that either inverts the exact set PMF (enumerating every
/// K-subset once at construction) or falls back to sequential draws.
/// `automatic` uses the exact table when I <= kExactSamplerMaxExperts.
class TopKSampler {
 public:
  static constexpr int kExactSamplerMaxExperts = 12;

  explicit TopKSampler(const ActivationModel& model, SamplerKind kind = SamplerKind::automatic);

  bool exact() const { return !subsets_.empty(); }
  const ActivationModel& model() const { return model_; }

  std::vector<int> sample(RandomStream& stream) const;

 private:
  ActivationModel model_;
  std::vector<std::vector<int>> subsets_;
  std::vector<double> cumulative_;
};

/// Weights whose PPSWOR activation probabilities match `target_probs`
/// (which must lie in (0, 1) and sum to K), by the multiplicative fixed point
/// w_i <- w_i * P*_i / P_i(w). Throws std::runtime_error on non-convergence.
std::vector<double> fit_weights(std::span<const double> target_probs, int k,
                                double tolerance = 1e-10, int max_iterations = 100000);

/// Rows of an activation trace: number of tokens for which `expert` of
/// `layer` was activated.
struct TraceRow {
  int layer = 0;
  int expert = 0;
  std::int64_t count = 0;
};

/// Parses the `layer,expert,count` table. Throws std::runtime_error with the
/// offending line number.
std::vector<TraceRow> parse_activation_trace(const std::string& text);

/// Per-layer empirical activation probabilities count / tokens, where the
/// number of tokens of a layer is sum(count) / K. Layers are 1-based and
/// experts 0-based; every (layer, expert) pair must appear exactly once.
std::vector<std::vector<double>> trace_activation_probs(const std::vector<TraceRow>& rows,
                                                        int layers, int experts, int k);

}  // namespace leomoe
