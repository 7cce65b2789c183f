#include "leomoe/activation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace leomoe {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

bool wide_spread(std::span<const double> w) {
  if (w.empty()) return false;
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  return *hi > kLogDomainSpread * *lo;
}

}  // namespace

double elementary_symmetric(std::span<const double> weights, int k) {
  if (k < 0) throw std::invalid_argument("elementary_symmetric: k must be >= 0");
  if (static_cast<std::size_t>(k) > weights.size()) return 0.0;
  std::vector<double> e(static_cast<std::size_t>(k) + 1, 0.0);
  e[0] = 1.0;
  int m = 0;
  for (double w : weights) {
    ++m;
    for (int j = std::min(m, k); j >= 1; --j) e[j] += w * e[j - 1];
  }
  return e[k];
}

double log_elementary_symmetric(std::span<const double> weights, int k) {
  if (k < 0) throw std::invalid_argument("log_elementary_symmetric: k must be >= 0");
  if (static_cast<std::size_t>(k) > weights.size()) return kNegInf;
  std::vector<double> le(static_cast<std::size_t>(k) + 1, kNegInf);
  le[0] = 0.0;
  int m = 0;
  for (double w : weights) {
    ++m;
    const double lw = std::log(w);
    for (int j = std::min(m, k); j >= 1; --j) le[j] = log_add(le[j], lw + le[j - 1]);
  }
  return le[k];
}

double esp_ratio(std::span<const double> numerator, std::span<const double> denominator, int k) {
  if (wide_spread(denominator)) {
    const double ln = log_elementary_symmetric(numerator, k);
    if (ln == kNegInf) return 0.0;
    return std::exp(ln - log_elementary_symmetric(denominator, k));
  }
  return elementary_symmetric(numerator, k) / elementary_symmetric(denominator, k);
}

ActivationModel::ActivationModel(std::vector<double> weights, int k)
    : weights_(std::move(weights)), k_(k) {
  if (weights_.empty()) throw std::invalid_argument("ActivationModel: no experts");
  for (double w : weights_)
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("ActivationModel: weights must be positive and finite");
  if (k_ < 1 || k_ > n_experts())
    throw std::invalid_argument("ActivationModel: K must satisfy 1 <= K <= I");
  log_domain_ = wide_spread(weights_);
  e_all_ = elementary_symmetric(weights_, k_);
  log_e_all_ = log_elementary_symmetric(weights_, k_);
}

double ActivationModel::normalized_esp(std::span<const double> weights) const {
  if (log_domain_) {
    const double ln = log_elementary_symmetric(weights, k_);
    return ln == kNegInf ? 0.0 : std::exp(ln - log_e_all_);
  }
  return elementary_symmetric(weights, k_) / e_all_;
}

double ActivationModel::subset_pmf(std::span<const int> subset) const {
  if (static_cast<int>(subset.size()) != k_)
    throw std::invalid_argument("subset_pmf: subset must contain exactly K experts");
  std::vector<int> sorted(subset.begin(), subset.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("subset_pmf: duplicate expert index");
  if (sorted.front() < 0 || sorted.back() >= n_experts())
    throw std::invalid_argument("subset_pmf: expert index out of range");
  if (log_domain_) {
    double lp = 0.0;
    for (int i : sorted) lp += std::log(weights_[i]);
    return std::exp(lp - log_e_all_);
  }
  double p = 1.0;
  for (int i : sorted) p *= weights_[i];
  return p / e_all_;
}

double ActivationModel::activation_prob(int i) const {
  if (i < 0 || i >= n_experts()) throw std::invalid_argument("activation_prob: bad expert index");
  std::vector<double> rest;
  rest.reserve(weights_.size() - 1);
  for (int j = 0; j < n_experts(); ++j)
    if (j != i) rest.push_back(weights_[j]);
  return 1.0 - normalized_esp(rest);
}

std::vector<double> ActivationModel::activation_probs() const {
  std::vector<double> p(weights_.size());
  for (int i = 0; i < n_experts(); ++i) p[i] = activation_prob(i);
  return p;
}

RankedWeights rank_weights(const ActivationModel& model, std::span<const int> rank_to_expert) {
  if (static_cast<int>(rank_to_expert.size()) != model.n_experts())
    throw std::invalid_argument("rank_weights: one expert per rank required");
  std::vector<char> seen(rank_to_expert.size(), 0);
  RankedWeights r;
  r.values.reserve(rank_to_expert.size());
  for (int e : rank_to_expert) {
    if (e < 0 || e >= model.n_experts() || seen[e])
      throw std::invalid_argument("rank_weights: ranks must be a permutation of the experts");
    seen[e] = 1;
    r.values.push_back(model.weights()[e]);
  }
  return r;
}

double slowest_rank_cdf(const RankedWeights& ranked, int k, int s) {
  const int n = static_cast<int>(ranked.values.size());
  if (k < 1 || k > n) throw std::invalid_argument("slowest_rank_cdf: K must satisfy 1 <= K <= I");
  if (s <= k) return 0.0;
  if (s > n) return 1.0;
  const std::span<const double> all(ranked.values);
  return esp_ratio(all.first(static_cast<std::size_t>(s - 1)), all, k);
}

namespace {

void check_latencies(const RankedWeights& ranked, std::span<const double> tau) {
  if (tau.size() != ranked.values.size())
    throw std::invalid_argument("layer_comp_latency: one latency per rank required");
  if (!std::is_sorted(tau.begin(), tau.end()))
    throw std::invalid_argument("layer_comp_latency: latencies must be nondecreasing");
}

}  // namespace

double layer_comp_latency(const RankedWeights& ranked, int k, std::span<const double> tau) {
  check_latencies(ranked, tau);
  double total = 0.0, prev = 0.0;
  for (std::size_t s = 1; s <= tau.size(); ++s) {
    const double delta = tau[s - 1] - prev;
    prev = tau[s - 1];
    total += (1.0 - slowest_rank_cdf(ranked, k, static_cast<int>(s))) * delta;
  }
  return total;
}

double layer_comp_latency_direct(const RankedWeights& ranked, int k, std::span<const double> tau) {
  check_latencies(ranked, tau);
  double total = 0.0;
  for (std::size_t s = static_cast<std::size_t>(k); s <= tau.size(); ++s) {
    const double p = slowest_rank_cdf(ranked, k, static_cast<int>(s) + 1) -
                     slowest_rank_cdf(ranked, k, static_cast<int>(s));
    total += p * tau[s - 1];
  }
  return total;
}

std::vector<int> sample_topk_sequential(const ActivationModel& model, RandomStream& stream) {
  std::vector<int> remaining(static_cast<std::size_t>(model.n_experts()));
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(model.k()));
  for (int draw = 0; draw < model.k(); ++draw) {
    double total = 0.0;
    for (int e : remaining) total += model.weights()[e];
    double u = stream.uniform() * total;
    std::size_t pick = remaining.size() - 1;
    for (std::size_t j = 0; j < remaining.size(); ++j) {
      u -= model.weights()[remaining[j]];
      if (u < 0.0) {
        pick = j;
        break;
      }
    }
    chosen.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::exact: return "exact";
    case SamplerKind::sequential: return "sequential";
    default: return "auto";
  }
}

SamplerKind sampler_kind_from_string(const std::string& s) {
  if (s == "auto") return SamplerKind::automatic;
  if (s == "exact") return SamplerKind::exact;
  if (s == "sequential") return SamplerKind::sequential;
  throw std::invalid_argument("unknown sampler '" + s + "' (expected auto|exact|sequential)");
}

TopKSampler::TopKSampler(const ActivationModel& model, SamplerKind kind) : model_(model) {
  const int n = model.n_experts(), k = model.k();
  const bool use_exact =
      kind == SamplerKind::exact || (kind == SamplerKind::automatic && n <= kExactSamplerMaxExperts);
  if (!use_exact) return;
  if (n > 20) throw std::invalid_argument("TopKSampler: exact sampling limited to I <= 20");
  // Lexicographic K-subsets via a selection mask.
  std::vector<char> mask(static_cast<std::size_t>(n), 0);
  std::fill(mask.begin(), mask.begin() + k, 1);
  double acc = 0.0;
  do {
    std::vector<int> subset;
    for (int i = 0; i < n; ++i)
      if (mask[i]) subset.push_back(i);
    acc += model.subset_pmf(subset);
    subsets_.push_back(std::move(subset));
    cumulative_.push_back(acc);
  } while (std::prev_permutation(mask.begin(), mask.end()));
}

std::vector<int> TopKSampler::sample(RandomStream& stream) const {
  if (subsets_.empty()) return sample_topk_sequential(model_, stream);
  const double u = stream.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  return subsets_[static_cast<std::size_t>(it - cumulative_.begin())];
}

std::vector<double> fit_weights(std::span<const double> target_probs, int k, double tolerance,
                                int max_iterations) {
  const int n = static_cast<int>(target_probs.size());
  if (k < 1 || k > n) throw std::invalid_argument("fit_weights: K must satisfy 1 <= K <= I");
  double sum = 0.0;
  for (double p : target_probs) {
    if (!(p > 0.0 && p <= 1.0))
      throw std::invalid_argument("fit_weights: probabilities must lie in (0, 1]");
    sum += p;
  }
  if (std::abs(sum - k) > 1e-6 * k)
    throw std::invalid_argument("fit_weights: probabilities must sum to K");
  if (k == n) return std::vector<double>(static_cast<std::size_t>(n), 1.0);
  for (double p : target_probs)
    if (p >= 1.0) throw std::invalid_argument("fit_weights: P_i = 1 is unreachable for K < I");

  std::vector<double> w(target_probs.begin(), target_probs.end());
  for (double& x : w) x = x / (1.0 - x);
  for (int it = 0; it < max_iterations; ++it) {
    const ActivationModel model(w, k);
    const std::vector<double> p = model.activation_probs();
    double err = 0.0;
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(p[i] - target_probs[i]));
    if (err <= tolerance) return w;
    for (int i = 0; i < n; ++i) w[i] *= target_probs[i] / p[i];
    const double top = *std::max_element(w.begin(), w.end());
    for (double& x : w) x /= top;
  }
  throw std::runtime_error("fit_weights: fixed-point iteration did not converge");
}

std::vector<TraceRow> parse_activation_trace(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<TraceRow> rows;
  int line_no = 0;
  bool header = false;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      std::string compact;
      for (char c : line)
        if (c != ' ' && c != '\t') compact += c;
      if (compact != "layer,expert,count")
        throw std::runtime_error("trace line " + std::to_string(line_no) +
                                 ": expected header 'layer,expert,count'");
      header = true;
      continue;
    }
    std::istringstream fields(line);
    std::string a, b, c, extra;
    if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') ||
        !std::getline(fields, c, ',') || std::getline(fields, extra, ','))
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": expected 3 fields");
    try {
      std::size_t pa = 0, pb = 0, pc = 0;
      const std::string ta = trim(a), tb = trim(b), tc = trim(c);
      TraceRow r{std::stoi(ta, &pa), std::stoi(tb, &pb), std::stoll(tc, &pc)};
      if (pa != ta.size() || pb != tb.size() || pc != tc.size()) throw std::invalid_argument("");
      rows.push_back(r);
    } catch (const std::exception&) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": fields must be integers");
    }
  }
  if (!header) throw std::runtime_error("trace: missing header 'layer,expert,count'");
  return rows;
}

std::vector<std::vector<double>> trace_activation_probs(const std::vector<TraceRow>& rows,
                                                        int layers, int experts, int k) {
  std::vector<std::vector<std::int64_t>> counts(
      static_cast<std::size_t>(layers), std::vector<std::int64_t>(static_cast<std::size_t>(experts), -1));
  for (const TraceRow& r : rows) {
    if (r.layer < 1 || r.layer > layers || r.expert < 0 || r.expert >= experts)
      throw std::runtime_error("trace: (layer " + std::to_string(r.layer) + ", expert " +
                               std::to_string(r.expert) + ") out of range");
    auto& slot = counts[r.layer - 1][r.expert];
    if (slot != -1)
      throw std::runtime_error("trace: duplicate row for layer " + std::to_string(r.layer) +
                               ", expert " + std::to_string(r.expert));
    if (r.count <= 0) throw std::runtime_error("trace: counts must be positive");
    slot = r.count;
  }
  std::vector<std::vector<double>> probs(static_cast<std::size_t>(layers));
  for (int l = 0; l < layers; ++l) {
    std::int64_t total = 0;
    for (int e = 0; e < experts; ++e) {
      if (counts[l][e] == -1)
        throw std::runtime_error("trace: missing row for layer " + std::to_string(l + 1) +
                                 ", expert " + std::to_string(e));
      total += counts[l][e];
    }
    for (int e = 0; e < experts; ++e)
      probs[l].push_back(static_cast<double>(k) * counts[l][e] / static_cast<double>(total));
  }
  return probs;
}

}  // namespace leomoe
