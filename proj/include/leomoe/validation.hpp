#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace leomoe {

enum class ValidationLevel { small, full };

std::string to_string(ValidationLevel l);
ValidationLevel validation_level_from_string(const std::string& s);

struct PropertyResult {
  std::string property;
  int instances = 0;
  int failures = 0;
  double max_error = 0.0;
  bool passed() const { return failures == 0; }
};

struct ValidationOptions {
  ValidationLevel level = ValidationLevel::small;
  std::uint64_t seed = 1;
  /// Mutation check: swap the two fastest ranks of the sorted placement so
  /// the placement battery is expected to fail.
  bool inject_inversion = false;
};

/// Enumerable-instance batteries: top-K set distribution, bottleneck
/// objective identity, slowest-rank CDF, optimality of the sorted
/// assignment and the exchange step, and shortest-path correctness.
std::vector<PropertyResult> run_validation(const ValidationOptions& options);

}  // namespace leomoe
