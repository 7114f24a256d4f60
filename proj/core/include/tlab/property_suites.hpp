#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace tlab {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  /// Worst value of the suite's checked statistic, e.g. the largest
  /// self-concordance ratio or gradient relative error.
  double worst = 0.0;
  double limit = 0.0;
  double seconds = 0.0;
  bool pass() const noexcept { return cases > 0 && failures == 0; }
};

/// |g'''| <= 5 ||v|| g'' at random (eta, v, t), K in {2, 5, 50}, norms <= 5.
SuiteResult self_concordance_suite(std::size_t cases, std::uint64_t seed);
/// Hessian of the log-partition has spectrum in [-1e-10, 1 + 1e-10], K <= 100.
SuiteResult hessian_spectrum_suite(std::size_t cases, std::uint64_t seed);
/// Quadratic KL sandwich on random pairs with ||eta|| <= 3.
SuiteResult kl_sandwich_suite(std::size_t cases, std::uint64_t seed);
/// Cross-entropy, head, representation (subspace and network) and log-det
/// gradients against central differences, relative error <= 1e-4.
SuiteResult gradient_suite(std::size_t instances, std::uint64_t seed);
/// Finite-class chain rule on random instances (n = 50, r = 2, k = 3).
SuiteResult chain_rule_suite(std::size_t instances, std::uint64_t seed);

/// The suites above at their default sizes.
std::vector<SuiteResult> run_property_suites(std::uint64_t seed);

}  // namespace tlab
