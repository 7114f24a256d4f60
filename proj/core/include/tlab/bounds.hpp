#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace tlab {

/// Assignment of the constants hidden inside O(.) in the risk bounds. The
/// default sets every constant to 1; values are configuration, not truth.
struct ConstantsProfile {
  std::string name = "unit";
  double pretrain = 1.0;    ///< multiplies the 1/nu~ bracket
  double downstream = 1.0;  ///< multiplies the m-dependent terms

  std::string describe() const;
};

enum class BoundSetting { kSubspace, kMlp };

struct BoundParams {
  double n = 0, m = 0;
  double k = 0, k_prime = 0;
  double r = 0, d = 0;
  double nu_tilde = 0;
  double norm_cap = 1;  ///< D, the covariate norm bound
  double delta = 0.05;
  /// Network depth and caps M(1..depth), used by the tanh-network bound.
  std::vector<double> layer_caps;
};

inline constexpr double kInfiniteBound = std::numeric_limits<double>::infinity();

/// Right-hand side of the transfer-risk bound.
///
/// Subspace:
///   (1/nu~) [ sqrt(k) log n ( sqrt(k d r^2 / n) + k sqrt(r/n) ) + k/n^2
///             + sqrt(log(1/delta)/n) ]
///   + k'^{3/2} sqrt(r/m) + k' sqrt(log(1/delta)/m)
///
/// Network (depth L, caps M):
///   k r M(L)^3 D sqrt(L) prod_{p<L} M(p) / (nu~ sqrt n)
///   + k^{3/2} M(L)^3 / (nu~ sqrt n) + k'^{3/2} M(L)^3 / sqrt m
///
/// Returns kInfiniteBound when nu~ == 0; throws ContractViolation for other
/// non-positive parameters.
double evaluate_risk_bound(BoundSetting setting, const BoundParams& params,
                           const ConstantsProfile& profile = {});

/// The pretraining (1/nu~) part of the subspace bound alone.
double subspace_pretrain_term(const BoundParams& params, const ConstantsProfile& profile = {});

}  // namespace tlab
