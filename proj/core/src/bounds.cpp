#include "tlab/bounds.hpp"

#include <cmath>
#include <sstream>

#include "tlab/errors.hpp"
#include "tlab/text_io.hpp"

namespace tlab {

std::string ConstantsProfile::describe() const {
  std::ostringstream out;
  out << name << "(pretrain=" << format_real(pretrain) << ", downstream=" << format_real(downstream)
      << ")";
  return out.str();
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw ContractViolation(std::string("evaluate_risk_bound: ") + name + " must be positive");
}

void validate_common(const BoundParams& p) {
  require_positive(p.n, "n");
  require_positive(p.m, "m");
  require_positive(p.k, "k");
  require_positive(p.k_prime, "k'");
  require_positive(p.r, "r");
  require_positive(p.d, "d");
  require_positive(p.norm_cap, "D");
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw ContractViolation("evaluate_risk_bound: delta in (0,1)");
  if (!(p.nu_tilde >= 0.0)) throw ContractViolation("evaluate_risk_bound: nu~ must be >= 0");
}

}  // namespace

double subspace_pretrain_term(const BoundParams& p, const ConstantsProfile& profile) {
  validate_common(p);
  if (p.nu_tilde == 0.0) return kInfiniteBound;
  const double log_inv_delta = std::log(1.0 / p.delta);
  const double bracket =
      std::sqrt(p.k) * std::log(p.n) *
          (std::sqrt(p.k * p.d * p.r * p.r / p.n) + p.k * std::sqrt(p.r / p.n)) +
      p.k / (p.n * p.n) + std::sqrt(log_inv_delta / p.n);
  return profile.pretrain * bracket / p.nu_tilde;
}

double evaluate_risk_bound(BoundSetting setting, const BoundParams& p,
                           const ConstantsProfile& profile) {
  validate_common(p);
  if (p.nu_tilde == 0.0) return kInfiniteBound;
  const double log_inv_delta = std::log(1.0 / p.delta);
  if (setting == BoundSetting::kSubspace) {
    const double down = std::pow(p.k_prime, 1.5) * std::sqrt(p.r / p.m) +
                        p.k_prime * std::sqrt(log_inv_delta / p.m);
    return subspace_pretrain_term(p, profile) + profile.downstream * down;
  }
  if (p.layer_caps.empty()) throw ContractViolation("evaluate_risk_bound: network needs layer caps");
  for (double c : p.layer_caps) require_positive(c, "M(p)");
  const double depth = static_cast<double>(p.layer_caps.size());
  const double m_last = p.layer_caps.back();
  double inner = 1.0;
  for (std::size_t i = 0; i + 1 < p.layer_caps.size(); ++i) inner *= p.layer_caps[i];
  const double m3 = m_last * m_last * m_last;
  const double pre = (p.k * p.r * m3 * p.norm_cap * std::sqrt(depth) * inner +
                      std::pow(p.k, 1.5) * m3) /
                     (p.nu_tilde * std::sqrt(p.n));
  const double down = std::pow(p.k_prime, 1.5) * m3 / std::sqrt(p.m);
  return profile.pretrain * pre + profile.downstream * down;
}

}  // namespace tlab
