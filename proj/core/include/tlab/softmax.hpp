#pragma once

#include <cstddef>
#include <span>

#include "tlab/linalg.hpp"

// Geometry of the multinomial logistic log-partition function
//   Phi(eta) = log(1 + sum_s exp(eta_s)),  eta in R^{K-1},
// where class K carries the implicit logit 0. Labels are vectors in
// {0,1}^{K-1}; the all-zero vector encodes class K.

namespace tlab {

/// Validated one-hot label of length K-1 (all-zero means class K).
class OneHotLabel {
 public:
  /// `label_index` in [1, K].
  static OneHotLabel from_class(std::size_t label_index, std::size_t num_classes);
  /// Throws ContractViolation unless entries are in {0,1} with sum <= 1.
  static OneHotLabel from_vector(std::span<const double> y);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t num_classes() const noexcept { return values_.size() + 1; }
  /// 1-based class index.
  std::size_t class_index() const noexcept;

 private:
  explicit OneHotLabel(Vector v) : values_(std::move(v)) {}
  Vector values_;
};

/// log(1 + sum exp(eta_s)), max-shifted.
double log_partition(std::span<const double> eta);

/// Full K-vector of class probabilities; entry K is 1/(1+sum exp(eta)).
Vector softmax_prob(std::span<const double> eta);

/// First K-1 softmax probabilities, i.e. the gradient of Phi.
Vector grad_log_partition(std::span<const double> eta);

/// diag(sigma) - sigma sigma^T.
Matrix hessian_log_partition(std::span<const double> eta);

/// -y^T eta + Phi(eta). `y` may also be a probability vector over the first
/// K-1 classes (expected loss under soft targets).
double cross_entropy(std::span<const double> eta, std::span<const double> y);
double cross_entropy(std::span<const double> eta, const OneHotLabel& y);

/// KL[P(.|eta_true) || P(.|eta_model)] from the exponential-family identity
/// Phi(eta_model) - Phi(eta_true) - grad Phi(eta_true)^T (eta_model - eta_true).
double kl_divergence(std::span<const double> eta_true, std::span<const double> eta_model);

/// Derivatives at t = 0 of g(t) = Phi(eta + t v).
struct DirectionalDerivatives {
  double first;
  double second;
  double third;
};

DirectionalDerivatives directional_derivatives(std::span<const double> eta,
                                               std::span<const double> v);

struct SelfConcordanceReport {
  double max_ratio = 0.0;  ///< max |g'''| / (||v|| g'') over evaluated points
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  ///< points with g'' <= 1e-300
  bool pass = true;
};

inline constexpr double kSelfConcordanceConstant = 5.0;

/// Checks |g'''(t)| <= 5 ||v|| g''(t) at every t in `t_grid`.
SelfConcordanceReport check_self_concordance(std::span<const double> eta,
                                             std::span<const double> v,
                                             std::span<const double> t_grid);

struct KlBounds {
  double lower;
  double kl;
  double upper;
  bool holds() const noexcept { return lower <= kl && kl <= upper; }
};

/// Quadratic sandwich c0 e^{-10 q0} ||v||^2 <= KL <= ||v||^2 / 2 with
/// v = eta_model - eta_true, c0 = lambda_min(Hessian(eta_true)) / 2 and
/// q0 = max(||eta_model||, ||eta_true||).
KlBounds kl_quadratic_bounds(std::span<const double> eta_true, std::span<const double> eta_model);

struct TaylorSandwich {
  double lower;
  double value;
  double upper;
  bool holds(double slack = 0.0) const noexcept {
    return lower <= value + slack && value <= upper + slack;
  }
};

/// Exponential-form Taylor bounds on Phi(w + v) implied by modified
/// self-concordance with constant `r`:
///   Phi(w) + v.grad + q/(R^2|v|^2) (e^{-R|v|} + R|v| - 1) <= Phi(w+v)
///   Phi(w+v) <= Phi(w) + v.grad + q/(R^2|v|^2) (e^{R|v|} - R|v| - 1)
/// with q = v^T Hessian(w) v.
TaylorSandwich taylor_sandwich(std::span<const double> w, std::span<const double> v,
                               double r = kSelfConcordanceConstant);

}  // namespace tlab
