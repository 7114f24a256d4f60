#include "tlab/softmax.hpp"

#include <algorithm>
#include <cmath>

#include "tlab/errors.hpp"

namespace tlab {

namespace {

void require_nonempty(std::span<const double> eta, const char* op) {
  if (eta.empty()) throw ContractViolation(std::string(op) + ": need at least two classes");
}

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) throw ContractViolation(std::string(op) + ": length mismatch");
}

// Probabilities with the max shift applied; returns the K-th (implicit) mass.
double fill_probabilities(std::span<const double> eta, std::span<double> out) {
  double shift = 0.0;
  for (double e : eta) shift = std::max(shift, e);
  double denom = std::exp(-shift);
  for (std::size_t s = 0; s < eta.size(); ++s) {
    out[s] = std::exp(eta[s] - shift);
    denom += out[s];
  }
  for (std::size_t s = 0; s < eta.size(); ++s) out[s] /= denom;
  return std::exp(-shift) / denom;
}

// (e^{-x} + x - 1) / x^2 and (e^{x} - x - 1) / x^2 for x >= 0, accurate near 0.
double lower_taylor_factor(double x) {
  if (x < 1e-3) return 0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0;
  return (std::expm1(-x) + x) / (x * x);
}

double upper_taylor_factor(double x) {
  if (x < 1e-3) return 0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0;
  return (std::expm1(x) - x) / (x * x);
}

}  // namespace

OneHotLabel OneHotLabel::from_class(std::size_t label_index, std::size_t num_classes) {
  if (num_classes < 2) throw ContractViolation("OneHotLabel: need at least two classes");
  if (label_index < 1 || label_index > num_classes) {
    throw ContractViolation("OneHotLabel: class index out of range");
  }
  Vector v(num_classes - 1, 0.0);
  if (label_index < num_classes) v[label_index - 1] = 1.0;
  return OneHotLabel(std::move(v));
}

OneHotLabel OneHotLabel::from_vector(std::span<const double> y) {
  if (y.empty()) throw ContractViolation("OneHotLabel: need at least two classes");
  double sum = 0.0;
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw ContractViolation("OneHotLabel: entries must be 0 or 1");
    sum += v;
  }
  if (sum > 1.0) throw ContractViolation("OneHotLabel: more than one active class");
  return OneHotLabel(Vector(y.begin(), y.end()));
}

std::size_t OneHotLabel::class_index() const noexcept {
  for (std::size_t s = 0; s < values_.size(); ++s)
    if (values_[s] == 1.0) return s + 1;
  return values_.size() + 1;
}

double log_partition(std::span<const double> eta) {
  require_nonempty(eta, "log_partition");
  double shift = 0.0;
  for (double e : eta) shift = std::max(shift, e);
  double sum = std::exp(-shift);
  for (double e : eta) sum += std::exp(e - shift);
  return shift + std::log(sum);
}

Vector softmax_prob(std::span<const double> eta) {
  require_nonempty(eta, "softmax_prob");
  Vector p(eta.size() + 1);
  p.back() = fill_probabilities(eta, std::span<double>(p.data(), eta.size()));
  return p;
}

Vector grad_log_partition(std::span<const double> eta) {
  require_nonempty(eta, "grad_log_partition");
  Vector g(eta.size());
  fill_probabilities(eta, g);
  return g;
}

Matrix hessian_log_partition(std::span<const double> eta) {
  const Vector sigma = grad_log_partition(eta);
  const std::size_t n = sigma.size();
  Matrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) h(i, j) = -sigma[i] * sigma[j];
    h(i, i) += sigma[i];
  }
  return h;
}

double cross_entropy(std::span<const double> eta, std::span<const double> y) {
  require_same_length(eta, y, "cross_entropy");
  return log_partition(eta) - dot(y, eta);
}

double cross_entropy(std::span<const double> eta, const OneHotLabel& y) {
  return cross_entropy(eta, y.values());
}

double kl_divergence(std::span<const double> eta_true, std::span<const double> eta_model) {
  require_same_length(eta_true, eta_model, "kl_divergence");
  const Vector sigma = grad_log_partition(eta_true);
  double linear = 0.0;
  for (std::size_t s = 0; s < sigma.size(); ++s) linear += sigma[s] * (eta_model[s] - eta_true[s]);
  const double kl = log_partition(eta_model) - log_partition(eta_true) - linear;
  return std::max(kl, 0.0);
}

DirectionalDerivatives directional_derivatives(std::span<const double> eta,
                                               std::span<const double> v) {
  require_same_length(eta, v, "directional_derivatives");
  // With P(t; v^j) = [1 +] sum_s v_s^j e^{eta_s + t v_s}, the closed forms
  //   g'   = P1/P0
  //   g''  = (P2 P0 - P1^2)/P0^2
  //   g''' = (P3 P0^2 - 3 P2 P1 P0 + 2 P1^3)/P0^3
  // are the mean, variance and third central moment of the random variable
  // taking value v_s with probability sigma_s (and 0 with the class-K mass).
  // The central-moment form avoids the cancellation of the raw expansion.
  Vector p(eta.size());
  const double p_last = fill_probabilities(eta, p);
  double mean = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) mean += p[s] * v[s];
  double m2 = p_last * mean * mean;
  double m3 = -p_last * mean * mean * mean;
  for (std::size_t s = 0; s < p.size(); ++s) {
    const double dev = v[s] - mean;
    m2 += p[s] * dev * dev;
    m3 += p[s] * dev * dev * dev;
  }
  return {mean, m2, m3};
}

SelfConcordanceReport check_self_concordance(std::span<const double> eta,
                                             std::span<const double> v,
                                             std::span<const double> t_grid) {
  require_same_length(eta, v, "check_self_concordance");
  const double vnorm = norm2(v);
  if (vnorm == 0.0) throw ContractViolation("check_self_concordance: direction must be nonzero");
  SelfConcordanceReport report;
  Vector point(eta.size());
  for (double t : t_grid) {
    for (std::size_t s = 0; s < eta.size(); ++s) point[s] = eta[s] + t * v[s];
    const DirectionalDerivatives g = directional_derivatives(point, v);
    if (!(g.second > 1e-300)) {
      ++report.skipped;
      continue;
    }
    ++report.evaluated;
    report.max_ratio = std::max(report.max_ratio, std::abs(g.third) / (vnorm * g.second));
  }
  report.pass = report.max_ratio <= kSelfConcordanceConstant + 1e-9;
  return report;
}

KlBounds kl_quadratic_bounds(std::span<const double> eta_true, std::span<const double> eta_model) {
  require_same_length(eta_true, eta_model, "kl_quadratic_bounds");
  Vector diff(eta_true.size());
  for (std::size_t s = 0; s < diff.size(); ++s) diff[s] = eta_model[s] - eta_true[s];
  const double dist = norm2(diff);
  const double sq = dist * dist;
  const Vector hess_eigs = sym_eigenvalues(hessian_log_partition(eta_true));
  const double c0 = 0.5 * std::max(hess_eigs.back(), 0.0);
  const double q0 = std::max(norm2(eta_model), norm2(eta_true));
  return {c0 * std::exp(-10.0 * q0) * sq, kl_divergence(eta_true, eta_model), 0.5 * sq};
}

TaylorSandwich taylor_sandwich(std::span<const double> w, std::span<const double> v, double r) {
  require_same_length(w, v, "taylor_sandwich");
  const double base = log_partition(w);
  Vector shifted(w.size());
  for (std::size_t s = 0; s < w.size(); ++s) shifted[s] = w[s] + v[s];
  const double value = log_partition(shifted);
  const double vnorm = norm2(v);
  if (vnorm == 0.0) return {base, value, base};
  const Vector sigma = grad_log_partition(w);
  const double linear = dot(sigma, v);
  // v^T (diag(sigma) - sigma sigma^T) v
  double quad = -linear * linear;
  for (std::size_t s = 0; s < v.size(); ++s) quad += sigma[s] * v[s] * v[s];
  quad = std::max(quad, 0.0);
  const double x = r * vnorm;
  // quad / (R^2 |v|^2) * (e^{-x} + x - 1) = quad * lower_taylor_factor(x)
  return {base + linear + quad * lower_taylor_factor(x), value,
          base + linear + quad * upper_taylor_factor(x)};
}

}  // namespace tlab
