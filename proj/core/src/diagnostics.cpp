#include "tlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tlab/errors.hpp"
#include "tlab/softmax.hpp"

namespace tlab {

double diversity_parameter(const Matrix& alpha) {
  if (alpha.rows() == 0 || alpha.cols() == 0) return 0.0;
  const Vector eig = sym_eigenvalues(matmul_nt(alpha, alpha));
  return std::max(eig.back(), 0.0);
}

double diversity_parameter(const LinearHead& head) { return diversity_parameter(head.alpha()); }

MeanEstimate mean_and_se(std::span<const double> values) {
  MeanEstimate out;
  out.samples = values.size();
  if (values.empty()) return out;
  long double sum = 0.0L;
  for (double v : values) sum += v;
  const double mean = static_cast<double>(sum / values.size());
  long double sq = 0.0L;
  for (double v : values) sq += (v - mean) * (v - mean);
  out.mean = mean;
  if (values.size() > 1) {
    const double var = static_cast<double>(sq / (values.size() - 1));
    out.std_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

ComplexityEstimate empirical_gaussian_complexity_linear(const Matrix& z, double c,
                                                        std::size_t num_classes,
                                                        std::size_t draws, Rng& rng) {
  if (z.rows() == 0) throw ContractViolation("gaussian complexity: need n >= 1");
  if (num_classes < 2 || draws < 1) throw ContractViolation("gaussian complexity: bad arguments");
  const std::size_t n = z.rows();
  const std::size_t r = z.cols();
  std::vector<double> samples(draws);
  Vector acc(r);
  for (std::size_t t = 0; t < draws; ++t) {
    double total = 0.0;
    for (std::size_t s = 0; s + 1 < num_classes; ++s) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double g = rng.normal();
        auto zi = z.row(i);
        for (std::size_t j = 0; j < r; ++j) acc[j] += g * zi[j];
      }
      total += norm2(acc);
    }
    samples[t] = c * total / static_cast<double>(n);
  }
  const MeanEstimate m = mean_and_se(samples);
  return {m.mean, draws, m.std_error, ComplexityKind::kGaussian, ComplexityScope::kEmpirical};
}

ComplexityEstimate worst_case_complexity_linear(double c, std::size_t num_classes, double max_norm,
                                                std::size_t n) {
  if (n == 0 || num_classes < 2) throw ContractViolation("worst-case complexity: bad arguments");
  const double value = c * static_cast<double>(num_classes - 1) * max_norm /
                       std::sqrt(static_cast<double>(n));
  return {value, 0, 0.0, ComplexityKind::kGaussian, ComplexityScope::kWorstCase};
}

ComplexityEstimate mc_complexity_finite(std::span<const Matrix> candidate_outputs,
                                        std::size_t draws, ComplexityKind kind, Rng& rng) {
  if (candidate_outputs.empty()) throw ContractViolation("mc_complexity_finite: empty class");
  if (draws < 1) throw ContractViolation("mc_complexity_finite: need at least one draw");
  const std::size_t rows = candidate_outputs.front().rows();
  const std::size_t cols = candidate_outputs.front().cols();
  for (const Matrix& q : candidate_outputs) {
    if (q.rows() != rows || q.cols() != cols) {
      throw ContractViolation("mc_complexity_finite: candidate output shapes differ");
    }
  }
  if (rows == 0) throw ContractViolation("mc_complexity_finite: need n >= 1");
  const double inv_n = 1.0 / static_cast<double>(rows);
  std::vector<double> samples(draws);
  std::vector<double> noise(rows * cols);
  for (std::size_t t = 0; t < draws; ++t) {
    for (double& g : noise) g = kind == ComplexityKind::kGaussian ? rng.normal() : rng.rademacher();
    double best = -std::numeric_limits<double>::infinity();
    for (const Matrix& q : candidate_outputs) best = std::max(best, dot(noise, q.data()));
    samples[t] = best * inv_n;
  }
  const MeanEstimate m = mean_and_se(samples);
  return {m.mean, draws, m.std_error, kind, ComplexityScope::kEmpirical};
}

MeanEstimate excess_risk_kl(const Representation& rep_hat, const LinearHead& head_hat,
                            const Representation& truth_rep, const LinearHead& truth_head,
                            const CovariateSpec& spec, std::size_t n_mc, Rng& rng) {
  if (n_mc == 0) throw ContractViolation("excess risk: n_mc must be positive");
  if (head_hat.output_dim() != truth_head.output_dim()) {
    throw ContractViolation("excess risk: fitted and true heads have different class counts");
  }
  const Matrix x = sample_covariates(spec, n_mc, rng);
  const Matrix eta_true = head_outputs(truth_head, embed(truth_rep, x));
  const Matrix eta_fit = head_outputs(head_hat, embed(rep_hat, x));
  std::vector<double> kl(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) kl[i] = kl_divergence(eta_true.row(i), eta_fit.row(i));
  return mean_and_se(kl);
}

MeanEstimate excess_risk_sampled(const Representation& rep_hat, const LinearHead& head_hat,
                                 const Representation& truth_rep, const LinearHead& truth_head,
                                 const CovariateSpec& spec, std::size_t n_mc, Rng& rng) {
  if (n_mc == 0) throw ContractViolation("excess risk: n_mc must be positive");
  const Matrix x = sample_covariates(spec, n_mc, rng);
  const Matrix y = sample_labels(truth_rep, truth_head, x, rng);
  const Matrix eta_true = head_outputs(truth_head, embed(truth_rep, x));
  const Matrix eta_fit = head_outputs(head_hat, embed(rep_hat, x));
  std::vector<double> gap(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    gap[i] = cross_entropy(eta_fit.row(i), y.row(i)) - cross_entropy(eta_true.row(i), y.row(i));
  }
  return mean_and_se(gap);
}

RiskReport transfer_risk(const Representation& rep_hat, const LinearHead& down_head_hat,
                         const LinearHead* pre_head_hat, const GroundTruth& truth,
                         const CovariateSpec& spec, std::size_t n_mc, Rng& rng) {
  RiskReport report;
  report.mc_samples = n_mc;
  Rng down_stream = rng.split(11);
  const MeanEstimate down =
      excess_risk_kl(rep_hat, down_head_hat, truth.rep, truth.down_head, spec, n_mc, down_stream);
  report.excess_transfer_risk = down.mean;
  report.transfer_std_error = down.std_error;
  if (pre_head_hat != nullptr) {
    Rng pre_stream = rng.split(12);
    const MeanEstimate pre =
        excess_risk_kl(rep_hat, *pre_head_hat, truth.rep, truth.pre_head, spec, n_mc, pre_stream);
    report.excess_pretrain_risk = pre.mean;
    report.pretrain_std_error = pre.std_error;
  }
  return report;
}

MeanEstimate representation_difference(const Representation& rep_hat,
                                       const Representation& truth_rep,
                                       const LinearHead& truth_head, const CovariateSpec& spec,
                                       std::size_t n_mc, const OptimConfig& cfg, Rng& rng) {
  if (n_mc == 0) throw ContractViolation("representation difference: n_mc must be positive");
  const Matrix x = sample_covariates(spec, n_mc, rng);
  const Matrix eta_true = head_outputs(truth_head, embed(truth_rep, x));
  // Expected cross-entropy under the true conditional is the soft-target loss;
  // its minimizer over heads also minimizes the mean KL.
  Matrix targets(n_mc, truth_head.output_dim());
  for (std::size_t i = 0; i < n_mc; ++i) {
    const Vector p = grad_log_partition(eta_true.row(i));
    std::copy(p.begin(), p.end(), targets.row(i).begin());
  }
  const Matrix z = embed(rep_hat, x);
  const HeadFit fit = fit_head_on_embeddings(z, targets, truth_head.column_cap(), cfg);
  const Matrix eta_fit = head_outputs(fit.head, z);
  std::vector<double> kl(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) kl[i] = kl_divergence(eta_true.row(i), eta_fit.row(i));
  return mean_and_se(kl);
}

MeanEstimate pretrain_rep_difference(const Representation& rep_hat, const GroundTruth& truth,
                                     const CovariateSpec& spec, std::size_t n_mc,
                                     const OptimConfig& cfg, Rng& rng) {
  return representation_difference(rep_hat, truth.rep, truth.pre_head, spec, n_mc, cfg, rng);
}

SchurBound schur_complement_bound(const Representation& rep_hat, const Representation& truth_rep,
                                  const CovariateSpec& spec, std::size_t n_mc, double c0,
                                  std::size_t k_prime, Rng& rng, double pinv_tol) {
  const std::size_t r_hat = output_dim(rep_hat);
  const std::size_t r = output_dim(truth_rep);
  if (n_mc < 10 * std::max(r, r_hat)) {
    throw ContractViolation("schur_complement_bound: n_mc must be at least 10 r");
  }
  if (k_prime < 2) throw ContractViolation("schur_complement_bound: need k' >= 2");
  const Matrix x = sample_covariates(spec, n_mc, rng);
  const Matrix h_hat = embed(rep_hat, x);
  const Matrix h = embed(truth_rep, x);
  const double inv_n = 1.0 / static_cast<double>(n_mc);
  const Matrix f_hat_hat = gram(h_hat) * inv_n;
  const Matrix f_hat_h = matmul_tn(h_hat, h) * inv_n;
  const Matrix f_hh = gram(h) * inv_n;
  Matrix lambda = f_hh - matmul_tn(f_hat_h, matmul(pinv_psd(f_hat_hat, pinv_tol), f_hat_h));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < i; ++j) lambda(i, j) = lambda(j, i) = 0.5 * (lambda(i, j) + lambda(j, i));
  const double sigma1 = std::max(sym_eigenvalues(lambda).front(), 0.0);
  const double bound = static_cast<double>(k_prime - 1) * c0 * c0 / 2.0 * sigma1;
  return {std::move(lambda), sigma1, bound};
}

ChainRuleReport chain_rule_check(std::span<const Representation> reps,
                                 std::span<const Matrix> heads, const Matrix& x,
                                 std::size_t draws, Rng& rng) {
  if (reps.empty() || heads.empty()) throw ContractViolation("chain_rule_check: empty class");
  const std::size_t n = x.rows();
  if (n == 0) throw ContractViolation("chain_rule_check: need n >= 1");
  const std::size_t km1 = heads.front().cols();

  std::vector<Matrix> rep_outputs;
  rep_outputs.reserve(reps.size());
  for (const auto& h : reps) rep_outputs.push_back(embed(h, x));

  ChainRuleReport report;
  std::vector<Matrix> composite;
  composite.reserve(reps.size() * heads.size());
  for (const Matrix& z : rep_outputs) {
    for (const Matrix& a : heads) {
      if (a.cols() != km1) throw ContractViolation("chain_rule_check: heads differ in class count");
      composite.push_back(matmul(z, a));
      for (std::size_t i = 0; i < n; ++i)
        report.output_bound = std::max(report.output_bound, norm2(composite.back().row(i)));
    }
  }
  for (const Matrix& a : heads) report.lipschitz = std::max(report.lipschitz, singular_values(a).front());

  Rng composite_stream = rng.split(1);
  Rng rep_stream = rng.split(2);
  report.composite = mc_complexity_finite(composite, draws, ComplexityKind::kGaussian, composite_stream);
  report.rep_class = mc_complexity_finite(rep_outputs, draws, ComplexityKind::kGaussian, rep_stream);

  // Worst case of the head class over the candidate embeddings.
  report.head_worst.value = -std::numeric_limits<double>::infinity();
  for (std::size_t hi = 0; hi < rep_outputs.size(); ++hi) {
    std::vector<Matrix> outputs;
    outputs.reserve(heads.size());
    for (const Matrix& a : heads) outputs.push_back(matmul(rep_outputs[hi], a));
    Rng head_stream = rng.split(100 + hi);
    const ComplexityEstimate est = mc_complexity_finite(outputs, draws, ComplexityKind::kGaussian, head_stream);
    if (est.value > report.head_worst.value) report.head_worst = est;
  }
  report.head_worst.scope = ComplexityScope::kWorstCase;

  const double nn = static_cast<double>(n);
  const double log_n = std::log(nn);
  const double complexity = report.lipschitz * report.rep_class.value + report.head_worst.value;
  report.rhs = 8.0 * std::sqrt(static_cast<double>(km1)) * report.output_bound / (nn * nn) +
               512.0 * complexity * log_n;
  const double rhs_var = std::pow(512.0 * log_n, 2) *
                         (std::pow(report.lipschitz * report.rep_class.std_error, 2) +
                          std::pow(report.head_worst.std_error, 2));
  report.rhs_std_error = std::sqrt(rhs_var);
  const double band = 3.0 * std::sqrt(std::pow(report.composite.std_error, 2) + rhs_var);
  report.pass = report.composite.value <= report.rhs + band;
  return report;
}

}  // namespace tlab
