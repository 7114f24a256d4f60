#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tlab/erm.hpp"
#include "tlab/linalg.hpp"
#include "tlab/model_space.hpp"
#include "tlab/rng.hpp"
#include "tlab/synthetic.hpp"

namespace tlab {

/// nu~ = sigma_r(alpha alpha^T), the r-th largest eigenvalue of the Gram of
/// the head's rows.
double diversity_parameter(const LinearHead& head);
double diversity_parameter(const Matrix& alpha);

enum class ComplexityKind { kGaussian, kRademacher };
enum class ComplexityScope { kEmpirical, kWorstCase };

struct ComplexityEstimate {
  double value = 0.0;
  std::size_t draws = 0;
  double std_error = 0.0;
  ComplexityKind kind = ComplexityKind::kGaussian;
  ComplexityScope scope = ComplexityScope::kEmpirical;
};

/// Gaussian complexity of the column-capped linear class {z -> alpha^T z :
/// ||alpha_s|| <= c} on embeddings Z (n x r). The supremum is closed form,
///   sup = (c/n) sum_{s<Kc} || sum_i g_{is} z_i ||,
/// and its expectation is estimated from `draws` fresh noise matrices.
ComplexityEstimate empirical_gaussian_complexity_linear(const Matrix& z, double c,
                                                        std::size_t num_classes,
                                                        std::size_t draws, Rng& rng);

/// Worst case over embeddings with ||z_i|| <= max_norm: c (Kc-1) max_norm / sqrt(n).
ComplexityEstimate worst_case_complexity_linear(double c, std::size_t num_classes, double max_norm,
                                                std::size_t n);

/// Complexity of a finite class given each candidate's outputs (all n x r):
/// per draw, the exact sup over candidates of (1/n) sum_{k,i} g_{ki} q_k(x_i).
/// Throws ContractViolation for an empty list or mismatched shapes.
ComplexityEstimate mc_complexity_finite(std::span<const Matrix> candidate_outputs,
                                        std::size_t draws, ComplexityKind kind, Rng& rng);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

MeanEstimate mean_and_se(std::span<const double> values);

struct RiskReport {
  double excess_transfer_risk = 0.0;
  double transfer_std_error = 0.0;
  double excess_pretrain_risk = 0.0;
  double pretrain_std_error = 0.0;
  std::size_t mc_samples = 0;
};

/// Excess risks in KL form, E_x KL[P(.|truth(x)) || P(.|fit(x))], over
/// `n_mc` fresh covariates. The pretrain fields are filled only when
/// `pre_head_hat` is given (and are 0 otherwise).
RiskReport transfer_risk(const Representation& rep_hat, const LinearHead& down_head_hat,
                         const LinearHead* pre_head_hat, const GroundTruth& truth,
                         const CovariateSpec& spec, std::size_t n_mc, Rng& rng);

/// Excess downstream risk of an arbitrary (representation, head) against the
/// downstream truth; the baseline uses SubspaceRep::identity.
MeanEstimate excess_risk_kl(const Representation& rep_hat, const LinearHead& head_hat,
                            const Representation& truth_rep, const LinearHead& truth_head,
                            const CovariateSpec& spec, std::size_t n_mc, Rng& rng);

/// Cross-check estimator: labels sampled from the truth, mean loss gap.
MeanEstimate excess_risk_sampled(const Representation& rep_hat, const LinearHead& head_hat,
                                 const Representation& truth_rep, const LinearHead& truth_head,
                                 const CovariateSpec& spec, std::size_t n_mc, Rng& rng);

/// inf over heads f' on rep_hat of E[loss(f' o rep_hat) - loss(truth)] for a
/// fixed truth head, solved as a convex soft-target head fit on an n_mc-sample
/// surrogate. The head class uses the truth head's column cap.
MeanEstimate representation_difference(const Representation& rep_hat,
                                       const Representation& truth_rep,
                                       const LinearHead& truth_head, const CovariateSpec& spec,
                                       std::size_t n_mc, const OptimConfig& cfg, Rng& rng);

/// Pre-training representation difference d_{F^p, f^p}(rep_hat; h).
MeanEstimate pretrain_rep_difference(const Representation& rep_hat, const GroundTruth& truth,
                                     const CovariateSpec& spec, std::size_t n_mc,
                                     const OptimConfig& cfg, Rng& rng);

struct SchurBound {
  Matrix lambda_sc;  ///< F_hh - F_hh^ (F_h^h^)^+ F_h^h
  double sigma1 = 0.0;
  double bound = 0.0;  ///< (k'-1) c0^2 / 2 * sigma1
};

/// Generalized Schur complement of the joint second-moment matrix of
/// (rep_hat(x), truth_rep(x)), estimated from n_mc covariates. Upper-bounds
/// the worst-case downstream representation difference. Throws
/// ContractViolation when n_mc < 10 r.
SchurBound schur_complement_bound(const Representation& rep_hat, const Representation& truth_rep,
                                  const CovariateSpec& spec, std::size_t n_mc, double c0,
                                  std::size_t k_prime, Rng& rng,
                                  double pinv_tol = kDefaultPinvTol);

struct ChainRuleReport {
  ComplexityEstimate composite;   ///< G_n(F o H), left side
  ComplexityEstimate rep_class;   ///< G_n(H)
  ComplexityEstimate head_worst;  ///< max over h in H of G_n(F | h o x)
  double lipschitz = 0.0;         ///< L(F) = max spectral norm of the heads
  double output_bound = 0.0;      ///< D = max ||f(h(x_i))||
  double rhs = 0.0;
  double rhs_std_error = 0.0;
  bool pass = false;
};

/// Vector-form chain rule on finite classes:
///   G_n(F o H) <= 8 sqrt(k-1) D / n^2 + 512 (L(F) G_n(H) + max_h G_n(F|h)) log n,
/// passing when the left side is below the right side plus three combined
/// standard errors. Heads are r x (k-1) matrices; representations map the
/// rows of X.
ChainRuleReport chain_rule_check(std::span<const Representation> reps,
                                 std::span<const Matrix> heads, const Matrix& x,
                                 std::size_t draws, Rng& rng);

}  // namespace tlab
