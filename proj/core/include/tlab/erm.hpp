#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tlab/linalg.hpp"
#include "tlab/model_space.hpp"
#include "tlab/rng.hpp"
#include "tlab/synthetic.hpp"

namespace tlab {

struct OptimConfig {
  std::size_t max_iters = 5000;
  /// Stop when the projected (or Riemannian) gradient norm falls below this.
  double grad_tol = 1e-6;
  double initial_step = 1.0;
  /// Backtracking shrink factor in (0, 1); accepted steps grow by its inverse.
  double shrink = 0.5;
  /// Armijo sufficient-decrease constant.
  double armijo = 1e-4;
  double min_step = 1e-14;
  double max_step = 1e6;
  /// Ridge mu added to alpha alpha^T inside the log-det term.
  double ridge = 1e-8;

  /// Throws ContractViolation if a field is out of range.
  void validate() const;
};

struct TraceRow {
  std::size_t iter = 0;
  double risk = 0.0;         ///< empirical cross-entropy
  double regularizer = 0.0;  ///< ln det(alpha alpha^T + mu I); 0 when unused
  double grad_norm = 0.0;
  double step = 0.0;         ///< head step size of the iteration
  double nu_tilde = 0.0;     ///< sigma_r(alpha alpha^T) after the iteration
};

enum class StopReason { kNone, kConverged, kRoundingFloor, kMaxIters, kStalled };

std::string to_string(StopReason reason);

struct TrainTrace {
  std::vector<TraceRow> rows;
  StopReason stop = StopReason::kNone;
  bool stalled() const noexcept { return stop == StopReason::kStalled; }
  /// Objective risk - lambda * regularizer of every row.
  std::vector<double> objectives(double lambda) const;
};

/// CSV: iter,risk,regularizer,grad_norm,step,nu_tilde
void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace);

struct LogDetValue {
  double value;     ///< ln det(alpha alpha^T + mu I)
  Matrix gradient;  ///< 2 (alpha alpha^T + mu I)^{-1} alpha
};

/// Throws SingularMatrix when alpha alpha^T + mu I is not PD.
LogDetValue logdet_regularizer(const Matrix& alpha, double mu);

/// Gradient of the empirical risk with respect to representation parameters:
/// one d x r matrix for a subspace (Euclidean gradient in B), one matrix per
/// layer for an MLP.
struct LossGrad {
  double risk = 0.0;
  Matrix head_grad;              ///< r x (K-1)
  std::vector<Matrix> rep_grad;  ///< empty when not requested
};

/// risk = (1/n) sum_i cross_entropy(alpha^T h(x_i), y_i) with its gradients.
/// Rows of Y may be soft targets (probabilities over the first K-1 classes).
LossGrad loss_and_grad(const Representation& rep, const LinearHead& head, const Matrix& x,
                       const Matrix& y, bool with_rep_grad = true);

/// Loss and head gradient given precomputed embeddings Z (n x r).
LossGrad head_loss_and_grad(const Matrix& z, const Matrix& alpha, const Matrix& y);

struct HypothesisConfig {
  std::size_t r = 3;
  double head_cap = 1.0;
  /// Hidden width; 0 selects the orthonormal-subspace class.
  std::size_t mlp_hidden = 0;
  double mlp_inner_cap = 2.0;
  double mlp_outer_cap = 2.0;
};

struct PretrainResult {
  Representation rep;
  LinearHead head;
  TrainTrace trace;
};

/// Alternating projected/retracted gradient descent on
///   (1/n) sum cross_entropy - lambda * ln det(alpha alpha^T + mu I)
/// over (representation, column-capped head). Initialization: random frame
/// (or random capped MLP) drawn from `rng`, head = 0.
PretrainResult pretrain(const LabeledDataset& data, const HypothesisConfig& hyp, double lambda,
                        const OptimConfig& cfg, Rng& rng);

struct HeadFit {
  LinearHead head;
  TrainTrace trace;
};

/// Convex projected gradient descent for a column-capped head on a frozen
/// representation. `init` defaults to the zero head.
HeadFit fit_downstream_head(const Representation& rep, const LabeledDataset& data, double cap,
                            const OptimConfig& cfg,
                            const std::optional<Matrix>& init = std::nullopt);

/// Same solver on precomputed embeddings and (possibly soft) targets.
HeadFit fit_head_on_embeddings(const Matrix& z, const Matrix& y, double cap, const OptimConfig& cfg,
                               const std::optional<Matrix>& init = std::nullopt);

struct BaselineFit {
  SubspaceRep rep;  ///< identity on R^d
  LinearHead head;  ///< d x (K'-1)
  TrainTrace trace;
};

/// Multinomial logistic regression directly on x with column cap `cap`.
/// Throws ContractViolation for an empty dataset.
BaselineFit train_baseline(const LabeledDataset& data, double cap, const OptimConfig& cfg);

}  // namespace tlab
