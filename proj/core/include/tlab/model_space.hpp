#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "tlab/linalg.hpp"
#include "tlab/rng.hpp"

namespace tlab {

/// h(x) = B^T x with B a d x r matrix of orthonormal columns.
class SubspaceRep {
 public:
  /// Throws ContractViolation unless d >= r >= 1 and ||B^T B - I||_F <= 1e-8.
  explicit SubspaceRep(Matrix basis);

  /// Identity map on R^d (used by the no-pretraining baseline).
  static SubspaceRep identity(std::size_t d);

  const Matrix& basis() const noexcept { return basis_; }
  std::size_t input_dim() const noexcept { return basis_.rows(); }
  std::size_t output_dim() const noexcept { return basis_.cols(); }

 private:
  Matrix basis_;
};

/// h(x) = W_L tanh(W_{L-1} ... tanh(W_1 x)). Layers before the last obey
/// ||W_p||_{1,inf} <= M(p) (max absolute row sum); the last obeys
/// ||W_L||_{inf->2} <= M(L).
class MlpRep {
 public:
  /// Throws ContractViolation on shape mismatch between consecutive layers,
  /// non-positive caps, or a layer exceeding its cap by more than 1e-9
  /// relative.
  MlpRep(std::vector<Matrix> layers, std::vector<double> caps);

  const std::vector<Matrix>& layers() const noexcept { return layers_; }
  const std::vector<double>& caps() const noexcept { return caps_; }
  std::size_t input_dim() const noexcept { return layers_.front().cols(); }
  std::size_t output_dim() const noexcept { return layers_.back().rows(); }
  std::size_t depth() const noexcept { return layers_.size(); }

 private:
  std::vector<Matrix> layers_;
  std::vector<double> caps_;
};

using Representation = std::variant<SubspaceRep, MlpRep>;

std::size_t input_dim(const Representation& rep);
std::size_t output_dim(const Representation& rep);

/// Max absolute row sum.
double norm_1_inf(const Matrix& w);

/// ||W||_{inf->2} = max_{|x|_inf <= 1} ||W x||_2. Exact (vertex enumeration)
/// for at most 16 columns; otherwise the upper bound sum_j ||w_j||_2.
double norm_inf_to_2(const Matrix& w);

/// Rescales an MLP's layers onto its norm caps: rows of inner layers are
/// shrunk to absolute sum M(p); the last layer is scaled as a whole.
std::vector<Matrix> project_mlp_layers(std::vector<Matrix> layers, std::span<const double> caps);

/// Linear head f(z) = alpha^T z with alpha an r x (K-1) matrix whose columns
/// satisfy ||alpha_s|| <= column_cap, plus an optional output cap
/// ||alpha^T z|| <= output_cap that is checked rather than enforced.
class LinearHead {
 public:
  /// Throws ContractViolation when a column exceeds the cap by more than
  /// 1e-10 or the caps are not positive.
  LinearHead(Matrix alpha, double column_cap,
             double output_cap = std::numeric_limits<double>::infinity());

  static LinearHead zeros(std::size_t r, std::size_t outputs, double column_cap);

  const Matrix& alpha() const noexcept { return alpha_; }
  double column_cap() const noexcept { return column_cap_; }
  double output_cap() const noexcept { return output_cap_; }
  std::size_t input_dim() const noexcept { return alpha_.rows(); }
  /// K - 1
  std::size_t output_dim() const noexcept { return alpha_.cols(); }
  std::size_t num_classes() const noexcept { return alpha_.cols() + 1; }

 private:
  Matrix alpha_;
  double column_cap_;
  double output_cap_;
};

/// Embedding of one covariate vector.
Vector apply_representation(const Representation& rep, std::span<const double> x);

/// Embeds every row of X (n x d) into an n x r matrix.
Matrix embed(const Representation& rep, const Matrix& x);

/// Hidden activations of an MLP forward pass: acts[0] = x rows, acts[p] =
/// tanh(acts[p-1] W_p^T) for p < L, and the final entry the linear output.
std::vector<Matrix> mlp_forward(const MlpRep& rep, const Matrix& x);

/// alpha^T z; throws ConstraintViolation if the output cap is exceeded.
Vector apply_head(const LinearHead& head, std::span<const double> z);

/// Rows of Z (n x r) mapped through the head: n x (K-1). No cap check.
Matrix head_outputs(const LinearHead& head, const Matrix& z);

/// Rescales every column of alpha with norm > c to norm exactly c.
Matrix project_columns(Matrix alpha, double c);
LinearHead project_head(const LinearHead& head, double c);

/// QR-style retraction onto the Stiefel manifold. Throws DegenerateInput on
/// rank deficiency so the caller can shrink its step.
SubspaceRep stiefel_retract(const Matrix& b_plus_step);

/// Principal angles (ascending, radians) between span(B1) and span(B2).
/// Cosines come from the singular values of B1^T B2, sines from those of
/// (I - B1 B1^T) B2; angle_i = atan2(sin_i, cos_i) keeps small angles exact.
Vector principal_angles(const SubspaceRep& b1, const SubspaceRep& b2);

/// Uniformly distributed orthonormal d x r frame.
SubspaceRep random_subspace(std::size_t d, std::size_t r, Rng& rng);

}  // namespace tlab
