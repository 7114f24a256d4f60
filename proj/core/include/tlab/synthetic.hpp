#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "tlab/linalg.hpp"
#include "tlab/model_space.hpp"
#include "tlab/rng.hpp"

namespace tlab {

/// Covariate law: N(0, Sigma) truncated by rejection to ||x|| <= norm_cap,
/// with spectrum bounds sigma_min <= lambda(Sigma) <= sigma_max.
class CovariateSpec {
 public:
  /// Throws ContractViolation when Sigma is not symmetric, its spectrum leaves
  /// [sigma_min, sigma_max], or norm_cap <= 0.
  CovariateSpec(Matrix sigma, double sigma_min, double sigma_max, double norm_cap);

  /// Sigma = I_d with the default cap 3 sqrt(d).
  static CovariateSpec isotropic(std::size_t d);
  /// 3 sqrt(tr Sigma): truncation then shrinks the covariance by < 2%.
  static double default_norm_cap(const Matrix& sigma);

  std::size_t dim() const noexcept { return sigma_.rows(); }
  const Matrix& sigma() const noexcept { return sigma_; }
  double sigma_min() const noexcept { return sigma_min_; }
  double sigma_max() const noexcept { return sigma_max_; }
  double norm_cap() const noexcept { return norm_cap_; }
  /// Symmetric square root factor used for sampling.
  const Matrix& factor() const noexcept { return factor_; }

  /// FNV-1a over the serialized parameters.
  std::uint64_t hash() const;

 private:
  Matrix sigma_;
  double sigma_min_;
  double sigma_max_;
  double norm_cap_;
  Matrix factor_;
};

struct GroundTruth {
  Representation rep;
  LinearHead pre_head;   ///< r x (k-1)
  LinearHead down_head;  ///< r x (k'-1)
};

struct TruthConfig {
  std::size_t d = 20;
  std::size_t r = 3;
  std::size_t k = 30;
  std::size_t k_prime = 2;
  /// sigma_1 / sigma_r of alpha^p alpha^p^T.
  double condition_number = 1.0;
  /// sigma_1(alpha^p alpha^p^T).
  double pre_scale = 1.0;
  /// Norm of every column of alpha^d (also its column cap).
  double down_column_norm = 1.0;
  /// Hidden width of a two-layer tanh truth; 0 selects the subspace truth.
  std::size_t mlp_hidden = 0;
  /// Norm caps M(1), M(2) for the tanh truth.
  double mlp_inner_cap = 2.0;
  double mlp_outer_cap = 2.0;
};

/// Random truth with a prescribed diversity: alpha^p = U diag(s) V^T with
/// s geometrically spaced so that s_1^2 = pre_scale and s_1^2/s_r^2 =
/// condition_number. Throws ContractViolation for k - 1 < r (no full-rank
/// alpha^p alpha^p^T exists) or condition_number < 1.
GroundTruth make_ground_truth(const TruthConfig& cfg, Rng& rng);

/// n x d draws; throws InfeasibleSpec if fewer than 1% of at least 1000
/// proposals land inside the norm cap.
Matrix sample_covariates(const CovariateSpec& spec, std::size_t n, Rng& rng);

/// One-hot labels (n x (K-1)) drawn from softmax(head(rep(x_i))).
Matrix sample_labels(const Representation& rep, const LinearHead& head, const Matrix& x, Rng& rng);

struct LabeledDataset {
  Matrix x;  ///< n x d
  Matrix y;  ///< n x (K-1), one-hot rows, all-zero for class K
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return x.rows(); }
  std::size_t dim() const noexcept { return x.cols(); }
  /// 1-based class of row i.
  std::size_t label_index(std::size_t i) const;
  /// Throws ContractViolation on shape mismatch or invalid label rows.
  void validate() const;
};

LabeledDataset make_dataset(const Representation& rep, const LinearHead& head,
                            const CovariateSpec& spec, std::size_t n, std::uint64_t seed);

/// CSV with a comment header
///   # tlab-dataset d=<d> K=<K> n=<n> seed=<seed> spec_hash=<hex>
/// followed by a column header and rows x_1,...,x_d,label (label in 1..K).
void write_dataset_csv(const std::filesystem::path& path, const LabeledDataset& data,
                       std::uint64_t spec_hash);

struct DatasetFile {
  LabeledDataset data;
  std::uint64_t spec_hash = 0;
};

DatasetFile read_dataset_csv(const std::filesystem::path& path);

}  // namespace tlab
