#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace tlab {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of row-major `entries`; throws ContractViolation when the
  /// entry count does not match or an entry is not finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  Vector col(std::size_t j) const;
  void set_col(std::size_t j, std::span<const double> values);

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;
  double frobenius_norm() const;
  double max_abs() const;
  bool all_finite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// A * B
Matrix matmul(const Matrix& a, const Matrix& b);
/// A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// A * x
Vector matvec(const Matrix& a, std::span<const double> x);
/// A^T * x
Vector matvec_t(const Matrix& a, std::span<const double> x);
/// A^T A
Matrix gram(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// Frobenius inner product.
double inner(const Matrix& a, const Matrix& b);

/// Eigen-decomposition of a symmetric matrix. `values` descending; column j of
/// `vectors` is the unit eigenvector for values[j].
struct SymEigen {
  Vector values;
  Matrix vectors;
};

/// Cyclic Jacobi eigensolver. Throws ContractViolation for non-square input or
/// relative asymmetry above 1e-10.
SymEigen sym_spectral(const Matrix& m);

/// Eigenvalues only (descending); same preconditions as sym_spectral.
Vector sym_eigenvalues(const Matrix& m);

/// Singular values (descending, length min(rows, cols)) from the spectrum of
/// the smaller Gram matrix.
Vector singular_values(const Matrix& a);

/// Orthonormal basis of col(M) for a d x r matrix with d >= r, via modified
/// Gram-Schmidt with one reorthogonalization pass. Column j of the result
/// spans the same flag as columns 0..j of M (QR-style, positive R diagonal).
/// Throws DegenerateInput if a column's residual drops below 1e-12 times the
/// largest column norm.
Matrix orthonormalize(const Matrix& m);

inline constexpr double kDefaultPinvTol = 1e-10;

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix; eigenvalues below
/// tol * lambda_max are treated as zero.
Matrix pinv_psd(const Matrix& m, double tol = kDefaultPinvTol);

/// ln det M for symmetric positive definite M via Cholesky pivots. Throws
/// SingularMatrix carrying the index of the first non-positive pivot.
double logdet_psd(const Matrix& m);

/// Lower-triangular Cholesky factor; throws SingularMatrix like logdet_psd.
Matrix cholesky(const Matrix& m);

/// Solves M X = B for SPD M given its Cholesky factor L (M = L L^T).
Matrix cholesky_solve(const Matrix& chol, const Matrix& b);

/// Checks squareness and symmetry to `rel_tol` relative to the Frobenius norm.
void require_symmetric(const Matrix& m, double rel_tol = 1e-10);

}  // namespace tlab
