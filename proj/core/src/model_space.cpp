#include "tlab/model_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "tlab/errors.hpp"

namespace tlab {

SubspaceRep::SubspaceRep(Matrix basis) : basis_(std::move(basis)) {
  if (basis_.cols() < 1 || basis_.rows() < basis_.cols()) {
    throw ContractViolation("SubspaceRep: need d >= r >= 1");
  }
  Matrix defect = gram(basis_) - Matrix::identity(basis_.cols());
  if (defect.frobenius_norm() > 1e-8) {
    throw ContractViolation("SubspaceRep: columns are not orthonormal (defect " +
                            std::to_string(defect.frobenius_norm()) + ")");
  }
}

SubspaceRep SubspaceRep::identity(std::size_t d) { return SubspaceRep(Matrix::identity(d)); }

double norm_1_inf(const Matrix& w) {
  double best = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = 0.0;
    for (double v : w.row(i)) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

double norm_inf_to_2(const Matrix& w) {
  const std::size_t c = w.cols();
  if (c == 0) return 0.0;
  if (c > 16) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += norm2(w.col(j));
    return s;
  }
  // ||Wx||^2 is convex, so its max over the cube sits at a vertex; x and -x
  // give the same value, so the first sign is fixed.
  double best = 0.0;
  Vector y(w.rows());
  const std::uint32_t count = 1u << (c - 1);
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t j = 0; j < c; ++j) {
      const double sign = (j > 0 && ((mask >> (j - 1)) & 1u)) ? -1.0 : 1.0;
      for (std::size_t i = 0; i < w.rows(); ++i) y[i] += sign * w(i, j);
    }
    best = std::max(best, norm2(y));
  }
  return best;
}

std::vector<Matrix> project_mlp_layers(std::vector<Matrix> layers, std::span<const double> caps) {
  if (caps.size() != layers.size()) throw ContractViolation("project_mlp_layers: cap count");
  for (std::size_t p = 0; p + 1 < layers.size(); ++p) {
    Matrix& w = layers[p];
    for (std::size_t i = 0; i < w.rows(); ++i) {
      double s = 0.0;
      for (double v : w.row(i)) s += std::abs(v);
      if (s > caps[p]) {
        const double f = caps[p] / s;
        for (double& v : w.row(i)) v *= f;
      }
    }
  }
  Matrix& last = layers.back();
  const double n = norm_inf_to_2(last);
  if (n > caps.back()) last *= caps.back() / n;
  return layers;
}

MlpRep::MlpRep(std::vector<Matrix> layers, std::vector<double> caps)
    : layers_(std::move(layers)), caps_(std::move(caps)) {
  if (layers_.empty()) throw ContractViolation("MlpRep: need at least one layer");
  if (caps_.size() != layers_.size()) throw ContractViolation("MlpRep: one cap per layer");
  for (std::size_t p = 0; p < layers_.size(); ++p) {
    if (!(caps_[p] > 0.0)) throw ContractViolation("MlpRep: caps must be positive");
    if (p > 0 && layers_[p].cols() != layers_[p - 1].rows()) {
      throw ContractViolation("MlpRep: layer " + std::to_string(p) + " shape mismatch");
    }
    const bool last = p + 1 == layers_.size();
    const double n = last ? norm_inf_to_2(layers_[p]) : norm_1_inf(layers_[p]);
    if (n > caps_[p] * (1.0 + 1e-9)) {
      throw ContractViolation("MlpRep: layer " + std::to_string(p) + " exceeds its norm cap");
    }
  }
}

std::size_t input_dim(const Representation& rep) {
  return std::visit([](const auto& r) { return r.input_dim(); }, rep);
}

std::size_t output_dim(const Representation& rep) {
  return std::visit([](const auto& r) { return r.output_dim(); }, rep);
}

LinearHead::LinearHead(Matrix alpha, double column_cap, double output_cap)
    : alpha_(std::move(alpha)), column_cap_(column_cap), output_cap_(output_cap) {
  if (!(column_cap_ > 0.0) || !(output_cap_ > 0.0)) {
    throw ContractViolation("LinearHead: caps must be positive");
  }
  for (std::size_t s = 0; s < alpha_.cols(); ++s) {
    if (norm2(alpha_.col(s)) > column_cap_ + 1e-10) {
      throw ContractViolation("LinearHead: column " + std::to_string(s) + " exceeds cap");
    }
  }
}

LinearHead LinearHead::zeros(std::size_t r, std::size_t outputs, double column_cap) {
  return LinearHead(Matrix(r, outputs), column_cap);
}

std::vector<Matrix> mlp_forward(const MlpRep& rep, const Matrix& x) {
  if (x.cols() != rep.input_dim()) throw ContractViolation("mlp_forward: input dimension");
  std::vector<Matrix> acts;
  acts.reserve(rep.depth() + 1);
  acts.push_back(x);
  for (std::size_t p = 0; p < rep.depth(); ++p) {
    Matrix next = matmul_nt(acts.back(), rep.layers()[p]);
    if (p + 1 < rep.depth()) {
      for (double& v : next.data()) v = std::tanh(v);
    }
    acts.push_back(std::move(next));
  }
  return acts;
}

Matrix embed(const Representation& rep, const Matrix& x) {
  if (x.cols() != input_dim(rep)) {
    throw ContractViolation("embed: covariate dimension " + std::to_string(x.cols()) +
                            " does not match representation input " +
                            std::to_string(input_dim(rep)));
  }
  if (const auto* sub = std::get_if<SubspaceRep>(&rep)) return matmul(x, sub->basis());
  return mlp_forward(std::get<MlpRep>(rep), x).back();
}

Vector apply_representation(const Representation& rep, std::span<const double> x) {
  Matrix row(1, x.size(), Vector(x.begin(), x.end()));
  Matrix z = embed(rep, row);
  return Vector(z.data().begin(), z.data().end());
}

Vector apply_head(const LinearHead& head, std::span<const double> z) {
  if (z.size() != head.input_dim()) throw ContractViolation("apply_head: embedding dimension");
  Vector eta = matvec_t(head.alpha(), z);
  const double n = norm2(eta);
  if (n > head.output_cap()) {
    throw ConstraintViolation("apply_head: ||alpha^T z|| = " + std::to_string(n) +
                              " exceeds output cap " + std::to_string(head.output_cap()));
  }
  return eta;
}

Matrix head_outputs(const LinearHead& head, const Matrix& z) {
  if (z.cols() != head.input_dim()) throw ContractViolation("head_outputs: embedding dimension");
  return matmul(z, head.alpha());
}

Matrix project_columns(Matrix alpha, double c) {
  if (!(c > 0.0)) throw ContractViolation("project_columns: cap must be positive");
  for (std::size_t s = 0; s < alpha.cols(); ++s) {
    double sq = 0.0;
    for (std::size_t i = 0; i < alpha.rows(); ++i) sq += alpha(i, s) * alpha(i, s);
    const double n = std::sqrt(sq);
    if (n > c) {
      const double f = c / n;
      for (std::size_t i = 0; i < alpha.rows(); ++i) alpha(i, s) *= f;
    }
  }
  return alpha;
}

LinearHead project_head(const LinearHead& head, double c) {
  return LinearHead(project_columns(head.alpha(), c), c, head.output_cap());
}

SubspaceRep stiefel_retract(const Matrix& b_plus_step) {
  return SubspaceRep(orthonormalize(b_plus_step));
}

Vector principal_angles(const SubspaceRep& b1, const SubspaceRep& b2) {
  if (b1.input_dim() != b2.input_dim() || b1.output_dim() != b2.output_dim()) {
    throw ContractViolation("principal_angles: subspaces must share d and r");
  }
  const Matrix cross = matmul_tn(b1.basis(), b2.basis());
  Matrix residual = b2.basis() - matmul(b1.basis(), cross);
  const Vector cosines = singular_values(cross);    // descending
  const Vector sines = singular_values(residual);   // descending
  const std::size_t r = cosines.size();
  Vector angles(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double c = std::clamp(cosines[i], 0.0, 1.0);
    const double s = std::clamp(sines[r - 1 - i], 0.0, 1.0);
    angles[i] = std::atan2(s, c);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

SubspaceRep random_subspace(std::size_t d, std::size_t r, Rng& rng) {
  return SubspaceRep(orthonormalize(rng.normal_matrix(d, r)));
}

}  // namespace tlab
