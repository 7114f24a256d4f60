#include "tlab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tlab/errors.hpp"
#include "tlab/softmax.hpp"
#include "tlab/text_io.hpp"

namespace tlab {

CovariateSpec::CovariateSpec(Matrix sigma, double sigma_min, double sigma_max, double norm_cap)
    : sigma_(std::move(sigma)), sigma_min_(sigma_min), sigma_max_(sigma_max), norm_cap_(norm_cap) {
  if (!(norm_cap_ > 0.0)) throw ContractViolation("CovariateSpec: norm cap must be positive");
  if (sigma_min_ > sigma_max_) throw ContractViolation("CovariateSpec: sigma_min > sigma_max");
  const SymEigen eig = sym_spectral(sigma_);
  const double tol = 1e-12 * std::max(1.0, sigma_max_);
  if (eig.values.back() < sigma_min_ - tol || eig.values.front() > sigma_max_ + tol) {
    throw ContractViolation("CovariateSpec: spectrum of Sigma outside [sigma_min, sigma_max]");
  }
  if (!(eig.values.back() > 0.0)) throw ContractViolation("CovariateSpec: Sigma must be PD");
  const std::size_t d = sigma_.rows();
  factor_ = Matrix(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    const double root = std::sqrt(eig.values[k]);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        factor_(i, j) += eig.vectors(i, k) * root * eig.vectors(j, k);
  }
}

double CovariateSpec::default_norm_cap(const Matrix& sigma) {
  double trace = 0.0;
  for (std::size_t i = 0; i < sigma.rows(); ++i) trace += sigma(i, i);
  return 3.0 * std::sqrt(trace);
}

CovariateSpec CovariateSpec::isotropic(std::size_t d) {
  Matrix sigma = Matrix::identity(d);
  const double cap = default_norm_cap(sigma);
  return CovariateSpec(std::move(sigma), 1.0, 1.0, cap);
}

std::uint64_t CovariateSpec::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= ';';
    h *= 0x100000001b3ULL;
  };
  feed(std::to_string(sigma_.rows()));
  for (double v : sigma_.data()) feed(format_real(v));
  feed(format_real(sigma_min_));
  feed(format_real(sigma_max_));
  feed(format_real(norm_cap_));
  return h;
}

namespace {

Matrix scale_rows_to_abs_sum(Matrix w, double target) {
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double s = 0.0;
    for (double v : w.row(i)) s += std::abs(v);
    if (s > 0.0)
      for (double& v : w.row(i)) v *= target / s;
  }
  return w;
}

Representation make_truth_rep(const TruthConfig& cfg, Rng& rng) {
  if (cfg.mlp_hidden == 0) return random_subspace(cfg.d, cfg.r, rng);
  Matrix inner = scale_rows_to_abs_sum(rng.normal_matrix(cfg.mlp_hidden, cfg.d), cfg.mlp_inner_cap);
  Matrix outer = rng.normal_matrix(cfg.r, cfg.mlp_hidden);
  outer *= cfg.mlp_outer_cap / norm_inf_to_2(outer);
  return MlpRep({std::move(inner), std::move(outer)}, {cfg.mlp_inner_cap, cfg.mlp_outer_cap});
}

}  // namespace

GroundTruth make_ground_truth(const TruthConfig& cfg, Rng& rng) {
  if (cfg.r < 1 || cfg.d < cfg.r) throw ContractViolation("make_ground_truth: need d >= r >= 1");
  if (cfg.k < 2 || cfg.k_prime < 2) throw ContractViolation("make_ground_truth: need k, k' >= 2");
  if (cfg.k - 1 < cfg.r) {
    throw ContractViolation("make_ground_truth: k - 1 < r, alpha^p alpha^p^T cannot be full rank");
  }
  if (!(cfg.condition_number >= 1.0)) {
    throw ContractViolation("make_ground_truth: condition number must be >= 1");
  }
  if (!(cfg.pre_scale > 0.0) || !(cfg.down_column_norm > 0.0)) {
    throw ContractViolation("make_ground_truth: scales must be positive");
  }

  Representation rep = make_truth_rep(cfg, rng);

  const std::size_t r = cfg.r;
  const Matrix u = orthonormalize(rng.normal_matrix(r, r));
  const Matrix v = orthonormalize(rng.normal_matrix(cfg.k - 1, r));
  const double s_top = std::sqrt(cfg.pre_scale);
  const double s_bottom = s_top / std::sqrt(cfg.condition_number);
  Vector s(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double frac = r == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(r - 1);
    s[i] = s_top * std::pow(s_bottom / s_top, frac);
  }
  s.front() = s_top;
  s.back() = r == 1 ? s_top : s_bottom;
  Matrix us = u;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) us(i, j) *= s[j];
  Matrix alpha_pre = matmul_nt(us, v);
  // Column norms are bounded by the spectral norm s_top.
  LinearHead pre_head(std::move(alpha_pre), s_top * (1.0 + 1e-12));

  Matrix alpha_down = rng.normal_matrix(r, cfg.k_prime - 1);
  for (std::size_t c = 0; c < alpha_down.cols(); ++c) {
    const double n = norm2(alpha_down.col(c));
    for (std::size_t i = 0; i < r; ++i) alpha_down(i, c) *= cfg.down_column_norm / n;
  }
  LinearHead down_head(std::move(alpha_down), cfg.down_column_norm * (1.0 + 1e-12));

  return GroundTruth{std::move(rep), std::move(pre_head), std::move(down_head)};
}

Matrix sample_covariates(const CovariateSpec& spec, std::size_t n, Rng& rng) {
  if (n < 1) throw ContractViolation("sample_covariates: n must be >= 1");
  const std::size_t d = spec.dim();
  const Matrix& factor = spec.factor();
  Matrix x(n, d);
  Vector z(d);
  Vector candidate(d);
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  while (accepted < n) {
    for (double& v : z) v = rng.normal();
    for (std::size_t i = 0; i < d; ++i) candidate[i] = dot(factor.row(i), z);
    ++attempts;
    if (norm2(candidate) <= spec.norm_cap()) {
      std::copy(candidate.begin(), candidate.end(), x.row(accepted).begin());
      ++accepted;
    }
    if (attempts >= 1000 && attempts % 1000 == 0 &&
        static_cast<double>(accepted) < 0.01 * static_cast<double>(attempts)) {
      throw InfeasibleSpec("sample_covariates: acceptance rate " +
                           std::to_string(static_cast<double>(accepted) / attempts) +
                           " below 1%; norm cap too small for Sigma");
    }
  }
  return x;
}

Matrix sample_labels(const Representation& rep, const LinearHead& head, const Matrix& x, Rng& rng) {
  const Matrix eta = head_outputs(head, embed(rep, x));
  const std::size_t km1 = head.output_dim();
  Matrix y(x.rows(), km1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Vector p = softmax_prob(eta.row(i));
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t cls = km1;  // class K unless an earlier bin catches u
    for (std::size_t s = 0; s < km1; ++s) {
      cum += p[s];
      if (u < cum) {
        cls = s;
        break;
      }
    }
    if (cls < km1) y(i, cls) = 1.0;
  }
  return y;
}

std::size_t LabeledDataset::label_index(std::size_t i) const {
  for (std::size_t s = 0; s < y.cols(); ++s)
    if (y(i, s) == 1.0) return s + 1;
  return num_classes;
}

void LabeledDataset::validate() const {
  if (num_classes < 2) throw ContractViolation("LabeledDataset: need at least two classes");
  if (x.rows() != y.rows()) throw ContractViolation("LabeledDataset: X and Y row counts differ");
  if (y.cols() != num_classes - 1) throw ContractViolation("LabeledDataset: Y must have K-1 columns");
  for (std::size_t i = 0; i < y.rows(); ++i) OneHotLabel::from_vector(y.row(i));
}

LabeledDataset make_dataset(const Representation& rep, const LinearHead& head,
                            const CovariateSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Rng x_stream = rng.split(1);
  Rng y_stream = rng.split(2);
  LabeledDataset data;
  data.x = sample_covariates(spec, n, x_stream);
  data.y = sample_labels(rep, head, data.x, y_stream);
  data.num_classes = head.num_classes();
  data.seed = seed;
  return data;
}

void write_dataset_csv(const std::filesystem::path& path, const LabeledDataset& data,
                       std::uint64_t spec_hash) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  char hash_hex[20];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx", static_cast<unsigned long long>(spec_hash));
  out << "# tlab-dataset d=" << data.dim() << " K=" << data.num_classes << " n=" << data.size()
      << " seed=" << data.seed << " spec_hash=" << hash_hex << '\n';
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x.row(i)) out << format_real(v) << ',';
    out << data.label_index(i) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

DatasetFile read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::istringstream header(line);
  std::string tag;
  header >> tag >> tag;
  if (tag != "tlab-dataset") throw ContractViolation("read_dataset_csv: missing dataset header");
  std::size_t d = 0, k = 0, n = 0;
  std::uint64_t seed = 0, hash = 0;
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "d") d = std::stoull(value);
    else if (key == "K") k = std::stoull(value);
    else if (key == "n") n = std::stoull(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "spec_hash") hash = std::stoull(value, nullptr, 16);
  }
  if (d == 0 || k < 2) throw ContractViolation("read_dataset_csv: header lacks d or K");
  std::getline(in, line);  // column names
  LabeledDataset data;
  data.num_classes = k;
  data.seed = seed;
  std::vector<double> xs;
  std::vector<std::size_t> labels;
  xs.reserve(n * d);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != d + 1) throw ContractViolation("read_dataset_csv: wrong field count");
    for (std::size_t j = 0; j < d; ++j) xs.push_back(parse_real(fields[j]));
    labels.push_back(std::stoull(fields[d]));
  }
  if (labels.size() != n) throw ContractViolation("read_dataset_csv: row count differs from header");
  data.x = Matrix(labels.size(), d, std::move(xs));
  data.y = Matrix(labels.size(), k - 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > k) throw ContractViolation("read_dataset_csv: label out of range");
    if (labels[i] < k) data.y(i, labels[i] - 1) = 1.0;
  }
  return {std::move(data), hash};
}

}  // namespace tlab
