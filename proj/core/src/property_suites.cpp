#include "tlab/property_suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "tlab/diagnostics.hpp"
#include "tlab/erm.hpp"
#include "tlab/model_space.hpp"
#include "tlab/rng.hpp"
#include "tlab/softmax.hpp"

namespace tlab {

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Uniform direction with norm uniform in [0, radius].
Vector random_in_ball(std::size_t dim, double radius, Rng& rng) {
  Vector v = rng.normal_vector(dim);
  const double nv = norm2(v);
  const double scale = nv > 0.0 ? radius * rng.uniform() / nv : 0.0;
  for (double& x : v) x *= scale;
  return v;
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  const double denom = std::max({analytic.frobenius_norm(), numeric.frobenius_norm(), 1e-6});
  return (analytic - numeric).frobenius_norm() / denom;
}

template <class F>
Matrix central_difference(const Matrix& at, F&& f, double h = 1e-5) {
  Matrix grad(at.rows(), at.cols());
  Matrix probe = at;
  for (std::size_t i = 0; i < at.rows(); ++i) {
    for (std::size_t j = 0; j < at.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = f(probe);
      probe(i, j) = orig - h;
      const double down = f(probe);
      probe(i, j) = orig;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

Matrix random_labels(std::size_t n, std::size_t num_classes, Rng& rng) {
  Matrix y(n, num_classes - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = rng.uniform_index(num_classes);
    if (c + 1 < num_classes) y(i, c) = 1.0;
  }
  return y;
}

}  // namespace

SuiteResult self_concordance_suite(std::size_t cases, std::uint64_t seed) {
  Timer timer;
  SuiteResult res{"self_concordance", 0, 0, 0.0, kSelfConcordanceConstant + 1e-9, 0.0};
  Rng rng(seed, 101);
  const std::size_t classes[] = {2, 5, 50};
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t km1 = classes[c % 3] - 1;
    const Vector eta = random_in_ball(km1, 5.0, rng);
    Vector v = random_in_ball(km1, 5.0, rng);
    if (norm2(v) == 0.0) v[0] = 1.0;
    const double t = 2.0 * rng.uniform() - 1.0;
    const double grid[] = {t};
    const SelfConcordanceReport rep = check_self_concordance(eta, v, grid);
    ++res.cases;
    res.worst = std::max(res.worst, rep.max_ratio);
    if (!rep.pass) ++res.failures;
  }
  res.seconds = timer.seconds();
  return res;
}

SuiteResult hessian_spectrum_suite(std::size_t cases, std::uint64_t seed) {
  Timer timer;
  SuiteResult res{"hessian_spectrum", 0, 0, 0.0, 1e-10, 0.0};
  Rng rng(seed, 102);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t num_classes = 2 + rng.uniform_index(99);
    const double scale = std::exp(std::log(0.1) + rng.uniform() * std::log(100.0));
    Vector eta = rng.normal_vector(num_classes - 1);
    for (double& e : eta) e *= scale;
    const Vector eig = sym_eigenvalues(hessian_log_partition(eta));
    const double excess = std::max(eig.front() - 1.0, -eig.back());
    ++res.cases;
    res.worst = std::max(res.worst, excess);
    if (eig.front() > 1.0 + 1e-10 || eig.back() < -1e-10) ++res.failures;
  }
  res.seconds = timer.seconds();
  return res;
}

SuiteResult kl_sandwich_suite(std::size_t cases, std::uint64_t seed) {
  Timer timer;
  SuiteResult res{"kl_sandwich", 0, 0, 0.0, 0.0, 0.0};
  Rng rng(seed, 103);
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t km1 = 1 + rng.uniform_index(19);
    const Vector a = random_in_ball(km1, 3.0, rng);
    const Vector b = random_in_ball(km1, 3.0, rng);
    const KlBounds kb = kl_quadratic_bounds(a, b);
    ++res.cases;
    res.worst = std::max({res.worst, kb.lower - kb.kl, kb.kl - kb.upper});
    if (!kb.holds()) ++res.failures;
  }
  res.seconds = timer.seconds();
  return res;
}

SuiteResult gradient_suite(std::size_t instances, std::uint64_t seed) {
  Timer timer;
  SuiteResult res{"gradients", 0, 0, 0.0, 1e-4, 0.0};
  Rng rng(seed, 104);
  auto record = [&](double err) {
    ++res.cases;
    res.worst = std::max(res.worst, err);
    if (!(err <= res.limit)) ++res.failures;
  };
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const std::size_t n = 6, d = 5, r = 2, num_classes = 4;
    const Matrix x = rng.normal_matrix(n, d);
    const Matrix y = random_labels(n, num_classes, rng);
    const Matrix alpha = rng.normal_matrix(r, num_classes - 1) * 0.7;

    // Cross-entropy in the natural parameter.
    {
      const Matrix eta = rng.normal_matrix(1, num_classes - 1);
      const Vector p = grad_log_partition(eta.row(0));
      Matrix analytic(1, num_classes - 1);
      for (std::size_t s = 0; s + 1 < num_classes; ++s) analytic(0, s) = p[s] - y(0, s);
      const Matrix numeric = central_difference(
          eta, [&](const Matrix& e) { return cross_entropy(e.row(0), y.row(0)); });
      record(relative_error(analytic, numeric));
    }

    // Head and subspace gradients; the perturbed frame is evaluated directly.
    {
      const SubspaceRep rep = random_subspace(d, r, rng);
      const LinearHead head(alpha, 1e6);
      const LossGrad lg = loss_and_grad(rep, head, x, y);
      const Matrix z = embed(rep, x);
      record(relative_error(lg.head_grad, central_difference(alpha, [&](const Matrix& a) {
                              return head_loss_and_grad(z, a, y).risk;
                            })));
      record(relative_error(lg.rep_grad.front(), central_difference(rep.basis(), [&](const Matrix& b) {
                              return head_loss_and_grad(matmul(x, b), alpha, y).risk;
                            })));
    }

    // Two-layer tanh network.
    {
      const std::size_t hidden = 3;
      std::vector<Matrix> layers{rng.normal_matrix(hidden, d) * 0.5, rng.normal_matrix(r, hidden) * 0.5};
      const std::vector<double> caps{1e6, 1e6};
      const MlpRep net(layers, caps);
      const LinearHead head(alpha, 1e6);
      const LossGrad lg = loss_and_grad(net, head, x, y);
      for (std::size_t p = 0; p < layers.size(); ++p) {
        const Matrix numeric = central_difference(layers[p], [&](const Matrix& w) {
          std::vector<Matrix> probe = layers;
          probe[p] = w;
          return loss_and_grad(MlpRep(std::move(probe), caps), head, x, y, false).risk;
        });
        record(relative_error(lg.rep_grad[p], numeric));
      }
    }

    // Log-det regularizer.
    {
      const double mu = 1e-3;
      const LogDetValue ld = logdet_regularizer(alpha, mu);
      record(relative_error(ld.gradient, central_difference(alpha, [&](const Matrix& a) {
                              return logdet_regularizer(a, mu).value;
                            })));
    }
  }
  res.seconds = timer.seconds();
  return res;
}

SuiteResult chain_rule_suite(std::size_t instances, std::uint64_t seed) {
  Timer timer;
  SuiteResult res{"chain_rule", 0, 0, 0.0, 0.0, 0.0};
  Rng rng(seed, 105);
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const std::size_t n = 50, d = 4, r = 2, k = 3;
    const Matrix x = rng.normal_matrix(n, d);
    std::vector<Representation> reps;
    for (std::size_t i = 0; i < 4; ++i) reps.emplace_back(random_subspace(d, r, rng));
    std::vector<Matrix> heads;
    for (std::size_t i = 0; i < 5; ++i) heads.push_back(rng.normal_matrix(r, k - 1));
    Rng draws = rng.split(inst);
    const ChainRuleReport rep = chain_rule_check(reps, heads, x, 1000, draws);
    ++res.cases;
    // Margin of the left side under the right side.
    res.worst = std::max(res.worst, rep.composite.value - rep.rhs);
    if (!rep.pass) ++res.failures;
  }
  res.seconds = timer.seconds();
  return res;
}

std::vector<SuiteResult> run_property_suites(std::uint64_t seed) {
  return {self_concordance_suite(10000, seed), hessian_spectrum_suite(1000, seed),
          kl_sandwich_suite(1000, seed), gradient_suite(100, seed), chain_rule_suite(20, seed)};
}

}  // namespace tlab
