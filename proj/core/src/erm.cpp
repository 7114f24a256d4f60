#include "tlab/erm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "tlab/errors.hpp"
#include "tlab/softmax.hpp"
#include "tlab/text_io.hpp"

namespace tlab {

void OptimConfig::validate() const {
  if (!(grad_tol > 0.0)) throw ContractViolation("OptimConfig: grad_tol must be positive");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ContractViolation("OptimConfig: shrink must lie in (0,1)");
  if (!(ridge >= 0.0)) throw ContractViolation("OptimConfig: ridge must be >= 0");
  if (!(armijo > 0.0 && armijo < 1.0)) throw ContractViolation("OptimConfig: armijo must lie in (0,1)");
  if (!(initial_step > 0.0) || !(min_step > 0.0) || !(max_step >= initial_step)) {
    throw ContractViolation("OptimConfig: invalid step bounds");
  }
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kNone: return "none";
    case StopReason::kConverged: return "converged";
    case StopReason::kRoundingFloor: return "rounding_floor";
    case StopReason::kMaxIters: return "max_iters";
    case StopReason::kStalled: return "stalled";
  }
  return "unknown";
}

std::vector<double> TrainTrace::objectives(double lambda) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row.risk - lambda * row.regularizer);
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const TrainTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "iter,risk,regularizer,grad_norm,step,nu_tilde\n";
  for (const auto& row : trace.rows) {
    out << row.iter << ',' << format_real(row.risk) << ',' << format_real(row.regularizer) << ','
        << format_real(row.grad_norm) << ',' << format_real(row.step) << ','
        << format_real(row.nu_tilde) << '\n';
  }
}

LogDetValue logdet_regularizer(const Matrix& alpha, double mu) {
  if (!(mu >= 0.0)) throw ContractViolation("logdet_regularizer: ridge must be >= 0");
  Matrix g = matmul_nt(alpha, alpha);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
    g(i, i) += mu;
  }
  const Matrix chol = cholesky(g);
  double value = 0.0;
  for (std::size_t i = 0; i < chol.rows(); ++i) value += 2.0 * std::log(chol(i, i));
  Matrix grad = cholesky_solve(chol, alpha);
  grad *= 2.0;
  return {value, std::move(grad)};
}

namespace {

// Per-sample residuals G = (sigma - y) / n with the mean loss.
struct Residuals {
  double risk = 0.0;
  Matrix g;  // n x (K-1)
};

Residuals residuals(const Matrix& eta, const Matrix& y, bool want_g) {
  if (eta.rows() != y.rows() || eta.cols() != y.cols()) {
    throw ContractViolation("loss: outputs are " + std::to_string(eta.rows()) + "x" +
                            std::to_string(eta.cols()) + " but targets are " +
                            std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  }
  const std::size_t n = eta.rows();
  const std::size_t km1 = eta.cols();
  if (n == 0) throw ContractViolation("loss: empty dataset");
  Residuals out;
  if (want_g) out.g = Matrix(n, km1);
  const double inv_n = 1.0 / static_cast<double>(n);
  long double total = 0.0L;
  Vector p(km1);
  for (std::size_t i = 0; i < n; ++i) {
    auto e = eta.row(i);
    auto yi = y.row(i);
    double shift = 0.0;
    for (double v : e) shift = std::max(shift, v);
    double denom = std::exp(-shift);
    double lin = 0.0;
    for (std::size_t s = 0; s < km1; ++s) {
      p[s] = std::exp(e[s] - shift);
      denom += p[s];
      lin += yi[s] * e[s];
    }
    total += shift + std::log(denom) - lin;
    if (want_g) {
      auto gi = out.g.row(i);
      const double inv = 1.0 / denom;
      for (std::size_t s = 0; s < km1; ++s) gi[s] = (p[s] * inv - yi[s]) * inv_n;
    }
  }
  out.risk = static_cast<double>(total * static_cast<long double>(inv_n));
  return out;
}

double risk_only(const Representation& rep, const Matrix& alpha, const Matrix& x, const Matrix& y) {
  return residuals(matmul(embed(rep, x), alpha), y, false).risk;
}

double nu_tilde_of(const Matrix& alpha) {
  const Vector eig = sym_eigenvalues(matmul_nt(alpha, alpha));
  return std::max(eig.back(), 0.0);
}

bool at_rounding_floor(double predicted_decrease, double objective) {
  return predicted_decrease <=
         64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(objective));
}

// Euclidean gradient -> Riemannian gradient on the Stiefel manifold.
Matrix stiefel_tangent(const Matrix& b, const Matrix& g) {
  Matrix btg = matmul_tn(b, g);
  Matrix sym = btg;
  for (std::size_t i = 0; i < sym.rows(); ++i)
    for (std::size_t j = 0; j < sym.cols(); ++j) sym(i, j) = 0.5 * (btg(i, j) + btg(j, i));
  return g - matmul(b, sym);
}

enum class BlockOutcome { kAccepted, kRoundingFloor, kStalled };

struct BlockResult {
  BlockOutcome outcome;
  double step;
  double objective;
};

// Backtracking along a projection arc. `trial(t, &objective, &predicted)`
// returns false when the trial point is infeasible.
template <typename Trial, typename Commit>
BlockResult backtrack(double start_step, double objective, const OptimConfig& cfg, Trial&& trial,
                      Commit&& commit) {
  double t = start_step;
  double first_predicted = -1.0;
  while (t >= cfg.min_step) {
    double candidate = 0.0;
    double predicted = 0.0;
    if (trial(t, candidate, predicted)) {
      if (first_predicted < 0.0) first_predicted = predicted;
      if (std::isfinite(candidate) && candidate <= objective - cfg.armijo * predicted &&
          candidate <= objective) {
        commit();
        return {BlockOutcome::kAccepted, t, candidate};
      }
      if (at_rounding_floor(predicted, objective)) {
        return {BlockOutcome::kRoundingFloor, t, objective};
      }
    }
    t *= cfg.shrink;
  }
  if (first_predicted >= 0.0 && at_rounding_floor(first_predicted, objective)) {
    return {BlockOutcome::kRoundingFloor, start_step, objective};
  }
  return {BlockOutcome::kStalled, start_step, objective};
}

Matrix head_residual_grad(const Matrix& z, const Matrix& g) { return matmul_tn(z, g); }

}  // namespace

LossGrad head_loss_and_grad(const Matrix& z, const Matrix& alpha, const Matrix& y) {
  Residuals res = residuals(matmul(z, alpha), y, true);
  return LossGrad{res.risk, head_residual_grad(z, res.g), {}};
}

LossGrad loss_and_grad(const Representation& rep, const LinearHead& head, const Matrix& x,
                       const Matrix& y, bool with_rep_grad) {
  if (x.rows() != y.rows()) throw ContractViolation("loss_and_grad: X and Y row counts differ");
  if (output_dim(rep) != head.input_dim()) {
    throw ContractViolation("loss_and_grad: representation/head dimension mismatch");
  }
  const Matrix& alpha = head.alpha();
  if (const auto* sub = std::get_if<SubspaceRep>(&rep)) {
    const Matrix z = embed(rep, x);
    Residuals res = residuals(matmul(z, alpha), y, true);
    LossGrad out{res.risk, matmul_tn(z, res.g), {}};
    if (with_rep_grad) {
      const Matrix dz = matmul_nt(res.g, alpha);  // n x r
      out.rep_grad.push_back(matmul_tn(x, dz));   // d x r
    }
    (void)sub;
    return out;
  }
  const auto& mlp = std::get<MlpRep>(rep);
  const std::vector<Matrix> acts = mlp_forward(mlp, x);
  const Matrix& z = acts.back();
  Residuals res = residuals(matmul(z, alpha), y, true);
  LossGrad out{res.risk, matmul_tn(z, res.g), {}};
  if (with_rep_grad) {
    const std::size_t depth = mlp.depth();
    out.rep_grad.resize(depth);
    Matrix delta = matmul_nt(res.g, alpha);  // gradient w.r.t. layer output, n x r
    for (std::size_t p = depth; p-- > 0;) {
      out.rep_grad[p] = matmul_tn(delta, acts[p]);  // out_p x in_p
      if (p == 0) break;
      Matrix prev = matmul(delta, mlp.layers()[p]);  // n x in_p
      const Matrix& a = acts[p];
      for (std::size_t i = 0; i < prev.size(); ++i) prev.data()[i] *= 1.0 - a.data()[i] * a.data()[i];
      delta = std::move(prev);
    }
  }
  return out;
}

namespace {

Representation initial_representation(std::size_t d, const HypothesisConfig& hyp, Rng& rng) {
  if (hyp.mlp_hidden == 0) return random_subspace(d, hyp.r, rng);
  std::vector<Matrix> layers{rng.normal_matrix(hyp.mlp_hidden, d), rng.normal_matrix(hyp.r, hyp.mlp_hidden)};
  layers[0] *= 0.5 * hyp.mlp_inner_cap / std::max(norm_1_inf(layers[0]), 1e-300);
  layers[1] *= 0.5 * hyp.mlp_outer_cap / std::max(norm_inf_to_2(layers[1]), 1e-300);
  return MlpRep(std::move(layers), {hyp.mlp_inner_cap, hyp.mlp_outer_cap});
}

double projected_norm(const Matrix& current, const Matrix& projected_step) {
  return (current - projected_step).frobenius_norm();
}

}  // namespace

PretrainResult pretrain(const LabeledDataset& data, const HypothesisConfig& hyp, double lambda,
                        const OptimConfig& cfg, Rng& rng) {
  cfg.validate();
  data.validate();
  if (data.size() == 0) throw ContractViolation("pretrain: empty dataset");
  if (hyp.r < 1 || hyp.r > data.dim()) throw ContractViolation("pretrain: need 1 <= r <= d");
  if (!(lambda >= 0.0)) throw ContractViolation("pretrain: lambda must be >= 0");
  const std::size_t km1 = data.num_classes - 1;
  if (lambda > 0.0 && hyp.r > km1) {
    throw ContractViolation("pretrain: log-det regularizer needs r <= K - 1");
  }
  if (lambda > 0.0 && cfg.ridge == 0.0) {
    throw ContractViolation("pretrain: log-det regularizer starts from alpha = 0 and needs ridge > 0");
  }

  Representation rep = initial_representation(data.dim(), hyp, rng);
  Matrix alpha(hyp.r, km1);
  const double cap = hyp.head_cap;
  const bool use_reg = lambda > 0.0;

  auto objective_at = [&](const Representation& r, const Matrix& a, double* risk_out,
                          double* reg_out) {
    const double risk = risk_only(r, a, data.x, data.y);
    double reg = 0.0;
    if (use_reg) {
      try {
        reg = logdet_regularizer(a, cfg.ridge).value;
      } catch (const SingularMatrix&) {
        return std::numeric_limits<double>::infinity();
      }
    }
    if (risk_out) *risk_out = risk;
    if (reg_out) *reg_out = reg;
    return risk - lambda * reg;
  };

  TrainTrace trace;
  double head_step = cfg.initial_step;
  double rep_step = cfg.initial_step;

  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    LinearHead head_view(alpha, cap * (1.0 + 1e-9));
    LossGrad lg = loss_and_grad(rep, head_view, data.x, data.y, true);
    double reg_value = 0.0;
    Matrix g_alpha = lg.head_grad;
    if (use_reg) {
      LogDetValue reg = logdet_regularizer(alpha, cfg.ridge);
      reg_value = reg.value;
      g_alpha -= lambda * reg.gradient;
    }
    const double objective = lg.risk - lambda * reg_value;

    // Stationarity measure.
    double pg_sq = std::pow(projected_norm(alpha, project_columns(alpha - g_alpha, cap)), 2);
    Matrix tangent;
    if (const auto* sub = std::get_if<SubspaceRep>(&rep)) {
      tangent = stiefel_tangent(sub->basis(), lg.rep_grad[0]);
      pg_sq += std::pow(tangent.frobenius_norm(), 2);
    } else {
      const auto& mlp = std::get<MlpRep>(rep);
      std::vector<Matrix> stepped = mlp.layers();
      for (std::size_t p = 0; p < stepped.size(); ++p) stepped[p] -= lg.rep_grad[p];
      stepped = project_mlp_layers(std::move(stepped), mlp.caps());
      for (std::size_t p = 0; p < stepped.size(); ++p)
        pg_sq += std::pow(projected_norm(mlp.layers()[p], stepped[p]), 2);
    }
    const double pg_norm = std::sqrt(pg_sq);
    if (pg_norm <= cfg.grad_tol) {
      trace.stop = StopReason::kConverged;
      break;
    }

    // Head block.
    Matrix alpha_trial;
    const BlockResult head_res = backtrack(
        head_step, objective, cfg,
        [&](double t, double& cand, double& predicted) {
          alpha_trial = project_columns(alpha - t * g_alpha, cap);
          predicted = inner(g_alpha, alpha - alpha_trial);
          cand = objective_at(rep, alpha_trial, nullptr, nullptr);
          return true;
        },
        [&] { alpha = alpha_trial; });
    if (head_res.outcome == BlockOutcome::kAccepted) {
      head_step = std::min(head_res.step / cfg.shrink, cfg.max_step);
    }
    if (head_res.outcome == BlockOutcome::kStalled) {
      trace.stop = StopReason::kStalled;
      break;
    }

    // Representation block at the updated head.
    LinearHead head_now(alpha, cap * (1.0 + 1e-9));
    LossGrad lg_rep = loss_and_grad(rep, head_now, data.x, data.y, true);
    double objective_mid = lg_rep.risk;
    if (use_reg) objective_mid -= lambda * logdet_regularizer(alpha, cfg.ridge).value;

    std::optional<Representation> rep_trial;
    BlockResult rep_res{BlockOutcome::kRoundingFloor, rep_step, objective_mid};
    if (const auto* sub = std::get_if<SubspaceRep>(&rep)) {
      const Matrix xi = stiefel_tangent(sub->basis(), lg_rep.rep_grad[0]);
      const double xi_sq = inner(xi, xi);
      const Matrix& b = sub->basis();
      rep_res = backtrack(
          rep_step, objective_mid, cfg,
          [&](double t, double& cand, double& predicted) {
            predicted = t * xi_sq;
            try {
              rep_trial = stiefel_retract(b - t * xi);
            } catch (const DegenerateInput&) {
              return false;
            }
            cand = objective_at(*rep_trial, alpha, nullptr, nullptr);
            return true;
          },
          [&] { rep = std::move(*rep_trial); });
    } else {
      const auto& mlp = std::get<MlpRep>(rep);
      const std::vector<Matrix> layers = mlp.layers();
      const std::vector<double> caps = mlp.caps();
      rep_res = backtrack(
          rep_step, objective_mid, cfg,
          [&](double t, double& cand, double& predicted) {
            std::vector<Matrix> stepped = layers;
            for (std::size_t p = 0; p < stepped.size(); ++p) stepped[p] -= t * lg_rep.rep_grad[p];
            stepped = project_mlp_layers(std::move(stepped), caps);
            predicted = 0.0;
            for (std::size_t p = 0; p < stepped.size(); ++p)
              predicted += inner(lg_rep.rep_grad[p], layers[p] - stepped[p]);
            rep_trial = MlpRep(std::move(stepped), caps);
            cand = objective_at(*rep_trial, alpha, nullptr, nullptr);
            return true;
          },
          [&] { rep = std::move(*rep_trial); });
    }
    if (rep_res.outcome == BlockOutcome::kAccepted) {
      rep_step = std::min(rep_res.step / cfg.shrink, cfg.max_step);
    }

    double risk_now = 0.0;
    double reg_now = 0.0;
    objective_at(rep, alpha, &risk_now, &reg_now);
    trace.rows.push_back({iter, risk_now, reg_now, pg_norm, head_res.step, nu_tilde_of(alpha)});

    if (rep_res.outcome == BlockOutcome::kStalled) {
      trace.stop = StopReason::kStalled;
      break;
    }
    if (head_res.outcome == BlockOutcome::kRoundingFloor &&
        rep_res.outcome == BlockOutcome::kRoundingFloor) {
      trace.stop = StopReason::kRoundingFloor;
      break;
    }
  }
  if (trace.stop == StopReason::kNone) trace.stop = StopReason::kMaxIters;
  if (cfg.max_iters == 0) trace.stop = StopReason::kNone;

  alpha = project_columns(std::move(alpha), cap);
  return PretrainResult{std::move(rep), LinearHead(std::move(alpha), cap), std::move(trace)};
}

HeadFit fit_head_on_embeddings(const Matrix& z, const Matrix& y, double cap, const OptimConfig& cfg,
                               const std::optional<Matrix>& init) {
  cfg.validate();
  if (z.rows() == 0) throw ContractViolation("fit_head: empty dataset");
  if (z.rows() != y.rows()) throw ContractViolation("fit_head: embedding/target row mismatch");
  if (!(cap > 0.0)) throw ContractViolation("fit_head: cap must be positive");
  Matrix alpha = init ? project_columns(*init, cap) : Matrix(z.cols(), y.cols());
  if (alpha.rows() != z.cols() || alpha.cols() != y.cols()) {
    throw ContractViolation("fit_head: initial head has the wrong shape");
  }
  TrainTrace trace;
  double step = cfg.initial_step;
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    const LossGrad lg = head_loss_and_grad(z, alpha, y);
    const double pg_norm = projected_norm(alpha, project_columns(alpha - lg.head_grad, cap));
    if (pg_norm <= cfg.grad_tol) {
      trace.stop = StopReason::kConverged;
      break;
    }
    Matrix trial;
    double trial_risk = lg.risk;
    const BlockResult res = backtrack(
        step, lg.risk, cfg,
        [&](double t, double& cand, double& predicted) {
          trial = project_columns(alpha - t * lg.head_grad, cap);
          predicted = inner(lg.head_grad, alpha - trial);
          cand = residuals(matmul(z, trial), y, false).risk;
          trial_risk = cand;
          return true;
        },
        [&] { alpha = trial; });
    if (res.outcome == BlockOutcome::kAccepted) {
      step = std::min(res.step / cfg.shrink, cfg.max_step);
      trace.rows.push_back({iter, trial_risk, 0.0, pg_norm, res.step,
                            alpha.rows() <= alpha.cols() ? nu_tilde_of(alpha) : 0.0});
      continue;
    }
    trace.stop = res.outcome == BlockOutcome::kStalled ? StopReason::kStalled
                                                        : StopReason::kRoundingFloor;
    break;
  }
  if (trace.stop == StopReason::kNone && cfg.max_iters > 0) trace.stop = StopReason::kMaxIters;
  return HeadFit{LinearHead(project_columns(std::move(alpha), cap), cap), std::move(trace)};
}

HeadFit fit_downstream_head(const Representation& rep, const LabeledDataset& data, double cap,
                            const OptimConfig& cfg, const std::optional<Matrix>& init) {
  data.validate();
  if (data.size() == 0) throw ContractViolation("fit_downstream_head: empty dataset");
  return fit_head_on_embeddings(embed(rep, data.x), data.y, cap, cfg, init);
}

BaselineFit train_baseline(const LabeledDataset& data, double cap, const OptimConfig& cfg) {
  if (data.size() == 0) throw ContractViolation("train_baseline: empty dataset");
  data.validate();
  HeadFit fit = fit_head_on_embeddings(data.x, data.y, cap, cfg);
  return BaselineFit{SubspaceRep::identity(data.dim()), std::move(fit.head), std::move(fit.trace)};
}

}  // namespace tlab
