#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tlab/erm.hpp"
#include "tlab/errors.hpp"
#include "tlab/property_suites.hpp"
#include "tlab/softmax.hpp"
#include "tlab/synthetic.hpp"

namespace tlab {
namespace {

struct Task {
  GroundTruth truth;
  LabeledDataset data;
};

Task small_task(std::size_t n, std::uint64_t seed, std::size_t k = 8) {
  TruthConfig cfg;
  cfg.d = 6;
  cfg.r = 2;
  cfg.k = k;
  cfg.pre_scale = 4.0;
  Rng rng(seed);
  GroundTruth t = make_ground_truth(cfg, rng);
  LabeledDataset data = make_dataset(t.rep, t.pre_head, CovariateSpec::isotropic(6), n, seed + 1);
  return {std::move(t), std::move(data)};
}

TEST(OptimConfig, RejectsBadFields) {
  OptimConfig c;
  c.shrink = 1.0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = OptimConfig{};
  c.grad_tol = 0.0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = OptimConfig{};
  c.ridge = -1.0;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(LogDetRegularizer, IdentityGramExample) {
  const Matrix alpha = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});
  const LogDetValue v = logdet_regularizer(alpha, 0.0);
  EXPECT_NEAR(v.value, 0.0, 1e-15);
  EXPECT_LT((v.gradient - alpha * 2.0).max_abs(), 1e-15);
  EXPECT_THROW(logdet_regularizer(Matrix(2, 3), 0.0), SingularMatrix);
  EXPECT_NO_THROW(logdet_regularizer(Matrix(2, 3), 1e-8));
}

TEST(Gradients, CentralDifferenceSuite) {
  const SuiteResult r = gradient_suite(20, 99);
  EXPECT_TRUE(r.pass()) << "worst relative error " << r.worst;
  EXPECT_LE(r.worst, 1e-4);
}

TEST(LossAndGrad, RiskMatchesPerSampleCrossEntropy) {
  const GroundTruth t = [] {
    TruthConfig cfg;
    Rng rng(1);
    return make_ground_truth(cfg, rng);
  }();
  const CovariateSpec spec = CovariateSpec::isotropic(20);
  const LabeledDataset data = make_dataset(t.rep, t.pre_head, spec, 30, 5);
  const LossGrad lg = loss_and_grad(t.rep, t.pre_head, data.x, data.y, false);
  const Matrix eta = head_outputs(t.pre_head, embed(t.rep, data.x));
  double sum = 0.0;
  for (std::size_t i = 0; i < 30; ++i) sum += cross_entropy(eta.row(i), data.y.row(i));
  EXPECT_NEAR(lg.risk, sum / 30, 1e-13);
  EXPECT_TRUE(lg.rep_grad.empty());
}

TEST(FitHead, BinaryLogisticStationarity) {
  // One feature, two classes, generous cap: the fit satisfies the score equation.
  Rng rng(2);
  const std::size_t n = 400;
  Matrix z(n, 1), y(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    z(i, 0) = rng.normal();
    const double p = 1.0 / (1.0 + std::exp(-1.3 * z(i, 0)));
    y(i, 0) = rng.uniform() < p ? 1.0 : 0.0;
  }
  OptimConfig cfg;
  cfg.grad_tol = 1e-10;
  const HeadFit fit = fit_head_on_embeddings(z, y, 100.0, cfg);
  const double a = fit.head.alpha()(0, 0);
  double score = 0.0;
  for (std::size_t i = 0; i < n; ++i) score += (1.0 / (1.0 + std::exp(-a * z(i, 0))) - y(i, 0)) * z(i, 0);
  // Function-value line search resolves the minimizer to about sqrt(eps).
  EXPECT_NEAR(score / n, 0.0, 1e-7);
  EXPECT_TRUE(fit.trace.stop == StopReason::kConverged || fit.trace.stop == StopReason::kRoundingFloor);
}

TEST(FitHead, RespectsCapAndBeatsZeroHead) {
  const auto [t, data] = small_task(300, 3);
  const double zero_risk = loss_and_grad(t.rep, LinearHead::zeros(2, 7, 0.5), data.x, data.y, false).risk;
  const HeadFit fit = fit_downstream_head(t.rep, data, 0.5, OptimConfig{});
  for (std::size_t s = 0; s < 7; ++s) EXPECT_LE(norm2(fit.head.alpha().col(s)), 0.5 + 1e-10);
  const double risk = loss_and_grad(t.rep, fit.head, data.x, data.y, false).risk;
  EXPECT_LE(risk, zero_risk);
  // Objective never increases along accepted steps.
  for (std::size_t i = 1; i < fit.trace.rows.size(); ++i) {
    EXPECT_LE(fit.trace.rows[i].risk, fit.trace.rows[i - 1].risk + 1e-15);
  }
}

TEST(Pretrain, InvariantsAndMonotoneObjective) {
  const auto [t, data] = small_task(2000, 4);
  HypothesisConfig hyp;
  hyp.r = 2;
  hyp.head_cap = 3.0;
  for (double lambda : {0.0, 0.5}) {
    Rng rng(5);
    const PretrainResult res = pretrain(data, hyp, lambda, OptimConfig{}, rng);
    const auto& b = std::get<SubspaceRep>(res.rep).basis();
    EXPECT_LT((gram(b) - Matrix::identity(2)).max_abs(), 1e-8);
    for (std::size_t s = 0; s < res.head.output_dim(); ++s) {
      EXPECT_LE(norm2(res.head.alpha().col(s)), 3.0 + 1e-10);
    }
    const std::vector<double> obj = res.trace.objectives(lambda);
    for (std::size_t i = 1; i < obj.size(); ++i) EXPECT_LE(obj[i], obj[i - 1] + 1e-12);
    EXPECT_FALSE(res.trace.stalled());
    // Easy, well-conditioned task: the learned span is close to the truth.
    const Vector ang = principal_angles(std::get<SubspaceRep>(res.rep), std::get<SubspaceRep>(t.rep));
    EXPECT_LT(ang.back(), 0.3);
  }
}

TEST(Pretrain, RegularizerRaisesDiversity) {
  const LabeledDataset data = small_task(1000, 6).data;
  HypothesisConfig hyp;
  hyp.r = 2;
  Rng r0(7), r1(7);
  const PretrainResult plain = pretrain(data, hyp, 0.0, OptimConfig{}, r0);
  const PretrainResult reg = pretrain(data, hyp, 0.5, OptimConfig{}, r1);
  const auto nu = [](const LinearHead& h) {
    return sym_eigenvalues(matmul_nt(h.alpha(), h.alpha())).back();
  };
  EXPECT_GT(nu(reg.head), nu(plain.head));
}

TEST(Pretrain, ZeroIterationsLeavesInitialization) {
  const LabeledDataset data = small_task(100, 8).data;
  HypothesisConfig hyp;
  hyp.r = 2;
  OptimConfig cfg;
  cfg.max_iters = 0;
  Rng rng(9);
  const PretrainResult res = pretrain(data, hyp, 0.0, cfg, rng);
  EXPECT_TRUE(res.trace.rows.empty());
  EXPECT_EQ(res.trace.stop, StopReason::kNone);
  EXPECT_EQ(res.head.alpha().max_abs(), 0.0);
}

TEST(Pretrain, ContractViolations) {
  const LabeledDataset data = small_task(100, 10, 3).data;
  HypothesisConfig hyp;
  hyp.r = 3;  // K - 1 = 2 < r
  Rng rng(11);
  EXPECT_THROW(pretrain(data, hyp, 0.5, OptimConfig{}, rng), ContractViolation);
  hyp.r = 2;
  OptimConfig cfg;
  cfg.ridge = 0.0;
  EXPECT_THROW(pretrain(data, hyp, 0.5, cfg, rng), ContractViolation);
  hyp.r = 7;
  EXPECT_THROW(pretrain(data, hyp, 0.0, OptimConfig{}, rng), ContractViolation);
}

TEST(Pretrain, NetworkHypothesisKeepsCaps) {
  const LabeledDataset data = small_task(400, 12).data;
  HypothesisConfig hyp;
  hyp.r = 2;
  hyp.mlp_hidden = 4;
  OptimConfig cfg;
  cfg.max_iters = 200;
  Rng rng(13);
  const PretrainResult res = pretrain(data, hyp, 0.0, cfg, rng);
  const auto& net = std::get<MlpRep>(res.rep);
  EXPECT_LE(norm_1_inf(net.layers()[0]), hyp.mlp_inner_cap + 1e-9);
  EXPECT_LE(norm_inf_to_2(net.layers()[1]), hyp.mlp_outer_cap + 1e-9);
  const std::vector<double> obj = res.trace.objectives(0.0);
  ASSERT_FALSE(obj.empty());
  EXPECT_LT(obj.back(), obj.front());
}

TEST(Baseline, EmptyDataRejectedAndShapes) {
  LabeledDataset empty;
  empty.num_classes = 2;
  EXPECT_THROW(train_baseline(empty, 1.0, OptimConfig{}), ContractViolation);
  const LabeledDataset data = small_task(200, 14).data;
  const BaselineFit fit = train_baseline(data, 1.0, OptimConfig{});
  EXPECT_EQ(fit.head.input_dim(), 6u);
  EXPECT_EQ(fit.rep.output_dim(), 6u);
}

TEST(TraceCsv, HasDocumentedColumns) {
  const LabeledDataset data = small_task(100, 15).data;
  const HeadFit fit = fit_downstream_head(SubspaceRep::identity(6), data, 1.0, OptimConfig{});
  const auto path = std::filesystem::temp_directory_path() / "tlab_trace.csv";
  write_trace_csv(path, fit.trace);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "iter,risk,regularizer,grad_norm,step,nu_tilde");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, fit.trace.rows.size());
}

}  // namespace
}  // namespace tlab
