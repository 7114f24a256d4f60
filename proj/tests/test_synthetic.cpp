#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tlab/errors.hpp"
#include "tlab/model_io.hpp"
#include "tlab/softmax.hpp"
#include "tlab/synthetic.hpp"

namespace tlab {
namespace {

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "tlab_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(CovariateSpec, ValidatesSpectrumAndCap) {
  EXPECT_THROW(CovariateSpec(Matrix::identity(2), 1.5, 2.0, 3.0), ContractViolation);
  EXPECT_THROW(CovariateSpec(Matrix::identity(2), 0.5, 2.0, 0.0), ContractViolation);
  EXPECT_THROW(CovariateSpec(Matrix::from_rows({{1, 0.5}, {0, 1}}), 0.1, 2.0, 3.0), ContractViolation);
  const CovariateSpec iso = CovariateSpec::isotropic(16);
  EXPECT_DOUBLE_EQ(iso.norm_cap(), 12.0);
  EXPECT_NE(iso.hash(), CovariateSpec::isotropic(15).hash());
  EXPECT_EQ(iso.hash(), CovariateSpec::isotropic(16).hash());
}

TEST(GroundTruth, SpectrumAndCapsFollowConfig) {
  for (double cond : {1.0, 10.0, 100.0}) {
    TruthConfig cfg;
    cfg.condition_number = cond;
    cfg.down_column_norm = 0.6;
    Rng rng(3);
    const GroundTruth t = make_ground_truth(cfg, rng);
    const Vector ev = sym_eigenvalues(matmul_nt(t.pre_head.alpha(), t.pre_head.alpha()));
    ASSERT_EQ(ev.size(), cfg.r);
    EXPECT_NEAR(ev.front(), cfg.pre_scale, 1e-10);
    EXPECT_NEAR(ev.front() / ev.back(), cond, 1e-8 * cond);
    for (std::size_t s = 0; s < t.down_head.output_dim(); ++s) {
      EXPECT_NEAR(norm2(t.down_head.alpha().col(s)), 0.6, 1e-12);
    }
    const auto& b = std::get<SubspaceRep>(t.rep).basis();
    EXPECT_LT((gram(b) - Matrix::identity(cfg.r)).max_abs(), 1e-12);
  }
}

TEST(GroundTruth, RejectsInconsistentShapes) {
  TruthConfig cfg;
  cfg.k = 3;  // k - 1 < r
  Rng rng(4);
  EXPECT_THROW(make_ground_truth(cfg, rng), ContractViolation);
  cfg = TruthConfig{};
  cfg.condition_number = 0.5;
  EXPECT_THROW(make_ground_truth(cfg, rng), ContractViolation);
}

TEST(GroundTruth, NetworkTruthRespectsCaps) {
  TruthConfig cfg;
  cfg.mlp_hidden = 8;
  Rng rng(5);
  const GroundTruth t = make_ground_truth(cfg, rng);
  const auto& net = std::get<MlpRep>(t.rep);
  EXPECT_LE(norm_1_inf(net.layers()[0]), cfg.mlp_inner_cap + 1e-9);
  EXPECT_LE(norm_inf_to_2(net.layers()[1]), cfg.mlp_outer_cap + 1e-9);
  EXPECT_EQ(output_dim(t.rep), cfg.r);
}

TEST(SampleCovariates, CentredAndTruncated) {
  Rng rng(6);
  const CovariateSpec spec = CovariateSpec::isotropic(2);
  const Matrix x = sample_covariates(spec, 100000, rng);
  double m0 = 0, m1 = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    m0 += x(i, 0);
    m1 += x(i, 1);
    ASSERT_LE(norm2(x.row(i)), spec.norm_cap());
  }
  EXPECT_NEAR(m0 / 1e5, 0.0, 0.02);
  EXPECT_NEAR(m1 / 1e5, 0.0, 0.02);
}

TEST(SampleCovariates, InfeasibleCapIsReported) {
  Rng rng(7);
  const CovariateSpec spec(Matrix::identity(50), 1.0, 1.0, 0.1);
  EXPECT_THROW(sample_covariates(spec, 10, rng), InfeasibleSpec);
}

TEST(SampleLabels, FrequenciesMatchSoftmax) {
  const SubspaceRep rep = SubspaceRep::identity(2);
  const LinearHead head(Matrix::from_rows({{1.0, -0.5}, {0.2, 0.7}}), 2.0);
  const std::size_t n = 60000;
  Matrix x(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 0.8;
    x(i, 1) = -0.4;
  }
  Rng rng(8);
  const Matrix y = sample_labels(rep, head, x, rng);
  const Vector p = softmax_prob(apply_head(head, Vector{0.8, -0.4}));
  Vector freq(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = OneHotLabel::from_vector(y.row(i));
    freq[label.class_index() - 1] += 1.0 / n;
  }
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_NEAR(freq[s], p[s], 4 * std::sqrt(p[s] * (1 - p[s]) / n));
  }
}

TEST(MakeDataset, DeterministicAndNested) {
  TruthConfig cfg;
  cfg.d = 6;
  cfg.k = 5;
  Rng rng(9);
  const GroundTruth t = make_ground_truth(cfg, rng);
  const CovariateSpec spec = CovariateSpec::isotropic(6);
  const LabeledDataset small = make_dataset(t.rep, t.pre_head, spec, 50, 123);
  const LabeledDataset big = make_dataset(t.rep, t.pre_head, spec, 200, 123);
  const LabeledDataset again = make_dataset(t.rep, t.pre_head, spec, 200, 123);
  EXPECT_EQ(big.x, again.x);
  EXPECT_EQ(big.y, again.y);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(small.x(i, j), big.x(i, j));
    EXPECT_EQ(small.label_index(i), big.label_index(i));
  }
  EXPECT_NO_THROW(big.validate());
}

TEST(DatasetCsv, RoundTripIsExact) {
  TruthConfig cfg;
  cfg.d = 4;
  cfg.k = 6;
  Rng rng(10);
  const GroundTruth t = make_ground_truth(cfg, rng);
  const CovariateSpec spec = CovariateSpec::isotropic(4);
  const LabeledDataset data = make_dataset(t.rep, t.pre_head, spec, 40, 77);
  const auto path = temp_path("roundtrip.csv");
  write_dataset_csv(path, data, spec.hash());
  const DatasetFile back = read_dataset_csv(path);
  EXPECT_EQ(back.data.x, data.x);
  EXPECT_EQ(back.data.y, data.y);
  EXPECT_EQ(back.data.num_classes, 6u);
  EXPECT_EQ(back.data.seed, 77u);
  EXPECT_EQ(back.spec_hash, spec.hash());
  std::ifstream in(path);
  std::string first, second;
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(first.rfind("# tlab-dataset", 0), 0u);
  EXPECT_EQ(second, "x1,x2,x3,x4,label");
}

TEST(DatasetCsv, MalformedFilesAreRejected) {
  const auto path = temp_path("bad.csv");
  std::ofstream(path) << "# tlab-dataset d=2 K=3 n=1 seed=0 spec_hash=0\nx1,x2,label\n0.1,0.2,4\n";
  EXPECT_THROW(read_dataset_csv(path), ContractViolation);
  std::ofstream(path) << "hello\n";
  EXPECT_THROW(read_dataset_csv(path), ContractViolation);
  std::ofstream(path) << "# tlab-dataset d=2 K=3 n=1 seed=0 spec_hash=0\nx1,x2,label\n0.1,2\n";
  EXPECT_THROW(read_dataset_csv(path), ContractViolation);
}

TEST(ModelIo, TruthBundleRoundTrip) {
  for (std::size_t hidden : {0u, 5u}) {
    TruthConfig cfg;
    cfg.mlp_hidden = hidden;
    Rng rng(11);
    const GroundTruth t = make_ground_truth(cfg, rng);
    const CovariateSpec spec = CovariateSpec::isotropic(cfg.d);
    std::stringstream buf;
    write_model(buf, truth_bundle(t, spec));
    const ModelBundle back = read_model(buf);
    const GroundTruth t2 = truth_from_bundle(back);
    EXPECT_EQ(t2.pre_head.alpha(), t.pre_head.alpha());
    EXPECT_EQ(t2.down_head.alpha(), t.down_head.alpha());
    EXPECT_EQ(t2.down_head.column_cap(), t.down_head.column_cap());
    ASSERT_TRUE(back.covariates.has_value());
    EXPECT_EQ(back.covariates->hash(), spec.hash());
    Rng xr(12);
    const Matrix x = sample_covariates(spec, 5, xr);
    EXPECT_EQ(embed(t2.rep, x), embed(t.rep, x));
  }
}

TEST(ModelIo, RejectsUnknownContent) {
  std::stringstream bad("not-a-model\n");
  EXPECT_THROW(read_model(bad), ContractViolation);
  std::stringstream section("tlab-model 1\nwidget 3\nend\n");
  EXPECT_THROW(read_model(section), ContractViolation);
}

}  // namespace
}  // namespace tlab
