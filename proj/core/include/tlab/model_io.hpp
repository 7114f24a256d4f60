#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "tlab/model_space.hpp"
#include "tlab/synthetic.hpp"

namespace tlab {

/// Everything a model file can carry. A fitted pipeline stores the
/// representation and heads; a ground-truth file also stores the covariate
/// law it was generated under.
struct ModelBundle {
  std::optional<Representation> rep;
  std::optional<LinearHead> pretrain_head;
  std::optional<LinearHead> downstream_head;
  std::optional<CovariateSpec> covariates;
};

/// Line-oriented text container:
///
///   tlab-model 1
///   representation subspace            | representation mlp <layers>
///   matrix <rows> <cols>               | layer <cap>  (then a matrix block)
///   <row values separated by spaces>
///   head pretrain|downstream <column_cap> <output_cap>
///   matrix ...
///   covariates <sigma_min> <sigma_max> <norm_cap>
///   matrix ...
///   end
///
/// Reals are written with 17 significant digits, so reading a written file
/// reproduces every entry exactly.
void write_model(std::ostream& out, const ModelBundle& bundle);
ModelBundle read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_model(const std::filesystem::path& path);

/// Ground truth as a bundle and back (throws ContractViolation when a
/// section is missing).
ModelBundle truth_bundle(const GroundTruth& truth, const CovariateSpec& spec);
GroundTruth truth_from_bundle(const ModelBundle& bundle);

}  // namespace tlab
