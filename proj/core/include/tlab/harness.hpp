#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tlab/bounds.hpp"
#include "tlab/erm.hpp"
#include "tlab/synthetic.hpp"

namespace tlab {

/// Value lists swept by run_sweep; the cells are their Cartesian product.
struct SweepGrid {
  std::vector<std::size_t> n{500, 1000, 2000, 4000, 8000};
  std::vector<std::size_t> m{200};
  std::vector<std::size_t> k{30};
  std::vector<std::size_t> k_prime{2};
  std::vector<std::size_t> r{3};
  std::vector<std::size_t> d{20};
  std::vector<double> condition_number{1.0};
  std::vector<double> lambda{0.0};
};

struct TruthDefaults {
  double pre_scale = 1.0;
  double down_column_norm = 0.6;
  std::size_t mlp_hidden = 0;
  double mlp_inner_cap = 2.0;
  double mlp_outer_cap = 2.0;
};

struct DiagnosticsConfig {
  std::size_t n_mc = 20000;
  bool schur_bound = true;
  /// Pretraining-stage representation difference; costs a K-class head fit.
  bool pretrain_difference = false;
  double delta = 0.05;
};

struct SweepConfig {
  std::uint64_t seed = 20240611;
  std::size_t trials = 10;
  /// Worker threads; 0 uses std::thread::hardware_concurrency().
  std::size_t threads = 0;
  SweepGrid grid;
  TruthDefaults truth;
  /// Pretraining hypothesis; r and the MLP width follow the cell and truth.
  double pretrain_head_cap = 1.0;
  OptimConfig optimizer;
  DiagnosticsConfig diagnostics;
  bool baseline = true;
  ConstantsProfile constants;

  /// Throws ContractViolation for empty or non-positive grid values.
  void validate() const;
};

SweepConfig default_sweep_config();
std::string sweep_config_to_json(const SweepConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SweepConfig parse_sweep_config(std::string_view json);
SweepConfig load_sweep_config(const std::filesystem::path& path);

struct CellParams {
  std::size_t n = 0, m = 0, k = 0, k_prime = 0, r = 0, d = 0;
  double condition_number = 1.0;
  double lambda = 0.0;

  auto operator<=>(const CellParams&) const = default;
};

struct ExperimentRecord {
  CellParams cell;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  double transfer_risk = 0.0;
  double transfer_se = 0.0;
  double pretrain_risk = 0.0;
  double pretrain_se = 0.0;
  double pretrain_difference = 0.0;
  double pretrain_difference_se = 0.0;
  double nu_learned = 0.0;
  double nu_true = 0.0;
  /// Largest principal angle to the true span; NaN for network representations.
  double max_angle = 0.0;
  double baseline_risk = 0.0;
  double baseline_se = 0.0;
  double bound = 0.0;
  double schur_bound = 0.0;
  std::string stop_reason;
  std::size_t iterations = 0;
  /// Seconds; kept out of records.csv so reruns are byte-identical.
  double wall_time = 0.0;
};

std::vector<CellParams> expand_grid(const SweepGrid& grid);

/// Truth, covariate law and pretraining sample of one (cell, trial).
struct TrialSetup {
  std::uint64_t seed = 0;
  GroundTruth truth;
  CovariateSpec spec;
  LabeledDataset pretrain;
};

TrialSetup make_trial_setup(const SweepConfig& cfg, const CellParams& cell, std::size_t trial);
/// Downstream samples are nested: the first m rows agree for every m.
LabeledDataset make_downstream_data(const TrialSetup& setup, std::size_t m);
HypothesisConfig hypothesis_for(const SweepConfig& cfg, const CellParams& cell);

/// One (cell, trial) job for every m in `ms`, sharing a single pretraining run.
std::vector<ExperimentRecord> run_trial(const SweepConfig& cfg, const CellParams& cell,
                                        std::span<const std::size_t> ms, std::size_t trial);

/// Runs every cell x trial. Records come back sorted by (cell, trial) whatever
/// the thread count; a failing job yields rows with ok = false. `progress` is
/// called from the worker that finished a job, under a lock.
std::vector<ExperimentRecord> run_sweep(
    const SweepConfig& cfg,
    const std::function<void(std::size_t done, std::size_t total)>& progress = {});

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
void write_records_csv(const std::filesystem::path& path,
                       const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& path);

/// Writes records.csv, config.json and timings.txt into `dir`.
void write_sweep_outputs(const std::filesystem::path& dir, const SweepConfig& cfg,
                         const std::vector<ExperimentRecord>& records);

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares of log y on log x. Needs >= 3 points with x, y > 0.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

}  // namespace tlab
