#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlab/bounds.hpp"
#include "tlab/harness.hpp"

namespace tlab {

/// Linear-interpolation quantile (q in [0, 1]) of the finite values; NaN if none.
double quantile(std::span<const double> values, double q);
double median(std::span<const double> values);

/// Per-cell aggregates over the successful trials.
struct CellSummary {
  CellParams cell;
  std::size_t trials = 0;
  std::size_t failed = 0;
  double median_risk = 0.0, q1_risk = 0.0, q3_risk = 0.0;
  double median_baseline = 0.0;
  /// Share of trials whose transfer risk is below the paired baseline risk.
  double baseline_win_fraction = 0.0;
  double median_angle = 0.0;
  double median_nu_learned = 0.0, q1_nu_learned = 0.0, q3_nu_learned = 0.0;
  double median_nu_true = 0.0;
  double median_pretrain_risk = 0.0;
  double median_bound = 0.0;
  double median_schur = 0.0;
  std::size_t stalls = 0;
};

/// Sorted by cell.
std::vector<CellSummary> summarize_cells(const std::vector<ExperimentRecord>& records);

enum class SweepAxis { kN, kM, kConditionNumber, kLambda };

/// Cells that agree on every parameter except `axis`, ordered along it.
struct Series {
  CellParams key;  ///< axis field zeroed
  std::vector<CellSummary> points;
};

std::vector<Series> group_series(const std::vector<CellSummary>& cells, SweepAxis axis);
double axis_value(const CellParams& cell, SweepAxis axis);

struct SlopeVerdict {
  CellParams key;
  std::size_t points = 0;
  PowerLawFit fit;
  bool pass = false;
};

/// Thresholds the summary checks fitted slopes against.
struct ReportThresholds {
  double slope_low = -0.75;
  double slope_high = -0.25;
  double min_r_squared = 0.8;
  double baseline_win_fraction = 0.9;
};

/// Slope of median transfer risk along `axis` for every series with >= 3 points.
std::vector<SlopeVerdict> scaling_slopes(const std::vector<CellSummary>& cells, SweepAxis axis,
                                         const ReportThresholds& thresholds = {});

/// Writes risk_vs_n.csv, risk_vs_m.csv, risk_vs_nu.csv, regularizer_ablation.csv,
/// bound_vs_measured.csv, baseline_comparison.csv and summary.txt into
/// `out_dir`; returns the summary text. Throws ContractViolation when
/// `records` is empty.
std::string write_report(const std::vector<ExperimentRecord>& records,
                         const std::filesystem::path& out_dir,
                         const ConstantsProfile& profile = {},
                         const ReportThresholds& thresholds = {});

}  // namespace tlab
