#include "tlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "tlab/errors.hpp"
#include "tlab/text_io.hpp"

namespace tlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> finite_only(std::span<const double> values) {
  std::vector<double> out;
  for (double v : values)
    if (std::isfinite(v)) out.push_back(v);
  return out;
}

CellParams zero_axis(CellParams c, SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kN: c.n = 0; break;
    case SweepAxis::kM: c.m = 0; break;
    case SweepAxis::kConditionNumber: c.condition_number = 0.0; break;
    case SweepAxis::kLambda: c.lambda = 0.0; break;
  }
  return c;
}

std::string describe_key(const CellParams& c, SweepAxis axis) {
  std::ostringstream out;
  out << '(';
  bool first = true;
  auto add = [&](const char* name, const std::string& value, bool skip) {
    if (skip) return;
    out << (first ? "" : " ") << name << '=' << value;
    first = false;
  };
  add("n", std::to_string(c.n), axis == SweepAxis::kN);
  add("m", std::to_string(c.m), axis == SweepAxis::kM);
  add("k", std::to_string(c.k), false);
  add("k_prime", std::to_string(c.k_prime), false);
  add("r", std::to_string(c.r), false);
  add("d", std::to_string(c.d), false);
  add("condition_number", format_real(c.condition_number), axis == SweepAxis::kConditionNumber);
  add("lambda", format_real(c.lambda), axis == SweepAxis::kLambda);
  out << ')';
  return out.str();
}

const char* const kCellHeader = "n,m,k,k_prime,r,d,condition_number,lambda,trials,failed";

void write_cell_prefix(std::ostream& out, const CellSummary& s) {
  const CellParams& c = s.cell;
  out << c.n << ',' << c.m << ',' << c.k << ',' << c.k_prime << ',' << c.r << ',' << c.d << ','
      << format_real(c.condition_number) << ',' << format_real(c.lambda) << ',' << s.trials << ','
      << s.failed;
}

void write_figure(const std::filesystem::path& path, const std::vector<CellSummary>& cells,
                  SweepAxis axis, const std::string& extra_header,
                  const std::function<void(std::ostream&, const CellSummary&)>& extra) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kCellHeader << ',' << extra_header << '\n';
  for (const Series& series : group_series(cells, axis)) {
    for (const CellSummary& s : series.points) {
      write_cell_prefix(out, s);
      out << ',';
      extra(out, s);
      out << '\n';
    }
  }
}

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

}  // namespace

double quantile(std::span<const double> values, double q) {
  std::vector<double> v = finite_only(values);
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

std::vector<CellSummary> summarize_cells(const std::vector<ExperimentRecord>& records) {
  std::map<CellParams, std::vector<const ExperimentRecord*>> by_cell;
  for (const ExperimentRecord& r : records) by_cell[r.cell].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [cell, recs] : by_cell) {
    CellSummary s;
    s.cell = cell;
    std::vector<double> risk, base, angle, nu, nu_true, pre, bound, schur;
    std::size_t wins = 0, paired = 0;
    for (const ExperimentRecord* r : recs) {
      if (!r->ok) {
        ++s.failed;
        continue;
      }
      ++s.trials;
      risk.push_back(r->transfer_risk);
      base.push_back(r->baseline_risk);
      angle.push_back(r->max_angle);
      nu.push_back(r->nu_learned);
      nu_true.push_back(r->nu_true);
      pre.push_back(r->pretrain_risk);
      bound.push_back(r->bound);
      schur.push_back(r->schur_bound);
      if (r->stop_reason == to_string(StopReason::kStalled)) ++s.stalls;
      if (std::isfinite(r->baseline_risk)) {
        ++paired;
        if (r->transfer_risk < r->baseline_risk) ++wins;
      }
    }
    s.median_risk = median(risk);
    s.q1_risk = quantile(risk, 0.25);
    s.q3_risk = quantile(risk, 0.75);
    s.median_baseline = median(base);
    s.baseline_win_fraction = paired > 0 ? static_cast<double>(wins) / static_cast<double>(paired) : kNaN;
    s.median_angle = median(angle);
    s.median_nu_learned = median(nu);
    s.q1_nu_learned = quantile(nu, 0.25);
    s.q3_nu_learned = quantile(nu, 0.75);
    s.median_nu_true = median(nu_true);
    s.median_pretrain_risk = median(pre);
    s.median_bound = median(bound);
    s.median_schur = median(schur);
    out.push_back(s);
  }
  return out;
}

double axis_value(const CellParams& cell, SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kN: return static_cast<double>(cell.n);
    case SweepAxis::kM: return static_cast<double>(cell.m);
    case SweepAxis::kConditionNumber: return cell.condition_number;
    case SweepAxis::kLambda: return cell.lambda;
  }
  return kNaN;
}

std::vector<Series> group_series(const std::vector<CellSummary>& cells, SweepAxis axis) {
  std::map<CellParams, std::vector<CellSummary>> groups;
  for (const CellSummary& s : cells) groups[zero_axis(s.cell, axis)].push_back(s);
  std::vector<Series> out;
  for (auto& [key, points] : groups) {
    std::sort(points.begin(), points.end(), [axis](const CellSummary& a, const CellSummary& b) {
      return axis_value(a.cell, axis) < axis_value(b.cell, axis);
    });
    out.push_back({key, std::move(points)});
  }
  return out;
}

std::vector<SlopeVerdict> scaling_slopes(const std::vector<CellSummary>& cells, SweepAxis axis,
                                         const ReportThresholds& th) {
  std::vector<SlopeVerdict> out;
  for (const Series& series : group_series(cells, axis)) {
    std::vector<double> x, y;
    for (const CellSummary& s : series.points) {
      if (s.median_risk > 0.0) {
        x.push_back(axis_value(s.cell, axis));
        y.push_back(s.median_risk);
      }
    }
    if (x.size() < 3) continue;
    SlopeVerdict v;
    v.key = series.key;
    v.points = x.size();
    v.fit = fit_power_law(x, y);
    v.pass = v.fit.slope >= th.slope_low && v.fit.slope <= th.slope_high &&
             v.fit.r_squared >= th.min_r_squared;
    out.push_back(v);
  }
  return out;
}

std::string write_report(const std::vector<ExperimentRecord>& records,
                         const std::filesystem::path& out_dir, const ConstantsProfile& profile,
                         const ReportThresholds& th) {
  if (records.empty()) throw ContractViolation("write_report: no records");
  std::filesystem::create_directories(out_dir);
  const std::vector<CellSummary> cells = summarize_cells(records);

  const std::string risk_cols = "median_transfer_risk,q1_transfer_risk,q3_transfer_risk";
  auto risk_fields = [](std::ostream& out, const CellSummary& s) {
    out << format_real(s.median_risk) << ',' << format_real(s.q1_risk) << ',' << format_real(s.q3_risk);
  };
  write_figure(out_dir / "risk_vs_n.csv", cells, SweepAxis::kN,
               risk_cols + ",median_baseline_risk,median_max_angle",
               [&](std::ostream& out, const CellSummary& s) {
                 risk_fields(out, s);
                 out << ',' << format_real(s.median_baseline) << ',' << format_real(s.median_angle);
               });
  write_figure(out_dir / "risk_vs_m.csv", cells, SweepAxis::kM,
               risk_cols + ",median_baseline_risk",
               [&](std::ostream& out, const CellSummary& s) {
                 risk_fields(out, s);
                 out << ',' << format_real(s.median_baseline);
               });
  write_figure(out_dir / "risk_vs_nu.csv", cells, SweepAxis::kConditionNumber,
               "median_nu_true,median_nu_learned," + risk_cols,
               [&](std::ostream& out, const CellSummary& s) {
                 out << format_real(s.median_nu_true) << ',' << format_real(s.median_nu_learned) << ',';
                 risk_fields(out, s);
               });
  write_figure(out_dir / "regularizer_ablation.csv", cells, SweepAxis::kLambda,
               "median_nu_learned,q1_nu_learned,q3_nu_learned,median_transfer_risk,"
               "median_pretrain_risk,stalls",
               [&](std::ostream& out, const CellSummary& s) {
                 out << format_real(s.median_nu_learned) << ',' << format_real(s.q1_nu_learned) << ','
                     << format_real(s.q3_nu_learned) << ',' << format_real(s.median_risk) << ','
                     << format_real(s.median_pretrain_risk) << ',' << s.stalls;
               });
  write_figure(out_dir / "bound_vs_measured.csv", cells, SweepAxis::kN,
               "median_transfer_risk,median_bound,measured_over_bound,median_schur_bound,"
               "median_pretrain_risk,constants_profile",
               [&](std::ostream& out, const CellSummary& s) {
                 out << format_real(s.median_risk) << ',' << format_real(s.median_bound) << ','
                     << format_real(s.median_risk / s.median_bound) << ','
                     << format_real(s.median_schur) << ',' << format_real(s.median_pretrain_risk)
                     << ',' << profile.name;
               });
  write_figure(out_dir / "baseline_comparison.csv", cells, SweepAxis::kN,
               "median_transfer_risk,median_baseline_risk,baseline_win_fraction",
               [&](std::ostream& out, const CellSummary& s) {
                 out << format_real(s.median_risk) << ',' << format_real(s.median_baseline) << ','
                     << format_real(s.baseline_win_fraction);
               });

  std::ostringstream sum;
  std::size_t failed = 0;
  for (const ExperimentRecord& r : records) failed += r.ok ? 0 : 1;
  sum << "records " << records.size() << " (failed " << failed << "), cells " << cells.size() << '\n';
  sum << "constants profile " << profile.describe() << '\n';
  sum << "schur_bound column: closed-form (k'-1) c0^2/2 sigma1(Lambda_sc) upper bound, "
         "used in place of the worst-case downstream representation difference\n";
  sum << "slope thresholds [" << format_real(th.slope_low) << ", " << format_real(th.slope_high)
      << "], R^2 >= " << format_real(th.min_r_squared) << '\n';

  auto slope_lines = [&](SweepAxis axis, const char* label) {
    for (const SlopeVerdict& v : scaling_slopes(cells, axis, th)) {
      sum << label << ' ' << describe_key(v.key, axis) << " slope " << format_real(v.fit.slope)
          << " intercept " << format_real(v.fit.intercept) << " r2 " << format_real(v.fit.r_squared)
          << " points " << v.points << ' ' << verdict(v.pass) << '\n';
    }
  };
  slope_lines(SweepAxis::kN, "slope_n");
  slope_lines(SweepAxis::kM, "slope_m");

  for (const Series& series : group_series(cells, SweepAxis::kN)) {
    if (series.points.size() < 2) continue;
    bool risk_down = true, angle_down = true;
    for (std::size_t i = 1; i < series.points.size(); ++i) {
      risk_down = risk_down && series.points[i].median_risk < series.points[i - 1].median_risk;
      angle_down = angle_down && series.points[i].median_angle < series.points[i - 1].median_angle;
    }
    sum << "risk_decreasing_in_n " << describe_key(series.key, SweepAxis::kN) << ' '
        << verdict(risk_down) << '\n';
    if (std::isfinite(series.points.front().median_angle)) {
      sum << "subspace_recovery " << describe_key(series.key, SweepAxis::kN) << ' '
          << verdict(angle_down) << '\n';
    }
  }
  for (const Series& series : group_series(cells, SweepAxis::kConditionNumber)) {
    if (series.points.size() < 2) continue;
    bool monotone = true;
    sum << "diversity " << describe_key(series.key, SweepAxis::kConditionNumber) << " medians";
    for (std::size_t i = 0; i < series.points.size(); ++i) {
      const CellSummary& s = series.points[i];
      sum << ' ' << format_real(s.cell.condition_number) << ':' << format_real(s.median_risk);
      if (i > 0) monotone = monotone && s.median_risk >= series.points[i - 1].median_risk;
    }
    sum << ' ' << verdict(monotone) << '\n';
  }
  for (const Series& series : group_series(cells, SweepAxis::kLambda)) {
    if (series.points.size() < 2) continue;
    const CellSummary& base = series.points.front();
    std::size_t stalls = 0;
    bool larger = true;
    sum << "regularizer " << describe_key(series.key, SweepAxis::kLambda) << " median_nu";
    for (const CellSummary& s : series.points) {
      stalls += s.stalls;
      sum << ' ' << format_real(s.cell.lambda) << ':' << format_real(s.median_nu_learned);
      if (&s != &base) larger = larger && s.median_nu_learned > base.median_nu_learned;
    }
    sum << " stalls " << stalls << ' ' << verdict(larger && stalls == 0) << '\n';
  }
  for (const CellSummary& s : cells) {
    if (!std::isfinite(s.baseline_win_fraction)) continue;
    sum << "baseline " << describe_key(s.cell, SweepAxis::kN) << " n=" << s.cell.n
        << " win_fraction " << format_real(s.baseline_win_fraction) << ' '
        << verdict(s.baseline_win_fraction >= th.baseline_win_fraction) << '\n';
  }

  const std::string text = sum.str();
  std::ofstream out(out_dir / "summary.txt", std::ios::binary);
  out << text;
  return text;
}

}  // namespace tlab
