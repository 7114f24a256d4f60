// Acceptance suite: one PASS/FAIL line per criterion, exit 0 only if all pass.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tlab/diagnostics.hpp"
#include "tlab/harness.hpp"
#include "tlab/linalg.hpp"
#include "tlab/property_suites.hpp"
#include "tlab/report.hpp"
#include "tlab/rng.hpp"

namespace fs = std::filesystem;
using namespace tlab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

struct Outcome {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Outcome> g_outcomes;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  g_outcomes.push_back({id, name, pass, detail});
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << " " << name << ": " << detail << std::endl;
}

std::string suite_detail(const SuiteResult& r) {
  return std::to_string(r.cases) + " cases, " + std::to_string(r.failures) + " failures, worst " +
         fmt(r.worst, 6) + " (limit " + fmt(r.limit, 6) + "), " + fmt(r.seconds, 3) + " s";
}

void suite_criterion(int id, const std::string& name, const std::function<SuiteResult()>& run,
                     double time_limit) {
  const auto t0 = Clock::now();
  const SuiteResult r = run();
  const double secs = seconds_since(t0);
  report(id, name, r.pass() && secs < time_limit,
         suite_detail(r) + ", time limit " + fmt(time_limit) + " s");
}

void complexity_criterion(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const double c = std::sqrt(2.0 / std::numbers::pi);
  const std::size_t draws = 10000;
  std::ostringstream detail;
  bool ok = true;

  // Linear class, one class column, one sample: E|g| ||z|| = sqrt(2/pi) ||z||.
  Rng rng_lin = Rng(seed).split(1);
  const Matrix z = Matrix::from_rows({{0.6, -0.8, 1.2}});
  const ComplexityEstimate lin = empirical_gaussian_complexity_linear(z, 1.0, 2, draws, rng_lin);
  const double lin_expected = c * norm2(z.row(0));
  const bool lin_ok = std::abs(lin.value - lin_expected) <= 3 * lin.std_error;
  detail << "linear " << fmt(lin.value, 6) << " vs " << fmt(lin_expected, 6) << " (se " << fmt(lin.std_error, 3)
         << ")";
  ok = ok && lin_ok;

  // Finite class {+a, -a}: E sup = E|<g, a>|/n = sqrt(2/pi) ||a|| / n.
  Rng rng_fin = Rng(seed).split(2);
  const Matrix a = Matrix::from_rows({{1.0, -0.5}, {0.25, 2.0}});
  Matrix neg = a;
  for (std::size_t i = 0; i < neg.rows(); ++i)
    for (std::size_t j = 0; j < neg.cols(); ++j) neg(i, j) = -neg(i, j);
  const std::vector<Matrix> pm{a, neg};
  const ComplexityEstimate fin = mc_complexity_finite(pm, draws, ComplexityKind::kGaussian, rng_fin);
  double fro = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) fro += a(i, j) * a(i, j);
  const double fin_expected = c * std::sqrt(fro) / static_cast<double>(a.rows());
  const bool fin_ok = std::abs(fin.value - fin_expected) <= 3 * fin.std_error;
  detail << "; finite " << fmt(fin.value, 6) << " vs " << fmt(fin_expected, 6) << " (se "
         << fmt(fin.std_error, 3) << ")";
  ok = ok && fin_ok;

  const SuiteResult chain = chain_rule_suite(20, seed);
  detail << "; chain rule " << chain.cases - chain.failures << "/" << chain.cases << " instances pass";
  ok = ok && chain.pass();

  const double secs = seconds_since(t0);
  detail << ", " << fmt(secs, 3) << " s (limit 120 s)";
  report(5, "complexity oracle equivalence", ok && secs < 120.0, detail.str());
}

SweepConfig base_config(std::uint64_t seed) {
  SweepConfig cfg = default_sweep_config();
  cfg.seed = seed;
  cfg.threads = 0;
  return cfg;
}

std::vector<CellSummary> run_and_summarize(const SweepConfig& cfg, const fs::path& dir,
                                           const std::string& label, double* seconds) {
  std::cout << "  running " << label << " sweep (" << expand_grid(cfg.grid).size() << " cells x "
            << cfg.trials << " trials)" << std::endl;
  const auto t0 = Clock::now();
  std::size_t last = 0;
  const auto records = run_sweep(cfg, [&](std::size_t done, std::size_t total) {
    const std::size_t pct = 100 * done / total;
    if (pct >= last + 25 || done == total) {
      std::cout << "    " << label << " " << done << "/" << total << " jobs" << std::endl;
      last = pct;
    }
  });
  *seconds = seconds_since(t0);
  write_sweep_outputs(dir, cfg, records);
  write_report(records, dir / "report", cfg.constants);
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (!r.ok) {
      ++failed;
      std::cout << "    failed job n=" << r.cell.n << " m=" << r.cell.m << " trial " << r.trial << ": "
                << r.failure << std::endl;
    }
  }
  std::cout << "  " << label << " sweep done in " << fmt(*seconds, 4) << " s, " << failed
            << " failed rows" << std::endl;
  return summarize_cells(records);
}

bool all_trials_ok(const std::vector<CellSummary>& cells) {
  return std::all_of(cells.begin(), cells.end(), [](const CellSummary& s) { return s.failed == 0; });
}

void scaling_criteria(std::uint64_t seed, const fs::path& work) {
  SweepConfig cfg = base_config(seed);
  cfg.grid.n = {500, 1000, 2000, 4000, 8000};
  cfg.grid.m = {50, 100, 200, 400, 800};
  cfg.grid.k = {30};
  cfg.grid.k_prime = {2};
  cfg.grid.r = {3};
  cfg.grid.d = {20};
  cfg.grid.condition_number = {1.0};
  cfg.trials = 10;
  double secs = 0.0;
  const auto cells = run_and_summarize(cfg, work / "scaling", "n x m scaling", &secs);
  const bool clean = all_trials_ok(cells);

  auto series = [&](auto pick, auto axis) {
    std::vector<std::pair<double, const CellSummary*>> pts;
    for (const CellSummary& s : cells)
      if (pick(s.cell)) pts.push_back({axis(s.cell), &s});
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return pts;
  };

  {
    const auto pts = series([](const CellParams& c) { return c.m == 200; },
                            [](const CellParams& c) { return static_cast<double>(c.n); });
    std::vector<double> x, y;
    std::ostringstream medians;
    for (const auto& [v, s] : pts) {
      x.push_back(v);
      y.push_back(s->median_risk);
      medians << " " << v << ":" << fmt(s->median_risk, 4);
    }
    bool ok = clean && x.size() == 5;
    std::string detail;
    try {
      const PowerLawFit f = fit_power_law(x, y);
      ok = ok && f.slope >= -0.75 && f.slope <= -0.25 && f.r_squared >= 0.8 && secs < 900.0;
      detail = "slope " + fmt(f.slope) + " r2 " + fmt(f.r_squared) + " (need [-0.75, -0.25], r2 >= 0.8)";
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("fit failed: ") + e.what();
    }
    report(6, "n-scaling", ok,
           detail + "; medians" + medians.str() + "; sweep " + fmt(secs, 4) + " s (limit 900 s)");
  }
  {
    const auto pts = series([](const CellParams& c) { return c.n == 8000; },
                            [](const CellParams& c) { return static_cast<double>(c.m); });
    std::vector<double> x, y;
    std::ostringstream medians;
    for (const auto& [v, s] : pts) {
      x.push_back(v);
      y.push_back(s->median_risk);
      medians << " " << v << ":" << fmt(s->median_risk, 4);
    }
    bool ok = clean && x.size() == 5;
    std::string detail;
    try {
      const PowerLawFit f = fit_power_law(x, y);
      ok = ok && f.slope >= -0.75 && f.slope <= -0.25 && secs < 900.0;
      detail = "slope " + fmt(f.slope) + " r2 " + fmt(f.r_squared) + " (need [-0.75, -0.25])";
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("fit failed: ") + e.what();
    }
    report(7, "m-scaling", ok,
           detail + "; medians" + medians.str() + "; sweep " + fmt(secs, 4) + " s (limit 900 s)");
  }
  {
    const auto pts = series(
        [](const CellParams& c) { return c.m == 200 && (c.n == 500 || c.n == 2000 || c.n == 8000); },
        [](const CellParams& c) { return static_cast<double>(c.n); });
    bool ok = clean && pts.size() == 3;
    std::ostringstream detail;
    detail << "median largest angle";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      detail << " " << pts[i].first << ":" << fmt(pts[i].second->median_angle, 4);
      if (i > 0) ok = ok && pts[i].second->median_angle < pts[i - 1].second->median_angle;
    }
    report(11, "subspace recovery", ok, detail.str() + " (must strictly decrease)");
  }
}

void diversity_criterion(std::uint64_t seed, const fs::path& work) {
  SweepConfig cfg = base_config(seed);
  cfg.grid.n = {4000};
  cfg.grid.m = {200};
  cfg.grid.condition_number = {1.0, 10.0, 100.0};
  cfg.trials = 10;
  cfg.baseline = false;
  cfg.diagnostics.schur_bound = false;
  double secs = 0.0;
  const auto cells = run_and_summarize(cfg, work / "diversity", "diversity", &secs);
  bool ok = all_trials_ok(cells) && cells.size() == 3;
  std::ostringstream detail;
  detail << "median risk by condition number";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    detail << " " << cells[i].cell.condition_number << ":" << fmt(cells[i].median_risk, 4) << " (nu "
           << fmt(cells[i].median_nu_true, 3) << ")";
    if (i > 0) ok = ok && cells[i].median_risk >= cells[i - 1].median_risk;
  }
  report(8, "diversity effect", ok, detail.str() + " (must be non-decreasing)");
}

void baseline_criterion(std::uint64_t seed, const fs::path& work) {
  SweepConfig cfg = base_config(seed);
  cfg.grid.n = {8000};
  cfg.grid.m = {100};
  cfg.grid.d = {50};
  cfg.grid.r = {3};
  cfg.trials = 20;
  cfg.baseline = true;
  cfg.diagnostics.schur_bound = false;
  double secs = 0.0;
  const auto cells = run_and_summarize(cfg, work / "baseline", "baseline", &secs);
  bool ok = all_trials_ok(cells) && cells.size() == 1;
  std::string detail;
  if (!cells.empty()) {
    const CellSummary& s = cells.front();
    ok = ok && s.trials == 20 && s.baseline_win_fraction >= 0.9;
    detail = "pretrained wins in " + fmt(s.baseline_win_fraction * 100, 4) + "% of " + std::to_string(s.trials) +
             " seeds (need >= 90%); median risk " + fmt(s.median_risk, 4) + " vs baseline " +
             fmt(s.median_baseline, 4);
  }
  report(9, "pretraining beats no pretraining", ok, detail);
}

void regularizer_criterion(std::uint64_t seed, const fs::path& work) {
  SweepConfig cfg = base_config(seed);
  cfg.grid.n = {2000};
  cfg.grid.m = {200};
  cfg.grid.lambda = {0.0, 0.5};
  cfg.trials = 10;
  cfg.baseline = false;
  cfg.diagnostics.schur_bound = false;
  double secs = 0.0;
  const auto cells = run_and_summarize(cfg, work / "regularizer", "regularizer", &secs);
  bool ok = all_trials_ok(cells) && cells.size() == 2;
  std::string detail;
  if (cells.size() == 2) {
    const std::size_t stalls = cells[0].stalls + cells[1].stalls;
    ok = ok && cells[1].median_nu_learned > cells[0].median_nu_learned && stalls == 0;
    detail = "median learned nu " + fmt(cells[0].median_nu_learned, 5) + " (lambda 0) vs " +
             fmt(cells[1].median_nu_learned, 5) + " (lambda 0.5), stalls " + std::to_string(stalls);
  }
  report(10, "regularizer mechanism", ok, detail);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism_criterion(std::uint64_t seed, const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SweepConfig cfg = base_config(seed);
  cfg.grid.n = {300, 600, 1200};
  cfg.grid.m = {40, 80};
  cfg.grid.k = {6};
  cfg.grid.r = {2};
  cfg.grid.d = {8};
  cfg.grid.lambda = {0.0, 0.5};
  cfg.trials = 3;
  cfg.threads = 1;
  cfg.diagnostics.n_mc = 5000;
  std::ofstream(dir / "config.json") << sweep_config_to_json(cfg);

  std::vector<std::string> outputs;
  bool ran = true;
#ifdef TLAB_CLI_PATH
  const std::string cli = TLAB_CLI_PATH;
  for (const char* run : {"run1", "run2"}) {
    const fs::path out = dir / run;
    ran = ran && run_command(cli + " sweep --config " + (dir / "config.json").string() + " --out " +
                             out.string() + " > " + (dir / (std::string(run) + ".log")).string() + " 2>&1") == 0;
    ran = ran && run_command(cli + " report --in " + out.string() + " --out " + (out / "report").string() +
                             " > /dev/null 2>&1") == 0;
  }
  const std::string mode = "tlab sweep + report CLI";
#else
  for (const char* run : {"run1", "run2"}) {
    const auto recs = run_sweep(cfg);
    write_sweep_outputs(dir / run, cfg, recs);
    write_report(recs, dir / run / "report", cfg.constants);
  }
  const std::string mode = "library sweep + report";
#endif
  std::size_t compared = 0, differing = 0;
  std::string first_diff;
  if (ran) {
    for (const auto& entry : fs::recursive_directory_iterator(dir / "run1")) {
      if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
      const fs::path rel = fs::relative(entry.path(), dir / "run1");
      ++compared;
      if (slurp(entry.path()) != slurp(dir / "run2" / rel)) {
        ++differing;
        if (first_diff.empty()) first_diff = rel.string();
      }
    }
  }
  const bool ok = ran && compared >= 7 && differing == 0;
  report(12, "determinism", ok,
         mode + ", " + std::to_string(compared) + " CSV files compared, " + std::to_string(differing) +
             " differ" + (first_diff.empty() ? "" : " (first: " + first_diff + ")") +
             (ran ? "" : "; a command failed"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string work_dir = (fs::temp_directory_path() / "tlab_acceptance").string();
  std::uint64_t seed = 20240611;
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "Directory for sweep outputs");
  app.add_option("--seed", seed, "Base seed");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path work(work_dir);
  fs::create_directories(work);
  const std::set<int> selected(only.begin(), only.end());
  auto want = [&](std::initializer_list<int> ids) {
    if (selected.empty()) return true;
    for (int id : ids)
      if (selected.count(id)) return true;
    return false;
  };

  const auto t0 = Clock::now();
  try {
    if (want({1}))
      suite_criterion(1, "self-concordance", [&] { return self_concordance_suite(10000, seed); }, 10.0);
    if (want({2}))
      suite_criterion(2, "hessian spectrum", [&] { return hessian_spectrum_suite(1000, seed); }, 10.0);
    if (want({3})) suite_criterion(3, "KL sandwich", [&] { return kl_sandwich_suite(1000, seed); }, 5.0);
    if (want({4})) suite_criterion(4, "gradient checks", [&] { return gradient_suite(100, seed); }, 30.0);
    if (want({5})) complexity_criterion(seed);
    if (want({6, 7, 11})) scaling_criteria(seed, work);
    if (want({8})) diversity_criterion(seed, work);
    if (want({9})) baseline_criterion(seed, work);
    if (want({10})) regularizer_criterion(seed, work);
    if (want({12})) determinism_criterion(seed, work);
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance aborted: " << e.what() << std::endl;
    return 1;
  }

  std::sort(g_outcomes.begin(), g_outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  std::size_t passed = 0;
  std::cout << "\nsummary (" << fmt(seconds_since(t0), 4) << " s):\n";
  for (const Outcome& o : g_outcomes) {
    passed += o.pass ? 1 : 0;
    std::cout << "  " << (o.pass ? "PASS" : "FAIL") << " " << o.id << " " << o.name << '\n';
  }
  std::cout << passed << "/" << g_outcomes.size() << " criteria passed" << std::endl;
  return passed == g_outcomes.size() ? 0 : 1;
}
