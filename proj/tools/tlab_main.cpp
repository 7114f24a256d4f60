// tlab: command-line front end for dataset generation, two-stage training,
// diagnostics, property suites and sweeps.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "tlab/diagnostics.hpp"
#include "tlab/erm.hpp"
#include "tlab/errors.hpp"
#include "tlab/harness.hpp"
#include "tlab/model_io.hpp"
#include "tlab/property_suites.hpp"
#include "tlab/report.hpp"
#include "tlab/synthetic.hpp"
#include "tlab/text_io.hpp"

namespace fs = std::filesystem;
using namespace tlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPropertyFailure = 2;
constexpr int kExitRuntime = 3;

/// A directory written by `gen` stands for the named file inside it.
fs::path resolve_data(const fs::path& p, const char* name) {
  return fs::is_directory(p) ? p / name : p;
}

struct GenArgs {
  std::string config;
  std::string out;
  std::size_t trial = 0;
};

int cmd_gen(const GenArgs& a) {
  const SweepConfig cfg = load_sweep_config(a.config);
  const CellParams cell = expand_grid(cfg.grid).front();
  const std::size_t m = *std::max_element(cfg.grid.m.begin(), cfg.grid.m.end());
  const TrialSetup setup = make_trial_setup(cfg, cell, a.trial);
  const LabeledDataset down = make_downstream_data(setup, m);
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  write_dataset_csv(dir / "pretrain.csv", setup.pretrain, setup.spec.hash());
  write_dataset_csv(dir / "downstream.csv", down, setup.spec.hash());
  save_model(dir / "truth.model", truth_bundle(setup.truth, setup.spec));
  std::cout << "wrote " << (dir / "pretrain.csv").string() << " (n=" << setup.pretrain.size()
            << "), " << (dir / "downstream.csv").string() << " (m=" << down.size() << "), "
            << (dir / "truth.model").string() << '\n';
  return kExitOk;
}

struct PretrainArgs {
  std::string data;
  double lambda = 0.0;
  std::string out;
  std::size_t r = 3;
  double head_cap = 1.0;
  std::size_t mlp_hidden = 0;
  std::uint64_t seed = 1;
  std::size_t max_iters = OptimConfig{}.max_iters;
  std::string trace;
};

int cmd_pretrain(const PretrainArgs& a) {
  const DatasetFile file = read_dataset_csv(resolve_data(a.data, "pretrain.csv"));
  HypothesisConfig hyp;
  hyp.r = a.r;
  hyp.head_cap = a.head_cap;
  hyp.mlp_hidden = a.mlp_hidden;
  OptimConfig cfg;
  cfg.max_iters = a.max_iters;
  Rng rng(a.seed);
  const PretrainResult res = pretrain(file.data, hyp, a.lambda, cfg, rng);
  ModelBundle bundle;
  bundle.rep = res.rep;
  bundle.pretrain_head = res.head;
  save_model(a.out, bundle);
  if (!a.trace.empty()) write_trace_csv(a.trace, res.trace);
  const double risk = res.trace.rows.empty() ? 0.0 : res.trace.rows.back().risk;
  std::cout << "pretrain: " << res.trace.rows.size() << " iterations, stop " << to_string(res.trace.stop)
            << ", risk " << format_real(risk) << ", nu_tilde " << format_real(diversity_parameter(res.head))
            << '\n';
  if (res.trace.stalled()) std::cerr << "warning: line search stalled before convergence\n";
  return kExitOk;
}

struct ProbeArgs {
  std::string model;
  std::string data;
  std::string out;
  double cap = TruthDefaults{}.down_column_norm;
  std::string trace;
};

int cmd_probe(const ProbeArgs& a) {
  ModelBundle bundle = load_model(a.model);
  if (!bundle.rep) throw ContractViolation("probe: model has no representation");
  const DatasetFile file = read_dataset_csv(resolve_data(a.data, "downstream.csv"));
  const HeadFit fit = fit_downstream_head(*bundle.rep, file.data, a.cap, OptimConfig{});
  bundle.downstream_head = fit.head;
  save_model(a.out, bundle);
  if (!a.trace.empty()) write_trace_csv(a.trace, fit.trace);
  const double risk = fit.trace.rows.empty() ? 0.0 : fit.trace.rows.back().risk;
  std::cout << "probe: " << fit.trace.rows.size() << " iterations, stop " << to_string(fit.trace.stop)
            << ", risk " << format_real(risk) << '\n';
  return kExitOk;
}

struct DiagnoseArgs {
  std::string model;
  std::string truth;
  std::string out;
  std::size_t n_mc = 20000;
  std::uint64_t seed = 7;
  bool pretrain_difference = false;
};

int cmd_diagnose(const DiagnoseArgs& a) {
  const ModelBundle model = load_model(a.model);
  const ModelBundle truth_file = load_model(a.truth);
  if (!model.rep) throw ContractViolation("diagnose: model has no representation");
  if (!truth_file.covariates) throw ContractViolation("diagnose: truth file has no covariate law");
  const GroundTruth truth = truth_from_bundle(truth_file);
  const CovariateSpec& spec = *truth_file.covariates;
  Rng rng(a.seed);

  struct Row {
    std::string quantity;
    double value;
    double std_error;
    std::size_t n_mc;
  };
  std::vector<Row> rows;
  rows.push_back({"nu_tilde_true", diversity_parameter(truth.pre_head), 0.0, 0});
  if (model.pretrain_head) {
    rows.push_back({"nu_tilde_learned", diversity_parameter(*model.pretrain_head), 0.0, 0});
    Rng s = rng.split(1);
    const MeanEstimate e = excess_risk_kl(*model.rep, *model.pretrain_head, truth.rep, truth.pre_head,
                                          spec, a.n_mc, s);
    rows.push_back({"excess_pretrain_risk", e.mean, e.std_error, a.n_mc});
  }
  if (model.downstream_head) {
    Rng s = rng.split(2);
    const MeanEstimate e = excess_risk_kl(*model.rep, *model.downstream_head, truth.rep,
                                          truth.down_head, spec, a.n_mc, s);
    rows.push_back({"excess_transfer_risk", e.mean, e.std_error, a.n_mc});
  }
  if (std::holds_alternative<SubspaceRep>(*model.rep) && std::holds_alternative<SubspaceRep>(truth.rep)) {
    const Vector angles =
        principal_angles(std::get<SubspaceRep>(*model.rep), std::get<SubspaceRep>(truth.rep));
    rows.push_back({"max_principal_angle", angles.back(), 0.0, 0});
  }
  {
    Rng s = rng.split(3);
    const SchurBound sb = schur_complement_bound(*model.rep, truth.rep, spec, a.n_mc,
                                                 truth.down_head.column_cap(),
                                                 truth.down_head.num_classes(), s);
    rows.push_back({"schur_sigma1", sb.sigma1, 0.0, a.n_mc});
    rows.push_back({"schur_bound", sb.bound, 0.0, a.n_mc});
  }
  if (a.pretrain_difference) {
    Rng s = rng.split(4);
    const MeanEstimate e = pretrain_rep_difference(*model.rep, truth, spec, a.n_mc, OptimConfig{}, s);
    rows.push_back({"pretrain_rep_difference", e.mean, e.std_error, a.n_mc});
  }

  std::ofstream csv(a.out, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + a.out);
  csv << "quantity,value,std_error,n_mc,seed\n";
  std::ostringstream text;
  text << "diagnostics for " << a.model << " against " << a.truth << " (seed " << a.seed << ")\n";
  for (const Row& r : rows) {
    csv << r.quantity << ',' << format_real(r.value) << ',' << format_real(r.std_error) << ',' << r.n_mc
        << ',' << a.seed << '\n';
    text << "  " << r.quantity << " = " << format_real(r.value);
    if (r.n_mc > 0 && r.std_error > 0.0) text << " +- " << format_real(r.std_error);
    text << '\n';
  }
  text << "  schur_bound replaces the worst-case downstream representation difference\n";
  std::ofstream(a.out + ".txt", std::ios::binary) << text.str();
  std::cout << text.str();
  return kExitOk;
}

int cmd_verify(std::uint64_t seed) {
  bool all = true;
  for (const SuiteResult& r : run_property_suites(seed)) {
    std::printf("%-18s %s  cases=%zu failures=%zu worst=%s limit=%s time=%.2fs\n", r.name.c_str(),
                r.pass() ? "PASS" : "FAIL", r.cases, r.failures, format_real(r.worst).c_str(),
                format_real(r.limit).c_str(), r.seconds);
    all = all && r.pass();
  }
  return all ? kExitOk : kExitPropertyFailure;
}

int cmd_sweep(const std::string& config, const std::string& out, std::optional<std::size_t> threads) {
  SweepConfig cfg = load_sweep_config(config);
  if (threads) cfg.threads = *threads;
  const auto records = run_sweep(cfg, [](std::size_t done, std::size_t total) {
    std::cerr << "\rjobs " << done << '/' << total << std::flush;
  });
  std::cerr << '\n';
  write_sweep_outputs(out, cfg, records);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.ok ? 0 : 1;
  std::cout << "wrote " << records.size() << " records to " << (fs::path(out) / "records.csv").string();
  if (failed > 0) std::cout << " (" << failed << " failed)";
  std::cout << '\n';
  return kExitOk;
}

int cmd_report(const std::string& in, const std::string& out) {
  const fs::path dir(in);
  const auto records = read_records_csv(dir / "records.csv");
  ConstantsProfile profile;
  if (fs::exists(dir / "config.json")) profile = load_sweep_config(dir / "config.json").constants;
  std::cout << write_report(records, out, profile);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tlab: two-stage multi-class transfer learning laboratory"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a truth and its pretraining/downstream datasets");
  gen_cmd->add_option("--config", gen.config, "Sweep config JSON; the first grid cell is used")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--trial", gen.trial, "Trial index used for seeding");

  PretrainArgs pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "Stage 1: fit representation and pretraining head");
  pre_cmd->add_option("--data", pre.data, "Dataset CSV or gen directory")->required();
  pre_cmd->add_option("--lambda", pre.lambda, "Diversity regularizer weight")->check(CLI::NonNegativeNumber);
  pre_cmd->add_option("--out", pre.out, "Output model file")->required();
  pre_cmd->add_option("--r", pre.r, "Representation dimension");
  pre_cmd->add_option("--head-cap", pre.head_cap, "Column cap of the pretraining head");
  pre_cmd->add_option("--mlp-hidden", pre.mlp_hidden, "Hidden width of a tanh network (0: subspace)");
  pre_cmd->add_option("--seed", pre.seed, "Initialization seed");
  pre_cmd->add_option("--max-iters", pre.max_iters, "Iteration limit");
  pre_cmd->add_option("--trace", pre.trace, "Write the optimization trace CSV here");

  ProbeArgs probe;
  auto* probe_cmd = app.add_subcommand("probe", "Stage 2: fit a downstream head on a frozen representation");
  probe_cmd->add_option("--model", probe.model, "Model from pretrain")->required();
  probe_cmd->add_option("--data", probe.data, "Dataset CSV or gen directory")->required();
  probe_cmd->add_option("--out", probe.out, "Output model file")->required();
  probe_cmd->add_option("--cap", probe.cap, "Column cap of the downstream head");
  probe_cmd->add_option("--trace", probe.trace, "Write the optimization trace CSV here");

  DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "Diagnostics of a model against the generating truth");
  diag_cmd->add_option("--model", diag.model, "Model file")->required();
  diag_cmd->add_option("--truth", diag.truth, "Truth model written by gen")->required();
  diag_cmd->add_option("--out", diag.out, "Output CSV (a .txt summary is written alongside)")->required();
  diag_cmd->add_option("--n-mc", diag.n_mc, "Monte Carlo sample size");
  diag_cmd->add_option("--seed", diag.seed, "Monte Carlo seed");
  diag_cmd->add_flag("--pretrain-difference", diag.pretrain_difference,
                     "Also estimate the pretraining representation difference");

  std::uint64_t verify_seed = 2024;
  auto* verify_cmd = app.add_subcommand("verify", "Run the property suites; exit 2 on any failure");
  verify_cmd->add_option("--seed", verify_seed, "Suite seed");

  std::string sweep_config, sweep_out;
  std::optional<std::size_t> sweep_threads;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a full experiment sweep");
  sweep_cmd->add_option("--config", sweep_config, "Sweep config JSON")->required();
  sweep_cmd->add_option("--out", sweep_out, "Output directory")->required();
  sweep_cmd->add_option("--threads", sweep_threads, "Override the worker count");

  std::string report_in, report_out;
  auto* report_cmd = app.add_subcommand("report", "Aggregate sweep records into figure CSVs and a summary");
  report_cmd->add_option("--in", report_in, "Sweep output directory")->required();
  report_cmd->add_option("--out", report_out, "Report directory")->required();

  auto* print_cmd = app.add_subcommand("print-default-config", "Print the default sweep config JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (pre_cmd->parsed()) return cmd_pretrain(pre);
    if (probe_cmd->parsed()) return cmd_probe(probe);
    if (diag_cmd->parsed()) return cmd_diagnose(diag);
    if (verify_cmd->parsed()) return cmd_verify(verify_seed);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_config, sweep_out, sweep_threads);
    if (report_cmd->parsed()) return cmd_report(report_in, report_out);
    if (print_cmd->parsed()) {
      std::cout << sweep_config_to_json(default_sweep_config());
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
