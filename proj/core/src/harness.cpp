#include "tlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "tlab/diagnostics.hpp"
#include "tlab/errors.hpp"
#include "tlab/model_space.hpp"
#include "tlab/synthetic.hpp"
#include "tlab/text_io.hpp"

namespace tlab {

using Json = nlohmann::ordered_json;

namespace {

template <class T>
void require_positive_list(const std::vector<T>& values, const char* name) {
  if (values.empty()) throw ContractViolation(std::string("sweep config: grid.") + name + " is empty");
  for (const T& v : values) {
    if (!(v > T{0})) {
      throw ContractViolation(std::string("sweep config: grid.") + name + " values must be positive");
    }
  }
}

void reject_unknown(const Json& obj, std::initializer_list<const char*> allowed, const char* where) {
  if (!obj.is_object()) throw ContractViolation(std::string("sweep config: ") + where + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || item.key() == a;
    if (!known) {
      throw ContractViolation(std::string("sweep config: unknown key '") + item.key() + "' in " + where);
    }
  }
}

template <class T>
void read_if(const Json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("sweep config: bad value for '") + key + "': " + e.what());
  }
}

template <class T>
void read_list_if(const Json& obj, const char* key, std::vector<T>& out) {
  if (!obj.contains(key)) return;
  const Json& v = obj.at(key);
  try {
    out = v.is_array() ? v.get<std::vector<T>>() : std::vector<T>{v.get<T>()};
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("sweep config: bad list for '") + key + "': " + e.what());
  }
}

std::string sanitize_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

CellParams pretrain_key(CellParams c) {
  c.m = 0;
  return c;
}

}  // namespace

void SweepConfig::validate() const {
  if (trials < 1) throw ContractViolation("sweep config: trials must be >= 1");
  require_positive_list(grid.n, "n");
  require_positive_list(grid.m, "m");
  require_positive_list(grid.k, "k");
  require_positive_list(grid.k_prime, "k_prime");
  require_positive_list(grid.r, "r");
  require_positive_list(grid.d, "d");
  require_positive_list(grid.condition_number, "condition_number");
  if (grid.lambda.empty()) throw ContractViolation("sweep config: grid.lambda is empty");
  for (double l : grid.lambda) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ContractViolation("sweep config: lambda must be >= 0");
  }
  for (double c : grid.condition_number) {
    if (c < 1.0) throw ContractViolation("sweep config: condition_number must be >= 1");
  }
  for (std::size_t k : grid.k) {
    if (k < 2) throw ContractViolation("sweep config: k must be >= 2");
  }
  for (std::size_t k : grid.k_prime) {
    if (k < 2) throw ContractViolation("sweep config: k_prime must be >= 2");
  }
  if (!(truth.pre_scale > 0.0) || !(truth.down_column_norm > 0.0)) {
    throw ContractViolation("sweep config: truth scales must be positive");
  }
  if (!(pretrain_head_cap > 0.0)) throw ContractViolation("sweep config: pretrain_head_cap must be positive");
  if (diagnostics.n_mc < 1) throw ContractViolation("sweep config: diagnostics.n_mc must be >= 1");
  if (!(diagnostics.delta > 0.0 && diagnostics.delta < 1.0)) {
    throw ContractViolation("sweep config: diagnostics.delta must lie in (0, 1)");
  }
  optimizer.validate();
}

SweepConfig default_sweep_config() { return SweepConfig{}; }

std::string sweep_config_to_json(const SweepConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["trials"] = cfg.trials;
  j["threads"] = cfg.threads;
  Json g;
  g["n"] = cfg.grid.n;
  g["m"] = cfg.grid.m;
  g["k"] = cfg.grid.k;
  g["k_prime"] = cfg.grid.k_prime;
  g["r"] = cfg.grid.r;
  g["d"] = cfg.grid.d;
  g["condition_number"] = cfg.grid.condition_number;
  g["lambda"] = cfg.grid.lambda;
  j["grid"] = g;
  j["truth"] = {{"pre_scale", cfg.truth.pre_scale},
                {"down_column_norm", cfg.truth.down_column_norm},
                {"mlp_hidden", cfg.truth.mlp_hidden},
                {"mlp_inner_cap", cfg.truth.mlp_inner_cap},
                {"mlp_outer_cap", cfg.truth.mlp_outer_cap}};
  j["pretrain_head_cap"] = cfg.pretrain_head_cap;
  const OptimConfig& o = cfg.optimizer;
  j["optimizer"] = {{"max_iters", o.max_iters}, {"grad_tol", o.grad_tol},
                    {"initial_step", o.initial_step}, {"shrink", o.shrink},
                    {"armijo", o.armijo}, {"min_step", o.min_step},
                    {"max_step", o.max_step}, {"ridge", o.ridge}};
  j["diagnostics"] = {{"n_mc", cfg.diagnostics.n_mc},
                      {"schur_bound", cfg.diagnostics.schur_bound},
                      {"pretrain_difference", cfg.diagnostics.pretrain_difference},
                      {"delta", cfg.diagnostics.delta}};
  j["baseline"] = cfg.baseline;
  j["constants"] = {{"name", cfg.constants.name},
                    {"pretrain", cfg.constants.pretrain},
                    {"downstream", cfg.constants.downstream}};
  return j.dump(2) + "\n";
}

SweepConfig parse_sweep_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("sweep config: invalid JSON: ") + e.what());
  }
  reject_unknown(j, {"seed", "trials", "threads", "grid", "truth", "pretrain_head_cap", "optimizer",
                     "diagnostics", "baseline", "constants"},
                 "top level");
  SweepConfig cfg;
  read_if(j, "seed", cfg.seed);
  read_if(j, "trials", cfg.trials);
  read_if(j, "threads", cfg.threads);
  read_if(j, "pretrain_head_cap", cfg.pretrain_head_cap);
  read_if(j, "baseline", cfg.baseline);
  if (j.contains("grid")) {
    const Json& g = j.at("grid");
    reject_unknown(g, {"n", "m", "k", "k_prime", "r", "d", "condition_number", "lambda"}, "grid");
    read_list_if(g, "n", cfg.grid.n);
    read_list_if(g, "m", cfg.grid.m);
    read_list_if(g, "k", cfg.grid.k);
    read_list_if(g, "k_prime", cfg.grid.k_prime);
    read_list_if(g, "r", cfg.grid.r);
    read_list_if(g, "d", cfg.grid.d);
    read_list_if(g, "condition_number", cfg.grid.condition_number);
    read_list_if(g, "lambda", cfg.grid.lambda);
  }
  if (j.contains("truth")) {
    const Json& t = j.at("truth");
    reject_unknown(t, {"pre_scale", "down_column_norm", "mlp_hidden", "mlp_inner_cap", "mlp_outer_cap"},
                   "truth");
    read_if(t, "pre_scale", cfg.truth.pre_scale);
    read_if(t, "down_column_norm", cfg.truth.down_column_norm);
    read_if(t, "mlp_hidden", cfg.truth.mlp_hidden);
    read_if(t, "mlp_inner_cap", cfg.truth.mlp_inner_cap);
    read_if(t, "mlp_outer_cap", cfg.truth.mlp_outer_cap);
  }
  if (j.contains("optimizer")) {
    const Json& o = j.at("optimizer");
    reject_unknown(o, {"max_iters", "grad_tol", "initial_step", "shrink", "armijo", "min_step",
                       "max_step", "ridge"},
                   "optimizer");
    read_if(o, "max_iters", cfg.optimizer.max_iters);
    read_if(o, "grad_tol", cfg.optimizer.grad_tol);
    read_if(o, "initial_step", cfg.optimizer.initial_step);
    read_if(o, "shrink", cfg.optimizer.shrink);
    read_if(o, "armijo", cfg.optimizer.armijo);
    read_if(o, "min_step", cfg.optimizer.min_step);
    read_if(o, "max_step", cfg.optimizer.max_step);
    read_if(o, "ridge", cfg.optimizer.ridge);
  }
  if (j.contains("diagnostics")) {
    const Json& dg = j.at("diagnostics");
    reject_unknown(dg, {"n_mc", "schur_bound", "pretrain_difference", "delta"}, "diagnostics");
    read_if(dg, "n_mc", cfg.diagnostics.n_mc);
    read_if(dg, "schur_bound", cfg.diagnostics.schur_bound);
    read_if(dg, "pretrain_difference", cfg.diagnostics.pretrain_difference);
    read_if(dg, "delta", cfg.diagnostics.delta);
  }
  if (j.contains("constants")) {
    const Json& c = j.at("constants");
    reject_unknown(c, {"name", "pretrain", "downstream"}, "constants");
    read_if(c, "name", cfg.constants.name);
    read_if(c, "pretrain", cfg.constants.pretrain);
    read_if(c, "downstream", cfg.constants.downstream);
  }
  cfg.validate();
  return cfg;
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_sweep_config(buf.str());
}

std::vector<CellParams> expand_grid(const SweepGrid& g) {
  std::vector<CellParams> cells;
  for (auto n : g.n)
    for (auto m : g.m)
      for (auto k : g.k)
        for (auto kp : g.k_prime)
          for (auto r : g.r)
            for (auto d : g.d)
              for (auto c : g.condition_number)
                for (auto l : g.lambda) cells.push_back({n, m, k, kp, r, d, c, l});
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

TrialSetup make_trial_setup(const SweepConfig& cfg, const CellParams& cell, std::size_t trial) {
  const std::uint64_t seed = derive_seed(cfg.seed, trial);
  Rng root(seed);
  TruthConfig tc;
  tc.d = cell.d;
  tc.r = cell.r;
  tc.k = cell.k;
  tc.k_prime = cell.k_prime;
  tc.condition_number = cell.condition_number;
  tc.pre_scale = cfg.truth.pre_scale;
  tc.down_column_norm = cfg.truth.down_column_norm;
  tc.mlp_hidden = cfg.truth.mlp_hidden;
  tc.mlp_inner_cap = cfg.truth.mlp_inner_cap;
  tc.mlp_outer_cap = cfg.truth.mlp_outer_cap;
  Rng truth_rng = root.split(1);
  GroundTruth truth = make_ground_truth(tc, truth_rng);
  CovariateSpec spec = CovariateSpec::isotropic(cell.d);
  LabeledDataset pre = make_dataset(truth.rep, truth.pre_head, spec, cell.n, derive_seed(seed, 2));
  return {seed, std::move(truth), std::move(spec), std::move(pre)};
}

LabeledDataset make_downstream_data(const TrialSetup& setup, std::size_t m) {
  return make_dataset(setup.truth.rep, setup.truth.down_head, setup.spec, m,
                      derive_seed(setup.seed, 3));
}

HypothesisConfig hypothesis_for(const SweepConfig& cfg, const CellParams& cell) {
  HypothesisConfig hyp;
  hyp.r = cell.r;
  hyp.head_cap = cfg.pretrain_head_cap;
  hyp.mlp_hidden = cfg.truth.mlp_hidden;
  hyp.mlp_inner_cap = cfg.truth.mlp_inner_cap;
  hyp.mlp_outer_cap = cfg.truth.mlp_outer_cap;
  return hyp;
}

std::vector<ExperimentRecord> run_trial(const SweepConfig& cfg, const CellParams& cell,
                                        std::span<const std::size_t> ms, std::size_t trial) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t trial_seed = derive_seed(cfg.seed, trial);
  std::vector<ExperimentRecord> out;
  for (std::size_t m : ms) {
    ExperimentRecord rec;
    rec.cell = cell;
    rec.cell.m = m;
    rec.trial = trial;
    rec.seed = trial_seed;
    out.push_back(rec);
  }
  try {
    Rng root(trial_seed);
    const TrialSetup setup = make_trial_setup(cfg, cell, trial);
    const GroundTruth& truth = setup.truth;
    const CovariateSpec& spec = setup.spec;
    Rng init_rng = root.split(4);
    const PretrainResult pre =
        pretrain(setup.pretrain, hypothesis_for(cfg, cell), cell.lambda, cfg.optimizer, init_rng);

    const std::size_t n_mc = cfg.diagnostics.n_mc;
    Rng pre_mc = root.split(5);
    const MeanEstimate pre_risk =
        excess_risk_kl(pre.rep, pre.head, truth.rep, truth.pre_head, spec, n_mc, pre_mc);
    MeanEstimate pre_diff;
    if (cfg.diagnostics.pretrain_difference) {
      Rng diff_mc = root.split(6);
      pre_diff = pretrain_rep_difference(pre.rep, truth, spec, n_mc, cfg.optimizer, diff_mc);
    }
    double schur = std::numeric_limits<double>::quiet_NaN();
    if (cfg.diagnostics.schur_bound) {
      Rng schur_mc = root.split(7);
      schur = schur_complement_bound(pre.rep, truth.rep, spec, std::max(n_mc, 10 * cell.r),
                                     cfg.truth.down_column_norm, cell.k_prime, schur_mc)
                  .bound;
    }
    double angle = std::numeric_limits<double>::quiet_NaN();
    if (std::holds_alternative<SubspaceRep>(pre.rep) && std::holds_alternative<SubspaceRep>(truth.rep)) {
      angle = principal_angles(std::get<SubspaceRep>(pre.rep), std::get<SubspaceRep>(truth.rep)).back();
    }
    const double nu_learned = diversity_parameter(pre.head);
    const double nu_true = diversity_parameter(truth.pre_head);

    BoundParams bp;
    bp.n = static_cast<double>(cell.n);
    bp.k = static_cast<double>(cell.k);
    bp.k_prime = static_cast<double>(cell.k_prime);
    bp.r = static_cast<double>(cell.r);
    bp.d = static_cast<double>(cell.d);
    bp.nu_tilde = nu_true;
    bp.norm_cap = spec.norm_cap();
    bp.delta = cfg.diagnostics.delta;
    const BoundSetting setting = cfg.truth.mlp_hidden > 0 ? BoundSetting::kMlp : BoundSetting::kSubspace;
    if (setting == BoundSetting::kMlp) bp.layer_caps = {cfg.truth.mlp_inner_cap, cfg.truth.mlp_outer_cap};

    const double c0 = cfg.truth.down_column_norm;
    const auto pre_done = std::chrono::steady_clock::now();
    const double pre_seconds = std::chrono::duration<double>(pre_done - start).count();
    for (ExperimentRecord& rec : out) {
      const auto t0 = std::chrono::steady_clock::now();
      const LabeledDataset down = make_downstream_data(setup, rec.cell.m);
      const HeadFit fit = fit_downstream_head(pre.rep, down, c0, cfg.optimizer);
      Rng down_mc = root.split(8);
      const MeanEstimate risk =
          excess_risk_kl(pre.rep, fit.head, truth.rep, truth.down_head, spec, n_mc, down_mc);
      rec.transfer_risk = risk.mean;
      rec.transfer_se = risk.std_error;
      if (cfg.baseline) {
        const BaselineFit base = train_baseline(down, c0, cfg.optimizer);
        Rng base_mc = root.split(8);
        const MeanEstimate br =
            excess_risk_kl(base.rep, base.head, truth.rep, truth.down_head, spec, n_mc, base_mc);
        rec.baseline_risk = br.mean;
        rec.baseline_se = br.std_error;
      } else {
        rec.baseline_risk = std::numeric_limits<double>::quiet_NaN();
        rec.baseline_se = std::numeric_limits<double>::quiet_NaN();
      }
      rec.pretrain_risk = pre_risk.mean;
      rec.pretrain_se = pre_risk.std_error;
      rec.pretrain_difference = cfg.diagnostics.pretrain_difference ? pre_diff.mean
                                                                   : std::numeric_limits<double>::quiet_NaN();
      rec.pretrain_difference_se = cfg.diagnostics.pretrain_difference
                                       ? pre_diff.std_error
                                       : std::numeric_limits<double>::quiet_NaN();
      rec.nu_learned = nu_learned;
      rec.nu_true = nu_true;
      rec.max_angle = angle;
      bp.m = static_cast<double>(rec.cell.m);
      rec.bound = evaluate_risk_bound(setting, bp, cfg.constants);
      rec.schur_bound = schur;
      rec.stop_reason = to_string(pre.trace.stop);
      rec.iterations = pre.trace.rows.size();
      rec.ok = true;
      const double own = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.wall_time = pre_seconds / static_cast<double>(out.size()) + own;
    }
  } catch (const std::exception& e) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (ExperimentRecord& rec : out) {
      rec.ok = false;
      rec.failure = sanitize_field(e.what());
      rec.wall_time = secs;
    }
  }
  return out;
}

std::vector<ExperimentRecord> run_sweep(
    const SweepConfig& cfg, const std::function<void(std::size_t, std::size_t)>& progress) {
  cfg.validate();
  // Group cells that differ only in m so one pretraining run serves them all.
  std::map<CellParams, std::vector<std::size_t>> groups;
  for (const CellParams& c : expand_grid(cfg.grid)) groups[pretrain_key(c)].push_back(c.m);
  struct Job {
    CellParams key;
    const std::vector<std::size_t>* ms;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (const auto& [key, ms] : groups)
    for (std::size_t t = 0; t < cfg.trials; ++t) jobs.push_back({key, &ms, t});

  std::vector<std::vector<ExperimentRecord>> results(jobs.size());
  std::size_t threads = cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads;
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(jobs.size(), 1));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t done = 0;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      results[i] = run_trial(cfg, jobs[i].key, *jobs[i].ms, jobs[i].trial);
      std::lock_guard<std::mutex> lock(mu);
      ++done;
      if (progress) progress(done, jobs.size());
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<ExperimentRecord> records;
  for (auto& r : results)
    for (auto& rec : r) records.push_back(std::move(rec));
  std::stable_sort(records.begin(), records.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
    if (a.cell != b.cell) return a.cell < b.cell;
    return a.trial < b.trial;
  });
  return records;
}

namespace {

const char* const kRecordColumns[] = {
    "n", "m", "k", "k_prime", "r", "d", "condition_number", "lambda", "trial", "seed", "status",
    "transfer_risk", "transfer_se", "pretrain_risk", "pretrain_se", "pretrain_difference",
    "pretrain_difference_se", "nu_learned", "nu_true", "max_angle", "baseline_risk", "baseline_se",
    "bound", "schur_bound", "stop_reason", "iterations", "failure"};

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  bool first = true;
  for (const char* c : kRecordColumns) {
    out << (first ? "" : ",") << c;
    first = false;
  }
  out << '\n';
  for (const ExperimentRecord& r : records) {
    const CellParams& c = r.cell;
    out << c.n << ',' << c.m << ',' << c.k << ',' << c.k_prime << ',' << c.r << ',' << c.d << ','
        << format_real(c.condition_number) << ',' << format_real(c.lambda) << ',' << r.trial << ','
        << r.seed << ',' << (r.ok ? "ok" : "failed") << ',' << format_real(r.transfer_risk) << ','
        << format_real(r.transfer_se) << ',' << format_real(r.pretrain_risk) << ','
        << format_real(r.pretrain_se) << ',' << format_real(r.pretrain_difference) << ','
        << format_real(r.pretrain_difference_se) << ',' << format_real(r.nu_learned) << ','
        << format_real(r.nu_true) << ',' << format_real(r.max_angle) << ','
        << format_real(r.baseline_risk) << ',' << format_real(r.baseline_se) << ','
        << format_real(r.bound) << ',' << format_real(r.schur_bound) << ',' << r.stop_reason << ','
        << r.iterations << ',' << sanitize_field(r.failure) << '\n';
  }
}

void write_records_csv(const std::filesystem::path& path, const std::vector<ExperimentRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_records_csv(out, records);
}

std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open records file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ContractViolation("records file is empty: " + path.string());
  const std::vector<std::string> header = split(line, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* c : kRecordColumns) {
    if (!col.count(c)) throw ContractViolation(std::string("records file lacks column ") + c);
  }
  std::vector<ExperimentRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != header.size()) {
      throw ContractViolation("records file line " + std::to_string(line_no) + ": wrong field count");
    }
    auto get = [&](const char* name) -> const std::string& { return f[col.at(name)]; };
    auto get_size = [&](const char* name) -> std::size_t {
      try {
        return static_cast<std::size_t>(std::stoull(get(name)));
      } catch (const std::exception&) {
        throw ContractViolation("records file line " + std::to_string(line_no) + ": bad " + name);
      }
    };
    ExperimentRecord r;
    r.cell.n = get_size("n");
    r.cell.m = get_size("m");
    r.cell.k = get_size("k");
    r.cell.k_prime = get_size("k_prime");
    r.cell.r = get_size("r");
    r.cell.d = get_size("d");
    r.cell.condition_number = parse_real(get("condition_number"));
    r.cell.lambda = parse_real(get("lambda"));
    r.trial = get_size("trial");
    r.seed = get_size("seed");
    r.ok = get("status") == "ok";
    r.transfer_risk = parse_real(get("transfer_risk"));
    r.transfer_se = parse_real(get("transfer_se"));
    r.pretrain_risk = parse_real(get("pretrain_risk"));
    r.pretrain_se = parse_real(get("pretrain_se"));
    r.pretrain_difference = parse_real(get("pretrain_difference"));
    r.pretrain_difference_se = parse_real(get("pretrain_difference_se"));
    r.nu_learned = parse_real(get("nu_learned"));
    r.nu_true = parse_real(get("nu_true"));
    r.max_angle = parse_real(get("max_angle"));
    r.baseline_risk = parse_real(get("baseline_risk"));
    r.baseline_se = parse_real(get("baseline_se"));
    r.bound = parse_real(get("bound"));
    r.schur_bound = parse_real(get("schur_bound"));
    r.stop_reason = get("stop_reason");
    r.iterations = get_size("iterations");
    r.failure = get("failure");
    records.push_back(std::move(r));
  }
  return records;
}

void write_sweep_outputs(const std::filesystem::path& dir, const SweepConfig& cfg,
                         const std::vector<ExperimentRecord>& records) {
  std::filesystem::create_directories(dir);
  write_records_csv(dir / "records.csv", records);
  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << sweep_config_to_json(cfg);
  }
  std::ofstream out(dir / "timings.txt", std::ios::binary);
  out << "# wall time in seconds per record (n,m,k,k_prime,r,d,condition_number,lambda,trial)\n";
  double total = 0.0;
  for (const ExperimentRecord& r : records) {
    const CellParams& c = r.cell;
    out << c.n << ',' << c.m << ',' << c.k << ',' << c.k_prime << ',' << c.r << ',' << c.d << ','
        << format_real(c.condition_number) << ',' << format_real(c.lambda) << ',' << r.trial << ','
        << format_real(r.wall_time) << '\n';
    total += r.wall_time;
  }
  out << "# total " << format_real(total) << '\n';
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractViolation("fit_power_law: x and y differ in length");
  if (x.size() < 3) throw ContractViolation("fit_power_law: need at least 3 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ContractViolation("fit_power_law: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ContractViolation("fit_power_law: x values are all equal");
  PowerLawFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

}  // namespace tlab
