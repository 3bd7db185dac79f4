// lwsat: generate datasets, train policies, solve instances, and benchmark
// solver variants from one binary.
//
// Exit codes: 0 success, 2 usage/config error, 3 resource budget exceeded,
// 10 solver returned UNKNOWN.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lwsat/lwsat.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// option resolution: flag > config file > environment > default

class ConfigMerge {
public:
  void load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw lwsat::Error("cannot read config file " + path.string());
    try {
      in >> cfg_;
    } catch (const json::exception& e) {
      throw lwsat::Error("bad JSON in config file " + path.string() + ": " + e.what());
    }
    if (!cfg_.is_object()) throw lwsat::Error("config file must hold a JSON object");
  }

  bool has(const std::string& key) const { return cfg_.contains(key); }

  template <class T>
  void apply(const CLI::Option* opt, const std::string& key, T& value) const {
    if (opt != nullptr && opt->count() > 0) return;
    if (!cfg_.contains(key)) return;
    try {
      value = cfg_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw lwsat::Error("bad config value for '" + key + "': " + e.what());
    }
  }

  template <class T>
  void apply(const CLI::Option* opt, const std::string& key, std::optional<T>& value) const {
    if (opt != nullptr && opt->count() > 0) return;
    if (!cfg_.contains(key)) return;
    try {
      value = cfg_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw lwsat::Error("bad config value for '" + key + "': " + e.what());
    }
  }

private:
  json cfg_ = json::object();
};

std::optional<std::uint64_t> env_u64(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t pos = 0;
    std::uint64_t parsed = std::stoull(v, &pos);
    if (pos != std::string(v).size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw lwsat::Error(std::string("bad value in environment variable ") + name + ": " + v);
  }
}

/// Shared by every subcommand; seed and threads honor LWSAT_SEED and
/// LWSAT_THREADS when neither flag nor config file provide them.
struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  ConfigMerge merge;

  void add_to(CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file merged under the flags");
    seed_opt = sub->add_option("--seed", seed, "RNG seed (env LWSAT_SEED)");
    threads_opt = sub->add_option("--threads", threads, "worker threads (env LWSAT_THREADS)");
  }

  void resolve() {
    if (!config_path.empty()) merge.load(config_path);
    merge.apply(seed_opt, "seed", seed);
    if (seed_opt->count() == 0 && !merge.has("seed"))
      if (auto e = env_u64("LWSAT_SEED")) seed = *e;
    merge.apply(threads_opt, "threads", threads);
    if (threads_opt->count() == 0 && !merge.has("threads"))
      if (auto e = env_u64("LWSAT_THREADS")) threads = static_cast<unsigned>(*e);
    if (threads < 1) threads = 1;
  }
};

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw lwsat::Error("cannot write " + path.string());
  out << content;
}

void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<lwsat::CnfFormula>& dataset_split(lwsat::Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "val") return ds.val;
  if (split == "test") return ds.test;
  throw lwsat::Error("unknown split '" + split + "' (expected train, val or test)");
}

std::string witness_lines(const lwsat::Assignment& x) {
  std::ostringstream os;
  os << "v";
  int on_line = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (on_line == 20) { // keep lines short, DIMACS-solver style
      os << "\nv";
      on_line = 0;
    }
    os << " " << (x[i] ? static_cast<long>(i + 1) : -static_cast<long>(i + 1));
    ++on_line;
  }
  if (on_line == 20) os << "\nv";
  os << " 0\n";
  return os.str();
}

json comparison_to_json(const lwsat::ComparisonTable& table) {
  json rows = json::array();
  for (const lwsat::CompareRow& row : table) {
    json cells = json::array();
    for (const lwsat::CompareCell& c : row.cells)
      cells.push_back({{"solver", c.solver},
                       {"m_flips", c.m_flips},
                       {"a_flips", c.a_flips},
                       {"solved_pct", c.solved_pct}});
    rows.push_back({{"label", row.label}, {"cells", cells}});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  CommonOpts common;
  std::uint32_t k = 3, n = 0;
  std::optional<std::uint32_t> m;
  std::string label;
  std::size_t train = 0, val = 0, test = 0;
  std::string out;
  std::string filter = "auto";
  std::int64_t budget = 10'000'000;
  CLI::Option *k_opt = nullptr, *n_opt = nullptr, *m_opt = nullptr, *label_opt = nullptr,
              *train_opt = nullptr, *val_opt = nullptr, *test_opt = nullptr, *out_opt = nullptr,
              *filter_opt = nullptr, *budget_opt = nullptr;
};

void setup_gen(CLI::App* sub, GenArgs& a) {
  a.k_opt = sub->add_option("--k", a.k, "clause width");
  a.n_opt = sub->add_option("--n", a.n, "variable count");
  a.m_opt = sub->add_option("--m", a.m, "clause count (default: critical ratio * n)");
  a.label_opt = sub->add_option("--label", a.label, "distribution label");
  a.train_opt = sub->add_option("--train", a.train, "training instances");
  a.val_opt = sub->add_option("--val", a.val, "validation instances");
  a.test_opt = sub->add_option("--test", a.test, "test instances");
  a.out_opt = sub->add_option("--out", a.out, "output dataset directory");
  a.filter_opt = sub->add_option("--filter", a.filter,
                                 "satisfiability filter: auto, on or off (auto filters n <= " +
                                     std::to_string(lwsat::kFilterAutoMaxVars) + ")");
  a.budget_opt = sub->add_option("--budget", a.budget, "DPLL node budget for the filter");
  a.common.add_to(sub);
}

int cmd_gen(GenArgs& a) {
  a.common.resolve();
  const ConfigMerge& m = a.common.merge;
  m.apply(a.k_opt, "k", a.k);
  m.apply(a.n_opt, "n", a.n);
  m.apply(a.m_opt, "m", a.m);
  m.apply(a.label_opt, "label", a.label);
  m.apply(a.train_opt, "train", a.train);
  m.apply(a.val_opt, "val", a.val);
  m.apply(a.test_opt, "test", a.test);
  m.apply(a.out_opt, "out", a.out);
  m.apply(a.filter_opt, "filter", a.filter);
  m.apply(a.budget_opt, "budget", a.budget);
  if (a.out.empty()) throw lwsat::Error("gen requires --out");
  if (a.train + a.val + a.test == 0) throw lwsat::Error("gen requires a nonzero split size");

  lwsat::FilterMode mode;
  if (a.filter == "auto")
    mode = lwsat::FilterMode::automatic;
  else if (a.filter == "on")
    mode = lwsat::FilterMode::on;
  else if (a.filter == "off")
    mode = lwsat::FilterMode::off;
  else
    throw lwsat::Error("unknown --filter value '" + a.filter + "'");

  lwsat::DistributionSpec spec = lwsat::make_spec(a.k, a.n, a.m, a.label);
  lwsat::SplitSizes sizes{a.train, a.val, a.test};
  lwsat::BuildStats stats;
  lwsat::Dataset ds = lwsat::build_dataset(spec, sizes, a.common.seed, mode, a.budget, &stats);
  lwsat::save_dataset(ds, a.out);

  json config{{"command", "gen"},
              {"k", a.k},
              {"n", a.n},
              {"m", spec.m},
              {"label", spec.label},
              {"train", a.train},
              {"val", a.val},
              {"test", a.test},
              {"seed", a.common.seed},
              {"filter", a.filter},
              {"budget", a.budget},
              {"out", a.out}};
  write_json_file(fs::path(a.out) / "config.json",
                  json{{"config", config},
                       {"summary",
                        {{"instances", sizes.total()},
                         {"draws", stats.draws},
                         {"rejected_unsat", stats.rejected}}}});
  std::cout << "generated " << sizes.total() << " instances of " << spec.label << " into "
            << a.out << " (" << stats.draws << " draws, " << stats.rejected
            << " unsatisfiable rejected)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  CommonOpts common;
  std::string data, out, report, checkpoints;
  lwsat::TrainConfig cfg;
  std::string variant = "constant";
  bool baseline = false;
  CLI::Option *data_opt = nullptr, *out_opt = nullptr, *report_opt = nullptr,
              *checkpoints_opt = nullptr, *epochs_opt = nullptr, *warmup_opt = nullptr,
              *gamma_opt = nullptr, *batch_opt = nullptr, *maxflips_opt = nullptr,
              *lrmax_opt = nullptr, *warmuplr_opt = nullptr, *wd_opt = nullptr,
              *variant_opt = nullptr, *baseline_opt = nullptr;
};

void setup_train(CLI::App* sub, TrainArgs& a) {
  a.data_opt = sub->add_option("--data", a.data, "dataset directory");
  a.out_opt = sub->add_option("--out", a.out, "output policy file");
  a.report_opt = sub->add_option("--report", a.report, "output training report (JSON)");
  a.checkpoints_opt = sub->add_option("--checkpoints", a.checkpoints,
                                      "directory for per-epoch policy checkpoints");
  a.epochs_opt = sub->add_option("--epochs", a.cfg.epochs, "training epochs");
  a.warmup_opt = sub->add_option("--warmup-epochs", a.cfg.warmup_epochs, "imitation epochs");
  a.gamma_opt = sub->add_option("--gamma", a.cfg.gamma, "discount factor in (0,1)");
  a.batch_opt = sub->add_option("--batch-size", a.cfg.batch_size, "episodes per update");
  a.maxflips_opt =
      sub->add_option("--max-flips-train", a.cfg.max_flips_train, "episode flip cap");
  a.lrmax_opt = sub->add_option("--lr-max", a.cfg.lr_max, "one-cycle peak learning rate");
  a.warmuplr_opt = sub->add_option("--warmup-lr", a.cfg.warmup_lr, "warm-up learning rate");
  a.wd_opt = sub->add_option("--weight-decay", a.cfg.weight_decay, "decoupled weight decay");
  a.variant_opt =
      sub->add_option("--variant", a.variant, "noise model: constant or delta");
  a.baseline_opt = sub->add_flag("--baseline", a.baseline,
                                 "subtract the batch-mean reward (experimental)");
  a.common.add_to(sub);
}

int cmd_train(TrainArgs& a) {
  a.common.resolve();
  const ConfigMerge& m = a.common.merge;
  m.apply(a.data_opt, "data", a.data);
  m.apply(a.out_opt, "out", a.out);
  m.apply(a.report_opt, "report", a.report);
  m.apply(a.checkpoints_opt, "checkpoints", a.checkpoints);
  m.apply(a.epochs_opt, "epochs", a.cfg.epochs);
  m.apply(a.warmup_opt, "warmup-epochs", a.cfg.warmup_epochs);
  m.apply(a.gamma_opt, "gamma", a.cfg.gamma);
  m.apply(a.batch_opt, "batch-size", a.cfg.batch_size);
  m.apply(a.maxflips_opt, "max-flips-train", a.cfg.max_flips_train);
  m.apply(a.lrmax_opt, "lr-max", a.cfg.lr_max);
  m.apply(a.warmuplr_opt, "warmup-lr", a.cfg.warmup_lr);
  m.apply(a.wd_opt, "weight-decay", a.cfg.weight_decay);
  m.apply(a.variant_opt, "variant", a.variant);
  m.apply(a.baseline_opt, "baseline", a.baseline);
  if (a.data.empty()) throw lwsat::Error("train requires --data");
  if (a.out.empty()) throw lwsat::Error("train requires --out");

  if (a.variant == "constant")
    a.cfg.noise_variant = lwsat::NoiseVariant::constant;
  else if (a.variant == "delta")
    a.cfg.noise_variant = lwsat::NoiseVariant::delta;
  else
    throw lwsat::Error("unknown --variant value '" + a.variant + "'");
  a.cfg.seed = a.common.seed;
  a.cfg.reward_baseline = a.baseline;

  lwsat::Dataset ds = lwsat::load_dataset(a.data);
  lwsat::TrainReport rep = lwsat::train(ds, a.cfg, a.checkpoints, a.common.threads);
  lwsat::save_policy(rep.params, a.out);

  json config{{"command", "train"},     {"data", a.data},
              {"out", a.out},           {"report", a.report},
              {"checkpoints", a.checkpoints}, {"epochs", a.cfg.epochs},
              {"warmup-epochs", a.cfg.warmup_epochs}, {"gamma", a.cfg.gamma},
              {"batch-size", a.cfg.batch_size}, {"max-flips-train", a.cfg.max_flips_train},
              {"lr-max", a.cfg.lr_max}, {"warmup-lr", a.cfg.warmup_lr},
              {"weight-decay", a.cfg.weight_decay}, {"variant", a.variant},
              {"baseline", a.baseline}, {"seed", a.common.seed},
              {"threads", a.common.threads}};
  if (!a.report.empty())
    write_json_file(a.report, json{{"config", config}, {"report", train_report_to_json(rep)}});
  std::cout << "trained policy for " << ds.spec.label << ": selected epoch "
            << rep.selected_epoch << " with validation m-flips "
            << rep.best_so_far.back() << ", saved to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// solve

struct SolveArgs {
  CommonOpts common;
  std::string cnf, policy;
  bool walksat = false;
  double p = 0.5;
  lwsat::SlsConfig cfg;
  CLI::Option *policy_opt = nullptr, *walksat_opt = nullptr, *p_opt = nullptr,
              *maxflips_opt = nullptr, *maxtries_opt = nullptr;
};

void setup_solve(CLI::App* sub, SolveArgs& a) {
  sub->add_option("cnf", a.cnf, "DIMACS CNF file")->required();
  a.policy_opt = sub->add_option("--policy", a.policy, "policy file to solve with");
  a.walksat_opt = sub->add_flag("--walksat", a.walksat, "use the WalkSAT baseline");
  a.p_opt = sub->add_option("--p", a.p, "WalkSAT noise probability");
  a.maxflips_opt = sub->add_option("--max-flips", a.cfg.max_flips, "flips per try");
  a.maxtries_opt = sub->add_option("--max-tries", a.cfg.max_tries, "restart count");
  a.common.add_to(sub);
}

int cmd_solve(SolveArgs& a) {
  a.common.resolve();
  const ConfigMerge& m = a.common.merge;
  m.apply(a.policy_opt, "policy", a.policy);
  m.apply(a.walksat_opt, "walksat", a.walksat);
  m.apply(a.p_opt, "p", a.p);
  m.apply(a.maxflips_opt, "max-flips", a.cfg.max_flips);
  m.apply(a.maxtries_opt, "max-tries", a.cfg.max_tries);
  if (a.walksat && !a.policy.empty())
    throw lwsat::Error("choose either --policy or --walksat, not both");
  if (!a.walksat && a.policy.empty())
    throw lwsat::Error("solve requires --policy FILE or --walksat");

  std::ifstream in(a.cnf, std::ios::binary);
  if (!in) throw lwsat::Error("cannot read CNF file " + a.cnf);
  lwsat::CnfFormula f = lwsat::parse_dimacs(in);
  a.cfg.rng_seed = a.common.seed;

  lwsat::SlsOutcome out;
  lwsat::PolicyParams params;
  if (a.walksat) {
    out = lwsat::run_sls(f, a.cfg, lwsat::WalkSatStrategy{a.p});
  } else {
    params = lwsat::load_policy(a.policy);
    out = lwsat::run_sls(f, a.cfg, lwsat::PolicyStrategy{&params});
  }

  std::cout << "c lwsat solve " << a.cnf << "\n"
            << "c solver " << (a.walksat ? "walksat(p=" + std::to_string(a.p) + ")" : a.policy)
            << " max_flips=" << a.cfg.max_flips << " max_tries=" << a.cfg.max_tries
            << " seed=" << a.common.seed << "\n"
            << "c flips_total=" << out.flips_total << " tries_used=" << out.tries_used << "\n";
  if (out.solved) {
    std::cout << "SAT\n" << witness_lines(*out.witness);
    return 0;
  }
  std::cout << "UNKNOWN\n";
  return 10;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  CommonOpts common;
  std::string data, split = "test", policy, out;
  bool walksat = false;
  double p = 0.5;
  lwsat::EvalConfig cfg;
  std::optional<double> noise_override;
  CLI::Option *data_opt = nullptr, *split_opt = nullptr, *policy_opt = nullptr,
              *walksat_opt = nullptr, *p_opt = nullptr, *out_opt = nullptr,
              *maxtries_opt = nullptr, *maxflips_opt = nullptr, *runs_opt = nullptr,
              *noise_opt = nullptr;
};

void setup_eval_common(CLI::App* sub, EvalArgs& a) {
  a.data_opt = sub->add_option("--data", a.data, "dataset directory");
  a.split_opt = sub->add_option("--split", a.split, "split to evaluate: train, val or test");
  a.maxtries_opt = sub->add_option("--max-tries", a.cfg.max_tries, "restart count");
  a.maxflips_opt = sub->add_option("--max-flips", a.cfg.max_flips, "flips per try");
  a.runs_opt = sub->add_option("--runs", a.cfg.runs, "independent runs per instance");
  a.noise_opt =
      sub->add_option("--noise-override", a.noise_override, "fixed p for WalkSAT solvers");
  a.out_opt = sub->add_option("--out", a.out, "output base path (.json and .csv)");
  a.common.add_to(sub);
}

void resolve_eval_common(EvalArgs& a) {
  a.common.resolve();
  const ConfigMerge& m = a.common.merge;
  m.apply(a.data_opt, "data", a.data);
  m.apply(a.split_opt, "split", a.split);
  m.apply(a.maxtries_opt, "max-tries", a.cfg.max_tries);
  m.apply(a.maxflips_opt, "max-flips", a.cfg.max_flips);
  m.apply(a.runs_opt, "runs", a.cfg.runs);
  m.apply(a.noise_opt, "noise-override", a.noise_override);
  if (a.data.empty()) throw lwsat::Error("missing --data");
  a.cfg.seed = a.common.seed;
  a.cfg.noise_override = a.noise_override;
}

int cmd_eval(EvalArgs& a) {
  const ConfigMerge& m = a.common.merge;
  resolve_eval_common(a);
  m.apply(a.policy_opt, "policy", a.policy);
  m.apply(a.walksat_opt, "walksat", a.walksat);
  m.apply(a.p_opt, "p", a.p);
  if (a.walksat && !a.policy.empty())
    throw lwsat::Error("choose either --policy or --walksat, not both");
  if (!a.walksat && a.policy.empty())
    throw lwsat::Error("eval requires --policy FILE or --walksat");

  lwsat::Dataset ds = lwsat::load_dataset(a.data);
  const std::vector<lwsat::CnfFormula>& instances = dataset_split(ds, a.split);
  if (instances.empty()) throw lwsat::Error("split '" + a.split + "' is empty");

  lwsat::SolverSpec solver = a.walksat
                                 ? lwsat::walksat_solver(a.p)
                                 : lwsat::policy_solver(lwsat::load_policy(a.policy));
  lwsat::EvalReport rep = lwsat::evaluate_solver(solver, instances, a.cfg, a.common.threads);

  json config{{"command", "eval"},
              {"data", a.data},
              {"split", a.split},
              {"solver", solver.name},
              {"policy", a.policy},
              {"walksat", a.walksat},
              {"p", a.p},
              {"max-tries", a.cfg.max_tries},
              {"max-flips", a.cfg.max_flips},
              {"runs", a.cfg.runs},
              {"seed", a.cfg.seed},
              {"threads", a.common.threads},
              {"out", a.out}};
  if (a.noise_override) config["noise-override"] = *a.noise_override;
  if (!a.out.empty()) {
    write_json_file(a.out + ".json",
                    json{{"config", config}, {"report", eval_report_to_json(rep)}});
    write_text_file(a.out + ".csv", lwsat::eval_report_to_csv(rep));
  }
  std::cout << solver.name << " on " << ds.spec.label << "/" << a.split << ": m-flips "
            << rep.m_flips << ", a-flips " << rep.a_flips << ", solved " << rep.solved_pct
            << "%\n";
  return 0;
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
  EvalArgs base;
  std::vector<std::string> policies;
  std::vector<double> walksat_ps;
  std::string label;
  CLI::Option *policies_opt = nullptr, *ps_opt = nullptr, *label_opt = nullptr;
};

void setup_compare(CLI::App* sub, CompareArgs& a) {
  setup_eval_common(sub, a.base);
  a.policies_opt =
      sub->add_option("--policy", a.policies, "policy file (repeatable)")->delimiter(',');
  a.ps_opt = sub->add_option("--walksat-p", a.walksat_ps,
                             "WalkSAT baseline noise value (repeatable)")
                 ->delimiter(',');
  a.label_opt = sub->add_option("--label", a.label, "row label (default: dataset label)");
}

int cmd_compare(CompareArgs& a) {
  resolve_eval_common(a.base);
  const ConfigMerge& m = a.base.common.merge;
  m.apply(a.policies_opt, "policy", a.policies);
  m.apply(a.ps_opt, "walksat-p", a.walksat_ps);
  m.apply(a.label_opt, "label", a.label);
  if (a.policies.empty() && a.walksat_ps.empty())
    throw lwsat::Error("compare needs at least one --policy or --walksat-p");

  lwsat::Dataset ds = lwsat::load_dataset(a.base.data);
  const std::vector<lwsat::CnfFormula>& instances = dataset_split(ds, a.base.split);
  if (instances.empty()) throw lwsat::Error("split '" + a.base.split + "' is empty");
  if (a.label.empty()) a.label = ds.spec.label;

  std::vector<lwsat::SolverSpec> solvers;
  for (const std::string& path : a.policies) {
    lwsat::SolverSpec s = lwsat::policy_solver(lwsat::load_policy(path));
    s.name = "policy:" + fs::path(path).filename().string();
    solvers.push_back(std::move(s));
  }
  for (double p : a.walksat_ps) solvers.push_back(lwsat::walksat_solver(p));

  lwsat::ComparisonTable table{
      lwsat::compare_solvers(solvers, instances, a.label, a.base.cfg, a.base.common.threads)};

  json config{{"command", "compare"},
              {"data", a.base.data},
              {"split", a.base.split},
              {"policies", a.policies},
              {"walksat-p", a.walksat_ps},
              {"label", a.label},
              {"max-tries", a.base.cfg.max_tries},
              {"max-flips", a.base.cfg.max_flips},
              {"runs", a.base.cfg.runs},
              {"seed", a.base.cfg.seed},
              {"threads", a.base.common.threads},
              {"out", a.base.out}};
  if (!a.base.out.empty()) {
    write_json_file(a.base.out + ".json",
                    json{{"config", config}, {"table", comparison_to_json(table)}});
    write_text_file(a.base.out + ".csv", lwsat::comparison_to_csv(table));
  }
  std::cout << lwsat::comparison_to_csv(table);
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  CommonOpts common;
  std::string data, axis, out;
  std::vector<double> values;
  lwsat::TrainConfig train_cfg;
  lwsat::EvalConfig eval_cfg;
  std::string variant = "constant";
  CLI::Option *data_opt = nullptr, *axis_opt = nullptr, *values_opt = nullptr,
              *out_opt = nullptr, *epochs_opt = nullptr, *warmup_opt = nullptr,
              *gamma_opt = nullptr, *batch_opt = nullptr, *maxtries_opt = nullptr,
              *maxflips_opt = nullptr, *variant_opt = nullptr;
};

void setup_sweep(CLI::App* sub, SweepArgs& a) {
  a.data_opt = sub->add_option("--data", a.data, "dataset directory");
  a.axis_opt = sub->add_option("--axis", a.axis, "sweep axis: discount or train_size");
  a.values_opt = sub->add_option("--values", a.values, "axis values")->delimiter(',');
  a.out_opt = sub->add_option("--out", a.out, "output base path (.json and .csv)");
  a.epochs_opt = sub->add_option("--epochs", a.train_cfg.epochs, "training epochs per row");
  a.warmup_opt = sub->add_option("--warmup-epochs", a.train_cfg.warmup_epochs,
                                 "imitation epochs per row");
  a.gamma_opt = sub->add_option("--gamma", a.train_cfg.gamma, "base discount factor");
  a.batch_opt = sub->add_option("--batch-size", a.train_cfg.batch_size, "episodes per update");
  a.maxtries_opt = sub->add_option("--max-tries", a.eval_cfg.max_tries, "eval restart count");
  a.maxflips_opt = sub->add_option("--max-flips", a.eval_cfg.max_flips, "eval flips per try");
  a.variant_opt = sub->add_option("--variant", a.variant, "noise model: constant or delta");
  a.common.add_to(sub);
}

int cmd_sweep(SweepArgs& a) {
  a.common.resolve();
  const ConfigMerge& m = a.common.merge;
  m.apply(a.data_opt, "data", a.data);
  m.apply(a.axis_opt, "axis", a.axis);
  m.apply(a.values_opt, "values", a.values);
  m.apply(a.out_opt, "out", a.out);
  m.apply(a.epochs_opt, "epochs", a.train_cfg.epochs);
  m.apply(a.warmup_opt, "warmup-epochs", a.train_cfg.warmup_epochs);
  m.apply(a.gamma_opt, "gamma", a.train_cfg.gamma);
  m.apply(a.batch_opt, "batch-size", a.train_cfg.batch_size);
  m.apply(a.maxtries_opt, "max-tries", a.eval_cfg.max_tries);
  m.apply(a.maxflips_opt, "max-flips", a.eval_cfg.max_flips);
  m.apply(a.variant_opt, "variant", a.variant);
  if (a.data.empty()) throw lwsat::Error("sweep requires --data");
  if (a.values.empty()) throw lwsat::Error("sweep requires --values");

  lwsat::SweepAxis axis;
  if (a.axis == "discount")
    axis = lwsat::SweepAxis::discount;
  else if (a.axis == "train_size")
    axis = lwsat::SweepAxis::train_size;
  else
    throw lwsat::Error("unknown --axis value '" + a.axis + "' (discount or train_size)");
  if (a.variant == "constant")
    a.train_cfg.noise_variant = lwsat::NoiseVariant::constant;
  else if (a.variant == "delta")
    a.train_cfg.noise_variant = lwsat::NoiseVariant::delta;
  else
    throw lwsat::Error("unknown --variant value '" + a.variant + "'");

  a.train_cfg.seed = a.common.seed;
  a.eval_cfg.seed = lwsat::derive_seed(a.common.seed, 999);
  lwsat::Dataset ds = lwsat::load_dataset(a.data);
  lwsat::SweepReport rep =
      lwsat::sweep(axis, a.values, ds, a.train_cfg, a.eval_cfg, a.common.threads);

  json config{{"command", "sweep"},
              {"data", a.data},
              {"axis", a.axis},
              {"values", a.values},
              {"epochs", a.train_cfg.epochs},
              {"warmup-epochs", a.train_cfg.warmup_epochs},
              {"gamma", a.train_cfg.gamma},
              {"batch-size", a.train_cfg.batch_size},
              {"max-tries", a.eval_cfg.max_tries},
              {"max-flips", a.eval_cfg.max_flips},
              {"variant", a.variant},
              {"seed", a.common.seed},
              {"threads", a.common.threads},
              {"out", a.out}};
  json rows = json::array();
  for (const lwsat::SweepRow& r : rep.rows)
    rows.push_back({{"value", r.value},
                    {"seed", r.seed},
                    {"m_flips", r.m_flips},
                    {"ci_lo", r.ci_lo},
                    {"ci_hi", r.ci_hi},
                    {"a_flips", r.a_flips},
                    {"solved_pct", r.solved_pct}});
  if (!a.out.empty()) {
    write_json_file(a.out + ".json", json{{"config", config}, {"rows", rows}});
    write_text_file(a.out + ".csv", lwsat::sweep_to_csv(rep));
  }
  std::cout << lwsat::sweep_to_csv(rep);
  return 0;
}

// ---------------------------------------------------------------------------
// noise-trace

struct NoiseTraceArgs {
  CommonOpts common;
  std::string policy, data, split = "test", out;
  std::size_t instance = 0;
  lwsat::EvalConfig cfg;
  CLI::Option *policy_opt = nullptr, *data_opt = nullptr, *split_opt = nullptr,
              *instance_opt = nullptr, *out_opt = nullptr, *maxtries_opt = nullptr,
              *maxflips_opt = nullptr;
};

void setup_noise_trace(CLI::App* sub, NoiseTraceArgs& a) {
  a.policy_opt = sub->add_option("--policy", a.policy, "policy file");
  a.data_opt = sub->add_option("--data", a.data, "dataset directory");
  a.split_opt = sub->add_option("--split", a.split, "split holding the instance");
  a.instance_opt = sub->add_option("--instance", a.instance, "instance index in the split");
  a.maxtries_opt = sub->add_option("--max-tries", a.cfg.max_tries, "restart count");
  a.maxflips_opt = sub->add_option("--max-flips", a.cfg.max_flips, "flips per try");
  a.out_opt = sub->add_option("--out", a.out, "output base path (.json and .csv)");
  a.common.add_to(sub);
}

int cmd_noise_trace(NoiseTraceArgs& a) {
  a.common.resolve();
  const ConfigMerge& m = a.common.merge;
  m.apply(a.policy_opt, "policy", a.policy);
  m.apply(a.data_opt, "data", a.data);
  m.apply(a.split_opt, "split", a.split);
  m.apply(a.instance_opt, "instance", a.instance);
  m.apply(a.maxtries_opt, "max-tries", a.cfg.max_tries);
  m.apply(a.maxflips_opt, "max-flips", a.cfg.max_flips);
  if (a.policy.empty()) throw lwsat::Error("noise-trace requires --policy");
  if (a.data.empty()) throw lwsat::Error("noise-trace requires --data");

  lwsat::Dataset ds = lwsat::load_dataset(a.data);
  const std::vector<lwsat::CnfFormula>& instances = dataset_split(ds, a.split);
  if (a.instance >= instances.size())
    throw lwsat::Error("instance index " + std::to_string(a.instance) + " out of range");
  lwsat::PolicyParams params = lwsat::load_policy(a.policy);
  a.cfg.seed = a.common.seed;
  auto series = lwsat::noise_trace(params, instances[a.instance], a.cfg);

  std::ostringstream csv;
  csv << "t,p_noise\n";
  for (const auto& [t, p] : series) csv << t << "," << lwsat::detail::csv_double(p) << "\n";

  json config{{"command", "noise-trace"}, {"policy", a.policy},
              {"data", a.data},           {"split", a.split},
              {"instance", a.instance},   {"max-tries", a.cfg.max_tries},
              {"max-flips", a.cfg.max_flips}, {"seed", a.common.seed},
              {"out", a.out}};
  json jseries = json::array();
  for (const auto& [t, p] : series) jseries.push_back({t, p});
  if (!a.out.empty()) {
    write_json_file(a.out + ".json", json{{"config", config}, {"series", jseries}});
    write_text_file(a.out + ".csv", csv.str());
  }
  std::cout << csv.str();
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned stochastic local search for random k-SAT"};
  app.require_subcommand(1);

  GenArgs gen_args;
  TrainArgs train_args;
  SolveArgs solve_args;
  EvalArgs eval_args;
  CompareArgs compare_args;
  SweepArgs sweep_args;
  NoiseTraceArgs trace_args;

  CLI::App* gen = app.add_subcommand("gen", "generate a random k-SAT dataset");
  setup_gen(gen, gen_args);
  CLI::App* train = app.add_subcommand("train", "train a policy on a dataset");
  setup_train(train, train_args);
  CLI::App* solve = app.add_subcommand("solve", "solve one CNF instance");
  setup_solve(solve, solve_args);
  CLI::App* eval = app.add_subcommand("eval", "evaluate one solver on a dataset split");
  setup_eval_common(eval, eval_args);
  eval_args.policy_opt = eval->add_option("--policy", eval_args.policy, "policy file");
  eval_args.walksat_opt = eval->add_flag("--walksat", eval_args.walksat, "WalkSAT baseline");
  eval_args.p_opt = eval->add_option("--p", eval_args.p, "WalkSAT noise probability");
  CLI::App* compare = app.add_subcommand("compare", "compare several solvers, paired seeds");
  setup_compare(compare, compare_args);
  CLI::App* sweep = app.add_subcommand("sweep", "train/evaluate along a parameter axis");
  setup_sweep(sweep, sweep_args);
  CLI::App* trace = app.add_subcommand("noise-trace", "walk-probability series of one episode");
  setup_noise_trace(trace, trace_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (solve->parsed()) return cmd_solve(solve_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (compare->parsed()) return cmd_compare(compare_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
    if (trace->parsed()) return cmd_noise_trace(trace_args);
  } catch (const lwsat::BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const lwsat::UnsolvedWithinBudget& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 10;
  } catch (const lwsat::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
