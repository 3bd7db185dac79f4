#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lwsat/cnf.hpp"
#include "lwsat/error.hpp"
#include "lwsat/parallel.hpp"
#include "lwsat/policy.hpp"
#include "lwsat/rng.hpp"
#include "lwsat/sls.hpp"

namespace lwsat {

struct UnsolvedWithinBudget : Error {
  using Error::Error;
};

struct EvalConfig {
  std::uint32_t max_tries = 10;
  std::uint64_t max_flips = 10'000;
  std::uint32_t runs = 1; // independent runs per instance
  std::uint64_t seed = 0;
  std::optional<double> noise_override; // fixed p for WalkSAT-style solvers
};

enum class SolverKind { walksat, policy };

struct SolverSpec {
  std::string name;
  SolverKind kind = SolverKind::walksat;
  double walksat_p = 0.5;  // used when kind == walksat
  PolicyParams policy;     // used when kind == policy
};

inline SolverSpec walksat_solver(double p = 0.5, std::string name = {}) {
  SolverSpec s;
  s.kind = SolverKind::walksat;
  s.walksat_p = p;
  s.name = name.empty() ? "walksat(p=" + std::to_string(p) + ")" : std::move(name);
  return s;
}

inline SolverSpec policy_solver(PolicyParams params, std::string name = "learnwsat") {
  SolverSpec s;
  s.kind = SolverKind::policy;
  s.policy = std::move(params);
  s.name = std::move(name);
  return s;
}

/// Lower median: for even counts the smaller of the two middle elements.
template <class T>
double lower_median(std::vector<T> values) {
  if (values.empty()) throw Error("median of empty list");
  std::sort(values.begin(), values.end());
  return static_cast<double>(values[(values.size() - 1) / 2]);
}

template <class T>
double mean(const std::vector<T>& values) {
  if (values.empty()) throw Error("mean of empty list");
  double s = 0;
  for (const T& v : values) s += static_cast<double>(v);
  return s / static_cast<double>(values.size());
}

struct RunResult {
  bool solved = false;
  std::uint64_t flips = 0; // cumulative across tries; cap value when unsolved
};

struct InstanceResult {
  std::vector<RunResult> runs;
  double median_flips = 0;
  double mean_flips = 0;
  std::uint32_t solved_runs = 0;
};

struct EvalReport {
  std::string solver;
  EvalConfig config;
  std::vector<InstanceResult> instances;
  double m_flips = 0;   // median over instances of per-instance median
  double a_flips = 0;   // mean over instances of per-instance mean
  double solved_pct = 0; // share of solved (instance, run) pairs, in percent
};

/// Runs one (instance, run) cell. The seed derivation depends only on the
/// evaluation seed and the cell, never on the solver, so solvers compared
/// under the same config face identical initial assignment streams.
inline RunResult run_solver_cell(const SolverSpec& solver, const CnfFormula& f,
                                 const EvalConfig& cfg, std::size_t instance, std::uint32_t run) {
  SlsConfig scfg;
  scfg.max_flips = cfg.max_flips;
  scfg.max_tries = cfg.max_tries;
  scfg.rng_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(instance), run);
  SlsOutcome out;
  if (solver.kind == SolverKind::walksat) {
    WalkSatStrategy strat{cfg.noise_override.value_or(solver.walksat_p)};
    out = run_sls(f, scfg, strat);
  } else {
    PolicyStrategy strat{&solver.policy};
    out = run_sls(f, scfg, strat);
  }
  RunResult r;
  r.solved = out.solved;
  if (out.solved) {
    if (!evaluate(f, *out.witness)) throw Error("solver returned an invalid witness");
    r.flips = out.flips_total;
  } else {
    r.flips = cfg.max_flips * cfg.max_tries;
  }
  return r;
}

/// Instance cells are independent, so they may run on several threads; the
/// per-instance results land in index slots and every aggregate is reduced
/// in instance order, keeping the report identical for any thread count.
inline EvalReport evaluate_solver(const SolverSpec& solver,
                                  const std::vector<CnfFormula>& instances,
                                  const EvalConfig& cfg, unsigned threads = 1) {
  if (instances.empty()) throw Error("evaluate needs a nonempty instance list");
  if (cfg.runs < 1) throw Error("EvalConfig.runs must be >= 1");
  EvalReport rep;
  rep.solver = solver.name;
  rep.config = cfg;
  rep.instances.resize(instances.size());
  parallel_for(instances.size(), threads, [&](std::size_t i) {
    InstanceResult ir;
    std::vector<std::uint64_t> flips;
    for (std::uint32_t r = 0; r < cfg.runs; ++r) {
      RunResult rr = run_solver_cell(solver, instances[i], cfg, i, r);
      if (rr.solved) ++ir.solved_runs;
      flips.push_back(rr.flips);
      ir.runs.push_back(rr);
    }
    ir.median_flips = lower_median(flips);
    ir.mean_flips = mean(flips);
    rep.instances[i] = std::move(ir);
  });
  std::vector<double> medians, means;
  std::uint64_t solved_cells = 0;
  for (const InstanceResult& ir : rep.instances) {
    medians.push_back(ir.median_flips);
    means.push_back(ir.mean_flips);
    solved_cells += ir.solved_runs;
  }
  rep.m_flips = lower_median(medians);
  rep.a_flips = mean(means);
  rep.solved_pct = 100.0 * static_cast<double>(solved_cells) /
                   (static_cast<double>(instances.size()) * cfg.runs);
  return rep;
}

inline nlohmann::json eval_config_to_json(const EvalConfig& cfg) {
  nlohmann::json j{{"max_tries", cfg.max_tries},
                   {"max_flips", cfg.max_flips},
                   {"runs", cfg.runs},
                   {"seed", cfg.seed}};
  if (cfg.noise_override) j["noise_override"] = *cfg.noise_override;
  return j;
}

inline nlohmann::json eval_report_to_json(const EvalReport& rep) {
  nlohmann::json instances = nlohmann::json::array();
  for (const InstanceResult& ir : rep.instances) {
    nlohmann::json runs = nlohmann::json::array();
    for (const RunResult& rr : ir.runs)
      runs.push_back({{"solved", rr.solved}, {"flips", rr.flips}});
    instances.push_back({{"median_flips", ir.median_flips},
                         {"mean_flips", ir.mean_flips},
                         {"solved_runs", ir.solved_runs},
                         {"runs", runs}});
  }
  return nlohmann::json{{"solver", rep.solver},
                        {"config", eval_config_to_json(rep.config)},
                        {"m_flips", rep.m_flips},
                        {"a_flips", rep.a_flips},
                        {"solved_pct", rep.solved_pct},
                        {"instances", instances}};
}

namespace detail {

inline std::string csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Quotes a text field when it holds a separator, so labels like
/// "rand3(50,213)" survive the round trip.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

} // namespace detail

/// One row per instance: index, solved runs, median and mean flips.
inline std::string eval_report_to_csv(const EvalReport& rep) {
  std::ostringstream os;
  os << "instance,solved_runs,runs,median_flips,mean_flips\n";
  for (std::size_t i = 0; i < rep.instances.size(); ++i) {
    const InstanceResult& ir = rep.instances[i];
    os << i << "," << ir.solved_runs << "," << ir.runs.size() << ","
       << detail::csv_double(ir.median_flips) << "," << detail::csv_double(ir.mean_flips)
       << "\n";
  }
  return os.str();
}

struct CompareCell {
  std::string solver;
  double m_flips = 0;
  double a_flips = 0;
  double solved_pct = 0;

  friend bool operator==(const CompareCell&, const CompareCell&) = default;
};

struct CompareRow {
  std::string label; // distribution / instance-set label
  std::vector<CompareCell> cells;

  friend bool operator==(const CompareRow&, const CompareRow&) = default;
};

using ComparisonTable = std::vector<CompareRow>;

/// Paired comparison: every solver sees the same per-(instance, run) seeds.
inline CompareRow compare_solvers(const std::vector<SolverSpec>& solvers,
                                  const std::vector<CnfFormula>& instances,
                                  const std::string& label, const EvalConfig& cfg,
                                  unsigned threads = 1) {
  if (solvers.empty()) throw Error("compare needs at least one solver");
  CompareRow row;
  row.label = label;
  for (const SolverSpec& s : solvers) {
    EvalReport rep = evaluate_solver(s, instances, cfg, threads);
    row.cells.push_back({s.name, rep.m_flips, rep.a_flips, rep.solved_pct});
  }
  return row;
}

/// Long-form CSV, one line per (label, solver) cell.
inline std::string comparison_to_csv(const ComparisonTable& table) {
  std::ostringstream os;
  os << "label,solver,m_flips,a_flips,solved_pct\n";
  for (const CompareRow& row : table)
    for (const CompareCell& c : row.cells)
      os << detail::csv_field(row.label) << "," << detail::csv_field(c.solver) << ","
         << detail::csv_double(c.m_flips) << "," << detail::csv_double(c.a_flips) << ","
         << detail::csv_double(c.solved_pct) << "\n";
  return os.str();
}

inline ComparisonTable comparison_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "label,solver,m_flips,a_flips,solved_pct")
    throw ParseError("bad comparison CSV header");
  ComparisonTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != 5) throw ParseError("bad comparison CSV row: " + line);
    CompareCell cell;
    cell.solver = fields[1];
    try {
      cell.m_flips = std::stod(fields[2]);
      cell.a_flips = std::stod(fields[3]);
      cell.solved_pct = std::stod(fields[4]);
    } catch (const std::logic_error&) {
      throw ParseError("bad numeric field in comparison CSV row: " + line);
    }
    if (table.empty() || table.back().label != fields[0])
      table.push_back(CompareRow{fields[0], {}});
    table.back().cells.push_back(std::move(cell));
  }
  return table;
}

/// Walk-probability series of one solved episode: (t, p_noise) per step of
/// the successful try. Throws UnsolvedWithinBudget when the budget runs out.
inline std::vector<std::pair<std::uint64_t, double>> noise_trace(const PolicyParams& policy,
                                                                 const CnfFormula& f,
                                                                 const EvalConfig& cfg) {
  SlsConfig scfg;
  scfg.max_flips = cfg.max_flips;
  scfg.max_tries = cfg.max_tries;
  scfg.rng_seed = cfg.seed;
  Trace trace;
  PolicyStrategy strat{&policy};
  SlsOutcome out = run_sls(f, scfg, strat, &trace);
  if (!out.solved) throw UnsolvedWithinBudget("instance not solved within the flip budget");
  std::vector<std::pair<std::uint64_t, double>> series;
  series.reserve(out.flips_last_try);
  // the successful try's records are the trace suffix
  const std::size_t begin = trace.size() - out.flips_last_try;
  for (std::size_t i = begin; i < trace.size(); ++i)
    series.emplace_back(trace[i].t, trace[i].p_noise);
  return series;
}

/// Percentile-bootstrap confidence interval for the lower-median statistic.
struct BootstrapCi {
  double lo = 0, hi = 0;
};

inline BootstrapCi bootstrap_median_ci(const std::vector<double>& values, std::uint64_t seed,
                                       std::size_t resamples = 1000, double confidence = 0.95) {
  if (values.empty()) throw Error("bootstrap over empty sample");
  Rng rng(seed);
  std::vector<double> stats;
  stats.reserve(resamples);
  std::vector<double> sample(values.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    for (double& v : sample)
      v = values[rng.next_below(static_cast<std::uint32_t>(values.size()))];
    stats.push_back(lower_median(sample));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - confidence) / 2.0;
  auto pick = [&](double q) {
    double idx = q * static_cast<double>(stats.size() - 1);
    return stats[static_cast<std::size_t>(idx + 0.5)];
  };
  return {pick(alpha), pick(1.0 - alpha)};
}

} // namespace lwsat
