#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lwsat/cnf.hpp"
#include "lwsat/dpll.hpp"
#include "lwsat/error.hpp"
#include "lwsat/rng.hpp"

namespace lwsat {

struct InvalidSpec : Error {
  using Error::Error;
};
struct UnsupportedWidth : Error {
  using Error::Error;
};
struct BudgetExceeded : Error {
  using Error::Error;
};
struct ManifestMismatch : Error {
  using Error::Error;
};
struct MissingFile : Error {
  using Error::Error;
};

/// A random k-SAT distribution: m clauses of width k over n variables.
struct DistributionSpec {
  std::uint32_t k = 3;
  std::uint32_t n = 0;
  std::uint32_t m = 0;
  std::string label;

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

/// Critical clause/variable ratio for the supported widths.
inline double default_ratio(std::uint32_t k) {
  if (k == 3) return 4.26;
  if (k == 4) return 9.75;
  throw UnsupportedWidth("no default clause ratio for k=" + std::to_string(k) +
                         "; pass m explicitly");
}

/// Builds a spec, defaulting m to round(ratio(k)*n) and the label to
/// "randK(n,m)" when not supplied.
inline DistributionSpec make_spec(std::uint32_t k, std::uint32_t n,
                                  std::optional<std::uint32_t> m = std::nullopt,
                                  std::string label = {}) {
  DistributionSpec s;
  s.k = k;
  s.n = n;
  s.m = m ? *m : static_cast<std::uint32_t>(std::llround(default_ratio(k) * n));
  if (label.empty()) {
    std::ostringstream os;
    os << "rand" << k << "(" << n << "," << s.m << ")";
    s.label = os.str();
  } else {
    s.label = std::move(label);
  }
  return s;
}

inline void validate_spec(const DistributionSpec& spec) {
  if (spec.k < 2 || spec.k > spec.n || spec.m < 1)
    throw InvalidSpec("need 2 <= k <= n and m >= 1, got k=" + std::to_string(spec.k) +
                      " n=" + std::to_string(spec.n) + " m=" + std::to_string(spec.m));
}

/// Draws one random formula: per clause, k distinct variables uniformly
/// without replacement (rejection sampling) with independent fair signs.
/// Duplicate clauses across the formula are allowed.
inline CnfFormula gen_random_ksat(const DistributionSpec& spec, Rng& rng) {
  validate_spec(spec);
  CnfFormula f;
  f.num_vars = spec.n;
  f.clauses.reserve(spec.m);
  std::vector<std::uint8_t> used(spec.n, 0);
  for (std::uint32_t c = 0; c < spec.m; ++c) {
    Clause cl;
    cl.reserve(spec.k);
    for (std::uint32_t j = 0; j < spec.k; ++j) {
      std::uint32_t v;
      do {
        v = rng.next_below(spec.n);
      } while (used[v]);
      used[v] = 1;
      cl.push_back(Literal::make(v, rng.next_bool()));
    }
    for (Literal l : cl) used[l.var()] = 0;
    f.clauses.push_back(std::move(cl));
  }
  return f;
}

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + val + test; }
};

struct Dataset {
  DistributionSpec spec;
  std::vector<CnfFormula> train, val, test;
  std::uint64_t seed = 0;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class FilterMode {
  automatic, // filter iff n <= 150 (DPLL stays cheap there)
  on,
  off,
};

constexpr std::uint32_t kFilterAutoMaxVars = 150;

inline bool filter_enabled(FilterMode mode, std::uint32_t n) {
  switch (mode) {
    case FilterMode::on: return true;
    case FilterMode::off: return false;
    default: return n <= kFilterAutoMaxVars;
  }
}

struct BuildStats {
  std::uint64_t draws = 0;    // candidate formulas drawn
  std::uint64_t rejected = 0; // discarded as unsatisfiable by the filter
};

/// Draws instances until the splits are full, filling train, then val, then
/// test. Draw i uses its own stream Rng(seed ^ i), so the mapping from draw
/// index to candidate formula is fixed and rejected draws do not perturb
/// later ones. With filtering on, unsatisfiable draws are discarded and a
/// DPLL budget blowup is an error naming the offending draw.
inline Dataset build_dataset(const DistributionSpec& spec, SplitSizes sizes, std::uint64_t seed,
                             FilterMode filter = FilterMode::automatic,
                             std::int64_t node_budget = 10'000'000,
                             BuildStats* stats = nullptr) {
  validate_spec(spec);
  const bool do_filter = filter_enabled(filter, spec.n);
  Dataset ds;
  ds.spec = spec;
  ds.seed = seed;
  BuildStats local;
  auto next_instance = [&]() -> CnfFormula {
    for (;;) {
      Rng rng(seed ^ local.draws);
      ++local.draws;
      CnfFormula f = gen_random_ksat(spec, rng);
      if (!do_filter) return f;
      DpllResult r = dpll_sat(f, node_budget);
      if (r.status == DpllStatus::sat) return f;
      if (r.status == DpllStatus::budget_exceeded)
        throw BudgetExceeded("satisfiability filter exceeded " + std::to_string(node_budget) +
                             " nodes on draw " + std::to_string(local.draws - 1));
      ++local.rejected;
    }
  };
  ds.train.reserve(sizes.train);
  ds.val.reserve(sizes.val);
  ds.test.reserve(sizes.test);
  for (std::size_t i = 0; i < sizes.train; ++i) ds.train.push_back(next_instance());
  for (std::size_t i = 0; i < sizes.val; ++i) ds.val.push_back(next_instance());
  for (std::size_t i = 0; i < sizes.test; ++i) ds.test.push_back(next_instance());
  if (stats != nullptr) *stats = local;
  return ds;
}

constexpr int kDatasetFormatVersion = 1;

inline nlohmann::json spec_to_json(const DistributionSpec& s) {
  return nlohmann::json{{"k", s.k}, {"n", s.n}, {"m", s.m}, {"label", s.label}};
}

inline DistributionSpec spec_from_json(const nlohmann::json& j) {
  DistributionSpec s;
  s.k = j.at("k").get<std::uint32_t>();
  s.n = j.at("n").get<std::uint32_t>();
  s.m = j.at("m").get<std::uint32_t>();
  s.label = j.at("label").get<std::string>();
  return s;
}

namespace detail {

inline std::string instance_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu.cnf", index);
  return buf;
}

} // namespace detail

/// Writes `manifest.json` plus one DIMACS file per instance, numbered across
/// the splits in train, val, test order.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json splits;
  std::size_t index = 0;
  auto dump_split = [&](const char* name, const std::vector<CnfFormula>& formulas) {
    std::vector<std::string> files;
    files.reserve(formulas.size());
    for (const CnfFormula& f : formulas) {
      std::string fname = detail::instance_filename(index++);
      std::ofstream out(dir / fname, std::ios::binary);
      if (!out) throw Error("cannot write " + (dir / fname).string());
      out << write_dimacs(f);
      files.push_back(std::move(fname));
    }
    splits[name] = files;
  };
  dump_split("train", ds.train);
  dump_split("val", ds.val);
  dump_split("test", ds.test);
  nlohmann::json manifest{
      {"version", kDatasetFormatVersion},
      {"spec", spec_to_json(ds.spec)},
      {"seed", ds.seed},
      {"splits", splits},
  };
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw MissingFile("no manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ManifestMismatch("unreadable manifest in " + dir.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    if (manifest.at("version").get<int>() != kDatasetFormatVersion)
      throw ManifestMismatch("unsupported dataset version in " + dir.string());
    ds.spec = spec_from_json(manifest.at("spec"));
    ds.seed = manifest.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ManifestMismatch("bad manifest in " + dir.string() + ": " + e.what());
  }
  auto load_split = [&](const char* name, std::vector<CnfFormula>& out_list) {
    const nlohmann::json* files;
    try {
      files = &manifest.at("splits").at(name);
    } catch (const nlohmann::json::exception& e) {
      throw ManifestMismatch("bad splits in " + dir.string() + ": " + e.what());
    }
    for (const auto& fname : *files) {
      std::filesystem::path p = dir / fname.get<std::string>();
      std::ifstream fin(p, std::ios::binary);
      if (!fin) throw MissingFile("missing instance file " + p.string());
      CnfFormula f = parse_dimacs(fin);
      if (f.num_vars != ds.spec.n || f.num_clauses() != ds.spec.m)
        throw ManifestMismatch("instance " + p.string() + " does not match spec " +
                               ds.spec.label);
      out_list.push_back(std::move(f));
    }
  };
  load_split("train", ds.train);
  load_split("val", ds.val);
  load_split("test", ds.test);
  return ds;
}

} // namespace lwsat
