#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lwsat/cnf.hpp"
#include "lwsat/error.hpp"
#include "lwsat/rng.hpp"

namespace lwsat {

struct NoUnsatClause : Error {
  using Error::Error;
};

/// Number of per-candidate features a scoring strategy reports in a trace.
inline constexpr std::size_t kNumFeatures = 5;

/// One SLS step for trace export. The engine fills t/clause/var/greedy;
/// scoring strategies additionally fill candidates/features/probs/p_noise
/// (plain WalkSAT leaves those empty).
struct StepRecord {
  std::uint64_t t = 0;
  std::uint32_t clause = 0;
  std::uint32_t var = 0;
  bool greedy = false;
  double p_noise = 0.0;
  std::vector<std::uint32_t> candidates;
  std::vector<std::array<double, kNumFeatures>> features;
  std::vector<double> probs;
};

using Trace = std::vector<StepRecord>;

/// Incremental solver state. true_count, the unsat set and the ages are
/// maintained by flip() in O(occurrences of the flipped variable); the
/// unsat set is an array plus position map for O(1) pick/insert/remove.
struct SolverState {
  const CnfFormula* formula = nullptr;
  Assignment assignment;
  std::vector<std::uint32_t> true_count;
  std::vector<std::uint32_t> unsat;     // clause indices with true_count = 0
  std::vector<std::uint32_t> unsat_pos; // clause -> index in unsat, or npos
  std::vector<std::vector<std::uint32_t>> occ_pos, occ_neg;
  std::uint64_t t = 0;
  std::vector<std::uint64_t> age1; // last flip for any cause, 0 = never
  std::vector<std::uint64_t> age2; // last flip chosen by the scoring function
  std::int64_t best_sat = 0;
  std::uint64_t stagnation_counter = 0;
  std::uint64_t work = 0; // clause visits performed by flip(), for cost tests

  static constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();

  std::int64_t num_satisfied() const {
    return static_cast<std::int64_t>(true_count.size()) -
           static_cast<std::int64_t>(unsat.size());
  }
  bool all_satisfied() const { return unsat.empty(); }
};

namespace detail {

inline void unsat_insert(SolverState& s, std::uint32_t c) {
  s.unsat_pos[c] = static_cast<std::uint32_t>(s.unsat.size());
  s.unsat.push_back(c);
}

inline void unsat_remove(SolverState& s, std::uint32_t c) {
  std::uint32_t idx = s.unsat_pos[c];
  std::uint32_t last = s.unsat.back();
  s.unsat[idx] = last;
  s.unsat_pos[last] = idx;
  s.unsat.pop_back();
  s.unsat_pos[c] = SolverState::npos;
}

} // namespace detail

/// Fresh state over a uniform random assignment; ages and t zeroed, counters
/// consistent with the assignment.
inline SolverState init_state(const CnfFormula& f, Rng& rng) {
  SolverState s;
  s.formula = &f;
  s.assignment = random_assignment(f.num_vars, rng);
  const std::size_t m = f.clauses.size();
  s.true_count.assign(m, 0);
  s.unsat_pos.assign(m, SolverState::npos);
  s.occ_pos.assign(f.num_vars, {});
  s.occ_neg.assign(f.num_vars, {});
  for (std::size_t c = 0; c < m; ++c) {
    for (Literal l : f.clauses[c]) {
      (l.negated() ? s.occ_neg : s.occ_pos)[l.var()].push_back(static_cast<std::uint32_t>(c));
      if (satisfies(s.assignment, l)) ++s.true_count[c];
    }
    if (s.true_count[c] == 0) detail::unsat_insert(s, static_cast<std::uint32_t>(c));
  }
  s.age1.assign(f.num_vars, 0);
  s.age2.assign(f.num_vars, 0);
  s.best_sat = s.num_satisfied();
  return s;
}

/// Number of clauses that would become unsatisfied by flipping x: clauses
/// where x's currently-true literal is the sole satisfier.
inline std::uint32_t break_value(const SolverState& s, std::uint32_t x) {
  const auto& losing = s.assignment[x] ? s.occ_pos[x] : s.occ_neg[x];
  std::uint32_t b = 0;
  for (std::uint32_t c : losing)
    if (s.true_count[c] == 1) ++b;
  return b;
}

/// Toggles x and updates counters over x's occurrence lists only. by_policy
/// marks flips chosen by a scoring function (they alone advance age2).
inline void flip(SolverState& s, std::uint32_t x, bool by_policy) {
  const bool newv = !s.assignment[x];
  const auto& gaining = newv ? s.occ_pos[x] : s.occ_neg[x];
  const auto& losing = newv ? s.occ_neg[x] : s.occ_pos[x];
  for (std::uint32_t c : gaining) {
    ++s.work;
    if (s.true_count[c]++ == 0) detail::unsat_remove(s, c);
  }
  for (std::uint32_t c : losing) {
    ++s.work;
    if (--s.true_count[c] == 0) detail::unsat_insert(s, c);
  }
  s.assignment[x] = newv ? 1 : 0;
  ++s.t;
  s.age1[x] = s.t;
  if (by_policy) s.age2[x] = s.t;
  const std::int64_t sat = s.num_satisfied();
  if (sat > s.best_sat) {
    s.best_sat = sat;
    s.stagnation_counter = 0;
  } else {
    ++s.stagnation_counter;
  }
}

/// Uniform draw from the unsat set.
inline std::uint32_t pick_unsat_clause(const SolverState& s, Rng& rng) {
  if (s.unsat.empty()) throw NoUnsatClause("no unsatisfied clause to pick from");
  return s.unsat[rng.next_below(static_cast<std::uint32_t>(s.unsat.size()))];
}

/// A strategy's choice: the variable to flip and whether the greedy
/// (scoring) branch made it, as opposed to the noise branch.
struct Pick {
  std::uint32_t var = 0;
  bool greedy = false;
};

/// WalkSAT/SKC selection on clause c: with probability p a uniform variable
/// of c, otherwise uniform among the variables of minimum break value.
inline Pick walksat_pickvar(const SolverState& s, std::uint32_t c, double p, Rng& rng) {
  const Clause& cl = s.formula->clauses[c];
  if (rng.next_double() < p) {
    std::uint32_t j = rng.next_below(static_cast<std::uint32_t>(cl.size()));
    return {cl[j].var(), false};
  }
  std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t count = 0;
  std::uint32_t chosen = 0;
  for (Literal l : cl) {
    std::uint32_t b = break_value(s, l.var());
    if (b < best) {
      best = b;
      count = 1;
      chosen = l.var();
    } else if (b == best) {
      // reservoir draw keeps the argmin choice uniform in one pass
      ++count;
      if (rng.next_below(count) == 0) chosen = l.var();
    }
  }
  return {chosen, true};
}

struct SlsConfig {
  std::uint64_t max_flips = 10'000;
  std::uint32_t max_tries = 10;
  std::uint64_t rng_seed = 0;
};

struct SlsOutcome {
  bool solved = false;
  std::optional<Assignment> witness;
  std::uint64_t flips_total = 0;
  std::uint64_t flips_last_try = 0;
  std::uint32_t tries_used = 0;
};

/// Generic SLS loop: per try a fresh random assignment, then up to max_flips
/// picks. Satisfaction is checked before every pick and again when the flip
/// budget runs out, so a last-flip solution still counts. The strategy is
/// called as pickvar(state, clause, rng, step) with step non-null only when
/// tracing; it must return a Pick for the given unsatisfied clause.
template <class Strategy>
SlsOutcome run_sls(const CnfFormula& f, const SlsConfig& cfg, Strategy&& pickvar,
                   Trace* trace = nullptr) {
  if (cfg.max_flips < 1 || cfg.max_tries < 1)
    throw Error("SlsConfig requires max_flips >= 1 and max_tries >= 1");
  SlsOutcome out;
  Rng rng(cfg.rng_seed);
  for (std::uint32_t try_i = 0; try_i < cfg.max_tries; ++try_i) {
    SolverState s = init_state(f, rng);
    std::uint64_t flips = 0;
    bool solved = s.all_satisfied();
    while (!solved && flips < cfg.max_flips) {
      std::uint32_t c = pick_unsat_clause(s, rng);
      StepRecord rec;
      StepRecord* recp = trace ? &rec : nullptr;
      Pick pick = pickvar(s, c, rng, recp);
      flip(s, pick.var, pick.greedy);
      ++flips;
      if (trace) {
        rec.t = s.t;
        rec.clause = c;
        rec.var = pick.var;
        rec.greedy = pick.greedy;
        trace->push_back(std::move(rec));
      }
      solved = s.all_satisfied();
    }
    out.flips_total += flips;
    out.flips_last_try = flips;
    if (solved) {
      out.solved = true;
      out.witness = s.assignment;
      out.tries_used = try_i + 1;
      return out;
    }
  }
  out.tries_used = cfg.max_tries;
  return out;
}

/// The classic baseline as a strategy for run_sls.
struct WalkSatStrategy {
  double p = 0.5;

  Pick operator()(const SolverState& s, std::uint32_t c, Rng& rng, StepRecord*) const {
    return walksat_pickvar(s, c, p, rng);
  }
};

} // namespace lwsat
