#pragma once

#include <cstdint>
#include <vector>

#include "lwsat/cnf.hpp"

namespace lwsat {

enum class DpllStatus { sat, unsat, budget_exceeded };

struct DpllResult {
  DpllStatus status = DpllStatus::budget_exceeded;
  Assignment witness; // filled iff status == sat
  std::int64_t nodes = 0;
};

namespace detail {

/// Counter-based complete DPLL. Keeps per-clause satisfied/unassigned literal
/// counts, propagates units to fixpoint at every node, and branches on the
/// unassigned variable with the most occurrences in still-unsatisfied clauses
/// (trying its more frequent polarity first). Small and deterministic; meant
/// for filtering generated instances, not for competition benchmarks.
class DpllSolver {
public:
  DpllSolver(const CnfFormula& f, std::int64_t budget) : f_(f), budget_(budget) {
    const std::size_t m = f.clauses.size();
    value_.assign(f.num_vars, -1);
    sat_cnt_.assign(m, 0);
    free_cnt_.assign(m, 0);
    occ_.assign(2 * static_cast<std::size_t>(f.num_vars), {});
    for (std::size_t c = 0; c < m; ++c) {
      free_cnt_[c] = static_cast<std::int32_t>(f.clauses[c].size());
      for (Literal l : f.clauses[c]) occ_[l.code].push_back(static_cast<std::uint32_t>(c));
    }
  }

  DpllResult run() {
    DpllResult res;
    bool sat = search();
    res.nodes = nodes_;
    if (limit_hit_) {
      res.status = DpllStatus::budget_exceeded;
      return res;
    }
    if (!sat) {
      res.status = DpllStatus::unsat;
      return res;
    }
    res.status = DpllStatus::sat;
    res.witness.assign(f_.num_vars, 0);
    for (std::uint32_t v = 0; v < f_.num_vars; ++v)
      res.witness[v] = value_[v] == 1 ? 1 : 0; // unassigned vars are free, pick false
    return res;
  }

private:
  void assign(std::uint32_t var, bool v) {
    value_[var] = v ? 1 : 0;
    trail_.push_back(var);
    const std::uint32_t made_true = Literal::make(var, !v).code;
    const std::uint32_t made_false = Literal::make(var, v).code;
    for (std::uint32_t c : occ_[made_true]) {
      --free_cnt_[c];
      if (sat_cnt_[c]++ == 0) ++num_sat_;
    }
    for (std::uint32_t c : occ_[made_false]) --free_cnt_[c];
  }

  void undo_to(std::size_t mark) {
    while (trail_.size() > mark) {
      std::uint32_t var = trail_.back();
      trail_.pop_back();
      bool v = value_[var] == 1;
      const std::uint32_t made_true = Literal::make(var, !v).code;
      const std::uint32_t made_false = Literal::make(var, v).code;
      for (std::uint32_t c : occ_[made_true]) {
        ++free_cnt_[c];
        if (--sat_cnt_[c] == 0) --num_sat_;
      }
      for (std::uint32_t c : occ_[made_false]) ++free_cnt_[c];
      value_[var] = -1;
    }
  }

  /// Assigns all pending units. Returns false on conflict.
  bool propagate() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t c = 0; c < f_.clauses.size(); ++c) {
        if (sat_cnt_[c] > 0) continue;
        if (free_cnt_[c] == 0) return false;
        if (free_cnt_[c] == 1) {
          for (Literal l : f_.clauses[c]) {
            if (value_[l.var()] == -1) {
              assign(l.var(), !l.negated());
              break;
            }
          }
          changed = true;
        }
      }
    }
    return true;
  }

  bool search() {
    if (++nodes_ > budget_) {
      limit_hit_ = true;
      return false;
    }
    std::size_t mark = trail_.size();
    if (!propagate()) {
      undo_to(mark);
      return false;
    }
    if (num_sat_ == static_cast<std::int64_t>(f_.clauses.size())) return true;

    // Most-occurrences branching over unsatisfied clauses.
    std::vector<std::int32_t> pos(f_.num_vars, 0), neg(f_.num_vars, 0);
    for (std::size_t c = 0; c < f_.clauses.size(); ++c) {
      if (sat_cnt_[c] > 0) continue;
      for (Literal l : f_.clauses[c]) {
        if (value_[l.var()] != -1) continue;
        (l.negated() ? neg : pos)[l.var()]++;
      }
    }
    std::uint32_t best_var = 0;
    std::int32_t best_score = -1;
    for (std::uint32_t v = 0; v < f_.num_vars; ++v) {
      std::int32_t s = pos[v] + neg[v];
      if (s > best_score) {
        best_score = s;
        best_var = v;
      }
    }
    bool first = pos[best_var] >= neg[best_var];
    for (int attempt = 0; attempt < 2; ++attempt) {
      assign(best_var, attempt == 0 ? first : !first);
      if (search()) return true;
      undo_to(mark);
      if (limit_hit_) return false;
    }
    return false;
  }

  const CnfFormula& f_;
  std::int64_t budget_;
  std::int64_t nodes_ = 0;
  std::int64_t num_sat_ = 0;
  bool limit_hit_ = false;
  std::vector<std::int8_t> value_;
  std::vector<std::int32_t> sat_cnt_, free_cnt_;
  std::vector<std::vector<std::uint32_t>> occ_;
  std::vector<std::uint32_t> trail_;
};

} // namespace detail

/// Complete satisfiability check with unit propagation and most-occurrences
/// branching. budget_exceeded means the search tree outgrew node_budget and
/// the caller must regenerate or filter the instance elsewhere; sat and unsat
/// are definitive (the witness satisfies the formula, unsat is exhaustive).
inline DpllResult dpll_sat(const CnfFormula& f, std::int64_t node_budget = 10'000'000) {
  detail::DpllSolver solver(f, node_budget);
  return solver.run();
}

} // namespace lwsat
