#pragma once

#include <compare>
#include <cstdint>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lwsat/error.hpp"
#include "lwsat/rng.hpp"

namespace lwsat {

struct MalformedHeader : Error {
  using Error::Error;
};
struct VariableOutOfRange : Error {
  using Error::Error;
};
struct ClauseCountMismatch : Error {
  using Error::Error;
};
struct TautologicalClause : Error {
  using Error::Error;
};
struct EmptyClause : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};

/// A literal packed as 2*var + sign. Variables are 0-based internally;
/// the DIMACS 1-based convention exists only at the parse/write boundary.
struct Literal {
  std::uint32_t code = 0;

  static constexpr Literal make(std::uint32_t var, bool negated) {
    return Literal{(var << 1) | static_cast<std::uint32_t>(negated)};
  }
  constexpr std::uint32_t var() const { return code >> 1; }
  constexpr bool negated() const { return (code & 1) != 0; }
  constexpr int to_dimacs() const {
    int v = static_cast<int>(var()) + 1;
    return negated() ? -v : v;
  }
  friend constexpr auto operator<=>(const Literal&, const Literal&) = default;
};

using Clause = std::vector<Literal>;

/// Immutable problem instance: a conjunction of clauses over num_vars
/// Boolean variables. Clauses are normalized (no duplicate vars, no
/// tautologies, non-empty) by every construction path in this library.
struct CnfFormula {
  std::uint32_t num_vars = 0;
  std::vector<Clause> clauses;

  std::size_t num_clauses() const { return clauses.size(); }
  friend bool operator==(const CnfFormula&, const CnfFormula&) = default;
};

/// values[i] is the truth value of variable i.
using Assignment = std::vector<std::uint8_t>;

inline bool satisfies(const Assignment& x, Literal l) {
  return (x[l.var()] != 0) != l.negated();
}

/// Drops duplicate literals (keeping first occurrence); rejects empty and
/// tautological clauses. Duplicate clauses between each other are allowed.
inline Clause normalize_clause(Clause lits) {
  if (lits.empty()) throw EmptyClause("empty clause");
  Clause out;
  out.reserve(lits.size());
  for (Literal l : lits) {
    bool dup = false;
    for (Literal o : out) {
      if (o.var() == l.var()) {
        if (o.negated() != l.negated())
          throw TautologicalClause("clause contains a variable and its negation");
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(l);
  }
  return out;
}

/// Strict DIMACS CNF reader. Comment lines are skipped (collected into
/// *comments when given); the clause count must match the header exactly.
inline CnfFormula parse_dimacs(std::istream& in, std::vector<std::string>* comments = nullptr) {
  CnfFormula f;
  std::string line;
  bool have_header = false;
  long long nvars = 0;
  long long nclauses = 0;
  Clause current;

  while (std::getline(in, line)) {
    std::size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == 'c') {
      if (comments) comments->push_back(line.substr(pos));
      continue;
    }
    if (line[pos] == 'p') {
      if (have_header) throw MalformedHeader("duplicate 'p cnf' header");
      std::istringstream ss(line.substr(pos));
      std::string p, fmt, rest;
      if (!(ss >> p >> fmt >> nvars >> nclauses) || p != "p" || fmt != "cnf" || nvars < 0 ||
          nclauses < 1 || (ss >> rest))
        throw MalformedHeader("expected 'p cnf <vars> <clauses>', got: " + line);
      f.num_vars = static_cast<std::uint32_t>(nvars);
      have_header = true;
      continue;
    }
    if (!have_header) throw MalformedHeader("clause data before 'p cnf' header");
    std::istringstream ss(line);
    long long lit;
    while (ss >> lit) {
      if (lit == 0) {
        f.clauses.push_back(normalize_clause(std::move(current)));
        current.clear();
        if (static_cast<long long>(f.clauses.size()) > nclauses)
          throw ClauseCountMismatch("more clauses than declared in header");
      } else {
        long long v = lit < 0 ? -lit : lit;
        if (v > nvars) throw VariableOutOfRange("literal " + std::to_string(lit) +
                                                " out of range for " + std::to_string(nvars) +
                                                " variables");
        current.push_back(Literal::make(static_cast<std::uint32_t>(v - 1), lit < 0));
      }
    }
    if (!ss.eof()) throw Error("non-integer token in clause data: " + line);
  }
  if (!have_header) throw MalformedHeader("missing 'p cnf' header");
  if (!current.empty()) throw ClauseCountMismatch("unterminated clause at end of input");
  if (static_cast<long long>(f.clauses.size()) != nclauses)
    throw ClauseCountMismatch("header declares " + std::to_string(nclauses) + " clauses, found " +
                              std::to_string(f.clauses.size()));
  return f;
}

inline CnfFormula parse_dimacs(std::string_view text, std::vector<std::string>* comments = nullptr) {
  std::istringstream in{std::string(text)};
  return parse_dimacs(in, comments);
}

/// One header line, one clause per line. parse_dimacs(write_dimacs(f)) == f.
inline std::string write_dimacs(const CnfFormula& f) {
  std::string out = "p cnf " + std::to_string(f.num_vars) + " " + std::to_string(f.clauses.size()) +
                    "\n";
  for (const Clause& c : f.clauses) {
    for (Literal l : c) {
      out += std::to_string(l.to_dimacs());
      out += ' ';
    }
    out += "0\n";
  }
  return out;
}

inline void check_assignment_length(const CnfFormula& f, const Assignment& x) {
  if (x.size() != f.num_vars)
    throw LengthMismatch("assignment has " + std::to_string(x.size()) + " values, formula has " +
                         std::to_string(f.num_vars) + " variables");
}

inline std::int64_t count_satisfied(const CnfFormula& f, const Assignment& x) {
  check_assignment_length(f, x);
  std::int64_t n = 0;
  for (const Clause& c : f.clauses) {
    for (Literal l : c) {
      if (satisfies(x, l)) {
        ++n;
        break;
      }
    }
  }
  return n;
}

inline bool evaluate(const CnfFormula& f, const Assignment& x) {
  check_assignment_length(f, x);
  for (const Clause& c : f.clauses) {
    bool sat = false;
    for (Literal l : c) {
      if (satisfies(x, l)) {
        sat = true;
        break;
      }
    }
    if (!sat) return false;
  }
  return true;
}

inline Assignment random_assignment(std::uint32_t num_vars, Rng& rng) {
  Assignment x(num_vars);
  for (std::uint32_t i = 0; i < num_vars; ++i) x[i] = rng.next_bool() ? 1 : 0;
  return x;
}

} // namespace lwsat
