//===-- Solver.h — satisfiability interface over 1-bit constraints --------===//
#pragma once

#include "specsym/Expr.h"

#include <functional>
#include <string>
#include <vector>

namespace specsym {

/// Conjunction of 1-bit terms. Adding `true` is a no-op; semantics are
/// order-insensitive (terms are kept deduplicated by node identity).
class Constraint {
public:
  void add(const ExprRef& term);
  const std::vector<ExprRef>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  size_t size() const { return terms_.size(); }

private:
  std::vector<ExprRef> terms_;
};

enum class Verdict { Sat, Unsat, Unknown };

struct SolverResult {
  Verdict verdict = Verdict::Unknown;
  Model model; // witness for sat (all free symbols of the query)
  std::string note;
};

class SolverBudgetError : public std::runtime_error {
public:
  explicit SolverBudgetError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Free symbols of all terms, sorted and unique.
std::vector<uint32_t> freeSymbols(const Constraint& c);

/// QF_BV script: declare-const per free symbol, assert per term, check-sat,
/// get-model. `extra` entries are emitted as named asserted terms as well.
std::string exportSmtLib2(const Constraint& c,
                          const std::vector<std::pair<std::string, ExprRef>>& extra = {});

/// Odometer over all assignments of the given symbols.
class ModelEnumerator {
public:
  explicit ModelEnumerator(const std::vector<uint32_t>& symbolIds);
  uint64_t totalBits() const { return totalBits_; }
  /// Fills `m` with the next assignment; false once exhausted.
  bool next(Model& m);

private:
  std::vector<std::pair<uint32_t, unsigned>> syms_; // id, width
  std::vector<uint64_t> cur_;
  uint64_t totalBits_ = 0;
  bool done_ = false;
  bool first_ = true;
};

class Solver {
public:
  enum class Mode { Enumeration, External };

  struct Options {
    Mode mode = Mode::Enumeration;
    unsigned budgetBits = 16; // enumeration: max total free-symbol bits
    double timeoutSec = 60;   // per external query
    std::string solverPath;   // external SMT solver executable
  };

  struct Stats {
    uint64_t queries = 0;
    double totalSeconds = 0;
  };

  Solver() = default;
  explicit Solver(Options opts) : opts_(opts) {}

  /// Exact within budget in enumeration mode (throws SolverBudgetError when
  /// the free bits exceed the budget); shells out SMT-LIB2 in external mode
  /// (process failure or timeout yields Unknown).
  SolverResult check(const Constraint& c) const;

  bool isSat(const Constraint& c) const { return check(c).verdict == Verdict::Sat; }

  const Options& options() const { return opts_; }
  const Stats& stats() const { return stats_; }

private:
  Options opts_;
  mutable Stats stats_;

  SolverResult checkEnumeration(const Constraint& c) const;
  SolverResult checkExternal(const Constraint& c) const;
};

} // namespace specsym
