//===-- oracle.h — concrete reference interpreters for differential tests --===//
//
// Two brute-force executors that know nothing about the symbolic engine's
// internals: a plain concrete run (architectural semantics) and a concrete
// misprediction run that forces one branch occurrence down the wrong leg and
// executes up to `sew` instructions there before squashing.  Out-of-bound
// window loads produce an arbitrary but deterministic value and are marked
// tainted; taint spreads to every value computed from one.
//
#pragma once

#include "specsym/Engine.h"
#include "specsym/SpecIR.h"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace specsym {
namespace oracle {

/// Absolute path of a file inside the source tree.
std::string repoPath(const std::string& rel);
std::string readFile(const std::string& path);

struct Access {
  int instrId = -1;
  uint64_t addr = 0;
  bool isStore = false;
  bool secretDependent = false; // concrete taint on the address
};

/// Concrete free choices of one run: values for `symbolic` instructions (per
/// dynamic occurrence) and initial memory contents. Anything unspecified is 0.
struct Input {
  std::map<std::pair<int, int>, uint64_t> inputs;               // (instr id, occ)
  std::map<std::pair<std::string, uint64_t>, uint64_t> memInit; // (global, index)
  // Replay support: values the analysis chose for otherwise unconstrained
  // load results, keyed by (load instr id, occurrence). Absent entries fall
  // back to the concrete memory contents.
  std::map<std::pair<int, int>, uint64_t> loadValues;

  uint64_t input(int id, int occ) const;
  uint64_t cell(const std::string& g, uint64_t idx) const;
};

struct RunResult {
  std::vector<Access> accesses;
  std::vector<std::pair<int, bool>> branches; // (branch instr id, condition)
  bool returned = false;
  bool assumeFailed = false; // an assume evaluated to false; run abandoned
};

RunResult concreteRun(const Program& p, const Input& in, uint64_t maxSteps = 100000);

/// Which dynamic branch evaluation to mispredict and how to steer branches
/// met inside the window (each consumes one entry: true picks the first
/// label, false the second; once exhausted the concrete condition decides).
struct Schedule {
  int rootBranchId = -1;
  int rootOcc = 0;
  std::vector<bool> nested;
  unsigned sew = 50;
  bool nestedWindowFresh = false;
};

struct SpecRun {
  bool fired = false; // the scheduled occurrence was reached
  bool assumeFailed = false;
  std::vector<Access> specAccesses; // inside the window
  std::vector<Access> tailAccesses; // correct-path accesses after the squash
  // Value observed by every load up to the end of the window, keyed by
  // (load instr id, occurrence); the squash discards the window occurrences
  // so keys stay unambiguous.
  std::map<std::pair<int, int>, uint64_t> loads;
};

SpecRun mispredictRun(const Program& p, const Input& in, const Schedule& s,
                      uint64_t maxSteps = 100000);

/// Value an out-of-bound window load observes; arbitrary, deterministic,
/// distinct across sites so address collisions do not mask mismatches.
uint64_t oobValue(int instrId, int occ, unsigned width);

/// Equality pins for every symbol reachable from `roots` whose provenance
/// names an input occurrence or an initial memory cell; the rest stay free.
Constraint pinSymbols(const std::vector<ExprRef>& roots, const Input& in);

/// evaluate() with unbound symbols reading as zero.
uint64_t evalDefault0(const ExprRef& e, const Model& m);

/// Input reconstructed from a solver witness via symbol provenances.
Input inputFromModel(const Model& m);

} // namespace oracle
} // namespace specsym
