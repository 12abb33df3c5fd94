//===-- Engine.h — symbolic executor with speculative path exploration ----===//
#pragma once

#include "specsym/Solver.h"
#include "specsym/SpecIR.h"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace specsym {

enum class Phase { Normal, Speculative };

struct MemoryEvent {
  int instrId = -1;
  std::string loc;
  Constraint piSnapshot;
  ExprRef sigma; // 64-bit byte address
  bool isStore = false;
  Phase phase = Phase::Normal;
  bool secretDependent = false;
  std::string object;
  size_t observationIndex = 0;
};

/// One Γ: secret-dependent speculative accesses, then (for completed traces)
/// the normal-path accesses that followed the mispredicted branch.
struct GammaRecord {
  int rootBranchId = -1;
  std::vector<MemoryEvent> events;
  Constraint pi; // at commit time; terminal path condition for completed traces
};

/// Hand-off point between speculative states and the normal continuation of
/// their root branch: terminating speculative states deposit their Γ heads
/// here, the paired normal state copies them into its live set.
struct GammaBucket {
  int rootBranchId = -1;
  std::vector<GammaRecord> gammas;
  bool overflowed = false;
};

struct SpeculationFrame {
  int rootBranchId = -1;
  std::string rootLoc;
  unsigned executed = 0;    // instructions retired since the window (re)started
  unsigned windowTotal = 0; // instructions retired since the root misprediction
  unsigned nesting = 0;
  std::vector<MemoryEvent> gamma;
  std::shared_ptr<GammaBucket> bucket;
};

struct ExecState {
  int blockIdx = 0;
  int instrIdx = 0;
  std::map<std::string, ExprRef> regs;
  std::map<std::pair<std::string, uint64_t>, ExprRef> mem; // overlay per cell
  Constraint pi;
  std::vector<uint32_t> sec; // sorted secret symbol ids
  std::optional<SpeculationFrame> frame;
  std::vector<std::shared_ptr<GammaBucket>> pendingBuckets;
  std::vector<GammaRecord> liveGammas;
  std::vector<MemoryEvent> eventLog;
  std::map<int, int> occ; // per-instruction execution counts (provenance)
  uint64_t instrCount = 0;
  size_t obsIndex = 0;
  uint64_t depth = 0;

  bool speculative() const { return frame.has_value(); }
};

enum class FindingKind { VB, UC_VB, RS, LS };
const char* findingKindName(FindingKind k);

struct Finding {
  FindingKind kind = FindingKind::RS;
  std::string loc;
  int instrId = -1;
  int rootBranchId = -1; // mispredicted branch this event ran under
  std::string rootLoc;
  Model witness;
};

struct EngineConfig {
  unsigned sew = 50; // 0 disables speculative exploration entirely
  enum class Search { DFS, BFS, Random } search = Search::DFS;
  uint64_t seed = 0;
  bool nestedWindowFresh = false; // nested branches restart the window
  uint64_t maxPaths = 1 << 20;
  uint64_t maxInstrPerPath = 100000;
  double wallClockSec = 0; // 0 = unlimited
  size_t gammaCap = 4096;  // stored Γs per root branch
  Solver::Options solver;
};

struct EngineStats {
  uint64_t paths = 0;     // completed normal paths
  uint64_t specPaths = 0; // terminated speculative states
  uint64_t instrTotal = 0;
  uint64_t specInstrTotal = 0;
  uint64_t memEvents = 0;
  uint64_t symbolicAddrEvents = 0;
  uint64_t solverQueries = 0;
  double solverSeconds = 0;
  double wallSeconds = 0;

  double avgSpecInstr() const {
    return specPaths ? double(specInstrTotal) / double(specPaths) : 0.0;
  }
};

struct PathRecord {
  std::vector<MemoryEvent> eventLog;
  Constraint pi;
};

struct AnalysisResult {
  std::map<int, std::vector<GammaRecord>> omega; // speculative heads per root
  std::vector<GammaRecord> completedTraces;      // head + normal tail, terminal pi
  std::vector<PathRecord> paths;
  std::vector<Finding> findings; // deduplicated by (kind, location)
  std::map<int, std::string> branchLoc;
  std::map<int, bool> branchUserCond;
  std::vector<std::string> diagnostics;
  EngineStats stats;

  size_t count(FindingKind k) const;
  std::set<std::string> uniqueSpecEventLocs() const;
};

class Executor {
public:
  Executor(const Program& program, EngineConfig cfg);
  AnalysisResult run();

private:
  struct Impl;
  const Program& prog_;
  EngineConfig cfg_;
};

} // namespace specsym
