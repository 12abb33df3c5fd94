//===-- CacheModel.h — symbolic residency model, may-cache filter, LRU oracle ===//
#pragma once

#include "specsym/Solver.h"

#include <cstdint>
#include <string>
#include <vector>

namespace specsym {

class CacheModelError : public std::runtime_error {
public:
  explicit CacheModelError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CacheConfig {
  unsigned setsLog2 = 8; // S
  unsigned lineLog2 = 6; // B
  unsigned assoc = 2;    // ways per set

  uint64_t numSets() const { return 1ull << setsLog2; }
  uint64_t lineBytes() const { return 1ull << lineLog2; }
  uint64_t sizeBytes() const { return numSets() * lineBytes() * assoc; }

  /// 32768, 64, 2 -> {setsLog2 8, lineLog2 6, assoc 2}. Throws CacheModelError
  /// unless sizes are powers of two and divide evenly.
  static CacheConfig fromSize(uint64_t cacheBytes, uint64_t lineBytes, unsigned ways);
};

/// (sigma >> B) & (2^S - 1), a 64-bit expression.
ExprRef setIndexExpr(const ExprRef& sigma, const CacheConfig& cfg);
/// sigma >> (B + S).
ExprRef tagExpr(const ExprRef& sigma, const CacheConfig& cfg);

struct TraceEvent {
  ExprRef sigma;         // 64-bit address
  bool symbolic = false; // secret-dependent speculative access
  bool isStore = false;
  int instrId = -1;
  std::string loc; // source location, for reporting
};

struct CacheTrace {
  std::vector<TraceEvent> events;
  Constraint pi; // terminal path condition
};

/// Residency formula for every symbolic event: a secret-carrying event stays
/// cached unless at least `assoc` distinct later lines land in its set and
/// survive to the end themselves. `any` is the disjunction over all symbolic
/// events (satisfiable together with pi means some secret address may remain).
struct GammaSpectre {
  ExprRef any;
  std::vector<std::pair<size_t, ExprRef>> perEvent; // event index, indicator
};

/// Throws CacheModelError when the trace has no symbolic events.
GammaSpectre buildGammaSpectre(const CacheTrace& trace, const CacheConfig& cfg);

enum class Attacker { Access, Trace };
enum class Residency { MayRemain, DefinitelyEvicted, Unknown };

struct EventVerdict {
  size_t eventIndex = 0;
  Residency residency = Residency::Unknown;
  Model witness;           // populated for MayRemain when available
  size_t observationIndex = 0; // prefix length that decided the verdict
  std::string note;
};

struct ResidencyVerdict {
  Attacker attacker = Attacker::Access;
  std::vector<EventVerdict> events; // one per symbolic event, trace order

  bool anyMayRemain() const {
    for (auto& e : events)
      if (e.residency != Residency::DefinitelyEvicted) return true;
    return false;
  }
};

struct MayCacheResult;

/// Access attacker: one query per symbolic event over the whole trace.
/// Trace attacker: queries every prefix from the event onward, may-remain if
/// any prefix is satisfiable. Solver budget overruns and external-solver
/// unknowns degrade to Unknown (treated as may-remain by callers).
/// `prefilter`, when given, short-circuits events it proved evicted; it only
/// speaks about the final cache state, so it is consulted for the access
/// attacker and ignored for the trace attacker.
ResidencyVerdict checkResidency(const CacheTrace& trace, const CacheConfig& cfg,
                                Attacker attacker, const Solver& solver,
                                const MayCacheResult* prefilter = nullptr);

// ---------------------------------------------------------------------------
// Fast over-approximate filter

struct VirtualEntry {
  size_t eventIndex; // which symbolic event this block came from
  unsigned life;
};

struct MayCacheState {
  std::vector<std::vector<uint64_t>> lines;      // per set, block ids, MRU first
  std::vector<std::vector<VirtualEntry>> virt;   // per set, symbolic residents
};

struct MayCacheResult {
  MayCacheState state;
  std::vector<size_t> resident; // symbolic event indexes still possibly cached
  bool isResident(size_t eventIndex) const;
};

/// Replays the trace: concrete accesses drive real LRU state; a symbolic
/// access is inserted into the virtual line of every set it can feasibly map
/// to (decided by enumerating models of pi, falling back to all sets when the
/// enumeration budget is exceeded or `solver` is null) with life = assoc.
/// Every concrete miss in a set decrements that set's virtual entries; at
/// life 0 the entry is dropped. Absence from the final state is a sound
/// definitely-evicted answer; presence proves nothing.
MayCacheResult mayCacheFilter(const CacheTrace& trace, const CacheConfig& cfg,
                              const Solver* solver);

// ---------------------------------------------------------------------------
// Concrete LRU oracle

class LruSim {
public:
  explicit LruSim(const CacheConfig& cfg);
  /// True on hit. Misses insert MRU and evict the LRU way when full.
  bool access(uint64_t addr);
  bool resident(uint64_t addr) const;
  const std::vector<std::vector<uint64_t>>& sets() const { return sets_; }

private:
  CacheConfig cfg_;
  std::vector<std::vector<uint64_t>> sets_; // block ids, MRU first
};

struct LruResult {
  std::vector<bool> hits;
  std::vector<std::vector<uint64_t>> sets;
};

LruResult concreteLruSimulate(const std::vector<uint64_t>& addrs, const CacheConfig& cfg);

// ---------------------------------------------------------------------------
// Standalone trace files (cache model testing without the engine); grammar in
// the README. Throws ParseError-compatible CacheModelError on bad input.

CacheTrace parseTraceFile(const std::string& text);

} // namespace specsym
