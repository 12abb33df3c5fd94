//===-- Harness.h — analysis orchestration, sweeps, corpus, reports -------===//
#pragma once

#include "specsym/CacheModel.h"
#include "specsym/Engine.h"

#include <map>
#include <string>
#include <vector>

namespace specsym {

struct AnalysisConfig {
  EngineConfig engine;
  CacheConfig cache;                  // 32 KB / 64 B / 2-way by default
  Attacker attacker = Attacker::Access;
  bool cacheModelOn = true;
};

struct ResidencyEntry {
  std::string loc;     // LS location
  Residency residency; // best over covering traces (worst for the victim)
  std::string note;
};

struct Report {
  int schema = 1;
  std::string program;

  // configuration echo
  unsigned sew = 0;
  std::string attacker;
  bool cacheModelOn = true;
  std::string search;
  uint64_t seed = 0;
  CacheConfig cache;

  std::vector<Finding> findings;
  size_t vb = 0, ucVb = 0, rs = 0, ls = 0;
  std::vector<ResidencyEntry> residency; // one per LS location, cache model on
  size_t leakageCount = 0;               // LS locations still observable

  EngineStats stats;
  std::vector<std::string> diagnostics;
};

Report analyze(const Program& program, const AnalysisConfig& cfg,
               const std::string& programName = "");
Report analyzeFile(const std::string& path, const AnalysisConfig& cfg);

/// Timing-dependent numbers live in one JSON subobject ("timing") so reports
/// can be compared for determinism after dropping it.
std::string reportJson(const Report& r);
std::string reportText(const Report& r);

// ---------------------------------------------------------------------------
// Eviction sweep

/// Bounds-check-bypass gadget followed by `n` straight-line loads of distinct
/// cache lines walking the sets from 0 upward. Exposed so tests can replay
/// the exact layout through the concrete simulator.
std::string makeSweepProgram(unsigned n);

struct SweepRow {
  unsigned assoc;
  unsigned n;
  bool evicted; // all secret-dependent accesses definitely evicted
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::map<unsigned, unsigned> crossover; // assoc -> minimal evicted n (0: none)
  std::string csv() const;
};

/// Fixed total size / line size; the set count follows from the associativity.
SweepResult sweepEviction(const std::vector<unsigned>& assocList, unsigned nMin,
                          unsigned nMax, const AnalysisConfig& base);

// ---------------------------------------------------------------------------
// Corpus driver

struct CorpusEntry {
  std::string file;
  bool pass = false;
  std::string detail; // mismatch description or error
  Report report;
};

struct CorpusResult {
  std::vector<CorpusEntry> entries;
  bool allPass() const;
  std::string table() const;
};

/// Runs every .specir file in the directory against its `<name>.expect.json`
/// sidecar ({"vb":..,"uc_vb":..,"rs":..,"ls":..}, optional "sew"). A missing
/// sidecar is a per-file failure. An empty directory passes.
CorpusResult runCorpus(const std::string& dir, const AnalysisConfig& base);

} // namespace specsym
