//===-- Harness.cpp ----------------------------------------------------------===//
#include "specsym/Harness.h"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace specsym {

namespace {

std::string residencyName(Residency r) {
  switch (r) {
  case Residency::MayRemain: return "may-remain";
  case Residency::DefinitelyEvicted: return "definitely-evicted";
  case Residency::Unknown: return "unknown";
  }
  return "?";
}

std::string searchName(EngineConfig::Search s) {
  switch (s) {
  case EngineConfig::Search::DFS: return "dfs";
  case EngineConfig::Search::BFS: return "bfs";
  case EngineConfig::Search::Random: return "random";
  }
  return "?";
}

CacheTrace toCacheTrace(const GammaRecord& g) {
  CacheTrace t;
  t.pi = g.pi;
  for (auto& ev : g.events) {
    TraceEvent te;
    te.sigma = ev.sigma;
    te.symbolic = ev.phase == Phase::Speculative;
    te.isStore = ev.isStore;
    te.instrId = ev.instrId;
    te.loc = ev.loc;
    t.events.push_back(std::move(te));
  }
  return t;
}

} // namespace

Report analyze(const Program& program, const AnalysisConfig& cfg,
               const std::string& programName) {
  Executor ex(program, cfg.engine);
  AnalysisResult r = ex.run();

  Report rep;
  rep.program = programName;
  rep.sew = cfg.engine.sew;
  rep.attacker = cfg.attacker == Attacker::Access ? "access" : "trace";
  rep.cacheModelOn = cfg.cacheModelOn;
  rep.search = searchName(cfg.engine.search);
  rep.seed = cfg.engine.seed;
  rep.cache = cfg.cache;
  rep.findings = r.findings;
  rep.vb = r.count(FindingKind::VB);
  rep.ucVb = r.count(FindingKind::UC_VB);
  rep.rs = r.count(FindingKind::RS);
  rep.ls = r.count(FindingKind::LS);
  rep.stats = r.stats;
  rep.diagnostics = r.diagnostics;

  std::vector<std::string> lsLocs;
  for (auto& f : r.findings)
    if (f.kind == FindingKind::LS) lsLocs.push_back(f.loc);

  if (!cfg.cacheModelOn || lsLocs.empty()) {
    rep.leakageCount = lsLocs.size();
    return rep;
  }

  // Residency per LS location: observable unless every completed trace that
  // covers the location proves eviction.
  Solver solver(cfg.engine.solver);
  std::map<std::string, Residency> best; // per loc: worst verdict seen
  std::map<std::string, std::string> notes;
  std::map<std::string, bool> covered;
  for (auto& loc : lsLocs) covered[loc] = false;

  for (auto& g : r.completedTraces) {
    CacheTrace trace = toCacheTrace(g);
    bool hasSymbolic = false;
    for (auto& e : trace.events) hasSymbolic |= e.symbolic;
    if (!hasSymbolic) continue;
    try {
      MayCacheResult filter = mayCacheFilter(trace, cfg.cache, &solver);
      ResidencyVerdict verdict =
          checkResidency(trace, cfg.cache, cfg.attacker, solver, &filter);
      for (auto& ev : verdict.events) {
        const std::string& loc = trace.events[ev.eventIndex].loc;
        if (!covered.count(loc)) continue; // not a reported LS (deduped store etc.)
        covered[loc] = true;
        auto it = best.find(loc);
        // MayRemain dominates Unknown dominates DefinitelyEvicted
        auto rank = [](Residency x) {
          return x == Residency::MayRemain ? 2 : (x == Residency::Unknown ? 1 : 0);
        };
        if (it == best.end() || rank(ev.residency) > rank(it->second)) {
          best[loc] = ev.residency;
          if (!ev.note.empty()) notes[loc] = ev.note;
        }
      }
    } catch (const std::exception& e) {
      for (auto& ev : trace.events) {
        if (!ev.symbolic || !covered.count(ev.loc)) continue;
        covered[ev.loc] = true;
        best[ev.loc] = Residency::Unknown;
        notes[ev.loc] = e.what();
      }
    }
  }

  rep.leakageCount = 0;
  for (auto& loc : lsLocs) {
    ResidencyEntry entry;
    entry.loc = loc;
    if (!covered[loc]) {
      entry.residency = Residency::Unknown;
      entry.note = "no completed trace covers this access; assumed observable";
    } else {
      entry.residency = best[loc];
      if (notes.count(loc)) entry.note = notes[loc];
    }
    if (entry.residency != Residency::DefinitelyEvicted) rep.leakageCount++;
    rep.residency.push_back(std::move(entry));
  }
  return rep;
}

Report analyzeFile(const std::string& path, const AnalysisConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Program p = parseProgram(ss.str());
  return analyze(p, cfg, std::filesystem::path(path).filename().string());
}

// ---------------------------------------------------------------------------
// Reports

std::string reportJson(const Report& r) {
  json j;
  j["schema"] = r.schema;
  j["program"] = r.program;
  j["config"] = {{"sew", r.sew},
                 {"attacker", r.attacker},
                 {"cache_model", r.cacheModelOn},
                 {"search", r.search},
                 {"seed", r.seed},
                 {"cache", {{"sets", r.cache.numSets()},
                            {"line_bytes", r.cache.lineBytes()},
                            {"ways", r.cache.assoc}}}};
  json findings = json::array();
  for (auto& f : r.findings) {
    json w = json::array();
    for (auto& [id, v] : f.witness.values)
      w.push_back({{"symbol", symbolInfo(id).name}, {"id", id}, {"value", v}});
    json jf = {{"kind", findingKindName(f.kind)}, {"loc", f.loc}, {"witness", w}};
    if (f.rootBranchId >= 0) jf["root"] = f.rootLoc;
    findings.push_back(std::move(jf));
  }
  j["findings"] = std::move(findings);
  j["counts"] = {{"vb", r.vb}, {"uc_vb", r.ucVb}, {"rs", r.rs}, {"ls", r.ls}};
  json res = json::array();
  for (auto& e : r.residency)
    res.push_back(
        {{"loc", e.loc}, {"verdict", residencyName(e.residency)}, {"note", e.note}});
  j["residency"] = std::move(res);
  j["leakage_count"] = r.leakageCount;
  double symPct = r.stats.memEvents
                      ? 100.0 * double(r.stats.symbolicAddrEvents) / double(r.stats.memEvents)
                      : 0.0;
  j["stats"] = {{"paths", r.stats.paths},
                {"spec_paths", r.stats.specPaths},
                {"avg_spec_inst", r.stats.avgSpecInstr()},
                {"instructions", r.stats.instrTotal},
                {"spec_instructions", r.stats.specInstrTotal},
                {"mem_events", r.stats.memEvents},
                {"symbolic_addr_pct", symPct},
                {"solver_queries", r.stats.solverQueries}};
  j["timing"] = {{"wall_seconds", r.stats.wallSeconds},
                 {"solver_seconds", r.stats.solverSeconds},
                 {"solver_time_pct", r.stats.wallSeconds > 0
                                         ? 100.0 * r.stats.solverSeconds / r.stats.wallSeconds
                                         : 0.0}};
  j["diagnostics"] = r.diagnostics;
  return j.dump(2);
}

std::string reportText(const Report& r) {
  std::ostringstream os;
  os << "program: " << r.program << "\n";
  os << "config:  sew=" << r.sew << " attacker=" << r.attacker
     << " cache-model=" << (r.cacheModelOn ? "on" : "off") << " cache="
     << r.cache.numSets() << "x" << r.cache.lineBytes() << "x" << r.cache.assoc
     << " search=" << r.search << "\n\n";
  os << "paths=" << r.stats.paths << "  spec-paths=" << r.stats.specPaths
     << "  avg-spec-inst=" << r.stats.avgSpecInstr() << "\n";
  os << "VB=" << r.vb << "  UC_VB=" << r.ucVb << "  RS=" << r.rs << "  LS=" << r.ls
     << "\n\n";
  if (!r.findings.empty()) {
    os << "findings:\n";
    for (auto& f : r.findings) {
      os << "  " << findingKindName(f.kind) << "  " << f.loc;
      if (f.rootBranchId >= 0) os << "  (branch " << f.rootLoc << ")";
      os << "\n";
    }
  }
  if (!r.residency.empty()) {
    os << "residency:\n";
    for (auto& e : r.residency) {
      os << "  " << e.loc << "  " << residencyName(e.residency);
      if (!e.note.empty()) os << "  (" << e.note << ")";
      os << "\n";
    }
  }
  os << "leakage: " << r.leakageCount
     << (r.leakageCount ? "" : "  (leakage free)") << "\n";
  for (auto& d : r.diagnostics) os << "note: " << d << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Eviction sweep

std::string makeSweepProgram(unsigned n) {
  std::ostringstream os;
  os << "global array1[16]:8 user\n";
  os << "global array2[16384]:8 @base 0x0\n";
  os << "global sweep[32768]:8 @base 0x40000\n";
  os << "fn main() {\n";
  os << "entry:\n";
  os << "  x = symbolic 8 user\n";
  os << "  len = const 8 16\n";
  os << "  c = ult x len\n";
  os << "  br c, then, else\n";
  os << "then:\n";
  os << "  y = load array1[x]\n";
  os << "  t = load array2[y]\n";
  os << "  ret\n";
  os << "else:\n";
  for (unsigned i = 0; i < n; ++i) {
    os << "  i" << i << " = const 64 " << (uint64_t(i) * 64) << "\n";
    os << "  s" << i << " = load sweep[i" << i << "]\n";
  }
  os << "  ret\n";
  os << "}\n";
  return os.str();
}

std::string SweepResult::csv() const {
  std::ostringstream os;
  os << "assoc,n,evicted\n";
  for (auto& r : rows) os << r.assoc << "," << r.n << "," << (r.evicted ? 1 : 0) << "\n";
  return os.str();
}

SweepResult sweepEviction(const std::vector<unsigned>& assocList, unsigned nMin,
                          unsigned nMax, const AnalysisConfig& base) {
  SweepResult out;
  for (unsigned a : assocList) {
    AnalysisConfig cfg = base;
    cfg.cache = CacheConfig::fromSize(base.cache.sizeBytes(), base.cache.lineBytes(), a);
    cfg.cacheModelOn = true;
    out.crossover[a] = 0;
    for (unsigned n = nMin; n <= nMax; ++n) {
      Program p = parseProgram(makeSweepProgram(n));
      Report rep = analyze(p, cfg, "sweep-n" + std::to_string(n));
      bool evicted = rep.ls > 0 && rep.leakageCount == 0;
      out.rows.push_back({a, n, evicted});
      if (evicted && out.crossover[a] == 0) out.crossover[a] = n;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

bool CorpusResult::allPass() const {
  for (auto& e : entries)
    if (!e.pass) return false;
  return true;
}

std::string CorpusResult::table() const {
  std::ostringstream os;
  size_t passed = 0;
  for (auto& e : entries) {
    os << (e.pass ? "PASS" : "FAIL") << "  " << e.file;
    if (!e.detail.empty()) os << "  " << e.detail;
    os << "\n";
    if (e.pass) ++passed;
  }
  os << passed << "/" << entries.size() << " passed\n";
  return os.str();
}

CorpusResult runCorpus(const std::string& dir, const AnalysisConfig& base) {
  namespace fs = std::filesystem;
  CorpusResult out;
  std::vector<fs::path> files;
  for (auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".specir")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());

  for (auto& f : files) {
    CorpusEntry entry;
    entry.file = f.filename().string();
    fs::path sidecar = f;
    sidecar.replace_extension(".expect.json");
    try {
      std::ifstream sc(sidecar);
      if (!sc) throw std::runtime_error("missing sidecar " + sidecar.filename().string());
      json expect = json::parse(sc);

      AnalysisConfig cfg = base;
      if (expect.contains("sew")) cfg.engine.sew = expect["sew"].get<unsigned>();
      cfg.cacheModelOn = false; // expectations are engine-level counts
      entry.report = analyzeFile(f.string(), cfg);

      std::ostringstream mismatch;
      auto check = [&](const char* key, size_t got) {
        if (!expect.contains(key)) return;
        size_t want = expect[key].get<size_t>();
        if (want != got) mismatch << key << ": expected " << want << ", got " << got << "; ";
      };
      check("vb", entry.report.vb);
      check("uc_vb", entry.report.ucVb);
      check("rs", entry.report.rs);
      check("ls", entry.report.ls);
      entry.detail = mismatch.str();
      entry.pass = entry.detail.empty();
    } catch (const std::exception& e) {
      entry.pass = false;
      entry.detail = e.what();
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

} // namespace specsym
