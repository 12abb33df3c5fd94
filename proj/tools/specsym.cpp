//===-- specsym.cpp — command line front end ---------------------------------===//
#include "specsym/Harness.h"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace specsym;

namespace {

struct CommonOpts {
  unsigned sew = 50;
  std::string cacheSpec; // SETSxLINExWAYS, overrides the size triple
  uint64_t cacheSize = 32768;
  uint64_t lineBytes = 64;
  unsigned ways = 2;
  std::string attacker = "access";
  std::string cacheModel = "on";
  std::string solverSpec = "enum";
  std::string searchSpec = "dfs";
  uint64_t maxPaths = 1 << 20;
  uint64_t maxInst = 100000;
  double timeoutSec = 0;
  std::string reportFmt = "text";
  std::string nestedWindow = "shared";
};

void addCommonOptions(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--sew", o.sew, "speculative execution window (instructions)");
  cmd->add_option("--cache", o.cacheSpec, "cache geometry SETSxLINExWAYS (e.g. 256x64x2)");
  cmd->add_option("--cache-size", o.cacheSize, "total cache size in bytes");
  cmd->add_option("--line", o.lineBytes, "cache line size in bytes");
  cmd->add_option("--ways", o.ways, "cache associativity");
  cmd->add_option("--attacker", o.attacker, "access | trace")
      ->check(CLI::IsMember({"access", "trace"}));
  cmd->add_option("--cache-model", o.cacheModel, "on | off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--solver", o.solverSpec, "enum | smt:<path>");
  cmd->add_option("--search", o.searchSpec, "dfs | bfs | random:<seed>");
  cmd->add_option("--max-paths", o.maxPaths, "normal path budget");
  cmd->add_option("--max-inst", o.maxInst, "per-path instruction budget");
  cmd->add_option("--timeout", o.timeoutSec, "wall clock budget in seconds");
  cmd->add_option("--report", o.reportFmt, "json | text")
      ->check(CLI::IsMember({"json", "text"}));
  cmd->add_option("--nested-window", o.nestedWindow,
                  "shared | fresh window for nested speculation")
      ->check(CLI::IsMember({"shared", "fresh"}));
}

AnalysisConfig buildConfig(const CommonOpts& o) {
  AnalysisConfig cfg;
  cfg.engine.sew = o.sew;
  cfg.engine.maxPaths = o.maxPaths;
  cfg.engine.maxInstrPerPath = o.maxInst;
  cfg.engine.wallClockSec = o.timeoutSec;
  cfg.engine.nestedWindowFresh = o.nestedWindow == "fresh";

  if (o.searchSpec == "dfs") {
    cfg.engine.search = EngineConfig::Search::DFS;
  } else if (o.searchSpec == "bfs") {
    cfg.engine.search = EngineConfig::Search::BFS;
  } else if (o.searchSpec.rfind("random", 0) == 0) {
    cfg.engine.search = EngineConfig::Search::Random;
    auto colon = o.searchSpec.find(':');
    if (colon != std::string::npos)
      cfg.engine.seed = std::stoull(o.searchSpec.substr(colon + 1));
  } else {
    throw CLI::ValidationError("--search", "expected dfs | bfs | random:<seed>");
  }

  if (o.solverSpec == "enum") {
    cfg.engine.solver.mode = Solver::Mode::Enumeration;
  } else if (o.solverSpec.rfind("smt:", 0) == 0) {
    cfg.engine.solver.mode = Solver::Mode::External;
    cfg.engine.solver.solverPath = o.solverSpec.substr(4);
  } else {
    throw CLI::ValidationError("--solver", "expected enum | smt:<path>");
  }

  if (!o.cacheSpec.empty()) {
    unsigned sets = 0, line = 0, ways = 0;
    char x1 = 0, x2 = 0;
    std::istringstream ss(o.cacheSpec);
    ss >> sets >> x1 >> line >> x2 >> ways;
    if (!ss || x1 != 'x' || x2 != 'x')
      throw CLI::ValidationError("--cache", "expected SETSxLINExWAYS");
    cfg.cache = CacheConfig::fromSize(uint64_t(sets) * line * ways, line, ways);
  } else {
    cfg.cache = CacheConfig::fromSize(o.cacheSize, o.lineBytes, o.ways);
  }
  cfg.attacker = o.attacker == "trace" ? Attacker::Trace : Attacker::Access;
  cfg.cacheModelOn = o.cacheModel != "off";
  return cfg;
}

int emitReport(const Report& rep, const std::string& fmt) {
  std::cout << (fmt == "json" ? reportJson(rep) : reportText(rep)) << "\n";
  return rep.leakageCount > 0 ? 2 : 0;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"speculative symbolic execution with cache side-channel checking"};
  app.require_subcommand(1);

  CommonOpts opts;

  std::string analyzeFilePath;
  CLI::App* cmdAnalyze = app.add_subcommand("analyze", "analyze one program");
  cmdAnalyze->add_option("file", analyzeFilePath, "SpecIR program")->required();
  addCommonOptions(cmdAnalyze, opts);

  std::vector<unsigned> sweepAssoc{2, 4, 8};
  unsigned sweepMin = 1, sweepMax = 512;
  std::string sweepCsvPath;
  CLI::App* cmdSweep = app.add_subcommand("sweep", "eviction crossover sweep");
  cmdSweep->add_option("--assoc", sweepAssoc, "associativities to sweep");
  cmdSweep->add_option("--n-min", sweepMin, "first sweep length");
  cmdSweep->add_option("--n-max", sweepMax, "last sweep length");
  cmdSweep->add_option("--csv", sweepCsvPath, "write per-N verdicts to this file");
  addCommonOptions(cmdSweep, opts);

  std::string corpusDir;
  CLI::App* cmdCorpus = app.add_subcommand("corpus", "run a directory of programs");
  cmdCorpus->add_option("dir", corpusDir, "directory of .specir + .expect.json")
      ->required();
  addCommonOptions(cmdCorpus, opts);

  std::string traceFilePath;
  CLI::App* cmdTrace = app.add_subcommand("trace", "check residency of a trace file");
  cmdTrace->add_option("file", traceFilePath, "standalone trace file")->required();
  addCommonOptions(cmdTrace, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    AnalysisConfig cfg = buildConfig(opts);

    if (cmdAnalyze->parsed()) {
      return emitReport(analyzeFile(analyzeFilePath, cfg), opts.reportFmt);
    }
    if (cmdSweep->parsed()) {
      SweepResult sr = sweepEviction(sweepAssoc, sweepMin, sweepMax, cfg);
      for (auto& [a, n] : sr.crossover) {
        std::cout << a << "-way crossover: ";
        if (n)
          std::cout << "first fully evicted at N=" << n << "\n";
        else
          std::cout << "not reached in [" << sweepMin << "," << sweepMax << "]\n";
      }
      if (!sweepCsvPath.empty()) {
        std::ofstream out(sweepCsvPath);
        out << sr.csv();
      } else {
        std::cout << sr.csv();
      }
      return 0;
    }
    if (cmdCorpus->parsed()) {
      CorpusResult cr = runCorpus(corpusDir, cfg);
      std::cout << cr.table();
      return cr.allPass() ? 0 : 1;
    }
    if (cmdTrace->parsed()) {
      CacheTrace trace = parseTraceFile(slurp(traceFilePath));
      Solver solver(cfg.engine.solver);
      MayCacheResult filter = mayCacheFilter(trace, cfg.cache, &solver);
      ResidencyVerdict v = checkResidency(trace, cfg.cache, cfg.attacker, solver, &filter);
      bool leak = false;
      for (auto& e : v.events) {
        std::cout << "event " << e.eventIndex << ": "
                  << (e.residency == Residency::MayRemain        ? "may-remain"
                      : e.residency == Residency::DefinitelyEvicted ? "definitely-evicted"
                                                                    : "unknown");
        if (!e.note.empty()) std::cout << "  (" << e.note << ")";
        std::cout << "\n";
        leak |= e.residency != Residency::DefinitelyEvicted;
      }
      return leak ? 2 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
