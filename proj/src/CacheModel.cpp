//===-- CacheModel.cpp ------------------------------------------------------===//
#include "specsym/CacheModel.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace specsym {

CacheConfig CacheConfig::fromSize(uint64_t cacheBytes, uint64_t lineBytes, unsigned ways) {
  auto log2Exact = [](uint64_t v, const char* what) -> unsigned {
    if (v == 0 || (v & (v - 1)) != 0)
      throw CacheModelError(std::string(what) + " must be a power of two");
    unsigned n = 0;
    while ((1ull << n) < v) ++n;
    return n;
  };
  if (ways < 1) throw CacheModelError("associativity must be >= 1");
  log2Exact(cacheBytes, "cache size");
  CacheConfig cfg;
  cfg.lineLog2 = log2Exact(lineBytes, "line size");
  cfg.assoc = ways;
  uint64_t lineCount = cacheBytes / lineBytes;
  if (lineCount * lineBytes != cacheBytes || lineCount % ways != 0)
    throw CacheModelError("cache size not divisible into sets x lines x ways");
  cfg.setsLog2 = log2Exact(lineCount / ways, "set count");
  return cfg;
}

ExprRef setIndexExpr(const ExprRef& sigma, const CacheConfig& cfg) {
  ExprRef shifted = mkBinop(Op::LShr, sigma, mkConst(64, cfg.lineLog2));
  return mkBinop(Op::And, shifted, mkConst(64, cfg.numSets() - 1));
}

ExprRef tagExpr(const ExprRef& sigma, const CacheConfig& cfg) {
  return mkBinop(Op::LShr, sigma, mkConst(64, cfg.lineLog2 + cfg.setsLog2));
}

// ---------------------------------------------------------------------------
// Residency formula

namespace {

// "Different line" predicate between two events.
ExprRef lineDiffers(const ExprRef& setA, const ExprRef& tagA, const ExprRef& setB,
                    const ExprRef& tagB) {
  return mkBinop(Op::Or, mkBinop(Op::Ne, setA, setB), mkBinop(Op::Ne, tagA, tagB));
}

// Eviction-pressure indicator for symbolic event i over events[0, end):
// counts later normal accesses that (a) conflict with i's set under a
// different tag, (b) are the last access to their own line, and (c) are not
// followed by a reload of i's line. Fewer than `assoc` such survivors means
// event i's line can still be cached.
ExprRef specIndicator(const std::vector<TraceEvent>& events,
                      const std::vector<ExprRef>& setE, const std::vector<ExprRef>& tagE,
                      size_t i, size_t end, const CacheConfig& cfg) {
  // suffix of "i's line untouched after j": rel[j] = AND_{k in (j,end)} diff(i,k)
  std::vector<ExprRef> rel(end + 1);
  rel[end] = mkTrue();
  for (size_t j = end; j > i; --j)
    rel[j - 1] =
        mkBinop(Op::And, rel[j], lineDiffers(setE[i], tagE[i], setE[j - 1], tagE[j - 1]));

  ExprRef sum = mkConst(16, 0);
  for (size_t j = i + 1; j < end; ++j) {
    if (events[j].symbolic) continue;
    ExprRef cnf = mkBinop(Op::And, mkBinop(Op::Eq, setE[i], setE[j]),
                          mkBinop(Op::Ne, tagE[i], tagE[j]));
    ExprRef unq = mkTrue();
    for (size_t k = j + 1; k < end; ++k) {
      if (events[k].symbolic) continue;
      unq = mkBinop(Op::And, unq, lineDiffers(setE[j], tagE[j], setE[k], tagE[k]));
    }
    ExprRef c = mkBinop(Op::And, mkBinop(Op::And, cnf, unq), rel[j + 1]);
    sum = mkBinop(Op::Add, sum, mkZExt(c, 16));
  }
  return mkBinop(Op::Ult, sum, mkConst(16, cfg.assoc));
}

void cacheSetTag(const CacheTrace& trace, const CacheConfig& cfg,
                 std::vector<ExprRef>& setE, std::vector<ExprRef>& tagE) {
  setE.reserve(trace.events.size());
  tagE.reserve(trace.events.size());
  for (auto& e : trace.events) {
    setE.push_back(setIndexExpr(e.sigma, cfg));
    tagE.push_back(tagExpr(e.sigma, cfg));
  }
}

} // namespace

GammaSpectre buildGammaSpectre(const CacheTrace& trace, const CacheConfig& cfg) {
  std::vector<ExprRef> setE, tagE;
  cacheSetTag(trace, cfg, setE, tagE);

  GammaSpectre out;
  out.any = mkFalse();
  for (size_t i = 0; i < trace.events.size(); ++i) {
    if (!trace.events[i].symbolic) continue;
    ExprRef spec = specIndicator(trace.events, setE, tagE, i, trace.events.size(), cfg);
    out.perEvent.push_back({i, spec});
    out.any = mkBinop(Op::Or, out.any, spec);
  }
  if (out.perEvent.empty()) throw CacheModelError("no symbolic accesses in trace");
  return out;
}

ResidencyVerdict checkResidency(const CacheTrace& trace, const CacheConfig& cfg,
                                Attacker attacker, const Solver& solver,
                                const MayCacheResult* prefilter) {
  std::vector<ExprRef> setE, tagE;
  cacheSetTag(trace, cfg, setE, tagE);
  size_t n = trace.events.size();

  ResidencyVerdict out;
  out.attacker = attacker;
  for (size_t i = 0; i < n; ++i) {
    if (!trace.events[i].symbolic) continue;
    EventVerdict v;
    v.eventIndex = i;
    v.residency = Residency::DefinitelyEvicted;
    v.observationIndex = n;
    if (prefilter && attacker == Attacker::Access && !prefilter->isResident(i)) {
      v.note = "evicted by may-cache filter";
      out.events.push_back(std::move(v));
      continue;
    }

    std::vector<size_t> cuts;
    if (attacker == Attacker::Access) {
      cuts.push_back(n);
    } else {
      for (size_t end = i + 1; end <= n; ++end) cuts.push_back(end);
    }
    for (size_t end : cuts) {
      Constraint q = trace.pi;
      try {
        q.add(specIndicator(trace.events, setE, tagE, i, end, cfg));
        SolverResult r = solver.check(q);
        if (r.verdict == Verdict::Sat) {
          v.residency = Residency::MayRemain;
          v.witness = r.model;
          v.observationIndex = end;
          break;
        }
        if (r.verdict == Verdict::Unknown) {
          v.residency = Residency::Unknown;
          v.observationIndex = end;
          v.note = r.note.empty() ? "solver answered unknown" : r.note;
          break;
        }
      } catch (const SolverBudgetError& e) {
        v.residency = Residency::Unknown;
        v.observationIndex = end;
        v.note = e.what();
        break;
      }
    }
    out.events.push_back(std::move(v));
  }
  if (out.events.empty()) throw CacheModelError("no symbolic accesses in trace");
  return out;
}

// ---------------------------------------------------------------------------
// May-cache filter

bool MayCacheResult::isResident(size_t eventIndex) const {
  return std::find(resident.begin(), resident.end(), eventIndex) != resident.end();
}

namespace {

// Which sets can `sigma` reach under pi? Enumerates every assignment of the
// involved symbols; oversized queries degrade to "all sets" (sound).
std::vector<bool> feasibleSets(const ExprRef& sigma, const Constraint& pi,
                               const CacheConfig& cfg, const Solver* solver) {
  uint64_t nsets = cfg.numSets();
  std::vector<bool> all(nsets, true);
  ExprRef setIdx = setIndexExpr(sigma, cfg);
  if (setIdx->isConst()) {
    std::vector<bool> one(nsets, false);
    one[setIdx->value] = true;
    return one;
  }
  if (!solver) return all;

  std::vector<uint32_t> syms;
  collectSymbols(setIdx, syms);
  for (auto& t : pi.terms()) collectSymbols(t, syms);
  std::sort(syms.begin(), syms.end());
  syms.erase(std::unique(syms.begin(), syms.end()), syms.end());

  ModelEnumerator en(syms);
  if (en.totalBits() > solver->options().budgetBits) return all;

  std::vector<bool> feas(nsets, false);
  Evaluator ev;
  Model m;
  while (en.next(m)) {
    ev.newModel();
    bool ok = true;
    for (auto& t : pi.terms()) {
      if (!ev.eval(t, m)) {
        ok = false;
        break;
      }
    }
    if (ok) feas[ev.eval(setIdx, m)] = true;
  }
  return feas;
}

} // namespace

MayCacheResult mayCacheFilter(const CacheTrace& trace, const CacheConfig& cfg,
                              const Solver* solver) {
  uint64_t nsets = cfg.numSets();
  MayCacheResult out;
  out.state.lines.resize(nsets);
  out.state.virt.resize(nsets);

  for (size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& e = trace.events[i];
    if (e.symbolic) {
      std::vector<bool> feas = feasibleSets(e.sigma, trace.pi, cfg, solver);
      for (uint64_t s = 0; s < nsets; ++s)
        if (feas[s]) out.state.virt[s].push_back({i, cfg.assoc});
      continue;
    }
    // Normal accesses with symbolic addresses cannot prove a miss in any
    // particular set; skipping them only over-approximates residency.
    if (!e.sigma->isConst()) continue;

    uint64_t block = e.sigma->value >> cfg.lineLog2;
    uint64_t s = block & (nsets - 1);
    auto& line = out.state.lines[s];
    auto it = std::find(line.begin(), line.end(), block);
    if (it != line.end()) {
      line.erase(it);
      line.insert(line.begin(), block);
      continue;
    }
    // miss: insert MRU, evict LRU when full, age the virtual entries
    line.insert(line.begin(), block);
    if (line.size() > cfg.assoc) line.pop_back();
    auto& v = out.state.virt[s];
    for (auto& ve : v) {
      // a miss on the very block a virtual entry stands for is a reload, not
      // eviction pressure against it
      const ExprRef& vs = trace.events[ve.eventIndex].sigma;
      if (vs->isConst() && (vs->value >> cfg.lineLog2) == block)
        ve.life = cfg.assoc;
      else
        --ve.life;
    }
    v.erase(std::remove_if(v.begin(), v.end(),
                           [](const VirtualEntry& ve) { return ve.life == 0; }),
            v.end());
    // a reload also revives an entry that already aged out: the block is back
    // in the cache, so the earlier eviction proof is void
    for (size_t j = 0; j < i; ++j) {
      const TraceEvent& pe = trace.events[j];
      if (!pe.symbolic || !pe.sigma->isConst()) continue;
      if ((pe.sigma->value >> cfg.lineLog2) != block) continue;
      bool present = false;
      for (auto& ve : v) present |= ve.eventIndex == j;
      if (!present) v.push_back({j, cfg.assoc});
    }
  }

  for (auto& v : out.state.virt)
    for (auto& ve : v)
      if (!std::count(out.resident.begin(), out.resident.end(), ve.eventIndex))
        out.resident.push_back(ve.eventIndex);
  std::sort(out.resident.begin(), out.resident.end());
  return out;
}

// ---------------------------------------------------------------------------
// Concrete LRU

LruSim::LruSim(const CacheConfig& cfg) : cfg_(cfg) { sets_.resize(cfg.numSets()); }

bool LruSim::access(uint64_t addr) {
  uint64_t block = addr >> cfg_.lineLog2;
  auto& line = sets_[block & (cfg_.numSets() - 1)];
  auto it = std::find(line.begin(), line.end(), block);
  if (it != line.end()) {
    line.erase(it);
    line.insert(line.begin(), block);
    return true;
  }
  line.insert(line.begin(), block);
  if (line.size() > cfg_.assoc) line.pop_back();
  return false;
}

bool LruSim::resident(uint64_t addr) const {
  uint64_t block = addr >> cfg_.lineLog2;
  auto& line = sets_[block & (cfg_.numSets() - 1)];
  return std::find(line.begin(), line.end(), block) != line.end();
}

LruResult concreteLruSimulate(const std::vector<uint64_t>& addrs, const CacheConfig& cfg) {
  LruSim sim(cfg);
  LruResult r;
  for (uint64_t a : addrs) r.hits.push_back(sim.access(a));
  r.sets = sim.sets();
  return r;
}

// ---------------------------------------------------------------------------
// Standalone trace files

namespace {

struct TraceParser {
  std::map<std::string, ExprRef> syms;  // declared symbols
  std::map<std::string, ExprRef> exprs; // named expressions
  std::map<std::string, ExprRef> pis;   // named 1-bit constraints
  int line = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw CacheModelError("trace line " + std::to_string(line) + ": " + msg);
  }

  static std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == '#') break;
      if (c == '(' || c == ')') {
        if (!cur.empty()) out.push_back(cur), cur.clear();
        out.push_back(std::string(1, c));
      } else if (isspace(static_cast<unsigned char>(c))) {
        if (!cur.empty()) out.push_back(cur), cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  static bool isNumber(const std::string& t) {
    return !t.empty() && (isdigit(static_cast<unsigned char>(t[0])));
  }
  uint64_t parseNumber(const std::string& t) const {
    try {
      return std::stoull(t, nullptr, 0);
    } catch (...) {
      fail("bad number '" + t + "'");
    }
  }

  ExprRef parseSexpr(const std::vector<std::string>& toks, size_t& pos) {
    if (pos >= toks.size()) fail("unexpected end of expression");
    const std::string& t = toks[pos];
    if (t != "(") {
      ++pos;
      if (isNumber(t)) return mkConst(64, parseNumber(t));
      if (auto it = exprs.find(t); it != exprs.end()) return it->second;
      if (auto it = syms.find(t); it != syms.end()) return it->second;
      fail("unknown name '" + t + "'");
    }
    ++pos; // (
    if (pos >= toks.size()) fail("unterminated expression");
    std::string head = toks[pos++];
    ExprRef result;
    if (head == "const") {
      uint64_t w = parseNumber(toks.at(pos++));
      uint64_t v = parseNumber(toks.at(pos++));
      result = mkConst(unsigned(w), v);
    } else if (head == "sym") {
      std::string name = toks.at(pos++);
      auto it = syms.find(name);
      if (it == syms.end()) fail("undeclared symbol '" + name + "'");
      result = it->second;
    } else if (head == "zext") {
      uint64_t w = parseNumber(toks.at(pos++));
      result = mkZExt(parseSexpr(toks, pos), unsigned(w));
    } else if (head == "not") {
      result = mkNot1(parseSexpr(toks, pos));
    } else if (head == "select") {
      ExprRef c = parseSexpr(toks, pos);
      ExprRef a = parseSexpr(toks, pos);
      ExprRef b = parseSexpr(toks, pos);
      result = mkSelect(c, a, b);
    } else {
      static const std::map<std::string, Op> ops = {
          {"add", Op::Add}, {"sub", Op::Sub}, {"mul", Op::Mul}, {"and", Op::And},
          {"or", Op::Or},   {"xor", Op::Xor}, {"shl", Op::Shl}, {"lshr", Op::LShr},
          {"eq", Op::Eq},   {"ne", Op::Ne},   {"ult", Op::Ult}, {"ule", Op::Ule},
          {"slt", Op::Slt}, {"sle", Op::Sle}};
      auto it = ops.find(head);
      if (it == ops.end()) fail("unknown operator '" + head + "'");
      ExprRef a = parseSexpr(toks, pos);
      ExprRef b = parseSexpr(toks, pos);
      result = mkBinop(it->second, a, b);
    }
    if (pos >= toks.size() || toks[pos] != ")") fail("expected ')'");
    ++pos;
    return result;
  }

  ExprRef parseWholeSexpr(const std::vector<std::string>& toks, size_t pos) {
    ExprRef e = parseSexpr(toks, pos);
    if (pos != toks.size()) fail("trailing tokens after expression");
    return e;
  }
};

} // namespace

CacheTrace parseTraceFile(const std::string& text) {
  TraceParser P;
  CacheTrace trace;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++P.line;
    std::vector<std::string> toks = TraceParser::tokenize(raw);
    if (toks.empty()) continue;
    const std::string& kw = toks[0];

    if (kw == "sym") {
      if (toks.size() < 3) P.fail("usage: sym NAME WIDTH [user] [secret]");
      bool user = false, secret = false;
      for (size_t i = 3; i < toks.size(); ++i) {
        if (toks[i] == "user")
          user = true;
        else if (toks[i] == "secret")
          secret = true;
        else
          P.fail("unknown attribute '" + toks[i] + "'");
      }
      if (P.syms.count(toks[1])) P.fail("duplicate symbol '" + toks[1] + "'");
      try {
        P.syms[toks[1]] =
            mkSymbol(toks[1], unsigned(P.parseNumber(toks[2])), user, secret, "trace");
      } catch (const WidthError& e) {
        P.fail(e.what());
      }
      continue;
    }
    if (kw == "expr" || kw == "pi") {
      if (toks.size() < 4 || toks[2] != "=") P.fail("usage: " + kw + " NAME = (expr)");
      size_t pos = 3;
      ExprRef e = P.parseSexpr(toks, pos);
      if (pos != toks.size()) P.fail("trailing tokens");
      auto& table = (kw == "expr") ? P.exprs : P.pis;
      if (table.count(toks[1])) P.fail("duplicate name '" + toks[1] + "'");
      if (kw == "pi") {
        if (e->width != 1) P.fail("pi expression must be 1 bit wide");
        trace.pi.add(e);
      }
      table[toks[1]] = e;
      continue;
    }
    if (kw == "S" || kw == "N") {
      if (toks.size() < 3) P.fail("usage: S|N load|store ADDR [@PI]");
      TraceEvent ev;
      ev.symbolic = (kw == "S");
      if (toks[1] == "store")
        ev.isStore = true;
      else if (toks[1] != "load")
        P.fail("expected 'load' or 'store'");
      size_t pos = 2;
      ExprRef addr;
      if (TraceParser::isNumber(toks[2]) && toks[2] != "(") {
        addr = mkConst(64, P.parseNumber(toks[2]));
        pos = 3;
      } else if (toks[2] == "(") {
        addr = P.parseSexpr(toks, pos);
      } else {
        auto it = P.exprs.find(toks[2]);
        if (it == P.exprs.end()) P.fail("unknown expression '" + toks[2] + "'");
        addr = it->second;
        pos = 3;
      }
      if (addr->width != 64) addr = mkZExt(addr, 64);
      ev.sigma = addr;
      if (pos < toks.size()) {
        std::string ref = toks[pos];
        if (ref.size() < 2 || ref[0] != '@') P.fail("expected @PI reference");
        if (!P.pis.count(ref.substr(1)))
          P.fail("unknown path condition '" + ref.substr(1) + "'");
        ++pos;
      }
      if (pos != toks.size()) P.fail("trailing tokens after event");
      trace.events.push_back(std::move(ev));
      continue;
    }
    P.fail("unknown directive '" + kw + "'");
  }
  return trace;
}

} // namespace specsym
