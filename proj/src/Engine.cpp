//===-- Engine.cpp — symbolic execution over SpecIR -------------------------===//
#include "specsym/Engine.h"

#include <algorithm>
#include <chrono>
#include <random>

namespace specsym {

const char* findingKindName(FindingKind k) {
  switch (k) {
  case FindingKind::VB: return "VB";
  case FindingKind::UC_VB: return "UC_VB";
  case FindingKind::RS: return "RS";
  case FindingKind::LS: return "LS";
  }
  return "?";
}

size_t AnalysisResult::count(FindingKind k) const {
  size_t n = 0;
  for (auto& f : findings)
    if (f.kind == k) ++n;
  return n;
}

std::set<std::string> AnalysisResult::uniqueSpecEventLocs() const {
  std::set<std::string> locs;
  for (auto& [root, gammas] : omega)
    for (auto& g : gammas)
      for (auto& e : g.events) locs.insert(e.loc);
  return locs;
}

namespace {

constexpr size_t kMaxPathRecords = 4096;
constexpr size_t kMaxCompletedTraces = 16384;

struct Runner {
  const Program& prog;
  const Function& fn;
  EngineConfig cfg;
  Solver solver;
  AnalysisResult res;
  std::vector<std::shared_ptr<ExecState>> worklist;
  std::mt19937_64 rng;
  std::set<std::pair<int, std::string>> seenFindings;
  std::set<std::string> seenDiags;
  std::chrono::steady_clock::time_point t0;
  bool stop = false;

  Runner(const Program& p, EngineConfig c)
      : prog(p), fn(p.entryFunction()), cfg(c), solver(c.solver),
        rng(c.seed ? c.seed : 0x9e3779b97f4a7c15ull) {}

  void diag(const std::string& msg) {
    if (seenDiags.insert(msg).second) res.diagnostics.push_back(msg);
  }

  const Instruction& fetch(const ExecState& st) const {
    return fn.blocks[st.blockIdx].instrs[st.instrIdx];
  }

  // --- solver wrappers ------------------------------------------------------

  // Feasibility with a conservative answer on budget overruns and unknowns.
  bool maySat(const Constraint& c, Model* witness = nullptr) {
    try {
      SolverResult r = solver.check(c);
      if (r.verdict == Verdict::Unsat) return false;
      if (r.verdict == Verdict::Unknown)
        diag("solver answered unknown; treating query as satisfiable");
      if (witness) *witness = r.model;
      return true;
    } catch (const SolverBudgetError& e) {
      diag(std::string("solver budget exceeded; treating query as satisfiable (") +
           e.what() + ")");
      return true;
    }
  }

  // --- findings -------------------------------------------------------------

  void addFinding(FindingKind kind, const Instruction& in, const ExecState& st) {
    std::string loc = in.loc.str();
    if (!seenFindings.insert({int(kind), loc}).second) return;
    Finding f;
    f.kind = kind;
    f.loc = loc;
    f.instrId = in.id;
    if (st.frame) {
      f.rootBranchId = st.frame->rootBranchId;
      f.rootLoc = st.frame->rootLoc;
    }
    maySat(st.pi, &f.witness);
    res.findings.push_back(std::move(f));
  }

  // --- event plumbing -------------------------------------------------------

  void appendEvent(ExecState& st, MemoryEvent ev) {
    ev.observationIndex = st.obsIndex++;
    res.stats.memEvents++;
    if (!ev.sigma->isConst()) res.stats.symbolicAddrEvents++;
    if (st.frame) {
      if (ev.secretDependent && !ev.isStore) st.frame->gamma.push_back(ev);
    } else {
      for (auto& g : st.liveGammas) g.events.push_back(ev);
    }
    st.eventLog.push_back(std::move(ev));
  }

  // --- state lifecycle ------------------------------------------------------

  void terminateSpeculative(ExecState& st) {
    res.stats.specPaths++;
    res.stats.specInstrTotal += st.frame->windowTotal;
    if (st.frame->gamma.empty()) return; // nothing risky recorded: prune
    GammaRecord rec;
    rec.rootBranchId = st.frame->rootBranchId;
    rec.events = st.frame->gamma;
    rec.pi = st.pi;
    auto& bucket = *st.frame->bucket;
    if (bucket.gammas.size() < cfg.gammaCap) {
      bucket.gammas.push_back(rec);
    } else if (!bucket.overflowed) {
      bucket.overflowed = true;
      diag("speculative trace cap reached at branch " + st.frame->rootLoc);
    }
    auto& om = res.omega[rec.rootBranchId];
    if (om.size() < cfg.gammaCap) om.push_back(std::move(rec));
  }

  void finalizeNormal(ExecState& st) {
    res.stats.paths++;
    if (res.paths.size() < kMaxPathRecords)
      res.paths.push_back({st.eventLog, st.pi});
    for (auto& g : st.liveGammas) {
      if (res.completedTraces.size() >= kMaxCompletedTraces) {
        diag("completed trace cap reached");
        break;
      }
      g.pi = st.pi;
      res.completedTraces.push_back(g);
    }
  }

  void push(std::shared_ptr<ExecState> st) { worklist.push_back(std::move(st)); }

  std::shared_ptr<ExecState> selectNext() {
    std::vector<size_t> cand;
    for (size_t i = 0; i < worklist.size(); ++i)
      if (worklist[i]->speculative()) cand.push_back(i);
    if (cand.empty())
      for (size_t i = 0; i < worklist.size(); ++i) cand.push_back(i);

    size_t pick;
    switch (cfg.search) {
    case EngineConfig::Search::BFS: pick = cand.front(); break;
    case EngineConfig::Search::Random: pick = cand[rng() % cand.size()]; break;
    case EngineConfig::Search::DFS:
    default: pick = cand.back(); break;
    }
    auto st = std::move(worklist[pick]);
    worklist.erase(worklist.begin() + long(pick));
    return st;
  }

  // --- memory ---------------------------------------------------------------

  ExprRef addressOf(const GlobalObject& g, const ExprRef& idx64) {
    ExprRef scaled = mkBinop(Op::Mul, idx64, mkConst(64, g.elemBytes()));
    return mkBinop(Op::Add, mkConst(64, g.base), scaled);
  }

  ExprRef widen(const ExprRef& e) { return e->width == 64 ? e : mkZExt(e, 64); }

  // Structural upper bound on an index; avoids solver calls (and their
  // budget) for accesses a width argument already proves in bounds.
  static bool upperBound(const ExprRef& e, uint64_t& ub) {
    if (e->isConst()) {
      ub = e->value;
      return true;
    }
    if (e->op == Op::ZExt || e->isSymbol() || isBinaryOp(e->op)) {
      unsigned w = e->op == Op::ZExt ? e->kids[0]->width : e->width;
      if (w >= 64) return false;
      ub = (1ull << w) - 1;
      return true;
    }
    return false;
  }

  bool mayBeOutOfBounds(ExecState& st, const GlobalObject& g, const ExprRef& idx64) {
    uint64_t ub;
    if (upperBound(idx64, ub) && ub < g.length) return false;
    Constraint oob = st.pi;
    oob.add(mkBinop(Op::Ule, mkConst(64, g.length), idx64));
    return maySat(oob);
  }

  void doLoad(ExecState& st, const Instruction& in) {
    const GlobalObject& g = *prog.findGlobal(in.global);
    ExprRef idx64 = widen(st.regs.at(in.a));
    ExprRef sigma = addressOf(g, idx64);
    bool secretDep = taintIntersects(sigma->taint, st.sec);

    MemoryEvent ev;
    ev.instrId = in.id;
    ev.loc = in.loc.str();
    ev.piSnapshot = st.pi;
    ev.sigma = sigma;
    ev.isStore = false;
    ev.phase = st.frame ? Phase::Speculative : Phase::Normal;
    ev.secretDependent = secretDep;
    ev.object = g.name;
    appendEvent(st, ev);

    if (st.frame && secretDep) addFinding(FindingKind::LS, in, st);

    bool mayOOB = mayBeOutOfBounds(st, g, idx64);

    int o = st.occ[in.id]++;
    auto tag = [&](const char* kind) {
      return std::string(kind) + ":" + std::to_string(in.id) + ":" + std::to_string(o);
    };

    ExprRef value;
    if (mayOOB) {
      if (st.frame) {
        // speculative out-of-bounds read: the fetched value is a potential
        // secret; register it so downstream address taint is tracked
        value = mkSymbol(in.dest, g.elemWidth, false, true, tag("secret"));
        st.sec.insert(std::lower_bound(st.sec.begin(), st.sec.end(), value->symbolId),
                      value->symbolId);
        addFinding(FindingKind::RS, in, st);
      } else {
        diag("out-of-bounds load on a normal path at " + in.loc.str());
        value = mkSymbol(in.dest, g.elemWidth, idx64->userDerived, false, tag("oob"));
      }
    } else if (idx64->isConst()) {
      auto key = std::make_pair(g.name, idx64->value);
      auto it = st.mem.find(key);
      if (it != st.mem.end()) {
        value = it->second;
      } else {
        value = mkSymbol(g.name + "_" + std::to_string(idx64->value), g.elemWidth,
                         g.user, g.secret,
                         "cell:" + g.name + ":" + std::to_string(idx64->value));
        st.mem[key] = value;
        if (g.secret)
          st.sec.insert(std::lower_bound(st.sec.begin(), st.sec.end(), value->symbolId),
                        value->symbolId);
      }
    } else {
      // symbolic in-bounds index: a fresh value carrying the address's taint
      // (the read result depends on whatever the index depends on)
      value = mkSymbol(in.dest, g.elemWidth, g.user || idx64->userDerived, g.secret,
                       tag("load"), idx64->taint);
      if (g.secret)
        st.sec.insert(std::lower_bound(st.sec.begin(), st.sec.end(), value->symbolId),
                      value->symbolId);
    }
    st.regs[in.dest] = value;
  }

  // Returns false when the state terminated (speculative store fault).
  bool doStore(ExecState& st, const Instruction& in) {
    const GlobalObject& g = *prog.findGlobal(in.global);
    ExprRef idx64 = widen(st.regs.at(in.a));
    ExprRef val = st.regs.at(in.b);
    ExprRef sigma = addressOf(g, idx64);
    bool secretDep = taintIntersects(sigma->taint, st.sec);

    MemoryEvent ev;
    ev.instrId = in.id;
    ev.loc = in.loc.str();
    ev.piSnapshot = st.pi;
    ev.sigma = sigma;
    ev.isStore = true;
    ev.phase = st.frame ? Phase::Speculative : Phase::Normal;
    ev.secretDependent = secretDep;
    ev.object = g.name;
    appendEvent(st, ev);

    if (st.frame && secretDep) addFinding(FindingKind::LS, in, st);

    bool mayOOB = mayBeOutOfBounds(st, g, idx64);

    if (mayOOB && st.frame) {
      // faulting speculative store: the frame is squashed on the spot
      terminateSpeculative(st);
      return false;
    }
    if (idx64->isConst()) {
      if (idx64->value < g.length)
        st.mem[{g.name, idx64->value}] = val;
      else
        diag("out-of-bounds store on a normal path at " + in.loc.str());
    } else {
      if (mayOOB) diag("possibly out-of-bounds store on a normal path at " + in.loc.str());
      // weak update: any cell of the object may have changed
      auto it = st.mem.lower_bound({g.name, 0});
      while (it != st.mem.end() && it->first.first == g.name) it = st.mem.erase(it);
    }
    return true;
  }

  // --- branches ---------------------------------------------------------------

  void expandNormalBranch(std::shared_ptr<ExecState>& st, const Instruction& in) {
    ExprRef phi = st->regs.at(in.a);
    res.branchLoc[in.id] = in.loc.str();
    res.branchUserCond[in.id] = phi->userDerived;

    struct Leg {
      ExprRef cond;
      const std::string* taken;    // architecturally correct target
      const std::string* mispred;  // speculatively executed target
    };
    Leg legs[2] = {{phi, &in.label1, &in.label2}, {mkNot1(phi), &in.label2, &in.label1}};

    for (auto& leg : legs) {
      Constraint pc = st->pi;
      pc.add(leg.cond);
      if (!maySat(pc)) continue;

      auto normal = std::make_shared<ExecState>(*st);
      normal->pi = pc;
      normal->blockIdx = fn.blockIndex.at(*leg.taken);
      normal->instrIdx = 0;
      normal->depth = st->depth + 1;

      if (cfg.sew > 0) {
        auto bucket = std::make_shared<GammaBucket>();
        bucket->rootBranchId = in.id;
        normal->pendingBuckets.push_back(bucket);

        auto spec = std::make_shared<ExecState>(*st);
        spec->pi = pc;
        spec->blockIdx = fn.blockIndex.at(*leg.mispred);
        spec->instrIdx = 0;
        spec->depth = st->depth + 1;
        spec->pendingBuckets.clear();
        spec->liveGammas.clear();
        spec->eventLog.clear();
        SpeculationFrame frame;
        frame.rootBranchId = in.id;
        frame.rootLoc = in.loc.str();
        frame.bucket = bucket;
        spec->frame = frame;
        push(std::move(spec));
      }
      push(std::move(normal));
    }
  }

  void expandSpeculativeBranch(std::shared_ptr<ExecState>& st, const Instruction& in) {
    ExprRef phi = st->regs.at(in.a);
    ExprRef conds[2] = {phi, mkNot1(phi)};
    const std::string* targets[2] = {&in.label1, &in.label2};

    bool anyLeg = false;
    for (ExprRef& cond : conds) {
      Constraint pc = st->pi;
      pc.add(cond);
      if (!maySat(pc)) continue;
      // within the window both continuations are explored: the predicted one
      // and the doubly mispredicted one
      for (const std::string* target : targets) {
        auto succ = std::make_shared<ExecState>(*st);
        succ->pi = pc;
        succ->blockIdx = fn.blockIndex.at(*target);
        succ->instrIdx = 0;
        succ->depth = st->depth + 1;
        succ->frame->nesting++;
        if (cfg.nestedWindowFresh) succ->frame->executed = 0;
        push(std::move(succ));
        anyLeg = true;
      }
    }
    if (!anyLeg) terminateSpeculative(*st);
  }

  // --- the interpreter loop ---------------------------------------------------

  void step(std::shared_ptr<ExecState> st) {
    if (!st->frame) {
      for (auto& b : st->pendingBuckets)
        for (auto& g : b->gammas) st->liveGammas.push_back(g);
      st->pendingBuckets.clear();
      if (st->instrCount >= cfg.maxInstrPerPath) {
        diag("per-path instruction budget reached");
        finalizeNormal(*st);
        return;
      }
    } else if (st->frame->executed >= cfg.sew ||
               st->instrCount >= cfg.maxInstrPerPath) {
      // the instruction budget also stops fresh-window nesting from looping
      terminateSpeculative(*st);
      return;
    }

    const Instruction& in = fetch(*st);
    st->instrCount++;
    res.stats.instrTotal++;
    if (st->frame) {
      st->frame->executed++;
      st->frame->windowTotal++;
    }

    switch (in.opc) {
    case Opcode::Const:
      st->regs[in.dest] = mkConst(in.width, in.imm);
      break;
    case Opcode::SymbolicInput: {
      int o = st->occ[in.id]++;
      st->regs[in.dest] = mkSymbol(in.dest, in.width, in.userFlag, false,
                                   "input:" + std::to_string(in.id) + ":" +
                                       std::to_string(o));
      break;
    }
    case Opcode::Binop:
      st->regs[in.dest] = mkBinop(in.op, st->regs.at(in.a), st->regs.at(in.b));
      break;
    case Opcode::Select:
      st->regs[in.dest] =
          mkSelect(st->regs.at(in.a), st->regs.at(in.b), st->regs.at(in.c));
      break;
    case Opcode::Load:
      doLoad(*st, in);
      break;
    case Opcode::Store:
      if (!doStore(*st, in)) return;
      break;
    case Opcode::Jmp:
      st->blockIdx = fn.blockIndex.at(in.label1);
      st->instrIdx = 0;
      st->depth++;
      push(std::move(st));
      return;
    case Opcode::Fence:
      if (st->frame) {
        terminateSpeculative(*st);
        return;
      }
      break;
    case Opcode::Assume: {
      Constraint pc = st->pi;
      pc.add(st->regs.at(in.a));
      if (!maySat(pc)) return; // infeasible: silently dropped
      st->pi = pc;
      break;
    }
    case Opcode::Ret:
      if (st->frame)
        terminateSpeculative(*st);
      else
        finalizeNormal(*st);
      return;
    case Opcode::Br:
      if (st->frame)
        expandSpeculativeBranch(st, in);
      else
        expandNormalBranch(st, in);
      return;
    }
    st->instrIdx++;
    push(std::move(st));
  }

  AnalysisResult run() {
    t0 = std::chrono::steady_clock::now();
    auto init = std::make_shared<ExecState>();
    for (auto& [p, w] : fn.params)
      init->regs[p] = mkSymbol(p, w, false, false, "param");
    push(std::move(init));

    uint64_t iter = 0;
    while (!worklist.empty()) {
      if (res.stats.paths >= cfg.maxPaths) {
        diag("path budget reached; exploration stopped");
        break;
      }
      if (cfg.wallClockSec > 0 && (++iter & 0xff) == 0) {
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();
        if (secs > cfg.wallClockSec) {
          diag("wall-clock budget reached; exploration stopped");
          break;
        }
      }
      step(selectNext());
    }

    classify();
    res.stats.solverQueries = solver.stats().queries;
    res.stats.solverSeconds = solver.stats().totalSeconds;
    res.stats.wallSeconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::sort(res.findings.begin(), res.findings.end(),
              [](const Finding& a, const Finding& b) {
                if (a.kind != b.kind) return int(a.kind) < int(b.kind);
                return a.loc < b.loc;
              });
    return std::move(res);
  }

  void classify() {
    std::map<int, const Finding*> rsByRoot;
    for (auto& f : res.findings)
      if (f.kind == FindingKind::RS && f.rootBranchId >= 0 &&
          !rsByRoot.count(f.rootBranchId))
        rsByRoot[f.rootBranchId] = &f;

    std::vector<Finding> derived;
    for (auto& [root, rs] : rsByRoot) {
      Finding vb;
      vb.kind = FindingKind::VB;
      vb.loc = res.branchLoc.count(root) ? res.branchLoc[root] : rs->rootLoc;
      vb.instrId = root;
      vb.witness = rs->witness;
      if (res.branchUserCond.count(root) && res.branchUserCond[root]) {
        Finding uc = vb;
        uc.kind = FindingKind::UC_VB;
        derived.push_back(uc);
      }
      derived.push_back(std::move(vb));
    }
    for (auto& f : derived) {
      if (seenFindings.insert({int(f.kind), f.loc}).second)
        res.findings.push_back(std::move(f));
    }
  }
};

} // namespace

Executor::Executor(const Program& program, EngineConfig cfg)
    : prog_(program), cfg_(cfg) {}

AnalysisResult Executor::run() {
  Runner r(prog_, cfg_);
  return r.run();
}

} // namespace specsym
