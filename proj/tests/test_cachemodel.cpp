//===-- test_cachemodel.cpp — residency model, filter, LRU oracle tests -----===//
#include "doctest.h"
#include "oracle.h"
#include "specsym/CacheModel.h"

#include <random>
#include <set>

using namespace specsym;

namespace {

TraceEvent concrete(uint64_t addr, bool store = false) {
  TraceEvent e;
  e.sigma = mkConst(64, addr);
  e.symbolic = false;
  e.isStore = store;
  return e;
}

TraceEvent symbolicEv(ExprRef sigma) {
  TraceEvent e;
  e.sigma = std::move(sigma);
  e.symbolic = true;
  return e;
}

ExprRef lineAddr(const ExprRef& sym8) {
  return mkBinop(Op::Mul, mkZExt(sym8, 64), mkConst(64, 64));
}

} // namespace

TEST_CASE("set and tag extraction on concrete addresses") {
  CacheConfig cfg; // S=8, B=6
  ExprRef set = setIndexExpr(mkConst(64, 0x1040), cfg);
  ExprRef tag = tagExpr(mkConst(64, 0x1040), cfg);
  REQUIRE(set->isConst());
  CHECK(set->value == 65);
  REQUIRE(tag->isConst());
  CHECK(tag->value == 0);

  CHECK(setIndexExpr(mkConst(64, 0), cfg)->isConst(0));
  CHECK(tagExpr(mkConst(64, 0), cfg)->isConst(0));

  ExprRef y = mkSymbol("y", 8, false, true, "test");
  ExprRef symSet = setIndexExpr(mkZExt(y, 64), cfg);
  CHECK(!symSet->isConst());
  Model m;
  m.set(y->symbolId, 0xC7);
  CHECK(evaluate(symSet, m) == 3); // 0xC7 >> 6
  CHECK(evaluate(tagExpr(mkZExt(y, 64), cfg), m) == 0);
}

TEST_CASE("fromSize decomposes standard configurations") {
  CacheConfig c = CacheConfig::fromSize(32768, 64, 2);
  CHECK(c.setsLog2 == 8);
  CHECK(c.lineLog2 == 6);
  CHECK(c.assoc == 2);
  CHECK(c.sizeBytes() == 32768);
  CacheConfig c8 = CacheConfig::fromSize(32768, 64, 8);
  CHECK(c8.numSets() == 64);
  CHECK_THROWS_AS((void)CacheConfig::fromSize(1000, 64, 2), CacheModelError);
  CHECK_THROWS_AS((void)CacheConfig::fromSize(32768, 48, 2), CacheModelError);
  CHECK_THROWS_AS((void)CacheConfig::fromSize(32768, 64, 0), CacheModelError);
}

TEST_CASE("no conflicting access leaves the secret possibly cached") {
  CacheConfig cfg{1, 6, 1}; // 2 sets, direct mapped
  ExprRef y = mkSymbol("y", 8, false, true, "test");
  CacheTrace t;
  t.pi.add(mkBinop(Op::Ult, y, mkConst(8, 64))); // block 0, set 0 only
  t.events.push_back(symbolicEv(mkZExt(y, 64)));
  t.events.push_back(concrete(0x40)); // set 1: never conflicts
  GammaSpectre g = buildGammaSpectre(t, cfg);
  Solver s;
  Constraint q = t.pi;
  q.add(g.any);
  CHECK(s.check(q).verdict == Verdict::Sat);
}

TEST_CASE("forced conflict with associativity 1 always evicts") {
  CacheConfig cfg{1, 6, 1};
  ExprRef y = mkSymbol("y", 8, false, true, "test");
  CacheTrace t;
  t.pi.add(mkBinop(Op::Ult, y, mkConst(8, 64))); // set 0, tag 0
  t.events.push_back(symbolicEv(mkZExt(y, 64)));
  t.events.push_back(concrete(0x80)); // set 0, tag 1: certain conflict
  GammaSpectre g = buildGammaSpectre(t, cfg);
  Solver s;
  Constraint q = t.pi;
  q.add(g.any);
  CHECK(s.check(q).verdict == Verdict::Unsat);
}

TEST_CASE("two-event gadget formula matches per-model simulation") {
  // secret-dependent probe then one fixed normal access, direct mapped;
  // for every value of the leaked byte the formula verdict must equal the
  // concrete simulator's residency of the probe block
  CacheConfig cfg{2, 6, 1}; // 4 sets
  ExprRef y = mkSymbol("y", 8, false, true, "test");
  CacheTrace t;
  t.events.push_back(symbolicEv(lineAddr(y)));
  t.events.push_back(concrete(0x40)); // block 1, set 1
  GammaSpectre g = buildGammaSpectre(t, cfg);
  REQUIRE(g.perEvent.size() == 1);
  for (uint64_t v = 0; v < 256; ++v) {
    Model m;
    m.set(y->symbolId, v);
    uint64_t indicator = evaluate(g.perEvent[0].second, m);
    CHECK((indicator == 0 || indicator == 1)); // never floats
    LruSim sim(cfg);
    uint64_t sAddr = v * 64;
    sim.access(sAddr);
    sim.access(0x40);
    CHECK(indicator == (sim.resident(sAddr) ? 1u : 0u));
  }
}

TEST_CASE("empty symbolic set is a defined error") {
  CacheConfig cfg;
  CacheTrace t;
  t.events.push_back(concrete(0x0));
  CHECK_THROWS_AS((void)buildGammaSpectre(t, cfg), CacheModelError);
  Solver s;
  CHECK_THROWS_AS((void)checkResidency(t, cfg, Attacker::Access, s), CacheModelError);
}

TEST_CASE("concrete LRU examples") {
  CacheConfig one{0, 6, 2}; // single set, 2 ways
  LruResult r = concreteLruSimulate({0x00, 0x40, 0x80}, one);
  REQUIRE(r.sets.size() == 1);
  CHECK(r.sets[0] == std::vector<uint64_t>{2, 1}); // a evicted
  CHECK(r.hits == std::vector<bool>{false, false, false});

  r = concreteLruSimulate({0x00, 0x40, 0x00, 0x80}, one);
  CHECK(r.sets[0] == std::vector<uint64_t>{2, 0}); // b evicted after promotion
  CHECK(r.hits == std::vector<bool>{false, false, true, false});
}

TEST_CASE("concrete LRU capacity") {
  CacheConfig cfg = CacheConfig::fromSize(32768, 64, 2); // 512 lines total
  LruSim sim(cfg);
  for (uint64_t i = 0; i < 512; ++i) CHECK(!sim.access(i * 64));
  for (uint64_t i = 0; i < 512; ++i) CHECK(sim.resident(i * 64));
  CHECK(!sim.access(512 * 64)); // 513th distinct line
  CHECK(!sim.resident(0));      // first-touched way of set 0 evicted
}

TEST_CASE("may-cache filter: seven-phase walkthrough") {
  // 2 sets, 2 ways; c1,c2 fill set 0 and c3 set 1, s1 lands in both virtual
  // lines, c4 ages set 1, s2 lands in both, then c5..c7 age everything.
  CacheConfig cfg{1, 6, 2};
  ExprRef y1 = mkSymbol("p1", 8, false, true, "test");
  ExprRef y2 = mkSymbol("p2", 8, false, true, "test");
  CacheTrace t;
  t.events.push_back(concrete(0x000)); // c1: block 0, set 0
  t.events.push_back(concrete(0x080)); // c2: block 2, set 0
  t.events.push_back(concrete(0x040)); // c3: block 1, set 1
  t.events.push_back(symbolicEv(lineAddr(y1))); // s1, index 3
  t.events.push_back(concrete(0x0C0));          // c4: block 3, set 1
  t.events.push_back(symbolicEv(lineAddr(y2))); // s2, index 5
  t.events.push_back(concrete(0x100));          // c5: block 4, set 0
  t.events.push_back(concrete(0x180));          // c6: block 6, set 0
  t.events.push_back(concrete(0x140));          // c7: block 5, set 1

  Solver s;
  MayCacheResult r = mayCacheFilter(t, cfg, &s);
  // concrete survivors: c5,c6 in set 0 and c7,c4 in set 1 (MRU first)
  CHECK(r.state.lines[0] == std::vector<uint64_t>{6, 4});
  CHECK(r.state.lines[1] == std::vector<uint64_t>{5, 3});
  // set 0's virtual line drained completely
  CHECK(r.state.virt[0].empty());
  // exactly one symbolic survivor in set 1: the second insertion, one life
  // left (the first was aged out by c4 and c7)
  REQUIRE(r.state.virt[1].size() == 1);
  CHECK(r.state.virt[1][0].eventIndex == 5);
  CHECK(r.state.virt[1][0].life == 1);
  CHECK(r.resident == std::vector<size_t>{5});
  CHECK(!r.isResident(3));
  CHECK(r.isResident(5));
}

TEST_CASE("may-cache filter: enough misses in every feasible set remove the entry") {
  CacheConfig cfg{1, 6, 2};
  ExprRef y = mkSymbol("y", 8, false, true, "test");
  CacheTrace t;
  t.events.push_back(symbolicEv(lineAddr(y)));
  // two distinct misses per set
  t.events.push_back(concrete(0x000));
  t.events.push_back(concrete(0x080));
  t.events.push_back(concrete(0x040));
  t.events.push_back(concrete(0x0C0));
  Solver s;
  MayCacheResult r = mayCacheFilter(t, cfg, &s);
  CHECK(r.resident.empty());
}

TEST_CASE("may-cache filter: hits never age virtual entries") {
  CacheConfig cfg{1, 6, 2};
  ExprRef y = mkSymbol("y", 8, false, true, "test");
  CacheTrace t;
  t.events.push_back(concrete(0x000));
  t.events.push_back(symbolicEv(lineAddr(y)));
  for (int i = 0; i < 8; ++i) t.events.push_back(concrete(0x000)); // all hits
  Solver s;
  MayCacheResult r = mayCacheFilter(t, cfg, &s);
  CHECK(r.isResident(1));
  CHECK(r.state.virt[0].size() == 1);
  CHECK(r.state.virt[0][0].life == cfg.assoc);
}

TEST_CASE("may-cache filter: a reload of the tracked block restores its life") {
  CacheConfig cfg{1, 6, 2};
  CacheTrace t;
  TraceEvent s0 = concrete(0x000); // same block, but secret-dependent
  s0.symbolic = true;
  t.events.push_back(s0);
  t.events.push_back(concrete(0x080)); // miss, ages to 1
  t.events.push_back(concrete(0x000)); // reload of the tracked block itself
  t.events.push_back(concrete(0x100)); // miss, 2 -> 1
  Solver s;
  MayCacheResult r = mayCacheFilter(t, cfg, &s);
  REQUIRE(r.isResident(0));
  CHECK(r.state.virt[0][0].life == 1);
  // and the symbolic model agrees it may remain
  GammaSpectre g = buildGammaSpectre(t, cfg);
  Constraint q = t.pi;
  q.add(g.any);
  CHECK(s.check(q).verdict == Verdict::Sat);
}

TEST_CASE("may-cache feasibility narrows to the constrained sets") {
  CacheConfig cfg{2, 6, 1}; // 4 sets, direct mapped
  ExprRef y = mkSymbol("y", 8, false, true, "test");
  CacheTrace t;
  t.pi.add(mkBinop(Op::Ult, y, mkConst(8, 2))); // only sets 0 and 1 reachable
  t.events.push_back(symbolicEv(lineAddr(y)));
  Solver s;
  MayCacheResult r = mayCacheFilter(t, cfg, &s);
  CHECK(!r.state.virt[0].empty());
  CHECK(!r.state.virt[1].empty());
  CHECK(r.state.virt[2].empty());
  CHECK(r.state.virt[3].empty());
  // without a solver the fallback is every set (still sound)
  MayCacheResult all = mayCacheFilter(t, cfg, nullptr);
  for (int i = 0; i < 4; ++i) CHECK(!all.state.virt[i].empty());
}

TEST_CASE("access attacker verdicts carry witnesses; prefilter short-circuits") {
  CacheConfig cfg{1, 6, 1};
  ExprRef y = mkSymbol("y", 8, false, true, "test");
  CacheTrace t;
  t.pi.add(mkBinop(Op::Ult, y, mkConst(8, 2))); // blocks 0 or 1
  t.events.push_back(symbolicEv(lineAddr(y)));
  t.events.push_back(concrete(0x080)); // set 0 tag 1: conflicts only with y=0
  Solver s;
  ResidencyVerdict v = checkResidency(t, cfg, Attacker::Access, s);
  REQUIRE(v.events.size() == 1);
  CHECK(v.events[0].residency == Residency::MayRemain);
  // witness must actually avoid the conflict
  CHECK(evaluate(mkZExt(y, 64), v.events[0].witness) == 1);

  // a prefilter verdict of evicted is final for the access attacker
  MayCacheResult fake;
  fake.state.lines.resize(cfg.numSets());
  fake.state.virt.resize(cfg.numSets());
  ResidencyVerdict pv = checkResidency(t, cfg, Attacker::Access, s, &fake);
  CHECK(pv.events[0].residency == Residency::DefinitelyEvicted);
  // but the trace attacker ignores it (it only talks about the final state)
  ResidencyVerdict tv = checkResidency(t, cfg, Attacker::Trace, s, &fake);
  CHECK(tv.events[0].residency == Residency::MayRemain);
}

TEST_CASE("trace attacker sees the prefix even when the end state is clean") {
  CacheConfig cfg{1, 6, 1};
  CacheTrace t;
  TraceEvent s0 = concrete(0x000);
  s0.symbolic = true;
  t.events.push_back(s0);
  t.events.push_back(concrete(0x080)); // certain eviction by the end
  Solver s;
  ResidencyVerdict acc = checkResidency(t, cfg, Attacker::Access, s);
  CHECK(acc.events[0].residency == Residency::DefinitelyEvicted);
  ResidencyVerdict tr = checkResidency(t, cfg, Attacker::Trace, s);
  CHECK(tr.events[0].residency == Residency::MayRemain);
  CHECK(tr.events[0].observationIndex == 1); // right after the access itself
}

TEST_CASE("randomized single-secret traces: formula equals concrete LRU") {
  std::mt19937_64 rng(2024);
  Solver solver;
  int checked = 0;
  for (int iter = 0; iter < 400; ++iter) {
    unsigned assocs[] = {1, 2, 4, 8};
    CacheConfig cfg{2, 4, assocs[rng() % 4]}; // 4 sets, 16-byte lines
    size_t n = 4 + rng() % 16;
    size_t symAt = rng() % n;
    CacheTrace t;
    std::vector<uint64_t> addrs;
    for (size_t i = 0; i < n; ++i) {
      uint64_t addr = (rng() % 32) * 16; // 32 candidate lines
      bool store = (rng() % 4) == 0;
      TraceEvent e = concrete(addr, store);
      if (i == symAt) e.symbolic = true; // concrete address, secret flagged
      t.events.push_back(e);
      addrs.push_back(addr);
    }
    GammaSpectre g = buildGammaSpectre(t, cfg);
    REQUIRE(g.perEvent.size() == 1);
    Constraint q = t.pi;
    q.add(g.perEvent[0].second);
    bool formulaRemain = solver.check(q).verdict == Verdict::Sat;

    LruSim sim(cfg);
    for (uint64_t a : addrs) sim.access(a);
    bool lruRemain = sim.resident(addrs[symAt]);
    CHECK_MESSAGE(formulaRemain == lruRemain, "iter ", iter);
    ++checked;

    // filter soundness on the same trace
    MayCacheResult f = mayCacheFilter(t, cfg, &solver);
    if (!f.isResident(symAt)) CHECK_MESSAGE(!formulaRemain, "filter unsound at ", iter);
  }
  CHECK(checked == 400);
}

TEST_CASE("fixed sets and lines: more ways never lose a may-remain") {
  std::mt19937_64 rng(77);
  Solver solver;
  for (int iter = 0; iter < 120; ++iter) {
    size_t n = 4 + rng() % 10;
    size_t symAt = rng() % n;
    CacheTrace t;
    for (size_t i = 0; i < n; ++i) {
      TraceEvent e = concrete((rng() % 16) * 16);
      if (i == symAt) e.symbolic = true;
      t.events.push_back(e);
    }
    bool prevRemain = false;
    for (unsigned a : {1u, 2u, 4u, 8u}) {
      CacheConfig cfg{2, 4, a};
      GammaSpectre g = buildGammaSpectre(t, cfg);
      Constraint q;
      q.add(g.perEvent[0].second);
      bool remain = solver.check(q).verdict == Verdict::Sat;
      if (prevRemain) CHECK(remain);
      prevRemain = remain;
    }
  }
}

TEST_CASE("trace attacker verdict covers the access attacker verdict") {
  std::mt19937_64 rng(31);
  Solver solver;
  for (int iter = 0; iter < 60; ++iter) {
    size_t n = 3 + rng() % 8;
    size_t symAt = rng() % n;
    CacheTrace t;
    for (size_t i = 0; i < n; ++i) {
      TraceEvent e = concrete((rng() % 12) * 16);
      if (i == symAt) e.symbolic = true;
      t.events.push_back(e);
    }
    CacheConfig cfg{1, 4, 2};
    ResidencyVerdict acc = checkResidency(t, cfg, Attacker::Access, solver);
    ResidencyVerdict tr = checkResidency(t, cfg, Attacker::Trace, solver);
    if (acc.events[0].residency == Residency::MayRemain)
      CHECK(tr.events[0].residency == Residency::MayRemain);
  }
}

TEST_CASE("trace file grammar round trip") {
  CacheTrace t = parseTraceFile(R"(
# a guarded gadget trace
sym y 8 secret
expr probe = (mul (zext 64 (sym y)) 64)
pi bound = (ult (zext 64 (sym y)) 16)
S load probe @bound
N load 0x1040
N store 4160
)");
  REQUIRE(t.events.size() == 3);
  CHECK(t.events[0].symbolic);
  CHECK(!t.events[0].isStore);
  CHECK(t.events[1].sigma->isConst(0x1040));
  CHECK(t.events[2].isStore);
  CHECK(t.events[2].sigma->isConst(4160));
  CHECK(t.pi.size() == 1);

  // inline expression form
  CacheTrace u = parseTraceFile("sym z 8\nS load (add (zext 64 (sym z)) 0x100)\n");
  REQUIRE(u.events.size() == 1);
  CHECK(!u.events[0].sigma->isConst());
}

TEST_CASE("trace file errors are reported with line numbers") {
  CHECK_THROWS_AS((void)parseTraceFile("bogus directive\n"), CacheModelError);
  CHECK_THROWS_AS((void)parseTraceFile("S fetch 0x10\n"), CacheModelError);
  CHECK_THROWS_AS((void)parseTraceFile("N load undefinedname\n"), CacheModelError);
  CHECK_THROWS_AS((void)parseTraceFile("sym a 8\nsym a 8\n"), CacheModelError);
  CHECK_THROWS_AS((void)parseTraceFile("S load 0 @nope\n"), CacheModelError);
  CHECK_THROWS_AS((void)parseTraceFile("pi p = (add (const 8 1) (const 8 1))\n"),
                  CacheModelError); // pi must be 1 bit
  try {
    parseTraceFile("sym ok 8\nN load (mul (sym ok))\n");
    FAIL("expected error");
  } catch (const CacheModelError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("parsed trace flows through the full checker") {
  CacheTrace t = parseTraceFile(R"(
sym y 8 secret
pi small = (ult (zext 64 (sym y)) 1)
S load (mul (zext 64 (sym y)) 64) @small
N load 0x80
)");
  // y < 1 forces block 0 set 0; 0x80 is set 0 tag 1: forced conflict
  CacheConfig cfg{1, 6, 1};
  Solver s;
  ResidencyVerdict v = checkResidency(t, cfg, Attacker::Access, s);
  CHECK(v.events[0].residency == Residency::DefinitelyEvicted);
}
