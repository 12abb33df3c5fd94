//===-- Solver.cpp — enumeration backend, SMT-LIB2 export, external solver ===//
#include "specsym/Solver.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace specsym {

void Constraint::add(const ExprRef& term) {
  if (term->width != 1) throw WidthError("constraint term must be 1 bit");
  if (term->isTrue()) return;
  for (auto& t : terms_)
    if (t == term) return;
  terms_.push_back(term);
}

std::vector<uint32_t> freeSymbols(const Constraint& c) {
  std::vector<uint32_t> out;
  for (auto& t : c.terms()) collectSymbols(t, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// SMT-LIB2 export (QF_BV)

namespace {

std::string smtSymbolName(uint32_t id) {
  const SymbolInfo& si = symbolInfo(id);
  std::string base;
  for (char ch : si.name)
    base += (isalnum(static_cast<unsigned char>(ch)) || ch == '_') ? ch : '_';
  if (base.empty()) base = "s";
  return base + "_" + std::to_string(id);
}

void emitSmt(const ExprRef& e, std::ostream& os);

void emitBv(const ExprRef& e, std::ostream& os) {
  // 1-bit terms are bitvectors too; comparisons are lifted via ite.
  if (e->isConst()) {
    os << "(_ bv" << e->value << " " << e->width << ")";
    return;
  }
  if (e->isSymbol()) {
    os << smtSymbolName(e->symbolId);
    return;
  }
  if (isCompareOp(e->op)) {
    os << "(ite ";
    emitSmt(e, os);
    os << " (_ bv1 1) (_ bv0 1))";
    return;
  }
  switch (e->op) {
  case Op::ZExt:
    os << "((_ zero_extend " << (e->width - e->kids[0]->width) << ") ";
    emitBv(e->kids[0], os);
    os << ")";
    return;
  case Op::Select:
    os << "(ite (= ";
    emitBv(e->kids[0], os);
    os << " (_ bv1 1)) ";
    emitBv(e->kids[1], os);
    os << " ";
    emitBv(e->kids[2], os);
    os << ")";
    return;
  default:
    break;
  }
  const char* fn = nullptr;
  switch (e->op) {
  case Op::Add: fn = "bvadd"; break;
  case Op::Sub: fn = "bvsub"; break;
  case Op::Mul: fn = "bvmul"; break;
  case Op::And: fn = "bvand"; break;
  case Op::Or: fn = "bvor"; break;
  case Op::Xor: fn = "bvxor"; break;
  case Op::Shl: fn = "bvshl"; break;
  case Op::LShr: fn = "bvlshr"; break;
  default: throw std::logic_error("emitBv: unhandled op");
  }
  os << "(" << fn << " ";
  emitBv(e->kids[0], os);
  os << " ";
  emitBv(e->kids[1], os);
  os << ")";
}

// Emit as a Bool.
void emitSmt(const ExprRef& e, std::ostream& os) {
  if (isCompareOp(e->op)) {
    const char* fn = nullptr;
    bool negate = false;
    switch (e->op) {
    case Op::Eq: fn = "="; break;
    case Op::Ne: fn = "="; negate = true; break;
    case Op::Ult: fn = "bvult"; break;
    case Op::Ule: fn = "bvule"; break;
    case Op::Slt: fn = "bvslt"; break;
    case Op::Sle: fn = "bvsle"; break;
    default: break;
    }
    if (negate) os << "(not ";
    os << "(" << fn << " ";
    emitBv(e->kids[0], os);
    os << " ";
    emitBv(e->kids[1], os);
    os << ")";
    if (negate) os << ")";
    return;
  }
  os << "(= ";
  emitBv(e, os);
  os << " (_ bv1 1))";
}

} // namespace

std::string exportSmtLib2(const Constraint& c,
                          const std::vector<std::pair<std::string, ExprRef>>& extra) {
  std::ostringstream os;
  os << "(set-logic QF_BV)\n";
  std::vector<uint32_t> syms = freeSymbols(c);
  for (auto& [name, e] : extra) collectSymbols(e, syms);
  std::sort(syms.begin(), syms.end());
  syms.erase(std::unique(syms.begin(), syms.end()), syms.end());
  for (uint32_t id : syms)
    os << "(declare-const " << smtSymbolName(id) << " (_ BitVec "
       << symbolInfo(id).width << "))\n";
  for (auto& t : c.terms()) {
    os << "(assert ";
    emitSmt(t, os);
    os << ")\n";
  }
  for (auto& [name, e] : extra) {
    os << "(assert (! ";
    emitSmt(e, os);
    os << " :named " << name << "))\n";
  }
  os << "(check-sat)\n(get-model)\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Enumeration backend

ModelEnumerator::ModelEnumerator(const std::vector<uint32_t>& symbolIds) {
  for (uint32_t id : symbolIds) {
    unsigned w = symbolInfo(id).width;
    syms_.push_back({id, w});
    totalBits_ += w;
  }
  cur_.assign(syms_.size(), 0);
  if (totalBits_ > 62) done_ = true; // cannot even count the space
}

bool ModelEnumerator::next(Model& m) {
  if (done_) return false;
  if (first_) {
    first_ = false;
  } else {
    size_t i = 0;
    for (; i < syms_.size(); ++i) {
      cur_[i] = maskToWidth(cur_[i] + 1, syms_[i].second);
      if (cur_[i] != 0) break;
    }
    if (i == syms_.size()) {
      done_ = true;
      return false;
    }
  }
  m.values.clear();
  for (size_t i = 0; i < syms_.size(); ++i) m.values.push_back({syms_[i].first, cur_[i]});
  std::sort(m.values.begin(), m.values.end());
  return true;
}

SolverResult Solver::checkEnumeration(const Constraint& c) const {
  std::vector<uint32_t> syms = freeSymbols(c);
  uint64_t totalBits = 0;
  std::vector<unsigned> widths;
  for (uint32_t id : syms) {
    widths.push_back(symbolInfo(id).width);
    totalBits += widths.back();
  }
  if (totalBits > opts_.budgetBits)
    throw SolverBudgetError("enumeration budget exceeded: query has " +
                            std::to_string(totalBits) + " free bits, budget is " +
                            std::to_string(opts_.budgetBits));

  // A term only needs re-evaluation when one of its own symbols changes.
  // The odometer advances position 0 fastest; an increment that carries up
  // to position p resets everything at or below p, so a term whose lowest
  // symbol position is above p keeps its cached value. This makes queries
  // cheap when an expensive term ignores most of the enumerated symbols.
  const auto& terms = c.terms();
  std::vector<size_t> minPos(terms.size(), 0);
  for (size_t i = 0; i < terms.size(); ++i) {
    std::vector<uint32_t> ts;
    collectSymbols(terms[i], ts);
    size_t lo = syms.size();
    for (uint32_t id : ts) {
      size_t pos = std::lower_bound(syms.begin(), syms.end(), id) - syms.begin();
      lo = std::min(lo, pos);
    }
    minPos[i] = ts.empty() ? 0 : lo;
  }

  std::vector<uint64_t> cur(syms.size(), 0);
  Model m;
  for (size_t i = 0; i < syms.size(); ++i) m.values.push_back({syms[i], 0});

  Evaluator ev;
  std::vector<char> valid(terms.size(), 0);
  std::vector<char> val(terms.size(), 0);
  bool first = true;
  for (;;) {
    if (!first) {
      size_t p = 0;
      for (; p < syms.size(); ++p) {
        cur[p] = maskToWidth(cur[p] + 1, widths[p]);
        m.values[p].second = cur[p];
        if (cur[p] != 0) break;
      }
      if (p == syms.size()) return {Verdict::Unsat, {}, ""};
      for (size_t i = 0; i < terms.size(); ++i)
        if (minPos[i] <= p) valid[i] = 0;
    }
    first = false;

    ev.newModel();
    bool ok = true;
    for (size_t i = 0; i < terms.size(); ++i) {
      if (!valid[i]) {
        val[i] = ev.eval(terms[i], m) != 0;
        valid[i] = 1;
      }
      if (!val[i]) {
        ok = false;
        break;
      }
    }
    if (ok) return {Verdict::Sat, m, ""};
    if (syms.empty()) return {Verdict::Unsat, {}, ""};
  }
}

// ---------------------------------------------------------------------------
// External backend

namespace {

std::string runProcess(const std::string& cmd, int& exitCode) {
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) {
    exitCode = -1;
    return out;
  }
  std::array<char, 4096> buf;
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) out.append(buf.data(), n);
  exitCode = pclose(p);
  return out;
}

// Best-effort model extraction from `(define-fun name () (_ BitVec w) #xNN)`
// style output (z3, cvc5, boolector all emit a close-enough shape).
void parseModel(const std::string& out, const std::vector<uint32_t>& syms, Model& m) {
  for (uint32_t id : syms) {
    std::string key = smtSymbolName(id);
    size_t pos = out.find(key);
    uint64_t value = 0;
    bool found = false;
    while (pos != std::string::npos && !found) {
      size_t hx = out.find('#', pos);
      size_t paren = out.find(')', pos);
      // the literal must belong to this definition, not a later one
      size_t nextDef = out.find("define-fun", pos + key.size());
      if (hx != std::string::npos && (nextDef == std::string::npos || hx < nextDef)) {
        char kind = out[hx + 1];
        size_t i = hx + 2;
        value = 0;
        while (i < out.size() && isalnum(static_cast<unsigned char>(out[i]))) {
          char ch = out[i];
          if (kind == 'x')
            value = value * 16 + uint64_t(isdigit(ch) ? ch - '0' : tolower(ch) - 'a' + 10);
          else
            value = value * 2 + uint64_t(ch - '0');
          ++i;
        }
        found = true;
      } else if (paren != std::string::npos) {
        // `(_ bvN w)` style
        size_t bv = out.find("bv", pos);
        if (bv != std::string::npos && (nextDef == std::string::npos || bv < nextDef)) {
          value = strtoull(out.c_str() + bv + 2, nullptr, 10);
          found = true;
        }
      }
      if (!found) pos = out.find(key, pos + key.size());
    }
    m.set(id, found ? value : 0);
  }
}

} // namespace

SolverResult Solver::checkExternal(const Constraint& c) const {
  if (opts_.solverPath.empty())
    return {Verdict::Unknown, {}, "no external solver configured"};
  char tmpl[] = "/tmp/specsym-query-XXXXXX";
  int fd = mkstemp(tmpl);
  if (fd < 0) return {Verdict::Unknown, {}, "mkstemp failed"};
  std::string path = tmpl;
  {
    std::string script = exportSmtLib2(c);
    FILE* f = fdopen(fd, "w");
    fwrite(script.data(), 1, script.size(), f);
    fclose(f);
  }
  std::string cmd = opts_.solverPath + " " + path + " 2>/dev/null";
  if (opts_.timeoutSec > 0)
    cmd = "timeout " + std::to_string((unsigned)opts_.timeoutSec) + " " + cmd;
  int code = 0;
  std::string out = runProcess(cmd, code);
  std::remove(path.c_str());

  SolverResult res;
  if (out.rfind("unsat", 0) == 0 || out.find("\nunsat") != std::string::npos) {
    res.verdict = Verdict::Unsat;
  } else if (out.rfind("sat", 0) == 0 || out.find("\nsat") != std::string::npos) {
    res.verdict = Verdict::Sat;
    parseModel(out, freeSymbols(c), res.model);
  } else {
    res.verdict = Verdict::Unknown;
    res.note = code != 0 ? "solver process failure or timeout" : "solver answered unknown";
  }
  return res;
}

SolverResult Solver::check(const Constraint& c) const {
  auto t0 = std::chrono::steady_clock::now();
  stats_.queries++;
  SolverResult r;
  // Constant-false term decides the query with no search.
  for (auto& t : c.terms()) {
    if (t->isFalse()) {
      stats_.totalSeconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return {Verdict::Unsat, {}, ""};
    }
  }
  try {
    r = opts_.mode == Mode::Enumeration ? checkEnumeration(c) : checkExternal(c);
  } catch (...) {
    stats_.totalSeconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    throw;
  }
  stats_.totalSeconds +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

} // namespace specsym
