//===-- Expr.cpp — hash-consed bitvector expression DAG -------------------===//
#include "specsym/Expr.h"

#include <algorithm>
#include <mutex>
#include <unordered_map>

namespace specsym {

bool isCompareOp(Op op) {
  switch (op) {
  case Op::Eq:
  case Op::Ne:
  case Op::Ult:
  case Op::Ule:
  case Op::Slt:
  case Op::Sle:
    return true;
  default:
    return false;
  }
}

bool isBinaryOp(Op op) {
  switch (op) {
  case Op::Add:
  case Op::Sub:
  case Op::Mul:
  case Op::And:
  case Op::Or:
  case Op::Xor:
  case Op::Shl:
  case Op::LShr:
    return true;
  default:
    return isCompareOp(op);
  }
}

const char* opName(Op op) {
  switch (op) {
  case Op::Const: return "const";
  case Op::Symbol: return "symbol";
  case Op::Add: return "add";
  case Op::Sub: return "sub";
  case Op::Mul: return "mul";
  case Op::And: return "and";
  case Op::Or: return "or";
  case Op::Xor: return "xor";
  case Op::Shl: return "shl";
  case Op::LShr: return "lshr";
  case Op::Eq: return "eq";
  case Op::Ne: return "ne";
  case Op::Ult: return "ult";
  case Op::Ule: return "ule";
  case Op::Slt: return "slt";
  case Op::Sle: return "sle";
  case Op::ZExt: return "zext";
  case Op::Select: return "select";
  }
  return "?";
}

TaintSet taintUnion(const TaintSet& a, const TaintSet& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  TaintSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool taintIntersects(const TaintSet& a, const std::vector<uint32_t>& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib)
      ++ia;
    else
      ++ib;
  }
  return false;
}

uint64_t maskToWidth(uint64_t v, unsigned width) {
  return width >= 64 ? v : (v & ((uint64_t(1) << width) - 1));
}

int64_t signExtend(uint64_t v, unsigned width) {
  if (width >= 64) return int64_t(v);
  uint64_t sign = uint64_t(1) << (width - 1);
  v = maskToWidth(v, width);
  return int64_t((v ^ sign) - sign);
}

namespace {

struct NodeKey {
  Op op;
  unsigned width;
  uint64_t value;
  uint32_t symbolId;
  std::vector<uint32_t> kidUids;

  bool operator==(const NodeKey& o) const {
    return op == o.op && width == o.width && value == o.value &&
           symbolId == o.symbolId && kidUids == o.kidUids;
  }
};

struct NodeKeyHash {
  size_t operator()(const NodeKey& k) const {
    size_t h = size_t(k.op) * 0x9e3779b97f4a7c15ULL + k.width;
    h = h * 0x100000001b3ULL ^ k.value;
    h = h * 0x100000001b3ULL ^ k.symbolId;
    for (uint32_t u : k.kidUids) h = h * 0x100000001b3ULL ^ u;
    return h;
  }
};

// Hash-cons table. Shared across the process; synchronized so expression
// construction is safe from concurrent workers.
struct Builder {
  std::mutex mu;
  std::unordered_map<NodeKey, ExprRef, NodeKeyHash> table;
  std::vector<SymbolInfo> symbols;
  uint32_t nextUid = 0;

  static Builder& get() {
    static Builder b;
    return b;
  }

  ExprRef intern(Expr&& e) {
    NodeKey key{e.op, e.width, e.value, e.symbolId, {}};
    key.kidUids.reserve(e.kids.size());
    for (auto& k : e.kids) key.kidUids.push_back(k->uid);
    std::lock_guard<std::mutex> lock(mu);
    auto it = table.find(key);
    if (it != table.end()) return it->second;
    auto node = std::make_shared<Expr>(std::move(e));
    const_cast<Expr&>(*node).uid = nextUid++;
    table.emplace(std::move(key), node);
    return node;
  }
};

void requireWidth(bool ok, const std::string& msg) {
  if (!ok) throw WidthError(msg);
}

} // namespace

ExprRef mkConst(unsigned width, uint64_t v) {
  requireWidth(width >= 1 && width <= 64, "constant width out of range");
  Expr e;
  e.op = Op::Const;
  e.width = width;
  e.value = maskToWidth(v, width);
  return Builder::get().intern(std::move(e));
}

ExprRef mkTrue() { return mkConst(1, 1); }
ExprRef mkFalse() { return mkConst(1, 0); }

ExprRef mkSymbol(const std::string& name, unsigned width, bool user, bool secret,
                 const std::string& provenance, const TaintSet& extraTaint) {
  requireWidth(width >= 1 && width <= 64, "symbol width out of range");
  auto& b = Builder::get();
  uint32_t id;
  {
    std::lock_guard<std::mutex> lock(b.mu);
    id = uint32_t(b.symbols.size());
    b.symbols.push_back({id, name, width, user, secret, provenance});
  }
  Expr e;
  e.op = Op::Symbol;
  e.width = width;
  e.symbolId = id;
  e.userDerived = user;
  e.taint = extraTaint;
  if (secret) e.taint = taintUnion(e.taint, {id});
  return Builder::get().intern(std::move(e));
}

const SymbolInfo& symbolInfo(uint32_t id) {
  auto& b = Builder::get();
  std::lock_guard<std::mutex> lock(b.mu);
  return b.symbols.at(id);
}

uint32_t symbolCount() {
  auto& b = Builder::get();
  std::lock_guard<std::mutex> lock(b.mu);
  return uint32_t(b.symbols.size());
}

size_t exprNodeCount() {
  auto& b = Builder::get();
  std::lock_guard<std::mutex> lock(b.mu);
  return b.table.size();
}

namespace {

uint64_t foldBinop(Op op, unsigned width, uint64_t a, uint64_t b) {
  switch (op) {
  case Op::Add: return maskToWidth(a + b, width);
  case Op::Sub: return maskToWidth(a - b, width);
  case Op::Mul: return maskToWidth(a * b, width);
  case Op::And: return a & b;
  case Op::Or: return a | b;
  case Op::Xor: return a ^ b;
  case Op::Shl: return b >= width ? 0 : maskToWidth(a << b, width);
  case Op::LShr: return b >= width ? 0 : (a >> b);
  case Op::Eq: return a == b;
  case Op::Ne: return a != b;
  case Op::Ult: return a < b;
  case Op::Ule: return a <= b;
  case Op::Slt: return signExtend(a, width) < signExtend(b, width);
  case Op::Sle: return signExtend(a, width) <= signExtend(b, width);
  default: throw std::logic_error("foldBinop: not a binary op");
  }
}

} // namespace

ExprRef mkBinop(Op op, const ExprRef& a, const ExprRef& b) {
  if (!isBinaryOp(op)) throw std::logic_error("mkBinop: not a binary op");
  requireWidth(a->width == b->width, std::string("operand width mismatch for ") + opName(op));
  unsigned w = a->width;
  unsigned resW = isCompareOp(op) ? 1 : w;

  if (a->isConst() && b->isConst())
    return mkConst(resW, foldBinop(op, w, a->value, b->value));

  // Identity / absorbing rules. Folding to a constant deliberately drops
  // taint: a constant carries no information.
  switch (op) {
  case Op::Add:
  case Op::Or:
  case Op::Xor:
    if (b->isConst(0)) return a;
    if (a->isConst(0)) return b;
    break;
  case Op::Sub:
    if (b->isConst(0)) return a;
    if (a == b) return mkConst(w, 0);
    break;
  case Op::Mul:
    if (a->isConst(0) || b->isConst(0)) return mkConst(w, 0);
    if (b->isConst(1)) return a;
    if (a->isConst(1)) return b;
    break;
  case Op::And:
    if (a->isConst(0) || b->isConst(0)) return mkConst(w, 0);
    if (b->isConst() && b->value == maskToWidth(~uint64_t(0), w)) return a;
    if (a->isConst() && a->value == maskToWidth(~uint64_t(0), w)) return b;
    if (a == b) return a;
    break;
  case Op::Shl:
  case Op::LShr:
    if (b->isConst(0)) return a;
    break;
  case Op::Eq:
  case Op::Ule:
  case Op::Sle:
    if (a == b) return mkTrue();
    break;
  case Op::Ne:
  case Op::Ult:
  case Op::Slt:
    if (a == b) return mkFalse();
    break;
  default:
    break;
  }
  if (op == Op::Or && a == b) return a;
  if (op == Op::Xor && a == b) return mkConst(w, 0);

  Expr e;
  e.op = op;
  e.width = resW;
  e.kids = {a, b};
  e.taint = taintUnion(a->taint, b->taint);
  e.userDerived = a->userDerived || b->userDerived;
  return Builder::get().intern(std::move(e));
}

ExprRef mkZExt(const ExprRef& a, unsigned width) {
  requireWidth(width >= a->width && width <= 64, "zext to narrower width");
  if (width == a->width) return a;
  if (a->isConst()) return mkConst(width, a->value);
  Expr e;
  e.op = Op::ZExt;
  e.width = width;
  e.kids = {a};
  e.taint = a->taint;
  e.userDerived = a->userDerived;
  return Builder::get().intern(std::move(e));
}

ExprRef mkSelect(const ExprRef& cond, const ExprRef& t, const ExprRef& f) {
  requireWidth(cond->width == 1, "select condition must be 1 bit");
  requireWidth(t->width == f->width, "select arm width mismatch");
  if (cond->isConst()) return cond->value ? t : f;
  if (t == f) return t;
  Expr e;
  e.op = Op::Select;
  e.width = t->width;
  e.kids = {cond, t, f};
  e.taint = taintUnion(cond->taint, taintUnion(t->taint, f->taint));
  e.userDerived = cond->userDerived || t->userDerived || f->userDerived;
  return Builder::get().intern(std::move(e));
}

ExprRef mkNot1(const ExprRef& a) {
  requireWidth(a->width == 1, "mkNot1 expects a 1-bit operand");
  return mkBinop(Op::Eq, a, mkFalse());
}

void collectSymbols(const ExprRef& e, std::vector<uint32_t>& out) {
  std::vector<const Expr*> stack{e.get()};
  while (!stack.empty()) {
    const Expr* n = stack.back();
    stack.pop_back();
    if (n->isSymbol()) out.push_back(n->symbolId);
    for (auto& k : n->kids) stack.push_back(k.get());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

void Model::set(uint32_t id, uint64_t v) {
  auto it = std::lower_bound(values.begin(), values.end(), id,
                             [](const auto& p, uint32_t x) { return p.first < x; });
  if (it != values.end() && it->first == id)
    it->second = v;
  else
    values.insert(it, {id, v});
}

const uint64_t* Model::find(uint32_t id) const {
  auto it = std::lower_bound(values.begin(), values.end(), id,
                             [](const auto& p, uint32_t x) { return p.first < x; });
  if (it != values.end() && it->first == id) return &it->second;
  return nullptr;
}

uint64_t Evaluator::evalRec(const Expr* e, const Model& m) {
  if (e->uid < stamp_.size() && stamp_[e->uid] == cur_) return cache_[e->uid];
  uint64_t v;
  switch (e->op) {
  case Op::Const:
    v = e->value;
    break;
  case Op::Symbol: {
    const uint64_t* p = m.find(e->symbolId);
    if (!p)
      throw UnboundSymbolError("unbound symbol '" + symbolInfo(e->symbolId).name + "'");
    v = maskToWidth(*p, e->width);
    break;
  }
  case Op::ZExt:
    v = evalRec(e->kids[0].get(), m);
    break;
  case Op::Select:
    v = evalRec(e->kids[0].get(), m) ? evalRec(e->kids[1].get(), m)
                                     : evalRec(e->kids[2].get(), m);
    break;
  default:
    v = foldBinop(e->op, e->kids[0]->width, evalRec(e->kids[0].get(), m),
                  evalRec(e->kids[1].get(), m));
    break;
  }
  if (e->uid >= stamp_.size()) {
    stamp_.resize(e->uid + 1, cur_ - 1);
    cache_.resize(e->uid + 1, 0);
  }
  stamp_[e->uid] = cur_;
  cache_[e->uid] = v;
  return v;
}

uint64_t Evaluator::eval(const ExprRef& e, const Model& m) { return evalRec(e.get(), m); }

void Evaluator::newModel() { ++cur_; }

uint64_t evaluate(const ExprRef& e, const Model& m) {
  Evaluator ev;
  ev.newModel();
  return ev.eval(e, m);
}

} // namespace specsym
