//===-- Expr.h — hash-consed bitvector expression DAG ---------------------===//
#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace specsym {

enum class Op : uint8_t {
  Const,
  Symbol,
  // binary arithmetic / bitwise
  Add,
  Sub,
  Mul,
  And,
  Or,
  Xor,
  Shl,
  LShr,
  // comparisons (1-bit result)
  Eq,
  Ne,
  Ult,
  Ule,
  Slt,
  Sle,
  // unary
  ZExt,
  // ternary
  Select,
};

bool isCompareOp(Op op);
bool isBinaryOp(Op op); // arithmetic/bitwise/compare
const char* opName(Op op);

class Expr;
using ExprRef = std::shared_ptr<const Expr>;

// Sorted vector of secret identifiers.
using TaintSet = std::vector<uint32_t>;

TaintSet taintUnion(const TaintSet& a, const TaintSet& b);
bool taintIntersects(const TaintSet& a, const std::vector<uint32_t>& sortedIds);

class WidthError : public std::runtime_error {
public:
  explicit WidthError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Immutable expression node. Structural equality implies pointer identity
/// (all construction goes through the hash-consing builder).
class Expr {
public:
  Op op;
  unsigned width; // bits, 1..64
  uint64_t value = 0;    // Const payload, masked to width
  uint32_t symbolId = 0; // Symbol payload
  std::vector<ExprRef> kids;
  TaintSet taint;          // union of children's taints; {id} for secret symbols
  bool userDerived = false;
  uint32_t uid = 0; // dense id, assigned by the builder

  bool isConst() const { return op == Op::Const; }
  bool isConst(uint64_t v) const { return op == Op::Const && value == v; }
  bool isSymbol() const { return op == Op::Symbol; }
  bool isTrue() const { return op == Op::Const && width == 1 && value == 1; }
  bool isFalse() const { return op == Op::Const && width == 1 && value == 0; }
};

struct SymbolInfo {
  uint32_t id = 0;
  std::string name;
  unsigned width = 0;
  bool user = false;
  bool secret = false;
  std::string provenance; // "input", "cell:<global>:<index>", "load:<instr>:<occ>", "secret:<instr>:<occ>", ...
};

uint64_t maskToWidth(uint64_t v, unsigned width);
int64_t signExtend(uint64_t v, unsigned width);

ExprRef mkConst(unsigned width, uint64_t v);
ExprRef mkTrue();
ExprRef mkFalse();

/// Every call mints a fresh symbol (fresh id). Secret symbols carry their own
/// id in their taint set; extraTaint adds inherited dependence (a value loaded
/// through a tainted address carries that address's taint).
ExprRef mkSymbol(const std::string& name, unsigned width, bool user = false,
                 bool secret = false, const std::string& provenance = "",
                 const TaintSet& extraTaint = {});

ExprRef mkBinop(Op op, const ExprRef& a, const ExprRef& b);
ExprRef mkZExt(const ExprRef& a, unsigned width);
ExprRef mkSelect(const ExprRef& cond, const ExprRef& t, const ExprRef& f);
ExprRef mkNot1(const ExprRef& a); // 1-bit negation

const SymbolInfo& symbolInfo(uint32_t id);
uint32_t symbolCount();

/// Number of distinct nodes ever interned; hash-consing tests watch this.
size_t exprNodeCount();

void collectSymbols(const ExprRef& e, std::vector<uint32_t>& out); // sorted, unique

/// Witness assignment: symbol id -> value (masked to symbol width).
struct Model {
  std::vector<std::pair<uint32_t, uint64_t>> values; // sorted by id

  void set(uint32_t id, uint64_t v);
  const uint64_t* find(uint32_t id) const;
  bool empty() const { return values.empty(); }
};

class UnboundSymbolError : public std::runtime_error {
public:
  explicit UnboundSymbolError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Exact two's-complement evaluation under a model binding every free symbol.
uint64_t evaluate(const ExprRef& e, const Model& m);

/// Reusable evaluator with a uid-indexed memo; much faster inside model
/// enumeration loops.
class Evaluator {
public:
  uint64_t eval(const ExprRef& e, const Model& m);
  void newModel(); // invalidate memo for the next assignment

private:
  std::vector<uint64_t> cache_;
  std::vector<uint32_t> stamp_;
  uint32_t cur_ = 0;
  uint64_t evalRec(const Expr* e, const Model& m);
};

} // namespace specsym
