//===-- SpecIR.h — the analyzable program representation -------------------===//
#pragma once

#include "specsym/Expr.h"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace specsym {

struct SrcLoc {
  std::string function;
  int block = 0;
  int index = 0;

  bool operator==(const SrcLoc& o) const {
    return function == o.function && block == o.block && index == o.index;
  }
  bool operator<(const SrcLoc& o) const {
    if (function != o.function) return function < o.function;
    if (block != o.block) return block < o.block;
    return index < o.index;
  }
  std::string str() const {
    return function + ":" + std::to_string(block) + ":" + std::to_string(index);
  }
};

struct GlobalObject {
  std::string name;
  unsigned elemWidth = 8;  // bits, one of {8,16,32,64}
  uint64_t length = 1;     // element count >= 1
  uint64_t base = 0;       // byte address, assigned by layout
  bool user = false;       // contents are attacker controlled
  bool secret = false;     // contents are declared sensitive
  bool basePinned = false; // @base directive present
  uint64_t pinnedBase = 0;

  uint64_t elemBytes() const { return elemWidth / 8; }
  uint64_t sizeBytes() const { return length * elemBytes(); }
};

enum class Opcode {
  Const,
  SymbolicInput,
  Binop, // arithmetic + comparisons, op field
  Select,
  Load,
  Store,
  Br,
  Jmp,
  Fence,
  Ret,
  Assume,
};

struct Instruction {
  int id = 0; // globally unique
  Opcode opc = Opcode::Ret;
  Op op = Op::Add; // for Binop
  std::string dest;
  unsigned width = 0; // const/symbolic width
  uint64_t imm = 0;   // const payload
  bool userFlag = false;
  std::string a, b, c;        // register operands
  std::string global;         // load/store
  std::string label1, label2; // br/jmp targets
  bool hasRetValue = false;
  SrcLoc loc;
  int line = 0;
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> instrs;
};

struct Function {
  std::string name;
  std::vector<std::pair<std::string, unsigned>> params;
  std::vector<BasicBlock> blocks;
  std::unordered_map<std::string, int> blockIndex;
};

struct Program {
  std::vector<GlobalObject> globals;
  std::vector<Function> functions;
  std::unordered_map<std::string, int> globalIndex;
  std::unordered_map<std::string, int> functionIndex;
  std::string entry;

  const GlobalObject* findGlobal(const std::string& name) const;
  const Function& entryFunction() const { return functions.at(functionIndex.at(entry)); }
  const Instruction* findInstr(int id) const;
};

class ParseError : public std::runtime_error {
public:
  int line, col;
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ":" + std::to_string(col) +
                           ": " + msg),
        line(line), col(col) {}
};

class LayoutError : public std::runtime_error {
public:
  explicit LayoutError(const std::string& msg) : std::runtime_error(msg) {}
};

struct LayoutOptions {
  uint64_t origin = 0x10000;
  uint64_t lineBytes = 64; // globals padded to this boundary
};

/// Parses SpecIR text into a validated Program with final base addresses
/// (default layout; @base directives honored).
Program parseProgram(const std::string& text, const LayoutOptions& layout = {});

/// Re-assigns base addresses: directives pin, the rest pack sequentially from
/// the origin, each padded to the next line boundary.
void layoutGlobals(Program& p, const std::map<std::string, uint64_t>& directives,
                   const LayoutOptions& layout = {});

std::string prettyPrint(const Program& p);

} // namespace specsym
