//===-- SpecIR.cpp — parser, layout, pretty-printer ------------------------===//
#include "specsym/SpecIR.h"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace specsym {

const GlobalObject* Program::findGlobal(const std::string& name) const {
  auto it = globalIndex.find(name);
  return it == globalIndex.end() ? nullptr : &globals[it->second];
}

const Instruction* Program::findInstr(int id) const {
  for (auto& f : functions)
    for (auto& b : f.blocks)
      for (auto& i : b.instrs)
        if (i.id == id) return &i;
  return nullptr;
}

namespace {

struct Token {
  enum Kind { Ident, Number, Punct, End } kind = End;
  std::string text;
  uint64_t num = 0;
  int line = 1, col = 1;
};

class Lexer {
public:
  explicit Lexer(const std::string& text) : s_(text) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }
  bool isPunct(const char* p) const { return tok_.kind == Token::Punct && tok_.text == p; }
  bool isIdent(const char* p) const { return tok_.kind == Token::Ident && tok_.text == p; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(tok_.line, tok_.col, msg);
  }

  Token expectIdent(const char* what) {
    if (tok_.kind != Token::Ident) fail(std::string("expected ") + what);
    return take();
  }
  Token expectNumber(const char* what) {
    if (tok_.kind != Token::Number) fail(std::string("expected ") + what);
    return take();
  }
  void expectPunct(const char* p) {
    if (!isPunct(p)) fail(std::string("expected '") + p + "'");
    take();
  }

private:
  std::string s_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;

  int getc_() {
    if (pos_ >= s_.size()) return -1;
    char c = s_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  int peekc_() const { return pos_ >= s_.size() ? -1 : s_[pos_]; }

  void advance() {
    // skip whitespace and comments
    for (;;) {
      int c = peekc_();
      if (c == '#') {
        while (peekc_() != -1 && peekc_() != '\n') getc_();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        getc_();
      } else {
        break;
      }
    }
    tok_.line = line_;
    tok_.col = col_;
    int c = peekc_();
    if (c == -1) {
      tok_.kind = Token::End;
      tok_.text.clear();
      return;
    }
    if (isalpha(c) || c == '_') {
      tok_.kind = Token::Ident;
      tok_.text.clear();
      while (isalnum(peekc_()) || peekc_() == '_') tok_.text += char(getc_());
      return;
    }
    if (isdigit(c)) {
      tok_.kind = Token::Number;
      tok_.text.clear();
      uint64_t v = 0;
      if (c == '0') {
        tok_.text += char(getc_());
        if (peekc_() == 'x' || peekc_() == 'X') {
          tok_.text += char(getc_());
          while (isxdigit(peekc_())) {
            char d = char(getc_());
            tok_.text += d;
            v = v * 16 + uint64_t(isdigit(d) ? d - '0' : tolower(d) - 'a' + 10);
          }
          tok_.num = v;
          return;
        }
        v = 0;
      }
      while (isdigit(peekc_())) {
        char d = char(getc_());
        tok_.text += d;
        v = v * 10 + uint64_t(d - '0');
      }
      tok_.num = v;
      return;
    }
    tok_.kind = Token::Punct;
    tok_.text = std::string(1, char(getc_()));
  }
};

Op binopFromName(const std::string& s, bool& ok) {
  ok = true;
  if (s == "add") return Op::Add;
  if (s == "sub") return Op::Sub;
  if (s == "mul") return Op::Mul;
  if (s == "and") return Op::And;
  if (s == "or") return Op::Or;
  if (s == "xor") return Op::Xor;
  if (s == "shl") return Op::Shl;
  if (s == "lshr") return Op::LShr;
  if (s == "eq") return Op::Eq;
  if (s == "ne") return Op::Ne;
  if (s == "ult") return Op::Ult;
  if (s == "ule") return Op::Ule;
  if (s == "slt") return Op::Slt;
  if (s == "sle") return Op::Sle;
  ok = false;
  return Op::Add;
}

class Parser {
public:
  Parser(const std::string& text, const LayoutOptions& layout)
      : lex_(text), layout_(layout) {}

  Program run() {
    while (lex_.peek().kind != Token::End) {
      if (lex_.isIdent("global"))
        parseGlobal();
      else if (lex_.isIdent("fn"))
        parseFunction();
      else
        lex_.fail("expected 'global' or 'fn'");
    }
    finalize();
    return std::move(prog_);
  }

private:
  Lexer lex_;
  LayoutOptions layout_;
  Program prog_;
  int nextInstrId_ = 0;

  void parseGlobal() {
    Token kw = lex_.take();
    GlobalObject g;
    Token name = lex_.expectIdent("global name");
    g.name = name.text;
    lex_.expectPunct("[");
    g.length = lex_.expectNumber("length").num;
    lex_.expectPunct("]");
    lex_.expectPunct(":");
    Token w = lex_.expectNumber("element width");
    g.elemWidth = unsigned(w.num);
    if (g.elemWidth != 8 && g.elemWidth != 16 && g.elemWidth != 32 && g.elemWidth != 64)
      throw ParseError(w.line, w.col, "element width must be 8, 16, 32 or 64");
    if (g.length < 1) throw ParseError(name.line, name.col, "length must be >= 1");
    while (true) {
      if (lex_.isIdent("user")) {
        lex_.take();
        g.user = true;
      } else if (lex_.isIdent("secret")) {
        lex_.take();
        g.secret = true;
      } else if (lex_.isPunct("@")) {
        lex_.take();
        if (!lex_.isIdent("base")) lex_.fail("expected 'base' after '@'");
        lex_.take();
        Token addr = lex_.expectNumber("base address");
        g.basePinned = true;
        g.pinnedBase = addr.num;
      } else {
        break;
      }
    }
    if (prog_.globalIndex.count(g.name))
      throw ParseError(name.line, name.col, "duplicate symbol '" + g.name + "'");
    prog_.globalIndex[g.name] = int(prog_.globals.size());
    prog_.globals.push_back(g);
  }

  void parseFunction() {
    lex_.take(); // fn
    Function f;
    Token name = lex_.expectIdent("function name");
    f.name = name.text;
    lex_.expectPunct("(");
    if (!lex_.isPunct(")")) {
      while (true) {
        Token p = lex_.expectIdent("parameter name");
        lex_.expectPunct(":");
        Token w = lex_.expectNumber("parameter width");
        f.params.push_back({p.text, unsigned(w.num)});
        if (lex_.isPunct(",")) {
          lex_.take();
          continue;
        }
        break;
      }
    }
    lex_.expectPunct(")");
    lex_.expectPunct("{");
    while (!lex_.isPunct("}")) {
      parseBlock(f);
    }
    lex_.take(); // }
    if (f.blocks.empty())
      throw ParseError(name.line, name.col, "function '" + f.name + "' has no blocks");
    if (prog_.functionIndex.count(f.name))
      throw ParseError(name.line, name.col, "duplicate symbol '" + f.name + "'");
    prog_.functionIndex[f.name] = int(prog_.functions.size());
    prog_.functions.push_back(std::move(f));
  }

  void parseBlock(Function& f) {
    Token label = lex_.expectIdent("block label");
    lex_.expectPunct(":");
    if (f.blockIndex.count(label.text))
      throw ParseError(label.line, label.col, "duplicate label '" + label.text + "'");
    BasicBlock bb;
    bb.label = label.text;
    int blockIdx = int(f.blocks.size());
    f.blockIndex[label.text] = blockIdx;
    while (lex_.peek().kind != Token::End && !lex_.isPunct("}")) {
      // a new block starts at IDENT ':' — look ahead
      if (lex_.peek().kind == Token::Ident) {
        // terminators end the block
      }
      Instruction in = parseInstruction(f.name, blockIdx, int(bb.instrs.size()));
      bool term = in.opc == Opcode::Br || in.opc == Opcode::Jmp || in.opc == Opcode::Ret;
      bb.instrs.push_back(std::move(in));
      if (term) break;
    }
    if (bb.instrs.empty() || !(bb.instrs.back().opc == Opcode::Br ||
                               bb.instrs.back().opc == Opcode::Jmp ||
                               bb.instrs.back().opc == Opcode::Ret))
      throw ParseError(label.line, label.col,
                       "block '" + label.text + "' must end in br, jmp or ret");
    f.blocks.push_back(std::move(bb));
  }

  Instruction parseInstruction(const std::string& fn, int block, int index) {
    Instruction in;
    in.id = nextInstrId_++;
    in.loc = {fn, block, index};
    Token first = lex_.expectIdent("instruction");
    in.line = first.line;

    if (first.text == "store") {
      in.opc = Opcode::Store;
      Token g = lex_.expectIdent("global name");
      in.global = g.text;
      lex_.expectPunct("[");
      in.a = lex_.expectIdent("index register").text;
      lex_.expectPunct("]");
      lex_.expectPunct(",");
      in.b = lex_.expectIdent("value register").text;
      return in;
    }
    if (first.text == "br") {
      in.opc = Opcode::Br;
      in.a = lex_.expectIdent("condition register").text;
      lex_.expectPunct(",");
      in.label1 = lex_.expectIdent("true label").text;
      lex_.expectPunct(",");
      in.label2 = lex_.expectIdent("false label").text;
      return in;
    }
    if (first.text == "jmp") {
      in.opc = Opcode::Jmp;
      in.label1 = lex_.expectIdent("target label").text;
      return in;
    }
    if (first.text == "fence") {
      in.opc = Opcode::Fence;
      return in;
    }
    if (first.text == "assume") {
      in.opc = Opcode::Assume;
      in.a = lex_.expectIdent("condition register").text;
      return in;
    }
    if (first.text == "ret") {
      in.opc = Opcode::Ret;
      // instructions are newline-terminated; a value must share ret's line
      if (lex_.peek().kind == Token::Ident && lex_.peek().line == first.line) {
        in.a = lex_.take().text;
        in.hasRetValue = true;
      }
      return in;
    }

    // assignment form: DEST = ...
    in.dest = first.text;
    lex_.expectPunct("=");
    Token rhs = lex_.expectIdent("opcode");
    if (rhs.text == "const") {
      in.opc = Opcode::Const;
      in.width = unsigned(lex_.expectNumber("width").num);
      in.imm = lex_.expectNumber("value").num;
      return in;
    }
    if (rhs.text == "symbolic") {
      in.opc = Opcode::SymbolicInput;
      in.width = unsigned(lex_.expectNumber("width").num);
      if (lex_.isIdent("user")) {
        lex_.take();
        in.userFlag = true;
      }
      return in;
    }
    if (rhs.text == "select") {
      in.opc = Opcode::Select;
      in.a = lex_.expectIdent("condition register").text;
      in.b = lex_.expectIdent("true operand").text;
      in.c = lex_.expectIdent("false operand").text;
      return in;
    }
    if (rhs.text == "load") {
      in.opc = Opcode::Load;
      Token g = lex_.expectIdent("global name");
      in.global = g.text;
      lex_.expectPunct("[");
      in.a = lex_.expectIdent("index register").text;
      lex_.expectPunct("]");
      return in;
    }
    bool ok;
    Op op = binopFromName(rhs.text, ok);
    if (!ok) throw ParseError(rhs.line, rhs.col, "unknown opcode '" + rhs.text + "'");
    in.opc = Opcode::Binop;
    in.op = op;
    in.a = lex_.expectIdent("left operand").text;
    in.b = lex_.expectIdent("right operand").text;
    return in;
  }

  void validateAndInferWidths(const Function& f) {
    std::unordered_map<std::string, unsigned> regw;
    for (auto& [p, w] : f.params) {
      if (w < 1 || w > 64)
        throw ParseError(0, 0, "parameter width out of range in " + f.name);
      regw[p] = w;
    }
    auto use = [&](const std::string& r, const Instruction& in) -> unsigned {
      auto it = regw.find(r);
      if (it == regw.end())
        throw ParseError(in.line, 1, "use of undefined register '" + r + "'");
      return it->second;
    };
    auto def = [&](const std::string& r, unsigned w, const Instruction& in) {
      auto it = regw.find(r);
      if (it != regw.end() && it->second != w)
        throw ParseError(in.line, 1,
                         "width mismatch: register '" + r + "' redefined with width " +
                             std::to_string(w) + " (was " + std::to_string(it->second) + ")");
      regw[r] = w;
    };
    for (auto& bb : f.blocks) {
      for (auto& in : bb.instrs) {
        switch (in.opc) {
        case Opcode::Const:
        case Opcode::SymbolicInput:
          if (in.width < 1 || in.width > 64)
            throw ParseError(in.line, 1, "width mismatch: width out of range");
          def(in.dest, in.width, in);
          break;
        case Opcode::Binop: {
          unsigned wa = use(in.a, in), wb = use(in.b, in);
          if (wa != wb)
            throw ParseError(in.line, 1, "width mismatch: operands of " +
                                             std::string(opName(in.op)));
          def(in.dest, isCompareOp(in.op) ? 1 : wa, in);
          break;
        }
        case Opcode::Select: {
          unsigned wc = use(in.a, in), wt = use(in.b, in), wf = use(in.c, in);
          if (wc != 1) throw ParseError(in.line, 1, "width mismatch: select condition");
          if (wt != wf) throw ParseError(in.line, 1, "width mismatch: select arms");
          def(in.dest, wt, in);
          break;
        }
        case Opcode::Load: {
          auto* g = prog_.findGlobal(in.global);
          if (!g)
            throw ParseError(in.line, 1, "unresolved global '" + in.global + "'");
          use(in.a, in);
          def(in.dest, g->elemWidth, in);
          break;
        }
        case Opcode::Store: {
          auto* g = prog_.findGlobal(in.global);
          if (!g)
            throw ParseError(in.line, 1, "unresolved global '" + in.global + "'");
          use(in.a, in);
          if (use(in.b, in) != g->elemWidth)
            throw ParseError(in.line, 1, "width mismatch: stored value vs element width");
          break;
        }
        case Opcode::Br:
          if (use(in.a, in) != 1)
            throw ParseError(in.line, 1, "width mismatch: br condition must be 1 bit");
          if (!f.blockIndex.count(in.label1))
            throw ParseError(in.line, 1, "unresolved label '" + in.label1 + "'");
          if (!f.blockIndex.count(in.label2))
            throw ParseError(in.line, 1, "unresolved label '" + in.label2 + "'");
          break;
        case Opcode::Jmp:
          if (!f.blockIndex.count(in.label1))
            throw ParseError(in.line, 1, "unresolved label '" + in.label1 + "'");
          break;
        case Opcode::Assume:
          if (use(in.a, in) != 1)
            throw ParseError(in.line, 1, "width mismatch: assume condition must be 1 bit");
          break;
        case Opcode::Ret:
          if (in.hasRetValue) use(in.a, in);
          break;
        case Opcode::Fence:
          break;
        }
      }
    }
  }

  void finalize() {
    if (prog_.functions.empty()) throw ParseError(1, 1, "program has no functions");
    prog_.entry =
        prog_.functionIndex.count("main") ? "main" : prog_.functions.front().name;
    for (auto& f : prog_.functions) validateAndInferWidths(f);
    std::map<std::string, uint64_t> directives;
    for (auto& g : prog_.globals)
      if (g.basePinned) directives[g.name] = g.pinnedBase;
    layoutGlobals(prog_, directives, layout_);
  }
};

bool rangesOverlap(uint64_t a0, uint64_t a1, uint64_t b0, uint64_t b1) {
  return a0 < b1 && b0 < a1;
}

} // namespace

void layoutGlobals(Program& p, const std::map<std::string, uint64_t>& directives,
                   const LayoutOptions& layout) {
  auto alignUp = [](uint64_t v, uint64_t a) { return (v + a - 1) / a * a; };

  struct Range {
    uint64_t begin, end;
  };
  std::vector<Range> pinned;

  for (auto& g : p.globals) {
    auto it = directives.find(g.name);
    if (it != directives.end()) {
      uint64_t base = it->second;
      if (base % g.elemBytes() != 0)
        throw LayoutError("@base for '" + g.name + "' is not element-aligned");
      g.base = base;
      g.basePinned = true;
      g.pinnedBase = base;
      pinned.push_back({base, base + g.sizeBytes()});
    } else {
      g.basePinned = false;
    }
  }
  // pinned objects must be pairwise disjoint
  for (size_t i = 0; i < pinned.size(); ++i)
    for (size_t j = i + 1; j < pinned.size(); ++j)
      if (rangesOverlap(pinned[i].begin, pinned[i].end, pinned[j].begin, pinned[j].end))
        throw LayoutError("overlap between @base directives");

  uint64_t cursor = layout.origin;
  for (auto& g : p.globals) {
    if (g.basePinned) continue;
    cursor = alignUp(cursor, layout.lineBytes);
    bool moved = true;
    while (moved) {
      moved = false;
      for (auto& r : pinned) {
        if (rangesOverlap(cursor, cursor + g.sizeBytes(), r.begin, r.end)) {
          cursor = alignUp(r.end, layout.lineBytes);
          moved = true;
        }
      }
    }
    g.base = cursor;
    cursor += g.sizeBytes();
  }
  // full pairwise disjointness check (address ranges of distinct globals)
  for (size_t i = 0; i < p.globals.size(); ++i)
    for (size_t j = i + 1; j < p.globals.size(); ++j) {
      auto& a = p.globals[i];
      auto& b = p.globals[j];
      if (rangesOverlap(a.base, a.base + a.sizeBytes(), b.base, b.base + b.sizeBytes()))
        throw LayoutError("overlap between '" + a.name + "' and '" + b.name + "'");
    }
}

Program parseProgram(const std::string& text, const LayoutOptions& layout) {
  Parser parser(text, layout);
  return parser.run();
}

namespace {

void printInstr(std::ostream& os, const Instruction& in) {
  switch (in.opc) {
  case Opcode::Const:
    os << in.dest << " = const " << in.width << " " << in.imm;
    break;
  case Opcode::SymbolicInput:
    os << in.dest << " = symbolic " << in.width << (in.userFlag ? " user" : "");
    break;
  case Opcode::Binop:
    os << in.dest << " = " << opName(in.op) << " " << in.a << " " << in.b;
    break;
  case Opcode::Select:
    os << in.dest << " = select " << in.a << " " << in.b << " " << in.c;
    break;
  case Opcode::Load:
    os << in.dest << " = load " << in.global << "[" << in.a << "]";
    break;
  case Opcode::Store:
    os << "store " << in.global << "[" << in.a << "], " << in.b;
    break;
  case Opcode::Br:
    os << "br " << in.a << ", " << in.label1 << ", " << in.label2;
    break;
  case Opcode::Jmp:
    os << "jmp " << in.label1;
    break;
  case Opcode::Fence:
    os << "fence";
    break;
  case Opcode::Assume:
    os << "assume " << in.a;
    break;
  case Opcode::Ret:
    os << "ret";
    if (in.hasRetValue) os << " " << in.a;
    break;
  }
}

} // namespace

std::string prettyPrint(const Program& p) {
  std::ostringstream os;
  for (auto& g : p.globals) {
    os << "global " << g.name << "[" << g.length << "]:" << g.elemWidth;
    if (g.user) os << " user";
    if (g.secret) os << " secret";
    os << " @base 0x" << std::hex << g.base << std::dec << "\n";
  }
  for (auto& f : p.functions) {
    os << "fn " << f.name << "(";
    for (size_t i = 0; i < f.params.size(); ++i) {
      if (i) os << ", ";
      os << f.params[i].first << ":" << f.params[i].second;
    }
    os << ") {\n";
    for (auto& bb : f.blocks) {
      os << bb.label << ":\n";
      for (auto& in : bb.instrs) {
        os << "  ";
        printInstr(os, in);
        os << "\n";
      }
    }
    os << "}\n";
  }
  return os.str();
}

} // namespace specsym
