#include "ir.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace pspec {

namespace {

const char *kOpcodeNames[] = {
    "const", "mov", "add", "sub", "mul", "xor", "and", "or", "shl", "shr",
    "load", "store", "out", "jmp", "jz", "halt",
};

std::optional<Opcode> opcode_from_name(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kOpcodeNames); ++i)
    if (s == kOpcodeNames[i]) return static_cast<Opcode>(i);
  return std::nullopt;
}

Word align_up_page(Word w) {
  return (w + kPageWords - 1) / kPageWords * kPageWords;
}

}  // namespace

const char *opcode_name(Opcode op) { return kOpcodeNames[static_cast<int>(op)]; }

bool is_terminator(Opcode op) {
  return op == Opcode::Jmp || op == Opcode::Jz || op == Opcode::Halt;
}

int written_reg(const Instruction &in) {
  switch (in.op) {
    case Opcode::Const: case Opcode::Mov: case Opcode::Load:
    case Opcode::Add: case Opcode::Sub: case Opcode::Mul: case Opcode::Xor:
    case Opcode::And: case Opcode::Or: case Opcode::Shl: case Opcode::Shr:
      return in.dest;
    default:
      return -1;
  }
}

std::vector<int> read_regs(const Instruction &in) {
  std::vector<int> r;
  switch (in.op) {
    case Opcode::Const:
      break;
    case Opcode::Mov:
      r.push_back(in.src);
      break;
    case Opcode::Add: case Opcode::Sub: case Opcode::Mul: case Opcode::Xor:
    case Opcode::And: case Opcode::Or: case Opcode::Shl: case Opcode::Shr:
      r.push_back(in.dest);
      if (!in.src_is_imm) r.push_back(in.src);
      break;
    case Opcode::Load:
      r.push_back(in.src);
      break;
    case Opcode::Store:
      r.push_back(in.src);
      r.push_back(in.dest);
      break;
    case Opcode::Out:
      r.push_back(in.src);
      break;
    case Opcode::Jz:
      r.push_back(in.src);
      break;
    case Opcode::Halt:
      r.push_back(0);  // r0 is the observable result
      break;
    case Opcode::Jmp:
      break;
  }
  return r;
}

const char *region_class_name(RegionClass c) {
  switch (c) {
    case RegionClass::SuppliedInput: return "supplied";
    case RegionClass::DelayedInput: return "delayed";
    case RegionClass::Scratch: return "scratch";
  }
  return "?";
}

int Program::block_index(std::string_view label) const {
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].label == label) return static_cast<int>(i);
  return -1;
}

const Region *Program::find_region(std::string_view n) const {
  for (const auto &r : regions)
    if (r.name == n) return &r;
  return nullptr;
}

int Program::region_index_at(Word addr) const {
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (addr >= regions[i].base && addr - regions[i].base < regions[i].words)
      return static_cast<int>(i);
  return -1;
}

const Region *Program::region_at(Word addr) const {
  int i = region_index_at(addr);
  return i < 0 ? nullptr : &regions[i];
}

Word Program::address_space_words() const {
  Word end = 0;
  for (const auto &r : regions) end = std::max(end, r.base + r.words);
  return align_up_page(end);
}

Word Program::address_space_pages() const {
  return address_space_words() / kPageWords;
}

std::size_t Program::instruction_count() const {
  std::size_t n = 0;
  for (const auto &b : blocks) n += b.instrs.size();
  return n;
}

// ---------------------------------------------------------------- parsing

namespace {

struct Token {
  enum Kind { Ident, Number, Punct, End } kind;
  std::string_view text;
  Word value = 0;   // for Number
  int col = 0;
};

[[noreturn]] void parse_fail(int line, int col, const std::string &msg) {
  std::ostringstream os;
  os << "line " << line << ", col " << col << ": " << msg;
  throw Error(ErrKind::Parse, os.str());
}

class LineLexer {
 public:
  LineLexer(std::string_view text, int line) : text_(text), line_(line) { advance(); }

  const Token &peek() const { return tok_; }

  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

  Token expect_ident(const char *what) {
    if (tok_.kind != Token::Ident)
      parse_fail(line_, tok_.col, std::string("expected ") + what);
    return next();
  }

  Word expect_number(const char *what) {
    if (tok_.kind != Token::Number)
      parse_fail(line_, tok_.col, std::string("expected ") + what);
    return next().value;
  }

  void expect_punct(char c) {
    if (tok_.kind != Token::Punct || tok_.text[0] != c)
      parse_fail(line_, tok_.col, std::string("expected '") + c + "'");
    advance();
  }

  bool at_punct(char c) const {
    return tok_.kind == Token::Punct && tok_.text[0] == c;
  }

  bool at_end() const { return tok_.kind == Token::End; }

  void expect_end() {
    if (tok_.kind != Token::End)
      parse_fail(line_, tok_.col, "trailing tokens");
  }

  int line() const { return line_; }

 private:
  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    tok_.col = static_cast<int>(pos_) + 1;
    if (pos_ >= text_.size() || text_[pos_] == '#') {
      tok_ = {Token::End, {}, 0, tok_.col};
      return;
    }
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      tok_ = {Token::Ident, text_.substr(start, pos_ - start), 0, static_cast<int>(start) + 1};
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      int base = 10;
      if (c == '0' && pos_ + 1 < text_.size() &&
          (text_[pos_ + 1] == 'x' || text_[pos_ + 1] == 'X')) {
        base = 16;
        pos_ += 2;
      }
      std::size_t digits = pos_;
      while (pos_ < text_.size() &&
             std::isalnum(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      Word v = 0;
      auto sv = text_.substr(digits, pos_ - digits);
      auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v, base);
      if (res.ec != std::errc() || res.ptr != sv.data() + sv.size())
        parse_fail(line_, static_cast<int>(start) + 1, "bad number");
      tok_ = {Token::Number, text_.substr(start, pos_ - start), v,
              static_cast<int>(start) + 1};
      return;
    }
    if (std::string_view("[]+,:=&").find(c) != std::string_view::npos) {
      tok_ = {Token::Punct, text_.substr(pos_, 1), 0, static_cast<int>(pos_) + 1};
      ++pos_;
      return;
    }
    parse_fail(line_, static_cast<int>(pos_) + 1,
               std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_;
  Token tok_;
};

std::optional<int> reg_index(std::string_view s) {
  if (s.size() < 2 || s.size() > 3 || s[0] != 'r') return std::nullopt;
  int v = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    v = v * 10 + (s[i] - '0');
  }
  if (s.size() == 3 && s[1] == '0') return std::nullopt;
  if (v >= kNumRegs) return std::nullopt;
  return v;
}

int expect_reg(LineLexer &lx) {
  Token t = lx.peek();
  auto id = lx.expect_ident("register");
  auto r = reg_index(id.text);
  if (!r) parse_fail(lx.line(), t.col, "expected register r0..r15");
  return *r;
}

struct PendingTarget {
  int block, instr, slot;
  std::string label;
  int line, col;
};

}  // namespace

Program parse_program(std::string_view text) {
  Program p;
  std::vector<PendingTarget> pending;
  bool saw_program = false;
  bool in_blocks = false;
  Word next_base = 0;
  int line_no = 0;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos
                                                 ? text.size() - pos
                                                 : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    LineLexer lx(line, line_no);
    if (lx.peek().kind == Token::End) continue;
    Token head = lx.peek();
    if (head.kind != Token::Ident)
      parse_fail(line_no, head.col, "expected directive or instruction");

    if (head.text == "program") {
      lx.next();
      if (saw_program) parse_fail(line_no, head.col, "duplicate program directive");
      p.name = std::string(lx.expect_ident("program name").text);
      lx.expect_end();
      saw_program = true;
      continue;
    }
    if (!saw_program)
      parse_fail(line_no, head.col, "expected 'program <name>' first");

    if (head.text == "region") {
      lx.next();
      if (in_blocks) parse_fail(line_no, head.col, "region after first block");
      Region r;
      Token name = lx.peek();
      r.name = std::string(lx.expect_ident("region name").text);
      if (p.find_region(r.name))
        parse_fail(line_no, name.col, "duplicate region " + r.name);
      Token cls = lx.peek();
      auto cname = lx.expect_ident("region class").text;
      if (cname == "supplied") r.cls = RegionClass::SuppliedInput;
      else if (cname == "delayed") r.cls = RegionClass::DelayedInput;
      else if (cname == "scratch") r.cls = RegionClass::Scratch;
      else parse_fail(line_no, cls.col, "region class must be supplied, delayed or scratch");
      Token kw = lx.peek();
      if (lx.expect_ident("words=<n>").text != "words")
        parse_fail(line_no, kw.col, "expected words=<n>");
      lx.expect_punct('=');
      r.words = lx.expect_number("word count");
      if (r.words == 0) parse_fail(line_no, kw.col, "region with zero words");
      lx.expect_end();
      r.base = next_base;
      next_base = align_up_page(r.base + r.words);
      if (next_base / kPageWords > kMaxPages)
        parse_fail(line_no, head.col, "address space exceeds 2^20 pages");
      p.regions.push_back(std::move(r));
      continue;
    }

    if (head.text == "input") {
      lx.next();
      if (in_blocks) parse_fail(line_no, head.col, "input after first block");
      InputBinding b;
      Token target = lx.peek();
      auto tname = lx.expect_ident("input target").text;
      if (auto r = reg_index(tname)) {
        b.is_register = true;
        b.reg = *r;
      } else {
        if (!p.find_region(tname))
          parse_fail(line_no, target.col, "unknown input target " + std::string(tname));
        b.region = std::string(tname);
      }
      Token cls = lx.peek();
      auto cname = lx.expect_ident("input class").text;
      if (cname == "supplied") b.cls = BindClass::Supplied;
      else if (cname == "delayed") b.cls = BindClass::Delayed;
      else parse_fail(line_no, cls.col, "input class must be supplied or delayed");
      if (!lx.at_end()) {
        Token kw = lx.peek();
        if (lx.expect_ident("ptr <region>").text != "ptr" || !b.is_register)
          parse_fail(line_no, kw.col,
                     "only 'ptr <region>' may follow a register input class");
        Token rn = lx.peek();
        auto rname = lx.expect_ident("region name").text;
        if (!p.find_region(rname))
          parse_fail(line_no, rn.col, "unknown region " + std::string(rname));
        b.points_to = std::string(rname);
      }
      lx.expect_end();
      p.inputs.push_back(std::move(b));
      continue;
    }

    if (head.text == "block") {
      lx.next();
      in_blocks = true;
      if (!p.blocks.empty() &&
          (p.blocks.back().instrs.empty() ||
           !is_terminator(p.blocks.back().instrs.back().op)))
        parse_fail(line_no, head.col,
                   "block " + p.blocks.back().label + " not terminated");
      Token name = lx.peek();
      BasicBlock b;
      b.label = std::string(lx.expect_ident("block label").text);
      lx.expect_punct(':');
      lx.expect_end();
      if (p.block_index(b.label) >= 0)
        parse_fail(line_no, name.col, "duplicate label " + b.label);
      p.blocks.push_back(std::move(b));
      continue;
    }

    // Instruction line.
    auto opc = opcode_from_name(head.text);
    if (!opc) parse_fail(line_no, head.col, "unknown opcode '" + std::string(head.text) + "'");
    if (p.blocks.empty()) parse_fail(line_no, head.col, "instruction outside a block");
    if (!p.blocks.back().instrs.empty() &&
        is_terminator(p.blocks.back().instrs.back().op))
      parse_fail(line_no, head.col, "instruction after terminator");
    lx.next();

    Instruction in;
    in.op = *opc;
    in.line = line_no;
    auto parse_target = [&](int slot) {
      Token t = lx.peek();
      auto label = lx.expect_ident("block label");
      pending.push_back({static_cast<int>(p.blocks.size()) - 1,
                         static_cast<int>(p.blocks.back().instrs.size()), slot,
                         std::string(label.text), line_no, t.col});
    };
    auto parse_mem = [&]() {
      lx.expect_punct('[');
      in.src = expect_reg(lx);
      if (lx.at_punct('+')) {
        lx.expect_punct('+');
        in.offset = lx.expect_number("word offset");
      }
      lx.expect_punct(']');
    };

    switch (in.op) {
      case Opcode::Const: {
        in.dest = expect_reg(lx);
        lx.expect_punct(',');
        in.src_is_imm = true;
        if (lx.at_punct('&')) {
          Token amp = lx.peek();
          lx.expect_punct('&');
          auto rn = lx.expect_ident("region name");
          const Region *r = p.find_region(rn.text);
          if (!r) parse_fail(line_no, amp.col, "unknown region " + std::string(rn.text));
          in.imm = r->base;
          in.region_ref = int(r - p.regions.data());
        } else {
          in.imm = lx.expect_number("immediate");
        }
        break;
      }
      case Opcode::Mov:
        in.dest = expect_reg(lx);
        lx.expect_punct(',');
        in.src = expect_reg(lx);
        break;
      case Opcode::Add: case Opcode::Sub: case Opcode::Mul: case Opcode::Xor:
      case Opcode::And: case Opcode::Or: case Opcode::Shl: case Opcode::Shr:
        in.dest = expect_reg(lx);
        lx.expect_punct(',');
        if (lx.peek().kind == Token::Number) {
          in.src_is_imm = true;
          in.imm = lx.expect_number("immediate");
        } else {
          in.src = expect_reg(lx);
        }
        break;
      case Opcode::Load:
        in.dest = expect_reg(lx);
        lx.expect_punct(',');
        parse_mem();
        break;
      case Opcode::Store:
        parse_mem();
        lx.expect_punct(',');
        in.dest = expect_reg(lx);
        break;
      case Opcode::Out:
        in.src = expect_reg(lx);
        break;
      case Opcode::Jmp:
        parse_target(0);
        break;
      case Opcode::Jz:
        in.src = expect_reg(lx);
        lx.expect_punct(',');
        parse_target(0);
        lx.expect_punct(',');
        parse_target(1);
        break;
      case Opcode::Halt:
        break;
    }
    lx.expect_end();
    p.blocks.back().instrs.push_back(in);
  }

  if (!saw_program) throw Error(ErrKind::Parse, "line 1, col 1: empty program");
  if (p.blocks.empty())
    parse_fail(line_no, 1, "program has no blocks");
  if (p.blocks.back().instrs.empty() ||
      !is_terminator(p.blocks.back().instrs.back().op))
    parse_fail(line_no, 1, "block " + p.blocks.back().label + " not terminated");

  for (const auto &t : pending) {
    int idx = p.block_index(t.label);
    if (idx < 0) parse_fail(t.line, t.col, "unknown label " + t.label);
    p.blocks[t.block].instrs[t.instr].targets[t.slot] = idx;
  }
  return p;
}

std::string pretty_print(const Program &p) {
  std::ostringstream os;
  os << "program " << p.name << "\n";
  for (const auto &r : p.regions)
    os << "region " << r.name << " " << region_class_name(r.cls)
       << " words=" << r.words << "\n";
  for (const auto &b : p.inputs) {
    os << "input ";
    if (b.is_register) os << "r" << b.reg;
    else os << b.region;
    os << " " << (b.cls == BindClass::Supplied ? "supplied" : "delayed");
    if (!b.points_to.empty()) os << " ptr " << b.points_to;
    os << "\n";
  }
  for (const auto &b : p.blocks) {
    os << "\nblock " << b.label << ":\n";
    for (const auto &in : b.instrs) {
      os << "  " << opcode_name(in.op);
      auto target = [&](int slot) -> const std::string & {
        return p.blocks[in.targets[slot]].label;
      };
      switch (in.op) {
        case Opcode::Const:
          os << " r" << in.dest << ", ";
          if (in.region_ref >= 0) os << "&" << p.regions[in.region_ref].name;
          else os << in.imm;
          break;
        case Opcode::Mov:
          os << " r" << in.dest << ", r" << in.src;
          break;
        case Opcode::Add: case Opcode::Sub: case Opcode::Mul: case Opcode::Xor:
        case Opcode::And: case Opcode::Or: case Opcode::Shl: case Opcode::Shr:
          os << " r" << in.dest << ", ";
          if (in.src_is_imm) os << in.imm;
          else os << "r" << in.src;
          break;
        case Opcode::Load:
          os << " r" << in.dest << ", [r" << in.src << "+" << in.offset << "]";
          break;
        case Opcode::Store:
          os << " [r" << in.src << "+" << in.offset << "], r" << in.dest;
          break;
        case Opcode::Out:
          os << " r" << in.src;
          break;
        case Opcode::Jmp:
          os << " " << target(0);
          break;
        case Opcode::Jz:
          os << " r" << in.src << ", " << target(0) << ", " << target(1);
          break;
        case Opcode::Halt:
          break;
      }
      os << "\n";
    }
  }
  return os.str();
}

std::vector<std::string> validate(const Program &p) {
  std::vector<std::string> d;
  auto complain = [&](std::string s) { d.push_back(std::move(s)); };

  if (p.name.empty()) complain("program name is empty");
  if (p.blocks.empty()) complain("program has no blocks");

  std::unordered_set<std::string> region_names;
  for (const auto &r : p.regions) {
    if (!region_names.insert(r.name).second)
      complain("duplicate region " + r.name);
    if (r.words == 0) complain("region " + r.name + ": zero words");
    if (r.base % kPageWords != 0)
      complain("region " + r.name + ": base not page-aligned");
  }
  auto sorted = p.regions;
  std::sort(sorted.begin(), sorted.end(),
            [](const Region &a, const Region &b) { return a.base < b.base; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i - 1].base + sorted[i - 1].words > sorted[i].base)
      complain("regions " + sorted[i - 1].name + "/" + sorted[i].name + " overlap");
  if (p.address_space_pages() > kMaxPages)
    complain("address space exceeds 2^20 pages");

  std::unordered_set<std::string> labels;
  for (const auto &b : p.blocks)
    if (!labels.insert(b.label).second) complain("duplicate label " + b.label);

  int nblocks = static_cast<int>(p.blocks.size());
  auto reg_ok = [](int r) { return r >= 0 && r < kNumRegs; };
  for (const auto &b : p.blocks) {
    if (b.instrs.empty()) {
      complain("block " + b.label + ": empty");
      continue;
    }
    if (!is_terminator(b.instrs.back().op))
      complain("block " + b.label + ": missing terminator");
    for (std::size_t i = 0; i < b.instrs.size(); ++i) {
      const auto &in = b.instrs[i];
      auto where = [&] {
        return "block " + b.label + " instr " + std::to_string(i);
      };
      if (is_terminator(in.op) && i + 1 != b.instrs.size())
        complain(where() + ": terminator not at block end");
      if (written_reg(in) >= 0 && !reg_ok(in.dest))
        complain(where() + ": bad register");
      for (int r : read_regs(in))
        if (!reg_ok(r)) complain(where() + ": bad register");
      if (in.op == Opcode::Jmp || in.op == Opcode::Jz) {
        int n = in.op == Opcode::Jz ? 2 : 1;
        for (int s = 0; s < n; ++s)
          if (in.targets[s] < 0 || in.targets[s] >= nblocks)
            complain(where() + ": bad jump target");
      }
      if (in.op == Opcode::Const && !in.src_is_imm)
        complain(where() + ": const needs an immediate");
      if (in.region_ref >= 0 &&
          std::size_t(in.region_ref) >= p.regions.size())
        complain(where() + ": region reference out of range");
      if ((in.op == Opcode::Mov || in.op == Opcode::Load ||
           in.op == Opcode::Store || in.op == Opcode::Out ||
           in.op == Opcode::Jz) && in.src_is_imm)
        complain(where() + ": register operand required");
    }
  }

  std::unordered_set<std::string> bound;
  for (const auto &in : p.inputs) {
    if (in.is_register) {
      if (!reg_ok(in.reg)) {
        complain("input: bad register");
        continue;
      }
      if (!bound.insert("r" + std::to_string(in.reg)).second)
        complain("input r" + std::to_string(in.reg) + ": bound twice");
      if (!in.points_to.empty() && !p.find_region(in.points_to))
        complain("input r" + std::to_string(in.reg) + ": points at unknown region " +
                 in.points_to);
    } else {
      if (!in.points_to.empty())
        complain("input " + in.region + ": only register inputs may be pointers");
      const Region *r = p.find_region(in.region);
      if (!r) {
        complain("input " + in.region + ": unknown region");
        continue;
      }
      if (!bound.insert(in.region).second)
        complain("input " + in.region + ": bound twice");
      if (r->cls == RegionClass::Scratch)
        complain("input " + in.region + ": scratch region not bindable");
      else if ((r->cls == RegionClass::SuppliedInput) !=
               (in.cls == BindClass::Supplied))
        complain("input " + in.region + ": class mismatch");
    }
  }
  for (const auto &r : p.regions)
    if (r.cls != RegionClass::Scratch && !bound.count(r.name))
      complain("region " + r.name + ": input-class region not bound");

  return d;
}

std::vector<std::vector<int>> cfg(const Program &p) {
  std::vector<std::vector<int>> succ(p.blocks.size());
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    if (p.blocks[i].instrs.empty()) continue;
    const auto &t = p.blocks[i].instrs.back();
    if (t.op == Opcode::Jmp) succ[i] = {t.targets[0]};
    else if (t.op == Opcode::Jz) {
      succ[i] = {t.targets[0]};
      if (t.targets[1] != t.targets[0]) succ[i].push_back(t.targets[1]);
    }
  }
  return succ;
}

// ------------------------------------------------------------- execution

Word eval_arith(Opcode op, Word a, Word b) {
  switch (op) {
    case Opcode::Add: return a + b;
    case Opcode::Sub: return a - b;
    case Opcode::Mul: return a * b;
    case Opcode::Xor: return a ^ b;
    case Opcode::And: return a & b;
    case Opcode::Or: return a | b;
    case Opcode::Shl: return a << (b & 63);
    case Opcode::Shr: return a >> (b & 63);
    default: throw Error(ErrKind::Internal, "eval_arith: not arithmetic");
  }
}

namespace {

struct FlatMemory {
  std::unordered_map<Word, std::array<Word, kPageWords>> pages;

  Word read(Word addr) const {
    auto it = pages.find(addr / kPageWords);
    return it == pages.end() ? 0 : it->second[addr % kPageWords];
  }
  void write(Word addr, Word v) {
    auto it = pages.find(addr / kPageWords);
    if (it == pages.end())
      it = pages.emplace(addr / kPageWords, std::array<Word, kPageWords>{}).first;
    it->second[addr % kPageWords] = v;
  }
};

}  // namespace

void check_assignment(const Program &p, const InputAssignment &a) {
  std::unordered_set<std::string> expected;
  for (const auto &b : p.inputs)
    expected.insert(b.is_register ? "r" + std::to_string(b.reg) : b.region);
  for (const auto &[name, vals] : a.values) {
    if (!expected.count(name))
      throw Error(ErrKind::Input, "assignment for unknown input " + name);
    if (auto r = reg_index(name)) {
      if (vals.size() != 1)
        throw Error(ErrKind::Input, "register " + name + " needs exactly one word");
      for (const auto &b : p.inputs) {
        if (!b.is_register || b.reg != int(*r) || b.points_to.empty()) continue;
        const Region *tr = p.find_region(b.points_to);
        if (tr && (vals[0] < tr->base || vals[0] - tr->base >= tr->words))
          throw Error(ErrKind::Input, name + " = " + std::to_string(vals[0]) +
                                          " does not point into region " +
                                          b.points_to);
      }
    } else {
      const Region *reg = p.find_region(name);
      if (vals.size() > reg->words)
        throw Error(ErrKind::Input, "value for region " + name + " too long");
    }
  }
  for (const auto &name : expected)
    if (!a.values.count(name))
      throw Error(ErrKind::Input, "input " + name + " not assigned");
}

RunResult run_program(const Program &p, const InputAssignment &a, std::uint64_t fuel) {
  auto diags = validate(p);
  if (!diags.empty())
    throw Error(ErrKind::Validate, "invalid program: " + diags.front());
  check_assignment(p, a);

  std::array<Word, kNumRegs> regs{};
  FlatMemory mem;
  for (const auto &[name, vals] : a.values) {
    if (auto r = reg_index(name)) {
      regs[*r] = vals[0];
    } else {
      const Region *reg = p.find_region(name);
      for (std::size_t i = 0; i < vals.size(); ++i)
        if (vals[i] != 0) mem.write(reg->base + i, vals[i]);
    }
  }

  RunResult res;
  res.region_loads.assign(p.regions.size(), 0);
  res.region_stores.assign(p.regions.size(), 0);

  int block = 0;
  std::size_t ip = 0;
  while (true) {
    if (res.steps >= fuel)
      throw Error(ErrKind::Runtime, "fuel exhausted after " +
                                        std::to_string(res.steps) + " steps");
    const auto &in = p.blocks[block].instrs[ip];
    ++res.steps;
    auto fault = [&](const std::string &msg) -> Error {
      return Error(ErrKind::Runtime, msg + " (block " + p.blocks[block].label +
                                         " instr " + std::to_string(ip) + ")");
    };
    switch (in.op) {
      case Opcode::Const:
        regs[in.dest] = in.imm;
        break;
      case Opcode::Mov:
        regs[in.dest] = regs[in.src];
        break;
      case Opcode::Add: case Opcode::Sub: case Opcode::Mul: case Opcode::Xor:
      case Opcode::And: case Opcode::Or: case Opcode::Shl: case Opcode::Shr:
        regs[in.dest] = eval_arith(in.op, regs[in.dest],
                                   in.src_is_imm ? in.imm : regs[in.src]);
        break;
      case Opcode::Load: {
        Word addr = regs[in.src] + in.offset;
        int ri = p.region_index_at(addr);
        if (ri < 0) throw fault("load outside any region: address " + std::to_string(addr));
        ++res.region_loads[ri];
        regs[in.dest] = mem.read(addr);
        break;
      }
      case Opcode::Store: {
        Word addr = regs[in.src] + in.offset;
        int ri = p.region_index_at(addr);
        if (ri < 0) throw fault("store outside any region: address " + std::to_string(addr));
        ++res.region_stores[ri];
        mem.write(addr, regs[in.dest]);
        break;
      }
      case Opcode::Out:
        res.tape.push_back(regs[in.src]);
        break;
      case Opcode::Jmp:
        block = in.targets[0];
        ip = 0;
        continue;
      case Opcode::Jz:
        block = regs[in.src] == 0 ? in.targets[0] : in.targets[1];
        ip = 0;
        continue;
      case Opcode::Halt:
        res.r0 = regs[0];
        return res;
    }
    ++ip;
  }
}

// ------------------------------------------------------- assignment text

InputAssignment parse_assignment(std::string_view text) {
  InputAssignment a;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos
                                                 ? text.size() - pos
                                                 : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    // Strip comments, respecting string literals.
    bool in_str = false;
    std::size_t cut = line.size();
    for (std::size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      if (in_str) {
        if (c == '\\') ++i;
        else if (c == '"') in_str = false;
      } else if (c == '"') {
        in_str = true;
      } else if (c == '#') {
        cut = i;
        break;
      }
    }
    line = line.substr(0, cut);

    std::size_t i = 0;
    auto skip_ws = [&] {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    };
    skip_ws();
    if (i == line.size()) continue;

    std::size_t name_start = i;
    while (i < line.size() &&
           (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_'))
      ++i;
    if (i == name_start)
      parse_fail(line_no, static_cast<int>(i) + 1, "expected input name");
    std::string name(line.substr(name_start, i - name_start));
    skip_ws();
    if (i >= line.size() || line[i] != '=')
      parse_fail(line_no, static_cast<int>(i) + 1, "expected '='");
    ++i;
    skip_ws();
    if (i >= line.size())
      parse_fail(line_no, static_cast<int>(i) + 1, "expected value");

    std::vector<Word> vals;
    auto read_number = [&]() -> Word {
      std::size_t start = i;
      int base = 10;
      if (line[i] == '0' && i + 1 < line.size() &&
          (line[i + 1] == 'x' || line[i + 1] == 'X')) {
        base = 16;
        i += 2;
      }
      std::size_t digits = i;
      while (i < line.size() && std::isalnum(static_cast<unsigned char>(line[i]))) ++i;
      Word v = 0;
      auto sv = line.substr(digits, i - digits);
      auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v, base);
      if (sv.empty() || res.ec != std::errc() || res.ptr != sv.data() + sv.size())
        parse_fail(line_no, static_cast<int>(start) + 1, "bad number");
      return v;
    };

    if (line[i] == '"') {
      ++i;
      while (i < line.size() && line[i] != '"') {
        char c = line[i];
        if (c == '\\' && i + 1 < line.size()) {
          ++i;
          c = line[i];
          if (c == 'n') c = '\n';
          else if (c == '0') c = '\0';
        }
        vals.push_back(static_cast<unsigned char>(c));
        ++i;
      }
      if (i >= line.size())
        parse_fail(line_no, static_cast<int>(i) + 1, "unterminated string");
      ++i;
      vals.push_back(0);
    } else if (line[i] == '[') {
      ++i;
      skip_ws();
      while (i < line.size() && line[i] != ']') {
        vals.push_back(read_number());
        skip_ws();
        if (i < line.size() && line[i] == ',') {
          ++i;
          skip_ws();
        }
      }
      if (i >= line.size())
        parse_fail(line_no, static_cast<int>(i) + 1, "unterminated list");
      ++i;
    } else {
      vals.push_back(read_number());
    }
    skip_ws();
    if (i != line.size())
      parse_fail(line_no, static_cast<int>(i) + 1, "trailing characters");
    if (!a.values.emplace(name, std::move(vals)).second)
      parse_fail(line_no, 1, "duplicate assignment for " + name);
  }
  return a;
}

std::string print_assignment(const InputAssignment &a) {
  std::ostringstream os;
  for (const auto &[name, vals] : a.values) {
    os << name << " = ";
    if (reg_index(name) && vals.size() == 1) {
      os << vals[0];
    } else {
      os << "[";
      for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) os << ", ";
        os << vals[i];
      }
      os << "]";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace pspec
