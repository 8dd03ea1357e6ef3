#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace pspec {

using Word = std::uint64_t;

constexpr int kNumRegs = 16;
constexpr Word kPageWords = 512;             // 4096 bytes, 2^15 bits
constexpr Word kMaxPages = Word{1} << 20;    // declared address space cap

enum class Opcode {
  Const, Mov, Add, Sub, Mul, Xor, And, Or, Shl, Shr,
  Load, Store, Out, Jmp, Jz, Halt,
};

const char *opcode_name(Opcode op);

// One instruction. Field use by opcode:
//   const  dest, imm                      dest := imm
//   mov    dest, src                      dest := src
//   arith  dest, src|imm                  dest := dest op src   (two-operand)
//   load   dest, [src+offset]             dest := mem[src+offset]
//   store  [src+offset], dest             mem[src+offset] := dest
//   out    src                            append src to the output tape
//   jmp    targets[0]
//   jz     src, targets[0], targets[1]    src == 0 -> targets[0], else targets[1]
//   halt                                  stop; r0 is the result register
struct Instruction {
  Opcode op;
  int dest = -1;
  int src = -1;
  bool src_is_imm = false;
  Word imm = 0;
  Word offset = 0;           // word offset for load/store
  std::array<int, 2> targets{-1, -1};
  int region_ref = -1;       // region index when imm was written &name
  int line = 0;              // source line, 0 for built programs

  // region_ref and line are presentation details, not semantics.
  bool operator==(const Instruction &o) const {
    return op == o.op && dest == o.dest && src == o.src &&
           src_is_imm == o.src_is_imm && imm == o.imm && offset == o.offset &&
           targets == o.targets;
  }
};

bool is_terminator(Opcode op);

// Register written by the instruction, or -1.
int written_reg(const Instruction &in);
// Registers read by the instruction (supplied-execution semantics).
// Two-operand arithmetic reads dest; store reads base and value.
std::vector<int> read_regs(const Instruction &in);

struct BasicBlock {
  std::string label;
  std::vector<Instruction> instrs;
  bool operator==(const BasicBlock &o) const {
    return label == o.label && instrs == o.instrs;
  }
};

enum class RegionClass { SuppliedInput, DelayedInput, Scratch };

const char *region_class_name(RegionClass c);

struct Region {
  std::string name;
  Word words = 0;
  RegionClass cls = RegionClass::Scratch;
  Word base = 0;             // word address, page-aligned, assigned in declaration order
  bool operator==(const Region &o) const {
    return name == o.name && words == o.words && cls == o.cls && base == o.base;
  }
};

enum class BindClass { Supplied, Delayed };

struct InputBinding {
  bool is_register = false;
  int reg = -1;              // register index if is_register
  std::string region;        // region name otherwise
  BindClass cls = BindClass::Supplied;
  // For register bindings: region the bound value points into ("ptr <name>").
  // The assignment value must then fall inside that region.
  std::string points_to;
  bool operator==(const InputBinding &o) const {
    return is_register == o.is_register && reg == o.reg && region == o.region &&
           cls == o.cls && points_to == o.points_to;
  }
};

struct Program {
  std::string name;
  std::vector<Region> regions;
  std::vector<InputBinding> inputs;
  std::vector<BasicBlock> blocks;
  // Entry is the first block.

  int block_index(std::string_view label) const;
  const Region *find_region(std::string_view name) const;
  // Region containing the word address, or nullptr.
  const Region *region_at(Word addr) const;
  int region_index_at(Word addr) const;
  Word address_space_words() const;  // end of the last region, page-aligned up
  Word address_space_pages() const;
  std::size_t instruction_count() const;

  bool operator==(const Program &o) const {
    return name == o.name && regions == o.regions && inputs == o.inputs &&
           blocks == o.blocks;
  }
};

// Values for input targets, keyed by target name ("r3" or a region name).
// Register entries hold exactly one word; region entries at most the region size
// and are zero-extended to it.
struct InputAssignment {
  std::map<std::string, std::vector<Word>> values;
};

struct RunResult {
  std::vector<Word> tape;
  Word r0 = 0;
  std::uint64_t steps = 0;
  // Per-region access counts, indexed like Program::regions.
  std::vector<std::uint64_t> region_loads;
  std::vector<std::uint64_t> region_stores;
};

// Throws Error(ErrKind::Parse) with "line L, col C: ..." on malformed text.
Program parse_program(std::string_view text);

// Canonical text; parse_program(pretty_print(p)) == p for valid p.
std::string pretty_print(const Program &p);

// Structural diagnostics; empty means valid.
std::vector<std::string> validate(const Program &p);

// Successor block indices per block.
std::vector<std::vector<int>> cfg(const Program &p);

// Reference interpreter. Registers start at zero, memory at zero, then the
// assignment is applied (it must bind every declared input and nothing else).
// Each instruction costs one unit of fuel.
RunResult run_program(const Program &p, const InputAssignment &a, std::uint64_t fuel);

// Assignment text: one "name = value" per line, where value is an unsigned
// integer, a double-quoted string (one char per word, NUL appended), or a
// bracketed word list [1, 2, 3]. '#' starts a comment outside strings.
InputAssignment parse_assignment(std::string_view text);
std::string print_assignment(const InputAssignment &a);

// dest := dest op src semantics shared by interpreter and specializer.
Word eval_arith(Opcode op, Word a, Word b);

// Throws Error(ErrKind::Input) unless a binds exactly the declared inputs.
void check_assignment(const Program &p, const InputAssignment &a);

}  // namespace pspec
