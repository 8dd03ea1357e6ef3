#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ir.hpp"

namespace pspec {

// Assembles the specialized program.  Blocks are keyed by minted labels
// ("<origin>__<state tag>"), appear in first-opened order, and are stitched
// into a validated Program by finalize().
//
// Lifted constants are memoized per open block: re-lifting the same value
// into the same register is a no-op until something overwrites the
// register.
class ResidualBuilder {
 public:
  // The subject program supplies the residual's name, its region table and
  // the delayed input bindings.  Supplied input regions are carried over as
  // scratch so every region keeps its address; their content does not ship.
  explicit ResidualBuilder(const Program &subject);

  void open_block(const std::string &label);

  // Straight-line delayed instruction, copied verbatim.  Terminators go
  // through the dedicated emitters below so their targets stay symbolic.
  void emit_instr(const Instruction &in);
  void emit_lift(int reg, Word value);
  void emit_jump(const std::string &target);
  void emit_cond_jump(int src, const std::string &if_zero,
                      const std::string &if_nonzero);
  void emit_halt();

  bool opened(const std::string &label) const;
  std::size_t blocks_opened() const { return blocks_.size(); }
  // Lift constants actually appended (memo hits excluded).
  std::size_t lifts_emitted() const { return lifts_; }

  // Resolves jump targets, checks that the entry label was opened first and
  // every block is terminated, and returns a Program that passes validate().
  Program finalize(const std::string &entry_label) const;

 private:
  struct PendingBlock {
    std::string label;
    std::vector<Instruction> instrs;
    // Symbolic targets per instruction; empty strings when not a jump.
    std::vector<std::array<std::string, 2>> targets;
    bool terminated = false;
  };

  PendingBlock &open();
  void append(const Instruction &in, std::array<std::string, 2> targets);

  Program subject_;
  std::vector<PendingBlock> blocks_;
  std::map<std::string, std::size_t> index_;
  std::size_t open_index_ = SIZE_MAX;
  std::map<int, Word> lift_memo_;
  std::size_t lifts_ = 0;
};

// Renames every block to "<origin>__<k>", where origin is the label up to
// its last "__" and k counts blocks with that origin in program order.
// Erases the state tags minted during specialization, so structurally equal
// residuals from different runs print identically.
Program canonicalize_labels(const Program &p);

}  // namespace pspec
