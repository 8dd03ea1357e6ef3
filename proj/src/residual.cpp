#include "residual.hpp"

#include <algorithm>
#include <sstream>

namespace pspec {

ResidualBuilder::ResidualBuilder(const Program &subject) : subject_(subject) {}

ResidualBuilder::PendingBlock &ResidualBuilder::open() {
  if (open_index_ == SIZE_MAX)
    throw Error(ErrKind::Runtime, "no residual block is open");
  return blocks_[open_index_];
}

void ResidualBuilder::open_block(const std::string &label) {
  if (index_.count(label))
    throw Error(ErrKind::Runtime,
                "residual block " + label + " opened twice");
  index_[label] = blocks_.size();
  blocks_.push_back(PendingBlock{label, {}, {}, false});
  open_index_ = blocks_.size() - 1;
  lift_memo_.clear();
}

void ResidualBuilder::append(const Instruction &in,
                             std::array<std::string, 2> targets) {
  PendingBlock &b = open();
  if (b.terminated)
    throw Error(ErrKind::Runtime,
                "emission into " + b.label + " after its terminator");
  b.instrs.push_back(in);
  b.targets.push_back(std::move(targets));
  if (is_terminator(in.op)) b.terminated = true;
}

void ResidualBuilder::emit_instr(const Instruction &in) {
  if (is_terminator(in.op))
    throw Error(ErrKind::Runtime,
                "terminators go through the jump emitters");
  append(in, {"", ""});
  int wr = written_reg(in);
  if (wr >= 0) lift_memo_.erase(wr);
}

void ResidualBuilder::emit_lift(int reg, Word value) {
  if (auto it = lift_memo_.find(reg);
      it != lift_memo_.end() && it->second == value)
    return;
  Instruction in;
  in.op = Opcode::Const;
  in.dest = reg;
  in.src_is_imm = true;
  in.imm = value;
  append(in, {"", ""});
  lift_memo_[reg] = value;
  ++lifts_;
}

void ResidualBuilder::emit_jump(const std::string &target) {
  Instruction in;
  in.op = Opcode::Jmp;
  append(in, {target, ""});
}

void ResidualBuilder::emit_cond_jump(int src, const std::string &if_zero,
                                     const std::string &if_nonzero) {
  Instruction in;
  in.op = Opcode::Jz;
  in.src = src;
  append(in, {if_zero, if_nonzero});
}

void ResidualBuilder::emit_halt() {
  Instruction in;
  in.op = Opcode::Halt;
  append(in, {"", ""});
}

bool ResidualBuilder::opened(const std::string &label) const {
  return index_.count(label) != 0;
}

Program ResidualBuilder::finalize(const std::string &entry_label) const {
  auto entry = index_.find(entry_label);
  if (entry == index_.end())
    throw Error(ErrKind::Validate,
                "entry block " + entry_label + " was never opened");
  if (entry->second != 0)
    throw Error(ErrKind::Validate,
                "entry block " + entry_label + " was not opened first");

  Program out;
  out.name = subject_.name + "_spec";
  out.regions = subject_.regions;
  // Supplied content was consumed during specialization; the regions stay
  // declared so every address keeps its meaning, but nothing binds them.
  for (auto &r : out.regions)
    if (r.cls == RegionClass::SuppliedInput) r.cls = RegionClass::Scratch;
  for (const auto &b : subject_.inputs)
    if (b.cls == BindClass::Delayed) out.inputs.push_back(b);

  for (const auto &pb : blocks_) {
    if (!pb.terminated)
      throw Error(ErrKind::Validate,
                  "residual block " + pb.label + " is not terminated");
    BasicBlock blk;
    blk.label = pb.label;
    blk.instrs = pb.instrs;
    for (std::size_t i = 0; i < blk.instrs.size(); ++i)
      for (int t = 0; t < 2; ++t) {
        const std::string &lab = pb.targets[i][t];
        if (lab.empty()) continue;
        auto it = index_.find(lab);
        if (it == index_.end())
          throw Error(ErrKind::Validate,
                      "dangling jump target " + lab + " in " + pb.label);
        blk.instrs[i].targets[t] = int(it->second);
      }
    out.blocks.push_back(std::move(blk));
  }

  // The residual must not mention supplied-region addresses symbolically;
  // lifted plain constants are the only sanctioned carrier.
  for (const auto &blk : out.blocks)
    for (const auto &in : blk.instrs)
      if (in.region_ref >= 0 &&
          subject_.regions[in.region_ref].cls == RegionClass::SuppliedInput)
        throw Error(ErrKind::Internal,
                    "residual references supplied region " +
                        subject_.regions[in.region_ref].name);

  auto diags = validate(out);
  if (!diags.empty()) {
    std::ostringstream os;
    os << "finalized residual fails validation:";
    for (const auto &d : diags) os << "\n  " << d;
    throw Error(ErrKind::Internal, os.str());
  }
  return out;
}

Program canonicalize_labels(const Program &p) {
  Program q = p;
  std::map<std::string, int> seen;
  for (auto &b : q.blocks) {
    std::string origin = b.label;
    if (auto pos = origin.rfind("__"); pos != std::string::npos)
      origin.resize(pos);
    b.label = origin + "__" + std::to_string(seen[origin]++);
  }
  return q;
}

}  // namespace pspec
