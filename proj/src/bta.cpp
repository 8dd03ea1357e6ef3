#include "bta.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "error.hpp"

namespace pspec {

namespace {

// Virtual definition block for register values present at entry.
constexpr std::uint32_t kEntryBlock = 0xFFFFFFFFu;

// ---------------------------------------------------- pointer inference
//
// Per-register abstract value: definitely a pointer into one region,
// definitely not derived from a region constant, or unknown.  Anything that
// is not a single-region pointer makes an access touch every region.
struct AbsVal {
  enum Kind { Bottom, NonPtr, RegionPtr, Top };
  Kind kind = Bottom;
  int region = -1;

  bool operator==(const AbsVal &o) const {
    return kind == o.kind && region == o.region;
  }
};

AbsVal av_nonptr() { return {AbsVal::NonPtr, -1}; }
AbsVal av_region(int r) { return {AbsVal::RegionPtr, r}; }
AbsVal av_top() { return {AbsVal::Top, -1}; }

AbsVal av_join(const AbsVal &a, const AbsVal &b) {
  if (a.kind == AbsVal::Bottom) return b;
  if (b.kind == AbsVal::Bottom) return a;
  if (a == b) return a;
  return av_top();
}

using AvState = std::array<AbsVal, kNumRegs>;

AbsVal av_transfer(const Instruction &in, const AvState &s) {
  switch (in.op) {
    case Opcode::Const:
      return in.region_ref >= 0 ? av_region(in.region_ref) : av_nonptr();
    case Opcode::Mov:
      return s[in.src];
    case Opcode::Add:
    case Opcode::Sub: {
      AbsVal l = s[in.dest];
      AbsVal r = in.src_is_imm ? av_nonptr() : s[in.src];
      if (l.kind == AbsVal::Top || r.kind == AbsVal::Top) return av_top();
      bool lp = l.kind == AbsVal::RegionPtr, rp = r.kind == AbsVal::RegionPtr;
      if (lp && !rp) return l;                       // pointer +- number
      if (!lp && !rp) return av_nonptr();
      if (in.op == Opcode::Add && !lp && rp) return r;  // number + pointer
      if (in.op == Opcode::Sub && lp && rp) return av_nonptr();  // difference
      return av_top();
    }
    case Opcode::Mul: case Opcode::Xor: case Opcode::And:
    case Opcode::Or: case Opcode::Shl: case Opcode::Shr:
      // Bit-mangled pointers are no longer tracked; accesses through them
      // fall back to every region.
      return av_nonptr();
    case Opcode::Load:
      return av_top();  // memory may hold stored pointers
    default:
      return av_nonptr();
  }
}

AvState entry_av(const Program &p) {
  AvState s;
  s.fill(av_nonptr());
  for (const auto &b : p.inputs)
    if (b.is_register && !b.points_to.empty()) {
      const Region *r = p.find_region(b.points_to);
      s[b.reg] = av_region(int(r - p.regions.data()));
    }
  return s;
}

// Regions an access through this base value may touch.
std::vector<int> access_regions(const AbsVal &base, std::size_t num_regions) {
  if (base.kind == AbsVal::RegionPtr) return {base.region};
  std::vector<int> all(num_regions);
  for (std::size_t i = 0; i < num_regions; ++i) all[i] = int(i);
  return all;
}

// --------------------------------------------------- postdominator tree

// Control-dependence at block granularity: for each conditional branch, the
// blocks on the postdominator-tree path from each successor up to (but not
// including) the branch block's immediate postdominator.
std::map<int, std::set<int>> controlled_blocks(const Program &p) {
  int n = int(p.blocks.size());
  int exit = n;  // virtual exit after every halt
  auto succ = cfg(p);
  std::vector<std::vector<int>> sx(n);
  for (int b = 0; b < n; ++b) {
    sx[b] = succ[b];
    if (p.blocks[b].instrs.back().op == Opcode::Halt) sx[b].push_back(exit);
  }

  std::vector<std::set<int>> pdom(n + 1);
  std::set<int> full;
  for (int i = 0; i <= n; ++i) full.insert(i);
  for (int b = 0; b < n; ++b) pdom[b] = full;
  pdom[exit] = {exit};

  bool changed = true;
  while (changed) {
    changed = false;
    for (int b = 0; b < n; ++b) {
      std::set<int> next = full;
      for (int s : sx[b]) {
        std::set<int> inter;
        std::set_intersection(next.begin(), next.end(), pdom[s].begin(),
                              pdom[s].end(), std::inserter(inter, inter.end()));
        next = std::move(inter);
      }
      next.insert(b);
      if (next != pdom[b]) {
        pdom[b] = std::move(next);
        changed = true;
      }
    }
  }

  auto ipdom = [&](int b) {
    int best = exit;
    std::size_t want = pdom[b].size() - 1;
    for (int c : pdom[b])
      if (c != b && pdom[c].size() == want) return c;
    return best;
  };

  std::map<int, std::set<int>> out;
  for (int b = 0; b < n; ++b) {
    const auto &term = p.blocks[b].instrs.back();
    if (term.op != Opcode::Jz) continue;
    if (succ[b].size() < 2) continue;  // both arms identical
    int stop = ipdom(b);
    for (int s : succ[b])
      for (int x = s; x != stop && x != exit; x = ipdom(x)) out[b].insert(x);
  }
  return out;
}

// -------------------------------------------------- reaching definitions

using DefSet = std::set<NodeId>;
using RdState = std::array<DefSet, kNumRegs>;

bool rd_merge(RdState &into, const RdState &from) {
  bool changed = false;
  for (int r = 0; r < kNumRegs; ++r)
    for (const auto &d : from[r]) changed |= into[r].insert(d).second;
  return changed;
}

std::vector<RdState> reaching_in(const Program &p) {
  auto succ = cfg(p);
  int n = int(p.blocks.size());
  std::vector<RdState> in(n);
  for (int r = 0; r < kNumRegs; ++r)
    in[0][r].insert(NodeId{kEntryBlock, std::uint32_t(r)});

  std::deque<int> work;
  for (int b = 0; b < n; ++b) work.push_back(b);
  while (!work.empty()) {
    int b = work.front();
    work.pop_front();
    RdState out = in[b];
    for (std::uint32_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      int wr = written_reg(p.blocks[b].instrs[i]);
      if (wr >= 0) out[wr] = {NodeId{std::uint32_t(b), i}};
    }
    for (int s : succ[b])
      if (rd_merge(in[s], out) &&
          std::find(work.begin(), work.end(), s) == work.end())
        work.push_back(s);
  }
  return in;
}

BClass cls_of(const BtaResult &r, const NodeId &n) {
  return r.classes[n.block][n.index];
}

std::string loc(const Program &p, const NodeId &n) {
  return p.blocks[n.block].label + ":" + std::to_string(n.index);
}

}  // namespace

DependenceGraph build_dependence_graph(const Program &p) {
  auto diags = validate(p);
  if (!diags.empty())
    throw Error(ErrKind::Validate, "invalid program: " + diags.front());

  DependenceGraph g;
  g.region_loads.resize(p.regions.size());
  g.region_stores.resize(p.regions.size());

  // Abstract pointer values at block entry, to region-resolve accesses.
  auto succ = cfg(p);
  int n = int(p.blocks.size());
  std::vector<AvState> av_in(n);
  av_in[0] = entry_av(p);
  {
    std::deque<int> work{0};
    std::vector<bool> queued(n, false);
    queued[0] = true;
    while (!work.empty()) {
      int b = work.front();
      work.pop_front();
      queued[b] = false;
      AvState cur = av_in[b];
      for (const auto &in : p.blocks[b].instrs)
        if (written_reg(in) >= 0) cur[in.dest] = av_transfer(in, cur);
      for (int s : succ[b]) {
        AvState merged = av_in[s];
        bool changed = false;
        for (int r = 0; r < kNumRegs; ++r) {
          AbsVal j = av_join(merged[r], cur[r]);
          if (!(j == merged[r])) {
            merged[r] = j;
            changed = true;
          }
        }
        if (changed) {
          av_in[s] = merged;
          if (!queued[s]) {
            work.push_back(s);
            queued[s] = true;
          }
        }
      }
    }
  }

  auto rd_in = reaching_in(p);

  std::map<NodeId, std::set<NodeId>> reg_edges;
  std::map<int, std::set<NodeId>> entry_edges;
  for (int b = 0; b < n; ++b) {
    RdState cur = rd_in[b];
    AvState av = av_in[b];
    for (std::uint32_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction &in = p.blocks[b].instrs[i];
      NodeId node{std::uint32_t(b), i};
      for (int r : read_regs(in))
        for (const auto &d : cur[r]) {
          if (d.block == kEntryBlock)
            entry_edges[r].insert(node);
          else
            reg_edges[d].insert(node);
        }
      if (in.op == Opcode::Load)
        for (int r : access_regions(av[in.src], p.regions.size()))
          g.region_loads[r].push_back(node);
      if (in.op == Opcode::Store)
        for (int r : access_regions(av[in.src], p.regions.size()))
          g.region_stores[r].push_back(node);
      int wr = written_reg(in);
      if (wr >= 0) {
        cur[wr] = {node};
        av[wr] = av_transfer(in, av);
      }
    }
  }
  for (auto &[d, uses] : reg_edges)
    g.reg_succ[d] = std::vector<NodeId>(uses.begin(), uses.end());
  for (auto &[r, uses] : entry_edges)
    g.entry_uses[r] = std::vector<NodeId>(uses.begin(), uses.end());

  // Store-to-load edges through each region.
  std::map<NodeId, std::set<NodeId>> mem_edges;
  for (std::size_t r = 0; r < p.regions.size(); ++r)
    for (const auto &s : g.region_stores[r])
      for (const auto &l : g.region_loads[r]) mem_edges[s].insert(l);
  for (auto &[s, loads] : mem_edges)
    g.region_succ[s] = std::vector<NodeId>(loads.begin(), loads.end());

  // Branch -> controlled instructions.
  for (const auto &[b, blocks] : controlled_blocks(p)) {
    NodeId branch{std::uint32_t(b),
                  std::uint32_t(p.blocks[b].instrs.size() - 1)};
    auto &lst = g.control_succ[branch];
    for (int cb : blocks)
      for (std::uint32_t i = 0; i < p.blocks[cb].instrs.size(); ++i)
        lst.push_back(NodeId{std::uint32_t(cb), i});
  }
  return g;
}

Seeds delayed_seeds(const Program &p) {
  Seeds s;
  for (const auto &b : p.inputs)
    if (b.is_register && b.cls == BindClass::Delayed) s.regs.insert(b.reg);
  for (std::size_t i = 0; i < p.regions.size(); ++i)
    if (p.regions[i].cls == RegionClass::DelayedInput) s.regions.insert(int(i));
  return s;
}

std::set<NodeId> forward_slice(const DependenceGraph &g, const Seeds &seeds) {
  std::set<NodeId> out;
  std::deque<NodeId> work;
  auto push = [&](const NodeId &n) {
    if (out.insert(n).second) work.push_back(n);
  };
  for (int r : seeds.regs)
    if (auto it = g.entry_uses.find(r); it != g.entry_uses.end())
      for (const auto &n : it->second) push(n);
  for (int r : seeds.regions)
    if (r >= 0 && std::size_t(r) < g.region_loads.size())
      for (const auto &n : g.region_loads[r]) push(n);
  while (!work.empty()) {
    NodeId n = work.front();
    work.pop_front();
    if (auto it = g.reg_succ.find(n); it != g.reg_succ.end())
      for (const auto &m : it->second) push(m);
    if (auto it = g.region_succ.find(n); it != g.region_succ.end())
      for (const auto &m : it->second) push(m);
  }
  return out;
}

BtaResult classify(const Program &p, const DependenceGraph &g) {
  BtaResult r;
  auto slice = forward_slice(g, delayed_seeds(p));

  r.classes.resize(p.blocks.size());
  for (std::uint32_t b = 0; b < p.blocks.size(); ++b) {
    r.classes[b].resize(p.blocks[b].instrs.size(), BClass::Supplied);
    for (std::uint32_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      const Instruction &in = p.blocks[b].instrs[i];
      bool delayed = slice.count(NodeId{b, i}) || in.op == Opcode::Out ||
                     in.op == Opcode::Halt;
      r.classes[b][i] = delayed ? BClass::Delayed : BClass::Supplied;
      if (in.op == Opcode::Jz) r.branch_class[NodeId{b, i}] = r.classes[b][i];
    }
  }

  for (const auto &[d, uses] : g.reg_succ) {
    if (cls_of(r, d) != BClass::Supplied) continue;
    for (const auto &u : uses)
      if (cls_of(r, u) == BClass::Delayed) {
        r.lifted.insert(d);
        break;
      }
  }

  std::set<int> supplied_input_regs;
  for (const auto &b : p.inputs)
    if (b.is_register && b.cls == BindClass::Supplied)
      supplied_input_regs.insert(b.reg);
  for (const auto &[reg, uses] : g.entry_uses) {
    if (!supplied_input_regs.count(reg)) continue;
    for (const auto &u : uses)
      if (cls_of(r, u) == BClass::Delayed) {
        r.entry_lifts.insert(reg);
        break;
      }
  }

  // Registers whose supplied value is still read from each block onward.
  {
    auto succ = cfg(p);
    int n = int(p.blocks.size());
    std::vector<std::uint64_t> gen(n, 0), kill(n, 0), live_in(n, 0);
    for (int b = 0; b < n; ++b) {
      for (std::uint32_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
        const Instruction &in = p.blocks[b].instrs[i];
        if (r.classes[b][i] == BClass::Supplied)
          for (int rd : read_regs(in))
            if (!(kill[b] >> rd & 1)) gen[b] |= std::uint64_t{1} << rd;
        int wr = written_reg(in);
        if (wr >= 0) kill[b] |= std::uint64_t{1} << wr;
      }
    }
    bool changed = true;
    while (changed) {
      changed = false;
      for (int b = n - 1; b >= 0; --b) {
        std::uint64_t out = 0;
        for (int s : succ[b]) out |= live_in[s];
        std::uint64_t in = gen[b] | (out & ~kill[b]);
        if (in != live_in[b]) {
          live_in[b] = in;
          changed = true;
        }
      }
    }
    r.keep_mask = std::move(live_in);
  }

  // Region traffic the residual machine could never reproduce.
  for (std::size_t ri = 0; ri < p.regions.size(); ++ri) {
    const Region &region = p.regions[ri];
    const NodeId *bad_load = nullptr;
    for (const auto &l : g.region_loads[ri])
      if (cls_of(r, l) == BClass::Delayed) {
        bad_load = &l;
        break;
      }
    if (region.cls == RegionClass::SuppliedInput) {
      if (bad_load)
        r.violations.push_back(
            "region " + region.name + ": load at " + loc(p, *bad_load) +
            " is residual, but the region's content exists only at "
            "specialization time (supplied input region)");
      for (const auto &s : g.region_stores[ri])
        if (cls_of(r, s) == BClass::Delayed) {
          r.violations.push_back(
              "region " + region.name + ": store at " + loc(p, s) +
              " runs in the residual, but the region's image is not part "
              "of the residual (delayed write into supplied input region)");
          break;
        }
      continue;
    }
    if (!bad_load) continue;
    for (const auto &s : g.region_stores[ri])
      if (cls_of(r, s) == BClass::Supplied) {
        r.violations.push_back(
            "region " + region.name + ": store at " + loc(p, s) +
            " runs at specialization time but load at " + loc(p, *bad_load) +
            " runs in the residual (partially static region)");
        break;
      }
  }

  if (!check_congruence(p, g, r))
    throw Error(ErrKind::Internal, "classification lost congruence");
  return r;
}

bool check_congruence(const Program &p, const DependenceGraph &g,
                      const BtaResult &r) {
  for (const auto &[d, uses] : g.reg_succ)
    if (cls_of(r, d) == BClass::Delayed)
      for (const auto &u : uses)
        if (cls_of(r, u) == BClass::Supplied) return false;
  for (const auto &[s, loads] : g.region_succ)
    if (cls_of(r, s) == BClass::Delayed)
      for (const auto &l : loads)
        if (cls_of(r, l) == BClass::Supplied) return false;
  Seeds seeds = delayed_seeds(p);
  for (int reg : seeds.regs)
    if (auto it = g.entry_uses.find(reg); it != g.entry_uses.end())
      for (const auto &u : it->second)
        if (cls_of(r, u) == BClass::Supplied) return false;
  for (int region : seeds.regions)
    for (const auto &l : g.region_loads[region])
      if (cls_of(r, l) == BClass::Supplied) return false;
  return true;
}

std::string format_bta_report(const Program &p, const BtaResult &r) {
  std::ostringstream os;
  for (std::uint32_t b = 0; b < p.blocks.size(); ++b)
    for (std::uint32_t i = 0; i < p.blocks[b].instrs.size(); ++i) {
      os << p.blocks[b].label << ":" << i << " "
         << opcode_name(p.blocks[b].instrs[i].op) << " "
         << (r.classes[b][i] == BClass::Supplied ? "supplied" : "delayed");
      if (r.lifted.count(NodeId{b, i})) os << " LIFTED";
      os << "\n";
    }
  for (int reg : r.entry_lifts)
    os << "entry r" << reg << " supplied LIFTED\n";
  for (const auto &v : r.violations) os << "violation: " << v << "\n";
  return os.str();
}

}  // namespace pspec
