#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ir.hpp"

namespace pspec {

// An instruction position: (block index, instruction index).
struct NodeId {
  std::uint32_t block = 0;
  std::uint32_t index = 0;
  auto operator<=>(const NodeId &) const = default;
};

enum class BClass { Supplied, Delayed };

// Dependences between instructions.
//
// Register edges are def-to-use and respect reaching definitions; memory
// edges are store-to-load at region granularity (any write to a region may
// feed any read of it); control edges go from a conditional branch to every
// instruction control-dependent on it, computed from immediate
// postdominators with a virtual exit node.
struct DependenceGraph {
  std::map<NodeId, std::vector<NodeId>> reg_succ;
  std::map<NodeId, std::vector<NodeId>> region_succ;
  std::map<NodeId, std::vector<NodeId>> control_succ;
  // Uses reached by a register's entry value, before any redefinition.
  std::map<int, std::vector<NodeId>> entry_uses;
  // Loads/stores that may touch each region, indexed like Program::regions.
  std::vector<std::vector<NodeId>> region_loads;
  std::vector<std::vector<NodeId>> region_stores;
};

// Delayed seeds for slicing: registers whose entry value arrives late, and
// regions whose content does.
struct Seeds {
  std::set<int> regs;
  std::set<int> regions;
};

struct BtaResult {
  // Per block, per instruction.  Delayed instructions are emitted into the
  // residual program; supplied ones execute during specialization.
  std::vector<std::vector<BClass>> classes;
  // Conditional branches only.  A supplied branch picks one successor at
  // specialization time; a delayed one stays a branch in the residual.
  std::map<NodeId, BClass> branch_class;
  // Supplied definitions whose value some delayed use needs: the specializer
  // emits a const with the computed value right after executing them.
  std::set<NodeId> lifted;
  // Supplied input registers whose entry value feeds a delayed use; their
  // values are materialized at the top of the residual entry block.
  std::set<int> entry_lifts;
  // Per block: registers whose supplied value may still be read (by supplied
  // instructions) from the block's entry onward.  Everything else is zeroed
  // when a state is sealed, so states differing only in dead or
  // residual-owned registers coincide.
  std::vector<std::uint64_t> keep_mask;
  // Region reads the residual program could never satisfy (content that
  // exists only inside the specializer).  Non-empty means the program is
  // outside the supported fragment.
  std::vector<std::string> violations;
};

DependenceGraph build_dependence_graph(const Program &p);

Seeds delayed_seeds(const Program &p);

// Everything reachable from the seed uses through register and region data
// edges.  Control edges are not followed: residual control flow is handled
// by the specializer's worklist, and effect instructions are always
// residualized by classify regardless of the slice.
std::set<NodeId> forward_slice(const DependenceGraph &g, const Seeds &seeds);

// Slice from the delayed inputs, then derive classes, branch classes, the
// lift sets, per-block keep masks and congruence violations.
BtaResult classify(const Program &p, const DependenceGraph &g);

// True when every supplied instruction depends only on supplied
// definitions.  classify() results always satisfy this; exposed so tests
// can check it independently.
bool check_congruence(const Program &p, const DependenceGraph &g,
                      const BtaResult &r);

// One line per instruction: "<label>:<index> <opcode> <class>[ LIFTED]",
// followed by violation lines if any.
std::string format_bta_report(const Program &p, const BtaResult &r);

}  // namespace pspec
