#pragma once

#include <cstdint>
#include <string>

#include "bta.hpp"
#include "ir.hpp"
#include "residual.hpp"
#include "statestore.hpp"

namespace pspec {

struct SpecConfig {
  bool cow_enabled = true;
  bool fingerprint_enabled = true;
  // Processed (state, block) pairs before giving up; exceeding it signals
  // unbounded supplied-state growth.
  std::uint64_t max_states = 100000;
  // Supplied instructions executed per block instance.
  std::uint64_t fuel = std::uint64_t{1} << 20;
};

struct SpecMetrics {
  std::uint64_t states_visited = 0;
  std::uint64_t enqueues = 0;
  std::uint64_t dedup_hits = 0;
  StoreMetrics store;
  std::uint64_t original_instructions = 0;
  std::uint64_t residual_instructions = 0;
  double wall_ms = 0.0;
};

struct SpecResult {
  Program residual;
  SpecMetrics metrics;
};

// Drives the worklist over (partial state, block) pairs: supplied
// instructions execute against a forked state, delayed ones are emitted
// into the residual (with supplied operands materialized by lifts), and
// block exits seal the state, mint the successor labels and enqueue
// whatever has not been seen yet.
//
// `supplied` must bind exactly the supplied inputs.  A classification with
// violations is refused up front with a congruence error.
SpecResult specialize(const Program &p, const BtaResult &bta,
                      const InputAssignment &supplied,
                      const SpecConfig &cfg = {});

// One "key=value" line per counter, in a fixed order: states_visited,
// enqueues, dedup_hits, pages_allocated_total, live_pages_max,
// pages_hashed, words_compared, cow_faults, wall_ms.
std::string format_metrics(const SpecMetrics &m);

}  // namespace pspec
