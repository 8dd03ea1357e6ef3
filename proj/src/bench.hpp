#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ir.hpp"

namespace pspec {

// Generator knobs. Zero / empty fields pick the benchmark's default.
struct BenchParams {
  std::uint64_t n = 0;      // power: exponent, dotproduct: length, filter: image
                            // side, stack: writes per page per outer step,
                            // mix: rounds
  std::uint64_t pages = 0;  // stack: scratch pages swept per round
  std::string pattern;      // matcher: the needle (1..7 characters)
};

// A generated subject program plus the values for its supplied inputs.
// Values for the delayed inputs come from sample_delayed, one draw per seed.
struct Benchmark {
  std::string name;
  BenchParams params;  // resolved: defaults filled in
  Program program;
  InputAssignment supplied;
};

// power, dotproduct, filter, matcher, stack, mix.
const std::vector<std::string> &benchmark_names();

// The program text for a benchmark; make_benchmark parses exactly this.
// Throws Error(ErrKind::Input) for an unknown name or out-of-range params.
std::string benchmark_text(const std::string &name, BenchParams params = {});

Benchmark make_benchmark(const std::string &name, BenchParams params = {});

// Deterministic: the same seed always yields the same assignment. The result
// binds exactly the delayed inputs of b.program.
InputAssignment sample_delayed(const Benchmark &b, std::uint64_t seed);

}  // namespace pspec
