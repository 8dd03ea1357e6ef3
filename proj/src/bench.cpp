#include "bench.hpp"

#include <random>
#include <sstream>

#include "error.hpp"

namespace pspec {

namespace {

// Every benchmark declares enough scratch padding to reach a 16 page address
// space. Sealing without copy-on-write copies the whole space, so a common
// size keeps the with/without comparison honest across benchmarks.
constexpr std::uint64_t kSpacePages = 16;

std::uint64_t pick(std::uint64_t v, std::uint64_t dflt, std::uint64_t lo,
                   std::uint64_t hi, const char *what) {
  if (v == 0) v = dflt;
  if (v < lo || v > hi)
    throw Error(ErrKind::Input, std::string(what) + " must be between " +
                                    std::to_string(lo) + " and " +
                                    std::to_string(hi) + ", got " +
                                    std::to_string(v));
  return v;
}

// Scratch region filling the address space up to kSpacePages.
void pad_to_space(std::ostringstream &os, std::uint64_t used_pages) {
  if (used_pages < kSpacePages)
    os << "region pad scratch words=" << (kSpacePages - used_pages) * kPageWords
       << "\n";
}

void set_reg(InputAssignment &a, int reg, Word v) {
  a.values["r" + std::to_string(reg)] = {v};
}

// r2 = exponent (supplied), r1 = base (delayed). Unrolls completely.
Benchmark gen_power(BenchParams pr) {
  pr.n = pick(pr.n, 16, 1, 1024, "power exponent");
  std::ostringstream os;
  os << "program power\n";
  pad_to_space(os, 0);
  os << "input r1 delayed\n"
        "input r2 supplied\n"
        "block entry:\n"
        "  const r0, 1\n"
        "  jmp loop\n"
        "block loop:\n"
        "  jz r2, done, step\n"
        "block step:\n"
        "  mul r0, r1\n"
        "  sub r2, 1\n"
        "  jmp loop\n"
        "block done:\n"
        "  out r0\n"
        "  halt\n";
  Benchmark b{"power", pr, parse_program(os.str()), {}};
  set_reg(b.supplied, 2, pr.n);
  return b;
}

// Vector a and the length are supplied, vector b is delayed. The residual is
// a multiply-add chain with a's elements folded in as constants.
Benchmark gen_dotproduct(BenchParams pr) {
  pr.n = pick(pr.n, 8, 1, 512, "dotproduct length");
  std::ostringstream os;
  os << "program dotproduct\n"
     << "region a supplied words=" << pr.n << "\n"
     << "region b delayed words=" << pr.n << "\n";
  pad_to_space(os, 2);
  os << "input a supplied\n"
        "input b delayed\n"
        "input r1 supplied\n"
        "block entry:\n"
        "  const r0, 0\n"
        "  const r2, &a\n"
        "  const r3, &b\n"
        "  jmp loop\n"
        "block loop:\n"
        "  jz r1, fin, step\n"
        "block step:\n"
        "  load r4, [r2]\n"
        "  load r5, [r3]\n"
        "  mul r5, r4\n"
        "  add r0, r5\n"
        "  add r2, 1\n"
        "  add r3, 1\n"
        "  sub r1, 1\n"
        "  jmp loop\n"
        "block fin:\n"
        "  out r0\n"
        "  halt\n";
  Benchmark b{"dotproduct", pr, parse_program(os.str()), {}};
  std::vector<Word> a(pr.n);
  for (std::uint64_t i = 0; i < pr.n; ++i) a[i] = (i * i + 3 * i + 7) & 255;
  b.supplied.values["a"] = std::move(a);
  set_reg(b.supplied, 1, pr.n);
  return b;
}

// 3x3 convolution of a supplied kernel over a delayed n x n image, interior
// pixels only, results stored to a scratch plane and then streamed out. All
// loop bounds and addressing are supplied; only pixel data is delayed.
Benchmark gen_filter(BenchParams pr) {
  pr.n = pick(pr.n, 8, 3, 16, "filter image side");
  const std::uint64_t n = pr.n, nn = n * n;
  std::ostringstream os;
  os << "program filter\n"
     << "region k supplied words=9\n"
     << "region img delayed words=" << nn << "\n"
     << "region out scratch words=" << nn << "\n";
  pad_to_space(os, 3);
  os << "input k supplied\n"
        "input img delayed\n"
        "block entry:\n"
        "  const r1, 1\n"
        "  jmp yloop\n"
        "block yloop:\n"
        "  mov r7, r1\n"
     << "  sub r7, " << n - 1 << "\n"
     << "  jz r7, readinit, xinit\n"
        "block xinit:\n"
        "  const r2, 1\n"
        "  jmp xloop\n"
        "block xloop:\n"
        "  mov r7, r2\n"
     << "  sub r7, " << n - 1 << "\n"
     << "  jz r7, ynext, pixinit\n"
        "block ynext:\n"
        "  add r1, 1\n"
        "  jmp yloop\n"
        "block pixinit:\n"
        "  const r6, 0\n"
        "  const r3, 0\n"
        "  jmp dyloop\n"
        "block dyloop:\n"
        "  mov r7, r3\n"
        "  sub r7, 3\n"
        "  jz r7, pixdone, dxinit\n"
        "block dxinit:\n"
        "  const r4, 0\n"
        "  jmp dxloop\n"
        "block dxloop:\n"
        "  mov r7, r4\n"
        "  sub r7, 3\n"
        "  jz r7, dynext, tap\n"
        "block dynext:\n"
        "  add r3, 1\n"
        "  jmp dyloop\n"
        "block tap:\n"
        "  mov r8, r3\n"
        "  mul r8, 3\n"
        "  add r8, r4\n"
        "  const r9, &k\n"
        "  add r9, r8\n"
        "  load r10, [r9]\n"
        "  mov r11, r1\n"
        "  add r11, r3\n"
        "  sub r11, 1\n"
     << "  mul r11, " << n << "\n"
     << "  add r11, r2\n"
        "  add r11, r4\n"
        "  sub r11, 1\n"
        "  const r12, &img\n"
        "  add r12, r11\n"
        "  load r13, [r12]\n"
        "  mul r13, r10\n"
        "  add r6, r13\n"
        "  add r4, 1\n"
        "  jmp dxloop\n"
        "block pixdone:\n"
        "  mov r8, r1\n"
     << "  mul r8, " << n << "\n"
     << "  add r8, r2\n"
        "  const r9, &out\n"
        "  add r9, r8\n"
        "  store [r9], r6\n"
        "  add r2, 1\n"
        "  jmp xloop\n"
        "block readinit:\n"
        "  const r1, 0\n"
        "  jmp rdloop\n"
        "block rdloop:\n"
        "  mov r7, r1\n"
     << "  sub r7, " << nn << "\n"
     << "  jz r7, fin, rdstep\n"
        "block rdstep:\n"
        "  const r9, &out\n"
        "  add r9, r1\n"
        "  load r10, [r9]\n"
        "  out r10\n"
        "  add r1, 1\n"
        "  jmp rdloop\n"
        "block fin:\n"
        "  halt\n";
  Benchmark b{"filter", pr, parse_program(os.str()), {}};
  b.supplied.values["k"] = {1, 2, 1, 2, 4, 2, 1, 2, 1};
  return b;
}

// Needle in the pattern region (supplied), haystack in str (delayed), both
// NUL terminated. r1 walks the haystack, r2 holds the needle base.
Benchmark gen_matcher(BenchParams pr) {
  if (pr.pattern.empty()) pr.pattern = "hat";
  if (pr.pattern.size() > 7)
    throw Error(ErrKind::Input, "matcher pattern must be 1..7 characters, got " +
                                    std::to_string(pr.pattern.size()));
  std::ostringstream os;
  os << "program matcher\n"
        "region pat supplied words=8\n"
     << "region str delayed words=" << kPageWords << "\n";
  pad_to_space(os, 2);
  os << "input pat supplied\n"
        "input str delayed\n"
        "input r1 delayed ptr str\n"
        "input r2 supplied ptr pat\n"
        "block L1:\n"
        "  load r4, [r1]\n"
        "  jz r4, L8, L2\n"
        "block L2:\n"
        "  mov r3, r1\n"
        "  mov r5, r2\n"
        "  jmp L3\n"
        "block L3:\n"
        "  load r6, [r5]\n"
        "  jz r6, L7, L4\n"
        "block L4:\n"
        "  load r7, [r3]\n"
        "  sub r7, r6\n"
        "  jz r7, L5, L6\n"
        "block L5:\n"
        "  add r5, 1\n"
        "  add r3, 1\n"
        "  jmp L3\n"
        "block L6:\n"
        "  add r1, 1\n"
        "  jmp L1\n"
        "block L7:\n"
        "  const r0, 1\n"
        "  halt\n"
        "block L8:\n"
        "  const r0, 0\n"
        "  halt\n";
  Benchmark b{"matcher", pr, parse_program(os.str()), {}};
  std::vector<Word> pat;
  for (unsigned char c : pr.pattern) pat.push_back(c);
  pat.push_back(0);
  b.supplied.values["pat"] = std::move(pat);
  set_reg(b.supplied, 2, 0);  // pat starts the address space
  return b;
}

// Worst case for snapshot upkeep: each pstep dirties one stack page and then
// seals, so one outer step costs pages * n faults and as many page rehashes.
// Only the final checksum mixes in the delayed r1.
Benchmark gen_stack(BenchParams pr) {
  pr.pages = pick(pr.pages, 16, 1, kSpacePages, "stack pages");
  pr.n = pick(pr.n, 4, 1, 16, "stack writes per page");
  std::ostringstream os;
  os << "program stack\n"
     << "region stk scratch words=" << pr.pages * kPageWords << "\n";
  pad_to_space(os, pr.pages);
  os << "input r1 delayed\n"
        "input r2 supplied\n"
        "block entry:\n"
        "  const r9, 0\n"
        "  jmp outer\n"
        "block outer:\n"
        "  jz r2, fin, oinit\n"
        "block oinit:\n"
     << "  const r3, " << pr.n << "\n"
     << "  jmp round\n"
        "block round:\n"
        "  jz r3, onext, pinit\n"
        "block onext:\n"
        "  sub r2, 1\n"
        "  jmp outer\n"
        "block pinit:\n"
        "  const r4, 0\n"
        "  jmp ploop\n"
        "block ploop:\n"
        "  mov r7, r4\n"
     << "  sub r7, " << pr.pages << "\n"
     << "  jz r7, rdone, pstep\n"
        "block rdone:\n"
        "  sub r3, 1\n"
        "  jmp round\n"
        "block pstep:\n"
        "  mov r8, r4\n"
     << "  mul r8, " << kPageWords << "\n"
     << "  const r10, &stk\n"
        "  add r10, r8\n"
        "  store [r10], r9\n"
        "  add r9, r4\n"
        "  add r9, r3\n"
        "  add r9, r2\n"
        "  add r9, 1\n"
        "  add r4, 1\n"
        "  jmp ploop\n"
        "block fin:\n"
        "  add r9, r1\n"
        "  out r9\n"
        "  halt\n";
  Benchmark b{"stack", pr, parse_program(os.str()), {}};
  set_reg(b.supplied, 2, 3);  // outer steps
  return b;
}

// Shift-xor mixer over a 512 bit message: key half supplied, msg half delayed,
// r2 rounds. The residual is the fully unrolled round sequence.
Benchmark gen_mix(BenchParams pr) {
  pr.n = pick(pr.n, 8, 1, 512, "mix rounds");
  std::ostringstream os;
  os << "program mix\n"
        "region key supplied words=8\n"
        "region msg delayed words=8\n";
  pad_to_space(os, 2);
  os << "input key supplied\n"
        "input msg delayed\n"
        "input r2 supplied\n"
        "block entry:\n"
        "  const r0, 0\n"
        "  const r3, 0\n"
        "  jmp loop\n"
        "block loop:\n"
        "  jz r2, fin, step\n"
        "block step:\n"
        "  const r6, &key\n"
        "  add r6, r3\n"
        "  load r4, [r6]\n"
        "  const r7, &msg\n"
        "  add r7, r3\n"
        "  load r5, [r7]\n"
        "  xor r5, r4\n"
        "  xor r0, r5\n"
        "  shl r5, 13\n"
        "  xor r0, r5\n"
        "  add r3, 1\n"
        "  and r3, 7\n"
        "  sub r2, 1\n"
        "  jmp loop\n"
        "block fin:\n"
        "  out r0\n"
        "  halt\n";
  Benchmark b{"mix", pr, parse_program(os.str()), {}};
  std::vector<Word> key(8);
  for (std::uint64_t i = 0; i < 8; ++i) key[i] = 4660 + i * 911;
  b.supplied.values["key"] = std::move(key);
  set_reg(b.supplied, 2, pr.n);
  return b;
}

Benchmark dispatch(const std::string &name, BenchParams params) {
  if (name == "power") return gen_power(params);
  if (name == "dotproduct") return gen_dotproduct(params);
  if (name == "filter") return gen_filter(params);
  if (name == "matcher") return gen_matcher(params);
  if (name == "stack") return gen_stack(params);
  if (name == "mix") return gen_mix(params);
  throw Error(ErrKind::Input, "unknown benchmark " + name);
}

}  // namespace

const std::vector<std::string> &benchmark_names() {
  static const std::vector<std::string> names = {"power", "dotproduct",
                                                 "filter", "matcher",
                                                 "stack",  "mix"};
  return names;
}

std::string benchmark_text(const std::string &name, BenchParams params) {
  return pretty_print(dispatch(name, params).program);
}

Benchmark make_benchmark(const std::string &name, BenchParams params) {
  return dispatch(name, params);
}

InputAssignment sample_delayed(const Benchmark &b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  InputAssignment a;
  if (b.name == "power" || b.name == "stack") {
    a.values["r1"] = {rng()};
  } else if (b.name == "dotproduct") {
    std::vector<Word> v(b.params.n);
    for (auto &w : v) w = rng() & 0xffff;
    a.values["b"] = std::move(v);
  } else if (b.name == "filter") {
    std::vector<Word> v(b.params.n * b.params.n);
    for (auto &w : v) w = rng() & 0xff;
    a.values["img"] = std::move(v);
  } else if (b.name == "matcher") {
    static const Word alphabet[4] = {'h', 'a', 't', 'x'};
    std::vector<Word> str(33);
    for (std::size_t i = 0; i + 1 < str.size(); ++i)
      str[i] = alphabet[rng() % 4];
    str.back() = 0;
    const Word base = b.program.find_region("str")->base;
    a.values["str"] = std::move(str);
    a.values["r1"] = {base + rng() % 8};
  } else if (b.name == "mix") {
    std::vector<Word> v(8);
    for (auto &w : v) w = rng();
    a.values["msg"] = std::move(v);
  } else {
    throw Error(ErrKind::Internal, "no sampler for benchmark " + b.name);
  }
  return a;
}

}  // namespace pspec
