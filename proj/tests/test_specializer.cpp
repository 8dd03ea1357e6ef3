#include "doctest.h"

#include <algorithm>
#include <string>
#include <vector>

#include "bta.hpp"
#include "ir.hpp"
#include "residual.hpp"
#include "specializer.hpp"

using namespace pspec;

namespace {

const char *kMatcher = R"(program matcher
region pat supplied words=8
region str delayed words=512
input pat supplied
input str delayed
input r1 delayed ptr str
input r2 supplied ptr pat
block L1:
  load r4, [r1]
  jz r4, L8, L2
block L2:
  mov r3, r1
  mov r5, r2
  jmp L3
block L3:
  load r6, [r5]
  jz r6, L7, L4
block L4:
  load r7, [r3]
  sub r7, r6
  jz r7, L5, L6
block L5:
  add r5, 1
  add r3, 1
  jmp L3
block L6:
  add r1, 1
  jmp L1
block L7:
  const r0, 1
  halt
block L8:
  const r0, 0
  halt
)";

const char *kPower = R"(program power
input r1 delayed
input r2 supplied
block entry:
  const r0, 1
  jmp loop
block loop:
  jz r2, done, step
block step:
  mul r0, r1
  sub r2, 1
  jmp loop
block done:
  out r0
  halt
)";

SpecResult run_spec(const Program &p, const InputAssignment &a_s,
                    SpecConfig cfg = {}) {
  auto bta = classify(p, build_dependence_graph(p));
  return specialize(p, bta, a_s, cfg);
}

std::vector<Word> str_words(const std::string &s) {
  std::vector<Word> w;
  for (char c : s) w.push_back(Word(static_cast<unsigned char>(c)));
  w.push_back(0);
  return w;
}

// Eq-style check: the residual fed only the delayed inputs must produce the
// same tape and result as the subject fed everything.
void check_equivalent(const Program &subject, const Program &residual,
                      const InputAssignment &a_s,
                      const std::vector<InputAssignment> &delayed_samples) {
  for (const auto &ad : delayed_samples) {
    InputAssignment full = a_s;
    for (const auto &[k, v] : ad.values) full.values[k] = v;
    auto want = run_program(subject, full, 1 << 22);
    auto got = run_program(residual, ad, 1 << 22);
    CHECK(want.tape == got.tape);
    CHECK(want.r0 == got.r0);
  }
}

std::size_t count_op(const Program &p, Opcode op) {
  std::size_t n = 0;
  for (const auto &b : p.blocks)
    for (const auto &in : b.instrs)
      if (in.op == op) ++n;
  return n;
}

std::string origin_of(const std::string &label) {
  auto pos = label.rfind("__");
  return pos == std::string::npos ? label : label.substr(0, pos);
}

}  // namespace

TEST_CASE("power n=3 unrolls completely") {
  Program p = parse_program(kPower);
  InputAssignment a_s;
  a_s.values["r2"] = {3};
  auto res = run_spec(p, a_s);

  CHECK(validate(res.residual).empty());
  CHECK(count_op(res.residual, Opcode::Jz) == 0);
  CHECK(count_op(res.residual, Opcode::Mul) == 3);
  // const r0,1 is lifted exactly once, into the entry instance.
  std::size_t consts = count_op(res.residual, Opcode::Const);
  CHECK(consts == 1);

  CHECK(res.metrics.states_visited == 9);
  CHECK(res.metrics.enqueues == 9);
  CHECK(res.metrics.dedup_hits == 0);
  CHECK(res.metrics.original_instructions == 8);
  CHECK(res.metrics.residual_instructions == 14);

  std::vector<InputAssignment> samples;
  for (Word x : {Word(0), Word(1), Word(2), Word(5), Word(0x100000001ull)}) {
    InputAssignment a;
    a.values["r1"] = {x};
    samples.push_back(a);
  }
  check_equivalent(p, res.residual, a_s, samples);
}

TEST_CASE("power budget errors at the stated limit") {
  Program p = parse_program(kPower);
  InputAssignment a_s;
  a_s.values["r2"] = {3};
  SpecConfig cfg;
  cfg.max_states = 8;
  try {
    run_spec(p, a_s, cfg);
    FAIL("expected a budget error");
  } catch (const Error &e) {
    CHECK(e.kind == ErrKind::Budget);
    CHECK(std::string(e.what()).find("8") != std::string::npos);
  }
  cfg.max_states = 9;
  CHECK(run_spec(p, a_s, cfg).metrics.states_visited == 9);
}

TEST_CASE("matcher specialized for \"hat\"") {
  Program p = parse_program(kMatcher);
  InputAssignment a_s;
  a_s.values["pat"] = {104, 97, 116, 0};
  a_s.values["r2"] = {0};
  auto res = run_spec(p, a_s);
  const Program &r = res.residual;

  CHECK(validate(r).empty());
  // One outer instance, three inner unrollings plus the terminator test.
  CHECK(res.metrics.states_visited == 17);
  CHECK(res.metrics.enqueues == 17);
  CHECK(res.metrics.dedup_hits == 3);
  REQUIRE(r.blocks.size() == 17);

  std::map<std::string, int> origins;
  for (const auto &b : r.blocks) origins[origin_of(b.label)]++;
  CHECK(origins ==
        std::map<std::string, int>{{"L1", 1},
                                   {"L2", 1},
                                   {"L3", 4},
                                   {"L4", 3},
                                   {"L5", 3},
                                   {"L6", 3},
                                   {"L7", 1},
                                   {"L8", 1}});

  // The pattern characters arrive as lifted constants: 'h' 'a' 't' once
  // each, plus the one NUL that ends the chain.
  int char_lifts = 0, nul_lifts = 0;
  for (const auto &b : r.blocks)
    for (const auto &in : b.instrs) {
      if (in.op != Opcode::Const || in.dest != 6) continue;
      if (in.imm == 104 || in.imm == 97 || in.imm == 116) ++char_lifts;
      if (in.imm == 0) ++nul_lifts;
    }
  CHECK(char_lifts == 3);
  CHECK(nul_lifts == 1);

  // All residual loads walk the string; the pattern is gone.
  CHECK(count_op(r, Opcode::Load) == 4);

  // Every mismatch path jumps back to the one specialized outer head: the
  // dedup hits are visible as three jumps to the entry block.
  int back_edges = 0;
  for (const auto &b : r.blocks)
    if (origin_of(b.label) == "L6") {
      REQUIRE(b.instrs.back().op == Opcode::Jmp);
      CHECK(b.instrs.back().targets[0] == 0);
      ++back_edges;
    }
  CHECK(back_edges == 3);

  std::vector<InputAssignment> samples;
  for (const std::string &s :
       {"", "hat", "h", "ha", "xhat", "hhat", "abchat", "hax", "hahat",
        "aaaaaaa", "hathat", "tahxx"}) {
    InputAssignment a;
    a.values["str"] = str_words(s);
    a.values["r1"] = {512};
    samples.push_back(a);
  }
  check_equivalent(p, r, a_s, samples);

  // Residual purity, checked at run time: the pattern region (still
  // declared, as scratch) is never read.
  InputAssignment probe;
  probe.values["str"] = str_words("xhatx");
  probe.values["r1"] = {512};
  auto rr = run_program(r, probe, 1 << 22);
  CHECK(rr.r0 == 1);
  CHECK(rr.region_loads[0] == 0);
  CHECK(rr.region_loads[1] > 0);
}

TEST_CASE("residuals are identical across store modes") {
  Program p = parse_program(kMatcher);
  InputAssignment a_s;
  a_s.values["pat"] = {104, 97, 116, 0};
  a_s.values["r2"] = {0};

  std::vector<std::string> prints;
  std::vector<SpecMetrics> mets;
  for (bool cow : {true, false})
    for (bool fp : {true, false}) {
      SpecConfig cfg;
      cfg.cow_enabled = cow;
      cfg.fingerprint_enabled = fp;
      auto res = run_spec(p, a_s, cfg);
      prints.push_back(pretty_print(canonicalize_labels(res.residual)));
      mets.push_back(res.metrics);
    }
  CHECK(prints[1] == prints[0]);
  CHECK(prints[2] == prints[0]);
  CHECK(prints[3] == prints[0]);

  // Same walk in every mode...
  for (const auto &m : mets) {
    CHECK(m.states_visited == 17);
    CHECK(m.dedup_hits == 3);
  }
  // ...but very different bookkeeping: forced full copies allocate more,
  // hashing-off modes compare words instead of fingerprints.
  CHECK(mets[2].store.pages_allocated_total >
        mets[0].store.pages_allocated_total);
  CHECK(mets[0].store.words_compared == 0);
  CHECK(mets[1].store.pages_hashed == 0);
  CHECK(mets[1].store.words_compared > 0);

  // Deterministic run-to-run, labels included.
  auto again = run_spec(p, a_s);
  CHECK(pretty_print(run_spec(p, a_s).residual) ==
        pretty_print(again.residual));
}

TEST_CASE("supplied entry values feeding delayed code are materialized") {
  Program p = parse_program(R"(program elift
input r1 supplied
input r2 delayed
block e:
  add r2, r1
  out r2
  halt
)");
  auto bta = classify(p, build_dependence_graph(p));
  CHECK(bta.entry_lifts == std::set<int>{1});

  InputAssignment a_s;
  a_s.values["r1"] = {5};
  auto res = specialize(p, bta, a_s, {});
  const auto &entry = res.residual.blocks[0].instrs;
  REQUIRE(entry.size() >= 1);
  CHECK(entry[0].op == Opcode::Const);
  CHECK(entry[0].dest == 1);
  CHECK(entry[0].imm == 5);

  InputAssignment ad;
  ad.values["r2"] = {10};
  check_equivalent(p, res.residual, a_s, {ad});
}

TEST_CASE("unbounded supplied state hits the budget") {
  Program p = parse_program(R"(program diverge
input r1 supplied
block e:
  add r1, 1
  jmp e
)");
  InputAssignment a_s;
  a_s.values["r1"] = {0};
  SpecConfig cfg;
  cfg.max_states = 50;
  try {
    run_spec(p, a_s, cfg);
    FAIL("expected a budget error");
  } catch (const Error &e) {
    CHECK(e.kind == ErrKind::Budget);
  }
}

TEST_CASE("supplied faults carry the instruction location") {
  Program p = parse_program(R"(program oops
region s scratch words=8
input r1 supplied
block e:
  load r2, [r1]
  out r2
  halt
)");
  InputAssignment a_s;
  a_s.values["r1"] = {100000};
  try {
    run_spec(p, a_s);
    FAIL("expected a runtime fault");
  } catch (const Error &e) {
    CHECK(e.kind == ErrKind::Runtime);
    CHECK(std::string(e.what()).find("e:0") != std::string::npos);
    CHECK(std::string(e.what()).find("100000") != std::string::npos);
  }
}

TEST_CASE("a supplied pointer may not wander into delayed memory") {
  Program p = parse_program(R"(program wander
region a supplied words=8
region d delayed words=8
input a supplied
input d delayed
input r1 supplied
block e:
  const r2, &a
  add r2, r1
  load r3, [r2]
  out r3
  halt
)");
  InputAssignment a_s;
  a_s.values["a"] = {1, 2, 3, 4, 5, 6, 7, 8};

  a_s.values["r1"] = {2};  // in bounds: fine
  CHECK(run_spec(p, a_s).metrics.states_visited == 1);

  a_s.values["r1"] = {512};  // lands in region d
  try {
    run_spec(p, a_s);
    FAIL("expected a congruence fault");
  } catch (const Error &e) {
    CHECK(e.kind == ErrKind::Congruence);
    CHECK(std::string(e.what()).find("delayed region d") !=
          std::string::npos);
  }
}

TEST_CASE("classifications with violations are refused") {
  Program p = parse_program(R"(program v1
region tab supplied words=8
input tab supplied
input r1 delayed
block e:
  const r2, &tab
  add r2, r1
  load r3, [r2]
  out r3
  halt
)");
  auto bta = classify(p, build_dependence_graph(p));
  REQUIRE(!bta.violations.empty());
  InputAssignment a_s;
  a_s.values["tab"] = {9, 9, 9};
  try {
    specialize(p, bta, a_s, {});
    FAIL("expected refusal");
  } catch (const Error &e) {
    CHECK(e.kind == ErrKind::Congruence);
    CHECK(std::string(e.what()).find("refusing to specialize") !=
          std::string::npos);
  }
}

TEST_CASE("the runtime store assertion backs up the classifier") {
  Program p = parse_program(R"(program v4
region tab supplied words=8
input tab supplied
input r1 delayed
block e:
  const r2, &tab
  store [r2+3], r1
  halt
)");
  auto bta = classify(p, build_dependence_graph(p));
  REQUIRE(bta.violations.size() == 1);
  // Defense in depth: even with the static report suppressed, the emission
  // path refuses to produce a residual store into supplied memory.
  bta.violations.clear();
  InputAssignment a_s;
  a_s.values["tab"] = {1, 2, 3};
  try {
    specialize(p, bta, a_s, {});
    FAIL("expected the store assertion to fire");
  } catch (const Error &e) {
    CHECK(e.kind == ErrKind::Congruence);
    CHECK(std::string(e.what()).find(
              "delayed store writes supplied region tab") !=
          std::string::npos);
  }
}

TEST_CASE("assignment shape errors") {
  Program p = parse_program(kPower);
  auto bta = classify(p, build_dependence_graph(p));
  InputAssignment a;
  CHECK_THROWS_WITH_AS(specialize(p, bta, a, {}),
                       "supplied input r2 not assigned", const Error &);
  a.values["r2"] = {3};
  a.values["r1"] = {4};
  try {
    specialize(p, bta, a, {});
    FAIL("expected rejection of the delayed binding");
  } catch (const Error &e) {
    CHECK(e.kind == ErrKind::Input);
    CHECK(std::string(e.what()).find("r1 is delayed") != std::string::npos);
  }
  a.values.erase("r1");
  a.values["bogus"] = {1};
  CHECK_THROWS_WITH_AS(specialize(p, bta, a, {}),
                       "assignment for unknown input bogus", const Error &);
}

TEST_CASE("metrics render with stable keys") {
  Program p = parse_program(kPower);
  InputAssignment a_s;
  a_s.values["r2"] = {2};
  auto res = run_spec(p, a_s);
  auto text = format_metrics(res.metrics);
  for (const char *key :
       {"states_visited=", "enqueues=", "dedup_hits=",
        "pages_allocated_total=", "live_pages_max=", "pages_hashed=",
        "words_compared=", "cow_faults=", "wall_ms="})
    CHECK(text.find(key) != std::string::npos);
  CHECK(text.find("states_visited=7\n") != std::string::npos);
}
