#include "pspec.h"

#include <cstring>
#include <string>

#include "bench.hpp"
#include "bta.hpp"
#include "error.hpp"
#include "ir.hpp"
#include "residual.hpp"
#include "specializer.hpp"

using namespace pspec;

struct pspec_program {
  Program p;
};
struct pspec_assignment {
  InputAssignment a;
};
struct pspec_run_result {
  RunResult r;
};
struct pspec_spec_result {
  SpecResult r;
};
struct pspec_benchmark {
  Benchmark b;
};

namespace {

thread_local std::string g_last_error;

pspec_status status_of(ErrKind k) {
  switch (k) {
    case ErrKind::Parse: return PSPEC_ERR_PARSE;
    case ErrKind::Validate: return PSPEC_ERR_VALIDATE;
    case ErrKind::Input: return PSPEC_ERR_INPUT;
    case ErrKind::Runtime: return PSPEC_ERR_RUNTIME;
    case ErrKind::Budget: return PSPEC_ERR_BUDGET;
    case ErrKind::Congruence: return PSPEC_ERR_CONGRUENCE;
    case ErrKind::Internal: return PSPEC_ERR_INTERNAL;
  }
  return PSPEC_ERR_INTERNAL;
}

pspec_status fail(pspec_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

// Runs the body, translating exceptions to statuses.
template <typename F>
pspec_status guarded(F &&f) {
  try {
    return f();
  } catch (const Error &e) {
    return fail(status_of(e.kind), e.what());
  } catch (const std::exception &e) {
    return fail(PSPEC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PSPEC_ERR_INTERNAL, "unknown error");
  }
}

char *dup_string(const std::string &s) {
  char *out = static_cast<char *>(::operator new(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pspec_status need(const void *arg, const char *what) {
  if (arg) return PSPEC_OK;
  return fail(PSPEC_ERR_INPUT, std::string(what) + " must not be null");
}

}  // namespace

extern "C" {

const char *pspec_version(void) { return "1.0.0"; }

const char *pspec_last_error(void) { return g_last_error.c_str(); }

void pspec_string_free(char *s) { ::operator delete(s); }

pspec_status pspec_program_parse(const char *text, pspec_program **out) {
  if (auto s = need(text, "text"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = new pspec_program{parse_program(text)};
    return PSPEC_OK;
  });
}

void pspec_program_free(pspec_program *p) { delete p; }

pspec_status pspec_program_print(const pspec_program *p, char **out) {
  if (auto s = need(p, "program"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = dup_string(pretty_print(p->p));
    return PSPEC_OK;
  });
}

pspec_status pspec_program_validate(const pspec_program *p, char **out) {
  if (auto s = need(p, "program"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    std::string joined;
    for (const auto &d : validate(p->p)) {
      if (!joined.empty()) joined += '\n';
      joined += d;
    }
    *out = dup_string(joined);
    return PSPEC_OK;
  });
}

const char *pspec_program_name(const pspec_program *p) {
  return p ? p->p.name.c_str() : "";
}

uint64_t pspec_program_instruction_count(const pspec_program *p) {
  return p ? p->p.instruction_count() : 0;
}

pspec_status pspec_program_canonicalize(const pspec_program *p,
                                        pspec_program **out) {
  if (auto s = need(p, "program"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = new pspec_program{canonicalize_labels(p->p)};
    return PSPEC_OK;
  });
}

pspec_status pspec_assignment_parse(const char *text, pspec_assignment **out) {
  if (auto s = need(text, "text"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = new pspec_assignment{parse_assignment(text)};
    return PSPEC_OK;
  });
}

void pspec_assignment_free(pspec_assignment *a) { delete a; }

pspec_status pspec_assignment_print(const pspec_assignment *a, char **out) {
  if (auto s = need(a, "assignment"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = dup_string(print_assignment(a->a));
    return PSPEC_OK;
  });
}

pspec_status pspec_assignment_merge(const pspec_assignment *base,
                                    const pspec_assignment *over,
                                    pspec_assignment **out) {
  if (auto s = need(base, "base"); s != PSPEC_OK) return s;
  if (auto s = need(over, "over"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    auto merged = base->a;
    for (const auto &[k, v] : over->a.values) merged.values[k] = v;
    *out = new pspec_assignment{std::move(merged)};
    return PSPEC_OK;
  });
}

pspec_status pspec_run(const pspec_program *p, const pspec_assignment *a,
                       uint64_t fuel, pspec_run_result **out) {
  if (auto s = need(p, "program"); s != PSPEC_OK) return s;
  if (auto s = need(a, "assignment"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = new pspec_run_result{run_program(p->p, a->a, fuel)};
    return PSPEC_OK;
  });
}

void pspec_run_result_free(pspec_run_result *r) { delete r; }

uint64_t pspec_run_result_r0(const pspec_run_result *r) {
  return r ? r->r.r0 : 0;
}

uint64_t pspec_run_result_steps(const pspec_run_result *r) {
  return r ? r->r.steps : 0;
}

uint64_t pspec_run_result_tape_len(const pspec_run_result *r) {
  return r ? r->r.tape.size() : 0;
}

uint64_t pspec_run_result_tape_word(const pspec_run_result *r, uint64_t i) {
  if (!r || i >= r->r.tape.size()) return 0;
  return r->r.tape[i];
}

pspec_status pspec_bta_report(const pspec_program *p, char **out) {
  if (auto s = need(p, "program"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    auto bta = classify(p->p, build_dependence_graph(p->p));
    *out = dup_string(format_bta_report(p->p, bta));
    return PSPEC_OK;
  });
}

pspec_status pspec_bta_violations(const pspec_program *p, uint64_t *out) {
  if (auto s = need(p, "program"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = classify(p->p, build_dependence_graph(p->p)).violations.size();
    return PSPEC_OK;
  });
}

void pspec_spec_options_init(pspec_spec_options *o) {
  if (!o) return;
  SpecConfig d;
  o->copy_on_write = d.cow_enabled ? 1 : 0;
  o->fingerprint = d.fingerprint_enabled ? 1 : 0;
  o->max_states = d.max_states;
  o->fuel = d.fuel;
}

pspec_status pspec_specialize(const pspec_program *p,
                              const pspec_assignment *supplied,
                              const pspec_spec_options *opt,
                              pspec_spec_result **out) {
  if (auto s = need(p, "program"); s != PSPEC_OK) return s;
  if (auto s = need(supplied, "supplied"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    SpecConfig cfg;
    if (opt) {
      cfg.cow_enabled = opt->copy_on_write != 0;
      cfg.fingerprint_enabled = opt->fingerprint != 0;
      cfg.max_states = opt->max_states;
      cfg.fuel = opt->fuel;
    }
    auto bta = classify(p->p, build_dependence_graph(p->p));
    *out = new pspec_spec_result{specialize(p->p, bta, supplied->a, cfg)};
    return PSPEC_OK;
  });
}

void pspec_spec_result_free(pspec_spec_result *r) { delete r; }

pspec_status pspec_spec_result_residual(const pspec_spec_result *r,
                                        pspec_program **out) {
  if (auto s = need(r, "result"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = new pspec_program{r->r.residual};
    return PSPEC_OK;
  });
}

pspec_status pspec_spec_result_metrics_text(const pspec_spec_result *r,
                                            char **out) {
  if (auto s = need(r, "result"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = dup_string(format_metrics(r->r.metrics));
    return PSPEC_OK;
  });
}

pspec_status pspec_spec_result_counter(const pspec_spec_result *r,
                                       const char *key, uint64_t *out) {
  if (auto s = need(r, "result"); s != PSPEC_OK) return s;
  if (auto s = need(key, "key"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  const SpecMetrics &m = r->r.metrics;
  const std::string k = key;
  if (k == "states_visited") *out = m.states_visited;
  else if (k == "enqueues") *out = m.enqueues;
  else if (k == "dedup_hits") *out = m.dedup_hits;
  else if (k == "pages_allocated_total") *out = m.store.pages_allocated_total;
  else if (k == "live_pages_max") *out = m.store.live_pages_max;
  else if (k == "pages_hashed") *out = m.store.pages_hashed;
  else if (k == "words_compared") *out = m.store.words_compared;
  else if (k == "cow_faults") *out = m.store.cow_faults;
  else if (k == "original_instructions") *out = m.original_instructions;
  else if (k == "residual_instructions") *out = m.residual_instructions;
  else return fail(PSPEC_ERR_INPUT, "unknown metric key " + k);
  return PSPEC_OK;
}

double pspec_spec_result_wall_ms(const pspec_spec_result *r) {
  return r ? r->r.metrics.wall_ms : 0.0;
}

size_t pspec_benchmark_count(void) { return benchmark_names().size(); }

const char *pspec_benchmark_name_at(size_t i) {
  const auto &names = benchmark_names();
  return i < names.size() ? names[i].c_str() : "";
}

pspec_status pspec_benchmark_make(const char *name, uint64_t n, uint64_t pages,
                                  const char *pattern, pspec_benchmark **out) {
  if (auto s = need(name, "name"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    BenchParams params;
    params.n = n;
    params.pages = pages;
    if (pattern) params.pattern = pattern;
    *out = new pspec_benchmark{make_benchmark(name, params)};
    return PSPEC_OK;
  });
}

void pspec_benchmark_free(pspec_benchmark *b) { delete b; }

pspec_status pspec_benchmark_program(const pspec_benchmark *b,
                                     pspec_program **out) {
  if (auto s = need(b, "benchmark"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = new pspec_program{b->b.program};
    return PSPEC_OK;
  });
}

pspec_status pspec_benchmark_supplied(const pspec_benchmark *b,
                                      pspec_assignment **out) {
  if (auto s = need(b, "benchmark"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = new pspec_assignment{b->b.supplied};
    return PSPEC_OK;
  });
}

pspec_status pspec_benchmark_sample(const pspec_benchmark *b, uint64_t seed,
                                    pspec_assignment **out) {
  if (auto s = need(b, "benchmark"); s != PSPEC_OK) return s;
  if (auto s = need(out, "out"); s != PSPEC_OK) return s;
  return guarded([&] {
    *out = new pspec_assignment{sample_delayed(b->b, seed)};
    return PSPEC_OK;
  });
}

}  // extern "C"
