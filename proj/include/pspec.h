/* C interface to the specializer library.
 *
 * Every object returned through an out parameter is owned by the caller and
 * released with the matching _free function; strings returned through char**
 * are released with pspec_string_free. Functions returning pspec_status set
 * a thread-local message readable via pspec_last_error until the next
 * failing call on the same thread.
 */
#ifndef PSPEC_H
#define PSPEC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pspec_status {
  PSPEC_OK = 0,
  PSPEC_ERR_PARSE = 1,      /* malformed program or assignment text */
  PSPEC_ERR_VALIDATE = 2,   /* structurally invalid program */
  PSPEC_ERR_INPUT = 3,      /* bad argument or input binding */
  PSPEC_ERR_RUNTIME = 4,    /* execution fault (bad address, fuel) */
  PSPEC_ERR_BUDGET = 5,     /* state budget exhausted */
  PSPEC_ERR_CONGRUENCE = 6, /* program outside the specializable fragment */
  PSPEC_ERR_INTERNAL = 7
} pspec_status;

const char *pspec_version(void);
const char *pspec_last_error(void);
void pspec_string_free(char *s);

/* -- programs ---------------------------------------------------------- */

typedef struct pspec_program pspec_program;

pspec_status pspec_program_parse(const char *text, pspec_program **out);
void pspec_program_free(pspec_program *p);
pspec_status pspec_program_print(const pspec_program *p, char **out);
/* Diagnostics joined by newlines; empty string means the program is valid. */
pspec_status pspec_program_validate(const pspec_program *p, char **out);
const char *pspec_program_name(const pspec_program *p);
uint64_t pspec_program_instruction_count(const pspec_program *p);
/* Rewrite specialization labels to origin__<k> in first-appearance order so
 * residuals from different store modes compare byte for byte. */
pspec_status pspec_program_canonicalize(const pspec_program *p,
                                        pspec_program **out);

/* -- input assignments -------------------------------------------------- */

typedef struct pspec_assignment pspec_assignment;

/* One "name = value" per line; value is an unsigned integer, a double-quoted
 * string (one char per word, NUL appended), or a bracketed word list. */
pspec_status pspec_assignment_parse(const char *text, pspec_assignment **out);
void pspec_assignment_free(pspec_assignment *a);
pspec_status pspec_assignment_print(const pspec_assignment *a, char **out);
/* Bindings of over win on name clashes. */
pspec_status pspec_assignment_merge(const pspec_assignment *base,
                                    const pspec_assignment *over,
                                    pspec_assignment **out);

/* -- running ------------------------------------------------------------ */

typedef struct pspec_run_result pspec_run_result;

pspec_status pspec_run(const pspec_program *p, const pspec_assignment *a,
                       uint64_t fuel, pspec_run_result **out);
void pspec_run_result_free(pspec_run_result *r);
uint64_t pspec_run_result_r0(const pspec_run_result *r);
uint64_t pspec_run_result_steps(const pspec_run_result *r);
uint64_t pspec_run_result_tape_len(const pspec_run_result *r);
/* Zero when i is past the end of the tape. */
uint64_t pspec_run_result_tape_word(const pspec_run_result *r, uint64_t i);

/* -- binding-time analysis ---------------------------------------------- */

/* One line per instruction: "<label>:<idx> <opcode> supplied|delayed" with
 * LIFTED marks, entry lift lines, then any violation lines. */
pspec_status pspec_bta_report(const pspec_program *p, char **out);
/* Number of congruence violations; such programs cannot be specialized. */
pspec_status pspec_bta_violations(const pspec_program *p, uint64_t *out);

/* -- specialization ----------------------------------------------------- */

typedef struct pspec_spec_options {
  int copy_on_write;   /* nonzero: snapshots share pages and fork lazily */
  int fingerprint;     /* nonzero: visited states keyed by state hash */
  uint64_t max_states; /* worklist budget */
  uint64_t fuel;       /* supplied instructions per block instance */
} pspec_spec_options;

void pspec_spec_options_init(pspec_spec_options *o);

typedef struct pspec_spec_result pspec_spec_result;

/* supplied must bind exactly the supplied inputs of p. opt may be NULL for
 * the defaults from pspec_spec_options_init. */
pspec_status pspec_specialize(const pspec_program *p,
                              const pspec_assignment *supplied,
                              const pspec_spec_options *opt,
                              pspec_spec_result **out);
void pspec_spec_result_free(pspec_spec_result *r);
pspec_status pspec_spec_result_residual(const pspec_spec_result *r,
                                        pspec_program **out);
/* Stable key=value lines: states_visited, enqueues, dedup_hits,
 * pages_allocated_total, live_pages_max, pages_hashed, words_compared,
 * cow_faults, wall_ms. */
pspec_status pspec_spec_result_metrics_text(const pspec_spec_result *r,
                                            char **out);
/* Any key above except wall_ms, plus original_instructions and
 * residual_instructions. */
pspec_status pspec_spec_result_counter(const pspec_spec_result *r,
                                       const char *key, uint64_t *out);
double pspec_spec_result_wall_ms(const pspec_spec_result *r);

/* -- benchmarks --------------------------------------------------------- */

typedef struct pspec_benchmark pspec_benchmark;

size_t pspec_benchmark_count(void);
const char *pspec_benchmark_name_at(size_t i);

/* n, pages: 0 picks the benchmark default; pattern: NULL or empty picks the
 * default needle (matcher only). */
pspec_status pspec_benchmark_make(const char *name, uint64_t n, uint64_t pages,
                                  const char *pattern, pspec_benchmark **out);
void pspec_benchmark_free(pspec_benchmark *b);
pspec_status pspec_benchmark_program(const pspec_benchmark *b,
                                     pspec_program **out);
pspec_status pspec_benchmark_supplied(const pspec_benchmark *b,
                                      pspec_assignment **out);
/* Deterministic per seed; binds exactly the delayed inputs. */
pspec_status pspec_benchmark_sample(const pspec_benchmark *b, uint64_t seed,
                                    pspec_assignment **out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PSPEC_H */
