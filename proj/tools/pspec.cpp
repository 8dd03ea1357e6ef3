// Command line driver: binding-time reports, specialization, plain runs and
// the benchmark grid, all through the public C interface.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pspec.h"

namespace {

[[noreturn]] void die(const std::string &msg) {
  std::cerr << "pspec: " << msg << "\n";
  std::exit(1);
}

void check(pspec_status st) {
  if (st != PSPEC_OK) die(pspec_last_error());
}

// Adopts a string allocated by the library.
std::string adopt(char *s) {
  std::string out = s ? s : "";
  pspec_string_free(s);
  return out;
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) die("cannot write " + path);
  out << text;
}

template <typename T, void (*F)(T *)>
struct Owned {
  T *h = nullptr;
  Owned() = default;
  Owned(const Owned &) = delete;
  Owned &operator=(const Owned &) = delete;
  ~Owned() { F(h); }
  T **slot() { return &h; }
  operator T *() const { return h; }
};

using ProgramH = Owned<pspec_program, pspec_program_free>;
using AssignmentH = Owned<pspec_assignment, pspec_assignment_free>;
using RunH = Owned<pspec_run_result, pspec_run_result_free>;
using SpecH = Owned<pspec_spec_result, pspec_spec_result_free>;
using BenchH = Owned<pspec_benchmark, pspec_benchmark_free>;

// "name=value" arguments plus an optional assignment file, as one text.
// Values use assignment syntax: numbers, "strings", or [word, lists].
std::string binding_text(const std::vector<std::string> &pairs,
                         const std::string &file) {
  std::string text;
  if (!file.empty()) text = slurp(file);
  for (const auto &p : pairs) {
    auto eq = p.find('=');
    if (eq == std::string::npos) die("binding '" + p + "' is not name=value");
    text += p.substr(0, eq) + " = " + p.substr(eq + 1) + "\n";
  }
  return text;
}

void parse_bindings(const std::vector<std::string> &pairs,
                    const std::string &file, AssignmentH &out) {
  check(pspec_assignment_parse(binding_text(pairs, file).c_str(), out.slot()));
}

constexpr const char *kCounterKeys[] = {
    "states_visited",  "enqueues",       "dedup_hits", "pages_allocated_total",
    "live_pages_max",  "pages_hashed",   "words_compared", "cow_faults"};

std::uint64_t counter(const pspec_spec_result *sr, const char *key) {
  std::uint64_t v = 0;
  check(pspec_spec_result_counter(sr, key, &v));
  return v;
}

nlohmann::json metrics_json(const pspec_spec_result *sr) {
  nlohmann::json j;
  for (const char *key : kCounterKeys) j[key] = counter(sr, key);
  j["wall_ms"] = pspec_spec_result_wall_ms(sr);
  j["original_instructions"] = counter(sr, "original_instructions");
  j["residual_instructions"] = counter(sr, "residual_instructions");
  return j;
}

struct CommonFlags {
  bool no_cow = false;
  bool no_fingerprint = false;
  std::uint64_t max_states = 0;  // 0 = default
  std::uint64_t fuel = 0;
  bool json = false;
};

void add_spec_flags(CLI::App *cmd, CommonFlags &f) {
  cmd->add_flag("--no-cow", f.no_cow,
                "copy whole states instead of sharing pages");
  cmd->add_flag("--no-fingerprint", f.no_fingerprint,
                "compare visited states word by word instead of hashing");
  cmd->add_option("--max-states", f.max_states, "worklist budget");
  cmd->add_option("--fuel", f.fuel, "instruction budget");
}

pspec_spec_options options_from(const CommonFlags &f) {
  pspec_spec_options opt;
  pspec_spec_options_init(&opt);
  if (f.no_cow) opt.copy_on_write = 0;
  if (f.no_fingerprint) opt.fingerprint = 0;
  if (f.max_states) opt.max_states = f.max_states;
  if (f.fuel) opt.fuel = f.fuel;
  return opt;
}

// One benchmark run in one store mode, with its equivalence verdict.
struct CellReport {
  std::string name;
  bool cow = true, fingerprint = true;
  std::uint64_t seed = 0, samples = 0;
  bool pass = true;
  std::uint64_t first_fail_seed = 0;
  nlohmann::json metrics;
};

bool same_output(const pspec_run_result *a, const pspec_run_result *b) {
  if (pspec_run_result_r0(a) != pspec_run_result_r0(b)) return false;
  if (pspec_run_result_tape_len(a) != pspec_run_result_tape_len(b))
    return false;
  for (std::uint64_t i = 0; i < pspec_run_result_tape_len(a); ++i)
    if (pspec_run_result_tape_word(a, i) != pspec_run_result_tape_word(b, i))
      return false;
  return true;
}

void print_cell_text(const CellReport &c, const std::string &metrics_text) {
  std::cout << "benchmark=" << c.name << "\n"
            << "cow=" << (c.cow ? 1 : 0) << "\n"
            << "fingerprint=" << (c.fingerprint ? 1 : 0) << "\n"
            << "seed=" << c.seed << "\n"
            << "samples=" << c.samples << "\n"
            << "verdict=" << (c.pass ? "pass" : "fail") << "\n";
  if (!c.pass) std::cout << "first_fail_seed=" << c.first_fail_seed << "\n";
  std::cout << "original_instructions="
            << c.metrics["original_instructions"].get<std::uint64_t>() << "\n"
            << "residual_instructions="
            << c.metrics["residual_instructions"].get<std::uint64_t>() << "\n"
            << metrics_text << "\n";
}

void print_cell_json(const CellReport &c) {
  nlohmann::json j = c.metrics;
  j["benchmark"] = c.name;
  j["cow"] = c.cow ? 1 : 0;
  j["fingerprint"] = c.fingerprint ? 1 : 0;
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  j["verdict"] = c.pass ? "pass" : "fail";
  if (!c.pass) j["first_fail_seed"] = c.first_fail_seed;
  std::cout << j.dump() << "\n";
}

void print_table(const std::vector<CellReport> &cells) {
  std::printf("%-11s %-3s %-3s %9s %7s %7s %7s %8s %9s %7s %s\n", "name",
              "cow", "fp", "states", "dedup", "alloc", "faults", "hashed",
              "compared", "resid", "verdict");
  for (const auto &c : cells)
    std::printf("%-11s %-3s %-3s %9llu %7llu %7llu %7llu %8llu %9llu %7llu %s\n",
                c.name.c_str(), c.cow ? "on" : "off",
                c.fingerprint ? "on" : "off",
                (unsigned long long)c.metrics["states_visited"]
                    .get<std::uint64_t>(),
                (unsigned long long)c.metrics["dedup_hits"]
                    .get<std::uint64_t>(),
                (unsigned long long)c.metrics["pages_allocated_total"]
                    .get<std::uint64_t>(),
                (unsigned long long)c.metrics["cow_faults"]
                    .get<std::uint64_t>(),
                (unsigned long long)c.metrics["pages_hashed"]
                    .get<std::uint64_t>(),
                (unsigned long long)c.metrics["words_compared"]
                    .get<std::uint64_t>(),
                (unsigned long long)c.metrics["residual_instructions"]
                    .get<std::uint64_t>(),
                c.pass ? "pass" : "fail");
}

int cmd_bta(const std::string &file) {
  ProgramH p;
  check(pspec_program_parse(slurp(file).c_str(), p.slot()));
  char *report = nullptr;
  check(pspec_bta_report(p, &report));
  std::cout << adopt(report);
  return 0;
}

int cmd_specialize(const std::string &file, const CommonFlags &flags,
                   const std::vector<std::string> &supplied_pairs,
                   const std::string &supplied_file, std::string out_path,
                   bool canonical) {
  ProgramH p;
  check(pspec_program_parse(slurp(file).c_str(), p.slot()));
  AssignmentH supplied;
  parse_bindings(supplied_pairs, supplied_file, supplied);

  pspec_spec_options opt = options_from(flags);
  SpecH sr;
  check(pspec_specialize(p, supplied, &opt, sr.slot()));

  ProgramH residual;
  check(pspec_spec_result_residual(sr, residual.slot()));
  ProgramH canon;
  if (canonical) {
    check(pspec_program_canonicalize(residual, canon.slot()));
  }

  if (out_path.empty()) {
    out_path = file;
    if (out_path.size() > 3 && out_path.ends_with(".ir"))
      out_path.resize(out_path.size() - 3);
    out_path += "_spec.ir";
  }
  char *text = nullptr;
  check(pspec_program_print(canonical ? canon : residual, &text));
  spit(out_path, adopt(text));

  if (flags.json) {
    nlohmann::json j = metrics_json(sr);
    j["program"] = pspec_program_name(p);
    j["residual"] = out_path;
    std::cout << j.dump() << "\n";
  } else {
    char *metrics = nullptr;
    check(pspec_spec_result_metrics_text(sr, &metrics));
    std::cout << "residual=" << out_path << "\n"
              << "original_instructions="
              << pspec_program_instruction_count(p) << "\n"
              << "residual_instructions="
              << pspec_program_instruction_count(residual) << "\n"
              << adopt(metrics);
  }
  return 0;
}

int cmd_run(const std::string &file, const std::vector<std::string> &pairs,
            const std::string &input_file, std::uint64_t fuel, bool json) {
  ProgramH p;
  check(pspec_program_parse(slurp(file).c_str(), p.slot()));
  AssignmentH inputs;
  parse_bindings(pairs, input_file, inputs);
  RunH r;
  check(pspec_run(p, inputs, fuel ? fuel : (1u << 22), r.slot()));

  if (json) {
    nlohmann::json j;
    j["r0"] = pspec_run_result_r0(r);
    j["steps"] = pspec_run_result_steps(r);
    auto tape = nlohmann::json::array();
    for (std::uint64_t i = 0; i < pspec_run_result_tape_len(r); ++i)
      tape.push_back(pspec_run_result_tape_word(r, i));
    j["tape"] = tape;
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "r0=" << pspec_run_result_r0(r) << "\n"
              << "steps=" << pspec_run_result_steps(r) << "\n"
              << "tape=";
    for (std::uint64_t i = 0; i < pspec_run_result_tape_len(r); ++i)
      std::cout << (i ? " " : "") << pspec_run_result_tape_word(r, i);
    std::cout << "\n";
  }
  return 0;
}

int cmd_bench(std::vector<std::string> names, const std::string &grid,
              const CommonFlags &flags, std::uint64_t seed,
              std::uint64_t samples, std::uint64_t param_n,
              std::uint64_t param_pages, const std::string &param_pattern) {
  if (names.empty())
    for (std::size_t i = 0; i < pspec_benchmark_count(); ++i)
      names.push_back(pspec_benchmark_name_at(i));
  if ((param_n || param_pages || !param_pattern.empty()) && names.size() != 1)
    die("--n/--pages/--pattern need exactly one benchmark name");

  std::vector<std::pair<bool, bool>> cells;  // (cow, fingerprint)
  if (grid == "default") {
    cells = {{!flags.no_cow, !flags.no_fingerprint}};
  } else if (grid == "all") {
    cells = {{true, true}, {true, false}, {false, true}, {false, false}};
  } else {
    die("--grid must be 'default' or 'all'");
  }

  const std::uint64_t run_fuel = 1u << 22;
  std::vector<CellReport> reports;
  bool all_pass = true;

  for (const auto &name : names) {
    BenchH bench;
    check(pspec_benchmark_make(name.c_str(), param_n, param_pages,
                               param_pattern.c_str(), bench.slot()));
    ProgramH prog;
    check(pspec_benchmark_program(bench, prog.slot()));
    AssignmentH supplied;
    check(pspec_benchmark_supplied(bench, supplied.slot()));

    for (auto [cow, fp] : cells) {
      pspec_spec_options opt = options_from(flags);
      opt.copy_on_write = cow ? 1 : 0;
      opt.fingerprint = fp ? 1 : 0;
      SpecH sr;
      check(pspec_specialize(prog, supplied, &opt, sr.slot()));
      ProgramH residual;
      check(pspec_spec_result_residual(sr, residual.slot()));

      CellReport cell;
      cell.name = name;
      cell.cow = cow;
      cell.fingerprint = fp;
      cell.seed = seed;
      cell.samples = samples;
      cell.metrics = metrics_json(sr);

      for (std::uint64_t i = 0; i < samples; ++i) {
        std::uint64_t s = seed + i;
        AssignmentH delayed;
        check(pspec_benchmark_sample(bench, s, delayed.slot()));
        AssignmentH full;
        check(pspec_assignment_merge(supplied, delayed, full.slot()));
        RunH orig, res;
        check(pspec_run(prog, full, run_fuel, orig.slot()));
        check(pspec_run(residual, delayed, run_fuel, res.slot()));
        if (!same_output(orig, res)) {
          cell.pass = false;
          cell.first_fail_seed = s;
          break;
        }
      }
      all_pass = all_pass && cell.pass;

      if (flags.json) {
        print_cell_json(cell);
      } else {
        char *metrics = nullptr;
        check(pspec_spec_result_metrics_text(sr, &metrics));
        print_cell_text(cell, adopt(metrics));
      }
      reports.push_back(std::move(cell));
    }
  }

  print_table(reports);
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"program specializer for the block ir"};
  app.require_subcommand(1);
  int rc = 0;

  std::string file, supplied_file, out_path, input_file;
  std::vector<std::string> pairs, names;
  CommonFlags flags;
  bool canonical = false;
  std::string grid = "default";
  std::uint64_t seed = 1, samples = 20;
  std::uint64_t param_n = 0, param_pages = 0;
  std::string param_pattern;

  auto *bta = app.add_subcommand("bta", "classify instructions and report");
  bta->add_option("file", file, "program text")->required();
  bta->callback([&] { rc = cmd_bta(file); });

  auto *spec = app.add_subcommand(
      "specialize", "specialize a program to its supplied inputs");
  spec->add_option("file", file, "program text")->required();
  spec->add_option("--supplied", pairs,
                   "supplied binding name=value (value in assignment syntax)");
  spec->add_option("--supplied-file", supplied_file, "assignment file");
  spec->add_option("-o,--output", out_path,
                   "residual path (default: <file>_spec.ir)");
  spec->add_flag("--canonical", canonical,
                 "canonicalize labels before writing");
  spec->add_flag("--json", flags.json, "machine block as one JSON object");
  add_spec_flags(spec, flags);
  spec->callback([&] {
    rc = cmd_specialize(file, flags, pairs, supplied_file, out_path,
                        canonical);
  });

  auto *run = app.add_subcommand("run", "execute a program");
  run->add_option("file", file, "program text")->required();
  run->add_option("--input", pairs, "input binding name=value");
  run->add_option("--input-file", input_file, "assignment file");
  run->add_option("--fuel", flags.fuel, "instruction budget");
  run->add_flag("--json", flags.json, "machine block as one JSON object");
  run->callback(
      [&] { rc = cmd_run(file, pairs, input_file, flags.fuel, flags.json); });

  auto *bench = app.add_subcommand(
      "bench", "specialize benchmarks and verify residual outputs");
  bench->add_option("names", names, "benchmark names (default: all)");
  bench->add_option("--grid", grid, "store modes: 'default' or 'all'");
  bench->add_option("--seed", seed, "first delayed-input seed");
  bench->add_option("--samples", samples, "delayed inputs per verdict");
  bench->add_option("--n", param_n, "benchmark size parameter");
  bench->add_option("--pages", param_pages, "stack pages parameter");
  bench->add_option("--pattern", param_pattern, "matcher needle");
  bench->add_flag("--json", flags.json, "machine block as JSON, one per cell");
  add_spec_flags(bench, flags);
  bench->callback([&] {
    rc = cmd_bench(names, grid, flags, seed, samples, param_n, param_pages,
                   param_pattern);
  });

  CLI11_PARSE(app, argc, argv);
  return rc;
}
