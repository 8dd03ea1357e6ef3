#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fingerprint.hpp"
#include "ir.hpp"

namespace pspec {

// A page of machine words.  Absent pages read as zero everywhere, so a
// snapshot only holds the pages that ever contained nonzero data or were
// written to.
using Page = std::array<Word, kPageWords>;
using PageRef = std::shared_ptr<const Page>;

struct StoreMetrics {
  std::uint64_t pages_allocated_total = 0;
  std::uint64_t live_pages = 0;
  std::uint64_t live_pages_max = 0;
  std::uint64_t cow_faults = 0;
  std::uint64_t pages_hashed = 0;
  std::uint64_t words_compared = 0;
};

struct StoreOptions {
  bool copy_on_write = true;
  bool fingerprint = true;
};

class Snapshot;
using SnapshotRef = std::shared_ptr<const Snapshot>;

// An immutable machine state: register file, sparse page map, and (when
// fingerprinting is on) the state hash.  Snapshots forked from a common
// ancestor share the pages neither side has written.
class Snapshot {
 public:
  Word reg(unsigned r) const { return regs_.at(r); }
  const std::array<Word, kNumRegs> &regs() const { return regs_; }
  Word load(std::uint64_t addr) const;
  const std::map<std::uint64_t, PageRef> &pages() const { return pages_; }
  const Fingerprint &fingerprint() const { return fp_; }
  std::uint64_t serial() const { return serial_; }

 private:
  friend class StateStore;
  friend class MutableState;
  Snapshot() = default;

  std::array<Word, kNumRegs> regs_{};
  std::map<std::uint64_t, PageRef> pages_;
  Fingerprint fp_{};
  std::uint64_t serial_ = 0;
};

class MutableState;

// Allocates pages, mints snapshots, and keeps the books for one
// specialization run.  Not thread-safe; use one store per run.
class StateStore {
 public:
  explicit StateStore(std::uint64_t address_space_pages, StoreOptions opt = {},
                      std::shared_ptr<const FingerprintContext> ctx = nullptr);

  // Builds the first snapshot.  page_content maps page index to exactly
  // kPageWords words; all-zero pages may simply be omitted.  Register bits
  // cleared in keep_regs_mask are zeroed before hashing, like seal().
  SnapshotRef initial(const std::array<Word, kNumRegs> &regs,
                      const std::map<std::uint64_t, std::vector<Word>> &page_content,
                      std::uint64_t keep_regs_mask = ~std::uint64_t{0});

  MutableState fork(SnapshotRef base);

  const StoreMetrics &metrics() const { return metrics_->m; }
  const StoreOptions &options() const { return opt_; }
  std::uint64_t address_space_pages() const { return pages_; }
  std::uint64_t register_page_index() const { return pages_; }
  const FingerprintContext *fp_context() const { return ctx_.get(); }

 private:
  friend class MutableState;
  friend class VisitedSet;
  struct Accounting {
    StoreMetrics m;
  };

  std::shared_ptr<Page> alloc_page();
  Fingerprint reg_page_term(const std::array<Word, kNumRegs> &regs);
  std::uint64_t next_serial() { return serial_++; }

  std::uint64_t pages_;
  StoreOptions opt_;
  std::shared_ptr<const FingerprintContext> ctx_;
  std::shared_ptr<Accounting> metrics_;
  std::uint64_t serial_ = 0;
};

// A fork of a snapshot that accepts writes.  The first write to a page in a
// fork's lifetime copies it (a CoW fault); later writes hit the copy.
// seal() turns the fork back into an immutable snapshot, zeroing registers
// outside keep_regs_mask so states that differ only in dead or symbolic
// registers collapse to one canonical form.
class MutableState {
 public:
  Word reg(unsigned r) const { return regs_.at(r); }
  void set_reg(unsigned r, Word v) { regs_.at(r) = v; }
  Word load(std::uint64_t addr) const;
  void store(std::uint64_t addr, Word v);
  SnapshotRef seal(std::uint64_t keep_regs_mask = ~std::uint64_t{0});

 private:
  friend class StateStore;
  MutableState(StateStore *store, SnapshotRef base);

  struct DirtyEntry {
    std::shared_ptr<Page> fresh;
    PageRef old;  // null when the page was absent in the base
  };
  Page &fault(std::uint64_t page_index);

  StateStore *store_;
  SnapshotRef base_;
  std::array<Word, kNumRegs> regs_;
  std::map<std::uint64_t, DirtyEntry> dirty_;
  bool sealed_ = false;
};

// Compares two snapshots word by word, charging every word actually
// inspected to metrics.words_compared.  Pages shared by handle are skipped.
bool states_equal(const Snapshot &a, const Snapshot &b, StoreMetrics &m);

// Tracks which (block, state) pairs specialization has already produced and
// assigns each distinct pair its residual label.
//
// ByFingerprint keys on the state hash and drops the snapshot afterwards.
// ByContent retains every snapshot and compares candidates word by word,
// which is the fallback when fingerprinting is off.
class VisitedSet {
 public:
  enum class Mode { ByFingerprint, ByContent };

  VisitedSet(Mode mode, StateStore &store);

  // Returns the residual label for (origin_label, state).  *fresh is set to
  // true when this pair was never seen before.
  std::string visit(const std::string &origin_label, const SnapshotRef &state,
                    bool *fresh);

 private:
  std::string mint_label(const std::string &origin_label, const Snapshot &s);

  Mode mode_;
  StateStore *store_;
  std::unordered_map<std::string, std::string> by_fp_;
  std::map<std::string, std::vector<std::pair<SnapshotRef, std::string>>> by_content_;
  std::map<std::string, int> label_uses_;
};

}  // namespace pspec
