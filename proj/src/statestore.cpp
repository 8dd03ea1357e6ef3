#include "statestore.hpp"

#include <algorithm>

#include "error.hpp"

namespace pspec {

Word Snapshot::load(std::uint64_t addr) const {
  auto it = pages_.find(addr / kPageWords);
  if (it == pages_.end()) return 0;
  return (*it->second)[addr % kPageWords];
}

StateStore::StateStore(std::uint64_t address_space_pages, StoreOptions opt,
                       std::shared_ptr<const FingerprintContext> ctx)
    : pages_(address_space_pages),
      opt_(opt),
      ctx_(std::move(ctx)),
      metrics_(std::make_shared<Accounting>()) {
  if (address_space_pages == 0 || address_space_pages > kMaxPages)
    throw Error(ErrKind::Input, "address space must be between 1 and " +
                                    std::to_string(kMaxPages) + " pages");
  if (opt_.fingerprint) {
    if (!ctx_) ctx_ = FingerprintContext::standard();
    if (ctx_->page_words() != kPageWords)
      throw Error(ErrKind::Input,
                  "fingerprint context page size does not match the store");
  } else {
    ctx_.reset();
  }
}

std::shared_ptr<Page> StateStore::alloc_page() {
  auto acct = metrics_;
  ++acct->m.pages_allocated_total;
  ++acct->m.live_pages;
  acct->m.live_pages_max = std::max(acct->m.live_pages_max, acct->m.live_pages);
  return std::shared_ptr<Page>(new Page, [acct](Page *p) {
    --acct->m.live_pages;
    delete p;
  });
}

Fingerprint StateStore::reg_page_term(const std::array<Word, kNumRegs> &regs) {
  static_assert(kNumRegs <= kPageWords);
  std::vector<Word> buf(ctx_->page_words(), 0);
  std::copy(regs.begin(), regs.end(), buf.begin());
  ++metrics_->m.pages_hashed;
  return ctx_->page_term(register_page_index(), buf);
}

SnapshotRef StateStore::initial(
    const std::array<Word, kNumRegs> &regs,
    const std::map<std::uint64_t, std::vector<Word>> &page_content,
    std::uint64_t keep_regs_mask) {
  auto snap = std::shared_ptr<Snapshot>(new Snapshot);
  snap->regs_ = regs;
  for (unsigned r = 0; r < kNumRegs; ++r)
    if (!(keep_regs_mask >> r & 1)) snap->regs_[r] = 0;

  for (const auto &[idx, words] : page_content) {
    if (idx >= pages_)
      throw Error(ErrKind::Input,
                  "initial page " + std::to_string(idx) + " is past the end of "
                  "the address space");
    if (words.size() != kPageWords)
      throw Error(ErrKind::Input, "initial page " + std::to_string(idx) +
                                      " must hold exactly " +
                                      std::to_string(kPageWords) + " words");
    if (std::all_of(words.begin(), words.end(), [](Word w) { return w == 0; }))
      continue;
    auto page = alloc_page();
    std::copy(words.begin(), words.end(), page->begin());
    snap->pages_.emplace(idx, std::move(page));
  }

  if (opt_.fingerprint) {
    Fingerprint fp{};
    for (const auto &[idx, page] : snap->pages_) {
      fp = fp_xor(fp, ctx_->page_term(idx, *page));
      ++metrics_->m.pages_hashed;
    }
    snap->fp_ = fp_xor(fp, reg_page_term(snap->regs_));
  }
  snap->serial_ = next_serial();
  return snap;
}

MutableState StateStore::fork(SnapshotRef base) {
  if (!base) throw Error(ErrKind::Internal, "fork of a null snapshot");
  return MutableState(this, std::move(base));
}

MutableState::MutableState(StateStore *store, SnapshotRef base)
    : store_(store), base_(std::move(base)), regs_(base_->regs_) {}

Word MutableState::load(std::uint64_t addr) const {
  auto it = dirty_.find(addr / kPageWords);
  if (it != dirty_.end()) return (*it->second.fresh)[addr % kPageWords];
  return base_->load(addr);
}

Page &MutableState::fault(std::uint64_t page_index) {
  auto it = dirty_.find(page_index);
  if (it != dirty_.end()) return *it->second.fresh;
  if (page_index >= store_->pages_)
    throw Error(ErrKind::Runtime, "write to page " + std::to_string(page_index) +
                                      ", past the end of the address space");
  DirtyEntry e;
  e.fresh = store_->alloc_page();
  if (auto bit = base_->pages_.find(page_index); bit != base_->pages_.end()) {
    e.old = bit->second;
    *e.fresh = *e.old;
  } else {
    e.fresh->fill(0);
  }
  ++store_->metrics_->m.cow_faults;
  Page &ref = *e.fresh;
  dirty_.emplace(page_index, std::move(e));
  return ref;
}

void MutableState::store(std::uint64_t addr, Word v) {
  if (sealed_) throw Error(ErrKind::Internal, "write to a sealed state");
  fault(addr / kPageWords)[addr % kPageWords] = v;
}

SnapshotRef MutableState::seal(std::uint64_t keep_regs_mask) {
  if (sealed_) throw Error(ErrKind::Internal, "state sealed twice");
  sealed_ = true;

  // Without copy-on-write every snapshot is a full copy of the address
  // space, so touch every page before building it.
  if (!store_->opt_.copy_on_write)
    for (std::uint64_t idx = 0; idx < store_->pages_; ++idx) fault(idx);

  auto snap = std::shared_ptr<Snapshot>(new Snapshot);
  snap->regs_ = regs_;
  for (unsigned r = 0; r < kNumRegs; ++r)
    if (!(keep_regs_mask >> r & 1)) snap->regs_[r] = 0;
  snap->pages_ = base_->pages_;
  for (auto &[idx, e] : dirty_) snap->pages_[idx] = e.fresh;

  if (store_->opt_.fingerprint) {
    auto &m = store_->metrics_->m;
    const FingerprintContext *ctx = store_->ctx_.get();
    Fingerprint fp{};
    if (store_->opt_.copy_on_write) {
      // Incremental update: only pages this fork wrote can have changed.
      fp = base_->fp_;
      for (const auto &[idx, e] : dirty_) {
        if (e.old) {
          fp = fp_xor(fp, ctx->page_term(idx, *e.old));
          ++m.pages_hashed;
        }
        fp = fp_xor(fp, ctx->page_term(idx, *e.fresh));
        ++m.pages_hashed;
      }
      fp = fp_xor(fp, store_->reg_page_term(base_->regs_));
    } else {
      // A full copy has no change log worth trusting; rehash everything.
      for (const auto &[idx, page] : snap->pages_) {
        fp = fp_xor(fp, ctx->page_term(idx, *page));
        ++m.pages_hashed;
      }
    }
    snap->fp_ = fp_xor(fp, store_->reg_page_term(snap->regs_));
  }
  snap->serial_ = store_->next_serial();
  return snap;
}

bool states_equal(const Snapshot &a, const Snapshot &b, StoreMetrics &m) {
  for (unsigned r = 0; r < kNumRegs; ++r) {
    ++m.words_compared;
    if (a.regs()[r] != b.regs()[r]) return false;
  }
  auto ita = a.pages().begin(), enda = a.pages().end();
  auto itb = b.pages().begin(), endb = b.pages().end();
  while (ita != enda || itb != endb) {
    const Page *pa = nullptr, *pb = nullptr;
    if (itb == endb || (ita != enda && ita->first < itb->first)) {
      pa = ita->second.get();
      ++ita;
    } else if (ita == enda || itb->first < ita->first) {
      pb = itb->second.get();
      ++itb;
    } else {
      if (ita->second == itb->second) {  // shared handle, no need to look
        ++ita, ++itb;
        continue;
      }
      pa = ita->second.get();
      pb = itb->second.get();
      ++ita, ++itb;
    }
    for (std::size_t u = 0; u < kPageWords; ++u) {
      ++m.words_compared;
      Word wa = pa ? (*pa)[u] : 0, wb = pb ? (*pb)[u] : 0;
      if (wa != wb) return false;
    }
  }
  return true;
}

VisitedSet::VisitedSet(Mode mode, StateStore &store)
    : mode_(mode), store_(&store) {
  if (mode_ == Mode::ByFingerprint && !store.options().fingerprint)
    throw Error(ErrKind::Internal,
                "fingerprint keying asked for on a store that does not hash");
}

std::string VisitedSet::mint_label(const std::string &origin_label,
                                   const Snapshot &s) {
  std::string base = origin_label + "__";
  if (mode_ == Mode::ByFingerprint)
    base += to_hex16(s.fingerprint());
  else
    base += "s" + std::to_string(s.serial());
  int &uses = label_uses_[base];
  std::string label = uses == 0 ? base : base + "_" + std::to_string(uses);
  ++uses;
  return label;
}

std::string VisitedSet::visit(const std::string &origin_label,
                              const SnapshotRef &state, bool *fresh) {
  if (mode_ == Mode::ByFingerprint) {
    std::string key = origin_label + "#" + to_hex(state->fingerprint());
    auto it = by_fp_.find(key);
    if (it != by_fp_.end()) {
      *fresh = false;
      return it->second;
    }
    std::string label = mint_label(origin_label, *state);
    by_fp_.emplace(std::move(key), label);
    *fresh = true;
    return label;
  }
  auto &bucket = by_content_[origin_label];
  for (const auto &[snap, label] : bucket)
    if (states_equal(*snap, *state, store_->metrics_->m)) {
      *fresh = false;
      return label;
    }
  std::string label = mint_label(origin_label, *state);
  bucket.emplace_back(state, label);
  *fresh = true;
  return label;
}

}  // namespace pspec
