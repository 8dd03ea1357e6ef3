#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "ir.hpp"

namespace pspec {

// Residue of a GF(2) polynomial: bit i of hi:lo is the coefficient of t^i.
struct Fingerprint {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  bool operator==(const Fingerprint &) const = default;
  bool is_zero() const { return lo == 0 && hi == 0; }
};

inline Fingerprint fp_xor(Fingerprint a, Fingerprint b) {
  return {a.lo ^ b.lo, a.hi ^ b.hi};
}

std::string to_hex(const Fingerprint &f);    // 32 lowercase hex digits, high bits first
std::string to_hex16(const Fingerprint &f);  // first 16 of the above

std::size_t fp_hash_value(const Fingerprint &f);

// One page edit for incremental_update. Spans may be empty to mean an
// all-zero page (absent in a page table).
struct PageChange {
  std::uint64_t index;
  std::span<const Word> old_bits;
  std::span<const Word> new_bits;
};

// Rabin fingerprinting context: residues mod an irreducible P(t) of degree k,
// states split into pages of page_bits bits. Bit b of word u in a page is the
// coefficient of t^(64u+b); page i contributes t^(i*page_bits) * page_i(t).
//
// Immutable after construction except the power cache, which is memoized
// under a mutex; hashing member functions are safe to call concurrently.
class FingerprintContext {
 public:
  // modulus includes the leading term: t^127+t+1 is {lo=0b11, hi=1<<63}.
  // Throws Error unless 2 <= deg <= 127, the modulus is irreducible (Rabin's
  // test), and page_bits is a power of two >= 8.
  FingerprintContext(Fingerprint modulus, std::uint64_t page_bits);

  static std::shared_ptr<const FingerprintContext> standard();  // t^127+t+1, 2^15 bits

  int degree() const { return k_; }
  std::uint64_t page_bits() const { return page_bits_; }
  std::size_t page_words() const { return (page_bits_ + 63) / 64; }

  Fingerprint add(Fingerprint a, Fingerprint b) const { return fp_xor(a, b); }
  Fingerprint mul_mod(Fingerprint a, Fingerprint b) const;
  // t^e mod P; cached for exponents that are multiples of page_bits.
  Fingerprint pow_t_mod(std::uint64_t e) const;

  // Hash of one page polynomial. The span must hold exactly page_words()
  // words with no bits set beyond page_bits.
  Fingerprint hash_page(std::span<const Word> page) const;
  // t^(index*page_bits) * hash_page(page) mod P. Empty span = zero page.
  Fingerprint page_term(std::uint64_t index, std::span<const Word> page) const;

  // Sum of page terms; the full-reconstruction reference for incremental
  // maintenance. Pages absent from the list are zero.
  Fingerprint full_hash(
      const std::vector<std::pair<std::uint64_t, std::span<const Word>>> &pages) const;

  // h of a state plus a set of page replacements; error if an index repeats.
  Fingerprint incremental_update(Fingerprint h, std::span<const PageChange> changes) const;

 private:
  Fingerprint reduce256(const std::array<std::uint64_t, 4> &v) const;

  int k_;
  Fingerprint modulus_;
  Fingerprint mod_low_;  // modulus without the leading term == t^k mod P
  std::uint64_t page_bits_;
  std::vector<std::array<Fingerprint, 256>> fold_;  // fold_[j][b]: b<<(k+8j) mod P
  mutable std::mutex cache_mu_;
  mutable std::unordered_map<std::uint64_t, Fingerprint> power_cache_;
};

}  // namespace pspec
