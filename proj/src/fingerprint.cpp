#include "fingerprint.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

namespace pspec {

namespace {

using U64 = std::uint64_t;
using U256 = std::array<U64, 4>;

int fp_degree(const Fingerprint &f) {
  if (f.hi) return 127 - std::countl_zero(f.hi);
  if (f.lo) return 63 - std::countl_zero(f.lo);
  return -1;  // zero polynomial
}

Fingerprint fp_shl1(Fingerprint f) {
  return {f.lo << 1, (f.hi << 1) | (f.lo >> 63)};
}

bool fp_bit(const Fingerprint &f, int i) {
  return ((i < 64 ? f.lo >> i : f.hi >> (i - 64)) & 1) != 0;
}

// Carry-less 64x64 multiply via a 4-bit window; the product has degree
// <= 126 and fits a Fingerprint exactly.
Fingerprint clmul64(U64 a, U64 b) {
  Fingerprint t[16];
  t[0] = {0, 0};
  t[1] = {a, 0};
  for (int i = 2; i < 16; i += 2) {
    t[i] = fp_shl1(t[i / 2]);
    t[i + 1] = fp_xor(t[i], t[1]);
  }
  Fingerprint acc{0, 0};
  for (int nib = 15; nib >= 0; --nib) {
    acc = {acc.lo << 4, (acc.hi << 4) | (acc.lo >> 60)};
    acc = fp_xor(acc, t[(b >> (nib * 4)) & 0xf]);
  }
  return acc;
}

U256 mul128(Fingerprint a, Fingerprint b) {
  Fingerprint p00 = clmul64(a.lo, b.lo);
  Fingerprint p01 = clmul64(a.lo, b.hi);
  Fingerprint p10 = clmul64(a.hi, b.lo);
  Fingerprint p11 = clmul64(a.hi, b.hi);
  return {p00.lo,
          p00.hi ^ p01.lo ^ p10.lo,
          p01.hi ^ p10.hi ^ p11.lo,
          p11.hi};
}

U256 shr256(const U256 &v, int s) {
  U256 r{0, 0, 0, 0};
  int limb = s / 64, off = s % 64;
  for (int i = 0; i + limb < 4; ++i) {
    r[i] = v[i + limb] >> off;
    if (off && i + limb + 1 < 4) r[i] |= v[i + limb + 1] << (64 - off);
  }
  return r;
}

// Polynomial helpers on full 128-bit values (for gcd in the Rabin test).
Fingerprint poly_mod(Fingerprint a, const Fingerprint &m) {
  int dm = fp_degree(m);
  for (int d = fp_degree(a); d >= dm; d = fp_degree(a)) {
    int s = d - dm;
    Fingerprint shifted = m;
    for (int i = 0; i < s; ++i) shifted = fp_shl1(shifted);  // s <= 127 here
    a = fp_xor(a, shifted);
  }
  return a;
}

Fingerprint poly_gcd(Fingerprint a, Fingerprint b) {
  while (!b.is_zero()) {
    Fingerprint r = poly_mod(a, b);
    a = b;
    b = r;
  }
  return a;
}

}  // namespace

std::string to_hex(const Fingerprint &f) {
  static const char *digits = "0123456789abcdef";
  std::string s(32, '0');
  for (int i = 0; i < 16; ++i) s[15 - i] = digits[(f.hi >> (i * 4)) & 0xf];
  for (int i = 0; i < 16; ++i) s[31 - i] = digits[(f.lo >> (i * 4)) & 0xf];
  return s;
}

std::string to_hex16(const Fingerprint &f) { return to_hex(f).substr(0, 16); }

std::size_t fp_hash_value(const Fingerprint &f) {
  return f.lo ^ (f.hi * 0x9e3779b97f4a7c15ULL);
}

FingerprintContext::FingerprintContext(Fingerprint modulus, std::uint64_t page_bits)
    : modulus_(modulus), page_bits_(page_bits) {
  k_ = fp_degree(modulus);
  if (k_ < 2)
    throw Error(ErrKind::Validate, "modulus degree must be at least 2");
  if (page_bits < 8 || (page_bits & (page_bits - 1)) != 0)
    throw Error(ErrKind::Validate, "page_bits must be a power of two >= 8");

  mod_low_ = modulus_;
  if (k_ < 64) mod_low_.lo &= ~(U64{1} << k_);
  else mod_low_.hi &= ~(U64{1} << (k_ - 64));

  // Residues of t^(k+i); enough positions to fold any 256-bit product.
  int nbits = 256 - k_;
  int ntables = (nbits + 7) / 8;
  std::vector<Fingerprint> bit(ntables * 8);
  Fingerprint r = mod_low_;  // t^k mod P
  for (int i = 0; i < ntables * 8; ++i) {
    bit[i] = r;
    r = fp_shl1(r);
    if (fp_bit(r, k_)) {
      if (k_ < 64) r.lo &= ~(U64{1} << k_);
      else r.hi &= ~(U64{1} << (k_ - 64));
      r = fp_xor(r, mod_low_);
    }
  }
  fold_.resize(ntables);
  for (int j = 0; j < ntables; ++j) {
    fold_[j][0] = {0, 0};
    for (int b = 1; b < 256; ++b) {
      int low = b & -b;
      int idx = std::countr_zero(static_cast<unsigned>(b));
      fold_[j][b] = fp_xor(fold_[j][b ^ low], bit[j * 8 + idx]);
    }
  }

  // Rabin irreducibility: t^(2^k) == t mod P, and for every prime p | k,
  // gcd(P, t^(2^(k/p)) - t) == 1.
  Fingerprint t{2, 0};
  Fingerprint x = t;
  std::vector<int> checkpoints;
  int n = k_;
  for (int p = 2; p * p <= n; ++p)
    if (n % p == 0) {
      checkpoints.push_back(k_ / p);
      while (n % p == 0) n /= p;
    }
  if (n > 1) checkpoints.push_back(k_ / n);
  std::sort(checkpoints.begin(), checkpoints.end());

  std::size_t next = 0;
  for (int i = 1; i <= k_; ++i) {
    x = mul_mod(x, x);
    while (next < checkpoints.size() && checkpoints[next] == i) {
      Fingerprint g = poly_gcd(modulus_, fp_xor(x, t));
      if (fp_degree(g) != 0)
        throw Error(ErrKind::Validate, "modulus is reducible");
      ++next;
    }
  }
  if (!(x == t)) throw Error(ErrKind::Validate, "modulus is reducible");
}

std::shared_ptr<const FingerprintContext> FingerprintContext::standard() {
  static std::shared_ptr<const FingerprintContext> ctx =
      std::make_shared<const FingerprintContext>(
          Fingerprint{0b11, U64{1} << 63}, U64{1} << 15);
  return ctx;
}

Fingerprint FingerprintContext::reduce256(const U256 &v) const {
  U256 over = shr256(v, k_);
  Fingerprint acc{v[0], k_ > 64 ? v[1] : 0};
  if (k_ < 64) acc.lo &= (U64{1} << k_) - 1;
  else if (k_ < 128) acc.hi &= k_ == 64 ? 0 : (U64{1} << (k_ - 64)) - 1;
  for (std::size_t j = 0; j < fold_.size(); ++j) {
    unsigned byte = (over[j / 8] >> (j % 8 * 8)) & 0xff;
    if (byte) acc = fp_xor(acc, fold_[j][byte]);
  }
  return acc;
}

Fingerprint FingerprintContext::mul_mod(Fingerprint a, Fingerprint b) const {
  return reduce256(mul128(a, b));
}

Fingerprint FingerprintContext::pow_t_mod(std::uint64_t e) const {
  bool cacheable = e % page_bits_ == 0;
  if (cacheable) {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = power_cache_.find(e);
    if (it != power_cache_.end()) return it->second;
  }
  Fingerprint result{1, 0};
  Fingerprint base{2, 0};  // t
  for (std::uint64_t rest = e; rest; rest >>= 1) {
    if (rest & 1) result = mul_mod(result, base);
    base = mul_mod(base, base);
  }
  if (cacheable) {
    std::lock_guard<std::mutex> lock(cache_mu_);
    power_cache_.emplace(e, result);
  }
  return result;
}

Fingerprint FingerprintContext::hash_page(std::span<const Word> page) const {
  if (page.empty()) return {0, 0};
  if (page.size() != page_words())
    throw Error(ErrKind::Internal, "hash_page: wrong page size");
  if (page_bits_ % 64 != 0 && (page.back() >> (page_bits_ % 64)) != 0)
    throw Error(ErrKind::Internal, "hash_page: bits set beyond page_bits");
  // Horner from the high word down: h = h * t^64 + word.
  Fingerprint h{0, 0};
  for (std::size_t u = page.size(); u-- > 0;) {
    U256 acc{page[u], h.lo, h.hi, 0};
    h = reduce256(acc);
  }
  return h;
}

Fingerprint FingerprintContext::page_term(std::uint64_t index,
                                          std::span<const Word> page) const {
  Fingerprint hp = hash_page(page);
  if (hp.is_zero()) return hp;
  return mul_mod(pow_t_mod(index * page_bits_), hp);
}

Fingerprint FingerprintContext::full_hash(
    const std::vector<std::pair<std::uint64_t, std::span<const Word>>> &pages) const {
  Fingerprint h{0, 0};
  for (const auto &[idx, page] : pages) h = fp_xor(h, page_term(idx, page));
  return h;
}

Fingerprint FingerprintContext::incremental_update(
    Fingerprint h, std::span<const PageChange> changes) const {
  for (std::size_t i = 0; i < changes.size(); ++i)
    for (std::size_t j = i + 1; j < changes.size(); ++j)
      if (changes[i].index == changes[j].index)
        throw Error(ErrKind::Internal, "incremental_update: duplicate page index");
  for (const auto &c : changes) {
    h = fp_xor(h, page_term(c.index, c.old_bits));
    h = fp_xor(h, page_term(c.index, c.new_bits));
  }
  return h;
}

}  // namespace pspec
