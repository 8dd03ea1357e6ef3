#pragma once

// Reference GF(2)[t] arithmetic by schoolbook shift-xor and long division.
// Deliberately shares nothing with the library's windowed implementation;
// tests compare the two routes.

#include <cstdint>
#include <span>
#include <vector>

#include "fingerprint.hpp"

namespace gf2 {

using Poly = std::vector<std::uint64_t>;  // bit i of word u is t^(64u+i)

inline void trim(Poly &p) {
  while (!p.empty() && p.back() == 0) p.pop_back();
}

inline int deg(const Poly &p) {
  for (std::size_t u = p.size(); u-- > 0;)
    if (p[u]) {
      int b = 63;
      while (!((p[u] >> b) & 1)) --b;
      return static_cast<int>(u) * 64 + b;
    }
  return -1;
}

inline bool get(const Poly &p, std::uint64_t i) {
  std::uint64_t u = i / 64;
  return u < p.size() && ((p[u] >> (i % 64)) & 1);
}

inline void flip(Poly &p, std::uint64_t i) {
  std::uint64_t u = i / 64;
  if (u >= p.size()) p.resize(u + 1, 0);
  p[u] ^= std::uint64_t{1} << (i % 64);
}

inline Poly add(Poly a, const Poly &b) {
  if (a.size() < b.size()) a.resize(b.size(), 0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] ^= b[i];
  trim(a);
  return a;
}

// a ^= b << s
inline void xor_shifted(Poly &a, const Poly &b, std::uint64_t s) {
  std::uint64_t limb = s / 64, off = s % 64;
  std::size_t need = b.size() + limb + 1;
  if (a.size() < need) a.resize(need, 0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    a[i + limb] ^= b[i] << off;
    if (off) a[i + limb + 1] ^= b[i] >> (64 - off);
  }
}

inline Poly mul(const Poly &a, const Poly &b) {
  Poly r;
  int da = deg(a);
  for (int i = 0; i <= da; ++i)
    if (get(a, i)) xor_shifted(r, b, i);
  trim(r);
  return r;
}

inline Poly mod(Poly a, const Poly &m) {
  int dm = deg(m);
  for (int d = deg(a); d >= dm; --d)
    if (get(a, d)) xor_shifted(a, m, d - dm);
  trim(a);
  return a;
}

inline Poly pow_t(std::uint64_t e, const Poly &m) {
  Poly result{1};
  Poly base{2};  // t
  base = mod(base, m);
  while (e) {
    if (e & 1) result = mod(mul(result, base), m);
    base = mod(mul(base, base), m);
    e >>= 1;
  }
  return result;
}

inline Poly from_fp(const pspec::Fingerprint &f) {
  Poly p{f.lo, f.hi};
  trim(p);
  return p;
}

inline pspec::Fingerprint to_fp(const Poly &p) {
  pspec::Fingerprint f;
  if (!p.empty()) f.lo = p[0];
  if (p.size() > 1) f.hi = p[1];
  return f;
}

inline Poly from_page(std::span<const pspec::Word> page) {
  Poly p(page.begin(), page.end());
  trim(p);
  return p;
}

// Hash of a whole paged state the slow way: build sum of t^(i*w)*page_i and
// divide once.
inline pspec::Fingerprint state_hash(
    const std::vector<std::pair<std::uint64_t, gf2::Poly>> &pages,
    std::uint64_t page_bits, const Poly &m) {
  Poly sum;
  for (const auto &[idx, page] : pages) xor_shifted(sum, page, idx * page_bits);
  trim(sum);
  return to_fp(mod(sum, m));
}

}  // namespace gf2
