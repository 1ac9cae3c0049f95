#!/usr/bin/env python3
"""Regenerates include/mdfn/unicode_punct.h.

Emits the sorted, merged codepoint ranges whose Unicode general category
starts with P (Pc, Pd, Pe, Pf, Pi, Po, Ps).
"""
import sys
import unicodedata

ranges = []
for cp in range(0x110000):
    cat = unicodedata.category(chr(cp))
    if cat.startswith("P"):
        if ranges and ranges[-1][1] == cp - 1:
            ranges[-1][1] = cp
        else:
            ranges.append([cp, cp])

out = sys.stdout
out.write("""#ifndef MDFN_UNICODE_PUNCT_H_
#define MDFN_UNICODE_PUNCT_H_

// Generated by scripts/gen_punct_table.py (Unicode %s). Do not edit.

#include <algorithm>
#include <cstdint>

namespace mdfn {

struct CodepointRange {
  char32_t lo;
  char32_t hi;
};

// Codepoints whose general category is P* (punctuation), as inclusive ranges.
inline constexpr CodepointRange kPunctRanges[] = {
""" % unicodedata.unidata_version)
for lo, hi in ranges:
    out.write("    {0x%X, 0x%X},\n" % (lo, hi))
out.write("""};

inline bool is_punct_codepoint(char32_t cp) {
  auto it = std::upper_bound(std::begin(kPunctRanges), std::end(kPunctRanges), cp,
                             [](char32_t v, const CodepointRange& r) { return v < r.lo; });
  if (it == std::begin(kPunctRanges)) return false;
  --it;
  return cp >= it->lo && cp <= it->hi;
}

}  // namespace mdfn

#endif  // MDFN_UNICODE_PUNCT_H_
""")
