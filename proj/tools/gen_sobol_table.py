#!/usr/bin/env python3
"""Regenerate include/bal/detail/sobol_table.hpp.

The direction numbers are the Joe & Kuo "new-joe-kuo-6.21201" set
(https://web.maths.unsw.edu.au/~fkuo/sobol/), read here from the copy that
SciPy ships in scipy/stats/_sobol_direction_numbers.npz. Only the first
kMaxDim dimensions are emitted.
"""
import os
import sys

import numpy as np
import scipy

MAX_DIM = 64

path = os.path.join(os.path.dirname(scipy.__file__), "stats", "_sobol_direction_numbers.npz")
data = np.load(path)
poly, vinit = data["poly"], data["vinit"]

out = sys.argv[1] if len(sys.argv) > 1 else "include/bal/detail/sobol_table.hpp"
rows = []
for j in range(MAX_DIM):
    p = int(poly[j])
    s = p.bit_length() - 1
    a = (p >> 1) & ((1 << max(s - 1, 0)) - 1) if s > 0 else 0
    m = [int(v) for v in vinit[j][:s]]
    m += [0] * (18 - len(m))
    rows.append(f"    {{{s}, {a}, {{{', '.join(map(str, m))}}}}},")

with open(out, "w") as f:
    f.write("""#ifndef BAL_DETAIL_SOBOL_TABLE_HPP
#define BAL_DETAIL_SOBOL_TABLE_HPP

// Generated by tools/gen_sobol_table.py. Do not edit.
// Joe & Kuo direction numbers (new-joe-kuo-6.21201), first %d dimensions.
// Row j: degree s of the primitive polynomial, its interior coefficient bits a,
// and the initial direction integers m_1..m_s. Row 0 is the van der Corput
// dimension (s = 0).

#include <array>
#include <cstdint>

namespace bal::detail {

struct SobolPoly {
  int degree;
  std::uint32_t coeffs;
  std::array<std::uint32_t, 18> m;
};

inline constexpr int kSobolMaxDim = %d;

inline constexpr std::array<SobolPoly, kSobolMaxDim> kSobolTable{{
%s
}};

}  // namespace bal::detail

#endif  // BAL_DETAIL_SOBOL_TABLE_HPP
""" % (MAX_DIM, MAX_DIM, "\n".join(rows)))
