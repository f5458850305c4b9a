"""Angular modes of the linearized problem and the coercivity constant.

Run with ``python notebooks/02_harmonic_modes.py``.
"""

from __future__ import annotations

from bbspectra import coercivity_constant, mode_table, solve_limit_eigen

profile = solve_limit_eigen(2, 1.0, 1.0)
table = mode_table(profile, lmax=6)

print(" ell    g_ell(r0)   gap/||phi||^2 for a pure mode")
for ell in table.degrees:
    ratio = table.single_mode_ratio(ell) if ell >= 2 else float("nan")
    print(f"{ell:4d} {table.g_r0(ell):12.6f} {ratio:14.4f}")

# Degree one only translates the set, so it carries no second-order cost.
print(f"coercivity constant C = {coercivity_constant(table):.9f}")
