"""Optimal favorable sets in an ellipse as the favorable area shrinks.

Each point reuses the previous optimum in blow-up coordinates, and the grid
keeps a fixed number of cells across the favorable radius.
"""

from __future__ import annotations

from bbspectra import DomainSpec, rearrangement_optimize, run_sweep, solve_limit_eigen

profile = solve_limit_eigen(2, 1.0, 1.0)

disk = DomainSpec.parse("disk:1.0")
res = rearrangement_optimize(disk.grid(2.0 / 128), 0.1 * disk.volume)
print(f"disk, 10% favorable: lambda = {res.lam:.6f} after {len(res.trace.records)} steps")

ellipse = DomainSpec.parse("ellipse:1.0,0.6")
points = run_sweep(ellipse, [0.04, 0.02, 0.01, 0.005], 12.0, lambda0=profile.lambda0)
print(" eps/|D|   eps^(2/N) lambda / lambda0   barycenter   ||phi||")
for p in points:
    d = p.diagnostics
    print(f"{p.eps_fraction:8.3f} {d.scaled_ratio:20.6f} {d.barycenter_distance:12.4f} {p.phi_l2:9.4f}")
