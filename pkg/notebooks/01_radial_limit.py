"""The radial limit problem in the plane.

Run with ``python notebooks/01_radial_limit.py``.
"""

from __future__ import annotations

import numpy as np

from bbspectra import radial
from bbspectra.acceptance import bessel_limit_eigenvalue

# The limit eigenpair for a unit-area favorable disk, equal weights inside and out.
profile = radial.solve_limit_eigen(2, 1.0, 1.0)
oracle = bessel_limit_eigenvalue()
print(f"lambda0 = {profile.lambda0:.13f}  (Bessel matching {oracle:.13f})")
print(f"r0 = {profile.r0:.6f}, decay length = {profile.decay_length:.4f}")

# Outside the disk w decays like exp(-sqrt(lambda0 munder) r) up to a power of r.
print(f"fitted log-slope {radial.decay_rate(profile):.5f} vs {-1 / profile.decay_length:.5f}")

# On a finite ball B_R the eigenvalue sits above lambda0 by an exponentially small gap.
for lengths in (2, 4, 6, 8):
    R = profile.r0 + lengths * profile.decay_length
    lam = radial.lambda_finite_ball(2, 1.0, 1.0, R)
    print(f"R = r0 + {lengths} decay lengths: gap = {lam - profile.lambda0:.3e}")

samples = radial.gap_samples(2, 1.0, 1.0, profile.lambda0)
fit = radial.fit_gap_rate(samples, profile.lambda0)
print(f"gap rate {fit.slope:.4f}, expected about {-2 / profile.decay_length:.4f}")
print("profile sample:", np.round(profile.w[:: max(1, len(profile.w) // 6)], 4))
