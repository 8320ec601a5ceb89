"""
Geometric phase from two adiabatic passages
===========================================

Two chirped pulses carry a two-level system from |1> to |2> and back.
The population returns, and the sign of the second pulse decides whether
the amplitude comes back with phase pi or 0.
"""

# %%
import math
import warnings

import numpy as np

from rydberg_arp.pulses import AdiabaticityViolated, PassageParams, build_drive, double_passage, evolve_adiabatic, evolve_exact

# %%
# Gaussian pulses with a linear chirp, and flat pulses with a quintic chirp.
shapes = {
    "gaussian_linear_chirp": PassageParams.from_mhz(2.0, -10.0, 0.45, 1.35, width=0.12),
    "rectangular_nonlinear": PassageParams.from_mhz(2.1, -10.0, 0.45, 1.35, s2_mhz=-2600.0),
}
for shape, params in shapes.items():
    for flip in (False, True):
        res = double_passage(shape, params, flip)
        print(f"{shape:22s} flip={flip!s:5s}  1-|c1|^2={res.population_error:.2e}  phase={res.phase:+.4f}")

# %%
# A faster, stronger pair of Gaussian pulses is well inside the adiabatic
# regime, so the dressed-state picture follows the exact amplitude.
fast = PassageParams.from_mhz(20.0, -50.0, 0.5, 1.5, width=0.12)
drive = build_drive("gaussian_linear_chirp", fast)
exact = evolve_exact(drive, dt=1e-3)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", AdiabaticityViolated)
    dressed = evolve_adiabatic(drive, dt=1e-3)

for t in (0.25, 0.5, 1.0, 1.5, 1.75):
    i = int(np.argmin(np.abs(exact.times - t)))
    print(f"t={t:4.2f} us  P1 exact={exact.pop1[i]:.4f}  adiabatic={dressed.pop1[i]:.4f}")

# %%
# The final amplitude of |1> is -1 for identical pulses.
print("c1(end) exact:", np.round(exact.final[0], 4), " adiabatic:", np.round(dressed.bare[-1, 0], 4))
print("pi =", round(math.pi, 4))
