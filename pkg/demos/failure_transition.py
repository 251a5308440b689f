"""Failure transition of the non-working-manager variant.

When every site passes its whole load downstream, large beta freezes the
load onto a single column that slams into the bottom plane: the run
"fails".  Sweeping beta shows a sharp order/failure transition whose
threshold beta_50 falls as the system grows.
"""

import numpy as np

from worklattice import SimConfig, Variant, run
from worklattice.measures import estimate_beta50, rescale_curve

betas = np.geomspace(0.003, 3.0, 12)

for Q in (40, 100):
    fracs = []
    for b in betas:
        cfg = SimConfig(d=1, L=30, L_z=Q, Q=Q, beta=float(b), gamma=0.3,
                        variant=Variant.NON_WORKING_MANAGERS,
                        iterations=600, measure_window=200, seed=1)
        s = run(cfg)
        fracs.append(s.failed[-200:].mean())
    bar = "".join("#" if f > 0.5 else "." for f in fracs)
    b50 = estimate_beta50(betas, fracs)
    print(f"Q = L_z = {Q:3d}   [{bar}]   beta_50 = {b50:.3f}")

# overlaying curves for different sizes: rescale the beta axis
xs, ys = rescale_curve(betas, betas * 0, Q=40, L_z=40, a=1.0)
print(f"\nrescaled axis example (a=1): beta*Q spans "
      f"{xs.min():.2f} .. {xs.max():.0f}")
