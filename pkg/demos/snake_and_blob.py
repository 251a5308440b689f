"""The stationary pattern: an ordered "snake" feeding a disordered "blob".

At moderate beta the workload descends a single reinforced path, one site
per level, shedding one unit per level (charge q(z) = Q - z).  Once the
charge is too small to keep its link dominant against decay, the path
frays into a fluctuating blob.  Mean-field puts the handover at
q* = 1 + (2d+1) * gamma / beta.
"""

import numpy as np

from worklattice import SimConfig, run
from worklattice.measures import interface_report

cfg = SimConfig(d=1, L=30, L_z=30, Q=20, beta=0.3, gamma=0.3,
                iterations=2020, measure_window=20, seed=1)
s = run(cfg)
prof = s.profile
rep = interface_report(s)

print("level  charge  width^2  active-sites")
for z in range(cfg.L_z):
    if np.isnan(prof.mean_charge[z]):
        break
    marker = "  <- interface" if z == rep.width_level else ""
    print(f"{z:5d}  {prof.mean_charge[z]:6.1f}  {prof.mean_sq_width[z]:7.2f}"
          f"  {prof.mean_active_count[z]:8.1f}{marker}")

print(f"\nsnake length {rep.snake_length}, interface charge "
      f"{rep.width_charge} (mean-field q* = "
      f"{rep.predicted_charge_meanfield:.1f})")
