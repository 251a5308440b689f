"""Watch the total link preference (the "flow") equilibrate.

A fresh lattice has no preferences: every unit wanders randomly and the
flow grows as transfers reinforce links.  Reinforcement (+1 per moved
unit) and decay (x(1-gamma) per iteration) balance at flow = mean(T)/gamma,
where T is the number of units moved per iteration.
"""

import numpy as np

from worklattice import SimConfig, run

cfg = SimConfig(d=1, L=30, L_z=60, Q=60, beta=0.1, gamma=0.3,
                iterations=4000, seed=1)
print(f"running {cfg.iterations} iterations at d={cfg.d}, beta={cfg.beta}, "
      f"gamma={cfg.gamma} ...")
s = run(cfg)

for t in (0, 10, 100, 1000, cfg.iterations - 1):
    print(f"  iter {t:>5}: flow {s.flow[t]:9.1f}   depth {s.depth[t]:3d}   "
          f"active sites {s.n_active[t]:3d}")

half = s.flow[cfg.iterations // 2:]
t_bar = s.units_transferred[cfg.iterations // 2:].mean()
print(f"\nstationary flow (pre-decay)  : {half.mean() / (1 - cfg.gamma):9.1f}")
print(f"predicted   mean(T)/gamma    : {t_bar / cfg.gamma:9.1f}")
slope = np.polyfit(np.arange(half.size), half, 1)[0]
print(f"residual trend per 1000 iters: {abs(slope) * 1000 / half.mean():.2%}")
