"""
Optimal liquidation paths with and without a dark-pool fill
===========================================================

Three scenarios on a unit horizon. A small position starts in the middle
band and drifts into the no-order region at a predictable time. A large
position waits for a fill; when one arrives at t = 0.4 the order takes the
position straight down to the boundary. Without state cost the path is
concave and never meets the boundary from above.
"""

import numpy as np

from jumpliq import ModelParams
from jumpliq import control as ctl
from jumpliq import value_surface as vs

p = ModelParams(lam=2.5, gamma=6.0, theta=3.0, alpha=4.0)
T, dt = 1.0, 1e-3

# %%
# Small position: boundary crossing time from the interpolation index
small = ctl.deterministic_trajectory(p, T, 0.3, dt)
print(f"x=0.3: crossing time from the path  {ctl.crossing_time(p, small, T):.4f}")
print(f"x=0.3: crossing time from g(T, x)   {T - vs.g_index(p, T, 0.3):.4f}")

# %%
# Large position with one fill at t = 0.4
big = ctl.deterministic_trajectory(p, T, 1.2, dt, force_jump=0.4)
i = np.nonzero(big.times == 0.4)[0]
print(f"\nx=1.2: position before the fill {big.states[i[0]]:.4f}, after {big.states[i[1]]:.4f}")
print(f"       boundary at t=0.4          {vs.boundary(p, T - 0.4):.4f}")
print(f"       dark-pool order            {big.eta_applied[0]:.4f}")
print(f"       running cost on this path  {big.running_cost:.4f}  (value {vs.value(p, T, 1.2).w:.4f})")

# %%
# A printed sample of the path against the boundary
print(f"\n{'t':>5} {'x*':>8} {'beta':>8}")
for t in np.arange(0.0, 1.0, 0.1):
    k = int(np.searchsorted(big.times, t + 1e-12, "right")) - 1
    print(f"{t:5.1f} {big.states[k]:8.4f} {vs.boundary(p, T - big.times[k]):8.4f}")

# %%
# Risk neutral: concave path above a linear boundary
rn = p.replace(alpha=0.0)
path = ctl.deterministic_trajectory(rn, T, 0.6, dt)
above = path.states > vs.boundary(rn, T - path.times)
print(f"\nrisk neutral x=0.6: above the boundary until t={path.times[above][-1]:.3f},"
      f" max second difference {np.diff(path.states[above], 2).max():.2e}")

# %%
# The a-priori bound on the optimal position
for t in (0.25, 0.5, 0.75):
    print(f"bound at t={t:.2f}: {ctl.trajectory_bound(p, T, 1.2, t):.5f}")
