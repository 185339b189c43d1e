"""
The value function and its free boundary
========================================

The value function is quadratic near zero, quadratic again far from zero,
and interpolates between the two in a middle band. This script walks through
the three regions at one horizon and checks that the pieces join smoothly.
"""

import numpy as np

from jumpliq import ModelParams
from jumpliq import coefficients as co
from jumpliq import value_surface as vs

# Parameters of the dark-pool example: lambda=2.5, alpha=4, theta=3, gamma=6
p = ModelParams(lam=2.5, gamma=6.0, theta=3.0, alpha=4.0)
T = 1.0

# Below beta(T) no dark-pool order is placed. Above x_bar(T, 0) the position
# is too large to reach beta before the horizon without a fill.
beta = vs.boundary(p, T)
outer = vs.outer_threshold(p, T)
print(f"beta(T)        = {beta:.6f}")
print(f"x_bar(T, 0)    = {outer:.6f}")

# %%
# Sweep the position and print the value, slope and curvature
print(f"\n{'x':>6} {'region':>14} {'w':>10} {'dw/dx':>10} {'d2w/dx2':>10} {'S':>8}")
for x in np.linspace(0.0, 1.5, 16):
    v = vs.value(p, T, x)
    print(f"{x:6.2f} {v.region.value:>14} {v.w:10.5f} {v.dw_dx:10.5f} {v.d2w_dx2:10.5f} {v.s_index:8.4f}")

# %%
# Smooth fit: one-sided slopes agree at both edges of the middle band
h = 1e-6
for name, edge in (("beta", beta), ("x_bar(T,0)", outer)):
    left = (vs.value(p, T, edge).w - vs.value(p, T, edge - h).w) / h
    right = (vs.value(p, T, edge + h).w - vs.value(p, T, edge).w) / h
    print(f"slope gap at {name:<11} {abs(left - right):.2e}")

# %%
# The quadratic envelope: C1(T,0) x^2 < w <= C0(T) x^2
x = 0.8
print(f"\nC1(T,0) x^2 = {co.c1_at_zero(p, T) * x * x:.5f}"
      f"  <  w = {vs.value(p, T, x).w:.5f}"
      f"  <=  C0(T) x^2 = {co.c0(p, T) * x * x:.5f}")

# %%
# Without state cost the middle band collapses and the curvature jumps at beta
rn = p.replace(alpha=0.0)
b = vs.boundary(rn, T)
print(f"\nrisk neutral: beta = {b:.4f}, curvature {vs.value(rn, T, b * 0.999).d2w_dx2:.4f}"
      f" -> {vs.value(rn, T, b * 1.001).d2w_dx2:.4f}")
