"""
How adverse selection changes the optimal trade
===============================================

Raising the adverse-selection jump Gamma makes the dark pool less
attractive. The value rises, the continuous trading rate rises and the
dark-pool order shrinks. Once Gamma exceeds 2|x|C0(T) the position sits in
the no-order region and nothing changes any more.
"""

import numpy as np

from jumpliq import ModelParams, cli
from jumpliq import coefficients as co

p = ModelParams(lam=2.5, gamma=6.0, theta=3.0, alpha=4.0)
T, x = 1.0, 0.5
threshold = 2 * x * co.c0(p, T)
print(f"threshold 2|x|C0(T) = {threshold:.4f}\n")

grid = np.linspace(0.1, 1.5 * threshold, 12)
rows = cli.gamma_sweep_rows(p, T, x, grid)
print(f"{'Gamma':>7} {'w':>9} {'xi':>9} {'eta':>9} {'beta':>8}")
for G, w, xi, eta, beta, _ in rows:
    print(f"{G:7.3f} {w:9.5f} {xi:9.5f} {eta:9.5f} {beta:8.4f}")

print()
print(cli.gamma_monotonicity(p, T, x, rows))

# %%
# As Gamma goes to zero the value approaches the no-adverse-selection benchmark C(T) x^2
tiny = cli.gamma_sweep_rows(p, T, x, [1e-8])[0]
print(f"\nGamma=1e-8: w = {tiny[1]:.8f}, C(T) x^2 = {co.c_nodp(p, T) * x * x:.8f}")
