"""
Proceeds, impact and adverse selection
======================================

In the market version a seller's dark-pool fill coincides with a favourable
price jump of size Gamma that the filled shares miss. The expected shortfall
against the initial price equals expected impact plus adverse-selection cost,
because the price-noise terms average out. Adding the risk penalty recovers
the value function.
"""

from jumpliq import control as ctl
from jumpliq import market as mk
from jumpliq import simulator as sm
from jumpliq import value_surface as vs

m = mk.MarketParams(Gamma=2.0, sigma=1.0, alpha_tilde=4.0, lam=2.5, theta=3.0, p0=100.0)
p = mk.to_model_params(m)
print(f"abstract parameters: {p}")

cfg = sm.SimConfig(horizon=1.0, initial_state=1.2, dt=1e-2, n_paths=20_000, seed=3)

# %%
# Optimal strategy: identity and value check
batch = mk.simulate_market(m, cfg)
rep = mk.identity_report(batch, value=vs.value(p, 1.0, 1.2).w)
print(mk.report_json(rep))

# %%
# The identity holds for any strategy, not only the optimal one
for name, strat in (("linear", ctl.linear_strategy(1.2, 1.0)), ("ignore adverse selection", ctl.nodp_strategy(p))):
    r = mk.identity_report(mk.simulate_market(m, cfg, strategy=strat))
    print(f"{name:<26} shortfall {r['mean_shortfall']:.4f}  impact+adverse {r['mean_impact_plus_adverse']:.4f}"
          f"  holds {r['identity_holds']}")
