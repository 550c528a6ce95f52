"""Inside the critical window the chain reduces to a Riccati equation with noise.

Without noise the separatrix y* splits starting values into tracking and
blowup.  With noise a path started near the tracking solution at -T ends
at +T or explodes; the explosion frequency estimates p-.  The chain at
N=10^4 run only through the window gives a comparable estimate.

    python3 demos/02_critical_window.py
"""
import math

from mfhyst import make_params, ode, sde
from mfhyst.harness.experiments import chain_window_estimate

P = make_params(2.0)
cc = ode.critical_curve()
print(f"separatrix at 0: y*(0) = {cc.y0:.10f}")
for d in (-0.01, 0.01):
    s = ode.solve_riccati(0.0, cc.y0 + d, 10.0)
    print(f"  start y*(0){d:+}: " + (f"blowup at t={s.blowup_time:.3f}" if s.certified_blowup
                                      else f"tracks, y(10)-10 = {s(10.0) - 10:.4f}"))

cfg = sde.SdeConfig.from_params(P, T=5.0)
est = sde.estimate_p(cfg, 2000, seed=7)
print(f"limit SDE (noise {cfg.xi:.4f}): p- = {est.p_minus:.3f} +- {est.se_minus:.3f}, "
      f"undecided {est.undecided:.3f}")

cw = chain_window_estimate(P, 10**4, 5.0, 0.2, 0.2, 300, seed=7)
z = abs(cw["p_minus"] - est.p_minus) / math.hypot(cw["se_minus"], est.se_minus)
print(f"chain N=1e4 window: p- = {cw['p_minus']:.3f} +- {cw['se_minus']:.3f} (z = {z:.2f})")
