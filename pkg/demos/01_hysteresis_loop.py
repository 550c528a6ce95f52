"""One spin system driven by a slow cosine field h(t) = -h_c cos(omega t).

The branch the chain sits on disappears at every multiple of half a period.
At each such criticality the chain either jumps to the other branch or
rides through the bottleneck and recovers as the field turns back.  Which
one happens is random, and the printout shows it per criticality.

    python3 demos/01_hysteresis_loop.py
"""
import math

from mfhyst import chain, make_params
from mfhyst.model import branch_values

P = make_params(2.0)
print(f"beta=2: m_c={P.m_c:.4f}, h_c={P.h_c:.4f}")

for N in (300, 3000):
    field = chain.FieldSpec.oscillating(P, N)
    half = math.pi / field.omega
    t0 = -half / 2
    m0 = float(chain.k_to_m(N, chain.snap(N, float(branch_values(P, field(t0), "plus")[0]))))
    traj = chain.simulate(P, N, t0, t0 + 4 * half, m0, seed=1, field=field)
    line = []
    for j in range(4):
        before, after = traj.m_at(j * half - half / 2), traj.m_at(j * half + half / 2)
        exposed = 1 if j % 2 == 0 else -1
        if before * exposed > 0:
            line.append("jump" if before * after < 0 else "stay")
        else:
            line.append("safe")
    print(f"N={N}: omega={field.omega:.3e}, {traj.n_jumps} spin flips; criticalities: {', '.join(line)}")
