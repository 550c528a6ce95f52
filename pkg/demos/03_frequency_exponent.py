"""How the driving frequency omega = N^-kappa decides whether the jump is random.

For kappa below 2/3 the field sweeps through the criticality too fast for
noise to matter and the chain essentially always waits; above 2/3 the
noise kicks it over early.  At kappa = 2/3 both outcomes have positive
probability.

    python3 demos/03_frequency_exponent.py
"""
from mfhyst.harness.config import ExperimentConfig
from mfhyst.harness.experiments import run_kappa_sweep

cfg = ExperimentConfig(N=[3000], kappas=[0.5, 2.0 / 3.0, 0.9], replicas=60, seed=3, T=5.0)
for row in run_kappa_sweep(cfg)["rows"]:
    print(f"N={row['N']} kappa={row['kappa']:.3f}: early-jump fraction {row['p']:.2f} +- {row['se']:.2f}")
