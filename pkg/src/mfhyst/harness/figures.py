"""Two-column plot data: hysteresis loop, free-energy profiles, adiabatic tracking."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .. import chain as C
from ..model import ModelParams, branch_values, free_energy
from ..ode import macroscopic_flow
from .io import write_columns


def hysteresis_loop(params: ModelParams, N: int, seed: int, periods: int = 1,
                    kappa: float = 2.0 / 3.0, points: int = 4000):
    """(h(t), m(t)) sampled on a uniform time grid for one chain realization."""
    field = C.FieldSpec.oscillating(params, N, kappa)
    t0 = -0.5 * math.pi / field.omega
    t1 = t0 + 2.0 * math.pi * periods / field.omega
    k0 = C.snap(N, float(branch_values(params, 0.0, "plus")[0]))
    stride = max(1, int(N * (t1 - t0) / (20 * points)))
    traj = C.simulate(params, N, t0, t1, (2.0 * k0 - N) / N, seed, field=field, stride=stride,
                      key=(N,))
    tt = np.linspace(t0, t1, points)
    return field(tt), traj.m_at(tt)


def free_energy_profiles(params: ModelParams, hs=None, n: int = 801):
    hs = [0.0, -0.5 * params.h_c, -params.h_c] if hs is None else hs
    m = np.linspace(-0.999, 0.999, n)
    return m, {f"phi_h={h:+.4f}": free_energy(params, h, m) for h in hs}


def adiabatic_tracking(params: ModelParams, omega: float, points: int = 2000):
    """Mean-field flow under h(omega t) = -h_c cos(omega t) against the upper branch."""
    field = C.FieldSpec(0.0, -params.h_c, omega)
    t0 = -0.5 * math.pi / omega
    t1 = 0.0
    m0 = float(branch_values(params, field(t0), "plus")[0])
    sol = macroscopic_flow(params, t0, m0, t1, field=field)
    tt = np.linspace(t0, t1, points)
    return tt * omega, sol(tt), branch_values(params, field(tt), "plus")


def emit_all(params: ModelParams, out_dir, seed: int, N: int = 1000, header=None) -> list[Path]:
    out = Path(out_dir)
    paths = []
    h, m = hysteresis_loop(params, N, seed)
    paths.append(write_columns(out / "fig_hysteresis_loop.dat", {"h": h, "m": m}, header))
    mg, prof = free_energy_profiles(params)
    for i, (name, phi) in enumerate(prof.items()):
        paths.append(write_columns(out / f"fig_free_energy_{i}.dat", {"m": mg, name: phi}, header))
    for omega in (1e-2, 1e-3):
        s, mbar, mplus = adiabatic_tracking(params, omega)
        paths.append(write_columns(out / f"fig_adiabatic_omega{omega:g}.dat",
                                   {"omega_t": s, "m": mbar, "m_plus": mplus}, header))
    return paths
