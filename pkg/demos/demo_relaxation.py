"""Relaxation traces from a small preparation field, across coupling strengths.

For each g the resonator-mediated bath is discretized to a few modes, the
ground state of H + h sigma_z is prepared, and sigma_z(t) is followed under H
by exact eigendecomposition.  At g = 0 the trace is cos(delta t); weak
coupling shows beating between the qubit and resonator lines.

Run:  python demos/demo_relaxation.py
"""

import numpy as np

from rabimc import (DiscretizedBath, FockSpec, ModelParams, SpectralDensity, discretize_bath,
                    relax_sigma_z)

t_grid = np.linspace(0.0, 30.0, 1201)

for g in (0.0, 0.1, 0.28):
    if g == 0.0:
        bath = DiscretizedBath(())
        fock = FockSpec(())
    else:
        params = ModelParams(delta=1.0, omega0=0.75, g=g, alpha_cav=0.05,
                             omega_c=10.0, beta=5.0)
        bath = discretize_bath(SpectralDensity.structured(params), 3)
        fock = FockSpec((8,) * bath.n_modes())
    trace = relax_sigma_z(1.0, bath, fock, h=1e-3, t_grid=t_grid)
    name = f"relax_demo_g{g:g}.csv"
    with open(name, "w") as fh:
        fh.write("t,sigma_z\n")
        for t, v in zip(trace.times, trace.values):
            fh.write(f"{t:.8g},{v:.8g}\n")
    print(f"g = {g:4.2f}: S(0) = {trace.values[0]:.1f}, "
          f"linearity residual {trace.linearity_residual:.2e}"
          f"{' (nonlinear!)' if trace.nonlinear else ''}  -> {name}")

print("\ntraces are plot-ready CSV; at g = 0 compare against cos(t).")
