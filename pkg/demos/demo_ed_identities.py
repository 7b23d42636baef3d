"""Exact-diagonalization layer: thermal observables, susceptibility, identities.

Diagonalizes the qubit plus the shipped two-mode bath, evaluates Lehmann
sums for the order parameter and the canonical inner products, and verifies
the exact relations the module guarantees:

  * sum rule: M^2 beta equals the weighted susceptibility integral
  * bridge between the sigma_z and sigma_y relaxation functions
  * canonical products: (z, z) = M^2 and (y, y) = 2 <sigma_x> / (beta delta)

Run:  python demos/demo_ed_identities.py
"""

import numpy as np

from rabimc import (DiscretizedBath, FockSpec, diagonalize, relaxation_identity_residual,
                    static_susceptibility, sum_rule_residual, susceptibility,
                    thermal_observables)

modes = ((0.743, 0.301), (1.337, 0.452))
beta = 5.0
spectrum = diagonalize(1.0, DiscretizedBath(modes), FockSpec((10, 8)))

obs = thermal_observables(spectrum, beta)
print(f"two-mode instance, dimension {spectrum.dimension()}, beta = {beta:g}")
print(f"  M^2        = {obs['m2']:.8f}")
print(f"  <sigma_x>  = {obs['sigma_x']:.8f}")
print(f"  <H_Q>      = {obs['hq']:.8f}")
print(f"  delta_eff  = {obs['delta_eff']:.8f}")

print("\nexact identities (residuals):")
print(f"  (z,z) vs M^2                : {abs(obs['mori_zz'] - obs['m2']):.2e}")
print(f"  (y,y) vs 2<sx>/(beta delta) : {abs(obs['mori_yy'] - 2 * obs['sigma_x'] / beta):.2e}")
print(f"  sum rule                    : {sum_rule_residual(spectrum, beta):.2e}")
grid = np.linspace(0.05, 4.0, 200) + 1e-3j
print(f"  relaxation-function bridge  : {relaxation_identity_residual(spectrum, beta, grid):.2e}")
print(f"  eigenbasis completeness     : {spectrum.completeness_residual():.2e}")

chi0 = static_susceptibility(spectrum, beta)
print(f"\nstatic susceptibility chi(0) = {chi0:.6f}  (= -beta * M^2 up to invariant parts)")

out = susceptibility(spectrum, beta, grid)
with open("susceptibility_demo.csv", "w") as fh:
    fh.write("omega,re_chi,im_chi,re_relax,im_relax\n")
    for z, chi, rel in zip(grid, out["chi"], out["relax_z"]):
        fh.write(f"{z.real:.8g},{chi.real:.8g},{chi.imag:.8g},{rel.real:.8g},{rel.imag:.8g}\n")
print("wrote susceptibility_demo.csv (omega, chi, relaxation function)")
