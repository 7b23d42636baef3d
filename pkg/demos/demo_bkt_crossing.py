"""The crossing construction that locates the transition, on synthetic data.

The scaled order parameter psi = alpha_eff * M^2 approaches its universal
value 1 from above at the critical coupling, with finite-beta form
psi = 1 + 1/(2 ln(beta/beta0)).  The function G = 1/(psi - 1) - 2 ln(beta)
is beta-independent exactly at the critical coupling, so the zero crossing of
its slope against ln(beta) pins alpha_c.

This demo generates data from a known critical family, adds Monte Carlo
noise, and shows the fit recovering the injected values.  Real-data usage is
identical but starts from a sweep results table:

    rabimc sweep   --config demos/configs/ohmic_scan.cfg --out scan
    rabimc bkt-fit scan/results.csv --out fit

Run:  python demos/demo_bkt_crossing.py
"""

import math

import numpy as np

from rabimc import find_critical, fit_beta0
from rabimc.bkt import PsiPoint
from rabimc.stats import MCEstimate

ALPHA_C, BETA0 = 1.35, 0.5
rng = np.random.default_rng(12)

points = []
for alpha in (1.15, 1.25, 1.35, 1.45, 1.55):
    for beta in (25.0, 50.0, 100.0, 200.0, 400.0):
        # slopes fall with coupling: positive below the transition, negative above
        g_val = -2 * math.log(BETA0) - 1.5 * (alpha - ALPHA_C) * math.log(beta)
        psi = 1.0 + 1.0 / (g_val + 2 * math.log(beta))
        m2 = min(psi / alpha * (1 + rng.normal(0.0, 0.001)), 1.0)
        points.append(PsiPoint(g=alpha, alpha_eff=alpha, beta=beta,
                               m2=MCEstimate(m2, 0.001 * m2, 1.0, 10_000, 0)))

fit = find_critical(points, n_boot=400, seed=3)
print(f"injected:  alpha_c = {ALPHA_C}, beta0 = {BETA0}")
print(f"recovered: alpha_c = {fit.alpha_c:.4f} ± {fit.alpha_c_err:.4f}, "
      f"beta0 = {fit.beta0:.4f} ± {fit.beta0_err:.4f}")
print(f"universal-jump diagnostic psi_c = {fit.psi_c:.4f} ± {fit.psi_c_err:.4f} (expect 1)")

print("\nper-coupling G-vs-ln(beta) slopes (zero crossing = critical point):")
for alpha, (slope, err) in sorted(fit.slopes.items()):
    print(f"  alpha = {alpha:.2f}: slope = {slope:+8.4f} ± {err:.4f}")

betas = np.array([25.0, 50.0, 100.0, 200.0, 400.0])
psis = 1.0 + 1.0 / (2 * np.log(betas / BETA0))
out = fit_beta0(betas, psis, np.full_like(betas, 1e-9))
print(f"\none-parameter critical-form fit on exact data: beta0 = {out['beta0']:.6f} "
      f"(chi2/dof = {out['chi2_reduced']:.2e})")
