"""Worldline Monte Carlo and exact-diagonalization toolkit for a dissipative
qubit-resonator model.

The library is organized around five pieces:

- ``spectral``: bath spectral densities, the imaginary-time kernel K(tau) and
  certified tables of its double antiderivative;
- ``wlmc``: continuous-time cluster and Metropolis sampling of sigma_z
  worldlines with binned, autocorrelation-aware estimators;
- ``bkt``: the finite-beta crossing analysis locating the critical coupling;
- ``ed``: exact diagonalization of small discretized-bath instances, Lehmann
  susceptibilities, sum rules and relaxation traces;
- ``harness``/``cli``: config-driven sweeps, persistence, reports.
"""

__version__ = "0.1.0"

from .spectral import (BathKind, KernelGrid, KernelTable, ModelParams, SpectralDensity,
                       alpha_eff, asymptotic_kernel, build_kernel_table, eval_spectral_density,
                       kernel_value, load_kernel_table, save_kernel_table, total_ohmic_coupling)
from .stats import MCEstimate
from .wlmc import (ChainState, ObservableSample, RunResult, Schedule, Worldline, cluster_sweep,
                   init_worldline, measure, metropolis_kink_pair, metropolis_sweep, new_chain,
                   run_chain)
from .ed import (DiscretizedBath, FockSpec, RelaxationTrace, SpectrumResult, build_hamiltonian,
                 diagonalize, discretize_bath, fock_convergence, relax_sigma_z,
                 relaxation_identity_residual, static_susceptibility, sum_rule_residual,
                 susceptibility, thermal_observables)
from .bkt import CriticalFit, PsiPoint, find_critical, fit_beta0, g_function, gc_from_alpha_c, psi_value

__all__ = [
    "__version__",
    "BathKind", "KernelGrid", "KernelTable", "ModelParams", "SpectralDensity",
    "alpha_eff", "asymptotic_kernel", "build_kernel_table", "eval_spectral_density",
    "kernel_value", "load_kernel_table", "save_kernel_table", "total_ohmic_coupling",
    "MCEstimate",
    "ChainState", "ObservableSample", "RunResult", "Schedule", "Worldline",
    "cluster_sweep", "init_worldline", "measure", "metropolis_kink_pair",
    "metropolis_sweep", "new_chain", "run_chain",
    "DiscretizedBath", "FockSpec", "RelaxationTrace", "SpectrumResult",
    "build_hamiltonian", "diagonalize", "discretize_bath", "fock_convergence",
    "relax_sigma_z", "relaxation_identity_residual", "static_susceptibility",
    "sum_rule_residual", "susceptibility", "thermal_observables",
    "CriticalFit", "PsiPoint", "find_critical", "fit_beta0", "g_function",
    "gc_from_alpha_c", "psi_value",
]
