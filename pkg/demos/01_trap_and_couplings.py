"""
Trap modes and phonon-mediated couplings
========================================

Solves the 15- and 27-ion crystals, prints their radial mode ladders and
the exponential fits of the three coupling configurations.

    python demos/01_trap_and_couplings.py
"""

import numpy as np

from floquet_ssh.configs import PUBLISHED_CONFIGS, TRAP_15, TRAP_27, published_coupling
from floquet_ssh.constants import khz, mhz
from floquet_ssh.coupling import band_profile, fit_exponential_decay
from floquet_ssh.trap import solve_trap

for trap in (TRAP_15, TRAP_27):
    spec = solve_trap(trap)
    x = spec.positions * 1e6
    print(f"N={trap.n_ions}: extent {x[-1] - x[0]:.1f} um, "
          f"min spacing {np.diff(x).min():.2f} um")
    print("  radial modes (MHz):", np.round(spec.frequencies / mhz(1), 3))

print()
for name, cfg in PUBLISHED_CONFIGS.items():
    cm = published_coupling(name)
    amp, kappa = fit_exponential_decay(cm)
    prof = band_profile(cm)[1:7] / cm.mean_nn
    print(f"{name}: J = {cm.mean_nn / khz(1):.3f} kHz, fit {amp:.2f} exp(-{kappa:.3f} d) "
          f"(published {cfg.fit_amplitude} exp(-{cfg.fit_decay} d))")
    print("  J_bar(d)/J, d=1..6:", np.round(prof, 3))
