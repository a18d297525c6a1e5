"""
Zak phase, edge modes and domain walls
======================================

    python demos/04_topology_and_domain_walls.py
"""

import math

import numpy as np

from floquet_ssh.analysis import domainwall_couplings, edge_state_spectrum, pearson
from floquet_ssh.configs import published_coupling
from floquet_ssh.coupling import band_profile, exponential_profile
from floquet_ssh.dynamics import build_xy_hamiltonian, domain_wall_state, evolve
from floquet_ssh.floquet import FloquetDrive, dressed_matrix, zak_sweep

cm = published_coupling("config1")
phis = np.arange(8) * math.pi / 8
print("Zak phase of config1 at eta_bar = 1 over phi:")
for phi, _, z, gap in zak_sweep(band_profile(cm) / cm.j_ref, phis, [1.0]):
    zs = "gapless" if math.isnan(z) else f"{z / math.pi:+.3f} pi"
    print(f"  phi = {phi / math.pi:.3f} pi: {zs}, gap {gap:.3f} J")

print("\nMid-gap states of a 50-site exponential chain at eta_bar = 1, phi = 3pi/4:")
for xi in (0.1, 0.5, 1.0, 5.0):
    dm = dressed_matrix(exponential_profile(1.0, xi, 50),
                        FloquetDrive(18, 6, 1.0, 0.75 * math.pi, 50))
    spec = edge_state_spectrum(dm)
    print(f"  xi = {xi}: {spec.n_edge_states} edge states, "
          f"localization lengths {np.round(spec.localization_lengths, 2)}")

print("\nDomain wall on config1:")
tau = np.linspace(0, 2, 401)
for eta_bar in (0.0, 1.0):
    dm = dressed_matrix(cm, FloquetDrive.in_units_of(cm.j_ref, eta_bar=eta_bar))
    tab = domainwall_couplings(dm)
    st = domain_wall_state(12)
    tr = evolve(st, build_xy_hamiltonian(dm, st.sector), tau)
    m = tr.magnetizations
    imb = 0.5 * (m[:, :6].mean(axis=1) - m[:, 6:].mean(axis=1))[tau >= 1.5].mean()
    print(f"  eta_bar={eta_bar}: max |g| at {tab.strongest()}, boundary modes "
          f"{tab.boundary_modes()}, corr(m6, m7) = {pearson(tr.site(6), tr.site(7)):+.3f}, "
          f"late imbalance = {imb:.3f}")
