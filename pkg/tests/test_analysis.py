import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from floquet_ssh.analysis import (
    LATE_WINDOW,
    bond_tomography,
    domainwall_couplings,
    edge_state_spectrum,
    fit_damped_cosine,
    late_time_average,
    late_time_profile,
    pearson,
    reported_bond,
    sample_shots,
    spreading_rate,
    thermal_mean,
)
from floquet_ssh.coupling import CouplingMatrix, exponential_profile
from floquet_ssh.dynamics import Trajectory
from floquet_ssh.errors import ConfigError, ConvergenceError, LocalizedError
from floquet_ssh.floquet import FloquetDrive, dressed_matrix

PHI = 0.75 * math.pi


def ssh_chain(L, v, w):
    bonds = np.array([v if k % 2 == 0 else w for k in range(L - 1)])
    return CouplingMatrix(np.diag(bonds, 1) + np.diag(bonds, -1))


def reflect(cm):
    return cm.with_values(cm.values[::-1, ::-1])


# ---- spreading ------------------------------------------------------------

def synthetic_front(v_s, L=12, n=2001):
    # p_j rises through 1/L exactly at tau = (j - 1) / v_s
    tau = np.linspace(0, 2, n)
    p = np.empty((n, L))
    p[:, 0] = np.exp(-tau)
    for j in range(2, L + 1):
        p[:, j - 1] = np.exp(tau - (j - 1) / v_s) / L
    return Trajectory(tau, 2 * np.clip(p, 0, 1) - 1)


def test_synthetic_front_velocity():
    fit = spreading_rate(synthetic_front(3.0))
    assert fit.v_s == pytest.approx(3.0, rel=1e-4)
    assert fit.ci_low <= fit.v_s <= fit.ci_high
    assert fit.crossing_times[1] == 0.0
    assert fit.crossing_times[4] == pytest.approx(1.0, abs=1e-4)
    # site 7 would cross at the last sample, later sites never
    assert max(fit.crossing_times) == 6
    assert fit.threshold == pytest.approx(1 / 12)


def test_localized_excitation():
    tau = np.linspace(0, 2, 101)
    m = -np.ones((101, 8))
    m[:, 0] = 1.0
    with pytest.raises(LocalizedError, match="localized"):
        spreading_rate(Trajectory(tau, m))


def test_spread_fit_serialises():
    d = spreading_rate(synthetic_front(2.0)).to_dict()
    assert set(d["crossing_times"]) >= {"1", "2"}


# ---- late time ------------------------------------------------------------

def test_late_time_normalisation():
    tau = np.linspace(0, 2, 37)  # grid not aligned with the window edges
    m = np.ones((37, 3))
    m[:, 1] = tau
    m[:, 2] = -1.0
    tr = Trajectory(tau, m)
    assert late_time_average(tr, 1) == 1.0
    assert late_time_average(tr, 2) == pytest.approx(1.75, abs=1e-14)
    np.testing.assert_allclose(late_time_profile(tr), [1.0, 1.75, -1.0], atol=1e-14)
    with pytest.raises(ConfigError):
        late_time_average(Trajectory(tau[:20], m[:20]), 1)
    assert LATE_WINDOW == (1.5, 2.0)


def test_thermal_mean():
    assert thermal_mean([1.0, -1.0, 0.0, 0.5], 1) == pytest.approx(-0.5 / 3)


# ---- tomography -----------------------------------------------------------

def test_damped_cosine_fixture():
    t = np.linspace(0, 10, 501)
    y = np.exp(-0.1 * t) * np.cos(math.pi * 0.25 * t)
    a, g, rms = fit_damped_cosine(t, y)
    assert a == pytest.approx(0.25, rel=1e-2)
    assert g == pytest.approx(0.1, rel=1e-2)
    assert rms < 1e-10


def test_damped_cosine_unbiased():
    rng = np.random.default_rng(20)
    t = np.linspace(0, 10, 201)
    errs_a, errs_g = [], []
    for _ in range(20):
        a0, g0 = rng.uniform(0.2, 1.0), rng.uniform(0.02, 0.2)
        y = np.exp(-g0 * t) * np.cos(math.pi * a0 * t) + rng.normal(0, 0.02, t.size)
        a, g, _ = fit_damped_cosine(t, y)
        errs_a.append(a / a0 - 1)
        errs_g.append(g / g0 - 1)
    assert abs(np.mean(errs_a)) < 0.01
    assert abs(np.mean(errs_g)) < 0.05
    assert np.max(np.abs(errs_a)) < 0.03


def test_undriven_tomography_recovers_reported_bond(config1):
    drive = FloquetDrive.in_units_of(config1.j_ref, eta_bar=0.0, n_sites=12)
    fit = bond_tomography(config1, drive, 3, 4)
    assert fit.j_fit == pytest.approx(reported_bond(config1.values[2, 3]), rel=1e-6)
    assert abs(fit.gamma_fit) < 1e-6 * config1.j_ref
    assert not fit.suppressed and fit.sites == (3, 4)


def test_tomography_bad_bond(config1):
    drive = FloquetDrive.in_units_of(config1.j_ref, n_sites=12)
    with pytest.raises(ConfigError):
        bond_tomography(config1, drive, 2, 2)
    with pytest.raises(ConfigError):
        bond_tomography(config1, drive, 0, 3)


def test_tomography_residual_guard(config1):
    drive = FloquetDrive.in_units_of(config1.j_ref, eta_bar=1.0, n_sites=12)
    with pytest.raises(ConvergenceError):
        bond_tomography(config1, drive, 1, 2, residual_tol=1e-6)


def test_reported_bond():
    assert reported_bond(-math.pi) == 2.0


# ---- edge states ----------------------------------------------------------

def test_nn_ssh_edge_states():
    topo = edge_state_spectrum(ssh_chain(20, 0.2, 1.0))
    assert topo.n_edge_states == 2 and not topo.gapless
    np.testing.assert_allclose(topo.edge_energies, 0.0, atol=1e-6)
    # amplitude falls by w / v per two-site cell
    np.testing.assert_allclose(topo.localization_lengths, 2 / math.log(5), rtol=0.01)
    assert edge_state_spectrum(ssh_chain(20, 1.0, 0.2)).n_edge_states == 0


def test_uniform_chain_has_no_edge_states():
    assert edge_state_spectrum(ssh_chain(20, 1.0, 1.0)).n_edge_states == 0


@given(st.floats(0.1, 3.0), st.floats(0, 1), st.floats(0, math.pi))
def test_edge_count_reflection_invariant(xi, eb, phi):
    cm = exponential_profile(1.0, xi, 24)
    dm = dressed_matrix(cm, FloquetDrive(18, 6, eb, phi, 24))
    assert edge_state_spectrum(dm).n_edge_states == edge_state_spectrum(reflect(dm)).n_edge_states


def test_edge_spectrum_dict():
    d = edge_state_spectrum(ssh_chain(12, 0.2, 1.0)).to_dict()
    assert d["n_edge_states"] == 2 and len(d["energies"]) == 12


# ---- domain wall ----------------------------------------------------------

def test_domain_wall_modes_are_eigenvectors():
    dm = dressed_matrix(exponential_profile(1.0, 1.0, 12), FloquetDrive(18, 6, 1.0, PHI, 12))
    tab = domainwall_couplings(dm)
    left = dm.values[:6, :6]
    right = dm.values[6:, 6:]
    np.testing.assert_allclose(left @ tab.psi_left, tab.psi_left * tab.eps_left, atol=1e-12)
    np.testing.assert_allclose(right @ tab.psi_right, tab.psi_right * tab.eps_right, atol=1e-12)
    np.testing.assert_allclose(tab.psi_left.T @ tab.psi_left, np.eye(6), atol=1e-12)


def test_domain_wall_coupling_definition():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(8, 8))
    cm = CouplingMatrix(a + a.T)
    tab = domainwall_couplings(cm)
    ref = np.array([[2 * sum(cm.values[i, 4 + j] * tab.psi_left[i, n] * tab.psi_right[j, m]
                             for i in range(4) for j in range(4))
                     for m in range(4)] for n in range(4)])
    np.testing.assert_allclose(tab.g, ref, atol=1e-12)


def test_g_symmetric_for_reflection_symmetric_chain():
    # the bare exponential chain maps onto itself under i -> L + 1 - i
    tab = domainwall_couplings(exponential_profile(1.0, 1.3, 10))
    np.testing.assert_allclose(np.abs(tab.g), np.abs(tab.g.T), atol=1e-12)
    np.testing.assert_allclose(tab.eps_left, tab.eps_right, atol=1e-12)


def test_degenerate_modes_are_reproducible():
    cm = CouplingMatrix(np.zeros((6, 6)), j_ref=1.0)
    tab = domainwall_couplings(cm)
    np.testing.assert_allclose(np.abs(tab.psi_left), np.eye(3), atol=1e-12)
    with pytest.raises(ConfigError):
        domainwall_couplings(exponential_profile(1.0, 1.0, 7))


def test_pearson():
    x = np.linspace(0, 1, 10)
    assert pearson(x, -2 * x + 1) == pytest.approx(-1.0)


# ---- shots ----------------------------------------------------------------

def test_shot_statistics_and_determinism():
    tau = np.linspace(0, 1, 5)
    m = np.tile([0.6, -0.2, 1.0, -1.0], (5, 1))
    tr = Trajectory(tau, m)
    a = sample_shots(tr, 100000, seed=7)
    b = sample_shots(tr, 100000, seed=7)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, sample_shots(tr, 100000, seed=8).counts)
    # every estimate within 5 sigma, certain outcomes exact
    sigma = 2 * np.sqrt(0.5 * (1 + m) * 0.5 * (1 - m) / 100000)
    assert np.all(np.abs(a.m_est - m) <= 5 * sigma + 1e-15)
    assert np.all(a.m_est[:, 2] == 1.0) and np.all(a.m_est[:, 3] == -1.0)
    assert set(a.to_dict()) == {"tau", "shots", "counts", "m_est", "m_err"}
    with pytest.raises(ConfigError):
        sample_shots(tr, 0, seed=1)


def test_tomography_resolves_odd_bond_suppression(config1):
    drive = FloquetDrive.in_units_of(config1.j_ref, eta_bar=1.0, phi=PHI, n_sites=12)
    odd = bond_tomography(config1, drive, 1, 2)
    even = bond_tomography(config1, drive, 2, 3)
    assert abs(odd.j_fit) < 0.05 * even.j_fit


def test_damped_cosine_fixture_with_noise():
    t = np.linspace(0, 10, 501)
    noise = np.random.default_rng(4).normal(0, 1e-4, t.size)
    a, g, _ = fit_damped_cosine(t, np.exp(-0.1 * t) * np.cos(math.pi * 0.25 * t) + noise)
    assert a == pytest.approx(0.25, rel=1e-2)
    assert g == pytest.approx(0.1, rel=1e-2)


def test_mid_gap_pair_is_degenerate():
    L = 50
    dm = dressed_matrix(exponential_profile(1.0, 0.1, L), FloquetDrive(18, 6, 1.0, PHI, L))
    spec = edge_state_spectrum(dm)
    assert spec.n_edge_states == 2
    bandwidth = spec.energies.max() - spec.energies.min()
    assert np.ptp(spec.edge_energies) < 1e-6 * bandwidth
    bare = edge_state_spectrum(exponential_profile(1.0, 0.1, L))
    assert bare.n_edge_states == 0


def test_block_diagonal_chain_has_no_domain_wall_coupling():
    v = exponential_profile(1.0, 1.0, 8).values.copy()
    v[:4, 4:] = v[4:, :4] = 0.0
    tab = domainwall_couplings(CouplingMatrix(v, j_ref=1.0))
    assert np.all(tab.g == 0)


def test_bulk_excitation_thermalises(config3):
    from floquet_ssh.dynamics import Sector, build_xy_hamiltonian, evolve, single_excitation

    L = 22
    drive = FloquetDrive.in_units_of(config3.j_ref, eta_bar=0.8, phi=PHI, n_sites=L)
    ham = build_xy_hamiltonian(dressed_matrix(config3, drive), Sector(L, 1))
    tr = evolve(single_excitation(L, 11), ham, np.linspace(0, 2, 201))
    prof = late_time_profile(tr)
    assert abs(late_time_average(tr, 11) - thermal_mean(prof, 11)) < 0.15


def test_large_shot_count_within_three_sigma():
    tau = np.linspace(0, 1, 5)
    m = np.tile([0.6, -0.2, 0.95, -0.7], (5, 1))
    tab = sample_shots(Trajectory(tau, m), 10**6, seed=3)
    sigma = 2 * np.sqrt(0.5 * (1 + m) * 0.5 * (1 - m) / 10**6)
    assert np.all(np.abs(tab.m_est - m) <= 3 * sigma)
