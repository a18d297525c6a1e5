"""Observables extracted from trajectories and coupling matrices.

All thresholds used for classification are module constants so that they can
be quoted (and changed) in one place.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import stats
from scipy.optimize import least_squares

from .coupling import CouplingMatrix
from .dynamics import FullHamiltonian, Trajectory, evolve, single_excitation
from .errors import ConfigError, ConvergenceError, LocalizedError
from .floquet import FloquetDrive

__all__ = [
    "SpreadFit",
    "spreading_rate",
    "late_time_average",
    "late_time_profile",
    "thermal_mean",
    "TomographyFit",
    "fit_damped_cosine",
    "bond_tomography",
    "EdgeSpectrum",
    "edge_state_spectrum",
    "DomainWallTable",
    "domainwall_couplings",
    "ShotTable",
    "sample_shots",
    "pearson",
    "reported_bond",
    "EDGE_FRACTION",
    "EDGE_WEIGHT",
    "GAP_FACTOR",
    "LATE_WINDOW",
]

EDGE_FRACTION = 0.10  # outer fraction of sites counted as "edge" on each side
EDGE_WEIGHT = 0.5  # minimum edge weight of an edge-state candidate
GAP_FACTOR = 3.0  # bulk gap must exceed this multiple of the median spacing
LATE_WINDOW = (1.5, 2.0)
MIN_CROSSINGS = 3


# ---------------------------------------------------------------- spreading


@dataclass(frozen=True)
class SpreadFit:
    """Fit of the front ``tau_j = (j - 1) / v_s``.

    ``crossing_times`` maps each site (1-based) whose excitation probability
    rose through the threshold to its first crossing time.
    """

    v_s: float
    ci_low: float
    ci_high: float
    crossing_times: dict
    threshold: float
    slope_stderr: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["crossing_times"] = {str(k): v for k, v in self.crossing_times.items()}
        return d


def _first_upward_crossing(tau, p, thr):
    above = p >= thr
    idx = np.flatnonzero(above[1:] & ~above[:-1])
    if len(idx) == 0:
        return None
    k = idx[0]
    # linear interpolation between the bracketing samples
    frac = (thr - p[k]) / (p[k + 1] - p[k])
    return float(tau[k] + frac * (tau[k + 1] - tau[k]))


def spreading_rate(traj: Trajectory, threshold=None, confidence=0.95) -> SpreadFit:
    """Spreading rate of an excitation launched on site 1.

    Site ``j`` is reached at the first time its excitation probability
    ``(m_j + 1) / 2`` rises through ``threshold`` (default ``1/L``).  Site 1
    holds the excitation at ``tau = 0`` and anchors the front there.  The
    crossing times are fitted by ``tau = s (j - 1)`` (least squares through
    the origin) and ``v_s = 1 / s``.

    Raises
    ------
    LocalizedError
        If fewer than three sites beyond the first ever cross the threshold.
    """
    L = traj.n_sites
    thr = 1.0 / L if threshold is None else float(threshold)
    p = 0.5 * (traj.magnetizations + 1.0)
    crossings = {1: 0.0}
    for j in range(2, L + 1):
        tc = _first_upward_crossing(traj.times, p[:, j - 1], thr)
        if tc is not None:
            crossings[j] = tc
    if len(crossings) - 1 < MIN_CROSSINGS:
        raise LocalizedError("excitation localized, no spreading front")
    x = np.array([j - 1 for j in crossings], dtype=float)
    y = np.array(list(crossings.values()))
    sxx = float(x @ x)
    s = float(x @ y) / sxx
    dof = len(x) - 1
    resid = y - s * x
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    half = float(stats.t.ppf(0.5 + 0.5 * confidence, dof)) * stderr
    if not s > 0:
        raise LocalizedError("front does not advance (non-positive slope)")
    ci_low = 1.0 / (s + half)
    ci_high = 1.0 / (s - half) if s > half else math.inf
    return SpreadFit(1.0 / s, float(ci_low), float(ci_high), crossings, thr, float(stderr))


# --------------------------------------------------------- late-time average


def late_time_average(traj: Trajectory, j, window=LATE_WINDOW) -> float:
    """Window average of ``m_j`` over ``window`` (trapezoidal rule).

    A fully retained excitation (``m_j = 1``) gives exactly 1.
    """
    lo, hi = window
    tau = traj.times
    if not (tau[0] <= lo + 1e-12 and tau[-1] >= hi - 1e-12):
        raise ConfigError(
            f"trajectory covers tau in [{tau[0]:g}, {tau[-1]:g}], window needs [{lo:g}, {hi:g}]"
        )
    m = traj.site(j)
    inside = (tau > lo) & (tau < hi)
    t = np.concatenate([[lo], tau[inside], [hi]])
    y = np.concatenate([[np.interp(lo, tau, m)], m[inside], [np.interp(hi, tau, m)]])
    area = float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))
    return area / (hi - lo)


def late_time_profile(traj: Trajectory, window=LATE_WINDOW) -> np.ndarray:
    """``late_time_average`` for every site."""
    return np.array([late_time_average(traj, j, window) for j in range(1, traj.n_sites + 1)])


def thermal_mean(profile, j) -> float:
    """Mean of ``profile`` over all sites except ``j`` (1-based)."""
    profile = np.asarray(profile, dtype=float)
    return float((profile.sum() - profile[j - 1]) / (len(profile) - 1))


# --------------------------------------------------------------- tomography


@dataclass(frozen=True)
class TomographyFit:
    """Fit of ``exp(-Gamma t) cos(pi J t)`` (``J``, ``Gamma`` in rad/s)."""

    j_fit: float
    gamma_fit: float
    residual_rms: float
    suppressed: bool = False
    sites: tuple = ()
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def fit_damped_cosine(t, signal, j0=None):
    """Levenberg-Marquardt fit of ``exp(-g t) cos(pi a t)``.

    ``t`` may be in any unit; ``a`` and ``g`` come back in its inverse.  The
    initial ``a`` is the dominant FFT frequency of the signal, the initial
    ``g`` is zero.

    Returns
    -------
    a, g, residual_rms : float
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(signal, dtype=float)
    if j0 is None:
        dt = t[1] - t[0]
        spec = np.abs(np.fft.rfft(y - y.mean()))
        freqs = np.fft.rfftfreq(len(y), dt)
        k = int(np.argmax(spec[1:]) + 1) if len(spec) > 1 else 0
        # cos(pi a t) has cyclic frequency a / 2
        j0 = 2.0 * freqs[k] if spec[k] > 1e-9 * len(y) else 0.0

    def resid(p):
        return np.exp(-p[1] * t) * np.cos(math.pi * p[0] * t) - y

    sol = least_squares(resid, [j0, 0.0], method="lm", xtol=1e-14, ftol=1e-14)
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    return float(abs(sol.x[0])), float(sol.x[1]), rms


@dataclass(frozen=True)
class _SiteSubsetDrive:
    """Fields of selected sites of a larger drive (keeps their phases)."""

    drive: FloquetDrive
    sites: tuple

    def _pick(self, arr):
        return arr[[s - 1 for s in self.sites]]

    def fields(self, t):
        return self._pick(self.drive.fields(t))

    def phase_integrals(self, t):
        return self._pick(self.drive.phase_integrals(t))

    def __getattr__(self, name):
        return getattr(self.drive, name)


def _two_site_hamiltonian(cm: CouplingMatrix, drive: FloquetDrive, i, j) -> FullHamiltonian:
    # basis |s> with bit 0 for site i, bit 1 for site j; sx sx flips both bits
    jij = cm.values[i - 1, j - 1]
    h_xx = sp.csr_matrix(np.array([[0, 0, 0, jij], [0, 0, jij, 0], [0, jij, 0, 0], [jij, 0, 0, 0]], dtype=float))
    occ = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    return FullHamiltonian(h_xx, occ - 0.5, _SiteSubsetDrive(drive, (i, j)), cm.j_ref,
                           label=f"two-site[{cm.label}]({i},{j})")


def bond_tomography(cm: CouplingMatrix, drive: FloquetDrive, i, j, tau_max=3.0,
                    n_samples=301, tol=1e-10, residual_tol=0.2, floor=1e-3) -> TomographyFit:
    """Measure one bond the way the experiment does.

    Only ions ``i`` and ``j`` (1-based) are coupled; they start in
    ``|up_i down_j>`` and evolve under the driven Hamiltonian.  The staggered
    magnetisation ``<s_z^i - s_z^j>`` is fitted by ``exp(-Gamma t) cos(pi J t)``.

    A bond whose fitted ``|J|`` is below ``floor * j_ref`` is reported with
    ``suppressed=True``.

    Raises
    ------
    ConvergenceError
        If the RMS fit residual exceeds ``residual_tol``.
    """
    if i == j or not (1 <= i <= cm.size and 1 <= j <= cm.size):
        raise ConfigError(f"invalid bond ({i}, {j}) for L={cm.size}")
    i, j = min(i, j), max(i, j)
    ham = _two_site_hamiltonian(cm, drive, i, j)
    tau = np.linspace(0.0, tau_max, n_samples)
    traj = evolve(single_excitation(2, 1, full=True), ham, tau, tol=tol)
    signal = 0.5 * (traj.site(1) - traj.site(2))
    a, g, rms = fit_damped_cosine(tau, signal)
    if rms > residual_tol:
        raise ConvergenceError(
            f"tomography fit residual {rms:.3e} above {residual_tol:g}", residual=rms
        )
    # tau = j_ref t / pi, so a rate per tau becomes a rate per second
    to_si = cm.j_ref / math.pi
    j_fit, gamma = a * to_si, g * to_si
    return TomographyFit(j_fit, gamma, rms, bool(j_fit < floor * cm.j_ref), (i, j),
                         {"tau_max": tau_max, "n_samples": n_samples, "eta_bar": drive.eta_bar,
                          "phi": drive.phi})


def reported_bond(value) -> float:
    """Tomography bond ``2 |J_d| / pi`` for a flip-flop coefficient ``J_d``
    (rad/s): the two-spin signal is ``cos(2 J_d t) = cos(pi J_rep t)``."""
    return 2.0 * abs(value) / math.pi


# ------------------------------------------------------------- edge states


@dataclass(frozen=True)
class EdgeSpectrum:
    """Spectrum of a coupling matrix with its mid-gap edge states."""

    energies: np.ndarray
    vectors: np.ndarray
    gapless: bool
    gap: tuple  # (lower, upper) bulk energies bracketing the gap, or None
    edge_indices: tuple  # indices into ``energies`` of mid-gap states
    edge_weights: np.ndarray
    localization_lengths: tuple

    @property
    def n_edge_states(self) -> int:
        return len(self.edge_indices)

    @property
    def edge_energies(self) -> np.ndarray:
        return self.energies[list(self.edge_indices)]

    def to_dict(self) -> dict:
        return {
            "energies": [float(e) for e in self.energies],
            "gapless": self.gapless,
            "gap": None if self.gap is None else [float(g) for g in self.gap],
            "n_edge_states": self.n_edge_states,
            "edge_energies": [float(e) for e in self.edge_energies],
            "localization_lengths": [float(x) for x in self.localization_lengths],
        }


def _localization_length(vec, n_edge):
    # decay of the two-site (unit cell) envelope over the half chain next to
    # the dominant edge; hybridised edge pairs carry weight at both ends
    L = len(vec)
    amp = np.abs(vec)
    if np.sum(amp[:n_edge] ** 2) < np.sum(amp[-n_edge:] ** 2):
        amp = amp[::-1]
    n_cells = (L // 2) // 2
    env = np.sqrt(np.sum(amp[: 2 * n_cells].reshape(n_cells, 2) ** 2, axis=1))
    keep = env > 1e-12 * env.max()
    if keep.sum() < 2:
        return 0.0
    centre = 2.0 * np.arange(n_cells) + 0.5
    slope = np.polyfit(centre[keep], np.log(env[keep]), 1)[0]
    return float(-1.0 / slope) if slope < 0 else math.inf


def edge_state_spectrum(dm: CouplingMatrix, edge_fraction=EDGE_FRACTION,
                        edge_weight=EDGE_WEIGHT, gap_factor=GAP_FACTOR) -> EdgeSpectrum:
    """Diagonalise ``dm`` and classify mid-gap edge states.

    Candidates carry more than ``edge_weight`` of their weight on the outer
    ``edge_fraction`` of sites (each side).  The bulk gap is the largest jump
    in the sorted energies of the remaining states; it counts only if it
    exceeds ``gap_factor`` times their median spacing.  Mid-gap states are the
    candidates whose energy lies strictly inside that gap.
    """
    vals = dm.values
    energies, vectors = np.linalg.eigh(vals)
    L = dm.size
    n_edge = max(1, int(round(edge_fraction * L)))
    w = np.sum(vectors[:n_edge] ** 2, axis=0) + np.sum(vectors[-n_edge:] ** 2, axis=0)
    cand = np.flatnonzero(w > edge_weight)
    bulk = np.setdiff1d(np.arange(L), cand)
    gapless, gap, mid = True, None, ()
    if len(bulk) >= 3:
        eb = energies[bulk]
        jumps = np.diff(eb)
        k = int(np.argmax(jumps))
        if jumps[k] >= gap_factor * np.median(jumps) and jumps[k] > 0:
            gapless = False
            gap = (float(eb[k]), float(eb[k + 1]))
            mid = tuple(int(c) for c in cand if gap[0] < energies[c] < gap[1])
    loc = tuple(_localization_length(vectors[:, c], n_edge) for c in mid)
    return EdgeSpectrum(energies, vectors, gapless, gap, mid, w, loc)


# -------------------------------------------------------------- domain walls


@dataclass(frozen=True)
class DomainWallTable:
    """Spin-wave couplings across the middle of the chain.

    ``g[n, m]`` couples left-half mode ``n`` (energy ``eps_left[n]``, vector
    ``psi_left[:, n]``) to right-half mode ``m``.
    """

    eps_left: np.ndarray
    eps_right: np.ndarray
    psi_left: np.ndarray
    psi_right: np.ndarray
    g: np.ndarray

    def boundary_modes(self):
        """Modes with the largest weight on the two sites next to the wall."""
        return int(np.argmax(self.psi_left[-1] ** 2)), int(np.argmax(self.psi_right[0] ** 2))

    def strongest(self):
        n, m = np.unravel_index(int(np.argmax(np.abs(self.g))), self.g.shape)
        return int(n), int(m)

    def to_dict(self) -> dict:
        return {
            "eps_left": self.eps_left.tolist(),
            "eps_right": self.eps_right.tolist(),
            "g": self.g.tolist(),
        }


def _resolve_degenerate(energies, vectors, rtol=1e-9):
    # inside each degenerate cluster, diagonalise the position operator so the
    # basis is reproducible and spatially resolved
    scale = max(np.abs(energies).max(), 1e-300)
    pos = np.arange(vectors.shape[0], dtype=float)
    out = vectors.copy()
    start = 0
    n = len(energies)
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[start] <= rtol * scale:
            stop += 1
        if stop - start > 1:
            block = out[:, start:stop]
            _, rot = np.linalg.eigh(block.T @ (pos[:, None] * block))
            out[:, start:stop] = block @ rot
        start = stop
    # fix signs: largest component positive
    idx = np.argmax(np.abs(out), axis=0)
    out *= np.sign(out[idx, np.arange(n)])
    return out


def domainwall_couplings(dm: CouplingMatrix) -> DomainWallTable:
    """``g_nm = 2 sum_{i in L, j in R} (J_LR)_ij psiL_{n,i} psiR_{m,j}``."""
    L = dm.size
    if L % 2:
        raise ConfigError("domain-wall analysis needs an even number of sites")
    h = L // 2
    v = dm.values
    el, pl = np.linalg.eigh(v[:h, :h])
    er, pr = np.linalg.eigh(v[h:, h:])
    pl, pr = _resolve_degenerate(el, pl), _resolve_degenerate(er, pr)
    g = 2.0 * pl.T @ v[:h, h:] @ pr
    return DomainWallTable(el, er, pl, pr, g)


def pearson(x, y) -> float:
    """Pearson correlation coefficient of two equally sampled series."""
    return float(np.corrcoef(np.asarray(x, float), np.asarray(y, float))[0, 1])


# ------------------------------------------------------------------- shots


@dataclass(frozen=True)
class ShotTable:
    """Binomial samples of every ``(tau, site)`` entry of a trajectory."""

    times: np.ndarray
    shots: int
    counts: np.ndarray  # number of "up" outcomes
    m_est: np.ndarray
    m_err: np.ndarray  # binomial 1-sigma on m

    def to_dict(self) -> dict:
        return {
            "tau": self.times.tolist(),
            "shots": self.shots,
            "counts": self.counts.tolist(),
            "m_est": self.m_est.tolist(),
            "m_err": self.m_err.tolist(),
        }


def sample_shots(traj: Trajectory, shots, seed) -> ShotTable:
    """Emulate ``shots`` projective measurements per point with a seeded PRNG."""
    if int(shots) < 1:
        raise ConfigError("shots must be >= 1")
    rng = np.random.default_rng(seed)
    p = np.clip(0.5 * (traj.magnetizations + 1.0), 0.0, 1.0)
    counts = rng.binomial(int(shots), p)
    p_hat = counts / shots
    m_err = 2.0 * np.sqrt(p_hat * (1.0 - p_hat) / shots)
    return ShotTable(traj.times.copy(), int(shots), counts, 2.0 * p_hat - 1.0, m_err)
