"""Exact state-vector dynamics of the spin chain.

Basis convention: a basis state is the integer ``s = sum_{j up} 2**(j - 1)``
(bit ``j - 1`` set means site ``j`` is up), and every sector lists its states
in ascending integer order.  Spin-1/2 operators are used throughout,
``s+ = |up><down|`` and ``s_z = +-1/2``.

Two Hamiltonians are provided:

* the effective flip-flop model ``H = sum_{i<j} Jd_ij (s+_i s-_j + h.c.)``,
  whose single-excitation block is the coupling matrix itself;
* the driven model ``H(t) = sum_{i<j} J_ij sx_i sx_j + sum_j B_j(t) s_z^j``
  with Pauli ``sx``.  Its flip-flop part is the bare matrix ``J``, so the
  rotating-wave limit of the driven model is the effective model with the
  Bessel-dressed matrix.

Time is reported as ``tau = j_ref t / pi`` where ``j_ref`` is the bare mean
nearest-neighbour coupling carried by the coupling matrix.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply

from .coupling import CouplingMatrix
from .errors import ConfigError, SimulationError
from .floquet import FloquetDrive

__all__ = [
    "Sector",
    "SpinState",
    "Trajectory",
    "XYHamiltonian",
    "FullHamiltonian",
    "build_xy_hamiltonian",
    "build_full_hamiltonian",
    "evolve",
    "magnetization",
    "single_excitation",
    "neel_state",
    "domain_wall_state",
    "bitstring_state",
    "tau_to_time",
    "NNZ_CAP",
    "FULL_DRIVE_MAX_SITES",
]

NNZ_CAP = 2**24
FULL_DRIVE_MAX_SITES = 14
# above this dimension time-independent evolution uses a Krylov-type action
# instead of a dense eigendecomposition
DENSE_LIMIT = 2048
_RK_METHOD = "RK45"


def tau_to_time(tau, j_ref):
    """Physical time (s) of the dimensionless ``tau = j_ref t / pi``."""
    return np.asarray(tau, dtype=float) * math.pi / j_ref


@dataclass(frozen=True)
class Sector:
    """Ordered basis of either the full space (``n_up=None``) or a fixed
    number of up spins."""

    n_sites: int
    n_up: int = None

    def __post_init__(self):
        if self.n_sites < 1:
            raise ConfigError("n_sites must be positive")
        if self.n_sites > 30:
            raise ConfigError("at most 30 sites are supported")
        if self.n_up is not None and not 0 <= self.n_up <= self.n_sites:
            raise ConfigError(f"n_up={self.n_up} outside [0, {self.n_sites}]")

    @property
    def is_full(self) -> bool:
        return self.n_up is None

    @property
    def dim(self) -> int:
        if self.is_full:
            return 2**self.n_sites
        return comb(self.n_sites, self.n_up)

    @property
    def name(self) -> str:
        return "full" if self.is_full else f"fixed_magnetization({self.n_up})"

    @property
    def states(self) -> np.ndarray:
        return _sector_states(self.n_sites, self.n_up)

    def index(self, s) -> np.ndarray:
        """Positions of basis integers ``s`` (which must belong to the sector)."""
        s = np.asarray(s, dtype=np.int64)
        if self.is_full:
            return s
        return np.searchsorted(self.states, s)

    def occupations(self) -> np.ndarray:
        """``(dim, L)`` table of 0/1 site occupations."""
        st = self.states
        return ((st[:, None] >> np.arange(self.n_sites)) & 1).astype(np.int8)


@lru_cache(maxsize=8)
def _sector_states(n_sites, n_up):
    all_states = np.arange(2**n_sites, dtype=np.int64)
    out = all_states if n_up is None else all_states[_popcount(all_states) == n_up]
    out.setflags(write=False)
    return out


def _popcount(x):
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


@dataclass
class SpinState:
    """Normalised amplitude vector over a sector basis."""

    sector: Sector
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.sector.dim,):
            raise ConfigError(f"expected {self.sector.dim} amplitudes, got {a.shape}")
        self.amplitudes = a

    @property
    def n_sites(self) -> int:
        return self.sector.n_sites

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_full(self) -> "SpinState":
        full = Sector(self.n_sites)
        a = np.zeros(full.dim, dtype=complex)
        a[self.sector.states] = self.amplitudes
        return SpinState(full, a)

    @classmethod
    def from_basis_state(cls, n_sites, s, full=False) -> "SpinState":
        n_up = None if full else bin(int(s)).count("1")
        sector = Sector(n_sites, n_up)
        a = np.zeros(sector.dim, dtype=complex)
        a[int(sector.index(int(s)))] = 1.0
        return cls(sector, a)


def single_excitation(n_sites, j, full=False) -> SpinState:
    """Site ``j`` (1-based) up, all others down."""
    if not 1 <= j <= n_sites:
        raise ConfigError(f"site {j} outside 1..{n_sites}")
    return SpinState.from_basis_state(n_sites, 1 << (j - 1), full)


def neel_state(n_sites, first_up=True, full=False) -> SpinState:
    """Alternating up/down, starting with site 1 up unless ``first_up`` is false."""
    start = 0 if first_up else 1
    s = sum(1 << k for k in range(start, n_sites, 2))
    return SpinState.from_basis_state(n_sites, s, full)


def domain_wall_state(n_sites, full=False) -> SpinState:
    """Left half (sites ``1 .. L/2``) up, right half down."""
    if n_sites % 2:
        raise ConfigError("domain wall needs an even number of sites")
    return SpinState.from_basis_state(n_sites, (1 << (n_sites // 2)) - 1, full)


def bitstring_state(bits: str, full=False) -> SpinState:
    """State from a string such as ``"1000"`` (character ``j - 1`` is site ``j``)."""
    if not bits or set(bits) - {"0", "1"}:
        raise ConfigError(f"invalid bitstring {bits!r}")
    s = sum(1 << k for k, c in enumerate(bits) if c == "1")
    return SpinState.from_basis_state(len(bits), s, full)


def magnetization(state: SpinState) -> np.ndarray:
    """Per-site ``m_j = 2 <s_z^j>`` in ``[-1, 1]``."""
    return _magnetization(state.sector.occupations(), state.amplitudes)


def _magnetization(occ, amps):
    p = np.abs(amps) ** 2
    return 2.0 * (p @ occ) - p.sum()


@dataclass(frozen=True)
class XYHamiltonian:
    """Sparse flip-flop Hamiltonian on one sector."""

    matrix: sp.csr_matrix
    sector: Sector
    j_ref: float
    label: str = ""


def _flip_pairs(cm_values, sector, same_spin_too):
    """COO triplets for ``sum_{i<j} c_ij (flip i and j)``.

    With ``same_spin_too`` false only anti-aligned pairs (flip-flop terms)
    contribute; otherwise every pair does (``sx sx`` terms).
    """
    n = sector.n_sites
    states = sector.states
    cols = np.arange(len(states))
    rows_all, cols_all, vals_all = [], [], []
    iu, ju = np.triu_indices(n, 1)
    for i, j in zip(iu, ju):
        c = cm_values[i, j]
        if c == 0.0:
            continue
        bi = (states >> i) & 1
        bj = (states >> j) & 1
        mask = slice(None) if same_spin_too else (bi != bj)
        src = states[mask]
        dst = src ^ ((1 << int(i)) | (1 << int(j)))
        rows_all.append(sector.index(dst))
        cols_all.append(cols[mask])
        vals_all.append(np.full(len(src), c))
    if not rows_all:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    return np.concatenate(rows_all), np.concatenate(cols_all), np.concatenate(vals_all)


def _nnz_estimate(n_pairs, sector, same_spin_too):
    if same_spin_too:
        return n_pairs * sector.dim
    if sector.is_full:
        return n_pairs * sector.dim // 2
    # states with bits i, j anti-aligned, summed over pairs
    n, k = sector.n_sites, sector.n_up
    if n < 2:
        return 0
    return n_pairs * 2 * comb(n - 2, k - 1) if k >= 1 else 0


def build_xy_hamiltonian(dm: CouplingMatrix, sector: Sector, nnz_cap=NNZ_CAP) -> XYHamiltonian:
    """Effective flip-flop Hamiltonian ``sum_{i<j} Jd_ij (s+_i s-_j + h.c.)``.

    Raises
    ------
    ConfigError
        If the sector size does not match or the estimated number of stored
        entries exceeds ``nnz_cap`` (restrict to a smaller sector).
    """
    if sector.n_sites != dm.size:
        raise ConfigError(f"sector has {sector.n_sites} sites, matrix {dm.size}")
    n_pairs = int(np.count_nonzero(np.triu(dm.values, 1)))
    est = _nnz_estimate(n_pairs, sector, False)
    if est > nnz_cap:
        raise ConfigError(
            f"Hamiltonian would store ~{est} entries (cap {nnz_cap}); "
            "restrict the evolution to a fixed-magnetization sector"
        )
    r, c, v = _flip_pairs(dm.values, sector, False)
    h = sp.csr_matrix((v, (r, c)), shape=(sector.dim, sector.dim))
    return XYHamiltonian(h, sector, dm.j_ref, label=f"xy[{dm.label}]")


@dataclass(frozen=True)
class FullHamiltonian:
    """``H(t) = H_XX + sum_j B_j(t) s_z^j`` on the full space."""

    h_xx: sp.csr_matrix
    sz: np.ndarray  # (dim, L) table of s_z eigenvalues
    drive: FloquetDrive
    j_ref: float
    label: str = ""

    @property
    def sector(self) -> Sector:
        return Sector(self.sz.shape[1])

    def diagonal(self, t) -> np.ndarray:
        return self.sz @ self.drive.fields(t)

    def at(self, t) -> sp.csr_matrix:
        """Hermitian matrix at time ``t`` (s)."""
        return (self.h_xx + sp.diags(self.diagonal(t))).tocsr()


def build_full_hamiltonian(cm: CouplingMatrix, drive: FloquetDrive,
                           max_sites=FULL_DRIVE_MAX_SITES) -> FullHamiltonian:
    """Driven Hamiltonian with the bare couplings ``cm``.

    Raises
    ------
    ConfigError
        If ``L > max_sites`` (memory guard, the full space has ``2**L`` states)
        or the drive does not cover the chain.
    """
    if cm.size > max_sites:
        raise ConfigError(
            f"full-drive evolution limited to L <= {max_sites} (got {cm.size}); "
            "use the effective model in a fixed-magnetization sector"
        )
    if drive.n_sites != cm.size:
        raise ConfigError(f"drive covers {drive.n_sites} sites, matrix has {cm.size}")
    sector = Sector(cm.size)
    r, c, v = _flip_pairs(cm.values, sector, True)
    h_xx = sp.csr_matrix((v, (r, c)), shape=(sector.dim, sector.dim))
    sz = sector.occupations().astype(float) - 0.5
    return FullHamiltonian(h_xx, sz, drive, cm.j_ref, label=f"full[{cm.label}]")


@dataclass
class Trajectory:
    """Per-site magnetisations on a grid of ``tau``."""

    times: np.ndarray
    magnetizations: np.ndarray
    metadata: dict = field(default_factory=dict)
    final_state: SpinState = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.magnetizations = np.asarray(self.magnetizations, dtype=float)
        if self.magnetizations.shape[0] != len(self.times):
            raise ConfigError("one magnetisation row per time is required")

    @property
    def n_sites(self) -> int:
        return self.magnetizations.shape[1]

    def site(self, j) -> np.ndarray:
        """``m_j(tau)`` for 1-based ``j``."""
        return self.magnetizations[:, j - 1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau"] + [f"m_{j}" for j in range(1, self.n_sites + 1)])
        for t, row in zip(self.times, self.magnetizations):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, metadata=None) -> "Trajectory":
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))
        return cls(data[:, 0], data[:, 1:], dict(metadata or {}))

    def sidecar(self) -> str:
        return json.dumps(self.metadata, indent=2, sort_keys=True) + "\n"

    def write(self, stem):
        """Write ``<stem>.csv`` and ``<stem>.json``."""
        stem = str(stem)
        with open(stem + ".csv", "w", newline="") as fh:
            fh.write(self.to_csv())
        with open(stem + ".json", "w") as fh:
            fh.write(self.sidecar())

    @classmethod
    def read(cls, stem) -> "Trajectory":
        stem = str(stem)
        with open(stem + ".json") as fh:
            meta = json.load(fh)
        with open(stem + ".csv") as fh:
            return cls.from_csv(fh.read(), meta)


def _check_grid(tau):
    tau = np.asarray(tau, dtype=float)
    if tau.ndim != 1 or len(tau) == 0:
        raise ConfigError("tau grid must be a non-empty 1-d array")
    if len(tau) > 1 and np.any(np.diff(tau) <= 0):
        raise ConfigError("tau grid must be strictly increasing")
    if tau[0] < 0:
        raise ConfigError("tau grid must start at or after 0")
    return tau


def _norm_check(norms, tol):
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > 100 * tol:
        raise SimulationError(f"norm drift {drift:.3e} exceeds 100*tol = {100 * tol:.1e}")
    return drift


def evolve(state: SpinState, ham, tau, tol=1e-9, method="auto") -> Trajectory:
    """Integrate ``i d|psi>/dt = H(t)|psi>`` and record ``m_j`` at ``tau``.

    Parameters
    ----------
    state : SpinState
        Initial state; must live on ``ham.sector`` (or be embeddable in the
        full space for a driven Hamiltonian).
    ham : XYHamiltonian or FullHamiltonian
    tau : array_like
        Strictly increasing output grid in units of ``pi / j_ref``.
    tol : float
        Relative and absolute tolerance of the adaptive integrator.
    method : {"auto", "eig", "krylov", "rk45"}
        Only relevant for time-independent Hamiltonians.  ``"auto"`` picks a
        dense eigendecomposition for small sectors and a Krylov-type action
        otherwise; ``"rk45"`` forces the adaptive integrator.

    Raises
    ------
    SimulationError
        On integrator failure or a norm drift larger than ``100 * tol``.
    """
    tau = _check_grid(tau)
    if abs(state.norm - 1.0) > 1e-9:
        raise ConfigError(f"initial state is not normalised (norm {state.norm:.12f})")
    if isinstance(ham, FullHamiltonian) and not state.sector.is_full:
        state = state.to_full()
    if state.sector != ham.sector:
        raise ConfigError(f"state lives on {state.sector.name}, Hamiltonian on {ham.sector.name}")
    times = tau_to_time(tau, ham.j_ref)
    occ = state.sector.occupations()
    psi0 = state.amplitudes

    if isinstance(ham, FullHamiltonian):
        psis, stats = _evolve_driven(ham, psi0, times, tol)
        label, model = ham.label, "full_drive"
        drive = _drive_meta(ham.drive)
    else:
        if method == "auto":
            method = "eig" if ham.sector.dim <= DENSE_LIMIT else "krylov"
        if method == "eig":
            psis, stats = _evolve_eig(ham.matrix, psi0, times)
        elif method == "krylov":
            psis, stats = _evolve_krylov(ham.matrix, psi0, times)
        elif method == "rk45":
            psis, stats = _evolve_rk(lambda t, y: -1j * (ham.matrix @ y), psi0, times, tol)
        else:
            raise ConfigError(f"unknown method {method!r}")
        label, model, drive = ham.label, "interacting_spin", None

    norms = np.linalg.norm(psis, axis=1)
    drift = _norm_check(norms, tol)
    mags = np.array([_magnetization(occ, p) for p in psis])
    meta = {
        "model": model,
        "hamiltonian": label,
        "sector": state.sector.name,
        "n_sites": state.n_sites,
        "j_ref_rad_s": float(ham.j_ref),
        "tol": tol,
        "max_norm_drift": drift,
        "drive": drive,
        "integrator": stats,
    }
    if not isinstance(ham, FullHamiltonian):
        e = [np.vdot(p, ham.matrix @ p).real for p in psis]
        scale = max(np.abs(ham.matrix).max() if ham.matrix.nnz else 0.0, 1e-300)
        meta["energy_drift"] = float((max(e) - min(e)) / scale)
    return Trajectory(tau, mags, meta, SpinState(state.sector, psis[-1]))


def _drive_meta(drive: FloquetDrive):
    return {
        "b0_rad_s": drive.b0,
        "omega_rad_s": drive.omega,
        "eta_bar": drive.eta_bar,
        "phi": drive.phi,
    }


def _evolve_eig(h, psi0, times):
    evals, evecs = np.linalg.eigh(h.toarray())
    c0 = evecs.T @ psi0
    phases = np.exp(-1j * np.outer(times, evals))
    psis = (phases * c0) @ evecs.T
    return psis, {"method": "eig"}


def _evolve_krylov(h, psi0, times):
    psis = np.empty((len(times), len(psi0)), dtype=complex)
    hc = (-1j * h).tocsr()
    psi, t_prev = psi0.astype(complex), 0.0
    for k, t in enumerate(times):
        if t != t_prev:
            psi = expm_multiply(hc * (t - t_prev), psi)
        psis[k] = psi
        t_prev = t
    return psis, {"method": "krylov"}


def _evolve_rk(rhs, psi0, times, tol, t0=0.0):
    if times[-1] == t0:
        return np.array([psi0] * len(times)), {"method": _RK_METHOD, "nfev": 0}
    # solve_ivp measures the local error as an RMS over components; dividing
    # atol by sqrt(dim) turns ``tol`` into a bound on the Euclidean norm of the
    # error vector, which is what unitarity is judged by
    atol = tol / math.sqrt(len(psi0))
    sol = solve_ivp(rhs, (t0, times[-1]), psi0.astype(complex), method=_RK_METHOD,
                    t_eval=times, rtol=tol, atol=atol)
    if sol.status != 0:
        raise SimulationError(f"integrator failed: {sol.message}")
    return sol.y.T, {"method": _RK_METHOD, "nfev": int(sol.nfev)}


def _evolve_driven(ham: FullHamiltonian, psi0, times, tol):
    # Integrate in the interaction frame of the diagonal field term, whose
    # propagator is known in closed form.  This removes the fast global
    # precession at B0 without approximating anything.
    sz, drive, hxx = ham.sz, ham.drive, ham.h_xx

    def frame(t):
        return np.exp(-1j * (sz @ drive.phase_integrals(t)))

    def rhs(t, y):
        d = frame(t)
        return -1j * d.conj() * (hxx @ (d * y))

    psis_i, stats = _evolve_rk(rhs, psi0, times, tol)
    psis = np.array([frame(t) * p for t, p in zip(times, psis_i)])
    stats["frame"] = "interaction(H_Z)"
    return psis, stats
