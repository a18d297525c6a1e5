"""Jordan-Wigner fermions and the free-fermion (string-free) baseline.

Under ``c_j = (prod_{k<j} (1 - 2 n_k)) s-_j`` the flip-flop model becomes

    H = sum_{i != j} c_i^dag Jd_ij P_ij c_j,   P_ij = prod_{i<k<j} (1 - 2 n_k),

so nearest-neighbour bonds stay quadratic while longer bonds pick up parity
strings, i.e. fermion-fermion interactions.  Dropping the strings gives the
free model ``h = Jd`` whose one-body correlations evolve in closed form.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coupling import CouplingMatrix
from .dynamics import Sector, Trajectory, tau_to_time
from .errors import ConfigError, SimulationError

__all__ = [
    "CorrelationMatrix",
    "free_propagator",
    "evolve_correlations",
    "jw_string_weight",
    "fermion_hamiltonian",
]


@dataclass(frozen=True)
class CorrelationMatrix:
    """One-body correlations ``C_ij = <c_i^dag c_j>``."""

    values: np.ndarray

    def __post_init__(self):
        c = np.array(self.values, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ConfigError("correlation matrix must be square")
        if np.abs(c - c.conj().T).max() > 1e-12:
            raise ConfigError("correlation matrix is not hermitian")
        ev = np.linalg.eigvalsh(c)
        if ev.min() < -1e-9 or ev.max() > 1 + 1e-9:
            raise ConfigError("correlation matrix eigenvalues must lie in [0, 1]")
        c.setflags(write=False)
        object.__setattr__(self, "values", c)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def occupations(self) -> np.ndarray:
        return self.values.diagonal().real.copy()

    @property
    def n_particles(self) -> float:
        return float(np.trace(self.values).real)

    @classmethod
    def product_state(cls, occupied) -> "CorrelationMatrix":
        """Diagonal correlations of a basis state; ``occupied`` is a 0/1 sequence
        (entry ``j - 1`` for site ``j``) or a bitstring such as ``"1010"``."""
        occ = np.array([int(c) for c in occupied], dtype=float)
        if np.any((occ != 0) & (occ != 1)):
            raise ConfigError("occupations must be 0 or 1")
        return cls(np.diag(occ))


def free_propagator(dm: CouplingMatrix, t) -> np.ndarray:
    """Single-particle propagator ``exp(-i Jd t)`` (``t`` in seconds)."""
    return _Propagator(dm)(t)


class _Propagator:
    def __init__(self, dm: CouplingMatrix):
        try:
            self.evals, self.evecs = np.linalg.eigh(dm.values)
        except np.linalg.LinAlgError as exc:
            raise SimulationError(f"eigendecomposition failed: {exc}") from exc

    def __call__(self, t):
        return (self.evecs * np.exp(-1j * self.evals * t)) @ self.evecs.T


def evolve_correlations(c0: CorrelationMatrix, dm: CouplingMatrix, tau,
                        return_matrices=False):
    """Free-fermion evolution of ``C`` on a ``tau`` grid.

    With amplitudes ``a(t) = U a(0)`` the correlations transform as
    ``C(t) = conj(U) C0 U^T``.

    Returns
    -------
    Trajectory
        ``m_j = 2 n_j - 1`` with ``metadata["model"] == "free_fermion"``.
    list of CorrelationMatrix
        Only if ``return_matrices``.
    """
    if c0.size != dm.size:
        raise ConfigError(f"C0 has size {c0.size}, matrix {dm.size}")
    tau = np.asarray(tau, dtype=float)
    prop = _Propagator(dm)
    mats, mags = [], []
    for t in tau_to_time(tau, dm.j_ref):
        u = prop(t)
        c = u.conj() @ c0.values @ u.T
        c = 0.5 * (c + c.conj().T)
        mags.append(2.0 * c.diagonal().real - 1.0)
        if return_matrices:
            mats.append(CorrelationMatrix(c))
    meta = {
        "model": "free_fermion",
        "hamiltonian": f"free[{dm.label}]",
        "n_sites": dm.size,
        "j_ref_rad_s": float(dm.j_ref),
        "n_particles": c0.n_particles,
    }
    traj = Trajectory(tau, np.array(mags), meta)
    return (traj, mats) if return_matrices else traj


def jw_string_weight(state, i, j) -> int:
    """Parity ``(-1)**(occupied sites strictly between i and j)``.

    ``state`` is a basis integer (bit ``k - 1`` for site ``k``) or a bitstring;
    ``i < j`` are 1-based sites.
    """
    if not i < j:
        raise ConfigError(f"need i < j, got i={i}, j={j}")
    if isinstance(state, str):
        state = sum(1 << k for k, c in enumerate(state) if c == "1")
    between = (int(state) >> i) & ((1 << (j - i - 1)) - 1)
    return -1 if bin(between).count("1") % 2 else 1


def _ordering_sign(state, k):
    # (-1)**(number of occupied modes before mode k), fermion order 1..L
    return -1 if bin(state & ((1 << k) - 1)).count("1") % 2 else 1


def fermion_hamiltonian(dm: CouplingMatrix, sector: Sector = None, strings=True) -> sp.csr_matrix:
    """Fock-space matrix of ``sum_{i != j} c_i^dag Jd_ij [P_ij] c_j``.

    Built from canonical fermion algebra (ordering signs) rather than from
    spin flips.  With ``strings`` the parity string is included and the result
    equals the spin flip-flop Hamiltonian; without it the model is free.
    """
    sector = Sector(dm.size) if sector is None else sector
    states = sector.states
    rows, cols, vals = [], [], []
    n = dm.size
    for col, s in enumerate(states):
        s = int(s)
        for a in range(n):
            for b in range(n):
                v = dm.values[a, b]
                if a == b or v == 0.0:
                    continue
                # c_a^dag c_b on |s>: needs b occupied, a empty
                if not (s >> b) & 1 or (s >> a) & 1:
                    continue
                s1 = s ^ (1 << b)
                sign = _ordering_sign(s, b) * _ordering_sign(s1, a)
                s2 = s1 | (1 << a)
                if strings:
                    lo, hi = min(a, b), max(a, b)
                    # the string acts on the state after c_b, before c_a^dag;
                    # sites strictly between are untouched by either operator
                    sign *= jw_string_weight(s1, lo + 1, hi + 1)
                rows.append(int(sector.index(s2)))
                cols.append(col)
                vals.append(sign * v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(sector.dim, sector.dim))
