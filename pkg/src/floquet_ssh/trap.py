"""Linear ion-crystal equilibrium and transverse normal modes.

The axial confinement is the quartic-plus-quadratic potential
``V(x) = c4 x**4 + c2 x**2`` (energies in eV, lengths in mm on input) and the
radial confinement is harmonic.  Positions are found by a damped Newton
iteration on the total potential energy in natural units, the radial modes by
diagonalising the linearised Coulomb Hessian.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .constants import CODATA, Constants, mhz
from .errors import ConfigError, ConvergenceError, InstabilityError

__all__ = [
    "TrapConfig",
    "ModeSpectrum",
    "equilibrium_positions",
    "radial_modes",
    "solve_trap",
]


@dataclass(frozen=True)
class TrapConfig:
    """Trap description.

    Parameters
    ----------
    n_ions : int
        Number of ions in the chain, including unilluminated auxiliary ions.
    com_radial_freq : float
        Angular frequency of the radial centre-of-mass mode (rad/s).
    axial_c2 : float
        Quadratic axial coefficient (eV/mm^2).
    axial_c4 : float
        Quartic axial coefficient (eV/mm^4).
    ion_mass : float
        Ion mass (kg). Defaults to 171Yb+.
    """

    n_ions: int
    com_radial_freq: float
    axial_c2: float
    axial_c4: float
    ion_mass: float = CODATA.yb171_mass
    constants: Constants = field(default=CODATA, repr=False)

    def __post_init__(self):
        if int(self.n_ions) != self.n_ions or self.n_ions < 2:
            raise ConfigError(f"n_ions must be an integer >= 2, got {self.n_ions}")
        if not self.com_radial_freq > 0:
            raise ConfigError("com_radial_freq must be positive")
        if self.axial_c4 < 0 or (self.axial_c4 == 0 and self.axial_c2 <= 0):
            raise ConfigError(
                "axial potential is not confining: need c4 > 0, or c4 == 0 and c2 > 0"
            )
        if not self.ion_mass > 0:
            raise ConfigError("ion_mass must be positive")

    @classmethod
    def from_cyclic(cls, n_ions, com_radial_mhz, axial_c2, axial_c4, **kw):
        """Build from a cyclic COM frequency in MHz."""
        return cls(n_ions, mhz(com_radial_mhz), axial_c2, axial_c4, **kw)

    # SI views of the axial coefficients
    @property
    def c2_si(self) -> float:
        return self.axial_c2 * self.constants.ev / 1e-6

    @property
    def c4_si(self) -> float:
        return self.axial_c4 * self.constants.ev / 1e-12

    @property
    def coulomb(self) -> float:
        """k_e e^2 in J m."""
        return self.constants.coulomb_constant * self.constants.elementary_charge**2


@dataclass(frozen=True)
class ModeSpectrum:
    """Radial normal modes of a linear chain.

    ``participation[i, k]`` is the weight of ion ``i`` in mode ``k``; modes are
    ordered by descending frequency so ``k = 0`` is the COM mode.
    """

    positions: np.ndarray
    frequencies: np.ndarray
    participation: np.ndarray

    def __post_init__(self):
        for name in ("positions", "frequencies", "participation"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_ions(self) -> int:
        return len(self.positions)

    def to_dict(self) -> dict:
        return {
            "positions_m": [float(v) for v in self.positions],
            "freqs_rad_s": [float(v) for v in self.frequencies],
            "participation": [float(v) for v in self.participation.ravel()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModeSpectrum":
        pos = np.asarray(d["positions_m"], dtype=float)
        n = len(pos)
        return cls(
            pos,
            np.asarray(d["freqs_rad_s"], dtype=float),
            np.asarray(d["participation"], dtype=float).reshape(n, n),
        )


def _length_scale(c2: float, c4: float, coulomb: float) -> float:
    if c4 > 0:
        return (coulomb / (4.0 * c4)) ** 0.2
    return (coulomb / (2.0 * c2)) ** (1.0 / 3.0)


def _initial_guess(n, a2, a4):
    # equally spaced chain whose outermost ion is in force balance
    h = np.sum(1.0 / np.arange(1, n) ** 2)

    def edge_force(a):
        x = 0.5 * a * (n - 1)
        return 4 * a4 * x**3 + 2 * a2 * x - h / a**2

    spacing = brentq(edge_force, 1e-6, 1e6, xtol=1e-14)
    return spacing * (np.arange(n) - 0.5 * (n - 1))


def _energy(y, a2, a4):
    d = y[None, :] - y[:, None]
    iu = np.triu_indices(len(y), 1)
    return np.sum(a4 * y**4 + a2 * y**2) + np.sum(1.0 / np.abs(d[iu]))


def _gradient_hessian(y, a2, a4):
    d = y[:, None] - y[None, :]
    np.fill_diagonal(d, np.inf)
    g = 4 * a4 * y**3 + 2 * a2 * y - np.sum(np.sign(d) / d**2, axis=1)
    off = -2.0 / np.abs(d) ** 3
    hess = off.copy()
    np.fill_diagonal(hess, 12 * a4 * y**2 + 2 * a2 - off.sum(axis=1))
    return g, hess


def equilibrium_positions(cfg: TrapConfig, tol=1e-12, max_iter=200) -> np.ndarray:
    """Axial equilibrium positions in metres, sorted ascending.

    Raises
    ------
    ConvergenceError
        If the gradient norm (natural units) does not drop below ``tol``.
    InstabilityError
        If a Newton step cannot be damped enough to keep the ion order.
    """
    c2, c4, kc = cfg.c2_si, cfg.c4_si, cfg.coulomb
    ell = _length_scale(c2, c4, kc)
    e0 = kc / ell
    a2, a4 = c2 * ell**2 / e0, c4 * ell**4 / e0

    y = _initial_guess(cfg.n_ions, a2, a4)
    energy = _energy(y, a2, a4)
    gnorm = np.inf
    for it in range(max_iter):
        g, hess = _gradient_hessian(y, a2, a4)
        gnorm = np.linalg.norm(g)
        if gnorm < tol:
            return y * ell
        mu = 0.0
        while True:
            try:
                np.linalg.cholesky(hess + mu * np.eye(len(y)))
                break
            except np.linalg.LinAlgError:
                mu = max(2 * mu, 1e-6 * np.abs(np.diag(hess)).max())
        step = np.linalg.solve(hess + mu * np.eye(len(y)), -g)
        lam = 1.0
        for _ in range(60):
            trial = y + lam * step
            if np.all(np.diff(trial) > 0):
                e_trial = _energy(trial, a2, a4)
                # near convergence rounding noise dominates the energy test
                if e_trial <= energy or gnorm < 1e-6:
                    break
            lam *= 0.5
        else:
            raise InstabilityError(
                f"ion order could not be preserved at iteration {it}; "
                "check the initial guess or the trap potential"
            )
        y, energy = trial, _energy(trial, a2, a4)
    raise ConvergenceError(
        f"equilibrium search did not converge in {max_iter} iterations "
        f"(gradient norm {gnorm:.3e})",
        residual=gnorm,
        iterations=max_iter,
    )


def radial_modes(cfg: TrapConfig, positions) -> ModeSpectrum:
    """Transverse modes for one radial direction.

    The COM eigenvalue of the Hessian equals the bare radial trap frequency
    squared, so ``cfg.com_radial_freq`` is used directly as that frequency.
    Each mode vector is signed so that its first non-zero entry is positive.
    """
    x = np.asarray(positions, dtype=float)
    n = len(x)
    if n != cfg.n_ions:
        raise ConfigError(f"expected {cfg.n_ions} positions, got {n}")
    dist = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dist, np.inf)
    a = cfg.coulomb / (cfg.ion_mass * dist**3)
    np.fill_diagonal(a, 0.0)
    a[np.diag_indices(n)] = cfg.com_radial_freq**2 - a.sum(axis=1)

    evals, evecs = np.linalg.eigh(a)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if evals[-1] <= 0:
        k = int(np.argmin(evals))
        raise InstabilityError(
            f"radial mode {k + 1} is unstable (omega^2 = {evals[k]:.3e}); "
            "the chain would buckle into a zig-zag"
        )
    for k in range(n):
        col = evecs[:, k]
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        if first < 0:
            evecs[:, k] = -col
    return ModeSpectrum(x, np.sqrt(evals), evecs)


def solve_trap(cfg: TrapConfig) -> ModeSpectrum:
    """Equilibrium positions followed by the radial mode analysis."""
    return radial_modes(cfg, equilibrium_positions(cfg))
