"""Phonon-mediated Ising couplings and simple coupling profiles.

``ising_matrix`` evaluates the dispersive Molmer-Sorensen expression

    J_ij = sum_k eta_ik eta_jk Omega_i Omega_j / (2 (Delta + w_N - w_k))

with ``eta_ik = 0.08 b_ik`` and the detuning measured from the lowest
(zig-zag) radial mode.  All couplings are angular frequencies (rad/s).
"""

import csv
import io
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigError, ConvergenceError
from .trap import ModeSpectrum

__all__ = [
    "CouplingMatrix",
    "RamanConfig",
    "ising_matrix",
    "average_bond_strength",
    "band_profile",
    "fit_exponential_decay",
    "stagger_correct",
    "exponential_profile",
    "coupling_kernel",
    "scale_rabi_to_mean_nn",
    "calibrate_rabi",
]


@dataclass(frozen=True)
class CouplingMatrix:
    """Real symmetric bond matrix over the ``L`` spin sites.

    ``j_ref`` is the coupling scale used to normalise time (``tau = j_ref t /
    pi``).  It defaults to the mean nearest-neighbour magnitude (and must be
    given when ``L = 1``) and is carried
    through Floquet dressing unchanged, so dressed and bare runs share one
    time axis.
    """

    values: np.ndarray
    label: str = ""
    j_ref: float = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ConfigError(f"coupling matrix must be square, got {v.shape}")
        if v.shape[0] < 2 and self.j_ref is None:
            # a single site has no nearest-neighbour bond to set the time unit
            raise ConfigError("a one-site coupling matrix needs an explicit j_ref")
        scale = max(np.abs(v).max(), np.finfo(float).tiny)
        if np.abs(v - v.T).max() > 1e-12 * scale:
            raise ConfigError("coupling matrix is not symmetric")
        v = 0.5 * (v + v.T)
        np.fill_diagonal(v, 0.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.j_ref is None:
            object.__setattr__(self, "j_ref", self.mean_nn)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def mean_nn(self) -> float:
        return float(np.mean(np.abs(np.diag(self.values, 1))))

    def with_values(self, values, label=None) -> "CouplingMatrix":
        """Same metadata (including ``j_ref``), new entries."""
        return replace(self, values=values, label=self.label if label is None else label)

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "values": [float(x) for x in self.values.ravel()],
            "mean_nn_rad_s": self.mean_nn,
            "j_ref_rad_s": float(self.j_ref),
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CouplingMatrix":
        n = int(d["size"])
        vals = np.asarray(d["values"], dtype=float).reshape(n, n)
        return cls(vals, d.get("label", ""), d.get("j_ref_rad_s"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["site"] + list(range(1, self.size + 1)))
        for i, row in enumerate(self.values, start=1):
            w.writerow([i] + [repr(float(x)) for x in row])
        return buf.getvalue()


@dataclass(frozen=True)
class RamanConfig:
    """Per-ion Raman drive.

    ``rabi`` has one entry per ion in the chain; auxiliary ions carry zero.
    ``active_sites`` lists (0-based, ascending) the illuminated ions that make
    up the spin crystal.
    """

    detuning: float
    rabi: np.ndarray
    active_sites: tuple
    lamb_dicke_scale: float = 0.08

    def __post_init__(self):
        rabi = np.array(self.rabi, dtype=float)
        active = tuple(int(i) for i in self.active_sites)
        object.__setattr__(self, "rabi", rabi)
        object.__setattr__(self, "active_sites", active)
        if np.any(rabi < 0):
            raise ConfigError("Rabi frequencies must be non-negative")
        if not self.lamb_dicke_scale > 0:
            raise ConfigError("lamb_dicke_scale must be positive")
        if np.count_nonzero(rabi) == 0:
            raise ConfigError("all Rabi frequencies are zero")
        if sorted(set(active)) != list(active):
            raise ConfigError("active_sites must be strictly ascending")
        if set(np.flatnonzero(rabi)) != set(active):
            raise ConfigError("non-zero Rabi entries must coincide with active_sites")

    @classmethod
    def from_profile(cls, n_ions, active_sites, profile, detuning, omega1=1.0, **kw):
        """Rabi frequencies ``omega1 * profile`` on the active ions."""
        active = list(active_sites)
        if len(profile) != len(active):
            raise ConfigError("profile length must match the number of active sites")
        rabi = np.zeros(n_ions)
        rabi[active] = omega1 * np.asarray(profile, dtype=float)
        return cls(detuning, rabi, tuple(active), **kw)

    @property
    def n_sites(self) -> int:
        return len(self.active_sites)

    @property
    def profile(self) -> np.ndarray:
        """Active-site Rabi frequencies relative to the first one."""
        r = self.rabi[list(self.active_sites)]
        return r / r[0]


def _denominators(spec: ModeSpectrum, detuning: float, min_abs=1e3):
    w = spec.frequencies
    den = detuning + w[-1] - w
    k = int(np.argmin(np.abs(den)))
    if abs(den[k]) <= min_abs:
        raise ConfigError(
            f"detuning is resonant with mode {k + 1}: "
            f"|Delta + w_N - w_k| = {abs(den[k]):.3g} rad/s"
        )
    return den


def coupling_kernel(spec: ModeSpectrum, detuning: float, lamb_dicke_scale=0.08):
    """Omega-independent part of the coupling, ``sum_k eta_ik eta_jk / (2 den_k)``."""
    den = _denominators(spec, detuning)
    eta = lamb_dicke_scale * spec.participation
    return (eta / (2.0 * den)) @ eta.T


def ising_matrix(spec: ModeSpectrum, rc: RamanConfig, label="ising") -> CouplingMatrix:
    """Bare Ising couplings between the illuminated ions."""
    if len(rc.rabi) != spec.n_ions:
        raise ConfigError(
            f"RamanConfig covers {len(rc.rabi)} ions, spectrum has {spec.n_ions}"
        )
    kernel = coupling_kernel(spec, rc.detuning, rc.lamb_dicke_scale)
    full = kernel * np.outer(rc.rabi, rc.rabi)
    act = list(rc.active_sites)
    return CouplingMatrix(full[np.ix_(act, act)], label=label)


def average_bond_strength(cm: CouplingMatrix, d: int) -> float:
    """Mean of ``|J_{n, n+d}|`` over the ``L - d`` bonds at distance ``d``."""
    if not 1 <= d <= cm.size - 1:
        raise ConfigError(f"bond distance d={d} outside [1, {cm.size - 1}]")
    return float(np.mean(np.abs(np.diag(cm.values, d))))


def band_profile(cm: CouplingMatrix) -> np.ndarray:
    """``J_bar(d)`` for ``d = 0 .. L-1`` (entry 0 is zero)."""
    out = np.zeros(cm.size)
    for d in range(1, cm.size):
        out[d] = average_bond_strength(cm, d)
    return out


def fit_exponential_decay(cm: CouplingMatrix, d_max=6, scale=None):
    """Fit ``J_bar(d) = A * scale * exp(-kappa d)`` for ``1 <= d <= d_max``.

    The fit is a least-squares fit of the band averages themselves, started
    from a straight-line fit of their logarithm.  Fitting in log space alone
    lets bands that sit near a sign cancellation dominate the result.

    Returns
    -------
    amplitude, kappa : float
        ``amplitude`` is in units of ``scale`` (default: mean NN coupling).
    """
    scale = cm.mean_nn if scale is None else scale
    d_max = min(d_max, cm.size - 1)
    ds = np.arange(1, d_max + 1, dtype=float)
    jb = band_profile(cm)[1 : d_max + 1] / scale
    if d_max < 2:
        raise ConfigError("need at least two bands to fit a decay constant")
    good = jb > 0
    slope, icpt = np.polyfit(ds[good], np.log(jb[good]), 1)
    (amp, kappa), _ = curve_fit(
        lambda d, a, k: a * np.exp(-k * d), ds, jb, p0=[np.exp(icpt), -slope]
    )
    return float(amp), float(kappa)


def stagger_correct(cm: CouplingMatrix) -> CouplingMatrix:
    """Apply ``J_ij -> (-1)**(i + j) J_ij`` (flip s_x, s_y on odd sites)."""
    idx = np.arange(1, cm.size + 1)
    sign = np.where((idx[:, None] + idx[None, :]) % 2 == 0, 1.0, -1.0)
    return cm.with_values(cm.values * sign, label=f"{cm.label}|stagger")


def exponential_profile(j: float, xi: float, size: int) -> CouplingMatrix:
    """``J_ij = j exp(-|i - j| / xi)`` with zero diagonal."""
    if not (j > 0 and xi > 0 and size >= 2):
        raise ConfigError("exponential_profile needs j > 0, xi > 0, size >= 2")
    idx = np.arange(size)
    dist = np.abs(idx[:, None] - idx[None, :])
    vals = j * np.exp(-dist / xi)
    np.fill_diagonal(vals, 0.0)
    return CouplingMatrix(vals, label=f"exp(J={j:g},xi={xi:g})")


def scale_rabi_to_mean_nn(spec: ModeSpectrum, rc: RamanConfig, mean_nn: float) -> RamanConfig:
    """Rescale all Rabi frequencies so the mean |NN| coupling equals ``mean_nn``."""
    current = ising_matrix(spec, rc).mean_nn
    return replace(rc, rabi=rc.rabi * np.sqrt(mean_nn / current))


def calibrate_rabi(
    spec: ModeSpectrum,
    detuning: float,
    target_nn,
    active_sites,
    lamb_dicke_scale=0.08,
    gauge="first_pair",
    max_iter=100,
    tol=0.02,
) -> RamanConfig:
    """Find per-ion Rabi frequencies giving prescribed NN bond magnitudes.

    Each sweep visits the bonds in turn (alternating direction) and multiplies
    both end amplitudes by ``sqrt(target / actual)``.  The ``L - 1`` bond
    targets leave one free direction (odd sites scaled by ``a``, even sites by
    ``1/a``), which ``gauge`` fixes:

    ``"first_pair"``
        ``Omega_2 = Omega_1``.
    ``"min_norm"``
        the solution reached from a uniform start.

    Raises
    ------
    ConvergenceError
        If after ``max_iter`` sweeps some bond misses its target by more than
        ``tol`` (relative).
    """
    active = list(active_sites)
    n_sites = len(active)
    target = np.asarray(target_nn, dtype=float)
    if target.shape != (n_sites - 1,):
        raise ConfigError(f"target profile needs {n_sites - 1} entries")
    if np.any(target <= 0):
        raise ConfigError("target NN profile must be positive")
    if gauge not in ("first_pair", "min_norm"):
        raise ConfigError(f"unknown gauge {gauge!r}")

    kernel = coupling_kernel(spec, detuning, lamb_dicke_scale)[np.ix_(active, active)]
    knn = np.abs(np.diag(kernel, 1))
    omega = np.full(n_sites, np.sqrt(target.mean() / knn.mean()))

    residual = np.inf
    for it in range(max_iter):
        bonds = range(n_sites - 1) if it % 2 == 0 else range(n_sites - 2, -1, -1)
        for j in bonds:
            r = np.sqrt(target[j] / (knn[j] * omega[j] * omega[j + 1]))
            omega[j] *= r
            omega[j + 1] *= r
        residual = np.abs(knn * omega[:-1] * omega[1:] / target - 1.0).max()
        if residual < 1e-12:
            break
    if residual > tol:
        raise ConvergenceError(
            f"Rabi calibration did not converge in {max_iter} sweeps "
            f"(max relative NN error {residual:.3e})",
            residual=residual,
            iterations=max_iter,
        )
    if gauge == "first_pair":
        a = np.sqrt(omega[0] / omega[1])
        omega = omega * np.where(np.arange(n_sites) % 2 == 0, 1.0 / a, a)

    rabi = np.zeros(spec.n_ions)
    rabi[active] = omega
    return RamanConfig(detuning, rabi, tuple(active), lamb_dicke_scale)
