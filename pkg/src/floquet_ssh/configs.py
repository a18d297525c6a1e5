"""Trap and Raman settings of the three experimental coupling configurations.

Frequencies are given in cyclic units here and converted exactly once through
:func:`floquet_ssh.constants.khz` / :func:`~floquet_ssh.constants.mhz`.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import khz
from .coupling import (
    CouplingMatrix,
    RamanConfig,
    ising_matrix,
    scale_rabi_to_mean_nn,
    stagger_correct,
)
from .errors import ConfigError
from .trap import ModeSpectrum, TrapConfig, solve_trap

__all__ = ["TRAP_15", "TRAP_27", "PublishedConfig", "PUBLISHED_CONFIGS", "published_spectrum", "published_coupling"]

TRAP_15 = TrapConfig.from_cyclic(15, 3.08, 0.11, 1.6e3)
TRAP_27 = TrapConfig.from_cyclic(27, 3.08, -0.1, 235.0)

# published radial mode lists, MHz
PUBLISHED_FREQS_MHZ = {
    15: (3.08, 3.07, 3.05, 3.03, 3.01, 2.98, 2.96, 2.93, 2.90, 2.88, 2.85, 2.83, 2.80, 2.78, 2.78),
    27: (3.08, 3.07, 3.07, 3.06, 3.05, 3.04, 3.03, 3.02, 3.00, 2.99, 2.98, 2.96, 2.95, 2.93,
         2.92, 2.90, 2.89, 2.87, 2.86, 2.84, 2.83, 2.82, 2.81, 2.80, 2.79, 2.77, 2.77),
}


@dataclass(frozen=True)
class PublishedConfig:
    """One experimental coupling configuration.

    ``detuning_khz`` is relative to the zig-zag mode; when ``detuning_from_com``
    is set it is instead relative to the COM mode (``Delta = d + w_1 - w_N``).
    """

    name: str
    trap: TrapConfig
    active_sites: tuple
    detuning_khz: float
    rabi_profile: tuple
    mean_nn_khz: float
    staggered: bool
    detuning_from_com: bool = False
    fit_amplitude: float = None
    fit_decay: float = None

    def detuning(self, spec: ModeSpectrum) -> float:
        d = khz(self.detuning_khz)
        if self.detuning_from_com:
            d += spec.frequencies[0] - spec.frequencies[-1]
        return d

    def raman(self, spec: ModeSpectrum) -> RamanConfig:
        rc = RamanConfig.from_profile(
            self.trap.n_ions, self.active_sites, self.rabi_profile, self.detuning(spec)
        )
        return scale_rabi_to_mean_nn(spec, rc, khz(self.mean_nn_khz))


PUBLISHED_CONFIGS = {
    "config1": PublishedConfig(
        "config1",
        TRAP_15,
        tuple(range(1, 13)),
        -99.0,
        (1.0, 1.0, 0.65, 0.87, 0.69, 0.97, 0.74, 0.97, 0.68, 0.86, 0.65, 0.99),
        0.25,
        staggered=True,
        fit_amplitude=3.9,
        fit_decay=1.36,
    ),
    "config2": PublishedConfig(
        "config2",
        TRAP_15,
        tuple(range(1, 13)),
        29.0,
        (1.0, 1.0, 1.10, 1.07, 1.16, 1.10, 1.17, 1.10, 1.16, 1.07, 1.10, 1.0),
        0.25,
        staggered=False,
        detuning_from_com=True,
        fit_amplitude=1.5,
        fit_decay=0.42,
    ),
    "config3": PublishedConfig(
        "config3",
        TRAP_27,
        tuple(range(2, 24)),
        -45.0,
        (1.0, 0.59, 0.59, 0.4, 0.47, 0.37, 0.50, 0.44, 0.60, 0.51, 0.68,
         0.54, 0.68, 0.52, 0.62, 0.45, 0.53, 0.39, 0.49, 0.42, 0.61, 0.60),
        0.2,
        staggered=True,
        fit_amplitude=2.7,
        fit_decay=1.0,
    ),
}


@lru_cache(maxsize=None)
def published_spectrum(n_ions: int) -> ModeSpectrum:
    trap = {15: TRAP_15, 27: TRAP_27}.get(n_ions)
    if trap is None:
        raise ConfigError(f"no published trap for N={n_ions}")
    return solve_trap(trap)


@lru_cache(maxsize=None)
def published_coupling(name: str, correct_stagger=True) -> CouplingMatrix:
    """Bare coupling matrix of a named configuration.

    The Rabi profile is the published one, scaled so that the mean NN bond is
    the published ``J``.  Sign-staggered configurations are corrected unless
    ``correct_stagger`` is false.
    """
    try:
        cfg = PUBLISHED_CONFIGS[name]
    except KeyError:
        raise ConfigError(f"unknown configuration {name!r}; known: {sorted(PUBLISHED_CONFIGS)}")
    spec = published_spectrum(cfg.trap.n_ions)
    cm = ising_matrix(spec, cfg.raman(spec), label=name)
    if cfg.staggered and correct_stagger:
        cm = stagger_correct(cm)
    return cm
