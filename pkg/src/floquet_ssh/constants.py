"""Physical constants (CODATA 2018), pinned so golden values never drift with
library upgrades."""

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class Constants:
    elementary_charge: float = 1.602176634e-19  # C (exact)
    vacuum_permittivity: float = 8.8541878128e-12  # F/m
    atomic_mass_unit: float = 1.66053906660e-27  # kg
    yb171_mass_u: float = 170.9363258  # u

    @property
    def coulomb_constant(self) -> float:
        return 1.0 / (4.0 * math.pi * self.vacuum_permittivity)

    @property
    def yb171_mass(self) -> float:
        return self.yb171_mass_u * self.atomic_mass_unit

    @property
    def ev(self) -> float:
        """One electron-volt in joules."""
        return self.elementary_charge


CODATA = Constants()

# first zero of the Bessel function J0
BESSEL_J0_ROOT = 2.404825557695773

TWO_PI = 2.0 * math.pi


def khz(f: float) -> float:
    """Cyclic kHz -> angular rad/s."""
    return TWO_PI * 1e3 * f


def mhz(f: float) -> float:
    """Cyclic MHz -> angular rad/s."""
    return TWO_PI * 1e6 * f
