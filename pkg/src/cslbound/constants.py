"""Physical constants (CODATA 2018, via :mod:`scipy.constants`)."""

from dataclasses import dataclass

from scipy import constants as _c


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants entering the collapse-noise and thermal-noise formulas.

    ``m0`` is the reference nucleon mass of the CSL model, taken as the
    atomic mass constant (1 u) as is conventional in the CSL literature.
    """

    hbar: float = _c.hbar
    m0: float = _c.physical_constants["atomic mass constant"][0]
    kB: float = _c.k


CONSTANTS = PhysicalConstants()

#: magnetic flux quantum h / 2e in webers
PHI0 = _c.physical_constants["mag. flux quantum"][0]
