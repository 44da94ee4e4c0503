"""Unit conversions into atomic units (hartree, bohr, electron mass, a.u. time)."""

from scipy.constants import physical_constants as _pc

EV = 1.0 / _pc["Hartree energy in eV"][0]
INV_CM = 1.0 / _pc["hartree-inverse meter relationship"][0] / 1e-2
FS = 1e-15 / _pc["atomic unit of time"][0]
KB = _pc["kelvin-hartree relationship"][0]  # hartree per kelvin
SPEED_OF_LIGHT = 137.036


def ev(x):
    return x * EV


def inv_cm(x):
    return x * INV_CM


def fs(x):
    return x * FS


def beta_from_kelvin(temperature):
    return 1.0 / (KB * temperature)
