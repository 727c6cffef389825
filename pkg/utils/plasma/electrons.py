"""
Electron density closures n_e(Phi).

Every model satisfies n_e(0) = 1, n_e'(0) = -1 and n_e' < 0, which is what the
stationary construction and the elliptic estimates rely on.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from utils.plasma.errors import InvalidConfig

ELECTRON_MODELS = ("boltzmann", "linear", "power_law")


@dataclass(frozen=True)
class ElectronModel:
    """
    One electron closure with everything the solvers need from it.

    Attributes:
        name: Tag used in config files.
        density: n_e(Phi).
        derivative: n_e'(Phi).
        antiderivative: N_e(Phi) = int_0^Phi n_e.
        excess: Phi - N_e(Phi), evaluated without cancellation for small Phi.
        inverse: n_e^{-1}(n) for n > 0.
    """

    name: str
    density: Callable
    derivative: Callable
    antiderivative: Callable
    excess: Callable
    inverse: Callable


def _boltzmann_excess(phi):
    phi = np.asarray(phi, dtype=float)
    series = phi**2 / 2 - phi**3 / 6 + phi**4 / 24 - phi**5 / 120
    return np.where(np.abs(phi) < 1e-3, series, phi + np.expm1(-phi))


def _boltzmann():
    return ElectronModel(
        name="boltzmann",
        density=lambda phi: np.exp(-np.asarray(phi, dtype=float)),
        derivative=lambda phi: -np.exp(-np.asarray(phi, dtype=float)),
        antiderivative=lambda phi: -np.expm1(-np.asarray(phi, dtype=float)),
        excess=_boltzmann_excess,
        inverse=lambda n: -np.log(np.asarray(n, dtype=float)),
    )


def _linear():
    return ElectronModel(
        name="linear",
        density=lambda phi: 1.0 - np.asarray(phi, dtype=float),
        derivative=lambda phi: -np.ones_like(np.asarray(phi, dtype=float)),
        antiderivative=lambda phi: np.asarray(phi, dtype=float) - np.asarray(phi, dtype=float) ** 2 / 2,
        excess=lambda phi: np.asarray(phi, dtype=float) ** 2 / 2,
        inverse=lambda n: 1.0 - np.asarray(n, dtype=float),
    )


def _power_law(p):
    if not p > 0:
        raise InvalidConfig(f"electron_exponent must be positive, got {p}")

    def density(phi):
        return (1.0 + np.asarray(phi, dtype=float) / p) ** (-p)

    def derivative(phi):
        return -((1.0 + np.asarray(phi, dtype=float) / p) ** (-p - 1.0))

    def antiderivative(phi):
        phi = np.asarray(phi, dtype=float)
        if abs(p - 1.0) < 1e-12:
            return np.log1p(phi)
        return p / (1.0 - p) * np.expm1((1.0 - p) * np.log1p(phi / p))

    def excess(phi):
        phi = np.asarray(phi, dtype=float)
        a3 = -(p + 1.0) / (6.0 * p)
        a4 = (p + 1.0) * (p + 2.0) / (24.0 * p**2)
        series = phi**2 / 2 + a3 * phi**3 + a4 * phi**4
        return np.where(np.abs(phi) < 1e-4, series, phi - antiderivative(phi))

    def inverse(n):
        return p * (np.asarray(n, dtype=float) ** (-1.0 / p) - 1.0)

    return ElectronModel(
        name="power_law",
        density=density,
        derivative=derivative,
        antiderivative=antiderivative,
        excess=excess,
        inverse=inverse,
    )


def get_electron_model(name, exponent=0.25):
    """
    Look up an electron closure by its config tag.

    Args:
        name (str): One of ELECTRON_MODELS, or an ElectronModel passed through unchanged.
        exponent (float): Exponent p of the power-law model, ignored otherwise.

    Returns:
        ElectronModel: The closure.
    """
    if isinstance(name, ElectronModel):
        return name
    if name == "boltzmann":
        return _boltzmann()
    if name == "linear":
        return _linear()
    if name == "power_law":
        return _power_law(float(exponent))
    raise InvalidConfig(f"unknown electron_model {name!r}; expected one of {ELECTRON_MODELS}")
