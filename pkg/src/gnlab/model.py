"""Nonlinearity and the fixed 2x2 / 4x4 matrices of the Gross-Neveu system.

Mass is m = 1 everywhere.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Model:
    k: int
    f: Callable
    fprime: Callable
    F: Callable
    name: str = "power"


def make_power_model(k):
    """Pure power nonlinearity f(s) = s^k with F(s) = s^(k+1)/(k+1)."""
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValueError(f"exponent k must be an integer >= 1, got {k!r}")
    k = int(k)

    def f(s):
        return np.power(s, k)

    def fprime(s):
        return k * np.power(s, k - 1)

    def F(s):
        return np.power(s, k + 1) / (k + 1)

    return Model(k=k, f=f, fprime=fprime, F=F, name=f"s^{k}")


def make_model(f, fprime, F, k=1, name="custom"):
    # hook for general smooth nonlinearities; only powers are exercised
    return Model(k=int(k), f=f, fprime=fprime, F=F, name=name)


@dataclass(frozen=True)
class MatrixSet:
    alpha2: np.ndarray
    beta2: np.ndarray
    sigma1: np.ndarray
    sigma3: np.ndarray
    J4: np.ndarray
    bold_alpha: np.ndarray
    bold_beta: np.ndarray
    Sigma: np.ndarray


def dirac_matrices():
    sigma1 = np.array([[0, 1], [1, 0]], dtype=complex)
    sigma2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sigma3 = np.array([[1, 0], [0, -1]], dtype=complex)
    alpha2 = -sigma2
    beta2 = sigma3.copy()
    I2 = np.eye(2)
    Z2 = np.zeros((2, 2))
    J4 = np.block([[Z2, I2], [-I2, Z2]])
    # real 4x4 representation of multiplication by alpha on C^2 = R^2 x R^2
    ims2 = sigma2.imag
    bold_alpha = np.block([[Z2, ims2], [-ims2, Z2]])
    bold_beta = np.block([[sigma3.real, Z2], [Z2, sigma3.real]])
    Sigma = 1j * J4
    return MatrixSet(alpha2=alpha2, beta2=beta2, sigma1=sigma1, sigma3=sigma3,
                     J4=J4, bold_alpha=bold_alpha, bold_beta=bold_beta, Sigma=Sigma)


MAT = dirac_matrices()
