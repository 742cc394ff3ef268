"""Free resolvent kernels of ``-Delta + kappa^2`` in two and three dimensions.

The 2D kernel needs the modified Bessel function K0, implemented here as a
power series for x <= 2 and a Chebyshev expansion of exp(x) sqrt(x) K0(x)
for x > 2 (table produced by ``scripts/gen_k0_chebyshev.py``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

EULER_GAMMA = 0.57721566490153286061

#: K0 underflows double precision a little above this argument.
K0_UNDERFLOW_X = 700.0

_SERIES_TERMS = 20


def _series_coefficients(n: int) -> tuple[np.ndarray, np.ndarray]:
    # I0(x) = sum y^k/(k!)^2 and the harmonic-number sum, y = x^2/4;
    # returned highest power first for np.polyval.
    i0 = np.empty(n)
    hk = np.empty(n)
    fact2 = 1.0
    harmonic = 0.0
    for k in range(n):
        if k > 0:
            fact2 *= float(k) ** 2
            harmonic += 1.0 / k
        i0[k] = 1.0 / fact2
        hk[k] = harmonic / fact2
    return i0[::-1].copy(), hk[::-1].copy()


_I0_POLY, _H_POLY = _series_coefficients(_SERIES_TERMS)

# exp(x) sqrt(x) K0(x) = sum c_k T_k(4/x - 1) for x >= 2
_CHEB = np.array([
    1.2201515410329777273,
    -3.1448101311964500543e-2,
    1.5698838857300533749e-3,
    -1.2849549581627802638e-4,
    1.3949813718876499364e-5,
    -1.8317555227191194848e-6,
    2.7668136394450150761e-7,
    -4.6604898976879476656e-8,
    8.5740340174142260858e-9,
    -1.6975345093890615156e-9,
    3.5773972814003284472e-10,
    -7.9574892444773970377e-11,
    1.855949114954926555e-11,
    -4.5145978833745191751e-12,
    1.1403405882073442347e-12,
    -2.9800969231481783548e-13,
    8.0328907750683743694e-14,
    -2.2275133267462963604e-14,
    6.3400764762766459661e-15,
    -1.8485933779209071694e-15,
    5.5120559994043333649e-16,
    -1.6782311257549006383e-16,
    5.2103917776435541125e-17,
    -1.6475805939842632815e-17,
])


def _clenshaw(t: np.ndarray) -> np.ndarray:
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    two_t = 2.0 * t
    for c in _CHEB[:0:-1]:
        b1, b2 = two_t * b1 - b2 + c, b1
    return t * b1 - b2 + _CHEB[0]


def _k0_small(x: np.ndarray) -> np.ndarray:
    y = 0.25 * x * x
    return -(np.log(0.5 * x) + EULER_GAMMA) * np.polyval(_I0_POLY, y) + np.polyval(_H_POLY, y)


def _k0_large(x: np.ndarray) -> np.ndarray:
    return np.exp(-x) / np.sqrt(x) * _clenshaw(4.0 / x - 1.0)


def k0_unchecked(x: np.ndarray) -> np.ndarray:
    """K0 on a positive array without validation; zero beyond the underflow bound.

    This is the hot path used during matrix assembly.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    small = x <= 2.0
    large = (~small) & (x <= K0_UNDERFLOW_X)
    if small.any():
        out[small] = _k0_small(x[small])
    if large.any():
        out[large] = _k0_large(x[large])
    return out


def bessel_k0(x, *, full_output: bool = False):
    """Modified Bessel function of the second kind of order zero.

    Parameters
    ----------
    x : float or array_like
        Strictly positive argument(s).
    full_output : bool
        If true, also return a boolean (array) that is set where the
        argument exceeds :data:`K0_UNDERFLOW_X` and zero was returned.

    Raises
    ------
    DomainError
        If any argument is not strictly positive.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError("bessel_k0 requires x > 0")
    val = k0_unchecked(arr)
    flag = arr > K0_UNDERFLOW_X
    if arr.ndim == 0:
        val = float(val)
        flag = bool(flag)
    if full_output:
        return val, flag
    return val


@dataclass(frozen=True)
class KernelParams:
    """Dimension ``nu`` and decay rate ``kappa`` of a resolvent kernel."""

    nu: int
    kappa: float

    def __post_init__(self):
        if self.nu not in (2, 3):
            raise DomainError(f"nu must be 2 or 3, got {self.nu}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")


def green_unchecked(nu: int, kappa: float, r: np.ndarray) -> np.ndarray:
    """Kernel values for r > 0 with no argument checks."""
    if nu == 2:
        return k0_unchecked(kappa * r) / (2.0 * math.pi)
    return np.exp(-kappa * r) / (4.0 * math.pi * r)


def green_free(params: KernelParams, r):
    """Integral kernel of ``(-Delta + kappa^2)^{-1}`` at distance ``r``.

    ``K0(kappa r) / (2 pi)`` for ``nu == 2`` and
    ``exp(-kappa r) / (4 pi r)`` for ``nu == 3``.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError("the resolvent kernel is singular at r = 0; need r > 0")
    val = green_unchecked(params.nu, params.kappa, arr)
    return float(val) if val.ndim == 0 else val
