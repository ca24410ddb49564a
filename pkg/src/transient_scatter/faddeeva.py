"""Faddeeva function ``w(z) = exp(-z**2) * erfc(-i z)``.

The upper half plane is covered by three evaluators chosen by ``|z|``:

* Maclaurin series for ``|z| < 1.5``
* Weideman's rational approximation for ``1.5 <= |z| < 8``
* Laplace continued fraction (modified Lentz) for ``|z| >= 8``

The lower half plane is reached through ``w(z) = 2 exp(-z**2) - w(-z)``.
All evaluators are vectorised over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gamma

SQRT_PI = math.sqrt(math.pi)

SERIES_RADIUS = 1.5
CF_RADIUS = 8.0
MAX_ABS_Z = 1e6
# log of the largest finite double, with a margin for the factor 2
_EXP_LIMIT = 708.0

_N_SERIES = 64
_SERIES_COEF = 1.0 / gamma(np.arange(_N_SERIES) / 2.0 + 1.0)

_N_WEIDEMAN = 64
_L_WEIDEMAN = math.sqrt(_N_WEIDEMAN / math.sqrt(2.0))


def _weideman_coefficients(n: int, L: float) -> np.ndarray:
    m = 2 * n
    k = np.arange(-m + 1, m)
    theta = k * np.pi / m
    t = L * np.tan(theta / 2.0)
    f = np.concatenate([[0.0], np.exp(-t**2) * (L**2 + t**2)])
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    # polynomial coefficients, highest degree first for np.polyval
    return np.flipud(a[1:n + 1])


_WEIDEMAN_COEF = _weideman_coefficients(_N_WEIDEMAN, _L_WEIDEMAN)


class FaddeevaOverflowError(OverflowError):
    """``w(z)`` is not representable in double precision."""

    def __init__(self, z: complex):
        self.z = complex(z)
        super().__init__(f"w(z) overflows for z = {self.z!r}")


@dataclass(frozen=True)
class WEvaluation:
    z: complex
    w: complex
    est_error: float


def _series(z: np.ndarray) -> np.ndarray:
    iz = 1j * z
    out = np.zeros_like(z)
    for c in _SERIES_COEF[::-1]:
        out = out * iz + c
    return out


def _rational(z: np.ndarray) -> np.ndarray:
    L = _L_WEIDEMAN
    Z = (L + 1j * z) / (L - 1j * z)
    p = np.polyval(_WEIDEMAN_COEF, Z)
    return 2.0 * p / (L - 1j * z) ** 2 + (1.0 / SQRT_PI) / (L - 1j * z)


def _continued_fraction(z: np.ndarray, tol: float = 1e-16, max_terms: int = 2000):
    """Lentz evaluation of z - (1/2)/(z - 1/(z - (3/2)/(z - ...))).

    Returns ``(w, last_relative_change)``.
    """
    tiny = 1e-300
    f = z.copy()
    f[f == 0] = tiny
    C = f.copy()
    D = np.zeros_like(z)
    delta = np.ones(z.shape)
    active = np.ones(z.shape, dtype=bool)
    for j in range(1, max_terms + 1):
        a = -0.5 * j
        Dn = z[active] + a * D[active]
        Dn[Dn == 0] = tiny
        Dn = 1.0 / Dn
        Cn = z[active] + a / C[active]
        Cn[Cn == 0] = tiny
        step = Cn * Dn
        f[active] *= step
        D[active] = Dn
        C[active] = Cn
        change = np.abs(step - 1.0)
        delta[active] = change
        idx = np.flatnonzero(active)
        active[idx[change < tol]] = False
        if not active.any():
            break
    return (1j / SQRT_PI) / f, delta


def _upper(z: np.ndarray) -> np.ndarray:
    """``w`` for ``Im z >= 0``."""
    out = np.empty_like(z)
    r = np.abs(z)
    near = r < SERIES_RADIUS
    far = r >= CF_RADIUS
    mid = ~(near | far)
    if near.any():
        out[near] = _series(z[near])
    if mid.any():
        out[mid] = _rational(z[mid])
    if far.any():
        out[far] = _continued_fraction(z[far])[0]
        # the fraction drops exp(-x**2) on the real axis; restore it where visible
        onaxis = far & (z.imag == 0) & (np.abs(z.real) < 27.0)
        out[onaxis] += np.exp(-z.real[onaxis] ** 2)
    return out


def w(z):
    """Faddeeva function of a complex scalar or array.

    Raises
    ------
    FaddeevaOverflowError
        If ``|z|`` exceeds the guard or ``exp(-z**2)`` is not representable
        for some ``z`` in the lower half plane.
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    big = np.abs(z) > MAX_ABS_Z
    if big.any():
        raise FaddeevaOverflowError(z[big][0])
    out = np.empty_like(z)
    upper = z.imag >= 0
    if upper.any():
        out[upper] = _upper(z[upper])
    lower = ~upper
    if lower.any():
        zl = z[lower]
        expo = -(zl * zl)
        if np.any(expo.real > _EXP_LIMIT):
            raise FaddeevaOverflowError(zl[np.argmax(expo.real)])
        out[lower] = 2.0 * np.exp(expo) - _upper(-zl)
    return out[0] if scalar else out


def w_eval(z: complex) -> WEvaluation:
    """Evaluate ``w`` at a scalar together with a rough error estimate."""
    z = complex(z)
    val = complex(w(z))
    eps = np.finfo(float).eps
    zu = z if z.imag >= 0 else -z
    r = abs(zu)
    if r < SERIES_RADIUS:
        # rounding in the Horner sum is bounded by the largest term
        terms = _SERIES_COEF * r ** np.arange(_N_SERIES)
        err = 4 * eps * terms.sum()
    elif r < CF_RADIUS:
        err = 1e-13
    else:
        _, delta = _continued_fraction(np.array([zu]))
        err = abs(val) * max(float(delta[0]), eps)
    if z.imag < 0:
        err += 2 * eps * abs(np.exp(-z * z))
    return WEvaluation(z=z, w=val, est_error=float(err))
