"""Stationary scattering off a square barrier of height V0 on [-d/2, d/2].

Inside the barrier the stationary state is handled in the regular basis
``cos(k'' x)`` and ``sin(k'' x) / k''``, which depends on ``k''**2`` only and
therefore is free of branch ambiguity and of the threshold singularity.
The plane-wave coefficients C and D are derived from it afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass
import enum
import math

import numpy as np

_SERIES_CUTOFF = 1e-4
NEAR_THRESHOLD = 1e-8


class NumericalDegeneracyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class BarrierSpec:
    V0: float
    d: float
    m: float

    def __post_init__(self):
        if not self.V0 >= 0:
            raise ValueError(f"V0 must be non-negative, got {self.V0!r}")
        if not self.d > 0:
            raise ValueError(f"d must be positive, got {self.d!r}")
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m!r}")

    @property
    def threshold_momentum(self) -> float:
        """Classical over-barrier threshold sqrt(2 m V0)."""
        return math.sqrt(2.0 * self.m * self.V0)


def _kk2(spec: BarrierSpec, p, hbar: float):
    p = np.asarray(p, dtype=complex)
    return (p * p - 2.0 * spec.m * spec.V0) / hbar**2


def _cos_sinc(q, x: float):
    """Return ``cos(k x)`` and ``sin(k x) / k`` for ``k**2 = q``."""
    q = np.asarray(q, dtype=complex)
    k = np.sqrt(q)
    kx = k * x
    small = np.abs(kx) < _SERIES_CUTOFF
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(small, 0.0, np.sin(kx) / np.where(small, 1.0, k))
    qx2 = q * x * x
    s = np.where(small, x * (1.0 - qx2 / 6.0 + qx2 * qx2 / 120.0), s)
    c = np.where(small, 1.0 - qx2 / 2.0 + qx2 * qx2 / 24.0, np.cos(kx))
    return c, s


def wavenumbers(spec: BarrierSpec, p_prime, hbar: float):
    """Outside and inside wavenumbers ``(k', k'')``.

    ``k''`` uses the principal square root of ``p'**2 - 2 m V0``, so it is
    real-positive above threshold and positive-imaginary below it.
    """
    if not hbar > 0:
        raise ValueError("hbar must be positive")
    p = np.asarray(p_prime, dtype=complex)
    k1 = p / hbar
    k2 = np.sqrt(p * p - 2.0 * spec.m * spec.V0) / hbar
    return k1, k2


def omega(spec: BarrierSpec, p_prime, hbar: float):
    """Common resonance denominator.

    ``cos(k''d) - (i/2)(k''/k' + k'/k'') sin(k''d)`` written through
    ``sin(k''d)/k''`` so that the removable point ``k'' = 0`` evaluates to
    ``1 - (i/2) k' d``.
    """
    p = np.asarray(p_prime, dtype=complex)
    k1 = p / hbar
    q = _kk2(spec, p, hbar)
    c, s = _cos_sinc(q, spec.d)
    return c - 0.5j * (q * s / k1 + k1 * s)


def omega_derivative(spec: BarrierSpec, p_prime, hbar: float):
    """Analytic ``d omega / d p'``."""
    p = np.asarray(p_prime, dtype=complex)
    d = spec.d
    k1 = p / hbar
    q = _kk2(spec, p, hbar)
    dq = 2.0 * p / hbar**2
    c, s = _cos_sinc(q, d)
    small = np.abs(q) * d * d < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        ds = np.where(small, 0.0, (d * c - s) / (2.0 * np.where(small, 1.0, q)))
    ds = np.where(small, d**3 * (-1.0 / 6.0 + q * d * d / 60.0), ds)
    dc = -0.5 * d * s
    inner = (s + q * ds) * dq / k1 - q * s / (k1 * k1 * hbar) + s / hbar + k1 * ds * dq
    return dc * dq - 0.5j * inner


def transmission(spec: BarrierSpec, p_prime, hbar: float):
    """Closed-form ``T = exp(-i k' d) / omega``."""
    p = np.asarray(p_prime, dtype=complex)
    return np.exp(-1j * p * spec.d / hbar) / omega(spec, p, hbar)


@dataclass
class ScatteringAmplitudes:
    """Matching coefficients at one or many incident momenta (I = 1).

    ``inner_cos`` and ``inner_sin`` give the barrier-interior solution as
    ``inner_cos * cos(k''x) + inner_sin * sin(k''x)/k''``; they stay finite
    at threshold where C and D diverge (C, D are NaN exactly at ``k'' = 0``).
    """
    p_prime: np.ndarray
    k_prime: np.ndarray
    k_dprime: np.ndarray
    R: np.ndarray
    C: np.ndarray
    D: np.ndarray
    T: np.ndarray
    Omega: np.ndarray
    inner_cos: np.ndarray
    inner_sin: np.ndarray
    near_threshold: np.ndarray


def amplitudes(spec: BarrierSpec, p_prime, hbar: float, check_tol: float = 1e-8) -> ScatteringAmplitudes:
    """Solve the 4x4 continuity system at x = -d/2 and x = +d/2.

    Raises
    ------
    NumericalDegeneracyError
        For ``p' = 0``, a vanishing ``omega`` at a real momentum, or when the
        solved T disagrees with ``exp(-i k' d) / omega``.
    """
    p = np.atleast_1d(np.asarray(p_prime, dtype=complex))
    if np.any(p == 0):
        raise NumericalDegeneracyError("p' = 0 has no incident wave")
    h = 0.5 * spec.d
    k1, k2 = wavenumbers(spec, p, hbar)
    q = _kk2(spec, p, hbar)
    e = np.exp(1j * k1 * h)
    einv = np.exp(-1j * k1 * h)
    zero = np.zeros_like(p)
    rhs = np.stack([-einv, -einv, zero, zero], axis=-1)[..., None]
    R = np.empty_like(p)
    T = np.empty_like(p)
    a = np.empty_like(p)
    b = np.empty_like(p)

    # regular basis near threshold: unknowns R, a, b / k', T
    reg = np.abs(k2 * spec.d) < 1.0
    if reg.any():
        kr, qr, er, zr = k1[reg], q[reg], e[reg], zero[reg]
        c, s = _cos_sinc(qr, h)
        ik = 1j * kr
        M = np.stack([
            np.stack([er, -c, kr * s, zr], axis=-1),
            np.stack([-er, -qr * s / ik, -c / 1j, zr], axis=-1),
            np.stack([zr, c, kr * s, -er], axis=-1),
            np.stack([zr, -qr * s / ik, c / 1j, -er], axis=-1),
        ], axis=-2)
        sol = np.linalg.solve(M, rhs[reg])[..., 0]
        R[reg], a[reg], b[reg], T[reg] = sol[:, 0], sol[:, 1], sol[:, 2] * kr, sol[:, 3]

    # edge-anchored exponentials elsewhere: C e^{ik''(x+h)} + D e^{-ik''(x-h)},
    # both bounded by one inside the barrier for the principal branch
    exp_ = ~reg
    if exp_.any():
        kr, kq, er, zr = k1[exp_], k2[exp_], e[exp_], zero[exp_]
        g = np.exp(1j * kq * spec.d)
        r = kq / kr
        M = np.stack([
            np.stack([er, -np.ones_like(g), -g, zr], axis=-1),
            np.stack([-er, -r, r * g, zr], axis=-1),
            np.stack([zr, g, np.ones_like(g), -er], axis=-1),
            np.stack([zr, r * g, -r, -er], axis=-1),
        ], axis=-2)
        sol = np.linalg.solve(M, rhs[exp_])[..., 0]
        Ca, Da = sol[:, 1], sol[:, 2]
        ge = np.exp(1j * kq * h)
        Cp, Dp = Ca * ge, Da * ge
        R[exp_], T[exp_] = sol[:, 0], sol[:, 3]
        a[exp_] = Cp + Dp
        b[exp_] = 1j * kq * (Cp - Dp)

    Om = omega(spec, p, hbar)
    real = np.abs(p.imag) == 0
    if np.any(real & (np.abs(Om) < 1e-14)):
        raise NumericalDegeneracyError("omega vanishes at a real momentum")
    closed = np.exp(-1j * k1 * spec.d)
    bad = np.abs(T * Om - closed) > check_tol * np.abs(closed)
    if np.any(bad):
        raise NumericalDegeneracyError(
            f"T * omega != exp(-i k' d) at p' = {p[bad][0]!r}")

    near = np.abs(k2 * spec.d) < NEAR_THRESHOLD
    with np.errstate(divide="ignore", invalid="ignore"):
        C = np.where(k2 == 0, np.nan, 0.5 * a + b / (2j * np.where(k2 == 0, 1.0, k2)))
        D = np.where(k2 == 0, np.nan, 0.5 * a - b / (2j * np.where(k2 == 0, 1.0, k2)))
    return ScatteringAmplitudes(p, k1, k2, R, C, D, T, Om, a, b, near)


def stationary_wavefunction(spec: BarrierSpec, amps: ScatteringAmplitudes, x, hbar: float):
    """Delta-normalised stationary state and its x-derivative at one momentum.

    ``amps`` must hold a single momentum.
    """
    x = np.asarray(x, dtype=float)
    k1 = complex(amps.k_prime[0])
    R, T = complex(amps.R[0]), complex(amps.T[0])
    a, b = complex(amps.inner_cos[0]), complex(amps.inner_sin[0])
    q = complex(_kk2(spec, amps.p_prime[0], hbar))
    h = 0.5 * spec.d
    norm = 1.0 / math.sqrt(2.0 * math.pi * hbar)
    psi = np.empty(x.shape, dtype=complex)
    dpsi = np.empty(x.shape, dtype=complex)
    left, right = x < -h, x > h
    mid = ~(left | right)
    xl, xr, xm = x[left], x[right], x[mid]
    psi[left] = np.exp(1j * k1 * xl) + R * np.exp(-1j * k1 * xl)
    dpsi[left] = 1j * k1 * (np.exp(1j * k1 * xl) - R * np.exp(-1j * k1 * xl))
    psi[right] = T * np.exp(1j * k1 * xr)
    dpsi[right] = 1j * k1 * T * np.exp(1j * k1 * xr)
    cm = np.empty(xm.shape, dtype=complex)
    sm = np.empty(xm.shape, dtype=complex)
    for i, xi in enumerate(xm):
        cm[i], sm[i] = _cos_sinc(q, float(xi))
    psi[mid] = a * cm + b * sm
    dpsi[mid] = -a * q * sm + b * cm
    return norm * psi, norm * dpsi


class ContourSide(enum.Enum):
    """Which side of the real integration contour a structural pole sits on."""
    ABOVE = "+i0"
    BELOW = "-i0"


@dataclass(frozen=True)
class StructuralPole:
    label: str
    value: complex
    side: ContourSide


@dataclass(frozen=True)
class ResonancePole:
    value: complex
    abs_omega: float


@dataclass
class PoleSet:
    structural: list
    resonances: list


def structural_poles(p: float) -> list[StructuralPole]:
    """Poles of the incident, reflected and transmitted terms of <p|p'+>."""
    return [
        StructuralPole("I", complex(p), ContourSide.ABOVE),
        StructuralPole("R", complex(-p), ContourSide.BELOW),
        StructuralPole("T", complex(p), ContourSide.BELOW),
    ]


@dataclass(frozen=True)
class SearchRegion:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("search region must have re_min < re_max and im_min < im_max")

    def contains(self, z, slack: float = 0.0):
        z = np.asarray(z)
        return ((z.real >= self.re_min - slack) & (z.real <= self.re_max + slack)
                & (z.imag >= self.im_min - slack) & (z.imag <= self.im_max + slack))


def find_resonance_poles(spec: BarrierSpec, hbar: float, region: SearchRegion,
                         max_count: int | None = None, seed_spacing: float | None = None,
                         tol: float = 1e-10, max_iter: int = 50,
                         merge_distance: float = 1e-6) -> list[ResonancePole]:
    """Zeros of omega inside ``region`` by grid-seeded Newton iteration.

    Seeds that fail to converge within ``max_iter`` steps or leave the region
    are dropped. Results are sorted by real part.
    """
    if region.im_max > 0:
        raise ValueError("resonance search region must lie in the lower half plane")
    if spec.V0 == 0:
        return []
    if seed_spacing is None:
        # zeros are spaced by about pi*hbar/d in k''; seed four per spacing
        seed_spacing = 0.25 * math.pi * hbar / spec.d
    nre = max(2, int(math.ceil((region.re_max - region.re_min) / seed_spacing)) + 1)
    nim = max(2, int(math.ceil((region.im_max - region.im_min) / seed_spacing)) + 1)
    re = np.linspace(region.re_min, region.re_max, nre)
    im = np.linspace(region.im_min, region.im_max, nim)
    z = (re[None, :] + 1j * im[:, None]).ravel()

    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            f = omega(spec, z, hbar)
            fp = omega_derivative(spec, z, hbar)
            z = z - f / fp
            z = np.where(np.isfinite(z), z, np.nan)
        resid = np.abs(omega(spec, z, hbar))
    keep = np.isfinite(z) & (resid < tol) & region.contains(z)
    found = z[keep]
    found = found[np.argsort(found.real)]

    roots: list[complex] = []
    for r in found:
        if all(abs(r - other) > merge_distance for other in roots):
            roots.append(complex(r))
    roots.sort(key=lambda v: (v.real, v.imag))
    if max_count is not None:
        roots = roots[:max_count]
    return [ResonancePole(r, float(abs(omega(spec, r, hbar)))) for r in roots]
