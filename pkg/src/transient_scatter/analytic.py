"""Uniform saddle-point approximation of the momentum amplitude.

The incidence and transmission pole terms are kept, each smoothed across
the steepest-descent path by a Faddeeva function:

    <p|psi(t)> ~ (A/2) exp(L + i p d / 2 hbar) [w(u) + T(p) w(-u)]

with ``u = (p - s)/f`` measured from the complex saddle ``s(t)``,
``L = eta**2 - delta_x p_c**2 / hbar**2`` and ``A`` the peak amplitude of
the initial Gaussian. Reflection and barrier-interior contributions are
dropped, so the result is reliable for over-barrier packets that are much
wider than the barrier.
"""
from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.special import erfc

from .barrier import BarrierSpec, ResonancePole, SearchRegion, find_resonance_poles, transmission
from .faddeeva import w
from .observables import MomentumDistribution

# exp() of anything larger than this is not a finite double
_MAX_EXPONENT = 700.0


class ExponentOverflowError(OverflowError):
    def __init__(self, exponent: complex):
        self.exponent = complex(exponent)
        super().__init__(f"amplitude exponent {self.exponent!r} overflows after cancellation")


class ResonanceProximityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GaussianPacket:
    """Minimum-uncertainty Gaussian centred at ``x0 = -alpha * delta_x``.

    ``delta_x`` is the position variance; the momentum standard deviation
    is ``hbar / (2 sqrt(delta_x))``.
    """
    delta_x: float
    p_c: float
    alpha: float
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("delta_x", "p_c", "alpha", "hbar"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")

    @classmethod
    def from_center(cls, delta_x: float, p_c: float, x0: float, hbar: float = 1.0) -> "GaussianPacket":
        return cls(delta_x=delta_x, p_c=p_c, alpha=-x0 / delta_x, hbar=hbar)

    @property
    def x0(self) -> float:
        return -self.alpha * self.delta_x

    @property
    def sigma_x(self) -> float:
        return math.sqrt(self.delta_x)

    @property
    def sigma_p(self) -> float:
        return self.hbar / (2.0 * math.sqrt(self.delta_x))

    @property
    def peak_amplitude(self) -> float:
        return (2.0 * self.delta_x / (math.pi * self.hbar**2)) ** 0.25

    def negative_momentum_weight(self) -> float:
        return 0.5 * float(erfc(self.p_c / (math.sqrt(2.0) * self.sigma_p)))

    def check_against(self, spec: BarrierSpec) -> None:
        """Raise ``ValueError`` unless the packet starts clear of the barrier
        and carries negligible negative-momentum weight."""
        if self.x0 + 3.0 * self.sigma_x >= -0.5 * spec.d:
            raise ValueError(
                f"packet overlaps the barrier at 3 sigma: x0 + 3 sigma = "
                f"{self.x0 + 3.0 * self.sigma_x:.6g} >= -d/2 = {-0.5 * spec.d:.6g}")
        weight = self.negative_momentum_weight()
        if weight >= 1e-6:
            raise ValueError(f"negative-momentum weight {weight:.3g} is not negligible")


def gaussian_amp(packet: GaussianPacket, p_prime):
    """Initial momentum amplitude of the packet."""
    p = np.asarray(p_prime, dtype=float)
    hb = packet.hbar
    expo = (-packet.delta_x * (p - packet.p_c) ** 2 / hb**2
            + 1j * p * packet.alpha * packet.delta_x / hb)
    return packet.peak_amplitude * np.exp(expo)


@dataclass(frozen=True)
class SaddleData:
    t: float
    s: complex
    f: complex
    eta: complex
    tau: float
    slope: float
    log_scale: complex
    sdp_angle: float

    @property
    def inv_f2(self) -> complex:
        return 1.0 / (self.f * self.f)


def saddle_data(packet: GaussianPacket, spec: BarrierSpec, t: float) -> SaddleData:
    """Saddle, Gaussian scale ``f`` and exponents of the phase at time ``t``.

    ``slope`` is the nominal steepest-descent slope ``-t hbar/(2 m delta_x)``;
    ``sdp_angle = arg f`` is the exact direction of the path through ``s``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    hb, dx, pc, m = packet.hbar, packet.delta_x, packet.p_c, spec.m
    offset = packet.alpha * dx - 0.5 * spec.d
    gamma = t / (2.0 * m * hb)
    a = dx / hb**2 + 1j * gamma
    B = 2.0 * dx * pc / hb**2
    beta = 1j * offset / hb
    b = B + beta
    root_a = np.sqrt(a)
    s = b / (2.0 * a)
    f = 1.0 / root_a
    eta = b / (2.0 * root_a)
    # eta**2 - dx pc**2/hb**2 with the B**2 terms cancelled by hand
    log_scale = (2.0 * B * beta + beta * beta - 4j * gamma * dx * pc**2 / hb**2) / (4.0 * a)
    tau = (2.0 * math.pi * hb) ** -0.5 * packet.peak_amplitude
    return SaddleData(
        t=float(t), s=complex(s), f=complex(f), eta=complex(eta), tau=tau,
        slope=-t * hb / (2.0 * m * dx), log_scale=complex(log_scale),
        sdp_angle=float(np.angle(f)),
    )


def _exp_checked(expo):
    expo = np.asarray(expo)
    if np.any(expo.real > _MAX_EXPONENT):
        raise ExponentOverflowError(expo.flat[np.argmax(expo.real)])
    return np.exp(expo)


def _scaled_w(log_scale: complex, z):
    """``exp(log_scale) * w(z)`` without forming either factor when huge."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    up = z.imag >= 0
    scale = _exp_checked(log_scale)
    if up.any():
        out[up] = scale * w(z[up])
    lo = ~up
    if lo.any():
        zl = z[lo]
        out[lo] = 2.0 * _exp_checked(log_scale - zl * zl) - scale * w(-zl)
    return out


@dataclass
class MomentumAmplitude:
    p: np.ndarray
    psi: np.ndarray
    incident_term: np.ndarray
    transmitted_term: np.ndarray


def psi_IT0(packet: GaussianPacket, spec: BarrierSpec, p, t: float) -> MomentumAmplitude:
    """Zeroth-order incidence + transmission amplitude at momenta ``p``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(p <= 0):
        raise ValueError("momenta must be positive")
    sd = saddle_data(packet, spec, t)
    u = (p - sd.s) / sd.f
    edge = 0.5 * packet.peak_amplitude * np.exp(0.5j * p * spec.d / packet.hbar)
    incident = edge * _scaled_w(sd.log_scale, u)
    transmitted = edge * transmission(spec, p, packet.hbar) * _scaled_w(sd.log_scale, -u)
    return MomentumAmplitude(p=p, psi=incident + transmitted,
                             incident_term=incident, transmitted_term=transmitted)


@dataclass
class ArgandScan:
    """Incident/transmitted lobules and their w-function factorisation.

    ``incident = pref_I * w_I`` and ``transmitted = pref_T * mw_mT`` where
    ``w_I = w(u)`` and ``mw_mT = -w(-u)``.
    """
    t: float
    p: np.ndarray
    incident: np.ndarray
    transmitted: np.ndarray
    w_I: np.ndarray
    mw_mT: np.ndarray
    pref_I: np.ndarray
    pref_T: np.ndarray

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.incident + self.transmitted) ** 2

    def rows(self):
        for i in range(len(self.p)):
            yield (self.p[i],
                   self.incident[i].real, self.incident[i].imag,
                   self.transmitted[i].real, self.transmitted[i].imag,
                   self.w_I[i].real, self.w_I[i].imag,
                   self.mw_mT[i].real, self.mw_mT[i].imag,
                   self.pref_I[i].real, self.pref_I[i].imag,
                   self.pref_T[i].real, self.pref_T[i].imag)


ARGAND_COLUMNS = ("p", "re_inc", "im_inc", "re_trans", "im_trans", "re_w_uI", "im_w_uI",
                  "re_mw_muT", "im_mw_muT", "re_prefI", "im_prefI", "re_prefT", "im_prefT")


def argand_scan(packet: GaussianPacket, spec: BarrierSpec, t: float, p_grid) -> ArgandScan:
    p = np.asarray(p_grid, dtype=float)
    if p.ndim != 1 or p.size < 1 or np.any(p <= 0) or np.any(np.diff(p) <= 0):
        raise ValueError("p_grid must be strictly increasing and positive")
    amp = psi_IT0(packet, spec, p, t)
    sd = saddle_data(packet, spec, t)
    u = (p - sd.s) / sd.f
    edge = 0.5 * packet.peak_amplitude * np.exp(0.5j * p * spec.d / packet.hbar)
    scale = _exp_checked(sd.log_scale)
    pref_I = edge * scale
    pref_T = -edge * transmission(spec, p, packet.hbar) * scale
    return ArgandScan(t=float(t), p=p, incident=amp.incident_term,
                      transmitted=amp.transmitted_term, w_I=w(u), mw_mT=-w(-u),
                      pref_I=pref_I, pref_T=pref_T)


def crossed_resonances(packet: GaussianPacket, spec: BarrierSpec, t: float,
                       poles: list[ResonancePole], distance: float = 3.0) -> list[ResonancePole]:
    """Resonance poles swept over when the real axis is deformed onto the
    steepest-descent path and lying within ``distance`` of the saddle."""
    sd = saddle_data(packet, spec, t)
    direction = sd.f / abs(sd.f)
    hits = []
    for pole in poles:
        z = pole.value
        # height of the path above the real point Re z
        along = (z.real - sd.s.real) / direction.real
        path_im = sd.s.imag + along * direction.imag
        crossed = (path_im < z.imag < 0) or (0 < z.imag < path_im)
        if crossed and abs(z - sd.s) < distance:
            hits.append(pole)
    return hits


def check_direct_scattering(packet: GaussianPacket, spec: BarrierSpec, t: float,
                            region: SearchRegion | None = None) -> list[ResonancePole]:
    """Warn when dropped resonance residues may matter at time ``t``."""
    if region is None:
        pc = packet.p_c
        region = SearchRegion(max(pc - 10.0, 1e-3), pc + 10.0, -10.0, -1e-3)
    poles = find_resonance_poles(spec, packet.hbar, region)
    hits = crossed_resonances(packet, spec, t, poles)
    for pole in hits:
        warnings.warn(f"resonance pole {pole.value!r} is crossed near the saddle at t={t}",
                      ResonanceProximityWarning, stacklevel=2)
    return hits


class AnalyticEngine:
    """Momentum densities from the uniform approximation on a fixed grid."""

    name = "analytic"

    def __init__(self, packet: GaussianPacket, spec: BarrierSpec, p_grid=None):
        self.packet = packet
        self.spec = spec
        if p_grid is None:
            p_grid = default_momentum_grid(packet)
        self.p_grid = np.asarray(p_grid, dtype=float)

    def distribution(self, t: float) -> MomentumDistribution:
        amp = psi_IT0(self.packet, self.spec, self.p_grid, t)
        return MomentumDistribution(t=float(t), p=self.p_grid, density=np.abs(amp.psi) ** 2,
                                    amplitude=amp.psi)


def default_momentum_grid(packet: GaussianPacket, half_width: float | None = None,
                          spacing: float | None = None) -> np.ndarray:
    """Uniform grid around ``p_c`` wide enough for the algebraic tails that
    the barrier edges imprint on the transient distribution."""
    if spacing is None:
        spacing = packet.sigma_p / 12.0
    if half_width is None:
        half_width = min(packet.p_c * 0.999, 2000.0 * packet.sigma_p)
    lo = max(packet.p_c - half_width, spacing)
    n = int(math.ceil((packet.p_c + half_width - lo) / spacing)) + 1
    return lo + spacing * np.arange(n)
