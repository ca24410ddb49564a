"""Split-operator propagation on a periodic grid: the brute-force oracle."""
from __future__ import annotations

from dataclasses import dataclass
import bisect
import functools
import math

import numpy as np
import scipy.fft as sfft

from .barrier import BarrierSpec
from .observables import MomentumDistribution

DEFAULT_N = 2**16
DEFAULT_X_MIN = -400.0
DEFAULT_X_MAX = 400.0
DEFAULT_DT = 1e-4


class RejectedConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @functools.cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    def momenta(self, hbar: float) -> np.ndarray:
        """FFT-ordered momenta, spacing ``2 pi hbar / (n dx)``."""
        return 2.0 * math.pi * hbar * sfft.fftfreq(self.n, d=self.dx)

    def p_max(self, hbar: float) -> float:
        return math.pi * hbar / self.dx


def grid_problems(grid: SpatialGrid, packet, spec: BarrierSpec, t_final: float) -> list[str]:
    """Violated sizing rules for propagating ``packet`` up to ``t_final``."""
    problems = []
    hb = packet.hbar
    need_p = packet.p_c + 8.0 * packet.sigma_p
    if grid.p_max(hb) <= need_p:
        problems.append(f"momentum span {grid.p_max(hb):.6g} does not exceed {need_p:.6g}")
    spread = math.sqrt(packet.delta_x * (1.0 + (hb * t_final / (2.0 * spec.m * packet.delta_x)) ** 2))
    front = max(packet.x0 + packet.p_c * t_final / spec.m, 0.5 * spec.d) + 4.0 * spread
    if grid.x_max < front:
        problems.append(f"x_max = {grid.x_max} is below the packet front {front:.6g} at t = {t_final}")
    back = packet.x0 - 4.0 * spread
    if grid.x_min > back:
        problems.append(f"x_min = {grid.x_min} is above the packet tail {back:.6g}")
    return problems


def default_grid() -> SpatialGrid:
    return SpatialGrid(DEFAULT_X_MIN, DEFAULT_X_MAX, DEFAULT_N)


@dataclass
class GridState:
    t: float
    samples: np.ndarray
    grid: SpatialGrid
    hbar: float

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dx)

    def copy(self) -> "GridState":
        return GridState(self.t, self.samples.copy(), self.grid, self.hbar)


def packet_samples(grid: SpatialGrid, packet) -> np.ndarray:
    """Closed-form position amplitude of the initial packet, phased so that
    its transform is exactly ``analytic.gaussian_amp``."""
    x = grid.x
    dx2 = packet.delta_x
    return ((2.0 * math.pi * dx2) ** -0.25
            * np.exp(-(x - packet.x0) ** 2 / (4.0 * dx2) + 1j * packet.p_c * (x - packet.x0) / packet.hbar))


def init_packet(grid: SpatialGrid, packet, spec: BarrierSpec) -> GridState:
    if packet.x0 + 3.0 * packet.sigma_x >= -0.5 * spec.d:
        raise RejectedConfigurationError("initial packet overlaps the barrier at 3 sigma")
    return GridState(0.0, packet_samples(grid, packet), grid, packet.hbar)


def barrier_potential(grid: SpatialGrid, spec: BarrierSpec) -> np.ndarray:
    """Cell-averaged barrier: each cell gets V0 times its covered fraction,
    so a cell centred on an edge receives V0/2."""
    x, h = grid.x, grid.dx
    half = 0.5 * spec.d
    cover = np.minimum(x + 0.5 * h, half) - np.maximum(x - 0.5 * h, -half)
    return spec.V0 * np.clip(cover, 0.0, h) / h


class SplitOperator:
    """Strang splitting ``exp(-iV dt/2) exp(-iK dt) exp(-iV dt/2)``.

    Consecutive potential half-steps are fused, so ``n`` steps cost ``2n``
    FFTs and two extra half-step multiplications.
    """

    def __init__(self, grid: SpatialGrid, spec: BarrierSpec, hbar: float, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.grid, self.spec, self.hbar, self.dt = grid, spec, hbar, dt
        V = barrier_potential(grid, spec)
        p = grid.momenta(hbar)
        self.half_potential = np.exp(-0.5j * V * dt / hbar)
        # the potential phase is 1 outside the barrier cells
        nz = np.flatnonzero(V)
        self._cells = slice(nz[0], nz[-1] + 1) if nz.size else slice(0, 0)
        self.full_potential = (self.half_potential * self.half_potential)[self._cells]
        self.kinetic = np.exp(-0.5j * p * p * dt / (spec.m * hbar))

    def advance(self, samples: np.ndarray, nsteps: int) -> np.ndarray:
        if nsteps <= 0:
            return samples.copy()
        cells = self._cells
        psi = samples.copy()
        psi[cells] *= self.half_potential[cells]
        for i in range(nsteps):
            psi = sfft.fft(psi, overwrite_x=True)
            psi *= self.kinetic
            psi = sfft.ifft(psi, overwrite_x=True)
            if i < nsteps - 1:
                psi[cells] *= self.full_potential
        psi[cells] *= self.half_potential[cells]
        return psi


@functools.lru_cache(maxsize=8)
def _propagator(grid: SpatialGrid, spec: BarrierSpec, hbar: float, dt: float) -> SplitOperator:
    return SplitOperator(grid, spec, hbar, dt)


def step(state: GridState, spec: BarrierSpec, dt: float) -> GridState:
    """One Strang step of length ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    op = _propagator(state.grid, spec, state.hbar, dt)
    return GridState(state.t + dt, op.advance(state.samples, 1), state.grid, state.hbar)


def propagate_to(state: GridState, spec: BarrierSpec, t_final: float, dt: float,
                 record: list | None = None) -> GridState:
    """Whole steps of ``dt`` followed by one shorter step landing on ``t_final``.

    If ``record`` is a list, ``(t, norm)`` of the final state is appended.
    """
    if t_final < state.t:
        raise ValueError(f"cannot propagate backwards from t = {state.t} to {t_final}")
    span = t_final - state.t
    nsteps = int(math.floor(span / dt + 1e-9))
    rest = span - nsteps * dt
    samples = state.samples
    if nsteps:
        samples = _propagator(state.grid, spec, state.hbar, dt).advance(samples, nsteps)
    if rest > 1e-12 * max(dt, abs(t_final)):
        samples = _propagator(state.grid, spec, state.hbar, rest).advance(samples, 1)
    elif not nsteps:
        samples = samples.copy()
    out = GridState(float(t_final), samples, state.grid, state.hbar)
    if record is not None:
        record.append((out.t, out.norm))
    return out


def momentum_distribution(state: GridState) -> MomentumDistribution:
    """Continuum-normalised momentum amplitude from the grid samples."""
    grid, hb = state.grid, state.hbar
    p = grid.momenta(hb)
    amp = sfft.fft(state.samples) * (grid.dx / math.sqrt(2.0 * math.pi * hb))
    amp *= np.exp(-1j * p * grid.x_min / hb)
    order = np.argsort(p, kind="stable")
    amp = amp[order]
    return MomentumDistribution(t=state.t, p=p[order], density=np.abs(amp) ** 2, amplitude=amp)


def energy(state: GridState, spec: BarrierSpec) -> float:
    """Expectation value of the Hamiltonian on the grid."""
    dist = momentum_distribution(state)
    dp = dist.p[1] - dist.p[0]
    kinetic = float(np.sum(dist.density * dist.p**2) * dp / (2.0 * spec.m))
    V = barrier_potential(state.grid, spec)
    potential = float(np.sum(V * np.abs(state.samples) ** 2) * state.grid.dx)
    return (kinetic + potential) / state.norm


def position_probability(state: GridState, x_min: float = -math.inf, x_max: float = math.inf) -> float:
    x = state.grid.x
    sel = (x > x_min) & (x < x_max)
    return float(np.sum(np.abs(state.samples[sel]) ** 2) * state.grid.dx)


class OracleEngine:
    """Grid propagation with a cache of intermediate states.

    Requests for an earlier time than anything cached restart from the
    nearest earlier cached state, never by backward propagation.
    """

    name = "oracle"

    def __init__(self, packet, spec: BarrierSpec, grid: SpatialGrid | None = None,
                 dt: float = DEFAULT_DT, cache_limit: int = 256):
        self.packet = packet
        self.spec = spec
        self.grid = grid or default_grid()
        self.dt = dt
        self.cache_limit = cache_limit
        initial = init_packet(self.grid, packet, spec)
        self._times = [0.0]
        self._states = {0.0: initial}
        self.norm_log: list[tuple[float, float]] = [(0.0, initial.norm)]

    def state(self, t: float) -> GridState:
        t = float(t)
        if t in self._states:
            return self._states[t]
        i = bisect.bisect_right(self._times, t) - 1
        start = self._states[self._times[i]]
        out = propagate_to(start, self.spec, t, self.dt, record=self.norm_log)
        if len(self._times) < self.cache_limit:
            bisect.insort(self._times, t)
            self._states[t] = out
        return out

    def distribution(self, t: float) -> MomentumDistribution:
        return momentum_distribution(self.state(t))
