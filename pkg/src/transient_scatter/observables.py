"""G^q(p, t): excess probability above momentum p relative to t = 0.

Also hosts the classical-ensemble counterpart computed by Monte Carlo.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np


class GridMismatchError(ValueError):
    pass


@dataclass
class MomentumDistribution:
    t: float
    p: np.ndarray
    density: np.ndarray
    amplitude: np.ndarray | None = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        if self.p.shape != self.density.shape or self.p.ndim != 1:
            raise ValueError("p and density must be 1-d arrays of equal length")
        if np.any(np.diff(self.p) <= 0):
            raise ValueError("momentum samples must be strictly increasing")
        if np.any(self.density < 0):
            raise ValueError("density must be non-negative")

    @property
    def norm(self) -> float:
        return float(np.trapezoid(self.density, self.p))

    def window(self, p_min: float, p_max: float) -> "MomentumDistribution":
        sel = (self.p >= p_min) & (self.p <= p_max)
        amp = None if self.amplitude is None else self.amplitude[sel]
        return MomentumDistribution(self.t, self.p[sel], self.density[sel], amp)


def _check_pair(dist_t: MomentumDistribution, dist_0: MomentumDistribution) -> None:
    if dist_t.p.shape != dist_0.p.shape or not np.array_equal(dist_t.p, dist_0.p):
        raise GridMismatchError("distributions are sampled on different momentum grids")


def gq_curve(dist_t: MomentumDistribution, dist_0: MomentumDistribution) -> np.ndarray:
    """G^q at every sample, integrating the density change up to the top
    of the sampled range with the trapezoid rule."""
    _check_pair(dist_t, dist_0)
    diff = dist_t.density - dist_0.density
    seg = 0.5 * (diff[1:] + diff[:-1]) * np.diff(dist_t.p)
    out = np.zeros_like(diff)
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


def gq(dist_t: MomentumDistribution, dist_0: MomentumDistribution, p: float,
       check_tail: bool = False) -> float:
    """G^q at a single momentum ``p`` inside the sampled range.

    With ``check_tail`` the initial distribution must integrate to one
    within 1e-4, which bounds the probability lost above the grid.
    """
    _check_pair(dist_t, dist_0)
    ps = dist_t.p
    if not ps[0] <= p <= ps[-1]:
        raise ValueError(f"p = {p} is outside the sampled range [{ps[0]}, {ps[-1]}]")
    if check_tail and abs(dist_0.norm - 1.0) >= 1e-4:
        raise ValueError(f"initial distribution integrates to {dist_0.norm:.6f}; "
                         "the momentum range misses part of the support")
    curve = gq_curve(dist_t, dist_0)
    i = int(np.searchsorted(ps, p, side="right")) - 1
    if i >= len(ps) - 1:
        return float(curve[-1])
    diff = dist_t.density - dist_0.density
    lam = (p - ps[i]) / (ps[i + 1] - ps[i])
    d_at_p = (1 - lam) * diff[i] + lam * diff[i + 1]
    return float(curve[i + 1] + 0.5 * (d_at_p + diff[i + 1]) * (ps[i + 1] - p))


@dataclass
class GqSurface:
    t_samples: np.ndarray
    p_samples: np.ndarray
    gq_values: np.ndarray  # shape (len(t), len(p))
    max_record: tuple = field(init=False)

    def __post_init__(self):
        idx = np.unravel_index(int(np.argmax(self.gq_values)), self.gq_values.shape)
        self.max_record = (float(self.gq_values[idx]), float(self.p_samples[idx[1]]),
                           float(self.t_samples[idx[0]]))

    def rows(self):
        for i, t in enumerate(self.t_samples):
            for j, p in enumerate(self.p_samples):
                yield (t, p, self.gq_values[i, j])


def gq_surface(engine, times, p_range: tuple[float, float] | None = None) -> GqSurface:
    """G^q on the engine's momentum grid (optionally restricted) at ``times``."""
    dist_0 = engine.distribution(0.0)
    sel = np.ones(dist_0.p.shape, dtype=bool)
    if p_range is not None:
        sel = (dist_0.p >= p_range[0]) & (dist_0.p <= p_range[1])
    rows = []
    for t in times:
        dist_t = engine.distribution(float(t))
        rows.append(gq_curve(dist_t, dist_0)[sel])
    return GqSurface(np.asarray(times, dtype=float), dist_0.p[sel], np.array(rows))


@dataclass
class GqMaxResult:
    gq_max: float
    p_star: float
    t_star: float
    engine: str
    resolution: int
    boundary_warning: bool = False
    refinements: int = 0

    def to_json(self) -> dict:
        return {
            "gq_max": float(self.gq_max),
            "p_star": float(self.p_star),
            "t_star": float(self.t_star),
            "engine": self.engine,
            "resolution": int(self.resolution),
            "boundary_warning": bool(self.boundary_warning),
            "refinements": int(self.refinements),
        }


def max_over_p(dist_t: MomentumDistribution, dist_0: MomentumDistribution,
               p_range: tuple[float, float]) -> tuple[float, float]:
    """Largest G^q over ``p_range`` at a fixed time, returned as ``(G, p)``.

    The grid maximum is refined by bisecting for the sign change of the
    linearly interpolated density difference.
    """
    curve = gq_curve(dist_t, dist_0)
    ps = dist_t.p
    sel = np.flatnonzero((ps >= p_range[0]) & (ps <= p_range[1]))
    if sel.size == 0:
        raise ValueError("p_range contains no momentum samples")
    i = int(sel[np.argmax(curve[sel])])
    best_g, best_p = float(curve[i]), float(ps[i])
    diff = dist_t.density - dist_0.density
    lo = max(i - 1, int(sel[0]))
    hi = min(i + 1, int(sel[-1]))

    def d(p):
        return float(np.interp(p, ps, diff))

    for a, b in ((ps[lo], ps[i]), (ps[i], ps[hi])):
        if b > a and d(a) < 0 < d(b):
            for _ in range(60):
                mid = 0.5 * (a + b)
                if d(mid) < 0:
                    a = mid
                else:
                    b = mid
            g = gq(dist_t, dist_0, 0.5 * (a + b))
            if g > best_g:
                best_g, best_p = g, 0.5 * (a + b)
    return best_g, best_p


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def gq_max(engine, p_range: tuple[float, float], t_range: tuple[float, float] | None = None,
           resolution: int = 33, t_fixed: float | None = None, tol: float = 1e-3,
           t_tol: float = 1e-3, max_refinements: int = 40) -> GqMaxResult:
    """Maximise G^q over ``p_range`` x ``t_range``.

    A coarse scan over ``resolution`` equally spaced times is followed by a
    golden-section search in t around the best coarse time, stopping once
    the best value moved by less than ``tol`` on two successive refinements
    or the bracket is narrower than ``t_tol``. With ``t_fixed`` only the
    momentum maximisation is done.
    """
    dist_0 = engine.distribution(0.0)

    def at(t):
        return max_over_p(engine.distribution(t), dist_0, p_range)

    if t_fixed is not None:
        g, p = at(float(t_fixed))
        return GqMaxResult(g, p, float(t_fixed), engine.name, resolution,
                           boundary_warning=_on_edge(p, p_range, dist_0.p))

    if t_range is None or resolution < 3:
        raise ValueError("t_range and resolution >= 3 are required without t_fixed")
    times = np.linspace(t_range[0], t_range[1], resolution)
    scan = [at(float(t)) for t in times]
    k = int(np.argmax([g for g, _ in scan]))
    best_g, best_p = scan[k]
    best_t = float(times[k])

    refinements = 0
    if 0 < k < resolution - 1:
        a, b = float(times[k - 1]), float(times[k + 1])
        x1 = b - _GOLDEN * (b - a)
        x2 = a + _GOLDEN * (b - a)
        f1, f2 = at(x1), at(x2)
        calm = 0
        while b - a > t_tol and refinements < max_refinements:
            if f1[0] >= f2[0]:
                b, x2, f2 = x2, x1, f1
                x1 = b - _GOLDEN * (b - a)
                f1 = at(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + _GOLDEN * (b - a)
                f2 = at(x2)
            refinements += 1
            cand_t, cand = (x1, f1) if f1[0] >= f2[0] else (x2, f2)
            change = cand[0] - best_g
            if change > 0:
                best_g, best_p, best_t = cand[0], cand[1], cand_t
            calm = calm + 1 if abs(change) < tol else 0
            if calm >= 2:
                break
    edge_t = k == 0 or k == resolution - 1
    return GqMaxResult(best_g, best_p, best_t, engine.name, resolution,
                       boundary_warning=edge_t or _on_edge(best_p, p_range, dist_0.p),
                       refinements=refinements)


def _on_edge(p: float, p_range, samples) -> bool:
    inside = samples[(samples >= p_range[0]) & (samples <= p_range[1])]
    return bool(inside.size and (p <= inside[0] or p >= inside[-1]))


@dataclass
class DensityComparison:
    p: np.ndarray
    max_rel_error: float
    l2_distance: float

    def to_json(self) -> dict:
        return {"max_rel_error": float(self.max_rel_error),
                "l2_distance": float(self.l2_distance),
                "p_min": float(self.p[0]), "p_max": float(self.p[-1]), "samples": int(self.p.size)}


def compare_densities(test, reference, p_window: tuple[float, float]) -> DensityComparison:
    """Distance of ``test`` from ``reference`` on the reference samples in
    ``p_window``.

    ``l2_distance`` is ``||a - b|| / ||b||`` in L2 over the window and
    ``max_rel_error`` is ``max |a - b| / max |b|``; ``test`` is linearly
    interpolated onto the reference momenta.
    """
    ref = reference.window(*p_window)
    if ref.p.size < 2:
        raise ValueError("p_window contains fewer than two reference samples")
    if ref.p[0] < test.p[0] or ref.p[-1] > test.p[-1]:
        raise GridMismatchError("test distribution does not cover the comparison window")
    a = np.interp(ref.p, test.p, test.density)
    b = ref.density
    num = math.sqrt(np.trapezoid((a - b) ** 2, ref.p))
    den = math.sqrt(np.trapezoid(b * b, ref.p))
    peak = float(np.max(np.abs(b)))
    return DensityComparison(ref.p, float(np.max(np.abs(a - b)) / peak), num / den)


# --- classical ensemble -----------------------------------------------------

@dataclass
class ClassicalEnsemble:
    """Phase-space samples of the packet's Wigner function, evolved exactly
    through the piecewise-constant potential."""
    x: np.ndarray
    p: np.ndarray
    mass: float
    V0: float
    half_width: float

    def momenta_at(self, t: float) -> tuple[np.ndarray, int]:
        """Momenta at time ``t`` and the number of samples left sitting on a
        barrier edge with exactly zero interior momentum."""
        return _evolve_classical(self.x, self.p, t, self.mass, self.V0, self.half_width)


def sample_classical(packet, spec, n_samples: int, seed: int, chunk: int = 65536) -> ClassicalEnsemble:
    """Draw ``n_samples`` phase-space points.

    Chunks of fixed size draw from independent Philox streams spawned from
    ``seed``, so the sample set does not depend on how chunks are scheduled.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    n_chunks = -(-n_samples // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    xs, ps = [], []
    sigma_x = math.sqrt(packet.delta_x)
    for i, child in enumerate(children):
        size = min(chunk, n_samples - i * chunk)
        rng = np.random.Generator(np.random.Philox(child))
        xs.append(rng.normal(packet.x0, sigma_x, size))
        ps.append(rng.normal(packet.p_c, packet.sigma_p, size))
    return ClassicalEnsemble(np.concatenate(xs), np.concatenate(ps), spec.m, spec.V0, 0.5 * spec.d)


def _evolve_classical(x0, p0, t, m, V0, h):
    x = np.array(x0, dtype=float)
    p = np.array(p0, dtype=float)
    remaining = np.full(x.shape, float(t))
    stuck = np.zeros(x.shape, dtype=bool)
    twomV = 2.0 * m * V0
    inside = np.abs(x) < h
    for _ in range(8):
        active = (remaining > 0) & ~stuck
        if not active.any():
            break
        v = p / m
        # time to the next region boundary along the current velocity
        target = np.where(inside, np.where(v > 0, h, -h),
                          np.where(x <= -h, -h, h))
        heading = np.where(inside, v != 0,
                           ((x <= -h) & (v > 0)) | ((x >= h) & (v < 0)))
        with np.errstate(divide="ignore", invalid="ignore"):
            dt_hit = np.where(heading, (target - x) / v, np.inf)
        free = active & (dt_hit >= remaining)
        x[free] += v[free] * remaining[free]
        remaining[free] = 0.0
        hit = active & ~free
        if not hit.any():
            break
        x[hit] = target[hit]
        remaining[hit] -= dt_hit[hit]
        entering = hit & ~inside
        leaving = hit & inside
        p2 = p * p
        over = entering & (p2 > twomV)
        refl = entering & (p2 < twomV)
        tie = entering & (p2 == twomV)
        p[over] = np.sign(p[over]) * np.sqrt(p2[over] - twomV)
        inside = inside | over
        p[refl] = -p[refl]
        p[tie] = 0.0
        stuck |= tie
        p[leaving] = np.sign(p[leaving]) * np.sqrt(p2[leaving] + twomV)
        inside = inside & ~leaving
    return p, int(stuck.sum())


def classical_gq(packet, spec, p: float, t: float, n_samples: int = 100_000,
                 seed: int = 0) -> tuple[float, float]:
    """Classical G(p, t) and its 95 % confidence half-width."""
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    ens = sample_classical(packet, spec, n_samples, seed)
    value, half = classical_gq_grid(ens, [p], [t])
    return float(value[0, 0]), float(half[0, 0])


def classical_gq_grid(ens: ClassicalEnsemble, p_values, t_values):
    """Paired estimate of G over a (t, p) grid; returns ``(value, half_width)``
    arrays of shape ``(len(t), len(p))``."""
    p_values = np.asarray(p_values, dtype=float)
    n = ens.p.size
    above0 = ens.p[:, None] > p_values[None, :]
    values = np.empty((len(t_values), p_values.size))
    halves = np.empty_like(values)
    for i, t in enumerate(t_values):
        pt, _ = ens.momenta_at(float(t))
        diff = (pt[:, None] > p_values[None, :]).astype(float) - above0
        values[i] = diff.mean(axis=0)
        halves[i] = 1.96 * diff.std(axis=0, ddof=1) / math.sqrt(n)
    return values, halves
