"""Command-line front end: ``transient-scatter <task> --config <path>``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 comparison above threshold.
"""
from __future__ import annotations

import argparse
from dataclasses import asdict, dataclass, field
from importlib import resources
import json
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from . import output
from .analytic import (ARGAND_COLUMNS, AnalyticEngine, ExponentOverflowError, GaussianPacket,
                       argand_scan, saddle_data)
from .barrier import (BarrierSpec, NumericalDegeneracyError, SearchRegion,
                      find_resonance_poles, structural_poles)
from .faddeeva import FaddeevaOverflowError, w_eval
from .observables import classical_gq, compare_densities, gq_max
from .reference import (DEFAULT_DT, DEFAULT_N, DEFAULT_X_MAX, DEFAULT_X_MIN, OracleEngine,
                        RejectedConfigurationError, SpatialGrid, grid_problems)
from .units import UnitSystem, validate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_THRESHOLD = 4

ENGINES = ("analytic", "oracle", "both")
PRESETS = ("fig1", "fig5", "fig6")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class GridOverrides:
    n: int = DEFAULT_N
    x_min: float = DEFAULT_X_MIN
    x_max: float = DEFAULT_X_MAX
    dt: float = DEFAULT_DT


@dataclass
class RunConfig:
    units: UnitSystem
    hbar: float
    barrier: BarrierSpec
    packet: GaussianPacket
    engine: str
    grid: GridOverrides
    tasks: dict = field(default_factory=dict)
    grid_overridden: bool = False

    def task(self, name: str) -> dict:
        return dict(self.tasks.get(name) or {})

    def resolved(self) -> dict:
        """Plain-JSON view of every resolved setting, for file headers."""
        return {
            "units": self.units.to_json(),
            "hbar": self.hbar,
            "barrier": {"V0": self.barrier.V0, "d": self.barrier.d, "m": self.barrier.m},
            "packet": {"delta_x": self.packet.delta_x, "p_c": self.packet.p_c,
                       "alpha": self.packet.alpha},
            "engine": self.engine,
            "grid": asdict(self.grid),
            "tasks": self.tasks,
        }


def _number(block: dict, key: str, prefix: str, default=None, positive=True, allow_zero=False):
    if key not in block:
        if default is None:
            raise ConfigError(f"{prefix}.{key}", "missing")
        return default
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{prefix}.{key}", f"expected a finite number, got {value!r}")
    if positive and not (value > 0 or (allow_zero and value == 0)):
        raise ConfigError(f"{prefix}.{key}", f"must be {'non-negative' if allow_zero else 'positive'}, got {value!r}")
    return float(value)


def parse_config(data: dict) -> RunConfig:
    """Validate a configuration mapping, failing on the first bad field."""
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    try:
        units = UnitSystem.from_json(data.get("units", "paper"))
    except ValueError as exc:
        raise ConfigError("units", str(exc)) from None
    ok, problems = validate(units)
    if not ok:
        raise ConfigError("units", problems[0])
    hbar = _number(data, "hbar", "config", default=1.0)

    b = data.get("barrier")
    if not isinstance(b, dict):
        raise ConfigError("barrier", "missing or not an object")
    V0 = _number(b, "V0", "barrier", allow_zero=True)
    d = _number(b, "d", "barrier")
    m = _number(b, "m", "barrier")
    barrier = BarrierSpec(V0=V0, d=d, m=m)

    pk = data.get("packet")
    if not isinstance(pk, dict):
        raise ConfigError("packet", "missing or not an object")
    delta_x = _number(pk, "delta_x", "packet")
    p_c = _number(pk, "p_c", "packet")
    if "alpha" in pk:
        alpha = _number(pk, "alpha", "packet")
    elif "x0" in pk:
        x0 = _number(pk, "x0", "packet", positive=False)
        if x0 >= 0:
            raise ConfigError("packet.x0", "must be negative (packet starts left of the barrier)")
        alpha = -x0 / delta_x
    else:
        raise ConfigError("packet.alpha", "missing (give alpha or x0)")
    packet = GaussianPacket(delta_x=delta_x, p_c=p_c, alpha=alpha, hbar=hbar)
    try:
        packet.check_against(barrier)
    except ValueError as exc:
        raise ConfigError("packet", str(exc)) from None

    engine = data.get("engine", "both")
    if engine not in ENGINES:
        raise ConfigError("engine", f"must be one of {', '.join(ENGINES)}, got {engine!r}")

    g = data.get("grid")
    grid = GridOverrides()
    if g is not None:
        if engine == "analytic":
            raise ConfigError("grid", "grid overrides are only valid with the oracle engine")
        if not isinstance(g, dict):
            raise ConfigError("grid", "not an object")
        unknown = sorted(set(g) - {"n", "x_min", "x_max", "dt"})
        if unknown:
            raise ConfigError(f"grid.{unknown[0]}", "unknown key")
        n = g.get("n", DEFAULT_N)
        if isinstance(n, bool) or not isinstance(n, int) or n < 2 or n & (n - 1):
            raise ConfigError("grid.n", f"must be a power of two, got {n!r}")
        x_min = _number(g, "x_min", "grid", default=DEFAULT_X_MIN, positive=False)
        x_max = _number(g, "x_max", "grid", default=DEFAULT_X_MAX, positive=False)
        if x_max <= x_min:
            raise ConfigError("grid.x_max", "must exceed grid.x_min")
        dt = _number(g, "dt", "grid", default=DEFAULT_DT)
        grid = GridOverrides(n=n, x_min=x_min, x_max=x_max, dt=dt)

    tasks = {k: data[k] for k in ("evolve", "gqmax", "argand", "poles", "compare", "classical")
             if k in data}
    for k, v in tasks.items():
        if not isinstance(v, dict):
            raise ConfigError(k, "task block must be an object")
    return RunConfig(units, hbar, barrier, packet, engine, grid, tasks, grid_overridden=g is not None)


def load_preset(name: str) -> dict:
    text = resources.files("transient_scatter").joinpath("configs", f"{name}.json").read_text()
    return json.loads(text)


def load_config(path: str) -> RunConfig:
    """Read a JSON file; ``preset:<name>`` loads a shipped preset."""
    if path.startswith("preset:"):
        name = path.split(":", 1)[1]
        if name not in PRESETS:
            raise ConfigError("config", f"unknown preset {name!r}")
        data = load_preset(name)
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
    return parse_config(data)


# --- helpers ------------------------------------------------------------------

def _window(block: dict, key: str, default) -> tuple[float, float]:
    value = block.get(key, default)
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ConfigError(key, f"expected [min, max], got {value!r}")
    lo, hi = float(value[0]), float(value[1])
    if not (0 < lo < hi and math.isfinite(hi)):
        raise ConfigError(key, f"need 0 < min < max, got {value!r}")
    return lo, hi


def _time(value, name: str = "t") -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
        raise ConfigError(name, f"must be a non-negative number, got {value!r}")
    return float(value)


def _oracle(cfg: RunConfig, t_final: float) -> OracleEngine:
    grid = SpatialGrid(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n)
    problems = grid_problems(grid, cfg.packet, cfg.barrier, t_final)
    if problems:
        raise RejectedConfigurationError(problems[0])
    return OracleEngine(cfg.packet, cfg.barrier, grid=grid, dt=cfg.grid.dt)


def _engines(cfg: RunConfig, t_final: float) -> list:
    """Configured engines; with ``both`` the analytic engine is evaluated on
    the oracle's momentum grid so the outputs compare sample by sample."""
    oracle = _oracle(cfg, t_final) if cfg.engine in ("oracle", "both") else None
    out = []
    if cfg.engine in ("analytic", "both"):
        p_grid = None
        if oracle is not None:
            p_grid = np.sort(oracle.grid.momenta(cfg.hbar))
            p_grid = p_grid[p_grid > 0]
        out.append(AnalyticEngine(cfg.packet, cfg.barrier, p_grid=p_grid))
    if oracle is not None:
        out.append(oracle)
    return out


def _header(cfg: RunConfig, args, extra: dict | None = None) -> dict:
    h = {"resolved": cfg.resolved(), "task": args.task, "seed": args.seed}
    if extra:
        h.update(extra)
    return h


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def _tlabel(t: float) -> str:
    return format(t, "g")


# --- tasks --------------------------------------------------------------------

def cmd_evolve(cfg: RunConfig, args) -> int:
    block = cfg.task("evolve")
    times = args.times if args.times is not None else block.get("times")
    if not isinstance(times, list) or not times:
        raise ConfigError("evolve.times", "need a non-empty list of times")
    times = sorted(_time(t, "evolve.times") for t in times)
    lo, hi = _window(block, "p_window", [cfg.packet.p_c - 8.0, cfg.packet.p_c + 8.0])
    written = []
    for engine in _engines(cfg, times[-1]):
        for t in times:
            dist = engine.distribution(t).window(lo, hi)
            amp = dist.amplitude
            rows = zip(dist.p, dist.density, amp.real, amp.imag)
            path = Path(args.out) / f"evolve_{engine.name}_t{_tlabel(t)}.csv"
            output.write_csv(path, ("p", "density", "re_psi", "im_psi"), rows,
                             _header(cfg, args, {"engine": engine.name, "t": t}))
            written.append(str(path))
            if args.checkpoint and engine.name == "oracle":
                ck = Path(args.out) / f"state_t{_tlabel(t)}.bin"
                output.save_checkpoint(ck, engine.state(t))
                written.append(str(ck))
    _emit({"written": written})
    return EXIT_OK


def cmd_gqmax(cfg: RunConfig, args) -> int:
    block = cfg.task("gqmax")
    p_range = _window(block, "p_range", [cfg.packet.p_c - 8.0, cfg.packet.p_c + 8.0])
    t_pin = args.t if args.t is not None else block.get("t")
    resolution = int(block.get("resolution", 33))
    if t_pin is not None:
        t_pin = _time(t_pin, "gqmax.t")
        t_range, t_final = None, t_pin
    else:
        t_range = _window(block, "t_range", [1e-3, 5.0])
        t_final = t_range[1]
    records = []
    for engine in _engines(cfg, t_final):
        res = gq_max(engine, p_range, t_range=t_range, resolution=resolution, t_fixed=t_pin)
        rec = res.to_json()
        n_cl = int(cfg.task("classical").get("n_samples", 0))
        if n_cl:
            g_cl, half = classical_gq(cfg.packet, cfg.barrier, res.p_star, res.t_star,
                                      n_samples=n_cl, seed=args.seed)
            rec["classical_g"] = g_cl
            rec["classical_half_width"] = half
        records.append(rec)
        output.write_json(Path(args.out) / f"gqmax_{engine.name}.json", rec,
                          _header(cfg, args))
    _emit({"results": records})
    return EXIT_OK


def cmd_argand(cfg: RunConfig, args) -> int:
    if cfg.engine == "oracle":
        raise ConfigError("engine", "the Argand decomposition exists only for the analytic engine")
    block = cfg.task("argand")
    t = _time(args.t if args.t is not None else block.get("t", 0.0), "argand.t")
    lo, hi = _window(block, "p_window", [cfg.packet.p_c - 0.5, cfg.packet.p_c + 0.5])
    if args.p_min is not None or args.p_max is not None:
        lo, hi = _window({"p_window": [args.p_min if args.p_min is not None else lo,
                                       args.p_max if args.p_max is not None else hi]},
                         "p_window", None)
    count = args.count if args.count is not None else block.get("count", 101)
    if isinstance(count, bool) or not isinstance(count, int) or count < 2:
        raise ConfigError("argand.count", f"must be an integer >= 2, got {count!r}")
    scan = argand_scan(cfg.packet, cfg.barrier, t, np.linspace(lo, hi, count))
    path = Path(args.out) / f"argand_t{_tlabel(t)}.csv"
    output.write_csv(path, ARGAND_COLUMNS, scan.rows(), _header(cfg, args, {"t": t}))
    _emit({"written": [str(path)], "rows": count})
    return EXIT_OK


POLE_COLUMNS = ("kind", "label", "re_p", "im_p", "abs_omega", "side")


def cmd_poles(cfg: RunConfig, args) -> int:
    block = cfg.task("poles")
    t = _time(args.t if args.t is not None else block.get("t", 0.0), "poles.t")
    region = args.region if args.region is not None else block.get("region")
    if (not isinstance(region, (list, tuple)) or len(region) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in region)):
        raise ConfigError("poles.region", f"expected [re_min, re_max, im_min, im_max], got {region!r}")
    try:
        rect = SearchRegion(*map(float, region))
    except ValueError as exc:
        raise ConfigError("poles.region", str(exc)) from None
    if rect.im_max > 0:
        raise ConfigError("poles.region", "must lie in the lower half plane (im_max <= 0)")
    p_ref = float(block.get("p", cfg.packet.p_c))
    resonances = find_resonance_poles(cfg.barrier, cfg.hbar, rect)
    sd = saddle_data(cfg.packet, cfg.barrier, t)
    nan = float("nan")
    rows = [("resonance", f"r{i}", z.value.real, z.value.imag, z.abs_omega, "")
            for i, z in enumerate(resonances)]
    rows += [("structural", sp.label, sp.value.real, sp.value.imag, nan, sp.side.value)
             for sp in structural_poles(p_ref)]
    rows.append(("saddle", "s", sd.s.real, sd.s.imag, nan, ""))
    extra = {"t": t, "saddle": [sd.s.real, sd.s.imag], "slope": sd.slope,
             "sdp_angle": sd.sdp_angle, "p_structural": p_ref}
    path = Path(args.out) / f"poles_t{_tlabel(t)}.csv"
    output.write_csv(path, POLE_COLUMNS, rows, _header(cfg, args, extra))
    summary = {"written": [str(path)], "resonances": len(resonances),
               "max_residual": max((z.abs_omega for z in resonances), default=0.0), **extra}
    _emit(summary)
    return EXIT_OK


def cmd_compare(cfg: RunConfig, args) -> int:
    if cfg.engine != "both":
        raise ConfigError("engine", "compare requires engine 'both'")
    block = cfg.task("compare")
    t = _time(args.t if args.t is not None else block.get("t", 0.0), "compare.t")
    window = _window(block, "p_window", [25.0, 32.0])
    threshold = float(block.get("threshold", 0.1))
    oracle = _oracle(cfg, t)
    ref = oracle.distribution(t)
    # analytic amplitudes on the oracle momenta of the window
    p = ref.window(*window).p
    analytic = AnalyticEngine(cfg.packet, cfg.barrier, p_grid=p).distribution(t)
    cmp_ = compare_densities(analytic, ref, window)
    report = {"t": t, **cmp_.to_json(), "threshold": threshold,
              "pass": bool(cmp_.l2_distance <= threshold)}
    output.write_json(Path(args.out) / f"compare_t{_tlabel(t)}.json", report, _header(cfg, args))
    _emit(report)
    return EXIT_OK if report["pass"] else EXIT_THRESHOLD


def cmd_w_eval(args) -> int:
    res = w_eval(complex(args.re, args.im))
    _emit({"re": args.re, "im": args.im, "w_re": res.w.real, "w_im": res.w.imag,
           "est_error": res.est_error})
    return EXIT_OK


TASKS = {"evolve": cmd_evolve, "gqmax": cmd_gqmax, "argand": cmd_argand,
         "poles": cmd_poles, "compare": cmd_compare}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transient-scatter",
                                     description="Transient momentum interference in barrier scattering.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="task", required=True, metavar="{evolve,gqmax,argand,poles,compare}")

    def common(p, needs_config=True):
        p.add_argument("--config", required=needs_config,
                       help="JSON config path or preset:<fig1|fig5|fig6>")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=_u64, default=0)
        p.add_argument("--engine", choices=ENGINES, help="override the configured engine")

    p = sub.add_parser("evolve", help="momentum densities at given times")
    common(p)
    p.add_argument("--times", type=float, nargs="*")
    p.add_argument("--checkpoint", action="store_true", help="also dump oracle grid states")

    p = sub.add_parser("gqmax", help="maximum of G^q over (p, t)")
    common(p)
    p.add_argument("--t", type=float, help="pin the time")

    p = sub.add_parser("argand", help="incident/transmitted decomposition")
    common(p)
    p.add_argument("--t", type=float)
    p.add_argument("--p-min", type=float)
    p.add_argument("--p-max", type=float)
    p.add_argument("--count", type=int)

    p = sub.add_parser("poles", help="resonance and structural poles, saddle data")
    common(p)
    p.add_argument("--t", type=float)
    p.add_argument("--region", type=float, nargs=4, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))

    p = sub.add_parser("compare", help="analytic versus oracle density")
    common(p)
    p.add_argument("--t", type=float)

    p = sub.add_parser("w-eval")
    common(p, needs_config=False)
    p.add_argument("--re", type=float, required=True)
    p.add_argument("--im", type=float, required=True)
    # keep the debugging task out of the help listing
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "w-eval"]
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.task == "w-eval":
            return cmd_w_eval(args)
        cfg = load_config(args.config)
        if args.engine is not None:
            if args.engine == "analytic" and cfg.grid_overridden:
                raise ConfigError("engine", "grid overrides are only valid with the oracle engine")
            cfg.engine = args.engine
        return TASKS[args.task](cfg, args)
    except (ConfigError, RejectedConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ExponentOverflowError, FaddeevaOverflowError, NumericalDegeneracyError,
            ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
