"""Scaled unit system for ultracold rubidium barrier scattering.

Every conversion factor is expressed in atomic units, where hbar = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math


@dataclass(frozen=True)
class UnitSystem:
    energy_unit: float
    momentum_unit: float
    length_unit: float
    mass_unit: float
    time_unit: float
    hbar_scaled: float = field(init=False)

    def __post_init__(self):
        for name in ("energy_unit", "momentum_unit", "length_unit", "mass_unit", "time_unit"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        object.__setattr__(self, "hbar_scaled", 1.0 / (self.momentum_unit * self.length_unit))

    def to_json(self) -> dict:
        return {
            "e_u": self.energy_unit,
            "p_u": self.momentum_unit,
            "l_u": self.length_unit,
            "m_u": self.mass_unit,
            "t_u": self.time_unit,
        }

    @classmethod
    def from_json(cls, data) -> "UnitSystem":
        """Build from ``"paper"``, ``{"paper": true}`` or the five factors."""
        if data == "paper" or (isinstance(data, dict) and data.get("paper") is True):
            return paper_units()
        if not isinstance(data, dict):
            raise ValueError("units must be 'paper' or an object with e_u, p_u, l_u, m_u, t_u")
        missing = [k for k in ("e_u", "p_u", "l_u", "m_u", "t_u") if k not in data]
        if missing:
            raise ValueError(f"units: missing key {missing[0]!r}")
        return cls(
            energy_unit=float(data["e_u"]),
            momentum_unit=float(data["p_u"]),
            length_unit=float(data["l_u"]),
            mass_unit=float(data["m_u"]),
            time_unit=float(data["t_u"]),
        )


def paper_units() -> UnitSystem:
    """Scaled units for ultracold rubidium (factors in a.u.)."""
    return UnitSystem(
        energy_unit=1e-13,
        momentum_unit=1e-4,
        length_unit=2e6,
        mass_unit=1e5,
        time_unit=2e15,
    )


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def validate(system: UnitSystem, rtol: float = 1e-12) -> tuple[bool, list[str]]:
    """Check the four consistency relations between the unit factors.

    Returns ``(ok, diagnostics)`` where diagnostics names every violated
    relation.
    """
    for name in ("energy_unit", "momentum_unit", "length_unit", "mass_unit", "time_unit"):
        if not getattr(system, name) > 0:
            raise ValueError(f"{name} must be positive")
    e, p, l, m, t = (system.energy_unit, system.momentum_unit, system.length_unit,
                     system.mass_unit, system.time_unit)
    problems = []
    if not _close(p * p / m, e, rtol):
        problems.append("kinetic-energy consistency: p_u**2 / m_u != e_u")
    if not _close(e * t, p * l, rtol):
        problems.append("action consistency: e_u * t_u != p_u * l_u")
    if not _close(p * t / m, l, rtol):
        problems.append("velocity consistency: p_u * t_u / m_u != l_u")
    if not _close(system.hbar_scaled, 1.0 / (p * l), rtol):
        problems.append("hbar consistency: hbar_scaled != 1 / (p_u * l_u)")
    return not problems, problems


def momentum_from_energy(energy: float, mass: float) -> float:
    return math.sqrt(2.0 * mass * energy)


def energy_from_momentum(momentum: float, mass: float) -> float:
    return momentum * momentum / (2.0 * mass)
