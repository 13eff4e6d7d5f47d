"""Drive cycles: current profiles on a uniform time grid.

Positive current discharges the cell. Besides CSV ingestion, a few synthetic
generators stand in for standard drive cycles, and ``concatenate`` builds
cascaded training profiles with constant-current charge segments between the
parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, read_csv_columns
from .errors import ParameterError, ParseError

__all__ = [
    "DriveCycle",
    "constant_current",
    "pulse_train",
    "random_walk",
    "concatenate",
    "load_cycle_csv",
    "save_cycle_csv",
]

_DT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DriveCycle:
    timestamps: np.ndarray
    current: np.ndarray
    name: str = "cycle"

    def __post_init__(self):
        t = np.array(self.timestamps, dtype=float)
        i = np.array(self.current, dtype=float)
        if t.ndim != 1 or t.shape != i.shape:
            raise ParameterError("timestamps and current must be 1-D arrays of equal length")
        if t.size < 2:
            raise ParameterError("a drive cycle needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(i))):
            raise ParameterError("drive cycle contains non-finite values")
        steps = np.diff(t)
        if steps[0] <= 0 or np.max(np.abs(steps - steps[0])) > _DT_TOL:
            raise ParameterError("timestamps must be strictly increasing with a uniform step")
        t.flags.writeable = False
        i.flags.writeable = False
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "current", i)

    @property
    def dt(self) -> float:
        return float(self.timestamps[1] - self.timestamps[0])

    def __len__(self) -> int:
        return self.timestamps.size

    @classmethod
    def from_current(cls, current, dt: float = 1.0, name: str = "cycle", t0: float = 0.0) -> "DriveCycle":
        current = np.asarray(current, dtype=float)
        return cls(t0 + dt * np.arange(current.size), current, name)

    def slice(self, start: int, stop: int | None = None, name: str | None = None) -> "DriveCycle":
        return DriveCycle(self.timestamps[start:stop], self.current[start:stop], name or self.name)


def constant_current(amps: float, duration: float, dt: float = 1.0, name: str = "cc") -> DriveCycle:
    n = int(round(duration / dt))
    return DriveCycle.from_current(np.full(max(n, 2), float(amps)), dt, name)


def pulse_train(
    amps: float,
    on_s: float,
    off_s: float,
    n_pulses: int,
    dt: float = 1.0,
    rest_amps: float = 0.0,
    name: str = "pulses",
) -> DriveCycle:
    on = int(round(on_s / dt))
    off = int(round(off_s / dt))
    period = np.concatenate([np.full(on, float(amps)), np.full(off, float(rest_amps))])
    return DriveCycle.from_current(np.tile(period, n_pulses), dt, name)


def random_walk(
    duration: float,
    capacity_ah: float,
    seed: int,
    dt: float = 1.0,
    c_rate_range: tuple[float, float] = (-1.0, 3.0),
    mean_c_rate: float = 0.3,
    hold_s: tuple[float, float] = (5.0, 40.0),
    ramp_s: float = 4.0,
    name: str = "walk",
) -> DriveCycle:
    """Seeded drive-cycle-like profile of held C-rate levels joined by ramps.

    Levels are drawn uniformly in ``c_rate_range`` and then shifted so the
    profile averages ``mean_c_rate``. Holds last a uniform random time in
    ``hold_s``; a moving average of width ``ramp_s`` smooths the steps.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration / dt))
    lo, hi = c_rate_range
    levels = []
    total = 0
    while total < n:
        hold = max(1, int(round(rng.uniform(*hold_s) / dt)))
        levels.append(np.full(hold, rng.uniform(lo, hi)))
        total += hold
    c_rate = np.concatenate(levels)[:n]
    width = max(1, int(round(ramp_s / dt)))
    if width > 1:
        padded = np.concatenate([np.full(width - 1, c_rate[0]), c_rate])
        c_rate = np.convolve(padded, np.ones(width) / width, mode="valid")
    c_rate = np.clip(c_rate - c_rate.mean() + mean_c_rate, lo, hi)
    return DriveCycle.from_current(c_rate * capacity_ah, dt, name)


def concatenate(
    cycles,
    charge_amps: float = 0.0,
    charge_duration: float = 0.0,
    name: str = "cascade",
) -> DriveCycle:
    """Join cycles end to end with a constant-current charge between them.

    ``charge_amps`` is the magnitude of the charging current; it is applied
    with negative sign (charging) for ``charge_duration`` seconds between
    consecutive cycles. All parts must share one dt.
    """
    cycles = list(cycles)
    if not cycles:
        raise ParameterError("nothing to concatenate")
    dt = cycles[0].dt
    if any(abs(c.dt - dt) > _DT_TOL for c in cycles):
        raise ParameterError("all cycles must share the same dt")
    n_charge = int(round(charge_duration / dt))
    parts = []
    for k, c in enumerate(cycles):
        if k > 0 and n_charge > 0:
            parts.append(np.full(n_charge, -abs(charge_amps)))
        parts.append(c.current)
    return DriveCycle.from_current(np.concatenate(parts), dt, name, t0=float(cycles[0].timestamps[0]))


_CYCLE_HEADER = ("t_s", "current_a")


def load_cycle_csv(path, name: str | None = None) -> DriveCycle:
    cols = read_csv_columns(path, _CYCLE_HEADER)
    try:
        return DriveCycle(cols["t_s"], cols["current_a"], name or Path(path).stem)
    except ParameterError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_cycle_csv(cycle: DriveCycle, path) -> None:
    rows = [",".join(_CYCLE_HEADER)]
    rows += [f"{t!r},{i!r}" for t, i in zip(cycle.timestamps.tolist(), cycle.current.tolist())]
    atomic_write_text(path, "\n".join(rows) + "\n")
