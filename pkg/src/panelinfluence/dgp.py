"""Synthetic fixed-effects panels with planted anomalous units.

Base model::

    y_it = beta0 + beta1 * x_it + alpha_i + eps_it
    x_it ~ N(0, 1),  alpha_i ~ U[0, 20),  eps_it ~ N(0, 1)

Randomness comes from ``numpy.random.PCG64`` streams spawned from a single
``SeedSequence(seed)`` in a fixed order: ``x``, ``alpha``, ``eps``,
``contamination``. Adding or changing contamination never perturbs the
base draws. Contamination draws are made per cell, entry by entry in the
order the entries are listed, each entry drawing its ``y`` shifts before
its ``x`` replacements.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ValidationError
from .panel import PanelDataset

KINDS = ("VO", "GL", "BL")
PRESETS = ("figure", "appendix")
STREAMS = ("x", "alpha", "eps", "contamination")


@dataclass(frozen=True)
class Contamination:
    """One planted anomalous unit.

    ``y_shift`` is ``(mean, sd)`` of a normal draw added to ``y``;
    ``x_replace`` is ``(mean, sd)`` of a normal draw replacing ``x``.
    """

    unit: int
    kind: str
    periods: tuple[int, ...]
    y_shift: tuple[float, float] | None = None
    x_replace: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"anomaly kind must be one of {KINDS}, got {self.kind!r}", module="dgp")
        object.__setattr__(self, "periods", tuple(sorted(set(self.periods))))
        if not self.periods:
            raise ValidationError(f"unit {self.unit}: no contaminated periods", module="dgp")

    @classmethod
    def standard(cls, unit: int, kind: str, periods) -> "Contamination":
        """VO: y += N(50,1); GL: x <- N(15,1); BL: y += N(50,1), x <- N(10,1)."""
        if kind not in KINDS:
            raise ValidationError(f"anomaly kind must be one of {KINDS}, got {kind!r}", module="dgp")
        shift = {"VO": (50.0, 1.0), "GL": None, "BL": (50.0, 1.0)}[kind]
        repl = {"VO": None, "GL": (15.0, 1.0), "BL": (10.0, 1.0)}[kind]
        return cls(unit, kind, tuple(periods), shift, repl)


@dataclass(frozen=True)
class ContaminationSpec:
    entries: tuple[Contamination, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        units = [e.unit for e in self.entries]
        dup = {u for u in units if units.count(u) > 1}
        if dup:
            raise ValidationError(f"units contaminated more than once: {sorted(dup)}", module="dgp")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def kinds(self) -> dict[int, str]:
        return {e.unit: e.kind for e in self.entries}


def preset(name: str) -> ContaminationSpec:
    """Named contamination designs.

    ``figure``: unit 10 BL, 20 GL, 30 VO, contaminated in periods 1..10.
    ``appendix``: units 10/40 VO, 20/50 GL, 30/60 BL; periods 1..10 for
    units 10-30 and 1..5 for units 40-60.
    """
    if name == "figure":
        p = range(1, 11)
        return ContaminationSpec((
            Contamination.standard(10, "BL", p),
            Contamination.standard(20, "GL", p),
            Contamination.standard(30, "VO", p),
        ))
    if name == "appendix":
        long, short = range(1, 11), range(1, 6)
        return ContaminationSpec((
            Contamination.standard(10, "VO", long),
            Contamination.standard(20, "GL", long),
            Contamination.standard(30, "BL", long),
            Contamination.standard(40, "VO", short),
            Contamination.standard(50, "GL", short),
            Contamination.standard(60, "BL", short),
        ))
    raise ValidationError(f"unknown preset {name!r}; expected one of {PRESETS}", module="dgp")


@dataclass(frozen=True)
class DgpConfig:
    N: int = 100
    T: int = 20
    beta0: float = 1.0
    beta1: float = 0.5
    seed: int = 0
    alpha_low: float = 0.0
    alpha_high: float = 20.0
    contamination: ContaminationSpec = field(default_factory=ContaminationSpec)

    def __post_init__(self):
        if self.N < 2 or self.T < 2:
            raise ValidationError(f"need N >= 2 and T >= 2, got N={self.N}, T={self.T}", module="dgp")
        for e in self.contamination.entries:
            if not 1 <= e.unit <= self.N:
                raise ValidationError(f"contamination references unit {e.unit}, panel has units 1..{self.N}",
                                      module="dgp")
            bad = [t for t in e.periods if not 1 <= t <= self.T]
            if bad:
                raise ValidationError(f"unit {e.unit}: periods {bad} outside 1..{self.T}", module="dgp")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["contamination"] = [asdict(e) for e in self.contamination.entries]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DgpConfig":
        d = dict(d)
        entries = tuple(
            Contamination(e["unit"], e["kind"], tuple(e["periods"]),
                          tuple(e["y_shift"]) if e.get("y_shift") else None,
                          tuple(e["x_replace"]) if e.get("x_replace") else None)
            for e in d.pop("contamination", ()))
        return cls(contamination=ContaminationSpec(entries), **d)


def _streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.PCG64(s)) for name, s in zip(STREAMS, children)}


def generate_arrays(config: DgpConfig) -> tuple[np.ndarray, np.ndarray]:
    """``(x, y)`` as (N, T) arrays, contamination applied."""
    g = _streams(config.seed)
    N, T = config.N, config.T
    x = g["x"].standard_normal((N, T))
    alpha = g["alpha"].uniform(config.alpha_low, config.alpha_high, N)
    eps = g["eps"].standard_normal((N, T))
    y = config.beta0 + config.beta1 * x + alpha[:, None] + eps
    rng = g["contamination"]
    for e in config.contamination.entries:
        i = e.unit - 1
        cols = np.asarray(e.periods) - 1
        if e.y_shift is not None:
            y[i, cols] += rng.normal(e.y_shift[0], e.y_shift[1], cols.size)
        if e.x_replace is not None:
            x[i, cols] = rng.normal(e.x_replace[0], e.x_replace[1], cols.size)
    return x, y


def generate(config: DgpConfig) -> PanelDataset:
    """Synthetic panel with unit ids 1..N and periods 1..T."""
    x, y = generate_arrays(config)
    N, T = config.N, config.T
    return PanelDataset(
        tuple(range(1, N + 1)),
        tuple(tuple(range(1, T + 1)) for _ in range(N)),
        y.reshape(-1), x.reshape(-1, 1), y_name="y", x_names=("x",),
    )


def write_simulation(config: DgpConfig, out_dir: str | os.PathLike,
                     stem: str = "panel") -> tuple[str, str]:
    """Write ``<stem>.csv`` and a ``<stem>.manifest.json`` sidecar."""
    data = generate(config)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    man_path = os.path.join(out_dir, f"{stem}.manifest.json")
    data.to_csv(csv_path)
    manifest = {
        "generator": "numpy.random.PCG64 via SeedSequence.spawn",
        "streams": list(STREAMS),
        "seed": config.seed,
        "config": config.to_dict(),
        "columns": {"unit": "unit", "time": "time", "y": "y", "x": ["x"]},
    }
    with open(man_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, man_path
