"""Serialization of influence reports and end-to-end orchestration."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .dgp import DgpConfig, generate, write_simulation
from .errors import ValidationError
from .influence import CUTOFF_MODES, NORMALIZATIONS, Cutoffs, InfluenceReport, analyze
from .panel import PanelDataset, PanelSchema, _coerce_ids, load_csv

logger = logging.getLogger(__name__)

MATRIX_FILES = {"C_ij": "C_ij.csv", "K": "K.csv", "C_cond": "C_cond.csv", "M": "M.csv"}
EMIT_KINDS = ("json", "csv", "svg")


def _num(v: float):
    v = float(v)
    return None if np.isnan(v) else v


def _rows(m: np.ndarray) -> list[list]:
    return [[_num(v) for v in row] for row in m]


def _arr(rows) -> np.ndarray:
    return np.array([[np.nan if v is None else v for v in row] for row in rows], dtype=np.float64)


def report_to_dict(r: InfluenceReport) -> dict:
    ids = list(r.unit_ids)
    return {
        "meta": {
            "n": r.n_units, "n_obs": r.n_obs, "t_min": r.t_min, "t_max": r.t_max,
            "k": r.k, "K": r.K, "nu1": r.nu1, "nu2": r.nu2, "s2": r.s2,
            "beta_hat": [float(b) for b in r.beta_hat],
            "normalization": r.normalization, "cutoff_mode": r.cutoff_mode,
        },
        "units": [
            {"id": u, "L": _num(L), "O": _num(O), "C_ii": _num(c), "class": cls}
            for u, L, O, c, cls in zip(ids, r.leverage, r.outlyingness, r.cook, r.classification)
        ],
        "matrices": {"ids": ids, **{name: _rows(m) for name, m in r.matrices().items()}},
        "cutoffs": r.cutoffs.to_dict(),
    }


def report_to_json(r: InfluenceReport) -> str:
    # float repr is the shortest string that round-trips the 64-bit value
    return json.dumps(report_to_dict(r), separators=(",", ":"), allow_nan=False) + "\n"


def report_from_dict(d: dict) -> InfluenceReport:
    meta, units, mats = d["meta"], d["units"], d["matrices"]
    col = lambda key: np.array([np.nan if u[key] is None else u[key] for u in units], dtype=np.float64)  # noqa: E731
    return InfluenceReport(
        unit_ids=tuple(u["id"] for u in units),
        leverage=col("L"), outlyingness=col("O"), cook=col("C_ii"),
        joint=_arr(mats["C_ij"]), joint_effect=_arr(mats["K"]),
        conditional=_arr(mats["C_cond"]), conditional_effect=_arr(mats["M"]),
        cutoffs=Cutoffs(**d["cutoffs"]),
        classification=tuple(u["class"] for u in units),
        k=meta["k"], beta_hat=np.array(meta["beta_hat"], dtype=np.float64), s2=meta["s2"],
        nu1=meta["nu1"], nu2=meta["nu2"], t_min=meta["t_min"], t_max=meta["t_max"],
        n_obs=meta["n_obs"], normalization=meta["normalization"], cutoff_mode=meta["cutoff_mode"],
    )


def report_from_json(text: str) -> InfluenceReport:
    return report_from_dict(json.loads(text))


def _cell(v: float) -> str:
    return "NA" if np.isnan(v) else repr(float(v))


def write_matrix_csv(path: str | os.PathLike, ids, m: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", *ids])
        for u, row in zip(ids, m):
            w.writerow([u, *(_cell(v) for v in row)])


def read_matrix_csv(path: str | os.PathLike) -> tuple[tuple, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    ids = tuple(_coerce_ids(rows[0][1:]))
    m = np.array([[np.nan if c == "NA" else float(c) for c in r[1:]] for r in rows[1:]], dtype=np.float64)
    if tuple(_coerce_ids([r[0] for r in rows[1:]])) != ids or m.shape != (len(ids), len(ids)):
        raise ValidationError(f"{path}: matrix is not square with matching row and column ids",
                              module="report")
    return ids, m


def write_units_csv(path: str | os.PathLike, r: InfluenceReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "L", "O", "C_ii", "class"])
        for row in zip(r.unit_ids, r.leverage, r.outlyingness, r.cook, r.classification):
            w.writerow([row[0], _cell(row[1]), _cell(row[2]), _cell(row[3]), row[4]])


@dataclass
class AnalysisConfig:
    """What to analyse and what to write.

    Exactly one of ``input_path`` (with ``schema``) and ``dgp`` is set.
    """

    input_path: str | None = None
    schema: PanelSchema | None = None
    dgp: DgpConfig | None = None
    cutoff_mode: str = "f_median"
    normalization: str = "global"
    out_dir: str = "out"
    emit: frozenset = field(default_factory=lambda: frozenset(EMIT_KINDS))

    def __post_init__(self):
        if (self.input_path is None) == (self.dgp is None):
            raise ValidationError("exactly one input source is required: a CSV path or a DGP config",
                                  module="report")
        if self.input_path is not None and self.schema is None:
            raise ValidationError("a CSV input needs a column schema", module="report")
        if self.cutoff_mode not in CUTOFF_MODES:
            raise ValidationError(f"--cutoff must be one of {CUTOFF_MODES}", module="report")
        if self.normalization not in NORMALIZATIONS:
            raise ValidationError(f"--normalization must be one of {NORMALIZATIONS}", module="report")
        self.emit = frozenset(self.emit)
        unknown = self.emit - set(EMIT_KINDS)
        if unknown:
            raise ValidationError(f"unknown --emit kinds: {sorted(unknown)}", module="report")

    def load(self) -> PanelDataset:
        if self.dgp is not None:
            return generate(self.dgp)
        return load_csv(self.input_path, self.schema)


def write_report(r: InfluenceReport, out_dir: str, emit) -> list[str]:
    from .plots import emit_influence_heat_plots, emit_leverage_residual_plot

    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "json" in emit:
        p = os.path.join(out_dir, "report.json")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(r))
        written.append(p)
    if "csv" in emit:
        p = os.path.join(out_dir, "units.csv")
        write_units_csv(p, r)
        written.append(p)
        for name, m in r.matrices().items():
            p = os.path.join(out_dir, MATRIX_FILES[name])
            write_matrix_csv(p, r.unit_ids, m)
            written.append(p)
    if "svg" in emit:
        for art in [emit_leverage_residual_plot(r), *emit_influence_heat_plots(r)]:
            p = os.path.join(out_dir, art.filename)
            with open(p, "w", encoding="utf-8") as fh:
                fh.write(art.svg)
            written.append(p)
    return written


def run_analysis(config: AnalysisConfig, *, write_panel: bool = False) -> tuple[InfluenceReport, list[str]]:
    """Load or simulate, analyse, and write the requested outputs."""
    written = []
    if write_panel and config.dgp is not None:
        written.extend(write_simulation(config.dgp, config.out_dir))
    data = config.load()
    logger.info("analysing %d units, %d observations, k=%d", data.n_units, data.n_obs, data.k)
    r = analyze(data, normalization=config.normalization, cutoff_mode=config.cutoff_mode)
    written.extend(write_report(r, config.out_dir, config.emit))
    return r, written
