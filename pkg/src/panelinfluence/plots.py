"""Dependency-free SVG rendering of the leverage-residual and heat plots.

Output is a pure function of the report: elements are emitted in a fixed
order and every number is formatted with a fixed precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .influence import BL, GL, NORMAL, VO, InfluenceReport

HEAT_KINDS = ("joint_influence_heat", "joint_effect_heat",
              "conditional_influence_heat", "conditional_effect_heat")
FILENAMES = {
    "leverage_vs_residual": "lvr2.svg",
    "joint_influence_heat": "joint.svg",
    "joint_effect_heat": "joint_effect.svg",
    "conditional_influence_heat": "cond.svg",
    "conditional_effect_heat": "cond_effect.svg",
}
TITLES = {
    "joint_influence_heat": "Joint influence C_ij (Cook's distance on diagonal)",
    "joint_effect_heat": "Joint effect K_j|i",
    "conditional_influence_heat": "Conditional influence C_i(j)",
    "conditional_effect_heat": "Conditional effect M_i(j)",
}
# dark blue -> light blue -> pink -> red
PALETTE = ((8, 48, 107), (107, 174, 214), (252, 187, 161), (203, 24, 29))
NA_FILL = "url(#na-hatch)"
CLIP_PERCENTILE = 99.0


@dataclass(frozen=True)
class PlotArtifact:
    kind: str
    columns: tuple[str, ...]
    table: tuple[tuple, ...]
    svg: str

    @property
    def filename(self) -> str:
        return FILENAMES[self.kind]


def _f(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.3g}"


def color(t: float) -> str:
    """Hex colour for ``t`` in [0, 1] on the blue-to-red palette."""
    t = min(max(t, 0.0), 1.0) * (len(PALETTE) - 1)
    k = min(int(t), len(PALETTE) - 2)
    w = t - k
    rgb = [round(a + (b - a) * w) for a, b in zip(PALETTE[k], PALETTE[k + 1])]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _ticks(hi: float, n: int = 5) -> list[float]:
    if hi <= 0:
        return [0.0]
    raw = hi / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    return [i * step for i in range(int(hi / step + 1e-9) + 1)]


def _header(width: int, height: int) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
    ]


def emit_leverage_residual_plot(report: InfluenceReport) -> PlotArtifact:
    """Scatter of ``(O_i, L_i)`` with average and cutoff lines; anomalies labelled."""
    c = report.cutoffs
    O, L = report.outlyingness, report.leverage
    W, H, left, right, top, bottom = 640, 520, 70, 30, 40, 60
    pw, ph = W - left - right, H - top - bottom
    xmax = 1.08 * max(float(np.nanmax(O)), c.residual_cut)
    ymax = 1.08 * max(float(np.nanmax(L)), c.leverage_cut)
    sx = lambda v: left + pw * v / xmax  # noqa: E731
    sy = lambda v: top + ph * (1 - v / ymax)  # noqa: E731

    out = _header(W, H)
    out.append(f'<text x="{W // 2}" y="20" text-anchor="middle" font-size="14">'
               f'Leverage vs normalised residual squared (N={report.n_units})</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>')
    for t in _ticks(xmax):
        x = _f(sx(t))
        out.append(f'<line x1="{x}" y1="{top + ph}" x2="{x}" y2="{top + ph + 4}" stroke="#000000"/>')
        out.append(f'<text x="{x}" y="{top + ph + 16}" text-anchor="middle">{_label(t)}</text>')
    for t in _ticks(ymax):
        y = _f(sy(t))
        out.append(f'<line x1="{left - 4}" y1="{y}" x2="{left}" y2="{y}" stroke="#000000"/>')
        out.append(f'<text x="{left - 7}" y="{y}" text-anchor="end" dominant-baseline="middle">{_label(t)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{H - 15}" text-anchor="middle">Normalised residual squared O_i</text>')
    out.append(f'<text x="18" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2})">Leverage L_i</text>')

    lines = (
        ("mean-residual", "v", c.mean_residual, "#d62728", ""),
        ("mean-leverage", "h", c.mean_leverage, "#d62728", ""),
        ("residual-cutoff", "v", c.residual_cut, "#d62728", ' stroke-dasharray="6 4"'),
        ("leverage-cutoff", "h", c.leverage_cut, "#d62728", ' stroke-dasharray="6 4"'),
    )
    for name, orient, v, col, dash in lines:
        if orient == "v":
            x = _f(sx(v))
            out.append(f'<line class="ref {name}" x1="{x}" y1="{top}" x2="{x}" y2="{top + ph}" '
                       f'stroke="{col}"{dash}/>')
        else:
            y = _f(sy(v))
            out.append(f'<line class="ref {name}" x1="{left}" y1="{y}" x2="{left + pw}" y2="{y}" '
                       f'stroke="{col}"{dash}/>')

    fills = {NORMAL: "#1f4e99", VO: "#ff7f0e", GL: "#2ca02c", BL: "#d62728"}
    table = []
    for uid, o, lev, cls in zip(report.unit_ids, O, L, report.classification):
        table.append((uid, float(o), float(lev), cls))
        out.append(f'<circle class="point" cx="{_f(sx(o))}" cy="{_f(sy(lev))}" r="3" fill="{fills[cls]}"/>')
    for uid, o, lev, cls in table:
        if cls != NORMAL:
            out.append(f'<text class="unit-label" x="{_f(sx(o) + 5)}" y="{_f(sy(lev) - 5)}">'
                       f'{escape(str(uid))} ({cls})</text>')
    out.append("</svg>")
    return PlotArtifact("leverage_vs_residual", ("id", "O", "L", "class"), tuple(table), "\n".join(out) + "\n")


def _heat(kind: str, report: InfluenceReport, m: np.ndarray, cutoff_label: str) -> PlotArtifact:
    ids = report.unit_ids
    N = len(ids)
    finite = m[np.isfinite(m)]
    vmax = float(np.percentile(finite, CLIP_PERCENTILE)) if finite.size else 1.0
    if not vmax > 0:
        vmax = float(finite.max()) if finite.size and finite.max() > 0 else 1.0

    plot = 520
    left, top = 60, 40
    cell = plot / N
    W, H = left + plot + 130, top + plot + 50
    out = _header(W, H)
    out.append('<defs><pattern id="na-hatch" width="6" height="6" patternUnits="userSpaceOnUse" '
               'patternTransform="rotate(45)"><rect width="6" height="6" fill="#ffffff"/>'
               '<line x1="0" y1="0" x2="0" y2="6" stroke="#555555" stroke-width="2"/></pattern>')
    out.append('<linearGradient id="scale" x1="0" y1="1" x2="0" y2="0">' + "".join(
        f'<stop offset="{i / 10:.1f}" stop-color="{color(i / 10)}"/>' for i in range(11)) + "</linearGradient></defs>")
    out.append(f'<text x="{left + plot / 2}" y="20" text-anchor="middle" font-size="14">{escape(TITLES[kind])}</text>')

    table = []
    for a in range(N):
        for b in range(N):
            v = float(m[a, b])
            ok = not math.isnan(v)
            table.append((ids[a], ids[b], v if ok else None, ok))
            fill = color(v / vmax) if ok else NA_FILL
            cls = "cell" if ok else "cell na"
            out.append(f'<rect class="{cls}" x="{_f(left + b * cell)}" y="{_f(top + a * cell)}" '
                       f'width="{_f(cell)}" height="{_f(cell)}" fill="{fill}"/>')

    step = max(1, math.ceil(N / 20))
    for a in range(0, N, step):
        pos = _f(top + (a + 0.5) * cell)
        out.append(f'<text x="{left - 4}" y="{pos}" text-anchor="end" dominant-baseline="middle">{escape(str(ids[a]))}</text>')
        pos = _f(left + (a + 0.5) * cell)
        out.append(f'<text x="{pos}" y="{top + plot + 14}" text-anchor="middle">{escape(str(ids[a]))}</text>')
    out.append(f'<text x="{left + plot / 2}" y="{top + plot + 34}" text-anchor="middle">unit j</text>')
    out.append(f'<text x="14" y="{top + plot / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + plot / 2})">unit i</text>')

    lx, lh = left + plot + 25, plot * 0.6
    out.append(f'<rect class="legend" x="{lx}" y="{top}" width="18" height="{_f(lh)}" fill="url(#scale)" stroke="#000000"/>')
    out.append(f'<text x="{lx + 24}" y="{_f(top + lh)}" dominant-baseline="middle">0</text>')
    out.append(f'<text x="{lx + 24}" y="{top}" dominant-baseline="middle">{_label(vmax)}</text>')
    out.append(f'<text x="{lx}" y="{_f(top + lh + 18)}">scale clipped at p{CLIP_PERCENTILE:g}</text>')
    cut = report.active_cutoff if kind in ("joint_influence_heat", "conditional_influence_heat") else 1.0
    if 0 <= cut <= vmax:
        cy = _f(top + lh * (1 - cut / vmax))
        out.append(f'<line class="cutoff" x1="{lx - 4}" y1="{cy}" x2="{lx + 22}" y2="{cy}" stroke="#000000" stroke-width="2"/>')
    out.append(f'<text class="cutoff-label" x="{lx}" y="{_f(top + lh + 34)}">{escape(cutoff_label)} = {_label(cut)}</text>')
    n_na = sum(1 for row in table if not row[3])
    out.append(f'<rect x="{lx}" y="{_f(top + lh + 46)}" width="12" height="12" fill="{NA_FILL}" stroke="#000000"/>')
    out.append(f'<text x="{lx + 18}" y="{_f(top + lh + 56)}">n/a ({n_na})</text>')
    out.append("</svg>")
    return PlotArtifact(kind, ("i", "j", "value", "available"), tuple(table), "\n".join(out) + "\n")


def emit_influence_heat_plots(report: InfluenceReport) -> list[PlotArtifact]:
    """Four N x N heat plots: joint/conditional influence and their effects."""
    mode = f"cutoff ({report.cutoff_mode})"
    return [
        _heat("joint_influence_heat", report, report.joint, mode),
        _heat("joint_effect_heat", report, report.joint_effect, "reference"),
        _heat("conditional_influence_heat", report, report.conditional, mode),
        _heat("conditional_effect_heat", report, report.conditional_effect, "mask/boost boundary"),
    ]
