"""Command-line front end.

Exit codes: 0 ok, 2 validation, 3 numerical (singularity), 4 I/O.
Failures print a one-line JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .dgp import PRESETS, ContaminationSpec, DgpConfig, preset, write_simulation
from .errors import PanelInfluenceError, SingularityError, ValidationError
from .estimator import fit as fe_fit
from .influence import CUTOFF_MODES, NORMALIZATIONS
from .panel import PanelSchema, within_group_transform
from .report import EMIT_KINDS, AnalysisConfig, report_from_json, run_analysis, write_report

logger = logging.getLogger("panelinfluence")


def _add_source(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("input")
    g.add_argument("--input", help="long-format panel CSV")
    g.add_argument("--unit-col", default="unit")
    g.add_argument("--time-col", default="time")
    g.add_argument("--y-col", default="y")
    g.add_argument("--x-cols", default="x", help="comma-separated regressor columns")
    s = p.add_argument_group("simulation (used when --input is absent)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--preset", choices=(*PRESETS, "none"), default=None)
    s.add_argument("--n", type=int, default=100, help="units")
    s.add_argument("--t", type=int, default=20, help="periods")
    s.add_argument("--beta0", type=float, default=1.0)
    s.add_argument("--beta1", type=float, default=0.5)


def _add_analysis(p: argparse.ArgumentParser, emit_default: str) -> None:
    p.add_argument("--cutoff", choices=CUTOFF_MODES, default="f_median",
                   help="cutoff annotated on the influence heat plots")
    p.add_argument("--normalization", choices=NORMALIZATIONS, default="global",
                   help="scope of the squared-residual normalisation")
    p.add_argument("--emit", default=emit_default, help=f"comma-separated subset of {','.join(EMIT_KINDS)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panelinfluence",
                                     description="Influence diagnostics for fixed-effects panel regressions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic panel and its manifest")
    _add_source(p)
    p.add_argument("--out", default="out")

    p = sub.add_parser("fit", help="within-group estimates")
    _add_source(p)
    p.add_argument("--out", default="out")

    p = sub.add_parser("influence", help="influence report (JSON and CSV)")
    _add_source(p)
    _add_analysis(p, "json,csv")
    p.add_argument("--out", default="out")

    p = sub.add_parser("plot", help="SVG plots, from a saved report or a fresh analysis")
    _add_source(p)
    _add_analysis(p, "svg")
    p.add_argument("--report", help="report.json written by a previous run")
    p.add_argument("--out", default="out")

    p = sub.add_parser("all", help="simulate or load, analyse, and write every output")
    _add_source(p)
    _add_analysis(p, ",".join(EMIT_KINDS))
    p.add_argument("--out", default="out")
    return parser


def _dgp(args) -> DgpConfig:
    spec = ContaminationSpec() if args.preset in (None, "none") else preset(args.preset)
    return DgpConfig(N=args.n, T=args.t, beta0=args.beta0, beta1=args.beta1,
                     seed=args.seed, contamination=spec)


def _config(args) -> AnalysisConfig:
    if args.input is not None and args.preset is not None:
        raise ValidationError("give either --input or simulation flags, not both", module="cli")
    emit = frozenset(e.strip() for e in getattr(args, "emit", "json").split(",") if e.strip())
    if args.input is not None:
        schema = PanelSchema(args.unit_col, args.time_col, args.y_col,
                             tuple(c.strip() for c in args.x_cols.split(",") if c.strip()))
        return AnalysisConfig(input_path=args.input, schema=schema, out_dir=args.out, emit=emit,
                              cutoff_mode=getattr(args, "cutoff", "f_median"),
                              normalization=getattr(args, "normalization", "global"))
    return AnalysisConfig(dgp=_dgp(args), out_dir=args.out, emit=emit,
                          cutoff_mode=getattr(args, "cutoff", "f_median"),
                          normalization=getattr(args, "normalization", "global"))


def _cmd_simulate(args) -> list[str]:
    if args.input is not None:
        raise ValidationError("simulate does not take --input", module="cli")
    return list(write_simulation(_dgp(args), args.out))


def _cmd_fit(args) -> list[str]:
    cfg = _config(args)
    data = cfg.load()
    fe = fe_fit(within_group_transform(data))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "fit.json")
    payload = {
        "n": data.n_units, "n_obs": data.n_obs, "k": fe.k, "K": fe.K,
        "regressors": list(data.x_names),
        "beta_hat": [float(b) for b in fe.beta_hat],
        "s2": fe.s2, "nu1": fe.dof[0], "nu2": fe.dof[1], "condition": fe.condition,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    return [path]


def _cmd_plot(args) -> list[str]:
    if args.report is None:
        return run_analysis(_config(args))[1]
    with open(args.report, encoding="utf-8") as fh:
        r = report_from_json(fh.read())
    return write_report(r, args.out, {"svg"})


def _cmd_analysis(args) -> list[str]:
    return run_analysis(_config(args), write_panel=args.command == "all")[1]


COMMANDS = {"simulate": _cmd_simulate, "fit": _cmd_fit, "influence": _cmd_analysis,
            "plot": _cmd_plot, "all": _cmd_analysis}


def _fail(kind: str, module: str, message: str, code: int) -> int:
    err = {"error": {"type": kind, "module": module, "message": message, "exit_code": code}}
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        written = COMMANDS[args.command](args)
    except (ValidationError, SingularityError, PanelInfluenceError) as exc:
        return _fail(type(exc).__name__, exc.module, str(exc), exc.exit_code)
    except OSError as exc:
        return _fail(type(exc).__name__, "io", str(exc), 4)
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
