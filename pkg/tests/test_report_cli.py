import json
import re

import numpy as np
import pytest

from panelinfluence import (AnalysisConfig, DgpConfig, PanelDataset, PanelSchema, ValidationError, analyze,
                            emit_influence_heat_plots, emit_leverage_residual_plot, generate, preset,
                            report_from_json, report_to_json, run_analysis)
from panelinfluence.cli import main
from panelinfluence.influence import NORMAL
from panelinfluence.plots import NA_FILL, color
from panelinfluence.report import read_matrix_csv, write_report

from conftest import random_panel


@pytest.fixture(scope="module")
def figure_report():
    return analyze(generate(DgpConfig(seed=1, contamination=preset("figure"))))


def singular_pair_panel():
    """k=2 panel whose second regressor varies only in units 3 and 6."""
    rng = np.random.default_rng(0)
    N, T = 8, 4
    X = rng.normal(size=(N * T, 2))
    for u in range(N):
        if u not in (2, 5):
            X[u * T:(u + 1) * T, 1] = 0.0
    y = X @ [1.0, 2.0] + rng.normal(size=N * T)
    return PanelDataset(tuple(range(1, N + 1)), (tuple(range(T)),) * N, y, X, x_names=("x1", "x2"))


# ---------------------------------------------------------------- serialization

def test_json_round_trip_is_exact(figure_report):
    text = report_to_json(figure_report)
    back = report_from_json(text)
    assert back.equals(figure_report)
    assert report_to_json(back) == text
    d = json.loads(text)
    assert set(d) == {"meta", "units", "matrices", "cutoffs"}
    assert {"n", "t_min", "t_max", "k", "K", "nu1", "nu2", "s2", "beta_hat"} <= set(d["meta"])
    assert set(d["units"][0]) == {"id", "L", "O", "C_ii", "class"}
    assert len(d["matrices"]["C_ij"]) == 100 and len(d["matrices"]["M"][0]) == 100
    assert {"f_median", "unity", "four_over_n"} <= set(d["cutoffs"])


def test_unavailable_cells_round_trip_as_null(tmp_path):
    r = analyze(singular_pair_panel())
    assert r.unavailable()["C_ij"] == 2
    text = report_to_json(r)
    assert "NaN" not in text and report_from_json(text).equals(r)
    write_report(r, str(tmp_path), {"csv"})
    ids, m = read_matrix_csv(tmp_path / "C_ij.csv")
    assert np.array_equal(m, r.joint, equal_nan=True) and ids == r.unit_ids
    assert (tmp_path / "C_ij.csv").read_text().count("NA") == 2


def test_csv_matrices_reload_exactly(tmp_path, figure_report):
    write_report(figure_report, str(tmp_path), {"csv"})
    for name, fname in (("C_ij", "joint"), ("K", "joint_effect"), ("C_cond", "conditional"),
                        ("M", "conditional_effect")):
        ids, m = read_matrix_csv(tmp_path / f"{name}.csv")
        assert ids == figure_report.unit_ids
        assert np.array_equal(m, getattr(figure_report, fname), equal_nan=True)
    lines = (tmp_path / "units.csv").read_text().splitlines()
    assert lines[0] == "id,L,O,C_ii,class" and len(lines) == 101


# ---------------------------------------------------------------- plots

def test_leverage_residual_plot(figure_report):
    art = emit_leverage_residual_plot(figure_report)
    assert art.filename == "lvr2.svg" and len(art.table) == 100
    assert art.svg.count('class="point"') == 100
    assert len(re.findall(r'<line class="ref ', art.svg)) == 4
    labels = re.findall(r'class="unit-label"[^>]*>([^<]*)<', art.svg)
    assert {"10 (BL)", "20 (GL)", "30 (VO)"} <= set(labels)
    c = figure_report.cutoffs
    rows = {row[0]: row for row in art.table}
    quadrant = lambda u: (rows[u][2] > c.leverage_cut, rows[u][1] > c.residual_cut)  # noqa: E731
    assert quadrant(10) == (True, True) and quadrant(20) == (True, False) and quadrant(30) == (False, True)
    assert emit_leverage_residual_plot(figure_report).svg == art.svg


def _cells(svg):
    return re.findall(r'<rect class="(cell(?: na)?)"[^>]*fill="([^"]+)"', svg)


def test_heat_plots(figure_report):
    arts = emit_influence_heat_plots(figure_report)
    assert [a.filename for a in arts] == ["joint.svg", "joint_effect.svg", "cond.svg", "cond_effect.svg"]
    N = figure_report.n_units
    for a in arts:
        assert len(a.table) == N * N and len(_cells(a.svg)) == N * N
        assert 'class="legend"' in a.svg and 'class="cutoff-label"' in a.svg
    joint = arts[0]
    diag = [row[2] for row in joint.table if row[0] == row[1]]
    assert diag == list(figure_report.cook)
    cond = _cells(arts[2].svg)
    assert all(cond[i * N + i][1] == color(0.0) for i in range(N))
    assert f"= {figure_report.active_cutoff:.3g}" in arts[0].svg
    assert [a.svg for a in emit_influence_heat_plots(figure_report)] == [a.svg for a in arts]


def test_heat_plot_marks_unavailable_cells():
    r = analyze(singular_pair_panel())
    for a, (name, m) in zip(emit_influence_heat_plots(r), r.matrices().items()):
        n_na = int(np.isnan(m).sum())
        cells = _cells(a.svg)
        assert sum(1 for cls, fill in cells if cls == "cell na" and fill == NA_FILL) == n_na
        assert sum(1 for row in a.table if not row[3]) == n_na
        assert f"n/a ({n_na})" in a.svg
    assert r.unavailable()["C_ij"] == 2


# ---------------------------------------------------------------- orchestration

def test_run_analysis_figure_preset(tmp_path):
    cfg = AnalysisConfig(dgp=DgpConfig(seed=2, contamination=preset("figure")), out_dir=str(tmp_path))
    r, paths = run_analysis(cfg, write_panel=True)
    cls = dict(zip(r.unit_ids, r.classification))
    assert (cls[10], cls[20], cls[30]) == ("BL", "GL", "VO")
    names = sorted(p.rsplit("/", 1)[1] for p in paths)
    assert names == sorted(["panel.csv", "panel.manifest.json", "report.json", "units.csv", "C_ij.csv",
                            "K.csv", "C_cond.csv", "M.csv", "lvr2.svg", "joint.svg", "joint_effect.svg",
                            "cond.svg", "cond_effect.svg"])


def test_analysis_config_validation():
    with pytest.raises(ValidationError, match="exactly one"):
        AnalysisConfig()
    with pytest.raises(ValidationError):
        AnalysisConfig(dgp=DgpConfig(), cutoff_mode="median")
    with pytest.raises(ValidationError):
        AnalysisConfig(dgp=DgpConfig(), emit={"png"})


def test_clean_panel_cells_stay_below_unity(tmp_path):
    hits = 0
    for s in range(20):
        path = tmp_path / f"p{s}.csv"
        generate(DgpConfig(N=20, seed=s)).to_csv(path)
        cfg = AnalysisConfig(input_path=str(path), schema=PanelSchema("unit", "time", "y", ("x",)),
                             out_dir=str(tmp_path / "o"), emit={"json"})
        r, _ = run_analysis(cfg)
        hits += bool(np.nanmax(r.joint) <= 1.0)
    assert hits >= 19


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="2k/N leverage cutoff flags clean units in ~11% of clean N=20 panels")
def test_clean_n20_panels_all_normal_monte_carlo():
    hits = sum(all(c == NORMAL for c in analyze(generate(DgpConfig(N=20, seed=s))).classification)
               for s in range(100))
    assert hits >= 95


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="2k/N leverage cutoff flags clean units in ~11% of clean N=20 panels")
def test_clean_scatter_has_no_labels_monte_carlo():
    clean = 0
    for s in range(100):
        art = emit_leverage_residual_plot(analyze(generate(DgpConfig(N=20, seed=s))))
        clean += 'class="unit-label"' not in art.svg
    assert clean >= 95


# ---------------------------------------------------------------- CLI

def test_cli_all_writes_outputs(tmp_path, capsys):
    assert main(["all", "--seed", "3", "--preset", "figure", "--out", str(tmp_path)]) == 0
    printed = capsys.readouterr().out.split()
    assert len(printed) == 13 and (tmp_path / "lvr2.svg").exists()


def test_cli_simulate_then_influence_and_plot(tmp_path):
    sim = tmp_path / "sim"
    assert main(["simulate", "--n", "31", "--t", "10", "--preset", "figure", "--seed", "1",
                 "--out", str(sim)]) == 0
    out = tmp_path / "rep"
    assert main(["influence", "--input", str(sim / "panel.csv"), "--cutoff", "unity",
                 "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["C_cond.csv", "C_ij.csv", "K.csv", "M.csv",
                                                     "report.json", "units.csv"]
    r = report_from_json((out / "report.json").read_text())
    assert r.cutoff_mode == "unity" and r.n_units == 31
    plots = tmp_path / "plots"
    assert main(["plot", "--report", str(out / "report.json"), "--out", str(plots)]) == 0
    assert len(list(plots.glob("*.svg"))) == 5
    assert "cutoff (unity) = 1" in (plots / "joint.svg").read_text()


def test_cli_fit(tmp_path):
    assert main(["fit", "--seed", "0", "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "fit.json").read_text())
    assert d["k"] == 1 and d["nu1"] == 2 and d["nu2"] == 99 and abs(d["beta_hat"][0] - 0.5) < 0.1


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"]


def test_cli_single_unit_is_a_validation_error(tmp_path, capsys):
    p = tmp_path / "one.csv"
    p.write_text("unit,time,y,x\n1,1,0.5,1.0\n1,2,0.7,2.0\n1,3,0.1,0.0\n")
    assert main(["influence", "--input", str(p), "--out", str(tmp_path / "o")]) == 2
    err = _error(capsys)
    assert err["module"] == "panel" and err["exit_code"] == 2 and "2 units" in err["message"]


def test_cli_missing_file_is_io_error(tmp_path, capsys):
    assert main(["influence", "--input", str(tmp_path / "nope.csv")]) == 4
    assert _error(capsys)["exit_code"] == 4


def test_cli_singular_design_is_numerical_error(tmp_path, capsys):
    d = random_panel(0, N=6, T=4, k=1)
    rows = ["unit,time,y,x1,x2"] + [f"{u},{t},{float(y)!r},{float(x)!r},{float(2 * x)!r}" for (u, t), y, x in
                                    zip(zip(*d.long_columns()), d.y, d.X[:, 0])]
    p = tmp_path / "sing.csv"
    p.write_text("\n".join(rows) + "\n")
    assert main(["influence", "--input", str(p), "--x-cols", "x1,x2", "--out", str(tmp_path / "o")]) == 3
    err = _error(capsys)
    assert err["type"] == "SingularityError" and err["module"] == "estimator"


def test_cli_rejects_mixed_sources(tmp_path, capsys):
    assert main(["influence", "--input", "a.csv", "--preset", "figure", "--out", str(tmp_path)]) == 2
