"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines are
written straight to the terminal (not captured).
"""

import hashlib
import time

import numpy as np
import pytest

from panelinfluence import (DgpConfig, brute_force_refit, classify_units, f_median_cutoff, fit,
                            generate, hat_blocks, leave_one_out, leave_two_out, normalized_residuals, preset,
                            unit_leverage, unit_outlyingness, within_group_transform)
from panelinfluence.cli import main
from panelinfluence.influence import BL, GL, VO, Cutoffs, analyze, build_report, sweep_for

from conftest import random_panel, rel_err

SEEDS = range(20)


@pytest.fixture
def report(pytestconfig):
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")

    def emit(n, ok, detail):
        with capman.global_and_fixture_disabled():
            print(f"\n[acceptance] criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok
    return emit


def panels():
    return [random_panel(s, N=12, T=5, k=1 + s % 3) for s in SEEDS]


def prepared(d):
    dm = within_group_transform(d)
    fe = fit(dm)
    return dm, fe, hat_blocks(fe, dm)


def test_criterion_1_leave_one_out_oracle(report):
    t0 = time.perf_counter()
    worst = 0.0
    for d in panels():
        _, fe, hat = prepared(d)
        for i in range(d.n_units):
            worst = max(worst, rel_err(leave_one_out(fe, hat, i).beta, brute_force_refit(d, [d.unit_ids[i]])))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 5
    assert report(1, ok, f"max rel err {worst:.2e} (tol 1e-8), {elapsed:.2f}s incl. refits (limit 5s)")


def test_criterion_2_leave_two_out_oracle(report):
    t0 = time.perf_counter()
    worst = swap = 0.0
    n_pairs = 0
    for d in panels():
        _, fe, hat = prepared(d)
        for i in range(d.n_units):
            for j in range(i + 1, d.n_units):
                a = leave_two_out(fe, hat, i, j).beta
                b = leave_two_out(fe, hat, j, i).beta
                worst = max(worst, rel_err(a, brute_force_refit(d, [d.unit_ids[i], d.unit_ids[j]])))
                swap = max(swap, rel_err(b, a))
                n_pairs += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and swap <= 1e-10 and elapsed < 30 and n_pairs == 20 * 66
    assert report(2, ok, f"{n_pairs} pairs, max rel err {worst:.2e} (tol 1e-8), "
                         f"swap {swap:.2e} (tol 1e-10), {elapsed:.2f}s (limit 30s)")


def test_criterion_3_analytic_identities(report):
    lev = shares = cdiag = sym = 0.0
    for d in panels():
        dm, fe, hat, sweep = sweep_for(d)
        r = build_report(fe, hat, sweep, dm, normalization="period")
        lev = max(lev, abs(r.leverage.mean() - d.k / d.n_units))
        _, times = d.long_columns()
        u = normalized_residuals(fe, dm, "period")
        t = np.asarray(times)
        shares = max(shares, max(abs(u[t == p].sum() - 1) for p in set(times)))
        cdiag = max(cdiag, float(np.abs(np.diag(r.conditional)).max()))
        sym = max(sym, float(np.abs(r.joint - r.joint.T).max()))
    ok = lev <= 1e-12 and shares <= 1e-12 and cdiag == 0.0 and sym <= 1e-10
    assert report(3, ok, f"mean leverage {lev:.1e}, period shares {shares:.1e} (period normalization), "
                         f"C_i(j) diag {cdiag}, C_ij asym {sym:.1e}")


def test_criterion_4_figure_preset_detection(report):
    cls_hits = cook_hits = mask_hits = 0
    for s in range(50):
        r = analyze(generate(DgpConfig(seed=s, contamination=preset("figure"))))
        idx = {u: r.unit_ids.index(u) for u in (10, 20, 30)}
        cls_hits += tuple(r.classification[idx[u]] for u in (10, 20, 30)) == (BL, GL, VO)
        cook_hits += all(r.cook[idx[u]] > max(1.0, r.cutoffs.f_median) for u in (10, 20))
        clean = [i for i, u in enumerate(r.unit_ids) if u not in (10, 20, 30)]
        mask_hits += bool(np.nanmax(r.conditional_effect[np.ix_(clean, [idx[10], idx[20]])]) >= 1)
    ok = cls_hits >= 45 and cook_hits >= 45 and mask_hits >= 40
    assert report(4, ok, f"classified {cls_hits}/50 (need 45), C_ii > max(1, F-median) {cook_hits}/50 "
                         f"(need 45), masked clean unit {mask_hits}/50 (need 40)")


def test_criterion_5_cutoff_arithmetic(report):
    m = f_median_cutoff(2, 99)
    closed = 99 * (2 ** (2 / 99) - 1) / 2
    one = f_median_cutoff(1, 1)
    ok = 0.6975 <= m <= 0.6985 and abs(m - closed) < 1e-10 and abs(m - 0.694) < 0.01 and abs(one - 1) <= 1e-9
    assert report(5, ok, f"F-median(2,99) = {m:.10f} (closed form {closed:.10f}, target 0.694 +- 0.01), "
                         f"F-median(1,1) = {one:.12f}")


def test_criterion_6_uncontaminated_recovery(report):
    betas, all_normal = [], 0
    for s in range(100):
        d = generate(DgpConfig(seed=s))
        dm = within_group_transform(d)
        fe = fit(dm)
        betas.append(fe.beta_hat[0])
        cut = Cutoffs.for_panel(d.n_units, fe.k, *fe.dof)
        labels = classify_units(unit_leverage(hat_blocks(fe, dm)), unit_outlyingness(fe, dm), cut)
        all_normal += bool(np.all(labels == "Normal"))
    betas = np.asarray(betas)
    gap, bound = abs(betas.mean() - 0.5), 3 * betas.std(ddof=1) / 10
    ok = gap < bound and all_normal >= 95
    assert report(6, ok, f"|mean b1 - 0.5| = {gap:.2e} < {bound:.2e}: {gap < bound}; "
                         f"all-Normal seeds {all_normal}/100 (need 95)")


def _max_shift(N, seed):
    d = generate(DgpConfig(N=N, T=20, seed=seed))
    _, fe, hat = prepared(d)
    return max(np.linalg.norm(fe.beta_hat - leave_one_out(fe, hat, i).beta) for i in range(N))


def test_criterion_7_deletion_shift_shrinks_with_n(report):
    wins = sum(_max_shift(1000, s) < _max_shift(100, s) for s in range(100))
    assert report(7, wins >= 95, f"max_i |b - b_(i)| smaller at N=1000 in {wins}/100 replications (need 95)")


def test_criterion_8_cli_determinism(report, tmp_path, capsys):
    digests = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["all", "--seed", "42", "--preset", "figure", "--out", str(out)]) == 0
        digests.append({p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(out.iterdir())})
    capsys.readouterr()
    kinds = {n.rsplit(".", 1)[1] for n in digests[0]}
    ok = digests[0] == digests[1] and {"json", "csv", "svg"} <= kinds
    assert report(8, ok, f"{len(digests[0])} files byte-identical across runs: {digests[0] == digests[1]}")
