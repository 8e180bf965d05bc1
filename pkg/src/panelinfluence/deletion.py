"""Leave-one-out and leave-two-out coefficient updates.

Both updates reuse the cached ``(X'X)^{-1} X_j'`` products held by
:class:`~panelinfluence.estimator.HatBlocks`; only ``T_i x T_i`` and
``T_j x T_j`` systems are solved per deletion. The pair update starts from
the single-unit result for ``i`` and adds the partitioned-inverse correction
for ``j``, so one row of the sweep shares ``M_i^{-1} u_i`` and
``M_i^{-1} H_ij`` across every partner ``j``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import SingularBlockError
from .estimator import FixedEffectsFit, HatBlocks, fit as _fit
from .panel import PanelDataset, within_group_transform

logger = logging.getLogger(__name__)

#: Blocks with a condition number above this are treated as singular.
SINGULAR_CONDITION = 1e12
#: Blocks with a condition number above this are flagged but still used.
WARN_CONDITION = 1e8


@dataclass(frozen=True, eq=False)
class DeletionResult:
    kind: str                 # "L1O" or "L2O"
    units: tuple[int, ...]    # positional unit indices
    beta: np.ndarray
    schur_ok: bool = True
    ill_conditioned: bool = False
    condition: float = float("nan")


def _cond(a: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        c = np.linalg.cond(a)
    return np.where(np.isfinite(c), c, np.inf)


class _RowUpdate:
    """Quantities shared by every pair ``(i, .)``: built once per row.

    The ``(T_i, n)`` products against the full hat row are only needed for
    pair corrections, so they are built on first use.
    """

    def __init__(self, fit: FixedEffectsFit, hat: HatBlocks, i: int):
        self.i = i
        self._hat = hat
        self._Mi = hat.M(i)
        self.condition = float(_cond(self._Mi))
        self.ok = self.condition <= SINGULAR_CONDITION
        if not self.ok:
            return
        self.Gi = hat.G(i)
        self.Minv_u = np.linalg.solve(self._Mi, fit.residuals[fit.block(i)])
        self.beta = fit.beta_hat - self.Gi @ self.Minv_u

    @cached_property
    def Hrow(self) -> np.ndarray:
        return self._hat.H_row(self.i)

    @cached_property
    def Minv_Hrow(self) -> np.ndarray:
        # M_i^{-1} H_i. against every observation, shape (T_i, n)
        return np.linalg.solve(self._Mi, self.Hrow)


def _require_row(row: _RowUpdate, hat: HatBlocks) -> None:
    if not row.ok:
        uid = hat.demeaned.unit_ids[row.i]
        raise SingularBlockError(
            f"M_i = I - H_i is singular for unit {uid!r} (condition number {row.condition:.3e}); "
            "the unit is a perfectly leveraged block",
            units=(row.i,), condition=row.condition,
        )


def leave_one_out(fit: FixedEffectsFit, hat: HatBlocks, i: int) -> DeletionResult:
    """Coefficients re-estimated without the full history of unit ``i``."""
    row = _RowUpdate(fit, hat, i)
    _require_row(row, hat)
    return DeletionResult("L1O", (i,), row.beta, True,
                          row.condition > WARN_CONDITION, row.condition)


class _PairBatch:
    """Pair corrections for one row ``i`` against a set of equal-length partners."""

    def __init__(self, fit: FixedEffectsFit, hat: HatBlocks, row: _RowUpdate, js: np.ndarray):
        T = int(hat.offsets[js[0] + 1] - hat.offsets[js[0]])
        idx = hat.offsets[js][:, None] + np.arange(T)           # (m, T)
        Hij = row.Hrow[:, idx]                                   # (T_i, m, T)
        W = row.Minv_Hrow[:, idx]                                # M_i^{-1} H_ij
        Mj = np.eye(T)[None] - np.stack([hat.H(j) for j in js])  # (m, T, T)
        schur = Mj - np.einsum("amt,ams->mts", Hij, W)
        r = np.einsum("amt,a->mt", Hij, row.Minv_u) + fit.residuals[idx]
        left = np.einsum("ka,ams->mks", row.Gi, W) + np.moveaxis(hat._G[:, idx], 1, 0)
        self.condition = _cond(schur)
        ok = self.condition <= SINGULAR_CONDITION
        beta = np.full((len(js), fit.k), np.nan)
        if ok.any():
            z = np.linalg.solve(schur[ok], r[ok][..., None])[..., 0]
            beta[ok] = row.beta - np.einsum("mks,ms->mk", left[ok], z)
        self.ok = ok
        self.beta = beta


def _pair_groups(hat: HatBlocks) -> list[np.ndarray]:
    periods = np.diff(hat.offsets)
    return [np.flatnonzero(periods == T) for T in np.unique(periods)]


def leave_two_out(fit: FixedEffectsFit, hat: HatBlocks, i: int, j: int) -> DeletionResult:
    """Coefficients re-estimated without the full histories of units ``i`` and ``j``."""
    if i == j:
        raise ValueError("leave_two_out needs two distinct units")
    row = _RowUpdate(fit, hat, i)
    _require_row(row, hat)
    batch = _PairBatch(fit, hat, row, np.array([j]))
    cond = float(batch.condition[0])
    if not batch.ok[0]:
        ids = hat.demeaned.unit_ids
        raise SingularBlockError(
            f"Schur complement M_j - H_ij' M_i^{{-1}} H_ij is singular for units "
            f"({ids[i]!r}, {ids[j]!r}) (condition number {cond:.3e})",
            units=(i, j), condition=cond,
        )
    flagged = row.condition > WARN_CONDITION or cond > WARN_CONDITION
    return DeletionResult("L2O", (i, j), batch.beta[0], True, flagged, max(cond, row.condition))


@dataclass(frozen=True, eq=False)
class DeletionSweep:
    """Every single and pair deletion of a fit.

    ``pairs[i, j]`` holds the pair estimate computed along row ``i``
    (single-unit update for ``i``, then the correction for ``j``); the
    diagonal holds the single-unit estimates. Cells whose required inverse
    does not exist are NaN and marked in ``unavailable``.
    """

    loo: np.ndarray            # (N, k)
    pairs: np.ndarray          # (N, N, k)
    unavailable: np.ndarray    # (N, N) bool; diagonal refers to the single deletion
    ill_conditioned: np.ndarray  # (N, N) bool

    @property
    def n_units(self) -> int:
        return int(self.loo.shape[0])


def deletion_sweep(fit: FixedEffectsFit, hat: HatBlocks, units: Iterable[int] | None = None) -> DeletionSweep:
    """Run every single deletion and every ordered pair deletion.

    ``units`` restricts the rows computed (all by default); the remaining
    rows are left unavailable.
    """
    N, k = hat.n_units, fit.k
    loo = np.full((N, k), np.nan)
    pairs = np.full((N, N, k), np.nan)
    unavailable = np.ones((N, N), dtype=bool)
    flagged = np.zeros((N, N), dtype=bool)
    groups = _pair_groups(hat)
    rows = range(N) if units is None else units
    for i in rows:
        row = _RowUpdate(fit, hat, i)
        if not row.ok:
            logger.info("unit %r: M_i singular, row left unavailable", hat.demeaned.unit_ids[i])
            continue
        loo[i] = row.beta
        pairs[i, i] = row.beta
        unavailable[i, i] = False
        flagged[i, i] = row.condition > WARN_CONDITION
        for js in groups:
            js = js[js != i]
            if js.size == 0:
                continue
            b = _PairBatch(fit, hat, row, js)
            pairs[i, js] = b.beta
            unavailable[i, js] = ~b.ok
            flagged[i, js] = b.ok & ((b.condition > WARN_CONDITION) | (row.condition > WARN_CONDITION))
    n_na = int(unavailable.sum())
    if n_na and units is None:
        logger.warning("%d deletion cells unavailable (singular blocks)", n_na)
    return DeletionSweep(loo, pairs, unavailable, flagged)


def brute_force_refit(data: PanelDataset, excluded: Iterable = ()) -> np.ndarray:
    """Re-run the transform and the fit with the listed units (by id) removed."""
    drop = {data.unit_index(u) for u in excluded}
    sub = data.without(drop) if drop else data
    return _fit(within_group_transform(sub)).beta_hat
