"""Unit-wise leverage, outlyingness and pairwise influence measures.

All pairwise measures are quadratic forms in coefficient deltas scaled by
``(s2 * K)^{-1}`` where ``K = k + 1`` counts the (annihilated) constant.
Cells whose deletion estimate does not exist are NaN, never zero.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import betainc

from .deletion import DeletionSweep, deletion_sweep
from .errors import SingularityError, ValidationError
from .estimator import MAX_CONDITION, FixedEffectsFit, HatBlocks, fit as _fit, hat_blocks
from .panel import DemeanedPanel, PanelDataset, within_group_transform

logger = logging.getLogger(__name__)

NORMAL, VO, GL, BL = "Normal", "VO", "GL", "BL"
LABELS = (NORMAL, VO, GL, BL)
MASK, BOOST = "Mask", "Boost"
CUTOFF_MODES = ("f_median", "unity", "four_over_n")
NORMALIZATIONS = ("global", "period")
ZERO_COOK_RTOL = 1e-14


def unit_leverage(hat: HatBlocks) -> np.ndarray:
    """``L_i = tr(H_i)``; the values sum to ``k``."""
    return hat.traces()


def normalized_residuals(fit: FixedEffectsFit, demeaned: DemeanedPanel,
                         normalization: str = "global") -> np.ndarray:
    """Squared residual shares ``u*_it``, one per stacked observation.

    ``"period"`` divides by the sum of squares over the units observed in the
    same period, so the shares of each period add to one. ``"global"``
    divides by the total residual sum of squares of the panel.
    """
    if normalization not in NORMALIZATIONS:
        raise ValidationError(f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}",
                              module="influence")
    u2 = fit.residuals ** 2
    total = float(u2.sum())
    scale = float(demeaned.y_tilde @ demeaned.y_tilde)
    if total == 0.0 or total <= 1e-24 * scale:
        raise SingularityError("exact fit: all residuals are zero, outlyingness is undefined",
                               module="influence")
    if normalization == "global":
        return u2 / total
    index: dict = {}
    period = np.array([index.setdefault(t, len(index)) for ts in demeaned.times for t in ts])
    denom = np.bincount(period, weights=u2)
    # a period whose residuals all vanish contributes zero shares
    with np.errstate(invalid="ignore", divide="ignore"):
        shares = np.where(denom[period] > 0, u2 / denom[period], 0.0)
    return shares


def unit_outlyingness(fit: FixedEffectsFit, demeaned: DemeanedPanel,
                      normalization: str = "global") -> np.ndarray:
    """``O_i``: Euclidean norm of unit ``i``'s residual shares over its periods."""
    shares = normalized_residuals(fit, demeaned, normalization)
    return np.sqrt(np.add.reduceat(shares ** 2, demeaned.offsets[:-1]))


def _quad(d: np.ndarray, A: np.ndarray) -> np.ndarray:
    return np.einsum("...k,kl,...l->...", d, A, d)


def joint_influence(fit: FixedEffectsFit, sweep: DeletionSweep) -> np.ndarray:
    """Matrix of ``C_ij`` with Cook's distance ``C_ii`` on the diagonal."""
    if fit.s2 <= 0:
        raise SingularityError("s2 is zero (exact fit); influence measures are undefined",
                               module="influence")
    d = fit.beta_hat - sweep.pairs
    C = _quad(d, fit.xtx) / (fit.s2 * fit.K)
    C[sweep.unavailable] = np.nan
    return C


def cook_distance(C: np.ndarray) -> np.ndarray:
    return np.diag(C).copy()


def _positive(cii: np.ndarray) -> np.ndarray:
    """Rows whose ``C_ii`` is usable as a denominator.

    Values at rounding level relative to the largest ``C_ii`` count as zero,
    so a no-op deletion yields an undefined row instead of 1e30-sized ratios.
    """
    finite = np.isfinite(cii)
    top = float(cii[finite].max()) if finite.any() else 0.0
    return finite & (cii > ZERO_COOK_RTOL * top)


def joint_effect(C: np.ndarray) -> np.ndarray:
    """``K_{j|i} = C_ij / C_ii``; rows with ``C_ii`` zero or unavailable are NaN."""
    cii = np.diag(C)
    good = _positive(cii)
    K = np.full_like(C, np.nan)
    K[good] = C[good] / cii[good, None]
    idx = np.flatnonzero(good)
    K[idx, idx] = 1.0
    return K


def conditional_influence(fit: FixedEffectsFit, sweep: DeletionSweep,
                          demeaned: DemeanedPanel) -> np.ndarray:
    """``C_{i(j)}``: influence of ``i`` in the sample without ``j``.

    Weighted by the leave-``j`` cross-product ``X'X - X_j'X_j``. Column ``j``
    is NaN when that matrix is rank deficient.
    """
    if fit.s2 <= 0:
        raise SingularityError("s2 is zero (exact fit); influence measures are undefined",
                               module="influence")
    N = sweep.n_units
    out = np.full((N, N), np.nan)
    scale = fit.s2 * fit.K
    for j in range(N):
        Aj = fit.xtx - demeaned.xtx_block(j)
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(Aj)
        if not np.isfinite(cond) or cond > MAX_CONDITION or np.any(np.isnan(sweep.loo[j])):
            continue
        d = sweep.pairs[:, j] - sweep.loo[j]
        out[:, j] = _quad(d, Aj) / scale
        out[j, j] = 0.0
    out[sweep.unavailable & ~np.eye(N, dtype=bool)] = np.nan
    return out


def conditional_effect(Ccond: np.ndarray, Cdiag: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``M_{i(j)} = C_{i(j)} / C_ii`` and the Mask/Boost label of each cell.

    ``M >= 1`` means ``j`` masks ``i``; ``M < 1`` means ``j`` boosts ``i``.
    The diagonal and undefined cells carry no label.
    """
    N = Ccond.shape[0]
    good = _positive(np.asarray(Cdiag))
    M = np.full_like(Ccond, np.nan)
    M[good] = Ccond[good] / Cdiag[good, None]
    labels = np.full((N, N), None, dtype=object)
    labels[M >= 1] = MASK
    labels[M < 1] = BOOST
    np.fill_diagonal(labels, None)
    return M, labels


def f_median_cutoff(nu1: int, nu2: int) -> float:
    """Median of the F(nu1, nu2) distribution.

    Solves ``I_{z(x)}(nu1/2, nu2/2) = 1/2`` with ``z(x) = nu1 x / (nu1 x + nu2)``
    by bracketing root search on the regularized incomplete beta function.
    """
    if int(nu1) != nu1 or int(nu2) != nu2 or nu1 < 1 or nu2 < 1:
        raise ValidationError(f"degrees of freedom must be positive integers, got ({nu1}, {nu2})",
                              module="influence")
    a, b = nu1 / 2.0, nu2 / 2.0

    def excess(x: float) -> float:
        return betainc(a, b, nu1 * x / (nu1 * x + nu2)) - 0.5

    hi = 2.0
    while excess(hi) < 0:
        hi *= 2.0
    return float(brentq(excess, 0.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=500))


@dataclass(frozen=True)
class Cutoffs:
    leverage_cut: float
    residual_cut: float
    f_median: float
    unity: float
    four_over_n: float
    mean_leverage: float
    mean_residual: float

    @classmethod
    def for_panel(cls, n_units: int, k: int, nu1: int, nu2: int) -> "Cutoffs":
        return cls(
            leverage_cut=2.0 * k / n_units,
            residual_cut=2.0 / n_units,
            f_median=f_median_cutoff(nu1, nu2),
            unity=1.0,
            four_over_n=4.0 / n_units,
            mean_leverage=k / n_units,
            mean_residual=1.0 / n_units,
        )

    def influence_cut(self, mode: str) -> float:
        if mode not in CUTOFF_MODES:
            raise ValidationError(f"cutoff mode must be one of {CUTOFF_MODES}, got {mode!r}",
                                  module="influence")
        return getattr(self, mode)

    def to_dict(self) -> dict:
        return asdict(self)


def classify_units(L: np.ndarray, O: np.ndarray, cutoffs: Cutoffs) -> np.ndarray:
    """Label each unit Normal / VO / GL / BL with strict inequalities."""
    high_L = np.asarray(L) > cutoffs.leverage_cut
    high_O = np.asarray(O) > cutoffs.residual_cut
    out = np.full(high_L.shape, NORMAL, dtype=object)
    out[high_L & ~high_O] = GL
    out[~high_L & high_O] = VO
    out[high_L & high_O] = BL
    return out


@dataclass(frozen=True, eq=False)
class InfluenceReport:
    unit_ids: tuple
    leverage: np.ndarray
    outlyingness: np.ndarray
    cook: np.ndarray
    joint: np.ndarray
    joint_effect: np.ndarray
    conditional: np.ndarray
    conditional_effect: np.ndarray
    cutoffs: Cutoffs
    classification: tuple[str, ...]
    k: int
    beta_hat: np.ndarray
    s2: float
    nu1: int
    nu2: int
    t_min: int
    t_max: int
    n_obs: int
    normalization: str = "global"
    cutoff_mode: str = "f_median"
    mask_labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _, labels = conditional_effect(self.conditional, self.cook)
        object.__setattr__(self, "mask_labels", labels)

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @property
    def K(self) -> int:
        return self.k + 1

    @property
    def active_cutoff(self) -> float:
        return self.cutoffs.influence_cut(self.cutoff_mode)

    def matrices(self) -> dict[str, np.ndarray]:
        return {"C_ij": self.joint, "K": self.joint_effect,
                "C_cond": self.conditional, "M": self.conditional_effect}

    def unavailable(self) -> dict[str, int]:
        return {name: int(np.isnan(m).sum()) for name, m in self.matrices().items()}

    def equals(self, other: "InfluenceReport") -> bool:
        """Exact equality (bitwise on floats, NaN equal to NaN)."""
        arrays = ("leverage", "outlyingness", "cook", "joint", "joint_effect",
                  "conditional", "conditional_effect", "beta_hat")
        scalars = ("unit_ids", "cutoffs", "classification", "k", "s2", "nu1", "nu2",
                   "t_min", "t_max", "n_obs", "normalization", "cutoff_mode")
        return all(getattr(self, s) == getattr(other, s) for s in scalars) and all(
            np.array_equal(getattr(self, a), getattr(other, a), equal_nan=True) for a in arrays)


def analyze(data: PanelDataset, *, normalization: str = "global",
            cutoff_mode: str = "f_median") -> InfluenceReport:
    """Full pipeline: transform, fit, hat blocks, deletion sweep, measures."""
    demeaned = within_group_transform(data)
    fe = _fit(demeaned)
    hat = hat_blocks(fe, demeaned)
    sweep = deletion_sweep(fe, hat)
    return build_report(fe, hat, sweep, demeaned, normalization=normalization,
                        cutoff_mode=cutoff_mode)


def build_report(fe: FixedEffectsFit, hat: HatBlocks, sweep: DeletionSweep,
                 demeaned: DemeanedPanel, *, normalization: str = "global",
                 cutoff_mode: str = "f_median") -> InfluenceReport:
    N = demeaned.n_units
    L = unit_leverage(hat)
    O = unit_outlyingness(fe, demeaned, normalization)
    C = joint_influence(fe, sweep)
    Ccond = conditional_influence(fe, sweep, demeaned)
    cook = cook_distance(C)
    M, _ = conditional_effect(Ccond, cook)
    nu1, nu2 = fe.dof
    cut = Cutoffs.for_panel(N, fe.k, nu1, nu2)
    if cutoff_mode not in CUTOFF_MODES:
        raise ValidationError(f"cutoff mode must be one of {CUTOFF_MODES}, got {cutoff_mode!r}",
                              module="influence")
    periods = demeaned.periods
    return InfluenceReport(
        unit_ids=demeaned.unit_ids,
        leverage=L, outlyingness=O, cook=cook, joint=C,
        joint_effect=joint_effect(C), conditional=Ccond, conditional_effect=M,
        cutoffs=cut, classification=tuple(classify_units(L, O, cut)),
        k=fe.k, beta_hat=np.array(fe.beta_hat), s2=fe.s2, nu1=nu1, nu2=nu2,
        t_min=int(periods.min()), t_max=int(periods.max()), n_obs=int(demeaned.offsets[-1]),
        normalization=normalization, cutoff_mode=cutoff_mode,
    )


def sweep_for(data: PanelDataset):
    """Convenience: transform, fit, blocks and sweep for a dataset."""
    demeaned = within_group_transform(data)
    fe = _fit(demeaned)
    hat = hat_blocks(fe, demeaned)
    return demeaned, fe, hat, deletion_sweep(fe, hat)
