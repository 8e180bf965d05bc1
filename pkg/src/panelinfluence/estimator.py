"""Within-group estimator and the per-unit hat-matrix blocks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import SingularityError
from .panel import DemeanedPanel

#: Condition number of X'X beyond which the fit refuses to proceed.
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class FixedEffectsFit:
    """Result of OLS on the demeaned model.

    ``dof`` is ``(nu1, nu2)`` with ``nu1 = k + 1`` (the constant counted) and
    ``nu2 = N - 1``; ``s2`` uses ``nu2`` as its denominator.
    """

    beta_hat: np.ndarray
    residuals: np.ndarray
    xtx: np.ndarray
    xtx_factor: tuple = field(repr=False)
    s2: float
    dof: tuple[int, int]
    offsets: np.ndarray = field(repr=False)
    condition: float = float("nan")

    @property
    def k(self) -> int:
        return int(self.beta_hat.shape[0])

    @property
    def K(self) -> int:
        return self.k + 1

    @property
    def n_units(self) -> int:
        return int(self.offsets.shape[0] - 1)

    def block(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Apply ``(X'X)^{-1}`` to ``b`` through the Cholesky factor."""
        return cho_solve(self.xtx_factor, b)


def factorize(xtx: np.ndarray, *, what: str = "X'X", module: str = "estimator"):
    """Cholesky factor of an SPD matrix with a relative condition guard."""
    cond = float(np.linalg.cond(xtx))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularityError(
            f"{what} is singular or ill-conditioned (condition number {cond:.3e} > {MAX_CONDITION:.0e})",
            module=module, condition=cond,
        )
    try:
        return cho_factor(xtx, lower=True), cond
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"{what} is not positive definite (condition number {cond:.3e})",
                               module=module, condition=cond) from exc


def fit(demeaned: DemeanedPanel) -> FixedEffectsFit:
    """Within-group (fixed-effects) estimator."""
    X, y = demeaned.X_tilde, demeaned.y_tilde
    xtx = X.T @ X
    xtx = 0.5 * (xtx + xtx.T)
    factor, cond = factorize(xtx)
    beta = cho_solve(factor, X.T @ y)
    resid = y - X @ beta
    n_units = demeaned.n_units
    nu2 = n_units - 1
    s2 = float(resid @ resid) / nu2
    for a in (beta, resid, xtx):
        a.setflags(write=False)
    return FixedEffectsFit(
        beta_hat=beta, residuals=resid, xtx=xtx, xtx_factor=factor, s2=s2,
        dof=(X.shape[1] + 1, nu2), offsets=demeaned.offsets, condition=cond,
    )


class HatBlocks:
    """Blocks of ``X (X'X)^{-1} X'`` partitioned by unit.

    The product ``(X'X)^{-1} X_j'`` is solved once for all observations;
    ``H_i`` is built lazily and cached, ``H_ij`` is recomputed on demand.
    """

    def __init__(self, fit: FixedEffectsFit, demeaned: DemeanedPanel):
        self.fit = fit
        self.demeaned = demeaned
        self.offsets = demeaned.offsets
        self._X = demeaned.X_tilde
        # k x n, column block j is (X'X)^{-1} X_j'
        self._G = fit.solve(self._X.T)
        self._G.setflags(write=False)
        self._cache: dict[int, np.ndarray] = {}

    @property
    def n_units(self) -> int:
        return int(self.offsets.shape[0] - 1)

    def block(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def X(self, i: int) -> np.ndarray:
        return self._X[self.block(i)]

    def G(self, i: int) -> np.ndarray:
        """``(X'X)^{-1} X_i'``, shape (k, T_i)."""
        return self._G[:, self.block(i)]

    def H(self, i: int) -> np.ndarray:
        h = self._cache.get(i)
        if h is None:
            h = self.X(i) @ self.G(i)
            h = 0.5 * (h + h.T)
            h.setflags(write=False)
            self._cache[i] = h
        return h

    def M(self, i: int) -> np.ndarray:
        return np.eye(self.offsets[i + 1] - self.offsets[i]) - self.H(i)

    def H_pair(self, i: int, j: int) -> np.ndarray:
        """Off-diagonal block ``X_i (X'X)^{-1} X_j'`` (T_i x T_j)."""
        if i == j:
            return self.H(i)
        # evaluate with the lower index on the left so H_ji is exactly H_ij'
        if i > j:
            return (self.X(j) @ self.G(i)).T
        return self.X(i) @ self.G(j)

    def H_row(self, i: int) -> np.ndarray:
        """``X_i (X'X)^{-1} X'`` against every observation, shape (T_i, n)."""
        return self.X(i) @ self._G

    def traces(self) -> np.ndarray:
        """``tr(H_i)`` per unit, computed without forming the blocks."""
        per_obs = np.einsum("nk,kn->n", self._X, self._G)
        return np.add.reduceat(per_obs, self.offsets[:-1])


def hat_blocks(fit: FixedEffectsFit, demeaned: DemeanedPanel) -> HatBlocks:
    return HatBlocks(fit, demeaned)
