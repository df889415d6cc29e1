"""Convex combinations of tournament predictions and TRPS-optimal weights.

The average TRPS of a combined prediction is a convex quadratic in the
weights, f(w) = w'Aw - 2b'w + c, so fitting reduces to a small quadratic
program over the probability simplex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scoring import _check_aligned, cumulative, outcome_cumulative
from .structures import (
    SUM_TOL,
    AlignmentError,
    Outcome,
    PredictionMatrix,
    TRPSError,
)


class SolverError(RuntimeError):
    """The weight optimizer did not converge."""


@dataclass(frozen=True)
class EnsembleWeights:
    omega: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.omega)
        object.__setattr__(self, "omega", w)
        if not w:
            raise TRPSError("need at least one ensemble weight")
        if any(not np.isfinite(x) or x < 0 for x in w):
            raise TRPSError(f"ensemble weights must be non-negative, got {w}")
        if abs(sum(w) - 1.0) > SUM_TOL:
            raise TRPSError(f"ensemble weights must sum to 1, got {sum(w)!r}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.omega)

    def __len__(self) -> int:
        return len(self.omega)


@dataclass(frozen=True, eq=False)
class TournamentHistory:
    """One past tournament: its outcome and the K models' predictions for it."""

    outcome: Outcome
    predictions: tuple[PredictionMatrix, ...]

    def __post_init__(self):
        preds = tuple(self.predictions)
        if not preds:
            raise TRPSError("a history needs at least one prediction")
        labels = preds[0].team_labels
        for X in preds:
            _check_aligned(self.outcome, X)
        preds = tuple(X.reorder(labels) for X in preds)
        self.outcome.categories(labels)
        object.__setattr__(self, "predictions", preds)

    @property
    def n_models(self) -> int:
        return len(self.predictions)


def _aligned(predictions: Sequence[PredictionMatrix]) -> list[PredictionMatrix]:
    if not predictions:
        raise TRPSError("need at least one prediction")
    first = predictions[0]
    out = [first]
    for X in predictions[1:]:
        if not X.structure.same_shape(first.structure):
            raise AlignmentError(f"rank structures differ: {first.structure.capacities} vs {X.structure.capacities}")
        out.append(X.reorder(first.team_labels))
    return out


def combine(predictions: Sequence[PredictionMatrix], omega) -> PredictionMatrix:
    """Entrywise convex combination of aligned predictions (columns follow the first)."""
    preds = _aligned(list(predictions))
    if not isinstance(omega, EnsembleWeights):
        omega = EnsembleWeights(tuple(omega))
    if len(omega) != len(preds):
        raise TRPSError(f"{len(omega)} weights for {len(preds)} predictions")
    probs = np.tensordot(omega.as_array(), np.stack([X.probs for X in preds]), axes=1)
    return PredictionMatrix(preds[0].structure, np.clip(probs, 0.0, 1.0), preds[0].team_labels)


def _check_histories(histories: Sequence[TournamentHistory]) -> int:
    if not histories:
        raise TRPSError("need at least one tournament history")
    K = histories[0].n_models
    if any(h.n_models != K for h in histories):
        raise TRPSError(f"histories disagree on the number of models: {[h.n_models for h in histories]}")
    return K


def quadratic_form(histories: Sequence[TournamentHistory]) -> tuple[np.ndarray, np.ndarray, float]:
    """(A, b, c) with average TRPS(w) = w'Aw - 2b'w + c."""
    K = _check_histories(histories)
    A, b, c = np.zeros((K, K)), np.zeros(K), 0.0
    for h in histories:
        labels = h.predictions[0].team_labels
        obs = outcome_cumulative(h.outcome, labels)[:-1].ravel()
        D = np.stack([cumulative(X)[:-1].ravel() for X in h.predictions])
        R, T = h.outcome.structure.n_categories, len(labels)
        scale = 1.0 / (T * (R - 1) * len(histories))
        A += scale * D @ D.T
        b += scale * D @ obs
        c += scale * obs @ obs
    return (A + A.T) / 2, b, float(c)


def objective(histories: Sequence[TournamentHistory], omega) -> float:
    """Average TRPS over ``histories`` of the ensemble with weights ``omega``."""
    A, b, c = quadratic_form(histories)
    w = omega.as_array() if isinstance(omega, EnsembleWeights) else np.asarray(omega, dtype=float)
    return float(w @ A @ w - 2 * b @ w + c)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1} (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def minimize_simplex_qp(A: np.ndarray, b: np.ndarray, c: float = 0.0, tol: float = 1e-10,
                        max_iter: int = 100_000, w0=None) -> tuple[np.ndarray, float, int]:
    """Minimize w'Aw - 2b'w + c over the simplex by projected gradient descent.

    Each iteration projects a 1/L gradient step onto the simplex and then
    takes the exact minimizing step along that direction.  Stops once an
    iteration lowers the objective by less than ``tol`` and the projected
    step is negligible.  Returns ``(w, f(w), iterations)``.
    """
    K = b.size
    w = np.full(K, 1.0 / K) if w0 is None else project_simplex(w0)
    f = lambda x: float(x @ A @ x - 2 * b @ x + c)  # noqa: E731
    L = 2.0 * max(np.linalg.eigvalsh(A).max(), 1e-300)
    fw = f(w)
    for it in range(1, max_iter + 1):
        g = 2.0 * (A @ w - b)
        d = project_simplex(w - g / L) - w
        if not np.any(np.abs(d) > 1e-15):
            return w, fw, it
        curv = d @ A @ d
        slope = g @ d
        step = 1.0 if curv <= 0 else min(1.0, -slope / (2.0 * curv))
        w_new = project_simplex(w + step * d)
        f_new = f(w_new)
        if f_new > fw:
            # rounding noise at the optimum
            return w, fw, it
        decrease = fw - f_new
        w, fw = w_new, f_new
        if decrease < tol and np.abs(d).max() < 1e-8:
            return w, fw, it
    raise SolverError(f"no convergence after {max_iter} iterations (objective {fw!r})")


def polish_on_support(A: np.ndarray, b: np.ndarray, c: float, w: np.ndarray) -> np.ndarray:
    """Exact minimizer restricted to the support of ``w`` when that is feasible.

    Solves the equality-constrained KKT system on the active set; the
    result is kept only if it stays non-negative and does not raise the
    objective, so the gradient iterations fix the support and this step
    removes their residual error.
    """
    support = np.nonzero(w > 0)[0]
    k = support.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * A[np.ix_(support, support)]
    kkt[:k, k] = kkt[k, :k] = 1.0
    rhs = np.concatenate([2.0 * b[support], [1.0]])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
    if not np.all(np.isfinite(sol)) or np.any(sol < -1e-12):
        return w
    sol = np.maximum(sol, 0.0)
    cand = np.zeros_like(w)
    cand[support] = sol / sol.sum()
    f = lambda x: float(x @ A @ x - 2 * b @ x + c)  # noqa: E731
    return cand if f(cand) <= f(w) else w


def fit_weights(histories: Sequence[TournamentHistory], tol: float = 1e-10,
                max_iter: int = 100_000) -> EnsembleWeights:
    """Simplex weights minimizing the average TRPS of the combined prediction.

    The search starts from uniform weights; when the minimizer is not
    unique the one reached from there is returned.
    """
    A, b, c = quadratic_form(histories)
    w, _, _ = minimize_simplex_qp(A, b, c, tol=tol, max_iter=max_iter)
    w = polish_on_support(A, b, c, np.maximum(w, 0.0))
    return EnsembleWeights(tuple(w / w.sum()))


def simplex_grid(K: int, step: float) -> np.ndarray:
    """All weight vectors on the simplex with coordinates in multiples of ``step``."""
    n = int(round(1.0 / step))
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise TRPSError(f"grid step must divide 1, got {step}")
    if K == 1:
        return np.ones((1, 1))
    head = np.indices((n + 1,) * (K - 1)).reshape(K - 1, -1).T
    head = head[head.sum(axis=1) <= n]
    return np.column_stack([head, n - head.sum(axis=1)]).astype(float) / n


def grid_oracle(histories: Sequence[TournamentHistory], resolution: float = 1e-3) -> EnsembleWeights:
    """Exhaustive simplex-grid minimizer of the average TRPS (K <= 3).

    Scores every grid point by summing squared cumulative differences
    directly, without going through :func:`quadratic_form`.
    """
    K = _check_histories(histories)
    if K > 3:
        raise TRPSError(f"grid search is limited to 3 models, got {K}")
    grid = simplex_grid(K, resolution)
    vals = np.zeros(len(grid))
    for h in histories:
        labels = h.predictions[0].team_labels
        obs = outcome_cumulative(h.outcome, labels)[:-1].ravel()
        D = np.stack([cumulative(X)[:-1].ravel() for X in h.predictions])
        for lo in range(0, len(grid), 65536):
            chunk = grid[lo:lo + 65536]
            vals[lo:lo + len(chunk)] += ((chunk @ D - obs) ** 2).mean(axis=1) / len(histories)
    return EnsembleWeights(tuple(grid[int(np.argmin(vals))]))
