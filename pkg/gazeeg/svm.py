"""Two-class soft-margin support vector machine solved by sequential minimal optimization."""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from sklearn.metrics.pairwise import pairwise_kernels

from .errors import OneClassOnly

LOG = logging.getLogger('gazeeg.svm')

KERNELS = ('linear', 'poly', 'rbf')
TAU = 1e-12


@dataclass(frozen=True)
class SvmSpec:
    kernel: str
    C: float
    gamma: Optional[Union[float, str]] = None
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError("Unknown kernel '{}'.".format(self.kernel))
        if self.C <= 0:
            raise ValueError("C must be positive.")

    def resolve_gamma(self, X: np.ndarray) -> Optional[float]:
        """Numeric gamma for training data ``X``; ``None`` for the linear kernel."""
        if self.kernel == 'linear':
            return None
        return resolve_gamma(self.gamma if self.gamma is not None else 'scale', X)

    def describe(self) -> str:
        if self.kernel == 'linear':
            return "linear C={:g}".format(self.C)
        return "{} C={:g} gamma={}".format(self.kernel, self.C, self.gamma)


def resolve_gamma(gamma: Union[float, str], X: np.ndarray) -> float:
    d = X.shape[1]
    if gamma == 'scale':
        variance = float(X.var())
        return 1.0 / (d * variance) if variance > 0 else 1.0
    if gamma == 'auto':
        return 1.0 / d
    return float(gamma)


def kernel_matrix(spec: SvmSpec, gamma: Optional[float], A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if spec.kernel == 'linear':
        return pairwise_kernels(A, B, metric='linear')
    if spec.kernel == 'poly':
        return pairwise_kernels(A, B, metric='poly', gamma=gamma, degree=spec.degree, coef0=spec.coef0)
    return pairwise_kernels(A, B, metric='rbf', gamma=gamma)


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    iterations: int
    converged: bool


def solve_smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_iter: int = 20000) -> SmoResult:
    """
    Solve ``min 1/2 a'Qa - e'a`` s.t. ``y'a = 0``, ``0 <= a <= C`` with Q = yy'K.

    Working pairs are chosen by maximal violation for the first index and
    second-order gain for the second. Stops when the violation gap drops
    below ``tol``.
    """
    n = y.shape[0]
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        score = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        m = score[i]
        if m - score[low].min() < tol:
            converged = True
            break
        candidates = np.flatnonzero(low & (score < m))
        b = m - score[candidates]
        a = QD[i] + QD[candidates] - 2.0 * y[i] * y[candidates] * Q[i, candidates]
        a = np.where(a > 0, a, TAU)
        j = int(candidates[np.argmin(-(b * b) / a)])

        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q[i, j]
            delta = (-grad[i] - grad[j]) / (quad if quad > 0 else TAU)
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, C - diff
            else:
                if alpha[i] < 0:
                    alpha[i], alpha[j] = 0.0, -diff
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q[i, j]
            delta = (grad[i] - grad[j]) / (quad if quad > 0 else TAU)
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i], alpha[j] = C, total - C
                if alpha[j] > C:
                    alpha[j], alpha[i] = C, total - C
            else:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, total
                if alpha[i] < 0:
                    alpha[i], alpha[j] = 0.0, total
        grad += Q[i] * (alpha[i] - old_i) + Q[j] * (alpha[j] - old_j)

    if not converged:
        LOG.warning("smo not converged iterations=%d", iterations)
    return SmoResult(alpha=alpha, rho=_rho(alpha, y, grad, C), iterations=iterations, converged=converged)


def _rho(alpha: np.ndarray, y: np.ndarray, grad: np.ndarray, C: float) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    at_upper = alpha >= C
    upper_bound = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    ub = yg[upper_bound].min() if upper_bound.any() else np.inf
    lb = yg[~upper_bound].max() if (~upper_bound).any() else -np.inf
    if not np.isfinite(ub):
        return float(lb)
    if not np.isfinite(lb):
        return float(ub)
    return float(0.5 * (ub + lb))


@dataclass
class SvmModel:
    spec: SvmSpec
    gamma: Optional[float]
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    rho: float
    converged: bool = True
    iterations: int = 0

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], -self.rho)
        return kernel_matrix(self.spec, self.gamma, X, self.support_vectors) @ self.dual_coef - self.rho

    def predict(self, X: np.ndarray) -> np.ndarray:
        """+1 where the decision value is positive, -1 otherwise."""
        return np.where(self.decision_function(X) > 0, 1, -1)


def svm_fit(X: np.ndarray, y: np.ndarray, spec: SvmSpec, tol: float = 1e-3, max_iter: int = 20000) -> SvmModel:
    """
    Train a two-class SVM.

    :param X: training matrix (n, d)
    :param y: labels in {+1, -1}
    :param spec: kernel and hyperparameters
    :param tol: KKT violation tolerance
    :param max_iter: SMO iteration cap
    :return: fitted model (``converged=False`` if the cap was hit)
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.where(np.asarray(y) > 0, 1.0, -1.0)
    if np.unique(y).shape[0] < 2:
        raise OneClassOnly("SVM training needs samples of both classes.")
    gamma = spec.resolve_gamma(X)
    result = solve_smo(kernel_matrix(spec, gamma, X, X), y, spec.C, tol, max_iter)
    support = result.alpha > 0
    return SvmModel(spec=spec, gamma=gamma,
                    support_vectors=X[support].copy(),
                    dual_coef=(result.alpha * y)[support],
                    rho=result.rho,
                    converged=result.converged,
                    iterations=result.iterations)
