"""Two-class RBF-kernel SVM trained by SMO.

Labels are +1 for bona fide and -1 for attack, so higher scores mean "more
bona fide". Features are standardised with train-set mean/std (dimensions
with zero spread keep scale 1) and the kernel width defaults to
``gamma = 1 / n_features``.

The optimiser is the working-set SMO of LIBSVM (second-order pair selection,
stop when the maximal KKT violation gap drops below ``tol``). Training rows
are put in a canonical order first, so the model does not depend on the
order of the input.
"""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ChecksumError, DataError, DimensionError, TrainingError

logger = logging.getLogger(__name__)

TAU = 1e-12
MODEL_MAGIC = b"PADSVM\0\0"
MODEL_VERSION = 1


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"kernel arguments differ in shape: {x.shape} vs {y.shape}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class TrainedModel:
    support_vectors: np.ndarray  # standardised, (n_sv, dim)
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    C: float
    mean: np.ndarray
    scale: np.ndarray
    dual_objective: float = float("nan")
    n_iter: int = 0

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise DimensionError(f"model expects {self.dim} features, got {X.shape[1]}")
        return (X - self.mean) / self.scale

    def decision_function(self, X) -> np.ndarray:
        Z = self.standardize(X)
        return rbf_matrix(Z, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def save(self, path) -> None:
        Path(path).write_bytes(encode_model(self))

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return decode_model(Path(path).read_bytes(), str(path))


def score(model: TrainedModel, x) -> float:
    """Decision value of one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("score expects a single vector")
    return float(model.decision_function(x)[0])


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = [(X[i].tobytes(), int(y[i])) for i in range(len(y))]
    return np.array(sorted(range(len(y)), key=keys.__getitem__), dtype=np.intp)


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int) -> tuple[np.ndarray, float, int]:
    """Solve ``min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0`` with ``Q = yy' * K``.

    Returns ``(alpha, rho, n_iter)``; the decision function is
    ``sum_i alpha_i y_i K(x_i, x) - rho``.
    """
    n = len(y)
    Q = K * np.outer(y, y)
    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    for it in range(max_iter):
        up = np.where(y > 0, alpha < C, alpha > 0)
        low = np.where(y > 0, alpha > 0, alpha < C)
        minus_yg = -y * grad
        if not up.any() or not low.any():
            break
        cand = np.where(up, minus_yg, -np.inf)
        i = int(np.argmax(cand))
        g_max = cand[i]
        g_min = np.min(np.where(low, minus_yg, np.inf))
        if g_max - g_min < tol:
            break
        # second-order choice of j among violators in I_low
        b = g_max - minus_yg
        a = diag[i] + diag - 2.0 * y[i] * y * Q[i]
        a = np.where(a > 0, a, TAU)
        gain = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(gain))

        ai_old, aj_old = alpha[i], alpha[j]
        quad = max(diag[i] + diag[j] - 2.0 * K[i, j], TAU)
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += Q[:, i] * (ai - ai_old) + Q[:, j] * (aj - aj_old)
    else:
        raise TrainingError(f"SMO did not converge within {max_iter} iterations")

    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub = np.min(np.where(np.where(y > 0, alpha >= C, alpha <= 0), yg, np.inf))
        lb = np.max(np.where(np.where(y > 0, alpha <= 0, alpha >= C), yg, -np.inf))
        rho = float((ub + lb) / 2.0)
    return alpha, rho, it


def dual_objective(alpha: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    ay = alpha * y
    return float(0.5 * ay @ K @ ay - alpha.sum())


def train(
    X,
    labels,
    C: float = 1.0,
    gamma: Optional[float] = None,
    tol: float = 1e-3,
    max_iter: Optional[int] = None,
) -> TrainedModel:
    """Fit the SVM. ``labels`` are +1 (bona fide) / -1 (attack) or booleans
    meaning "is bona fide"."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(labels)
    y = np.where(y.astype(np.float64) > 0, 1.0, -1.0)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError(f"features {X.shape} and labels {y.shape} do not line up")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature values")
    if len(np.unique(y)) < 2:
        raise TrainingError("training data must contain both bona fide and attack samples")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    order = _canonical_order(X, y)
    X, y = X[order], y[order]
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    Z = (X - mean) / scale
    gamma = 1.0 / X.shape[1] if gamma is None else float(gamma)
    K = rbf_matrix(Z, Z, gamma)
    if max_iter is None:
        max_iter = max(100_000, 200 * len(y))
    alpha, rho, n_iter = smo(K, y, C, tol, max_iter)
    sv = alpha > 0
    logger.debug("SMO converged in %d iterations, %d support vectors", n_iter, int(sv.sum()))
    return TrainedModel(
        support_vectors=Z[sv],
        dual_coef=(alpha * y)[sv],
        bias=-rho,
        gamma=gamma,
        C=float(C),
        mean=mean,
        scale=scale,
        dual_objective=dual_objective(alpha, K, y),
        n_iter=n_iter,
    )


def kkt_residual(model: TrainedModel, X, labels) -> float:
    """Largest violation of the soft-margin KKT conditions on ``X``.

    Rows must be the training rows; their alphas are recovered by matching
    against the stored support vectors (rows that are not support vectors
    have alpha 0).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.where(np.asarray(labels).astype(np.float64) > 0, 1.0, -1.0)
    Z = model.standardize(X)
    margins = y * (rbf_matrix(Z, model.support_vectors, model.gamma) @ model.dual_coef + model.bias)
    sv_index = {row.tobytes(): k for k, row in enumerate(model.support_vectors)}
    worst = 0.0
    for r, m in zip(Z, margins):
        k = sv_index.get(r.tobytes())
        a = 0.0 if k is None else abs(model.dual_coef[k])
        if a <= 0:
            v = max(0.0, 1.0 - m)
        elif a >= model.C:
            v = max(0.0, m - 1.0)
        else:
            v = abs(m - 1.0)
        worst = max(worst, v)
    return worst


def encode_model(model: TrainedModel) -> bytes:
    n_sv, dim = model.support_vectors.shape if model.support_vectors.size else (0, model.dim)
    body = bytearray()
    body += MODEL_MAGIC
    body += struct.pack("<HII", MODEL_VERSION, dim, n_sv)
    body += struct.pack("<dddd", model.gamma, model.C, model.bias, model.dual_objective)
    for arr in (model.mean, model.scale, model.dual_coef, model.support_vectors.reshape(-1)):
        body += np.asarray(arr, dtype="<f8").tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)))
    return bytes(body)


def decode_model(blob: bytes, where: str = "<model>") -> TrainedModel:
    if len(blob) < 8 + 10 + 32 + 4 or blob[:8] != MODEL_MAGIC:
        raise ChecksumError(f"{where}: not a model file")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise ChecksumError(f"{where}: checksum mismatch")
    version, dim, n_sv = struct.unpack_from("<HII", body, 8)
    if version != MODEL_VERSION:
        raise ChecksumError(f"{where}: unsupported model version {version}")
    gamma, C, bias, obj = struct.unpack_from("<dddd", body, 18)
    arr = np.frombuffer(body, dtype="<f8", offset=50)
    if arr.size != 2 * dim + n_sv + n_sv * dim:
        raise ChecksumError(f"{where}: payload size mismatch")
    mean, scale = arr[:dim].copy(), arr[dim:2 * dim].copy()
    coef = arr[2 * dim:2 * dim + n_sv].copy()
    svs = arr[2 * dim + n_sv:].reshape(n_sv, dim).copy()
    return TrainedModel(svs, coef, bias, gamma, C, mean, scale, obj)
