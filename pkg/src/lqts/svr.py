"""Epsilon-insensitive support vector regression with an RBF kernel.

Trains the similarity predictor on labelled transitivity features
(targets 1 for same-identity, 0 for differing). Errors inside the wide
tube (default 0.4) are free; larger ones are charged at the heavy cost
(default 1000), so mislabelled training rows end up defining the
boundary while the correctly labelled bulk is pushed toward 0 and 1.

The dual box-constrained QP

    min  0.5 * b'Kb + eps * sum(a + a*) - y'b,   b = a - a*
    s.t. sum(b) = 0,  a, a* in [0, C]

is solved by pairwise coordinate descent on the maximal KKT-violating
pair, with exact two-variable line search and kernel rows computed on
demand behind a small cache. The predictor is
h(x) = sum_i b_i * exp(-gamma ||x_i - x||^2) + bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError

ETA_FLOOR = 1e-12
COEFF_SUM_TOL = 1e-6
ROW_CACHE_BYTES = 64 * 2**20


@dataclass(frozen=True)
class SvrConfig:
    epsilon: float = 0.4
    cost: float = 1000.0
    kernel_gamma: float = 0.2
    kkt_tolerance: float = 1e-3
    max_passes: int = 1_000_000

    def __post_init__(self):
        if self.epsilon <= 0 or self.cost <= 0 or self.kernel_gamma <= 0:
            raise ValueError("epsilon, cost and kernel_gamma must be positive")


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a_i - b_j||^2) for rows of a against rows of b."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    d2 = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-gamma * np.maximum(d2, 0.0))


@dataclass(frozen=True, eq=False)
class SvrModel:
    """Trained regressor: support vectors, dual coefficients, bias."""

    support_vectors: np.ndarray
    coefficients: np.ndarray
    bias: float
    config: SvrConfig
    kkt_violation: float = 0.0
    objective: float = 0.0
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        sv = np.atleast_2d(np.asarray(self.support_vectors, dtype=np.float64))
        if sv.size == 0:
            sv = sv.reshape(0, 5)
        coeff = np.asarray(self.coefficients, dtype=np.float64).reshape(-1)
        if sv.shape[0] != coeff.shape[0]:
            raise ValueError("support vector / coefficient count mismatch")
        if coeff.size and abs(float(np.sum(coeff))) > COEFF_SUM_TOL:
            raise ValueError(
                f"dual coefficients must sum to zero (got {float(np.sum(coeff)):.3g})"
            )
        if np.any(np.abs(coeff) > self.config.cost + 1e-9):
            raise ValueError("dual coefficient exceeds the cost bound")
        if np.any(coeff == 0.0):
            raise ValueError("zero coefficients must not be stored")
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "coefficients", coeff)

    @property
    def n_support(self) -> int:
        return self.coefficients.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SvrModel):
            return NotImplemented
        return (
            np.array_equal(self.support_vectors, other.support_vectors)
            and np.array_equal(self.coefficients, other.coefficients)
            and self.bias == other.bias
            and self.config.epsilon == other.config.epsilon
            and self.config.cost == other.config.cost
            and self.config.kernel_gamma == other.config.kernel_gamma
        )


def predict(model: SvrModel, x: np.ndarray):
    """h(x) = sum_i beta_i k(x_i, x) + bias, unclamped.

    Accepts one vector or a batch of rows; returns a float or an array
    to match.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    rows = np.atleast_2d(arr)
    if not np.all(np.isfinite(rows)):
        raise TrainingError("prediction input contains non-finite values")
    if model.n_support == 0:
        out = np.full(rows.shape[0], model.bias)
    else:
        k = rbf_kernel(rows, model.support_vectors, model.config.kernel_gamma)
        out = k @ model.coefficients + model.bias
    return float(out[0]) if single else out


def dual_objective(
    x: np.ndarray, y: np.ndarray, alpha: np.ndarray, alpha_star: np.ndarray, config: SvrConfig
) -> float:
    """Dual objective value at a feasible (alpha, alpha_star) point."""
    beta = alpha - alpha_star
    k = rbf_kernel(x, x, config.kernel_gamma)
    return float(
        0.5 * beta @ k @ beta
        + config.epsilon * float(np.sum(alpha + alpha_star))
        - float(y @ beta)
    )


def _as_training_arrays(features) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(features, tuple) and len(features) == 2:
        x, y = features
    else:
        rows, targets = [], []
        for f in features:
            if hasattr(f, "s"):
                rows.append(np.asarray(f.s, dtype=np.float64))
                targets.append(0.0 if f.label is None else float(f.label))
            else:
                vec, t = f
                rows.append(np.asarray(vec, dtype=np.float64))
                targets.append(float(t))
        x, y = np.array(rows), np.array(targets)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise TrainingError("empty training corpus")
    if x.shape[0] != y.shape[0]:
        raise TrainingError("feature / target count mismatch")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise TrainingError("training data contains non-finite values")
    return x, y


class _RowCache:
    """FIFO cache of kernel matrix rows, bounded by memory."""

    def __init__(self, x: np.ndarray, gamma: float, budget_bytes: int = ROW_CACHE_BYTES):
        self.x = x
        self.gamma = gamma
        self.sq = np.sum(x * x, axis=1)
        self.max_rows = max(2, budget_bytes // (8 * x.shape[0]))
        self.rows: dict[int, np.ndarray] = {}

    def row(self, i: int) -> np.ndarray:
        cached = self.rows.get(i)
        if cached is not None:
            return cached
        d2 = np.maximum(self.sq + self.sq[i] - 2.0 * (self.x @ self.x[i]), 0.0)
        r = np.exp(-self.gamma * d2)
        if len(self.rows) >= self.max_rows:
            self.rows.pop(next(iter(self.rows)))
        self.rows[i] = r
        return r


def train(features, config: SvrConfig = SvrConfig()) -> SvrModel:
    """Fit the dual QP by maximal-violating-pair coordinate descent.

    Stops when the KKT gap falls below config.kkt_tolerance or after
    config.max_passes pair updates. The bias is the average of the
    KKT-implied value over non-bound support vectors, or the target mean
    when none exist. Fully deterministic for fixed inputs.
    """
    x, y = _as_training_arrays(features)
    l = x.shape[0]
    c = config.cost
    eps = config.epsilon

    theta = np.zeros(2 * l)
    sign = np.concatenate([np.ones(l), -np.ones(l)])
    g = np.concatenate([eps - y, eps + y])  # gradient at theta = 0
    cache = _RowCache(x, config.kernel_gamma)

    obj = 0.0
    trace = [0.0]
    gap = 0.0
    for _ in range(config.max_passes):
        crit = -sign * g
        up = ((sign > 0) & (theta < c)) | ((sign < 0) & (theta > 0))
        low = ((sign > 0) & (theta > 0)) | ((sign < 0) & (theta < c))
        up_vals = np.where(up, crit, -np.inf)
        low_vals = np.where(low, crit, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        m_up, m_low = up_vals[i], low_vals[j]
        gap = float(m_up - m_low)
        if not np.isfinite(gap) or gap <= config.kkt_tolerance:
            gap = max(gap, 0.0) if np.isfinite(gap) else 0.0
            break

        ia, ja = i % l, j % l
        ki = cache.row(ia)
        kj = cache.row(ja)
        eta = max(2.0 * (1.0 - ki[ja]), ETA_FLOOR)
        dg = float(sign[i] * g[i] - sign[j] * g[j])  # negative by selection
        lim_i = (c - theta[i]) if sign[i] > 0 else theta[i]
        lim_j = theta[j] if sign[j] > 0 else (c - theta[j])
        delta = min(-dg / eta, lim_i, lim_j)

        obj += delta * dg + 0.5 * delta * delta * eta
        trace.append(obj)

        # land exactly on a bound when clipped, so bound checks stay exact
        if delta == lim_i:
            theta[i] = c if sign[i] > 0 else 0.0
        else:
            theta[i] += sign[i] * delta
        if delta == lim_j:
            theta[j] = 0.0 if sign[j] > 0 else c
        else:
            theta[j] -= sign[j] * delta

        kdiff = ki - kj
        g += delta * sign * np.concatenate([kdiff, kdiff])

    beta = theta[:l] - theta[l:]
    nonbound = (theta > 0.0) & (theta < c)
    if np.any(nonbound):
        bias = float(np.mean((-sign * g)[nonbound]))
    else:
        bias = float(np.mean(y))

    keep = beta != 0.0
    sv, coeff = x[keep], beta[keep]

    # exact objective at the returned point, chunked so K never materializes
    exact = eps * float(np.sum(theta)) - float(y @ beta)
    if coeff.size:
        quad = 0.0
        rows_kept = np.where(keep)[0]
        for start in range(0, rows_kept.size, 1024):
            idx = rows_kept[start : start + 1024]
            kblock = rbf_kernel(x[idx], sv, config.kernel_gamma)
            quad += float(beta[idx] @ (kblock @ coeff))
        exact += 0.5 * quad

    return SvrModel(
        support_vectors=sv,
        coefficients=coeff,
        bias=bias,
        config=config,
        kkt_violation=float(max(gap, 0.0)),
        objective=exact,
        objective_trace=np.asarray(trace),
    )
