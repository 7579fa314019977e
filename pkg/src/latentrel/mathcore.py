"""Deterministic numerical kernel shared by the learning modules.

Matrices are plain float64 numpy arrays in C (row-major) order with one
sample per row. Randomness flows through :class:`RandomSource`, a seeded
counter-based generator, so every pipeline stage is reproducible
bit-for-bit from a single integer seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    NonPositiveStdError,
    NotPositiveDefiniteError,
)

_MASK64 = (1 << 64) - 1

# escalation ladder, each entry scaled by the mean diagonal of the matrix
_JITTER_LADDER = (1e-10, 1e-8, 1e-6)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return h


def derive_seed(master_seed: int, label: str) -> int:
    """Derive a stage seed from a master seed and a stage label.

    The rule is ``splitmix64(master_seed XOR fnv1a64(label))``; it is part
    of the reproducibility contract and must not change between versions.
    """
    return _splitmix64((int(master_seed) & _MASK64) ^ _fnv1a64(label.encode("utf-8")))


class RandomSource:
    """Seeded random stream backed by the counter-based Philox generator.

    Normal deviates are produced by the Box-Muller transform on top of the
    uniform stream, so the full stream is identical across platforms for a
    given seed. Instances are single-owner: never share one between
    concurrent consumers.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def derive(self, label: str) -> "RandomSource":
        """Child stream for a named pipeline stage (see :func:`derive_seed`)."""
        return RandomSource(derive_seed(self.seed, label))

    def random(self, size=None) -> np.ndarray:
        """Uniform draws in [0, 1)."""
        return self._gen.random(size)

    def uniform(self, lo: float, hi: float, size=None) -> np.ndarray:
        return lo + (hi - lo) * self._gen.random(size)

    def integers(self, n: int, size=None) -> np.ndarray:
        """Integer draws in [0, n) derived from the uniform stream."""
        return np.minimum((self._gen.random(size) * n).astype(np.int64), n - 1)

    def normal(self, mean: float, std: float, count: int) -> np.ndarray:
        """``count`` independent N(mean, std^2) draws via Box-Muller."""
        if std <= 0.0:
            raise NonPositiveStdError(f"std must be positive, got {std}")
        pairs = (int(count) + 1) // 2
        if pairs == 0:
            return np.empty(0)
        u1 = 1.0 - self._gen.random(pairs)  # (0, 1], keeps log finite
        u2 = self._gen.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]
        return mean + std * z


def sample_normal(rng: RandomSource, mean: float, std: float, count: int) -> np.ndarray:
    return rng.normal(mean, std, count)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function 1 / (1 + exp(-z)), stable for large |z|.

    Large negative z overflows exp to inf, which IEEE division turns into
    the correct limit 0; the overflow warning is suppressed.
    """
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


def cholesky_decompose(a: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Lower Cholesky factor of ``a + jitter*I``.

    If the factorization fails at the requested jitter, the jitter is
    escalated through 1e-10, 1e-8, 1e-6 times the mean diagonal before
    giving up with :class:`NotPositiveDefiniteError`. Near-duplicate rows
    in squared-exponential kernel matrices routinely need this.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > 1e-9 * scale:
        raise ValueError("matrix is not symmetric within 1e-9 relative")
    if jitter < 0.0:
        raise ValueError("jitter must be non-negative")

    eye = np.eye(a.shape[0])
    mean_diag = float(np.trace(a)) / a.shape[0] if a.shape[0] else 1.0
    candidates = [jitter] + [lvl * abs(mean_diag) for lvl in _JITTER_LADDER]
    for j in candidates:
        try:
            return np.linalg.cholesky(a + j * eye)
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefiniteError(
        f"matrix is not positive definite even with jitter {candidates[-1]:.3g}"
    )


def solve_spd(l: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = b given the lower Cholesky factor L."""
    l = np.asarray(l, dtype=float)
    b = np.asarray(b, dtype=float)
    if l.ndim != 2 or l.shape[0] != l.shape[1]:
        raise DimensionMismatchError(f"factor must be square, got shape {l.shape}")
    if b.shape[0] != l.shape[0]:
        raise DimensionMismatchError(
            f"rhs length {b.shape[0]} does not match factor size {l.shape[0]}"
        )
    y = solve_triangular(l, b, lower=True)
    return solve_triangular(l.T, y, lower=False)


@dataclass(frozen=True)
class ColumnScaler:
    """Per-column affine map onto fixed target intervals.

    ``a`` and ``b`` are the target endpoints, either scalars (one interval
    for every column) or per-column arrays. Columns observed as constant
    map to the interval midpoint and invert back to the observed value.
    The default target [0.05, 0.95] keeps sigmoid-network targets away
    from the saturated tails.
    """

    lo: np.ndarray
    hi: np.ndarray
    a: np.ndarray | float = 0.05
    b: np.ndarray | float = 0.95

    @classmethod
    def fit(cls, x: np.ndarray, target: tuple = (0.05, 0.95)) -> "ColumnScaler":
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] < 2:
            raise EmptyInputError("scaler fit needs a matrix with at least 2 rows")
        a = np.asarray(target[0], dtype=float)
        b = np.asarray(target[1], dtype=float)
        if a.ndim == 0:
            a, b = float(a), float(b)
        return cls(lo=x.min(axis=0), hi=x.max(axis=0), a=a, b=b)

    @property
    def n_cols(self) -> int:
        return self.lo.shape[0]

    def _targets(self) -> tuple[np.ndarray, np.ndarray]:
        a = np.broadcast_to(np.asarray(self.a, dtype=float), self.lo.shape)
        b = np.broadcast_to(np.asarray(self.b, dtype=float), self.lo.shape)
        return a, b

    def _select(self, idx) -> "ColumnScaler":
        a, b = self._targets()
        return ColumnScaler(lo=self.lo[idx], hi=self.hi[idx], a=a[idx], b=b[idx])

    def head(self, n: int) -> "ColumnScaler":
        """Scaler restricted to the first ``n`` columns."""
        return self._select(slice(None, n))

    def tail(self, n: int) -> "ColumnScaler":
        """Scaler restricted to the last ``n`` columns."""
        return self._select(slice(self.n_cols - n, None))

    def retarget(self, a: float, b: float) -> "ColumnScaler":
        """Same fitted column bounds, mapped onto a different interval."""
        return ColumnScaler(lo=self.lo, hi=self.hi, a=float(a), b=float(b))

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_cols:
            raise DimensionMismatchError(
                f"expected {self.n_cols} columns, got shape {x.shape}"
            )
        a, b = self._targets()
        width = self.hi - self.lo
        degenerate = width == 0.0
        safe = np.where(degenerate, 1.0, width)
        scaled = a + (x - self.lo) * (b - a) / safe
        scaled[:, degenerate] = (0.5 * (a + b))[degenerate]
        return scaled

    def invert(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if s.ndim != 2 or s.shape[1] != self.n_cols:
            raise DimensionMismatchError(
                f"expected {self.n_cols} columns, got shape {s.shape}"
            )
        a, b = self._targets()
        width = self.hi - self.lo
        degenerate = width == 0.0
        x = self.lo + (s - a) * np.where(degenerate, 0.0, width) / (b - a)
        x[:, degenerate] = self.lo[degenerate]
        return x


def fit_scaler(x: np.ndarray, target: tuple = (0.05, 0.95)) -> ColumnScaler:
    return ColumnScaler.fit(x, target)
