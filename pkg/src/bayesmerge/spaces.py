"""Ground metric spaces carrying the measures.

Three kinds are supported: the real line with the Euclidean distance,
``R^d`` with the Euclidean distance, and a finite labeled set with an
explicit distance matrix.  A space canonicalizes points, orders them
deterministically, and computes pairwise distances; everything else in
the package is built on top of these three primitives.

All space objects are immutable and safe to share across workers.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput


class GroundSpace:
    """Common interface of the three space kinds."""

    def canon(self, x):
        """Return the canonical representation of a point, or raise."""
        raise NotImplementedError

    def sort_key(self, x):
        """Deterministic ordering key for canonical points."""
        raise NotImplementedError

    def distance(self, x, y) -> float:
        raise NotImplementedError

    def pairwise(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Distance matrix between two arrays of internal point codes."""
        raise NotImplementedError


class RealLine(GroundSpace):
    """The real line with distance |x - y|."""

    def canon(self, x):
        v = float(x)
        if not np.isfinite(v):
            raise InvalidInput(f"point {x!r} is not a finite real")
        return v

    def sort_key(self, x):
        return x

    def distance(self, x, y) -> float:
        return abs(float(x) - float(y))

    def pairwise(self, xs, ys):
        return np.abs(np.asarray(xs, dtype=float)[:, None] - np.asarray(ys, dtype=float)[None, :])

    def __eq__(self, other):
        return isinstance(other, RealLine)

    def __hash__(self):
        return hash("RealLine")

    def __repr__(self):
        return "RealLine()"


class EuclideanRd(GroundSpace):
    """R^d with the Euclidean distance, d >= 1."""

    def __init__(self, dim: int):
        dim = int(dim)
        if dim < 1:
            raise InvalidInput("dim must be >= 1")
        self.dim = dim

    def canon(self, x):
        v = tuple(float(c) for c in x)
        if len(v) != self.dim:
            raise InvalidInput(f"point {x!r} has wrong dimension, expected {self.dim}")
        if not all(np.isfinite(c) for c in v):
            raise InvalidInput(f"point {x!r} has non-finite coordinates")
        return v

    def sort_key(self, x):
        return x

    def distance(self, x, y) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))

    def pairwise(self, xs, ys):
        xs = np.asarray(xs, dtype=float).reshape(-1, self.dim)
        ys = np.asarray(ys, dtype=float).reshape(-1, self.dim)
        diff = xs[:, None, :] - ys[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def __eq__(self, other):
        return isinstance(other, EuclideanRd) and other.dim == self.dim

    def __hash__(self):
        return hash(("EuclideanRd", self.dim))

    def __repr__(self):
        return f"EuclideanRd(dim={self.dim})"


class FiniteLabeled(GroundSpace):
    """A finite set of labels with an explicit distance matrix.

    The matrix must have a zero diagonal, be symmetric and nonnegative,
    and satisfy the triangle inequality for every label triple; this is
    validated at construction.  Points are identified by label, stored
    internally as indices into ``labels``.
    """

    def __init__(self, labels, distance_matrix=None):
        self.labels = tuple(labels)
        if len(self.labels) < 1:
            raise InvalidInput("labels must be nonempty")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidInput("labels must be distinct")
        k = len(self.labels)
        if distance_matrix is None:
            d = np.ones((k, k)) - np.eye(k)
        else:
            d = np.asarray(distance_matrix, dtype=float).copy()
        if d.shape != (k, k):
            raise InvalidInput(f"distance matrix must be {k}x{k}")
        if not np.allclose(np.diag(d), 0.0, atol=0.0):
            raise InvalidInput("distance matrix must have zero diagonal")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise InvalidInput("distances must be finite and nonnegative")
        if not np.array_equal(d, d.T):
            raise InvalidInput("distance matrix must be symmetric")
        for j in range(k):
            if np.any(d > d[:, j, None] + d[None, j, :] + 1e-12):
                raise InvalidInput("distance matrix violates the triangle inequality")
        d.flags.writeable = False
        self.distance_matrix = d
        self._index = {lab: i for i, lab in enumerate(self.labels)}

    @classmethod
    def unit(cls, labels) -> "FiniteLabeled":
        """Labels with the discrete metric (distance 1 off the diagonal)."""
        return cls(labels)

    def index_of(self, label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise InvalidInput(f"label {label!r} not in space") from None

    def canon(self, x):
        if x not in self._index:
            raise InvalidInput(f"label {x!r} not in space")
        return x

    def sort_key(self, x):
        return self._index[x]

    def distance(self, x, y) -> float:
        return float(self.distance_matrix[self.index_of(x), self.index_of(y)])

    def pairwise(self, xs, ys):
        xs = np.asarray(xs, dtype=np.intp)
        ys = np.asarray(ys, dtype=np.intp)
        return self.distance_matrix[np.ix_(xs, ys)]

    @property
    def is_unit_metric(self) -> bool:
        """True when the metric is the discrete 0/1 metric."""
        k = len(self.labels)
        return bool(np.array_equal(self.distance_matrix, np.ones((k, k)) - np.eye(k)))

    def __eq__(self, other):
        return (
            isinstance(other, FiniteLabeled)
            and other.labels == self.labels
            and np.array_equal(other.distance_matrix, self.distance_matrix)
        )

    def __hash__(self):
        return hash(("FiniteLabeled", self.labels))

    def __repr__(self):
        return f"FiniteLabeled(labels={self.labels!r})"
