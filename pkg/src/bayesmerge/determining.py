"""Countable Lipschitz test-function families for the series metrics.

The generators are hat functions

    g(x) = clamp(1 - d(x, c) / r, 0, 1)

with centers ``c`` on dyadic nets of a bounding region and radii cycling
through the scales 1, 1/2, 1/4, ...  A hat takes values in [0, 1], is
(1/r)-Lipschitz, and has bounded-Lipschitz norm exactly 1 + 1/r, which
makes the normalization in the series metric explicit.  Enumeration
interleaves scales diagonally (Cantor order over (scale, position)), so
extending the truncation never reorders the existing prefix.

``Level2Class`` repeats the construction one level up: hats on the space
of measures, centered at configured anchor measures, with the distance
to an anchor measured by the ground-level series metric.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput
from .measures import DiscreteMeasure
from .spaces import EuclideanRd, FiniteLabeled, GroundSpace, RealLine


def _diagonal_order(per_scale_counts):
    """Yield (scale, position) pairs in Cantor-diagonal order.

    ``per_scale_counts[s]`` is the number of positions available at scale
    s; exhausted scales are skipped.  The order is deterministic and
    prefix-stable: adding scales or positions only appends.
    """
    diag = 0
    emitted = 0
    total = sum(per_scale_counts)
    while emitted < total:
        for s in range(min(diag, len(per_scale_counts) - 1), -1, -1):
            j = diag - s
            if j < per_scale_counts[s]:
                yield s, j
                emitted += 1
        diag += 1


class DeterminingClass:
    """Indexed hat-function family g_1, ..., g_K on a ground space.

    Attributes
    ----------
    space : GroundSpace
    centers : list of canonical points, one per generator
    radii : ndarray of radii r_k > 0
    bl_norms : ndarray, always 1 + 1/r_k for hat functions
    truncation_K : number of generators kept in the series
    """

    def __init__(self, space: GroundSpace, centers, radii, truncation_K: int | None = None):
        self.space = space
        self.centers = [space.canon(c) for c in centers]
        self.radii = np.asarray(radii, dtype=float)
        if len(self.centers) != len(self.radii):
            raise InvalidInput("centers and radii must have equal length")
        if np.any(self.radii <= 0):
            raise InvalidInput("radii must be positive")
        self.truncation_K = int(truncation_K if truncation_K is not None else len(self.centers))
        if not (1 <= self.truncation_K <= len(self.centers)):
            raise InvalidInput("truncation_K out of range")
        self.bl_norms = 1.0 + 1.0 / self.radii
        self._center_codes = self._encode_centers()

    def _encode_centers(self):
        if isinstance(self.space, RealLine):
            return np.array(self.centers, dtype=float)
        if isinstance(self.space, EuclideanRd):
            return np.array(self.centers, dtype=float)
        return np.array([self.space.index_of(c) for c in self.centers], dtype=np.intp)

    @classmethod
    def for_space(
        cls,
        space: GroundSpace,
        truncation_K: int = 24,
        region: tuple[float, float] = (-8.0, 8.0),
        n_scales: int = 7,
    ) -> "DeterminingClass":
        """Default dyadic-net construction for a space.

        On the real line (and R^d) scale s places centers r_s = 2^-s
        apart over ``region``; on a finite space the centers are the
        labels themselves, cycled through the scales.
        """
        lo, hi = float(region[0]), float(region[1])
        if hi <= lo:
            raise InvalidInput("empty bounding region")
        centers: list = []
        radii: list[float] = []
        if isinstance(space, FiniteLabeled):
            counts = [len(space.labels)] * n_scales
            for s, j in _diagonal_order(counts):
                centers.append(space.labels[j])
                radii.append(2.0**-s)
                if len(centers) >= truncation_K:
                    break
        elif isinstance(space, RealLine):
            per_scale = [int(np.floor((hi - lo) / 2.0**-s)) + 1 for s in range(n_scales)]
            for s, j in _diagonal_order(per_scale):
                centers.append(lo + j * 2.0**-s)
                radii.append(2.0**-s)
                if len(centers) >= truncation_K:
                    break
        elif isinstance(space, EuclideanRd):
            d = space.dim
            grids = []
            for s in range(n_scales):
                r = 2.0**-s
                axis = np.arange(lo, hi + r / 2, r)
                pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
                grids.append(pts)
            counts = [len(g) for g in grids]
            for s, j in _diagonal_order(counts):
                centers.append(tuple(grids[s][j]))
                radii.append(2.0**-s)
                if len(centers) >= truncation_K:
                    break
        else:
            raise InvalidInput(f"unknown space {space!r}")
        if len(centers) < truncation_K:
            raise InvalidInput("region/scale configuration yields too few generators")
        return cls(space, centers, radii, truncation_K)

    # -- evaluation ----------------------------------------------------------

    def values_at(self, codes: np.ndarray, normalized: bool = True) -> np.ndarray:
        """Matrix of generator values at internal point codes, shape (K, n).

        With ``normalized`` the rows are g_k / (1 + 1/r_k), the integrands
        of the series metric.
        """
        K = self.truncation_K
        dist = self.space.pairwise(self._center_codes[:K], codes)
        vals = np.clip(1.0 - dist / self.radii[:K, None], 0.0, 1.0)
        if normalized:
            vals /= self.bl_norms[:K, None]
        return vals

    def moments(self, mu: DiscreteMeasure) -> np.ndarray:
        """Vector of normalized-generator means under ``mu``."""
        if mu.space != self.space or mu.tuple_arity:
            raise InvalidInput("measure and class live on different spaces")
        return self.values_at(mu.codes()) @ mu.weights

    @property
    def series_weights(self) -> np.ndarray:
        """The summable weights 2^-k, k = 1..K."""
        return 2.0 ** -np.arange(1, self.truncation_K + 1)

    @property
    def tail_bound(self) -> float:
        """Upper bound on the discarded series tail, 2 * 2^-K."""
        return 2.0 * 2.0**-self.truncation_K

    def product_tail_bound(self, m: int) -> float:
        """Tail bound for the m-index product series."""
        return 2.0 * (1.0 - (1.0 - 2.0**-self.truncation_K) ** m)

    def embedding(self) -> np.ndarray:
        """For finite spaces: matrix A with series distance ||A(p - q)||_1.

        Row k is 2^-k * g_k^*(labels); measures enter as full weight
        vectors over the label set.
        """
        if not isinstance(self.space, FiniteLabeled):
            raise InvalidInput("embedding matrices exist only on finite spaces")
        codes = np.arange(len(self.space.labels), dtype=np.intp)
        return self.series_weights[:, None] * self.values_at(codes)


class Level2Class:
    """Hat functions on the space of measures, centered at anchors.

    The distance to an anchor is the ground-level series metric; the
    anchors are configuration (typical choice: prior mean, a few prior
    draws, the uniform measure).  BL norms are again 1 + 1/r.
    """

    def __init__(
        self,
        ground: DeterminingClass,
        anchors,
        radii=None,
        truncation_K: int | None = None,
        n_scales: int = 5,
    ):
        self.ground = ground
        anchors = list(anchors)
        if not anchors:
            raise InvalidInput("at least one anchor measure is required")
        for a in anchors:
            if not isinstance(a, DiscreteMeasure) or a.space != ground.space:
                raise InvalidInput("anchors must be measures on the ground space")
        if radii is None:
            counts = [len(anchors)] * n_scales
            order = list(_diagonal_order(counts))
            self.anchors = [anchors[j] for _, j in order]
            self.radii = np.array([2.0**-s for s, _ in order])
        else:
            self.anchors = anchors
            self.radii = np.asarray(radii, dtype=float)
            if len(self.anchors) != len(self.radii):
                raise InvalidInput("anchors and radii must have equal length")
        if np.any(self.radii <= 0):
            raise InvalidInput("radii must be positive")
        self.truncation_K = int(truncation_K if truncation_K is not None else len(self.anchors))
        if not (1 <= self.truncation_K <= len(self.anchors)):
            raise InvalidInput("truncation_K out of range")
        self.bl_norms = 1.0 + 1.0 / self.radii
        self._anchor_moments = np.stack([ground.moments(a) for a in self.anchors[: self.truncation_K]])

    def values_for_moments(self, moment_rows: np.ndarray) -> np.ndarray:
        """Normalized hat values for measures given as moment vectors.

        ``moment_rows`` has one ground-class moment vector per measure;
        returns shape (K2, n_measures).
        """
        K = self.truncation_K
        sw = self.ground.series_weights
        # ground series distance to each anchor
        dist = np.abs(moment_rows[None, :, :] - self._anchor_moments[:K, None, :])
        dist = np.tensordot(dist, sw, axes=([2], [0]))
        vals = np.clip(1.0 - dist / self.radii[:K, None], 0.0, 1.0)
        return vals / self.bl_norms[:K, None]

    def moments_of(self, measures, weights) -> np.ndarray:
        """Mean normalized hat values under a mixture of measures."""
        rows = np.stack([self.ground.moments(p) for p in measures])
        return self.values_for_moments(rows) @ np.asarray(weights, dtype=float)

    @property
    def series_weights(self) -> np.ndarray:
        return 2.0 ** -np.arange(1, self.truncation_K + 1)

    @property
    def tail_bound(self) -> float:
        return 2.0 * 2.0**-self.truncation_K
