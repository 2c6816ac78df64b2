"""Rate sequences, bound constants, and partition functionals.

The normalizations b_n and the right-hand-side constants of the merging
bounds: the iterated-logarithm rate sqrt(n / loglog n) with constants
sqrt(2) and sqrt(2) m, the CDF-shape integral of sqrt(2 F (1 - F)), its
moment-based majorant, the partition functional Pi_r, and the plug-in
Y statistic estimated from a trajectory of Prokhorov distances.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NumericalWarning
from .measures import DiscreteMeasure
from .spaces import EuclideanRd, FiniteLabeled, RealLine

RATE_KINDS = ("sqrt_n_over_loglog", "n_over_log_quarter", "n_over_log_eighth")


def rate_value(kind: str, n: float) -> float:
    """The raw b_n formula, gated only by the domain of the logs."""
    n = float(n)
    if kind == "sqrt_n_over_loglog":
        if n <= math.e**math.e:
            raise InvalidInput("loglog rate needs n > e^e")
        return math.sqrt(n / math.log(math.log(n)))
    if kind == "n_over_log_quarter":
        if n <= 1.0:
            raise InvalidInput("log rate needs n > 1")
        return (n / math.log(n)) ** 0.25
    if kind == "n_over_log_eighth":
        if n <= 1.0:
            raise InvalidInput("log rate needs n > 1")
        return (n / math.log(n)) ** 0.125
    raise InvalidInput(f"unknown rate kind {kind!r}")


@dataclass(frozen=True)
class RateSchedule:
    kind: str
    n_min: int = 16

    def __post_init__(self):
        if self.kind not in RATE_KINDS:
            raise InvalidInput(f"unknown rate kind {self.kind!r}")
        if self.n_min < 16:
            raise InvalidInput("n_min must be at least 16")

    def rate(self, n: int) -> float:
        if n < self.n_min:
            raise InvalidInput(f"n={n} below schedule n_min={self.n_min}")
        return rate_value(self.kind, n)

    def rates(self, ns) -> np.ndarray:
        return np.array([self.rate(int(n)) for n in ns])


@dataclass(frozen=True)
class BoundReport:
    """A named bound constant; per_replicate marks data-dependent ones."""

    constant_name: str
    value: float
    per_replicate: bool
    window: tuple | None = None

    def __post_init__(self):
        if not (self.value >= 0.0 and math.isfinite(self.value)):
            raise InvalidInput("bound values must be finite and nonnegative")


def gini_bound(F, grid=None) -> float:
    """Integral of sqrt(2 F (1 - F)) over the line.

    For a finite-support measure the CDF is a step function and the
    integral is the exact sum of gap * sqrt(2 F (1 - F)) over the
    inter-atom gaps.  For a callable CDF a trapezoid rule on ``grid`` is
    used; a warning is raised when the integrand has not decayed at the
    grid ends.
    """
    if isinstance(F, DiscreteMeasure):
        if not isinstance(F.space, RealLine) or F.tuple_arity:
            raise InvalidInput("gini_bound needs a real-line measure")
        xs = F.codes()
        return gini_bound_sorted(xs, F.weights)
    if grid is None:
        raise InvalidInput("a grid is required for a callable CDF")
    xs = np.asarray(grid, dtype=float)
    if len(xs) < 3 or np.any(np.diff(xs) <= 0):
        raise InvalidInput("grid must be increasing with at least 3 points")
    vals = np.array([float(F(x)) for x in xs])
    if np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12):
        raise InvalidInput("CDF values must lie in [0, 1]")
    integrand = np.sqrt(2.0 * np.clip(vals * (1.0 - vals), 0.0, None))
    peak = integrand.max()
    if peak > 0 and max(integrand[0], integrand[-1]) > 0.01 * peak:
        warnings.warn(
            "integrand has not decayed at the grid ends; tail may diverge",
            NumericalWarning,
        )
    return float(np.trapezoid(integrand, xs))


def gini_bound_sorted(xs: np.ndarray, ws: np.ndarray) -> float:
    """Step-CDF shape integral for pre-sorted atoms and weights."""
    if len(xs) == 1:
        return 0.0
    c = np.cumsum(ws)[:-1]
    return float(np.sum(np.diff(xs) * np.sqrt(2.0 * np.clip(c * (1.0 - c), 0.0, None))))


def moment_bound(mu: DiscreteMeasure, eps: float) -> float:
    """The moment majorant (8 * mean(|x| + |x|^(2+eps)/(2+eps)))^(1/2).

    Dominates ``gini_bound`` for every distribution with the matching
    moment finite; exact on finite supports.
    """
    if eps <= 0:
        raise InvalidInput("eps must be positive")
    if not isinstance(mu.space, RealLine) or mu.tuple_arity:
        raise InvalidInput("moment_bound needs a real-line measure")
    x = np.abs(mu.codes())
    inner = float(np.dot(mu.weights, x + x ** (2.0 + eps) / (2.0 + eps)))
    return math.sqrt(8.0 * inner)


@dataclass(frozen=True)
class PartitionScheme:
    """Dyadic-cube partitions over growing boxes, refinement 1/m.

    Level m partitions the box [-radius(m), radius(m)]^d into cubes of
    side 1/m (diameter <= sqrt(d)/m); everything outside the box is one
    extra cell.
    """

    levels: tuple = (1, 2, 4, 8, 16, 32)
    radius_factor: float = 1.0

    def radius(self, m: int) -> float:
        return self.radius_factor * m


def pi_r(p: DiscreteMeasure, r: float, scheme: PartitionScheme | None = None) -> float:
    """Partition functional: liminf over refinements of
    sum [p(A)(1 - p(A))]^(1/r).

    On a finite space the sum stabilizes once the partition separates the
    atoms, at sum_j [p_j (1 - p_j)]^(1/r), returned exactly.  On R^d the
    sums are evaluated along the scheme's levels; once they stabilize the
    common value is the liminf and is returned.  If the last two levels
    still disagree a warning is raised and the running minimum over the
    levels is returned as a conservative surrogate.
    """
    if r <= 2:
        raise InvalidInput("the partition functional requires r > 2")
    w = p.weights
    if isinstance(p.space, FiniteLabeled):
        return float(np.sum((w * (1.0 - w)) ** (1.0 / r)))
    if not isinstance(p.space, (RealLine, EuclideanRd)) or p.tuple_arity:
        raise InvalidInput("pi_r needs a finite-space or Euclidean measure")
    scheme = scheme or PartitionScheme()
    pts = p.codes()
    if pts.ndim == 1:
        pts = pts[:, None]
    d = pts.shape[1]
    sums = []
    for m in scheme.levels:
        rad = scheme.radius(m)
        inside = np.all(np.abs(pts) <= rad, axis=1)
        cells: dict = {}
        out_mass = float(w[~inside].sum())
        # cube side 1/(m sqrt(d)) keeps the cell diameter at most 1/m
        cell_idx = np.floor(pts[inside] * (m * math.sqrt(d))).astype(np.int64)
        for key, wi in zip(map(tuple, cell_idx), w[inside]):
            cells[key] = cells.get(key, 0.0) + float(wi)
        masses = np.array(list(cells.values()) + ([out_mass] if out_mass > 0 else []))
        sums.append(float(np.sum((masses * (1.0 - masses)) ** (1.0 / r))))
    if len(sums) >= 2 and abs(sums[-1] - sums[-2]) > 1e-12:
        warnings.warn(
            "partition sums have not stabilized along the configured levels",
            NumericalWarning,
        )
        return float(min(sums))
    return float(sums[-1])


def y_estimator(trajectory, window_fraction: float = 0.1) -> BoundReport:
    """Plug-in Y statistic from a (n, Prokhorov distance) trajectory.

    Y = (1.5 * max over the trailing window [n_hi * window_fraction,
    n_hi] of sqrt(n / log n) * d)^(1/2); the window is recorded in the
    report.
    """
    pts = [(int(n), float(d)) for n, d in trajectory]
    if not pts:
        raise InvalidInput("empty trajectory")
    n_hi = max(n for n, _ in pts)
    lo = window_fraction * n_hi
    window = [(n, d) for n, d in pts if lo <= n <= n_hi]
    if not window:
        raise InvalidInput("trajectory window is empty")
    peak = max(math.sqrt(n / math.log(n)) * d for n, d in window)
    return BoundReport(
        constant_name="Y",
        value=math.sqrt(1.5 * peak),
        per_replicate=True,
        window=(int(math.ceil(lo)), int(n_hi)),
    )
