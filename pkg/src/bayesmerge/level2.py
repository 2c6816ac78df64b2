"""Distances one level up: between laws on the space of measures.

A posterior given n observations is a probability measure on the space
of probability measures; its Monte Carlo surrogate is a finite mixture
of measures (``MeasureOnMeasures``).  Every ground metric lifts by
replacing points with measures and the ground distance with the chosen
base metric; the target of interest is usually the point mass at the
empirical measure, for which two shortcuts exist (the forced-plan
expected distance for the transport lift, and a sorted-distance formula
for the Prokhorov lift).
"""

from __future__ import annotations

import numpy as np

from .determining import DeterminingClass, Level2Class
from .errors import InvalidInput
from .measures import DiscreteMeasure, TupleClass, empirical
from .metrics import prokhorov, prokhorov_from_matrix, transport_cost, w1_real, dW, ot_cost
from .spaces import GroundSpace, RealLine

_WEIGHT_TOL = 1e-12


class MeasureOnMeasures:
    """A finite mixture of measures: weights over a support of measures.

    Equal support measures are merged and the support is sorted
    deterministically, mirroring ``DiscreteMeasure``.
    """

    def __init__(self, base_space: GroundSpace, support, weights):
        support = list(support)
        w = np.asarray(weights, dtype=float)
        if len(support) == 0:
            raise InvalidInput("empty support")
        if w.shape != (len(support),):
            raise InvalidInput("support and weights must have equal length")
        if np.any(w < -1e-15) or not np.all(np.isfinite(w)):
            raise InvalidInput("weights must be finite and nonnegative")
        w = np.clip(w, 0.0, None)
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise InvalidInput("weights must sum to 1 within 1e-12")
        acc: dict = {}
        order: list[DiscreteMeasure] = []
        for p, wi in zip(support, w):
            if not isinstance(p, DiscreteMeasure) or p.space != base_space:
                raise InvalidInput("support entries must be measures on the base space")
            key = p.sort_key()
            if key in acc:
                acc[key][1] += float(wi)
            else:
                acc[key] = [p, float(wi)]
                order.append(key)
        items = sorted(acc.values(), key=lambda pw: pw[0].sort_key())
        self.base_space = base_space
        self.support = tuple(p for p, _ in items)
        ws = np.array([wi for _, wi in items], dtype=float)
        ws /= ws.sum()
        ws.flags.writeable = False
        self.weights = ws

    @classmethod
    def uniform(cls, base_space, support) -> "MeasureOnMeasures":
        n = len(support)
        return cls(base_space, support, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, p: DiscreteMeasure) -> "MeasureOnMeasures":
        return cls(p.space, [p], [1.0])

    @property
    def support_size(self) -> int:
        return len(self.support)


def base_distance(
    p: DiscreteMeasure,
    q: DiscreteMeasure,
    base_metric: str,
    cls: DeterminingClass | None = None,
) -> float:
    """Ground-level distance named by ``base_metric`` in {G1, P, W}."""
    if base_metric == "G1":
        if isinstance(p.space, RealLine):
            return w1_real(p, q)
        return ot_cost(p, q, 1.0)
    if base_metric == "P":
        return prokhorov(p, q)
    if base_metric == "W":
        if cls is None:
            raise InvalidInput("a determining class is required for the W base metric")
        return dW(p, q, cls)
    raise InvalidInput(f"unknown base metric {base_metric!r}")


def _cross_distances(nu: MeasureOnMeasures, target: MeasureOnMeasures, base_metric, cls):
    C = np.empty((nu.support_size, target.support_size))
    for i, p in enumerate(nu.support):
        for j, q in enumerate(target.support):
            C[i, j] = base_distance(p, q, base_metric, cls)
    return C


def level2_dist(
    nu: MeasureOnMeasures,
    target: MeasureOnMeasures,
    which: str,
    base_metric: str,
    cls: DeterminingClass | None = None,
    cls2: Level2Class | None = None,
) -> float:
    """Lifted distance between two mixtures of measures.

    ``which`` selects the lift: "G1" solves a transportation problem with
    the base distances as costs, "P" runs the Prokhorov feasibility
    search on them, and "W" sums the anchored hat series (``cls2``
    required, with base series metric "W").
    """
    if nu.base_space != target.base_space:
        raise InvalidInput("mixtures live on different base spaces")
    if which == "W":
        if base_metric != "W":
            raise InvalidInput("the W lift is anchored in the W base metric")
        if cls2 is None:
            raise InvalidInput("a level-2 class is required for the W lift")
        a = cls2.moments_of(nu.support, nu.weights)
        b = cls2.moments_of(target.support, target.weights)
        return float(np.dot(cls2.series_weights, np.abs(a - b)))
    C = _cross_distances(nu, target, base_metric, cls)
    if which == "G1":
        return transport_cost(C, nu.weights, target.weights, 1.0)
    if which == "P":
        return prokhorov_from_matrix(C, nu.weights, target.weights)
    raise InvalidInput(f"unknown level-2 metric {which!r}")


def dirac_radius(distances: np.ndarray, weights: np.ndarray) -> float:
    """inf{eps >= 0 : mass at distance > eps is at most eps}.

    The survival function of the distances is a right-continuous step
    function, so the infimum is attained at a distance value or at a
    survival-mass value; both candidate kinds are scanned exactly.
    """
    d = np.asarray(distances, dtype=float)
    w = np.asarray(weights, dtype=float)
    order = np.argsort(d, kind="stable")
    d = d[order]
    w = w[order]
    cum = np.cumsum(w)
    total = cum[-1]
    uniq = np.unique(d)
    # survival mass strictly beyond each unique distance value
    surv = total - cum[np.searchsorted(d, uniq, side="right") - 1]
    if uniq[0] > 0.0:
        uniq = np.concatenate([[0.0], uniq])
        surv = np.concatenate([[total], surv])
    upper = np.concatenate([uniq[1:], [np.inf]])
    best = np.inf
    for t, s, h in zip(uniq, surv, upper):
        cand = max(t, s)
        if cand < h:
            best = min(best, cand)
    return float(best)


def prokhorov_to_dirac(
    nu: MeasureOnMeasures,
    e: DiscreteMeasure,
    base_metric: str,
    cls: DeterminingClass | None = None,
) -> float:
    """Fast Prokhorov lift against a point-mass target.

    Agrees with ``level2_dist(nu, dirac(e), "P", base_metric)`` but only
    needs the sorted distances from the support to ``e``.
    """
    d = np.array([base_distance(p, e, base_metric, cls) for p in nu.support])
    return dirac_radius(d, nu.weights)


def expected_distance_to_dirac(
    nu: MeasureOnMeasures,
    e: DiscreteMeasure,
    base_metric: str,
    cls: DeterminingClass | None = None,
) -> float:
    """Transport lift against a point mass: the coupling is forced, so
    the distance is the mixture-weighted mean base distance."""
    d = np.array([base_distance(p, e, base_metric, cls) for p in nu.support])
    return float(np.dot(d, nu.weights))


def quotient_dist(a: TupleClass, b: TupleClass, which: str) -> float:
    """Distance between tuple classes via their point-configuration measures.

    The class [(x_1..x_m)] is identified isometrically with the uniform
    measure on its points; "G1" and "P" then delegate to the ground
    metrics on those two m-point measures.
    """
    if not isinstance(a, TupleClass) or not isinstance(b, TupleClass):
        raise InvalidInput("quotient_dist expects tuple classes")
    if a.space != b.space:
        raise InvalidInput("tuple classes live on different spaces")
    if a.m != b.m:
        raise InvalidInput("tuple classes must have equal arity")
    pa = empirical(a.points, a.space)
    pb = empirical(b.points, b.space)
    if which == "G1":
        if isinstance(a.space, RealLine):
            return w1_real(pa, pb)
        return ot_cost(pa, pb, 1.0)
    if which == "P":
        return prokhorov(pa, pb)
    raise InvalidInput(f"unknown quotient metric {which!r}")
