"""Finite-support probability measures and the operations on them.

``DiscreteMeasure`` is the universal carrier: empirical measures,
posterior draws, predictive laws, and their pushforwards are all finite
mixtures of point masses.  Constructors canonicalize: equal atoms are
merged exactly (float equality, no tolerance), atoms are stored in a
deterministic sorted order, and weights are renormalized after merging.

``TupleClass`` is an order-free m-tuple (a multiset of points); measures
whose atoms are ``TupleClass`` values represent symmetric laws on the
quotient of the m-fold product space.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput, ResourceLimit
from .spaces import EuclideanRd, FiniteLabeled, GroundSpace, RealLine

_WEIGHT_TOL = 1e-12


class TupleClass:
    """An m-tuple of points modulo coordinate permutations.

    Coordinates are canonicalized and sorted on construction (labels by
    index, reals by value, vectors lexicographically) so equal multisets
    compare and hash equal.
    """

    __slots__ = ("space", "points")

    def __init__(self, space: GroundSpace, points):
        pts = [space.canon(p) for p in points]
        if not pts:
            raise InvalidInput("a tuple class needs at least one point")
        pts.sort(key=space.sort_key)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "points", tuple(pts))

    def __setattr__(self, name, value):
        raise AttributeError("TupleClass is immutable")

    def __getstate__(self):
        return {s: getattr(self, s) for s in self.__slots__}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)

    @property
    def m(self) -> int:
        return len(self.points)

    def sort_key(self):
        return tuple(self.space.sort_key(p) for p in self.points)

    def __eq__(self, other):
        return (
            isinstance(other, TupleClass)
            and other.space == self.space
            and other.points == self.points
        )

    def __hash__(self):
        return hash(self.points)

    def __repr__(self):
        return f"TupleClass({self.points!r})"


class DiscreteMeasure:
    """A probability measure with finite support.

    Invariants: weights are nonnegative, sum to 1 within 1e-12 before the
    renormalization pass (and exactly 1 up to float rounding after it),
    and atoms are deduplicated and sorted.  Instances are immutable.
    """

    __slots__ = ("space", "_pts", "_w", "_arity", "_cum")

    def __init__(self, space: GroundSpace, atoms, weights):
        atoms = list(atoms)
        w = np.asarray(weights, dtype=float)
        if len(atoms) == 0:
            raise InvalidInput("a measure needs at least one atom")
        if w.shape != (len(atoms),):
            raise InvalidInput("atoms and weights must have equal length")
        if not np.all(np.isfinite(w)):
            raise InvalidInput("weights must be finite")
        if np.any(w < -1e-15):
            raise InvalidInput("weights must be nonnegative")
        w = np.clip(w, 0.0, None)
        total = float(w.sum())
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise InvalidInput(f"weights sum to {total!r}, expected 1 within {_WEIGHT_TOL}")

        if atoms and isinstance(atoms[0], TupleClass):
            pts, w = _merge_tuples(space, atoms, w)
            arity = pts[0].m if pts else 0
        else:
            pts, w = _merge_points(space, atoms, w)
            arity = 0

        w = w / w.sum()
        keep = w > 0.0
        if isinstance(pts, np.ndarray):
            pts = pts[keep]
        else:
            pts = tuple(p for p, k in zip(pts, keep) if k)
        w = w[keep]
        if len(w) == 0:
            raise InvalidInput("all weights are zero")
        w.flags.writeable = False
        if isinstance(pts, np.ndarray):
            pts.flags.writeable = False
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "_pts", pts)
        object.__setattr__(self, "_w", w)
        object.__setattr__(self, "_arity", arity)
        object.__setattr__(self, "_cum", None)

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteMeasure is immutable")

    def __getstate__(self):
        return {s: getattr(self, s) for s in self.__slots__}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)

    # -- accessors -----------------------------------------------------------

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def tuple_arity(self) -> int:
        """Arity m when atoms are TupleClass values, else 0."""
        return self._arity

    @property
    def atoms(self) -> tuple:
        if self._arity:
            return self._pts
        if isinstance(self.space, RealLine):
            return tuple(float(x) for x in self._pts)
        if isinstance(self.space, EuclideanRd):
            return tuple(tuple(float(c) for c in row) for row in self._pts)
        return tuple(self.space.labels[i] for i in self._pts)

    @property
    def support_size(self) -> int:
        return len(self._w)

    def as_dict(self) -> dict:
        return dict(zip(self.atoms, (float(x) for x in self._w)))

    def codes(self) -> np.ndarray:
        """Internal point codes (floats, rows, or label indices)."""
        if self._arity:
            raise InvalidInput("tuple-class measures have no array codes")
        return self._pts

    def sort_key(self):
        return (tuple(np.ravel(self._pts)) if not self._arity
                else tuple(a.sort_key() for a in self._pts),
                tuple(float(x) for x in self._w))

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure) or other.space != self.space:
            return False
        if self._arity != other._arity:
            return False
        if self._arity:
            return self._pts == other._pts and np.array_equal(self._w, other._w)
        return np.array_equal(self._pts, other._pts) and np.array_equal(self._w, other._w)

    def __hash__(self):
        return hash(self.sort_key())

    def __repr__(self):
        pairs = ", ".join(f"{a!r}: {w:.6g}" for a, w in list(self.as_dict().items())[:6])
        more = "" if self.support_size <= 6 else f", ... ({self.support_size} atoms)"
        return f"DiscreteMeasure({{{pairs}{more}}})"

    def _cumweights(self) -> np.ndarray:
        if self._cum is None:
            object.__setattr__(self, "_cum", np.cumsum(self._w))
        return self._cum


def _merge_points(space, atoms, w):
    if isinstance(space, RealLine):
        try:
            xs = np.asarray(atoms, dtype=float)
        except (TypeError, ValueError):
            raise InvalidInput("atoms must be finite reals") from None
        if xs.ndim != 1 or not np.all(np.isfinite(xs)):
            raise InvalidInput("atoms must be finite reals")
        ux, inv = np.unique(xs, return_inverse=True)
        return ux, np.bincount(inv, weights=w, minlength=len(ux))
    if isinstance(space, EuclideanRd):
        rows = np.array([space.canon(a) for a in atoms], dtype=float)
        ux, inv = np.unique(rows, axis=0, return_inverse=True)
        return ux, np.bincount(np.ravel(inv), weights=w, minlength=len(ux))
    if isinstance(space, FiniteLabeled):
        idx = np.array([space.index_of(space.canon(a)) for a in atoms], dtype=np.intp)
        full = np.bincount(idx, weights=w, minlength=len(space.labels))
        keep = np.flatnonzero(full > 0)
        return keep.astype(np.intp), full[keep]
    raise InvalidInput(f"unknown space {space!r}")


def _merge_tuples(space, atoms, w):
    acc: dict[TupleClass, float] = {}
    for a, wi in zip(atoms, w):
        if not isinstance(a, TupleClass) or a.space != space:
            raise InvalidInput("mixed atom kinds in one measure")
        acc[a] = acc.get(a, 0.0) + float(wi)
    m = next(iter(acc)).m
    if any(t.m != m for t in acc):
        raise InvalidInput("tuple atoms must share one arity")
    keys = sorted(acc, key=lambda t: t.sort_key())
    return tuple(keys), np.array([acc[k] for k in keys], dtype=float)


def dirac(space: GroundSpace, atom) -> DiscreteMeasure:
    """Point mass at a single atom."""
    return DiscreteMeasure(space, [atom], [1.0])


def empirical(sample, space: GroundSpace) -> DiscreteMeasure:
    """Uniform measure on an observed sample, duplicates merged."""
    sample = list(sample) if not isinstance(sample, np.ndarray) else sample
    n = len(sample)
    if n == 0:
        raise InvalidInput("empirical measure of an empty sample")
    return DiscreteMeasure(space, sample, np.full(n, 1.0 / n))


def cdf(mu: DiscreteMeasure, x) -> float:
    """Right-continuous distribution function of a real-line measure."""
    if not isinstance(mu.space, RealLine) or mu.tuple_arity:
        raise InvalidInput("cdf is defined for measures on the real line")
    x = float(x)
    if np.isnan(x):
        raise InvalidInput("cdf probe must not be NaN")
    pos = int(np.searchsorted(mu.codes(), x, side="right"))
    if pos == 0:
        return 0.0
    return float(mu._cumweights()[pos - 1])


def pushforward(mu: DiscreteMeasure, g) -> DiscreteMeasure:
    """Image measure of ``mu`` under a real-valued map ``g``.

    ``g`` may be vectorized over a numpy array of real atoms; otherwise it
    is applied atom by atom.  Weights are preserved and colliding images
    are merged.
    """
    if mu.tuple_arity:
        raise InvalidInput("pushforward of tuple-class measures is not defined")
    if isinstance(mu.space, RealLine):
        try:
            vals = np.asarray(g(mu.codes()), dtype=float)
            if vals.shape != mu.codes().shape:
                raise TypeError
        except (TypeError, ValueError):
            vals = np.array([float(g(a)) for a in mu.atoms], dtype=float)
    else:
        vals = np.array([float(g(a)) for a in mu.atoms], dtype=float)
    return DiscreteMeasure(RealLine(), vals, mu.weights)


def mean_of(mu: DiscreteMeasure, g=None) -> float:
    """Expectation of ``g`` (identity on the real line by default)."""
    if g is None:
        if not isinstance(mu.space, RealLine) or mu.tuple_arity:
            raise InvalidInput("a map is required off the real line")
        return float(np.dot(mu.codes(), mu.weights))
    if isinstance(mu.space, RealLine) and not mu.tuple_arity:
        try:
            vals = np.asarray(g(mu.codes()), dtype=float)
            if vals.shape == mu.codes().shape:
                return float(np.dot(vals, mu.weights))
        except (TypeError, ValueError):
            pass
    vals = np.array([float(g(a)) for a in mu.atoms], dtype=float)
    return float(np.dot(vals, mu.weights))


def product_power(mu: DiscreteMeasure, m: int, budget: int = 10**6) -> DiscreteMeasure:
    """m-fold product of ``mu`` with itself, folded onto tuple classes.

    The weight of each multiset class is the total product weight of the
    ordered tuples it contains.
    """
    m = int(m)
    if m < 1:
        raise InvalidInput("m must be a positive integer")
    if mu.tuple_arity:
        raise InvalidInput("product_power input must be a ground-space measure")
    k = mu.support_size
    if k**m > budget:
        raise ResourceLimit(f"{k}^{m} ordered tuples exceed the budget of {budget}")
    atoms = mu.atoms
    w = mu.weights
    acc: dict[tuple, float] = {}
    idx = [0] * m
    while True:
        key = tuple(sorted(idx))
        prod = 1.0
        for i in idx:
            prod *= w[i]
        acc[key] = acc.get(key, 0.0) + prod
        j = m - 1
        while j >= 0 and idx[j] == k - 1:
            idx[j] = 0
            j -= 1
        if j < 0:
            break
        idx[j] += 1
    tuples = [TupleClass(mu.space, [atoms[i] for i in key]) for key in acc]
    return DiscreteMeasure(mu.space, tuples, np.array(list(acc.values())))


def marginal(tm: DiscreteMeasure) -> DiscreteMeasure:
    """Single-coordinate marginal of a tuple-class measure.

    Every coordinate of a symmetric tuple law has the same marginal, so
    the multiset representative is averaged directly.
    """
    if not tm.tuple_arity:
        raise InvalidInput("marginal needs a tuple-class measure")
    m = tm.tuple_arity
    pts: list = []
    ws: list = []
    for t, w in zip(tm.atoms, tm.weights):
        for p in t.points:
            pts.append(p)
            ws.append(w / m)
    return DiscreteMeasure(tm.space, pts, np.array(ws))


# -- text serialization ------------------------------------------------------
# Line format: "<atom-repr> <weight>".  Real atoms use repr (round-trip
# exact); R^d atoms are comma-joined coordinates; labels are bare tokens
# (no whitespace).


def serialize(mu: DiscreteMeasure) -> str:
    if mu.tuple_arity:
        raise InvalidInput("tuple-class measures have no text form")
    lines = []
    for a, w in zip(mu.atoms, mu.weights):
        if isinstance(mu.space, RealLine):
            tok = repr(float(a))
        elif isinstance(mu.space, EuclideanRd):
            tok = ",".join(repr(float(c)) for c in a)
        else:
            tok = str(a)
            if any(ch.isspace() for ch in tok):
                raise InvalidInput(f"label {tok!r} contains whitespace")
        lines.append(f"{tok} {float(w)!r}")
    return "\n".join(lines) + "\n"


def deserialize(text: str, space: GroundSpace | None = None) -> DiscreteMeasure:
    """Parse the line format, inferring the space when not given.

    Inference rule: every atom token parses as a float => real line;
    tokens contain commas => R^d; otherwise the tokens become labels of a
    finite space with the discrete 0/1 metric.
    """
    toks: list[str] = []
    ws: list[float] = []
    for ln in text.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        parts = ln.rsplit(None, 1)
        if len(parts) != 2:
            raise InvalidInput(f"malformed measure line: {ln!r}")
        toks.append(parts[0])
        try:
            ws.append(float(parts[1]))
        except ValueError:
            raise InvalidInput(f"bad weight in line: {ln!r}") from None
    if not toks:
        raise InvalidInput("empty measure file")

    if space is None:
        space = _infer_space(toks)
    atoms: list = []
    for t in toks:
        if isinstance(space, RealLine):
            atoms.append(float(t))
        elif isinstance(space, EuclideanRd):
            atoms.append(tuple(float(c) for c in t.split(",")))
        else:
            atoms.append(t)
    return DiscreteMeasure(space, atoms, np.array(ws))


def _infer_space(tokens) -> GroundSpace:
    if any("," in t for t in tokens):
        dims = {len(t.split(",")) for t in tokens}
        if len(dims) != 1:
            raise InvalidInput("inconsistent coordinate counts")
        return EuclideanRd(dims.pop())
    try:
        for t in tokens:
            float(t)
        return RealLine()
    except ValueError:
        return FiniteLabeled.unit(sorted(set(tokens)))
