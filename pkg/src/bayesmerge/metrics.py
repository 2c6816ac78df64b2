"""Probability distances between finite-support measures.

Ground-level metrics:

* ``w1_real``      exact order-1 transport cost on the real line via the
                   CDF-difference integral.
* ``ot_cost``      exact order-p transport cost on any space, solved as a
                   transportation linear program.
* ``prokhorov``    the minimal enlargement/defect radius, computed by
                   binary search over a coupling-feasibility check
                   (maximum flow on the bipartite support graph).
* ``prokhorov_bruteforce``  exact subset-definition evaluation, the
                   oracle for ``prokhorov`` on small supports.
* ``fortet_mourier``  supremum of mean differences over a bounded
                   Lipschitz test ball, solved as a linear program over
                   function values on the union support.
* ``dW`` / ``dW_product``  the weighted series metrics built from a
                   ``DeterminingClass`` at level one and on tuple laws.

All functions are pure; solver scratch space is per call.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .determining import DeterminingClass
from .errors import InvalidInput, ResourceLimit
from .flow import WEIGHT_SCALE, max_subcoupling_mass, scale_weights
from .measures import DiscreteMeasure
from .spaces import RealLine

OT_BUDGET = 200 * 200
FM_BUDGET = 150
_LP_OPTS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _check_pair(mu: DiscreteMeasure, nu: DiscreteMeasure):
    if mu.space != nu.space:
        raise InvalidInput("measures live on different spaces")
    if mu.tuple_arity or nu.tuple_arity:
        raise InvalidInput("ground metrics need ground-space measures")


def w1_real(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Order-1 transport distance on the real line, |F - G| integrated.

    Exact on the merged sorted atom grid; equals ``ot_cost(mu, nu, 1)``.
    """
    _check_pair(mu, nu)
    if not isinstance(mu.space, RealLine):
        raise InvalidInput("w1_real requires real-line measures")
    return _w1_sorted(mu.codes(), mu.weights, nu.codes(), nu.weights)


def _w1_sorted(xs, wx, ys, wy) -> float:
    """CDF-difference integral for two sorted atom/weight arrays."""
    grid = np.concatenate([xs, ys])
    grid.sort(kind="mergesort")
    cx = np.concatenate([[0.0], np.cumsum(wx)])
    cy = np.concatenate([[0.0], np.cumsum(wy)])
    fx = cx[np.searchsorted(xs, grid[:-1], side="right")]
    fy = cy[np.searchsorted(ys, grid[:-1], side="right")]
    return float(np.sum(np.abs(fx - fy) * np.diff(grid)))


def transport_cost(C: np.ndarray, w: np.ndarray, v: np.ndarray, p: float = 1.0) -> float:
    """Optimal ((sum gamma_ij C_ij^p))^(1/p) over couplings of (w, v).

    ``C`` is a nonnegative cost (distance) matrix.  Solved as a dense
    transportation LP; the HiGHS simplex returns a vertex optimum.
    """
    if p < 1:
        raise InvalidInput("transport order p must be >= 1")
    n, m = C.shape
    if n * m > OT_BUDGET:
        raise ResourceLimit(f"{n}x{m} transport exceeds the {OT_BUDGET} cell budget")
    cost = np.ravel(C**p if p != 1 else C)
    rows = sparse.kron(sparse.eye(n), np.ones((1, m)))
    cols = sparse.kron(np.ones((1, n)), sparse.eye(m))
    A_eq = sparse.vstack([rows, cols], format="csc")
    b_eq = np.concatenate([w, v])
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs", options=_LP_OPTS)
    if res.status != 0:
        raise InvalidInput(f"transport LP failed: {res.message}")
    val = max(res.fun, 0.0)
    return float(val ** (1.0 / p)) if p != 1 else float(val)


def ot_cost(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 1.0) -> float:
    """Order-p transport cost between two measures on one space."""
    _check_pair(mu, nu)
    C = mu.space.pairwise(mu.codes(), nu.codes())
    return transport_cost(C, mu.weights, nu.weights, p)


# -- Prokhorov ----------------------------------------------------------------


def _subcoupling_mass(D: np.ndarray, iw, iv, eps: float) -> float:
    """Largest coupling mass supported on pairs with D <= eps (closed balls).

    Solved as an exact maximum flow over integer-scaled weights; the
    quantization is 2^-60 per atom, far below every tolerance here.
    """
    mask = D <= eps + 1e-15
    return max_subcoupling_mass(iw, iv, mask) / WEIGHT_SCALE


def prokhorov_from_matrix(D: np.ndarray, w: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> float:
    """Prokhorov radius for a distance matrix, by binary search.

    ``eps`` is feasible iff a subcoupling of mass >= 1 - eps exists on
    pairs at distance <= eps; the search narrows to well below ``tol``.
    """
    iw, iv = scale_weights(w), scale_weights(v)
    slack = (D.shape[0] + D.shape[1] + 2) / WEIGHT_SCALE

    def feasible(eps: float) -> bool:
        return _subcoupling_mass(D, iw, iv, eps) >= 1.0 - eps - slack

    if feasible(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol * 1e-2:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def prokhorov(mu: DiscreteMeasure, nu: DiscreteMeasure, tol: float = 1e-9) -> float:
    """Prokhorov distance between two measures on one space, in [0, 1]."""
    _check_pair(mu, nu)
    n, m = mu.support_size, nu.support_size
    if n > 200 or m > 200:
        raise ResourceLimit("prokhorov support budget is 200 atoms per side")
    D = mu.space.pairwise(mu.codes(), nu.codes())
    return prokhorov_from_matrix(D, mu.weights, nu.weights, tol)


def _one_sided_subset_inf(D: np.ndarray, w: np.ndarray, v: np.ndarray) -> float:
    """sup over subsets B of inf{eps >= 0 : mu(B) <= nu(B^eps) + eps}.

    For a fixed B the map eps -> nu(B^eps) is a right-continuous step
    function of the distances from B, so the inf is attained at one of
    finitely many candidates (a distance breakpoint or a mass gap).
    """
    n = len(w)
    best = 0.0
    for mask_bits in range(1, 2**n):
        mask = np.array([(mask_bits >> i) & 1 for i in range(n)], dtype=bool)
        muB = float(w[mask].sum())
        dmin = D[mask].min(axis=0)
        order = np.argsort(dmin, kind="stable")
        ds = dmin[order]
        cums = np.cumsum(v[order])
        # segment array: thresholds t_k with nu(B^eps) = c_k on [t_k, t_{k+1})
        thresholds = [0.0]
        masses = [0.0]
        for d, c in zip(ds, cums):
            if d == thresholds[-1]:
                masses[-1] = c
            else:
                thresholds.append(float(d))
                masses.append(float(c))
        thresholds.append(np.inf)
        inf_b = np.inf
        for k in range(len(masses)):
            cand = max(thresholds[k], muB - masses[k])
            if cand < thresholds[k + 1]:
                inf_b = min(inf_b, cand)
        best = max(best, inf_b)
    return best


def prokhorov_bruteforce(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact Prokhorov distance by subset enumeration (<= 15 atoms)."""
    _check_pair(mu, nu)
    if mu.support_size > 15 or nu.support_size > 15:
        raise ResourceLimit("bruteforce Prokhorov is limited to 15 atoms per side")
    D = mu.space.pairwise(mu.codes(), nu.codes())
    a = _one_sided_subset_inf(D, mu.weights, nu.weights)
    b = _one_sided_subset_inf(D.T, nu.weights, mu.weights)
    return min(max(a, b), 1.0)


# -- Fortet-Mourier -----------------------------------------------------------


def fortet_mourier(
    mu: DiscreteMeasure, nu: DiscreteMeasure, convention: str = "box"
) -> float:
    """Supremum of |mean h d(mu - nu)| over a bounded Lipschitz ball.

    ``convention="box"`` takes the test ball {|h| <= 1 and Lip(h) <= 1}
    (so a pair of point masses yields min{2, d}); ``convention="sum"``
    takes {sup|h| + Lip(h) <= 1}.  Either way the supremum over finite
    supports reduces to a linear program on the union-support values.
    """
    _check_pair(mu, nu)
    mu_d = mu.as_dict()
    nu_d = nu.as_dict()
    support = sorted(set(mu_d) | set(nu_d), key=mu.space.sort_key)
    N = len(support)
    if N > FM_BUDGET:
        raise ResourceLimit(f"Fortet-Mourier support budget is {FM_BUDGET} atoms")
    s = np.array([mu_d.get(z, 0.0) - nu_d.get(z, 0.0) for z in support])
    if np.all(np.abs(s) < 1e-15):
        return 0.0
    D = np.array([[mu.space.distance(x, y) for y in support] for x in support])

    pairs = [(i, j) for i in range(N) for j in range(N) if i != j]
    if convention == "box":
        # vars: h_1..h_N in [-1, 1]; h_i - h_j <= d_ij
        rows, cols, vals = [], [], []
        for r, (i, j) in enumerate(pairs):
            rows += [r, r]
            cols += [i, j]
            vals += [1.0, -1.0]
        A_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(len(pairs), N))
        b_ub = np.array([D[i, j] for i, j in pairs])
        res = linprog(-s, A_ub=A_ub, b_ub=b_ub, bounds=(-1, 1), method="highs", options=_LP_OPTS)
    elif convention == "sum":
        # vars: h_1..h_N, a, b; |h_i| <= a; h_i - h_j <= b d_ij; a + b <= 1
        nv = N + 2
        rows, cols, vals, b_ub = [], [], [], []
        r = 0
        for i, j in pairs:
            rows += [r, r, r]
            cols += [i, j, N + 1]
            vals += [1.0, -1.0, -D[i, j]]
            b_ub.append(0.0)
            r += 1
        for i in range(N):
            rows += [r, r]
            cols += [i, N]
            vals += [1.0, -1.0]
            b_ub.append(0.0)
            r += 1
            rows += [r, r]
            cols += [i, N]
            vals += [-1.0, -1.0]
            b_ub.append(0.0)
            r += 1
        rows += [r, r]
        cols += [N, N + 1]
        vals += [1.0, 1.0]
        b_ub.append(1.0)
        r += 1
        A_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(r, nv))
        c = np.concatenate([-s, [0.0, 0.0]])
        bounds = [(None, None)] * N + [(0, None), (0, None)]
        res = linprog(c, A_ub=A_ub, b_ub=np.array(b_ub), bounds=bounds, method="highs", options=_LP_OPTS)
    else:
        raise InvalidInput(f"unknown convention {convention!r}")
    if res.status != 0:
        raise InvalidInput(f"Fortet-Mourier LP failed: {res.message}")
    return float(max(-res.fun, 0.0))


# -- series metrics -----------------------------------------------------------


def dW(mu: DiscreteMeasure, nu: DiscreteMeasure, cls: DeterminingClass) -> float:
    """Weighted series metric sum_k 2^-k |mean g_k^* d(mu - nu)|.

    Truncated at ``cls.truncation_K``; the discarded tail is bounded by
    ``cls.tail_bound``.
    """
    _check_pair(mu, nu)
    if cls.space != mu.space:
        raise InvalidInput("class and measures live on different spaces")
    gap = np.abs(cls.moments(mu) - cls.moments(nu))
    return float(np.dot(cls.series_weights, gap))


def _ordered_expansion(tm: DiscreteMeasure):
    """Expand a tuple-class measure to ordered tuples with split weights.

    Averaging an integrand over all coordinate orderings of a multiset is
    the same as integrating it against this symmetric ordered law.
    """
    m = tm.tuple_arity
    cols = [[] for _ in range(m)]
    ws = []
    for t, w in zip(tm.atoms, tm.weights):
        perms = set(itertools.permutations(t.points))
        share = float(w) / len(perms)
        for p in sorted(perms):
            for i in range(m):
                cols[i].append(p[i])
            ws.append(share)
    return cols, np.array(ws)


def dW_product(
    pm: DiscreteMeasure, qm: DiscreteMeasure, cls: DeterminingClass, m: int
) -> float:
    """Multi-index series metric between two symmetric m-tuple laws.

    Each term integrates the product g_{k_1}^*(x_1)...g_{k_m}^*(x_m),
    symmetrized over coordinate orderings of the multiset atoms; indices
    run over {1..K}^m and the discarded tail is bounded by
    ``cls.product_tail_bound(m)``.
    """
    m = int(m)
    if pm.tuple_arity != m or qm.tuple_arity != m:
        raise InvalidInput(f"both measures must be {m}-tuple laws")
    if pm.space != qm.space or cls.space != pm.space:
        raise InvalidInput("spaces of measures and class differ")
    K = cls.truncation_K
    if K**m > 10**6:
        raise ResourceLimit("multi-index budget exceeded; lower truncation_K or m")
    if m > 6:
        raise ResourceLimit("tuple arity budget is 6")
    letters = "abcdef"[:m]
    subs = ",".join(f"{c}t" for c in letters) + ",t->" + letters
    tensors = []
    for tm in (pm, qm):
        cols, w = _ordered_expansion(tm)
        mats = [cls.values_at(_codes_for(tm.space, cols[i])) for i in range(m)]
        # T[k_1..k_m] = sum_t w_t prod_i g*_{k_i}(x_t[i])
        tensors.append(np.einsum(subs, *mats, w))
    sw = cls.series_weights
    weight = sw
    for _ in range(m - 1):
        weight = np.multiply.outer(weight, sw)
    return float(np.sum(weight * np.abs(tensors[0] - tensors[1])))


def _codes_for(space, points):
    from .spaces import EuclideanRd, FiniteLabeled

    if isinstance(space, RealLine):
        return np.array(points, dtype=float)
    if isinstance(space, EuclideanRd):
        return np.array(points, dtype=float)
    if isinstance(space, FiniteLabeled):
        return np.array([space.index_of(p) for p in points], dtype=np.intp)
    raise InvalidInput(f"unknown space {space!r}")
