"""Exchangeable sequence models with explicit posterior and predictive laws.

Two conjugate priors are provided, both with closed-form updates:

* ``FiniteDirichletModel`` on a finite labeled space: the posterior is
  Dirichlet with the observation counts added to the concentration, and
  the predictive weights are (a_j + n_j) / (a_0 + n).
* ``DPModel``, a Dirichlet process with total mass ``alpha`` and a base
  law sampled on the real line.  Directing-measure draws use truncated
  stick breaking with the residual mass assigned to one extra base draw,
  so the expected untracked mass is (alpha / (alpha + 1))**T.  Posterior
  draws use the aggregation decomposition: weights over {base remainder,
  observed atoms} are Dirichlet(alpha, 1, ..., 1) and the remainder is an
  independent truncated draw from the prior, which keeps the truncation
  residual independent of n.

Sampling determinism: every sampler takes a ``seed`` that may be an int
or a ``numpy.random.Generator``; an int always produces the same output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError, InvalidInput, ResourceLimit, Unsupported
from .level2 import MeasureOnMeasures
from .measures import DiscreteMeasure, TupleClass, mean_of
from .spaces import FiniteLabeled, RealLine


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# -- base laws for the Dirichlet process --------------------------------------


@dataclass(frozen=True)
class BaseLaw:
    """Named base law on the real line with a quantile discretization.

    ``quantile_atoms(Q)`` returns the mid-quantile grid used wherever a
    finite representation of the base law is needed (the predictive
    measure, and mean functionals of the base).
    """

    name: str = "std_normal"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        return self._quantile(u)

    def _quantile(self, u: np.ndarray) -> np.ndarray:
        if self.name == "std_normal":
            return ndtri(u)
        if self.name == "uniform":
            return u
        raise ConfigError(f"unknown base law {self.name!r}")

    def quantile_atoms(self, count: int) -> np.ndarray:
        u = (2.0 * np.arange(1, count + 1) - 1.0) / (2.0 * count)
        return self._quantile(u)


# -- models --------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteDirichletModel:
    space: FiniteLabeled
    concentration: tuple

    def __post_init__(self):
        a = np.asarray(self.concentration, dtype=float)
        if len(self.space.labels) < 2:
            raise ConfigError("a finite Dirichlet model needs at least 2 labels")
        if a.shape != (len(self.space.labels),):
            raise ConfigError("concentration length must match the label count")
        if np.any(a <= 0) or not np.all(np.isfinite(a)):
            raise ConfigError("concentration entries must be positive")
        object.__setattr__(self, "concentration", tuple(float(x) for x in a))

    @property
    def conc_array(self) -> np.ndarray:
        return np.asarray(self.concentration, dtype=float)


@dataclass(frozen=True)
class DPModel:
    base: BaseLaw = field(default_factory=BaseLaw)
    alpha: float = 1.0
    truncation_T: int = 200
    residual_bound: float = 1e-9
    base_repr_atoms: int = 512

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.truncation_T < 1:
            raise ConfigError("truncation_T must be a positive integer")
        if self.residual_expectation > self.residual_bound:
            raise ConfigError(
                f"stick-breaking residual {self.residual_expectation:.3g} exceeds "
                f"the configured bound {self.residual_bound:.3g}; raise truncation_T"
            )

    @property
    def residual_expectation(self) -> float:
        return (self.alpha / (self.alpha + 1.0)) ** self.truncation_T

    def base_measure(self) -> DiscreteMeasure:
        atoms = self.base.quantile_atoms(self.base_repr_atoms)
        return DiscreteMeasure(RealLine(), atoms, np.full(len(atoms), 1.0 / len(atoms)))


@dataclass(frozen=True)
class PosteriorState:
    """Sufficient statistics after n observations.

    Finite Dirichlet: per-label counts.  Dirichlet process: the observed
    atoms (order kept only for bookkeeping; all operations depend on the
    multiset alone, which is what exchangeability demands).
    """

    model: FiniteDirichletModel | DPModel
    n: int
    counts: tuple = ()
    atoms: tuple = ()

    def __post_init__(self):
        if isinstance(self.model, FiniteDirichletModel):
            if sum(self.counts) != self.n:
                raise InvalidInput("counts must sum to n")
        elif len(self.atoms) != self.n:
            raise InvalidInput("atom list length must equal n")


def initial_state(model) -> PosteriorState:
    if isinstance(model, FiniteDirichletModel):
        return PosteriorState(model, 0, counts=(0,) * len(model.space.labels))
    if isinstance(model, DPModel):
        return PosteriorState(model, 0)
    raise InvalidInput(f"unknown model {model!r}")


def posterior_update(state: PosteriorState, x) -> PosteriorState:
    """Fold one observation into the sufficient statistics."""
    model = state.model
    if isinstance(model, FiniteDirichletModel):
        j = model.space.index_of(x)
        counts = list(state.counts)
        counts[j] += 1
        return PosteriorState(model, state.n + 1, counts=tuple(counts))
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInput("observations must be finite reals")
    return PosteriorState(model, state.n + 1, atoms=state.atoms + (x,))


def posterior_update_batch(state: PosteriorState, xs) -> PosteriorState:
    for x in xs:
        state = posterior_update(state, x)
    return state


# -- sampling -------------------------------------------------------------------


def stick_break(rng, alpha: float, T: int, base: BaseLaw):
    """Truncated stick-breaking weights and atoms; residual mass goes to
    one extra base draw."""
    v = rng.beta(1.0, alpha, size=T)
    tail = np.concatenate([[1.0], np.cumprod(1.0 - v)])
    w = np.empty(T + 1)
    w[:T] = v * tail[:T]
    w[T] = tail[T]
    atoms = base.sample(rng, T + 1)
    return atoms, w


def sample_sequence(model, n: int, seed):
    """Draw a directing measure from the prior, then n observations from it.

    Returns ``(p_tilde, observations)`` where ``p_tilde`` is a
    ``DiscreteMeasure`` and ``observations`` is a list (labels) or float
    array (real line).
    """
    n = int(n)
    if n < 1:
        raise InvalidInput("n must be >= 1")
    rng = _rng(seed)
    if isinstance(model, FiniteDirichletModel):
        probs = rng.dirichlet(model.conc_array)
        p = DiscreteMeasure(model.space, model.space.labels, probs)
        idx = rng.choice(len(model.space.labels), size=n, p=probs)
        obs = [model.space.labels[i] for i in idx]
        return p, obs
    if isinstance(model, DPModel):
        atoms, w = stick_break(rng, model.alpha, model.truncation_T, model.base)
        p = DiscreteMeasure(RealLine(), atoms, w)
        idx = rng.choice(len(atoms), size=n, p=w)
        return p, atoms[idx]
    raise InvalidInput(f"unknown model {model!r}")


def posterior_sample(state: PosteriorState, count: int, seed) -> MeasureOnMeasures:
    """Monte Carlo surrogate of the posterior: ``count`` i.i.d. draws.

    Finite Dirichlet: Dirichlet vectors with the updated concentration.
    Dirichlet process: aggregation decomposition (Dirichlet weights over
    the observed atoms plus an independent truncated prior remainder).
    """
    count = int(count)
    if count < 1:
        raise InvalidInput("count must be >= 1")
    rng = _rng(seed)
    model = state.model
    if isinstance(model, FiniteDirichletModel):
        a = model.conc_array + np.asarray(state.counts, dtype=float)
        draws = rng.dirichlet(a, size=count)
        support = [DiscreteMeasure(model.space, model.space.labels, row) for row in draws]
        return MeasureOnMeasures.uniform(model.space, support)
    obs = np.asarray(state.atoms, dtype=float)
    conc = np.concatenate([[model.alpha], np.ones(len(obs))])
    support = []
    for _ in range(count):
        d = rng.dirichlet(conc)
        g_atoms, g_w = stick_break(rng, model.alpha, model.truncation_T, model.base)
        atoms = np.concatenate([g_atoms, obs])
        w = np.concatenate([d[0] * g_w, d[1:]])
        support.append(DiscreteMeasure(RealLine(), atoms, w))
    return MeasureOnMeasures.uniform(RealLine(), support)


# -- predictives ------------------------------------------------------------------


def predictive_one(state: PosteriorState) -> DiscreteMeasure:
    """Exact one-step predictive law."""
    model = state.model
    if isinstance(model, FiniteDirichletModel):
        a = model.conc_array + np.asarray(state.counts, dtype=float)
        return DiscreteMeasure(model.space, model.space.labels, a / a.sum())
    base = model.base_measure()
    denom = model.alpha + state.n
    atoms = np.concatenate([base.codes(), np.asarray(state.atoms, dtype=float)])
    w = np.concatenate(
        [base.weights * (model.alpha / denom), np.full(state.n, 1.0 / denom)]
    )
    return DiscreteMeasure(RealLine(), atoms, w)


def predictive_m(state: PosteriorState, m: int, budget: int = 10**6) -> DiscreteMeasure:
    """Exact m-step predictive on a finite space, folded to tuple classes.

    The weight of an ordered tuple is the product of one-step predictive
    weights along the urn path; the path product depends only on the
    multiset (checked, then summed per class).
    """
    m = int(m)
    if m < 1:
        raise InvalidInput("m must be >= 1")
    model = state.model
    if not isinstance(model, FiniteDirichletModel):
        raise Unsupported("exact multi-step predictives need a finite space")
    K = len(model.space.labels)
    if K**m > budget:
        raise ResourceLimit(f"{K}^{m} ordered tuples exceed the budget of {budget}")
    a = model.conc_array + np.asarray(state.counts, dtype=float)
    a0 = a.sum()

    ordered: dict[tuple, list] = {}

    def walk(prefix: tuple, extra: np.ndarray, depth: int, weight: float):
        if depth == m:
            key = tuple(sorted(prefix))
            ordered.setdefault(key, []).append(weight)
            return
        denom = a0 + depth
        for j in range(K):
            wj = (a[j] + extra[j]) / denom
            extra[j] += 1
            walk(prefix + (j,), extra, depth + 1, weight * wj)
            extra[j] -= 1

    walk((), np.zeros(K), 0, 1.0)
    tuples, weights = [], []
    for key, per_order in ordered.items():
        # exchangeability: every ordering of a multiset has the same weight
        if max(per_order) - min(per_order) > 1e-15:
            raise InvalidInput("urn weights are not permutation invariant")
        labels = [model.space.labels[j] for j in key]
        tuples.append(TupleClass(model.space, labels))
        weights.append(sum(per_order))
    return DiscreteMeasure(model.space, tuples, np.array(weights))


def bayes_estimator(state: PosteriorState, g) -> float:
    """Posterior-mean functional, evaluated as a predictive mean.

    The posterior expectation of the integral of ``g`` equals the mean of
    ``g`` under the one-step predictive, so no mixing draw is needed.
    """
    return mean_of(predictive_one(state), g)


# -- declarative model configuration ----------------------------------------------


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise ConfigError(f"malformed config line: {ln!r}")
        k, v = ln.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def model_from_config(cfg: dict[str, str]):
    """Build a model from parsed key = value pairs.

    Keys: ``model`` (dirichlet | dp); dirichlet takes ``labels`` and
    ``concentration`` (comma lists); dp takes ``alpha``, ``base``,
    ``truncation`` and optional ``base_repr_atoms``/``residual_bound``.
    """
    kind = cfg.get("model", "").lower()
    if kind == "dirichlet":
        if "labels" not in cfg or "concentration" not in cfg:
            raise ConfigError("dirichlet model needs labels and concentration")
        labels = tuple(s.strip() for s in cfg["labels"].split(","))
        conc = tuple(float(s) for s in cfg["concentration"].split(","))
        if "distances" in cfg:
            k = len(labels)
            vals = [float(s) for s in cfg["distances"].split(",")]
            if len(vals) != k * k:
                raise ConfigError("distances must list K*K entries row-major")
            space = FiniteLabeled(labels, np.array(vals).reshape(k, k))
        else:
            space = FiniteLabeled.unit(labels)
        return FiniteDirichletModel(space, conc)
    if kind == "dp":
        return DPModel(
            base=BaseLaw(cfg.get("base", "std_normal")),
            alpha=float(cfg.get("alpha", 1.0)),
            truncation_T=int(cfg.get("truncation", 200)),
            residual_bound=float(cfg.get("residual_bound", 1e-9)),
            base_repr_atoms=int(cfg.get("base_repr_atoms", 512)),
        )
    raise ConfigError(f"unknown model kind {kind!r}")
