"""Command-line interface.

Subcommands:

* ``dist``          distance between two measures stored in the text format
* ``simulate``      run the experiment described by a config file, write CSVs
* ``rates``         simulate and check the coverage criterion for a theorem
* ``eb``            the empirical-Bayes gap experiment
* ``oracle-check``  fast cross-checks of the metric solvers against oracles

Exit codes: 0 success, 2 acceptance-check failure, 1 error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import metrics
from .determining import DeterminingClass
from .errors import BayesMergeError
from .harness import (
    ExperimentConfig,
    emit_outputs,
    evaluate_acceptance,
    run_experiment,
)
from .measures import deserialize
from .spaces import FiniteLabeled, RealLine


def _load_pair(path_mu, path_nu):
    with open(path_mu, "r", encoding="utf-8") as fh:
        mu = deserialize(fh.read())
    with open(path_nu, "r", encoding="utf-8") as fh:
        nu = deserialize(fh.read(), space=None if mu is None else None)
    if mu.space != nu.space:
        # for label spaces, retry on the union label set
        if isinstance(mu.space, FiniteLabeled) and isinstance(nu.space, FiniteLabeled):
            union = FiniteLabeled.unit(sorted(set(mu.space.labels) | set(nu.space.labels)))
            with open(path_mu, "r", encoding="utf-8") as fh:
                mu = deserialize(fh.read(), space=union)
            with open(path_nu, "r", encoding="utf-8") as fh:
                nu = deserialize(fh.read(), space=union)
        else:
            raise BayesMergeError("the two files describe different spaces")
    return mu, nu


def _cmd_dist(args) -> int:
    mu, nu = _load_pair(args.mu, args.nu)
    if args.metric == "w1":
        if isinstance(mu.space, RealLine) and args.p == 1.0:
            val = metrics.w1_real(mu, nu)
        else:
            val = metrics.ot_cost(mu, nu, args.p)
    elif args.metric == "prokhorov":
        val = metrics.prokhorov(mu, nu)
    elif args.metric == "fm":
        val = metrics.fortet_mourier(mu, nu)
    else:  # dW
        if args.region is not None:
            region = tuple(args.region)
        elif isinstance(mu.space, RealLine):
            atoms = list(mu.atoms) + list(nu.atoms)
            region = (min(atoms) - 1.0, max(atoms) + 1.0)
        else:
            region = (-8.0, 8.0)
        cls = DeterminingClass.for_space(mu.space, truncation_K=args.trunc_k, region=region)
        val = metrics.dW(mu, nu, cls)
    print(f"{val:.12g}")
    return 0


def _cmd_simulate(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    trajectories = run_experiment(config)
    paths = emit_outputs(trajectories, config, args.name or config.experiment)
    verdict = evaluate_acceptance(config, trajectories)
    print(f"coverage {verdict['coverage']:.4g} (threshold {verdict['coverage_min']:.2f})")
    for k, p in paths.items():
        print(f"{k}: {p}")
    return 0


def _cmd_rates(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    overrides = {"W": ("posterior", "W"), "G": ("posterior", "G1"), "P": ("posterior", "P")}
    experiment, metric = overrides[args.theorem]
    from dataclasses import replace

    config = replace(config, experiment=experiment, metric=metric)
    trajectories = run_experiment(config)
    name = args.name or f"rates_{args.theorem}"
    emit_outputs(trajectories, config, name)
    verdict = evaluate_acceptance(config, trajectories)
    status = "PASS" if verdict["passed"] else "FAIL"
    print(f"{status}: coverage {verdict['coverage']:.4g}, required {verdict['coverage_min']:.2f}")
    return 0 if verdict["passed"] else 2


def _cmd_eb(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    from dataclasses import replace

    config = replace(config, experiment="eb")
    trajectories = run_experiment(config)
    emit_outputs(trajectories, config, args.name or "eb")
    verdict = evaluate_acceptance(config, trajectories)
    worst_pw = max(t.bounds["pointwise_violation"] for t in trajectories)
    worst_or = max(t.bounds["oracle_violation"] for t in trajectories)
    status = "PASS" if verdict["passed"] else "FAIL"
    print(f"{status}: pointwise violation {worst_pw:.3g}, oracle violation {worst_or:.3g}")
    return 0 if verdict["passed"] else 2


def _cmd_oracle_check(args) -> int:
    """Cross-check the exact solvers against their brute-force oracles."""
    rng = np.random.default_rng(args.seed)
    n_pairs = args.pairs
    worst_pk = worst_w1 = 0.0
    chain_violation = 0.0
    for _ in range(n_pairs):
        xs = rng.normal(size=rng.integers(2, 7))
        ys = rng.normal(size=rng.integers(2, 7))
        mu = _random_measure(rng, xs)
        nu = _random_measure(rng, ys)
        worst_pk = max(worst_pk, abs(metrics.prokhorov(mu, nu) - metrics.prokhorov_bruteforce(mu, nu)))
        worst_w1 = max(worst_w1, abs(metrics.w1_real(mu, nu) - metrics.ot_cost(mu, nu, 1.0)))
        dp = metrics.prokhorov(mu, nu)
        fm = metrics.fortet_mourier(mu, nu)
        g1 = metrics.w1_real(mu, nu)
        chain_violation = max(chain_violation, dp - np.sqrt(1.5 * fm), fm - g1)
    ok = worst_pk <= 1e-9 and worst_w1 <= 1e-9 and chain_violation <= 1e-9
    status = "PASS" if ok else "FAIL"
    print(f"{status}: prokhorov vs bruteforce {worst_pk:.3g}, w1 vs LP {worst_w1:.3g}, "
          f"chain violation {chain_violation:.3g} ({n_pairs} pairs)")
    return 0 if ok else 2


def _random_measure(rng, xs):
    from .measures import DiscreteMeasure

    w = rng.dirichlet(np.ones(len(xs)))
    return DiscreteMeasure(RealLine(), xs, w)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bayesmerge", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dist", help="distance between two measure files")
    d.add_argument("--metric", choices=["w1", "prokhorov", "fm", "dW"], required=True)
    d.add_argument("--p", type=float, default=1.0, help="transport order for w1")
    d.add_argument("--trunc-k", type=int, default=24, help="series truncation for dW")
    d.add_argument("--region", type=float, nargs=2, default=None,
                   help="bounding region for the dW generator net")
    d.add_argument("mu")
    d.add_argument("nu")
    d.set_defaults(fn=_cmd_dist)

    s = sub.add_parser("simulate", help="run the configured experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--name", default=None)
    s.set_defaults(fn=_cmd_simulate)

    r = sub.add_parser("rates", help="run and check a merging-rate criterion")
    r.add_argument("--config", required=True)
    r.add_argument("--theorem", choices=["W", "G", "P"], required=True)
    r.add_argument("--name", default=None)
    r.set_defaults(fn=_cmd_rates)

    e = sub.add_parser("eb", help="empirical-Bayes gap experiment")
    e.add_argument("--config", required=True)
    e.add_argument("--name", default=None)
    e.set_defaults(fn=_cmd_eb)

    o = sub.add_parser("oracle-check", help="solver cross-checks")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--pairs", type=int, default=100)
    o.set_defaults(fn=_cmd_oracle_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (BayesMergeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
