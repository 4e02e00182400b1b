"""Expectation-maximization baseline with restarts, seeding, and deadlines.

The E-step runs one inference query per distinct incomplete row (weighted by
multiplicity) using either exact jointree calibration or loopy belief
propagation.  Chains iterate plain maximum-likelihood EM, which guarantees a
non-decreasing training log-likelihood under the exact engine; the Dirichlet
smoothing shared with the closed-form learners is applied to the expected
counts only when parameters are extracted for return.  A chain stops on
convergence (relative LL improvement below the threshold), on the iteration
cap, or at the deadline; the learner returns the parameters produced by the
iteration whose evaluated training log-likelihood was best across all
restarts (anytime contract).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import MISSING, IncompleteDataset
from .errors import DeadlineBeforeFirstIteration
from .inference import Jointree, bp_family_beliefs, build_jointree, jointree_marginals
from .network import BayesianNetwork

ENGINES = ("jointree", "loopy-bp")


@dataclass
class EmConfig:
    restarts: int = 1
    engine: str = "jointree"
    init: str = "random"                       # "random" or "provided"
    init_network: BayesianNetwork | None = None
    threshold: float = 1e-4                    # relative LL improvement
    max_iters: int = 500
    time_limit: float | None = None            # wall-clock seconds
    seed: int = 0
    prior_concentration: float = 2.0

    def check(self) -> None:
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time limit must be positive")
        if self.init == "provided" and self.init_network is None:
            raise ValueError("init='provided' needs init_network")
        if self.init not in ("random", "provided"):
            raise ValueError("init must be 'random' or 'provided'")


@dataclass
class EmTrace:
    """Per restart, the (training LL, elapsed seconds) of each iteration."""

    chains: list[list[tuple[float, float]]] = field(default_factory=list)
    best_restart: int = -1
    best_iteration: int = -1
    best_ll: float = -np.inf

    def lls(self, restart: int = 0) -> list[float]:
        return [ll for ll, _ in self.chains[restart]]


class _DeadlineExceeded(Exception):
    pass


def _distinct_rows(dataset: IncompleteDataset) -> tuple[np.ndarray, np.ndarray]:
    if dataset.n_rows == 0:
        return np.zeros((0, dataset.network.n_variables), dtype=np.int64), np.zeros(0)
    rows, counts = np.unique(dataset.rows, axis=0, return_counts=True)
    return rows, counts.astype(np.float64)


def _smoothed(expected: list[np.ndarray], network: BayesianNetwork, prior: float):
    cpts = []
    alpha = prior - 1.0
    for v, counts in enumerate(expected):
        k = network.variables[v].n_states
        denom = counts.sum(axis=1, keepdims=True) + k * alpha
        with np.errstate(invalid="ignore", divide="ignore"):
            cpt = np.where(denom > 0, (counts + alpha) / np.maximum(denom, 1e-300), 1.0 / k)
        cpts.append(cpt)
    return network.with_cpts(cpts)


def _e_step(
    params: BayesianNetwork,
    rows: np.ndarray,
    counts: np.ndarray,
    engine: str,
    jt: Jointree | None,
    deadline: float | None,
):
    expected = [np.zeros_like(c) for c in params.cpts]
    ll = 0.0
    for row, mult in zip(rows, counts):
        if deadline is not None and time.monotonic() > deadline:
            raise _DeadlineExceeded
        evidence = {v: int(s) for v, s in enumerate(row) if s != MISSING}
        if engine == "jointree":
            marginals, log_ev = jointree_marginals(jt, evidence)
        else:
            marginals, _, log_ev = bp_family_beliefs(params, evidence)
        ll += mult * log_ev
        for v in range(params.n_variables):
            expected[v] += mult * marginals[v]
    return expected, ll


def em_iteration(
    params: BayesianNetwork,
    dataset: IncompleteDataset,
    engine: str = "jointree",
    prior_concentration: float = 2.0,
    deadline: float | None = None,
    _jointree: Jointree | None = None,
) -> tuple[BayesianNetwork, float]:
    """One E + M step; returns the new parameters and the training LL of the
    evidence under the old parameters."""
    rows, counts = _distinct_rows(dataset)
    jt = _jointree
    if engine == "jointree" and jt is None:
        jt = build_jointree(params)
    expected, ll = _e_step(params, rows, counts, engine, jt, deadline)
    return _smoothed(expected, params, prior_concentration), ll


def _random_parameters(
    skeleton: BayesianNetwork, rng: np.random.Generator
) -> BayesianNetwork:
    cpts = []
    for v in range(skeleton.n_variables):
        shape = skeleton.cpts[v].shape
        g = rng.gamma(1.0, size=shape)
        cpts.append(g / g.sum(axis=1, keepdims=True))
    return skeleton.with_cpts(cpts)


def em_learn(
    skeleton: BayesianNetwork,
    dataset: IncompleteDataset,
    config: EmConfig,
) -> tuple[BayesianNetwork, EmTrace]:
    """Run EM chains and return the anytime-best parameters and the trace.

    With ``init='provided'`` the first restart starts from
    ``config.init_network``; further restarts (and all restarts under
    ``init='random'``) draw each CPT row from a symmetric Dirichlet(1).
    Raises :class:`DeadlineBeforeFirstIteration` when the time limit expires
    before any iteration finishes anywhere.
    """
    config.check()
    start = time.monotonic()
    deadline = None if config.time_limit is None else start + config.time_limit
    rows, counts = _distinct_rows(dataset)
    structure = build_jointree(skeleton) if config.engine == "jointree" else None
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)

    trace = EmTrace()
    best_params: BayesianNetwork | None = None
    try:
        for r in range(config.restarts):
            if config.init == "provided" and r == 0:
                params = skeleton.with_cpts(config.init_network.cpts)
            else:
                params = _random_parameters(skeleton, np.random.default_rng(seeds[r]))
            chain: list[tuple[float, float]] = []
            trace.chains.append(chain)
            prev_ll = None
            for it in range(config.max_iters):
                jt = structure.with_parameters(params) if structure else None
                expected, ll = _e_step(
                    params, rows, counts, config.engine, jt, deadline
                )
                # the chain continues with the maximum-likelihood update; the
                # smoothed variant of the same expected counts is what gets
                # returned if this iteration stays the best
                new_params = _smoothed(expected, params, 1.0)
                chain.append((ll, time.monotonic() - start))
                if ll > trace.best_ll:
                    trace.best_ll = ll
                    trace.best_restart = r
                    trace.best_iteration = it
                    best_params = _smoothed(
                        expected, params, config.prior_concentration
                    )
                if prev_ll is not None and ll - prev_ll < config.threshold * abs(prev_ll):
                    break
                prev_ll = ll
                params = new_params
    except _DeadlineExceeded:
        pass
    if best_params is None:
        raise DeadlineBeforeFirstIteration(
            "time limit expired before one EM iteration finished"
        )
    return best_params, trace
