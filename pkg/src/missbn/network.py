"""Discrete Bayesian networks: representation, validation, evaluation, sampling.

A network is a DAG over discrete variables, one conditional probability table
(CPT) per variable.  CPT rows are indexed by the mixed-radix encoding of the
parent instantiation (most-significant digit = first parent), columns by the
child state.  Networks are immutable after construction and safe to share.

Complete instantiations in bulk are plain integer arrays of shape
``(n_rows, n_variables)``; partial instantiations are ``{variable id: state}``
mappings.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CptRowNotNormalized,
    CycleDetected,
    DimensionMismatch,
    IncompleteInstantiation,
    UnknownVariable,
)

ROW_SUM_TOL = 1e-9

Instantiation = Mapping[int, int]


@dataclass(frozen=True)
class Variable:
    """A discrete variable: dense integer id, display name, ordered states."""

    id: int
    name: str
    states: tuple[str, ...]

    @property
    def n_states(self) -> int:
        return len(self.states)


class BayesianNetwork:
    """DAG over :class:`Variable` with one CPT per variable.

    Parameters
    ----------
    variables:
        Variables with ids ``0..n-1`` in order.
    parents:
        Per variable, the ordered tuple of parent ids.
    cpts:
        Per variable, an array of shape ``(n_parent_configs, n_states)``.
    """

    def __init__(
        self,
        variables: Sequence[Variable],
        parents: Sequence[Sequence[int]],
        cpts: Sequence[np.ndarray],
    ):
        self.variables = tuple(variables)
        self.parents = tuple(tuple(p) for p in parents)
        self.cpts = tuple(np.asarray(c, dtype=np.float64) for c in cpts)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def variable_named(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise UnknownVariable(name)

    def state_counts(self) -> np.ndarray:
        return np.array([v.n_states for v in self.variables], dtype=np.int64)

    def parent_config_count(self, var_id: int) -> int:
        n = 1
        for p in self.parents[var_id]:
            n *= self.variables[p].n_states
        return n

    def parent_config_index(self, var_id: int, assignment: Mapping[int, int]) -> int:
        """Mixed-radix row index of a parent instantiation (first parent most
        significant)."""
        idx = 0
        for p in self.parents[var_id]:
            idx = idx * self.variables[p].n_states + assignment[p]
        return idx

    def with_cpts(self, cpts: Sequence[np.ndarray]) -> "BayesianNetwork":
        """Same structure, new parameters."""
        return BayesianNetwork(self.variables, self.parents, cpts)

    def same_structure(self, other: "BayesianNetwork") -> bool:
        return (
            self.variables == other.variables and self.parents == other.parents
        )

    def __eq__(self, other):
        if not isinstance(other, BayesianNetwork):
            return NotImplemented
        return self.same_structure(other) and all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.cpts, other.cpts)
        )

    def __repr__(self):
        return f"BayesianNetwork({self.n_variables} variables)"


def family_of(network: BayesianNetwork, var_id: int) -> frozenset[int]:
    """The variable together with its parents."""
    if not 0 <= var_id < network.n_variables:
        raise UnknownVariable(var_id)
    return frozenset((var_id,) + network.parents[var_id])


def topological_order(network: BayesianNetwork) -> list[int]:
    """Parents-before-children order, ties broken by ascending id."""
    n = network.n_variables
    children: list[list[int]] = [[] for _ in range(n)]
    indegree = [0] * n
    for v in range(n):
        for p in network.parents[v]:
            if not 0 <= p < n:
                raise UnknownVariable(p)
            children[p].append(v)
            indegree[v] += 1
    ready = [v for v in range(n) if indegree[v] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for c in children[v]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, c)
    if len(order) < n:
        raise CycleDetected([v for v in range(n) if v not in set(order)])
    return order


def validate(network: BayesianNetwork) -> None:
    """Check all structural invariants; raise on the first violation.

    Verifies id density, acyclicity, CPT dimensions, and that every CPT row
    sums to one within ``ROW_SUM_TOL``.
    """
    for i, v in enumerate(network.variables):
        if v.id != i:
            raise DimensionMismatch(
                f"variable ids must be dense: expected {i}, got {v.id}"
            )
        if v.n_states < 2:
            raise DimensionMismatch(f"variable {v.name!r} needs >= 2 states")
        if len(set(v.states)) != v.n_states:
            raise DimensionMismatch(f"duplicate state labels in {v.name!r}")
    if len(network.parents) != network.n_variables or len(network.cpts) != (
        network.n_variables
    ):
        raise DimensionMismatch("parents/cpts lists must match variable count")
    topological_order(network)  # raises CycleDetected
    for v in range(network.n_variables):
        expected = (network.parent_config_count(v), network.variables[v].n_states)
        cpt = network.cpts[v]
        if cpt.shape != expected:
            raise DimensionMismatch(
                f"CPT of {network.variables[v].name!r} has shape {cpt.shape}, "
                f"expected {expected}"
            )
        if np.any(cpt < 0) or np.any(cpt > 1):
            raise CptRowNotNormalized(
                network.variables[v].name,
                int(np.argwhere((cpt < 0) | (cpt > 1))[0][0]),
                float(cpt.min()),
            )
        sums = cpt.sum(axis=1)
        bad = np.where(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
        if bad.size:
            raise CptRowNotNormalized(
                network.variables[v].name, int(bad[0]), float(sums[bad[0]])
            )


def joint_probability(network: BayesianNetwork, inst: Instantiation) -> float:
    """Chain-rule product of CPT entries for a complete instantiation."""
    missing = [v for v in range(network.n_variables) if v not in inst]
    if missing:
        raise IncompleteInstantiation(missing)
    prob = 1.0
    for v in range(network.n_variables):
        row = network.parent_config_index(v, inst)
        prob *= network.cpts[v][row, inst[v]]
    return prob


def log_joint_rows(network: BayesianNetwork, rows: np.ndarray) -> np.ndarray:
    """Vectorized per-row log joint probability for complete rows."""
    rows = np.asarray(rows)
    log_p = np.zeros(rows.shape[0], dtype=np.float64)
    with np.errstate(divide="ignore"):
        for v in range(network.n_variables):
            cfg = np.zeros(rows.shape[0], dtype=np.int64)
            for p in network.parents[v]:
                cfg = cfg * network.variables[p].n_states + rows[:, p]
            log_p += np.log(network.cpts[v][cfg, rows[:, v]])
    return log_p


def forward_sample(
    network: BayesianNetwork, seed: int, count: int
) -> np.ndarray:
    """Ancestral sampling: ``count`` complete instantiations, one per row.

    Fully reproducible from ``seed``; variables are sampled in topological
    order (ties by id), each row independently.
    """
    rng = np.random.default_rng(seed)
    return sample_with_rng(network, rng, count)


def sample_with_rng(
    network: BayesianNetwork, rng: np.random.Generator, count: int
) -> np.ndarray:
    rows = np.zeros((count, network.n_variables), dtype=np.int64)
    for v in topological_order(network):
        cfg = np.zeros(count, dtype=np.int64)
        for p in network.parents[v]:
            cfg = cfg * network.variables[p].n_states + rows[:, p]
        cdf = np.cumsum(network.cpts[v], axis=1)
        u = rng.random(count)
        # searchsorted per row against that row's parent-config cdf
        rows[:, v] = (u[:, None] >= cdf[cfg]).sum(axis=1)
    return rows


def moral_adjacency(network: BayesianNetwork) -> list[set[int]]:
    """Undirected adjacency of the moral graph (edges plus married parents)."""
    adj: list[set[int]] = [set() for _ in range(network.n_variables)]
    for v in range(network.n_variables):
        for p in network.parents[v]:
            adj[v].add(p)
            adj[p].add(v)
        for a in network.parents[v]:
            for b in network.parents[v]:
                if a != b:
                    adj[a].add(b)
    return adj


def moral_distances(network: BayesianNetwork, sources: Iterable[int]) -> np.ndarray:
    """BFS distance from a source set in the moral graph; unreachable = inf."""
    adj = moral_adjacency(network)
    dist = np.full(network.n_variables, np.inf)
    frontier = list(sources)
    for s in frontier:
        dist[s] = 0
    d = 0
    while frontier:
        d += 1
        nxt = []
        for v in frontier:
            for u in adj[v]:
                if dist[u] == np.inf:
                    dist[u] = d
                    nxt.append(u)
        frontier = nxt
    return dist


def all_instantiations(state_counts: Iterable[int]) -> np.ndarray:
    """Every complete instantiation in mixed-radix ascending order."""
    counts = list(state_counts)
    total = int(np.prod(counts)) if counts else 1
    out = np.zeros((total, len(counts)), dtype=np.int64)
    rep = total
    for j, k in enumerate(counts):
        rep //= k
        out[:, j] = np.tile(np.repeat(np.arange(k), rep), total // (rep * k))
    return out
