"""Exact jointree inference, loopy belief propagation, a brute-force oracle,
and model-quality metrics (test log-likelihood, KL divergence).

The jointree uses min-fill triangulation (ties by ascending variable id) and
Hugin-style calibration over clique potentials, with messages normalized
during the collect pass so the evidence probability is accumulated in log
space.  Loopy BP runs a damped flooding schedule on the factor graph with one
factor per CPT.

``INVOCATIONS`` counts engine entry points so callers can assert that
closed-form learners never touch inference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    StateSpaceTooLarge,
    StructureMismatch,
    ZeroProbabilityEvidence,
    ZeroProbabilityInstance,
)
from .network import (
    BayesianNetwork,
    log_joint_rows,
    moral_adjacency,
    validate,
)

# Count of inference-engine invocations (jointree builds/queries, BP runs,
# brute-force enumerations); tests snapshot this around closed-form learning.
INVOCATIONS = 0

# MarginalSet: per variable, the family posterior as an array of shape
# (parent configurations, child states), aligned with the CPT layout.
MarginalSet = dict[int, np.ndarray]

BP_DAMPING = 0.5
BP_MAX_ITERS = 50
BP_TOLERANCE = 1e-6


def _count_invocation():
    global INVOCATIONS
    INVOCATIONS += 1


@dataclass(frozen=True)
class Jointree:
    """Clique tree with CPT assignments; parameters live on ``network``.

    The structure depends only on the DAG, so a tree can be reused across
    parameter updates via :func:`with_parameters`.
    """

    network: BayesianNetwork
    cliques: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int], ...]       # tree edges between clique indices
    assignment: tuple[int, ...]              # per variable, its family's clique

    def with_parameters(self, network: BayesianNetwork) -> "Jointree":
        if not network.same_structure(self.network):
            raise StructureMismatch("parameter update must keep the DAG")
        return Jointree(network, self.cliques, self.edges, self.assignment)

    @property
    def max_clique_size(self) -> int:
        sizes = [
            int(np.prod([self.network.variables[v].n_states for v in c]))
            for c in self.cliques
        ]
        return max(sizes)


def _min_fill_cliques(network: BayesianNetwork) -> list[frozenset[int]]:
    adj = moral_adjacency(network)
    remaining = set(range(network.n_variables))
    cliques: list[frozenset[int]] = []
    while remaining:
        best, best_fill = None, None
        for v in sorted(remaining):
            nbrs = [u for u in adj[v] if u in remaining]
            fill = sum(
                1
                for i, a in enumerate(nbrs)
                for b in nbrs[i + 1 :]
                if b not in adj[a]
            )
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
        nbrs = [u for u in adj[best] if u in remaining]
        cliques.append(frozenset([best] + nbrs))
        for a in nbrs:
            for b in nbrs:
                if a != b:
                    adj[a].add(b)
        remaining.discard(best)
    return cliques


def build_jointree(network: BayesianNetwork) -> Jointree:
    """Min-fill triangulation, maximum-spanning join tree, CPT assignment."""
    _count_invocation()
    validate(network)
    elim = _min_fill_cliques(network)
    # an elimination clique can only be contained in an earlier one (its
    # eliminated variable never reappears), so filter against predecessors
    maximal: list[frozenset[int]] = []
    for i, c in enumerate(elim):
        if not any(c < elim[j] for j in range(i)):
            maximal.append(c)
    cliques = [tuple(sorted(c)) for c in maximal]

    # maximum spanning tree on separator sizes (Kruskal, deterministic ties)
    candidates = []
    for i in range(len(cliques)):
        for j in range(i + 1, len(cliques)):
            w = len(set(cliques[i]) & set(cliques[j]))
            candidates.append((-w, i, j))
    candidates.sort()
    parent = list(range(len(cliques)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    edges = []
    for negw, i, j in candidates:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            edges.append((i, j))

    assignment = []
    for v in range(network.n_variables):
        fam = {v, *network.parents[v]}
        home = next(i for i, c in enumerate(cliques) if fam <= set(c))
        assignment.append(home)

    jt = Jointree(network, tuple(cliques), tuple(edges), tuple(assignment))
    _check_running_intersection(jt)
    return jt


def _check_running_intersection(jt: Jointree) -> None:
    adj: dict[int, list[int]] = {i: [] for i in range(len(jt.cliques))}
    for i, j in jt.edges:
        adj[i].append(j)
        adj[j].append(i)
    for v in range(jt.network.n_variables):
        holders = {i for i, c in enumerate(jt.cliques) if v in c}
        if not holders:
            raise StructureMismatch(f"variable {v} not covered by any clique")
        start = next(iter(holders))
        seen = {start}
        stack = [start]
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt in holders and nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if seen != holders:
            raise StructureMismatch(
                f"running intersection violated for variable {v}"
            )


def _cpt_tensor(network: BayesianNetwork, v: int) -> tuple[tuple[int, ...], np.ndarray]:
    axes = tuple(network.parents[v]) + (v,)
    shape = tuple(network.variables[a].n_states for a in axes)
    return axes, network.cpts[v].reshape(shape)


def _align(tensor: np.ndarray, axes: tuple[int, ...], target: tuple[int, ...]) -> np.ndarray:
    """Permute/expand ``tensor`` (over ``axes``) to broadcast over ``target``."""
    order = sorted(range(len(axes)), key=lambda i: target.index(axes[i]))
    permuted = np.transpose(tensor, order)
    present = [target.index(axes[i]) for i in order]
    shape = [1] * len(target)
    for out_pos, size in zip(present, permuted.shape):
        shape[out_pos] = size
    return permuted.reshape(shape)


def _marginalize(tensor: np.ndarray, axes: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    drop = tuple(i for i, a in enumerate(axes) if a not in keep)
    out = tensor.sum(axis=drop) if drop else tensor
    kept = tuple(a for a in axes if a in keep)
    order = sorted(range(len(kept)), key=lambda i: keep.index(kept[i]))
    return np.transpose(out, order)


def jointree_marginals(
    jt: Jointree, evidence: Mapping[int, int] | None = None
) -> tuple[MarginalSet, float]:
    """Exact family posteriors given evidence, and log Pr(evidence)."""
    _count_invocation()
    net = jt.network
    evidence = dict(evidence or {})
    potentials = []
    for c in jt.cliques:
        shape = tuple(net.variables[v].n_states for v in c)
        potentials.append(np.ones(shape))
    for v in range(net.n_variables):
        axes, tensor = _cpt_tensor(net, v)
        home = jt.assignment[v]
        potentials[home] = potentials[home] * _align(tensor, axes, jt.cliques[home])
    for v, s in evidence.items():
        home = jt.assignment[v]
        c = jt.cliques[home]
        indicator = np.zeros(net.variables[v].n_states)
        indicator[s] = 1.0
        potentials[home] = potentials[home] * _align(indicator, (v,), c)

    adj: dict[int, list[int]] = {i: [] for i in range(len(jt.cliques))}
    for i, j in jt.edges:
        adj[i].append(j)
        adj[j].append(i)
    root = 0
    order = [root]
    parent_of = {root: None}
    for cur in order:
        for nxt in adj[cur]:
            if nxt not in parent_of:
                parent_of[nxt] = cur
                order.append(nxt)

    log_z = 0.0
    sep_msg: dict[int, np.ndarray] = {}
    sep_vars: dict[int, tuple[int, ...]] = {}
    for cur in reversed(order[1:]):  # collect toward the root
        par = parent_of[cur]
        sep = tuple(v for v in jt.cliques[cur] if v in set(jt.cliques[par]))
        msg = _marginalize(potentials[cur], jt.cliques[cur], sep)
        scale = msg.sum()
        if scale <= 0.0:
            raise ZeroProbabilityEvidence(f"evidence {evidence} has probability 0")
        msg = msg / scale
        log_z += float(np.log(scale))
        sep_msg[cur] = msg
        sep_vars[cur] = sep
        potentials[par] = potentials[par] * _align(msg, sep, jt.cliques[par])

    root_total = potentials[root].sum()
    if root_total <= 0.0:
        raise ZeroProbabilityEvidence(f"evidence {evidence} has probability 0")
    log_evidence = float(np.log(root_total)) + log_z
    potentials[root] = potentials[root] / root_total

    for cur in order[1:]:  # distribute from the root
        par = parent_of[cur]
        sep = sep_vars[cur]
        out = _marginalize(potentials[par], jt.cliques[par], sep)
        old = sep_msg[cur]
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(old > 0, out / np.maximum(old, 1e-300), 0.0)
        belief = potentials[cur] * _align(ratio, sep, jt.cliques[cur])
        total = belief.sum()
        potentials[cur] = belief / total if total > 0 else belief

    marginals: MarginalSet = {}
    for v in range(net.n_variables):
        axes = tuple(net.parents[v]) + (v,)
        home = jt.assignment[v]
        fam = _marginalize(potentials[home], jt.cliques[home], axes)
        k = net.variables[v].n_states
        marginals[v] = fam.reshape(-1, k)
    return marginals, log_evidence


def brute_force_marginals(
    network: BayesianNetwork, evidence: Mapping[int, int] | None = None
) -> tuple[MarginalSet, float]:
    """Family posteriors and log evidence by full enumeration (test oracle)."""
    _count_invocation()
    shape = tuple(v.n_states for v in network.variables)
    if float(np.prod([float(s) for s in shape])) > 2 ** 20:
        raise StateSpaceTooLarge(f"state space {shape} exceeds 2^20 entries")
    joint = np.ones(shape)
    for v in range(network.n_variables):
        axes, tensor = _cpt_tensor(network, v)
        joint = joint * _align(tensor, axes, tuple(range(network.n_variables)))
    for v, s in (evidence or {}).items():
        indicator = np.zeros(network.variables[v].n_states)
        indicator[s] = 1.0
        joint = joint * _align(indicator, (v,), tuple(range(network.n_variables)))
    total = joint.sum()
    if total <= 0:
        raise ZeroProbabilityEvidence(f"evidence {evidence} has probability 0")
    joint = joint / total
    marginals: MarginalSet = {}
    for v in range(network.n_variables):
        axes = tuple(network.parents[v]) + (v,)
        fam = _marginalize(joint, tuple(range(network.n_variables)), axes)
        marginals[v] = fam.reshape(-1, network.variables[v].n_states)
    return marginals, float(np.log(total))


def loopy_bp_marginals(
    network: BayesianNetwork,
    evidence: Mapping[int, int] | None = None,
    max_iters: int = BP_MAX_ITERS,
    damping: float = BP_DAMPING,
    tolerance: float = BP_TOLERANCE,
) -> tuple[MarginalSet, bool]:
    """Damped flooding sum-product on the factor graph; exact on trees."""
    marginals, converged, _ = _bp_run(
        network, evidence, max_iters, damping, tolerance
    )
    return marginals, converged


def bp_family_beliefs(
    network: BayesianNetwork,
    evidence: Mapping[int, int] | None = None,
    max_iters: int = BP_MAX_ITERS,
    damping: float = BP_DAMPING,
    tolerance: float = BP_TOLERANCE,
) -> tuple[MarginalSet, float, bool]:
    """Family beliefs plus the Bethe approximation of log Pr(evidence)."""
    return _bp_run(network, evidence, max_iters, damping, tolerance)


def _bp_run(network, evidence, max_iters, damping, tolerance):
    _count_invocation()
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not 0 <= damping < 1:
        raise ValueError("damping must be in [0, 1)")
    evidence = dict(evidence or {})
    n = network.n_variables
    factors = []
    scopes = []
    for v in range(n):
        axes, tensor = _cpt_tensor(network, v)
        tensor = tensor.copy()
        for e_var, e_state in evidence.items():
            if e_var in axes:
                indicator = np.zeros(network.variables[e_var].n_states)
                indicator[e_state] = 1.0
                tensor = tensor * _align(indicator, (e_var,), axes)
        factors.append(tensor)
        scopes.append(axes)

    touching: dict[int, list[int]] = {v: [] for v in range(n)}
    for f, axes in enumerate(scopes):
        for v in axes:
            touching[v].append(f)

    def uniform(v):
        k = network.variables[v].n_states
        return np.full(k, 1.0 / k)

    v2f = {(v, f): uniform(v) for v in range(n) for f in touching[v]}
    f2v = {(f, v): uniform(v) for f, axes in enumerate(scopes) for v in axes}

    converged = False
    for _ in range(max_iters):
        new_v2f = {}
        for (v, f) in v2f:
            prod = np.ones(network.variables[v].n_states)
            for g in touching[v]:
                if g != f:
                    prod = prod * f2v[(g, v)]
            total = prod.sum()
            new_v2f[(v, f)] = prod / total if total > 0 else uniform(v)
        new_f2v = {}
        for (f, v) in f2v:
            axes = scopes[f]
            belief = factors[f]
            for u in axes:
                if u != v:
                    belief = belief * _align(new_v2f[(u, f)], (u,), axes)
            msg = _marginalize(belief, axes, (v,))
            total = msg.sum()
            new_f2v[(f, v)] = msg / total if total > 0 else uniform(v)
        # convergence measured on the undamped residual
        delta = 0.0
        for key in v2f:
            delta = max(delta, float(np.abs(new_v2f[key] - v2f[key]).max()))
            v2f[key] = damping * v2f[key] + (1 - damping) * new_v2f[key]
        for key in f2v:
            delta = max(delta, float(np.abs(new_f2v[key] - f2v[key]).max()))
            f2v[key] = damping * f2v[key] + (1 - damping) * new_f2v[key]
        if delta < tolerance:
            converged = True
            break

    var_beliefs = {}
    for v in range(n):
        prod = np.ones(network.variables[v].n_states)
        for g in touching[v]:
            prod = prod * f2v[(g, v)]
        total = prod.sum()
        var_beliefs[v] = prod / total if total > 0 else uniform(v)

    marginals: MarginalSet = {}
    factor_beliefs = []
    for f, axes in enumerate(scopes):
        belief = factors[f]
        for u in axes:
            belief = belief * _align(v2f[(u, f)], (u,), axes)
        total = belief.sum()
        belief = belief / total if total > 0 else np.full(
            belief.shape, 1.0 / belief.size
        )
        factor_beliefs.append(belief)
        v = f  # factor f is variable f's CPT over (parents..., f)
        marginals[v] = belief.reshape(-1, network.variables[v].n_states)

    log_z = 0.0
    for f, axes in enumerate(scopes):
        b = factor_beliefs[f]
        psi = factors[f]
        mask = b > 0
        log_z += float(np.sum(b[mask] * (np.log(psi[mask]) - np.log(b[mask]))))
    for v in range(n):
        d = len(touching[v])
        b = var_beliefs[v]
        mask = b > 0
        log_z += (d - 1) * float(np.sum(b[mask] * np.log(b[mask])))
    return marginals, converged, log_z


def test_log_likelihood(network: BayesianNetwork, test_rows: np.ndarray) -> float:
    """Mean per-instance log joint probability of fully observed rows."""
    log_p = log_joint_rows(network, test_rows)
    bad = np.where(~np.isfinite(log_p))[0]
    if bad.size:
        raise ZeroProbabilityInstance(int(bad[0]))
    return float(log_p.mean())


def kl_divergence(true_net: BayesianNetwork, learned_net: BayesianNetwork) -> float:
    """KL(P || Q) in nats via the family decomposition.

    Requires identical variables and DAG; terms with P(x|u) = 0 contribute 0;
    returns inf when Q puts zero mass where P does not.
    """
    if not true_net.same_structure(learned_net):
        raise StructureMismatch("networks must share variables and DAG")
    jt = build_jointree(true_net)
    marginals, _ = jointree_marginals(jt, {})
    kld = 0.0
    for v in range(true_net.n_variables):
        family_joint = marginals[v]          # (parent configs, states)
        p_u = family_joint.sum(axis=1)
        p = true_net.cpts[v]
        q = learned_net.cpts[v]
        active = (p > 0) & (p_u > 0)[:, None]
        if np.any(active & (q <= 0)):
            return float("inf")
        terms = np.zeros_like(p)
        terms[active] = p[active] * (np.log(p[active]) - np.log(q[active]))
        kld += float((p_u * terms.sum(axis=1)).sum())
    return kld
