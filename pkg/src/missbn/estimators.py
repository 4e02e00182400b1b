"""Closed-form deletion estimators for family marginals, and parameter
extraction.

All estimators map the empirical augmented distribution to an estimate of
Pr(Y) for a set of variables Y (typically a family: a child and its parents).

* listwise deletion conditions on every mechanism in the dataset being ob,
* direct deletion conditions only on the mechanisms of Y's partially
  observed members,
* direct deletion under MAR sums re-weighted conditionals over the observed
  instantiations of the fully observed variables outside Y,
* factored deletion aggregates, over a subset lattice, every chain-rule
  factorization, so each factor can be estimated on more rows,
* the cross-mechanism estimator handles the two-variable MNAR structure in
  which each variable's missingness depends on the other's value.

Estimates are exact functions of integer counts; all randomness lives in the
data.  Zero-support conditionals in the MAR estimators back off by dropping
conditioning variables (farthest-from-the-family first, then the family's own
observed members) and bottom out at the uniform distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dataset import MISSING, OBSERVED, DataDistribution, estimate_probability
from .errors import (
    DegenerateMechanism,
    EmptyCandidates,
    ScopeMismatch,
    ZeroSupport,
)
from .lattice import build_lattice
from .network import BayesianNetwork, moral_distances, validate

AGGREGATION_METHODS = ("mean", "median", "inverse-variance", "lowest-variance")
_VAR_EPS = 1e-12

FamilyEstimator = Callable[[DataDistribution, Sequence[int]], "EstimateTable"]


@dataclass
class EstimateTable:
    """A probability table over ``scope`` (sorted ids) with support metadata.

    ``support`` is the effective count behind the estimate (used to convert
    back to pseudo-counts when extracting parameters); ``variance`` is the
    binomial plug-in heuristic used to weight competing estimates.
    """

    scope: tuple[int, ...]
    values: np.ndarray
    support: float
    variance: float
    rows_used: frozenset[int] | None = None

    def marginalize(self, keep: Sequence[int]) -> "EstimateTable":
        keep = tuple(sorted(keep))
        if not set(keep) <= set(self.scope):
            raise ScopeMismatch(f"{keep} not within {self.scope}")
        drop = tuple(i for i, v in enumerate(self.scope) if v not in set(keep))
        return EstimateTable(
            keep, self.values.sum(axis=drop), self.support, self.variance,
            self.rows_used,
        )


def _table_variance(values: np.ndarray, support: float) -> float:
    """Mean per-cell binomial variance p(1-p)/n of a table estimated from
    ``support`` rows."""
    p = np.asarray(values, dtype=float)
    return float(np.mean(p * (1.0 - p))) / max(support, 1.0)


def _scope_shape(dist: DataDistribution, scope: Sequence[int]) -> tuple[int, ...]:
    return tuple(dist.network.variables[v].n_states for v in scope)


def _observed_mask(dist: DataDistribution, variables: Sequence[int]) -> np.ndarray:
    """Mask over distinct keys where every listed variable is observed."""
    mask = np.ones(len(dist.keys), dtype=bool)
    for v in variables:
        mask &= dist.keys[:, v] != MISSING
    return mask


def _rows_from_key_mask(dist: DataDistribution, mask: np.ndarray) -> frozenset[int]:
    return frozenset(np.where(mask[dist.key_of_row])[0].tolist())


def _flat_index(dist: DataDistribution, variables: Sequence[int], mask) -> np.ndarray:
    """Mixed-radix index over the listed variables for the masked keys."""
    idx = np.zeros(int(np.count_nonzero(mask)), dtype=np.int64)
    for v in variables:
        idx = idx * dist.network.variables[v].n_states + dist.keys[mask, v]
    return idx


def _joint_counts(
    dist: DataDistribution, scope: Sequence[int], mask: np.ndarray
) -> np.ndarray:
    """Dense count table over ``scope`` from the masked rows (all of whose
    scope values are observed)."""
    shape = _scope_shape(dist, scope)
    size = int(np.prod(shape)) if shape else 1
    flat = _flat_index(dist, scope, mask)
    dense = np.bincount(flat, weights=dist.counts[mask], minlength=size)
    return dense.reshape(shape)


def _deletion_estimate(
    dist: DataDistribution,
    family: Sequence[int],
    condition_on: Sequence[int],
    track_rows: bool,
) -> EstimateTable:
    scope = tuple(sorted(family))
    mask = _observed_mask(dist, condition_on)
    support = int(dist.counts[mask].sum())
    if support == 0:
        raise ZeroSupport(
            f"no rows observe all of {tuple(condition_on)} for family {scope}"
        )
    values = _joint_counts(dist, scope, mask) / support
    return EstimateTable(
        scope,
        values,
        support,
        _table_variance(values, support),
        _rows_from_key_mask(dist, mask) if track_rows else None,
    )


def listwise_deletion(
    dist: DataDistribution, family: Sequence[int], track_rows: bool = False
) -> EstimateTable:
    """Estimate Pr(family) from the fully complete rows only."""
    return _deletion_estimate(
        dist, family, sorted(dist.partially_observed), track_rows
    )


def direct_deletion_mcar(
    dist: DataDistribution, family: Sequence[int], track_rows: bool = False
) -> EstimateTable:
    """Estimate Pr(family) from the rows where the family's partially
    observed members are all observed."""
    partial = sorted(set(family) & dist.partially_observed)
    return _deletion_estimate(dist, family, partial, track_rows)


def _drop_order(
    network: BayesianNetwork, family: Sequence[int], context: Sequence[int]
) -> list[int]:
    """Backoff order for conditioning variables: outside-the-family variables
    farthest from the family first, then the family's own observed members."""
    fam = set(family)
    dist_to_fam = moral_distances(network, sorted(fam))
    outside = [v for v in context if v not in fam]
    inside = sorted(v for v in context if v in fam)
    n = network.n_variables
    outside.sort(
        key=lambda v: (
            -(dist_to_fam[v] if np.isfinite(dist_to_fam[v]) else n + 1),
            v,
        )
    )
    return outside + inside


def _context_vars(
    dist: DataDistribution, family: Sequence[int], scope: Sequence[int] | None
) -> list[int]:
    """Observed variables the MAR outer sum runs over: the family's observed
    members plus the (possibly informed-restricted) observed variables
    outside the family."""
    fam = set(family)
    y_o = fam & dist.fully_observed
    pool = dist.fully_observed if scope is None else frozenset(scope)
    if scope is not None and not pool <= dist.fully_observed:
        raise ScopeMismatch(
            "informed scope must contain only fully observed variables"
        )
    return sorted(y_o | (pool - fam))


def _group_context(dist: DataDistribution, context: Sequence[int]):
    """Group distinct keys by context values; returns (ctx_keys, ctx_inverse,
    ctx_totals, merge_level).

    ``context`` is given in reverse drop order, so coarsening the context by
    dropping its trailing columns keeps groups contiguous in the sorted key
    order.  ``merge_level[i]`` is the first column where sorted group i and
    i+1 differ; a coarsening that keeps only the first L columns merges all
    adjacent groups with merge_level >= L.
    """
    if not context:
        inv = np.zeros(len(dist.keys), dtype=np.int64)
        return (
            np.zeros((1, 0), dtype=np.int64),
            inv,
            np.array([dist.n_rows]),
            np.zeros(0, dtype=np.int64),
        )
    cols = dist.keys[:, list(context)]
    # bit-pack the context into a few int64 words (first column most
    # significant) so the lexicographic sort is a plain argsort
    words: list[np.ndarray] = []
    acc = np.zeros(len(cols), dtype=np.int64)
    used = 0
    for j, v in enumerate(context):
        bits = max(int(dist.network.variables[v].n_states - 1).bit_length(), 1)
        if used + bits > 62:
            words.append(acc)
            acc = np.zeros(len(cols), dtype=np.int64)
            used = 0
        acc = (acc << bits) | cols[:, j].astype(np.int64)
        used += bits
    words.append(acc)
    perm = np.lexsort(tuple(reversed(words)))
    sorted_words = [w[perm] for w in words]
    is_new = np.zeros(len(cols), dtype=bool)
    is_new[0] = True
    for w in sorted_words:
        is_new[1:] |= w[1:] != w[:-1]
    group_of_sorted = np.cumsum(is_new) - 1
    inv = np.empty(len(cols), dtype=np.int64)
    inv[perm] = group_of_sorted
    ctx_keys = cols[perm][is_new]
    totals = np.bincount(
        inv, weights=dist.counts, minlength=len(ctx_keys)
    ).astype(np.int64)
    # first differing column between consecutive distinct groups
    pair_diff = ctx_keys[1:] != ctx_keys[:-1]
    merge_level = np.where(
        pair_diff.any(axis=1), pair_diff.argmax(axis=1), len(context)
    ).astype(np.int64)
    return ctx_keys, inv, totals, merge_level


def _strides_for(shape: Sequence[int]) -> np.ndarray:
    strides = np.ones(len(shape), dtype=np.int64)
    for i in range(len(shape) - 2, -1, -1):
        strides[i] = strides[i + 1] * shape[i + 1]
    return strides


def _cell_offsets(
    dist: DataDistribution,
    scope: Sequence[int],
    strides: np.ndarray,
    variables: Sequence[int],
) -> np.ndarray:
    """Flat offsets into the scope table for each mixed-radix cell of
    ``variables``."""
    pos = {v: i for i, v in enumerate(scope)}
    shape_vars = [dist.network.variables[v].n_states for v in variables]
    m = int(np.prod(shape_vars)) if shape_vars else 1
    radix = _strides_for(shape_vars) if shape_vars else np.array([], dtype=np.int64)
    cells = np.arange(m)
    offsets = np.zeros(m, dtype=np.int64)
    for i, v in enumerate(variables):
        digit = cells // radix[i] % shape_vars[i]
        offsets += digit * strides[pos[v]]
    return offsets


def direct_deletion_mar(
    dist: DataDistribution,
    family: Sequence[int],
    scope: Sequence[int] | None = None,
    track_rows: bool = False,
) -> EstimateTable:
    """MAR estimate: sum, over the observed instantiations of the fully
    observed variables (restricted to ``scope`` when doing informed
    deletion), of the conditional over the family's partially observed
    members times the empirical weight of the instantiation."""
    scope_sorted = tuple(sorted(family))
    y_m = sorted(set(family) & dist.partially_observed)
    y_o = sorted(set(family) & dist.fully_observed)
    if not y_m:
        # no partially observed members: the outer sum collapses exactly to
        # the empirical joint over the family (bit-identical to MCAR deletion)
        _context_vars(dist, family, scope)  # still validate an informed scope
        table = _deletion_estimate(dist, family, [], track_rows=False)
        if track_rows:
            table.rows_used = frozenset(range(dist.n_rows))
        return table
    # context in reverse drop order, so backoff levels are prefix groupings
    context = list(
        reversed(_drop_order(dist.network, scope_sorted,
                             _context_vars(dist, family, scope)))
    )
    ctx_keys, ctx_inv, ctx_tot, merge_level = _group_context(dist, context)
    n_groups = len(ctx_keys)

    shape = _scope_shape(dist, scope_sorted)
    strides = _strides_for(shape)
    flat = np.zeros(int(np.prod(shape)), dtype=np.float64)
    pos = {v: i for i, v in enumerate(scope_sorted)}
    base_of_group = np.zeros(n_groups, dtype=np.int64)
    for v in y_o:
        base_of_group += ctx_keys[:, context.index(v)] * strides[pos[v]]

    m_cells = int(np.prod(_scope_shape(dist, y_m)))
    obs = _observed_mask(dist, y_m)
    ym_flat_obs = _flat_index(dist, y_m, obs)
    cond_counts = np.bincount(
        ctx_inv[obs] * m_cells + ym_flat_obs,
        weights=dist.counts[obs],
        minlength=n_groups * m_cells,
    ).reshape(n_groups, m_cells)
    denom = cond_counts.sum(axis=1)
    support = int(dist.counts[obs].sum())
    ym_offsets = _cell_offsets(dist, scope_sorted, strides, y_m)

    ok = denom > 0
    if ok.any():
        contrib = (ctx_tot[ok] / dist.n_rows)[:, None] * (
            cond_counts[ok] / denom[ok][:, None]
        )
        cell_idx = (base_of_group[ok][:, None] + ym_offsets[None, :]).ravel()
        flat += np.bincount(
            cell_idx, weights=contrib.ravel(), minlength=flat.size
        )
    unresolved = np.where(~ok)[0]
    if unresolved.size:
        fallback = _leveled_backoff(
            dist, context, merge_level, ctx_inv, obs, ym_flat_obs,
            1, m_cells, unresolved, np.zeros(unresolved.size, dtype=np.int64),
        )
        cell_idx = (
            base_of_group[unresolved][:, None] + ym_offsets[None, :]
        ).ravel()
        contrib = (ctx_tot[unresolved] / dist.n_rows)[:, None] * fallback
        flat += np.bincount(
            cell_idx, weights=contrib.ravel(), minlength=flat.size
        )

    total = flat.sum()
    if total > 0:
        flat /= total
    values = flat.reshape(shape)
    return EstimateTable(
        scope_sorted,
        values,
        support,
        _table_variance(values, support),
        frozenset(range(dist.n_rows)) if track_rows else None,
    )


def _leveled_backoff(
    dist: DataDistribution,
    context: Sequence[int],
    merge_level: np.ndarray,
    ctx_inv: np.ndarray,
    obs: np.ndarray,
    cell_flat_obs: np.ndarray,
    s_cells: int,
    v_cells: int,
    failing_groups: np.ndarray,
    failing_s: np.ndarray,
) -> np.ndarray:
    """Conditionals over the last ``v_cells`` axis for (group, source-config)
    pairs whose full-context conditioning event had no support.

    Walks the fixed drop order; at each level the context loses its trailing
    column (context is in reverse drop order, so coarsened groups are merges
    of adjacent sorted groups, read off ``merge_level`` without re-sorting).
    Every pair resolves at the first level where its coarsened event has
    support; pairs that never find support come back uniform.
    """
    out = np.full((len(failing_groups), v_cells), 1.0 / v_cells)
    pending = np.arange(len(failing_groups))
    cells = s_cells * v_cells
    n_groups = len(merge_level) + 1
    base_counts = np.bincount(
        ctx_inv[obs] * cells + cell_flat_obs,
        weights=dist.counts[obs],
        minlength=n_groups * cells,
    ).reshape(n_groups, cells)
    for level in range(1, len(context) + 1):
        if not pending.size:
            return out
        keep = len(context) - level
        # groups are sorted by context, so a coarsening is a segment sum
        is_new = np.concatenate([[True], merge_level < keep])
        lvl_of_group = np.cumsum(is_new) - 1
        starts = np.flatnonzero(is_new)
        lvl_counts = np.add.reduceat(base_counts, starts, axis=0).reshape(
            -1, s_cells, v_cells
        )
        lvl_denom = lvl_counts.sum(axis=2)
        ids = lvl_of_group[failing_groups[pending]]
        s_idx = failing_s[pending]
        hit = lvl_denom[ids, s_idx] > 0
        if hit.any():
            rows = pending[hit]
            out[rows] = (
                lvl_counts[ids[hit], s_idx[hit]]
                / lvl_denom[ids[hit], s_idx[hit]][:, None]
            )
            pending = pending[~hit]
    return out


def _aggregate_stack(stack: np.ndarray, variances: np.ndarray, method: str):
    """Combine candidate tables stacked on axis 0; returns (values, variance).

    ``variances`` carries one scalar per candidate, or per candidate and
    context group when a leading group axis is present."""
    if method == "mean":
        return stack.mean(axis=0), variances.sum(axis=0) / variances.shape[0] ** 2
    if method == "median":
        return np.median(stack, axis=0), np.median(variances, axis=0)
    if method == "inverse-variance":
        w = 1.0 / (variances + _VAR_EPS)
        shaped = (w / w.sum(axis=0)).reshape(w.shape + (1,) * (stack.ndim - w.ndim))
        return (stack * shaped).sum(axis=0), 1.0 / w.sum(axis=0)
    if method == "lowest-variance":
        best = np.argmin(variances, axis=0)
        if np.ndim(best) == 0:
            return stack[int(best)], variances[int(best)]
        idx = best.reshape((1,) + best.shape + (1,) * (stack.ndim - best.ndim - 1))
        values = np.take_along_axis(stack, idx, axis=0)[0]
        return values, np.take_along_axis(variances, best[None], axis=0)[0]
    raise ValueError(f"unknown aggregation method {method!r}")


def factored_deletion_mcar(
    dist: DataDistribution,
    family: Sequence[int],
    method: str = "inverse-variance",
    track_rows: bool = False,
) -> EstimateTable:
    """Aggregate all chain-rule factorizations of Pr(family) on the subset
    lattice; each factor is estimated on the rows where its own partially
    observed variables are observed."""
    scope = tuple(sorted(family))
    k = len(scope)
    lat = build_lattice(scope)
    shape = _scope_shape(dist, scope)

    if not any(_observed_mask(dist, [v]).any() and dist.n_rows for v in scope):
        raise ZeroSupport(f"no row observes any variable of {scope}")

    # per-edge conditional tables, broadcast over the full family shape
    cond: dict[tuple[int, int], np.ndarray] = {}
    var_edge: dict[tuple[int, int], float] = {}
    used = np.zeros(len(dist.keys), dtype=bool) if track_rows else None
    for edge in lat.edges:
        target_vars = lat.members(edge.target)
        partial = [v for v in target_vars if v in dist.partially_observed]
        mask = _observed_mask(dist, partial)
        n = int(dist.counts[mask].sum())
        joint = _joint_counts(dist, target_vars, mask)
        v_axis = target_vars.index(scope[edge.added])
        denom = joint.sum(axis=v_axis, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            table = np.where(denom > 0, joint / np.maximum(denom, 1), 1.0 / shape[edge.added])
        expand = tuple(slice(None) if v in target_vars else None for v in scope)
        key = (edge.source, edge.added)
        cond[key] = table[expand]
        var_edge[key] = _table_variance(table, n)
        if track_rows:
            used |= mask

    node_val: dict[int, np.ndarray] = {0: np.ones((1,) * k)}
    node_var: dict[int, float] = {0: 0.0}
    for mask_bits in sorted(lat.nodes[1:], key=lambda m: (bin(m).count("1"), m)):
        stacks, variances = [], []
        for edge in lat.incoming(mask_bits):
            key = (edge.source, edge.added)
            stacks.append(cond[key] * node_val[edge.source])
            variances.append(var_edge[key] + node_var[edge.source])
        stack = np.stack(np.broadcast_arrays(*stacks), axis=0)
        values, var = _aggregate_stack(
            stack, np.asarray(variances, dtype=float), method
        )
        node_val[mask_bits] = values
        node_var[mask_bits] = float(var)

    top = np.broadcast_to(node_val[lat.top], shape)
    total = top.sum()
    values = top / total if total > 0 else np.full(shape, 1.0 / top.size)
    partial_members = [v for v in scope if v in dist.partially_observed]
    n_eff = int(dist.counts[_observed_mask(dist, partial_members)].sum())
    return EstimateTable(
        scope,
        values,
        n_eff,
        _table_variance(values, n_eff),
        _rows_from_key_mask(dist, used) if track_rows else None,
    )


def factored_deletion_mar(
    dist: DataDistribution,
    family: Sequence[int],
    method: str = "inverse-variance",
    scope: Sequence[int] | None = None,
    track_rows: bool = False,
) -> EstimateTable:
    """MAR factored estimate: per observed context instantiation, aggregate
    all factorizations of the family's partially observed members on the
    lattice (each factor conditioned on the context and on observation of the
    variables at or above its edge), then mix with the contexts' empirical
    weights."""
    scope_sorted = tuple(sorted(family))
    y_m = sorted(set(family) & dist.partially_observed)
    if not y_m:
        return direct_deletion_mar(dist, family, scope, track_rows)
    y_o = sorted(set(family) & dist.fully_observed)
    context = list(
        reversed(_drop_order(dist.network, scope_sorted,
                             _context_vars(dist, family, scope)))
    )
    ctx_keys, ctx_inv, ctx_tot, merge_level = _group_context(dist, context)
    n_groups = len(ctx_keys)

    lat = build_lattice(tuple(y_m))
    k = len(y_m)
    ym_shape = _scope_shape(dist, y_m)

    # per-edge conditional tables with a leading context-group axis
    cond: dict[tuple[int, int], np.ndarray] = {}
    var_edge: dict[tuple[int, int], np.ndarray] = {}
    for edge in lat.edges:
        added = y_m[edge.added]
        source_vars = list(lat.members(edge.source))
        target_vars = source_vars + [added]  # source configs first, V last
        s_shape = _scope_shape(dist, source_vars)
        s_cells = int(np.prod(s_shape)) if s_shape else 1
        v_cells = ym_shape[edge.added]
        mask = _observed_mask(dist, target_vars)
        flat_obs = _flat_index(dist, target_vars, mask)
        joint = np.bincount(
            ctx_inv[mask] * (s_cells * v_cells) + flat_obs,
            weights=dist.counts[mask],
            minlength=n_groups * s_cells * v_cells,
        ).reshape(n_groups, s_cells, v_cells)
        denom = joint.sum(axis=2)
        n_eg = joint.reshape(n_groups, -1).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            table = np.where(
                denom[..., None] > 0, joint / np.maximum(denom[..., None], 1), 0.0
            )
        failing_g, failing_s = np.nonzero(denom == 0)
        if failing_g.size:
            table[failing_g, failing_s] = _leveled_backoff(
                dist, context, merge_level, ctx_inv, mask, flat_obs,
                s_cells, v_cells, failing_g, failing_s,
            )
        # reshape to (groups, source dims..., V) and align axes to y_m order
        table = table.reshape((n_groups,) + s_shape + (v_cells,))
        axis_order = np.argsort([y_m.index(v) for v in target_vars])
        table = np.moveaxis(table, 1 + axis_order, 1 + np.arange(len(target_vars)))
        key = (edge.source, edge.added)
        expand = (slice(None),) + tuple(
            slice(None) if v in target_vars else None for v in y_m
        )
        cond[key] = table[expand]
        p = table.reshape(n_groups, -1)
        var_edge[key] = np.mean(p * (1.0 - p), axis=1) / np.maximum(n_eg, 1.0)

    node_val: dict[int, np.ndarray] = {0: np.ones((n_groups,) + (1,) * k)}
    node_var: dict[int, np.ndarray] = {0: np.zeros(n_groups)}
    for mask_bits in sorted(lat.nodes[1:], key=lambda m: (bin(m).count("1"), m)):
        stacks, variances = [], []
        for edge in lat.incoming(mask_bits):
            key = (edge.source, edge.added)
            stacks.append(cond[key] * node_val[edge.source])
            variances.append(var_edge[key] + node_var[edge.source])
        stack = np.stack(np.broadcast_arrays(*stacks), axis=0)
        values, var = _aggregate_stack(stack, np.stack(variances, axis=0), method)
        node_val[mask_bits] = values
        node_var[mask_bits] = np.asarray(var, dtype=float)

    top = np.broadcast_to(
        node_val[lat.top], (n_groups,) + ym_shape
    ).reshape(n_groups, -1)
    totals = top.sum(axis=1, keepdims=True)
    top = np.where(totals > 0, top / np.maximum(totals, 1e-300), 1.0 / top.shape[1])

    shape = _scope_shape(dist, scope_sorted)
    strides = _strides_for(shape)
    pos = {v: i for i, v in enumerate(scope_sorted)}
    base_of_group = np.zeros(n_groups, dtype=np.int64)
    for v in y_o:
        base_of_group += ctx_keys[:, context.index(v)] * strides[pos[v]]
    ym_offsets = _cell_offsets(dist, scope_sorted, strides, y_m)
    cell_idx = (base_of_group[:, None] + ym_offsets[None, :]).ravel()
    weights = ((ctx_tot / dist.n_rows)[:, None] * top).ravel()
    flat = np.bincount(cell_idx, weights=weights, minlength=int(np.prod(shape)))
    total = flat.sum()
    if total > 0:
        flat /= total
    values = flat.reshape(shape)

    n_eff = int(dist.counts[_observed_mask(dist, y_m)].sum())
    return EstimateTable(
        scope_sorted,
        values,
        n_eff,
        _table_variance(values, n_eff),
        frozenset(range(dist.n_rows)) if track_rows else None,
    )


def mnar_cross_estimate(dist: DataDistribution, x: int, y: int) -> EstimateTable:
    """Consistent Pr(X, Y) under the two-variable cross mechanism, where each
    variable's missingness depends on the other's value.

    Per cell: Pr(both observed) times the complete-pair conditional, divided
    by the two single-mechanism observation probabilities, then normalized.
    """
    scope = tuple(sorted((x, y)))
    kx = dist.network.variables[x].n_states
    ky = dist.network.variables[y].n_states
    both_ob, n_all = estimate_probability(dist, {x: OBSERVED, y: OBSERVED})
    table = np.zeros((kx, ky))
    for xs in range(kx):
        d_term, _ = estimate_probability(dist, {y: OBSERVED}, {x: xs})
        for ys in range(ky):
            c_term, _ = estimate_probability(dist, {x: OBSERVED}, {y: ys})
            joint, _ = estimate_probability(
                dist, {x: xs, y: ys}, {x: OBSERVED, y: OBSERVED}
            )
            if c_term == 0.0 or d_term == 0.0:
                raise DegenerateMechanism(
                    f"zero observation probability for cell ({xs}, {ys})"
                )
            table[xs, ys] = both_ob * joint / (c_term * d_term)
    total = table.sum()
    if total > 0:
        table /= total
    if scope != (x, y):
        table = table.T
    support = int(round(n_all * both_ob))
    return EstimateTable(scope, table, support, _table_variance(table, support))


def aggregate(
    candidates: Sequence[EstimateTable], method: str = "inverse-variance"
) -> EstimateTable:
    """Combine competing estimates of the same scope into one."""
    if not candidates:
        raise EmptyCandidates("no candidate estimates")
    scope = candidates[0].scope
    for c in candidates[1:]:
        if c.scope != scope:
            raise ScopeMismatch(f"{c.scope} differs from {scope}")
    if method not in AGGREGATION_METHODS:
        raise ValueError(f"unknown aggregation method {method!r}")
    stack = np.stack([c.values for c in candidates], axis=0)
    variances = np.array([c.variance for c in candidates], dtype=float)
    supports = np.array([c.support for c in candidates], dtype=float)
    if method == "lowest-variance":
        best = int(np.argmin(variances))
        chosen = candidates[best]
        return EstimateTable(
            scope, chosen.values.copy(), chosen.support, chosen.variance
        )
    if method == "median":
        values = np.median(stack, axis=0)
        total = values.sum()
        if total > 0:
            values = values / total
        return EstimateTable(
            scope, values, float(np.median(supports)), float(np.median(variances))
        )
    if method == "mean":
        values = stack.mean(axis=0)
        return EstimateTable(
            scope,
            values,
            float(supports.mean()),
            float(variances.sum() / len(candidates) ** 2),
        )
    w = 1.0 / (variances + _VAR_EPS)
    values = np.tensordot(w / w.sum(), stack, axes=(0, 0))
    return EstimateTable(
        scope, values, float(np.dot(w / w.sum(), supports)), float(1.0 / w.sum())
    )


def extract_parameters(
    skeleton: BayesianNetwork,
    family_estimator: FamilyEstimator,
    dist: DataDistribution,
    prior_concentration: float = 2.0,
) -> BayesianNetwork:
    """Turn family-marginal estimates into CPTs with Dirichlet-MAP smoothing.

    Each family estimate becomes pseudo-counts (support times probability);
    rows are smoothed as (c + a - 1) / (sum_c + k(a - 1)) for concentration a,
    which leaves maximum likelihood untouched at a = 1 and keeps every
    parameter strictly positive for a > 1.  Zero-support rows come out
    uniform.
    """
    if prior_concentration < 1.0:
        raise ValueError("prior concentration must be >= 1 for the MAP form")
    cpts = []
    for v in range(skeleton.n_variables):
        parents = skeleton.parents[v]
        scope = tuple(sorted((v,) + parents))
        table = family_estimator(dist, scope)
        if tuple(table.scope) != scope:
            raise ScopeMismatch(
                f"estimator returned scope {table.scope}, wanted {scope}"
            )
        counts = table.support * table.values
        perm = [scope.index(p) for p in parents] + [scope.index(v)]
        k = skeleton.variables[v].n_states
        mat = np.transpose(counts, perm).reshape(-1, k)
        alpha = prior_concentration - 1.0
        denom = mat.sum(axis=1, keepdims=True) + k * alpha
        with np.errstate(invalid="ignore", divide="ignore"):
            cpt = np.where(denom > 0, (mat + alpha) / np.maximum(denom, 1e-300), 1.0 / k)
        cpts.append(cpt)
    learned = skeleton.with_cpts(cpts)
    validate(learned)
    return learned
