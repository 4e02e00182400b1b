"""Incomplete datasets and the empirical distribution over their augmented view.

A dataset row stores one integer per variable, with ``MISSING`` (-1) marking a
hidden cell.  Conceptually each partially observed variable X contributes two
extra fully observed columns, a proxy X* (its value, or the token mi) and a
mechanism R_X in {ob, unob}; because R_X = unob exactly when X* = mi, the raw
row already determines the whole augmented row, so the distribution is keyed
by distinct raw rows with integer multiplicities.

Conditions on the augmented view are plain ``{variable id: constraint}``
mappings, where a constraint is a state index (proxy equals that value, hence
observed), :data:`MISSING`, or the strings :data:`OBSERVED` / :data:`UNOBSERVED`
for mechanism-only constraints.  Mechanism variables can be named explicitly
with :class:`Mech` where an instantiation over them is requested.
"""

from __future__ import annotations

from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ZeroSupport
from .network import BayesianNetwork

MISSING = -1
OBSERVED = "ob"
UNOBSERVED = "unob"

Condition = Mapping[int, "int | str"]


class Mech(NamedTuple):
    """Names the mechanism variable R of a partially observed variable."""

    var: int


class IncompleteDataset:
    """Rows over a network's variables, with ``MISSING`` cells.

    The partially observed set is inferred (any variable with a missing cell)
    and can be widened with ``declared_partial`` so simulators can declare a
    variable partially observed even when no cell happened to go missing.
    """

    def __init__(
        self,
        network: BayesianNetwork,
        rows: np.ndarray,
        declared_partial: Iterable[int] = (),
    ):
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != network.n_variables:
            rows = rows.reshape(-1, network.n_variables)
        self.network = network
        self.rows = rows
        inferred = {int(v) for v in np.where((rows == MISSING).any(axis=0))[0]}
        self.partially_observed = frozenset(inferred | set(declared_partial))

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    @property
    def fully_observed(self) -> frozenset[int]:
        return frozenset(range(self.network.n_variables)) - self.partially_observed

    def __eq__(self, other):
        if not isinstance(other, IncompleteDataset):
            return NotImplemented
        return (
            self.network.same_structure(other.network)
            and self.rows.shape == other.rows.shape
            and np.array_equal(self.rows, other.rows)
        )


class DataDistribution:
    """Count table over distinct augmented rows, built in one pass.

    ``keys`` holds the distinct rows, ``counts`` their multiplicities, and
    ``key_of_row`` maps each original row index back to its key, which is what
    makes :func:`contributing_rows` exact.  Immutable after construction.
    """

    def __init__(self, dataset: IncompleteDataset):
        self.network = dataset.network
        self.partially_observed = dataset.partially_observed
        self.n_rows = dataset.n_rows
        # compact dtype keeps the count table cache-friendly at 10^6+ rows
        rows = dataset.rows.astype(np.int16, copy=False)
        keys, inverse, counts = np.unique(
            rows, axis=0, return_inverse=True, return_counts=True
        )
        self.keys = keys
        self.counts = counts.astype(np.int64)
        self.key_of_row = inverse.reshape(-1)
        # one (vectorized) pass over the rows built the table
        self.row_visits = dataset.n_rows

    @property
    def fully_observed(self) -> frozenset[int]:
        return frozenset(range(self.network.n_variables)) - self.partially_observed

    def mask_of(self, condition: Condition | None) -> np.ndarray:
        """Boolean mask over distinct keys satisfying ``condition``."""
        mask = np.ones(len(self.keys), dtype=bool)
        if not condition:
            return mask
        for var, want in condition.items():
            var = int(var)
            col = self.keys[:, var]
            if want == OBSERVED:
                self._require_partial(var)
                mask &= col != MISSING
            elif want == UNOBSERVED:
                self._require_partial(var)
                mask &= col == MISSING
            elif want == MISSING:
                self._require_partial(var)
                mask &= col == MISSING
            else:
                state = int(want)
                if not 0 <= state < self.network.variables[var].n_states:
                    raise ValueError(
                        f"state {state} out of range for variable {var}"
                    )
                mask &= col == state
        return mask

    def _require_partial(self, var: int) -> None:
        if var not in self.partially_observed:
            raise ValueError(
                f"variable {var} is fully observed and has no mechanism"
            )

    def count(self, condition: Condition | None) -> int:
        return int(self.counts[self.mask_of(condition)].sum())


def augment(dataset: IncompleteDataset) -> DataDistribution:
    """Build the empirical distribution over the augmented, fully observed view."""
    return DataDistribution(dataset)


def estimate_probability(
    dist: DataDistribution, target: Condition, given: Condition | None = None
) -> tuple[float, int]:
    """Empirical ``(Pr(target | given), support)`` from exact counts.

    Support is the count of rows satisfying ``given``.  Raises
    :class:`ZeroSupport` when that count is zero; callers own the fallback
    policy.
    """
    given = given or {}

    def kinds(cond):
        # a state or mi constraint touches the proxy column, ob/unob the mechanism
        return {
            (var, "mech" if want in (OBSERVED, UNOBSERVED) else "proxy")
            for var, want in cond.items()
        }

    overlap = kinds(target) & kinds(given)
    if overlap:
        raise ValueError(f"target and given overlap on {sorted(overlap)}")
    given_mask = dist.mask_of(given)
    denom = int(dist.counts[given_mask].sum())
    if denom == 0:
        raise ZeroSupport(f"no rows satisfy {dict(given)!r}")
    num = int(dist.counts[given_mask & dist.mask_of(target)].sum())
    return num / denom, denom


def observed_instantiations(
    dist: DataDistribution, variables: Sequence[int | Mech]
) -> list[tuple[dict, int]]:
    """Every instantiation of ``variables`` seen in the data, with counts.

    Entries are variable ids (value / proxy columns) or :class:`Mech` wrappers
    (mechanism columns).  Output is in mixed-radix ascending order over the
    given sequence (proxy state ``mi`` ordered after the real states,
    ``ob`` before ``unob``); counts sum to N.
    """
    variables = list(variables)
    if not variables:
        return [({}, dist.n_rows)]
    cols = np.empty((len(dist.keys), len(variables)), dtype=np.int64)
    for j, spec in enumerate(variables):
        if isinstance(spec, Mech):
            dist._require_partial(int(spec.var))
            cols[:, j] = (dist.keys[:, int(spec.var)] == MISSING).astype(np.int64)
        else:
            var = int(spec)
            col = dist.keys[:, var].copy()
            # sort the mi token after the real states
            col[col == MISSING] = dist.network.variables[var].n_states
            cols[:, j] = col
    uniq, inverse = np.unique(cols, axis=0, return_inverse=True)
    totals = np.bincount(inverse.reshape(-1), weights=dist.counts).astype(np.int64)
    out = []
    for key, count in zip(uniq, totals):
        inst: dict = {}
        for j, spec in enumerate(variables):
            if isinstance(spec, Mech):
                inst[spec] = OBSERVED if key[j] == 0 else UNOBSERVED
            else:
                var = int(spec)
                v = int(key[j])
                inst[var] = MISSING if v == dist.network.variables[var].n_states else v
        out.append((inst, int(count)))
    return out


def contributing_rows(dist: DataDistribution, given: Condition | None) -> set[int]:
    """Original row indices whose augmented rows satisfy ``given``."""
    mask = dist.mask_of(given)
    hit = mask[dist.key_of_row]
    return {int(i) for i in np.where(hit)[0]}
