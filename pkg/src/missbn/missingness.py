"""Missingness graphs: classification and simulation of incomplete data.

A missingness graph is a base network plus, for each partially observed
variable X, a mechanism R_X in {ob, unob} with its own parents and CPT.  The
proxy X* (= X when observed, mi otherwise) is implicit and deterministic, so
only the mechanisms are represented.

Simulators derive independent seeds per sub-task (variable selection,
mechanism structure, mechanism CPTs, data) so that the generated mechanism is
a function of the seed alone, not of the requested dataset size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import MISSING, IncompleteDataset
from .errors import NotEnoughObservedVariables
from .network import BayesianNetwork, moral_distances, sample_with_rng

MCAR = "MCAR"
MAR = "MAR"
MNAR = "MNAR"


@dataclass(frozen=True)
class MechanismSpec:
    """Mechanism CPT for one partially observed variable.

    ``p_unobserved[c]`` is Pr(R = unob) for parent instantiation ``c`` in
    mixed-radix order (first parent most significant, as for network CPTs).
    """

    parents: tuple[int, ...]
    p_unobserved: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "p_unobserved", np.asarray(self.p_unobserved, dtype=np.float64)
        )


@dataclass(frozen=True)
class MissingnessGraph:
    network: BayesianNetwork
    mechanisms: dict[int, MechanismSpec]
    informed: frozenset[int] | None = None

    def __post_init__(self):
        n = self.network.n_variables
        for target, spec in self.mechanisms.items():
            if not 0 <= target < n:
                raise ValueError(f"mechanism target {target} out of range")
            for p in spec.parents:
                if not 0 <= p < n:
                    raise ValueError(f"mechanism parent {p} out of range")
            n_cfg = 1
            for p in spec.parents:
                n_cfg *= self.network.variables[p].n_states
            if spec.p_unobserved.shape != (n_cfg,):
                raise ValueError(
                    f"mechanism CPT for variable {target} needs {n_cfg} rows"
                )
        if self.informed is not None:
            bad = set(self.informed) & set(self.mechanisms)
            if bad:
                raise ValueError(
                    f"informed set must contain only fully observed variables, got {sorted(bad)}"
                )

    @property
    def partially_observed(self) -> frozenset[int]:
        return frozenset(self.mechanisms)

    @property
    def fully_observed(self) -> frozenset[int]:
        return frozenset(range(self.network.n_variables)) - self.partially_observed


def classify(graph: MissingnessGraph) -> str:
    """MCAR, MAR, or MNAR, from the mechanism parent sets alone."""
    x_m = graph.partially_observed
    parent_sets = [set(spec.parents) for spec in graph.mechanisms.values()]
    if all(not ps for ps in parent_sets):
        return MCAR
    if all(not (ps & x_m) for ps in parent_sets):
        return MAR
    return MNAR


def _neighbor_preferring_parents(
    network: BayesianNetwork, x: int, candidates: list[int], p: int,
    rng: np.random.Generator,
) -> tuple[int, ...]:
    """Draw p parents, exhausting closer candidates (moral-graph distance from
    x) before farther ones, uniformly within a distance band."""
    dist = moral_distances(network, [x])
    chosen: list[int] = []
    remaining = sorted(candidates)
    while len(chosen) < p and remaining:
        nearest = min(dist[c] for c in remaining)
        band = [c for c in remaining if dist[c] == nearest]
        band = [band[i] for i in rng.permutation(len(band))]
        take = min(p - len(chosen), len(band))
        chosen.extend(band[:take])
        remaining = [c for c in remaining if c not in set(band[:take])]
    return tuple(chosen)


def _mechanism_config(
    network: BayesianNetwork, spec: MechanismSpec, complete: np.ndarray
) -> np.ndarray:
    cfg = np.zeros(complete.shape[0], dtype=np.int64)
    for p in spec.parents:
        cfg = cfg * network.variables[p].n_states + complete[:, p]
    return cfg


def _apply_mechanisms(
    network: BayesianNetwork,
    mechanisms: dict[int, MechanismSpec],
    complete: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample R values against the complete data and hide cells where unob."""
    rows = complete.copy()
    for x in sorted(mechanisms):
        spec = mechanisms[x]
        cfg = _mechanism_config(network, spec, complete)
        unob = rng.random(complete.shape[0]) < spec.p_unobserved[cfg]
        rows[unob, x] = MISSING
    return rows


def _select_partial(
    network: BayesianNetwork, m: float, rng: np.random.Generator
) -> list[int]:
    n = network.n_variables
    k = int(np.ceil(m * n))
    return sorted(rng.choice(n, size=min(k, n), replace=False).tolist())


def _spawn(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def simulate_mcar(
    network: BayesianNetwork, m: float, q: float, seed: int, n_rows: int
) -> tuple[IncompleteDataset, MissingnessGraph]:
    """Hide an m-fraction of the variables' cells independently with
    probability q."""
    sel_rng, _, data_rng, mech_rng = _spawn(seed, 4)
    x_m = _select_partial(network, m, sel_rng)
    mechanisms = {x: MechanismSpec((), np.array([q])) for x in x_m}
    graph = MissingnessGraph(network, mechanisms)
    complete = sample_with_rng(network, data_rng, n_rows)
    rows = _apply_mechanisms(network, mechanisms, complete, mech_rng)
    return IncompleteDataset(network, rows, declared_partial=x_m), graph


def _simulate_mar_full(
    network: BayesianNetwork,
    m: float,
    p: int,
    beta: tuple[float, float],
    seed: int,
    n_rows: int,
    informed_size: int | None = None,
) -> tuple[IncompleteDataset, MissingnessGraph, np.ndarray]:
    """Shared MAR generator; returns the complete data as the third element.

    With ``informed_size`` s, mechanism parents are drawn uniformly from a
    random observed subset W_o of size s (recorded on the graph); otherwise
    parents come from all observed variables, preferring moral-graph
    neighbors of the hidden variable.
    """
    sel_rng, struct_rng, cpt_rng, data_rng, mech_rng = _spawn(seed, 5)
    x_m = _select_partial(network, m, sel_rng)
    x_o = [v for v in range(network.n_variables) if v not in set(x_m)]
    alpha, beta_b = beta
    informed: frozenset[int] | None = None

    if x_m and p > 0 and len(x_o) < p:
        raise NotEnoughObservedVariables(
            f"need {p} observed variables for mechanism parents, have {len(x_o)}"
        )
    pool = x_o
    if informed_size is not None:
        if informed_size > len(x_o):
            raise NotEnoughObservedVariables(
                f"informed set of size {informed_size} exceeds {len(x_o)} observed variables"
            )
        if p > informed_size:
            raise NotEnoughObservedVariables(
                f"cannot draw {p} mechanism parents from an informed set of size {informed_size}"
            )
        pool = sorted(
            struct_rng.choice(x_o, size=informed_size, replace=False).tolist()
        )
        informed = frozenset(pool)

    mechanisms: dict[int, MechanismSpec] = {}
    for x in x_m:
        if informed_size is None:
            parents = _neighbor_preferring_parents(network, x, pool, p, struct_rng)
        else:
            take = min(p, len(pool))
            parents = tuple(
                sorted(struct_rng.choice(pool, size=take, replace=False).tolist())
            )
        n_cfg = 1
        for par in parents:
            n_cfg *= network.variables[par].n_states
        table = cpt_rng.beta(alpha, beta_b, size=n_cfg)
        mechanisms[x] = MechanismSpec(parents, table)

    graph = MissingnessGraph(network, mechanisms, informed)
    complete = sample_with_rng(network, data_rng, n_rows)
    rows = _apply_mechanisms(network, mechanisms, complete, mech_rng)
    return IncompleteDataset(network, rows, declared_partial=x_m), graph, complete


def simulate_mar(
    network: BayesianNetwork,
    m: float,
    p: int,
    beta: tuple[float, float],
    seed: int,
    n_rows: int,
) -> tuple[IncompleteDataset, MissingnessGraph]:
    """MAR data: mechanism parents are observed variables (neighbors of the
    hidden variable preferred), one Beta-sampled Pr(unob) per parent
    instantiation."""
    dataset, graph, _ = _simulate_mar_full(network, m, p, beta, seed, n_rows)
    return dataset, graph


def simulate_informed_mar(
    network: BayesianNetwork,
    m: float,
    p: int,
    beta: tuple[float, float],
    s: int,
    seed: int,
    n_rows: int,
) -> tuple[IncompleteDataset, MissingnessGraph]:
    """MAR data whose mechanism parents all come from a size-s observed
    subset W_o, recorded on the returned graph."""
    dataset, graph, _ = _simulate_mar_full(
        network, m, p, beta, seed, n_rows, informed_size=s
    )
    return dataset, graph


def _simulate_mnar_cross_full(
    network: BayesianNetwork,
    x: int,
    y: int,
    beta: tuple[float, float],
    seed: int,
    n_rows: int,
) -> tuple[IncompleteDataset, MissingnessGraph, np.ndarray]:
    if x == y:
        raise ValueError("cross mechanism needs two distinct variables")
    _, _, cpt_rng, data_rng, mech_rng = _spawn(seed, 5)
    alpha, beta_b = beta
    mechanisms = {
        x: MechanismSpec((y,), cpt_rng.beta(alpha, beta_b, network.variables[y].n_states)),
        y: MechanismSpec((x,), cpt_rng.beta(alpha, beta_b, network.variables[x].n_states)),
    }
    graph = MissingnessGraph(network, mechanisms)
    complete = sample_with_rng(network, data_rng, n_rows)
    rows = _apply_mechanisms(network, mechanisms, complete, mech_rng)
    dataset = IncompleteDataset(network, rows, declared_partial=[x, y])
    return dataset, graph, complete


def simulate_mnar_cross(
    network: BayesianNetwork,
    x: int,
    y: int,
    beta: tuple[float, float],
    seed: int,
    n_rows: int,
) -> tuple[IncompleteDataset, MissingnessGraph]:
    """Two-variable MNAR mechanism: each variable's missingness depends on the
    other variable's value."""
    dataset, graph, _ = _simulate_mnar_cross_full(network, x, y, beta, seed, n_rows)
    return dataset, graph
