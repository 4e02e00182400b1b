"""Learner classes with a scikit-learn-style surface.

Every learner is configured in ``__init__`` (plain attribute assignment, no
logic), exposes ``get_params`` / ``set_params``, and learns with
``fit(dataset, graph=None)``, after which the learned network is available as
``network_``.  ``make_learner`` maps the command-line names (d-mcar, f-mar,
em-jt, ...) to configured instances.
"""

from __future__ import annotations

import inspect
import warnings

from .dataset import DataDistribution, IncompleteDataset, augment
from .em import EmConfig, em_learn
from .errors import MissbnError, ScopeMismatch
from .estimators import (
    AGGREGATION_METHODS,
    EstimateTable,
    direct_deletion_mar,
    direct_deletion_mcar,
    extract_parameters,
    factored_deletion_mar,
    factored_deletion_mcar,
    listwise_deletion,
    mnar_cross_estimate,
)
from .missingness import MNAR, MissingnessGraph, classify


def _check_dataset(dataset) -> IncompleteDataset:
    if not isinstance(dataset, IncompleteDataset):
        raise TypeError(f"expected an IncompleteDataset, got {type(dataset).__name__}")
    return dataset


def _informed_scope(graph: MissingnessGraph | None) -> frozenset[int]:
    if graph is None or graph.informed is None:
        raise MissbnError(
            "informed deletion needs a missingness graph with an informed block"
        )
    if classify(graph) == MNAR:
        warnings.warn(
            "informed deletion is only proven consistent for MAR mechanisms; "
            "the provided graph is MNAR",
            stacklevel=3,
        )
    return graph.informed


class BaseLearner:
    """get_params/set_params plumbing shared by all learners."""

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "BaseLearner":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"unknown parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def fit(self, dataset: IncompleteDataset, graph: MissingnessGraph | None = None):
        raise NotImplementedError

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class _ClosedFormLearner(BaseLearner):
    def _family_estimator(self, dist: DataDistribution, graph):
        raise NotImplementedError

    def fit(self, dataset: IncompleteDataset, graph: MissingnessGraph | None = None):
        dataset = _check_dataset(dataset)
        dist = augment(dataset)
        estimator = self._family_estimator(dist, graph)
        self.network_ = extract_parameters(
            dataset.network, estimator, dist, self.prior
        )
        return self


class ListwiseLearner(_ClosedFormLearner):
    """Keep only fully complete rows."""

    def __init__(self, prior: float = 2.0):
        self.prior = prior

    def _family_estimator(self, dist, graph):
        return lambda d, fam: listwise_deletion(d, fam)


class DirectDeletionLearner(_ClosedFormLearner):
    """Per-family deletion: condition on the family's own mechanisms (MCAR),
    or re-weight over observed instantiations (MAR); ``informed=True``
    restricts the MAR summation to the graph's informed set."""

    def __init__(self, assumption: str = "mcar", informed: bool = False,
                 prior: float = 2.0):
        self.assumption = assumption
        self.informed = informed
        self.prior = prior

    def _family_estimator(self, dist, graph):
        if self.assumption == "mcar":
            return lambda d, fam: direct_deletion_mcar(d, fam)
        if self.assumption != "mar":
            raise ValueError("assumption must be 'mcar' or 'mar'")
        scope = sorted(_informed_scope(graph)) if self.informed else None
        return lambda d, fam: direct_deletion_mar(d, fam, scope=scope)


class FactoredDeletionLearner(_ClosedFormLearner):
    """Aggregate all chain-rule factorizations on the subset lattice."""

    def __init__(self, assumption: str = "mcar",
                 aggregation: str = "inverse-variance", informed: bool = False,
                 prior: float = 2.0):
        self.assumption = assumption
        self.aggregation = aggregation
        self.informed = informed
        self.prior = prior

    def _family_estimator(self, dist, graph):
        if self.aggregation not in AGGREGATION_METHODS:
            raise ValueError(f"aggregation must be one of {AGGREGATION_METHODS}")
        if self.assumption == "mcar":
            return lambda d, fam: factored_deletion_mcar(d, fam, self.aggregation)
        if self.assumption != "mar":
            raise ValueError("assumption must be 'mcar' or 'mar'")
        scope = sorted(_informed_scope(graph)) if self.informed else None
        return lambda d, fam: factored_deletion_mar(
            d, fam, self.aggregation, scope=scope
        )


class CrossMechanismLearner(_ClosedFormLearner):
    """Two-variable MNAR cross mechanism: recover Pr(X, Y) in closed form.

    The dataset must have exactly two partially observed variables; families
    must lie within that pair or be fully observed.
    """

    def __init__(self, prior: float = 2.0):
        self.prior = prior

    def _family_estimator(self, dist, graph):
        pair = sorted(dist.partially_observed)
        if len(pair) != 2:
            raise MissbnError(
                f"cross-mechanism learning needs exactly 2 partially observed "
                f"variables, found {len(pair)}"
            )
        x, y = pair
        cross = mnar_cross_estimate(dist, x, y)

        def estimator(d, fam) -> EstimateTable:
            fam = tuple(sorted(fam))
            if set(fam) <= {x, y}:
                return cross.marginalize(fam)
            if not set(fam) & {x, y}:
                return direct_deletion_mcar(d, fam)
            raise ScopeMismatch(
                f"family {fam} mixes the cross pair with other variables"
            )

        return estimator


class EmLearner(BaseLearner):
    """EM with restarts; ``init='factored-deletion'`` seeds the first restart
    with the factored MAR estimates."""

    def __init__(self, engine: str = "jointree", restarts: int = 1,
                 init: str = "random", threshold: float = 1e-4,
                 max_iters: int = 500, time_limit: float | None = None,
                 seed: int = 0, prior: float = 2.0,
                 aggregation: str = "inverse-variance"):
        self.engine = engine
        self.restarts = restarts
        self.init = init
        self.threshold = threshold
        self.max_iters = max_iters
        self.time_limit = time_limit
        self.seed = seed
        self.prior = prior
        self.aggregation = aggregation

    def fit(self, dataset: IncompleteDataset, graph: MissingnessGraph | None = None):
        dataset = _check_dataset(dataset)
        init, init_network = self.init, None
        if self.init == "factored-deletion":
            seed_learner = FactoredDeletionLearner(
                assumption="mar", aggregation=self.aggregation, prior=self.prior
            ).fit(dataset, graph)
            init, init_network = "provided", seed_learner.network_
        config = EmConfig(
            restarts=self.restarts,
            engine=self.engine,
            init=init,
            init_network=init_network,
            threshold=self.threshold,
            max_iters=self.max_iters,
            time_limit=self.time_limit,
            seed=self.seed,
            prior_concentration=self.prior,
        )
        self.network_, self.trace_ = em_learn(dataset.network, dataset, config)
        return self


LEARNER_NAMES = (
    "listwise",
    "d-mcar",
    "f-mcar",
    "d-mar",
    "f-mar",
    "id-mar",
    "if-mar",
    "mnar-cross",
    "em-jt",
    "em-bp",
    "fmar-em-jt",
)


def make_learner(
    name: str,
    prior: float = 2.0,
    aggregation: str = "inverse-variance",
    seed: int = 0,
    time_limit: float | None = None,
    restarts: int = 1,
) -> BaseLearner:
    """Build a learner from its command-line name.

    ``em-<k>-jt`` / ``em-<k>-bp`` select k restarts directly, as in the
    benchmark tables.
    """
    key = name.lower()
    parts = key.split("-")
    if len(parts) == 3 and parts[0] == "em" and parts[1].isdigit():
        restarts, key = int(parts[1]), f"em-{parts[2]}"
    simple = {
        "listwise": lambda: ListwiseLearner(prior=prior),
        "d-mcar": lambda: DirectDeletionLearner("mcar", prior=prior),
        "f-mcar": lambda: FactoredDeletionLearner("mcar", aggregation, prior=prior),
        "d-mar": lambda: DirectDeletionLearner("mar", prior=prior),
        "f-mar": lambda: FactoredDeletionLearner("mar", aggregation, prior=prior),
        "id-mar": lambda: DirectDeletionLearner("mar", informed=True, prior=prior),
        "if-mar": lambda: FactoredDeletionLearner(
            "mar", aggregation, informed=True, prior=prior
        ),
        "mnar-cross": lambda: CrossMechanismLearner(prior=prior),
    }
    if key in simple:
        return simple[key]()
    em = {
        "em-jt": ("jointree", "random"),
        "em-bp": ("loopy-bp", "random"),
        "fmar-em-jt": ("jointree", "factored-deletion"),
    }
    if key in em:
        engine, init = em[key]
        return EmLearner(
            engine=engine, restarts=restarts, init=init, seed=seed,
            time_limit=time_limit, prior=prior, aggregation=aggregation,
        )
    raise ValueError(f"unknown learner {name!r}; expected one of {LEARNER_NAMES}")
