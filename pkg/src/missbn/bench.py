"""Experiment harness: simulate, learn, evaluate over a (repetition x size x
learner) grid, and emit result tables / curve data.

Seeds for simulation, test data, and each learner are derived from the master
seed up front, so re-running a configuration reproduces every report except
the wall-time fields.  Learner wall time is measured around the fit call
only.  KL divergence is computed only when the true network admits a jointree
within the configured state budget; otherwise the metric is omitted, as in
the large-network tables that report likelihood only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .dataset import IncompleteDataset
from .errors import DeadlineBeforeFirstIteration, MissbnError, ParseError
from .inference import build_jointree, kl_divergence, test_log_likelihood
from .learners import make_learner
from .missingness import (
    MissingnessGraph,
    simulate_informed_mar,
    simulate_mar,
    simulate_mcar,
    simulate_mnar_cross,
)
from .network import BayesianNetwork, forward_sample

MECHANISMS = ("mcar", "mar", "informed-mar", "mnar-cross")
STATUS_OK = "ok"
STATUS_TIMEOUT = "timeout"
STATUS_NO_ITERATION = "no-iteration"
STATUS_ERROR = "error"


@dataclass
class MechanismSettings:
    kind: str = "mcar"
    m: float = 0.3              # fraction of partially observed variables
    q: float = 0.7              # per-cell hide probability (mcar)
    p: int = 2                  # mechanism parents (mar)
    beta: tuple[float, float] = (1.0, 0.5)
    s: int = 3                  # informed-set size (informed-mar)
    x: int = 0                  # cross pair (mnar-cross)
    y: int = 1


@dataclass
class ExperimentConfig:
    network: BayesianNetwork
    mechanism: MechanismSettings
    sizes: list[int]
    learners: list[str]
    time_limit: float | None = None
    repetitions: int = 1
    seed: int = 0
    test_size: int = 10_000
    metrics: tuple[str, ...] = ("ll", "kld", "time")
    prior: float = 2.0
    aggregation: str = "inverse-variance"
    em_restarts: int = 1
    kld_state_budget: int = 1_000_000

    def check(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.sizes or any(s <= 0 for s in self.sizes):
            raise ValueError("sizes must be positive")
        if list(self.sizes) != sorted(self.sizes):
            raise ValueError("sizes must be ascending")
        if self.mechanism.kind not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}")


@dataclass
class LearnerReport:
    learner: str
    size: int
    repetition: int
    seconds: float
    ll: float | None = None
    kld: float | None = None
    status: str = STATUS_OK


def simulate_dataset(
    network: BayesianNetwork, mech: MechanismSettings, seed: int, size: int
) -> tuple[IncompleteDataset, MissingnessGraph]:
    if mech.kind == "mcar":
        return simulate_mcar(network, mech.m, mech.q, seed, size)
    if mech.kind == "mar":
        return simulate_mar(network, mech.m, mech.p, mech.beta, seed, size)
    if mech.kind == "informed-mar":
        return simulate_informed_mar(
            network, mech.m, mech.p, mech.beta, mech.s, seed, size
        )
    return simulate_mnar_cross(network, mech.x, mech.y, mech.beta, seed, size)


def _kld_feasible(network: BayesianNetwork, budget: int) -> bool:
    try:
        return build_jointree(network).max_clique_size <= budget
    except MissbnError:
        return False


def run_experiment(config: ExperimentConfig) -> list[LearnerReport]:
    """Run the full grid; learner failures become status rows, never aborts."""
    config.check()
    want_kld = "kld" in config.metrics and _kld_feasible(
        config.network, config.kld_state_budget
    )
    seed_rng = np.random.default_rng(config.seed)
    reports: list[LearnerReport] = []
    for rep in range(config.repetitions):
        sim_seed = int(seed_rng.integers(2**63))
        test_seed = int(seed_rng.integers(2**63))
        learner_seeds = {
            name: int(seed_rng.integers(2**63)) for name in config.learners
        }
        test_rows = forward_sample(config.network, test_seed, config.test_size)
        for size in config.sizes:
            dataset, graph = simulate_dataset(
                config.network, config.mechanism, sim_seed, size
            )
            for name in config.learners:
                reports.append(
                    _run_cell(
                        config, name, dataset, graph, test_rows, rep, size,
                        learner_seeds[name], want_kld,
                    )
                )
    return reports


def _run_cell(
    config, name, dataset, graph, test_rows, rep, size, seed, want_kld
) -> LearnerReport:
    learner = make_learner(
        name,
        prior=config.prior,
        aggregation=config.aggregation,
        seed=seed,
        time_limit=config.time_limit,
        restarts=config.em_restarts,
    )
    start = time.perf_counter()
    try:
        learner.fit(dataset, graph)
    except DeadlineBeforeFirstIteration:
        return LearnerReport(
            name, size, rep, time.perf_counter() - start, status=STATUS_NO_ITERATION
        )
    except MissbnError:
        return LearnerReport(
            name, size, rep, time.perf_counter() - start, status=STATUS_ERROR
        )
    seconds = time.perf_counter() - start
    if config.time_limit is not None and seconds > config.time_limit:
        return LearnerReport(name, size, rep, seconds, status=STATUS_TIMEOUT)
    ll = test_log_likelihood(learner.network_, test_rows)
    kld = None
    if want_kld:
        kld = kl_divergence(config.network, learner.network_)
    return LearnerReport(name, size, rep, seconds, ll=ll, kld=kld)


def _metric_value(report: LearnerReport, metric: str) -> float | None:
    if metric == "ll":
        return report.ll
    if metric == "kld":
        return report.kld
    if metric == "time":
        return report.seconds
    raise ValueError(f"unknown metric {metric!r}")


def _ordered_learners(reports) -> list[str]:
    seen: list[str] = []
    for r in reports:
        if r.learner not in seen:
            seen.append(r.learner)
    return seen


def emit_overview_table(
    reports: list[LearnerReport], format: str = "csv", metric: str = "ll"
) -> str:
    """Sizes as rows, learners as columns, mean metric over the ok
    repetitions per cell.  Latex bolds the best likelihood per row; cells
    with no ok repetition render as the status word (csv) or a dash (latex).
    """
    if not reports:
        raise ValueError("no reports to tabulate")
    if format not in ("csv", "latex-tabular", "latex"):
        raise ValueError("format must be 'csv' or 'latex-tabular'")
    learners = _ordered_learners(reports)
    sizes = sorted({r.size for r in reports})
    cells: dict[tuple[int, str], str] = {}
    means: dict[tuple[int, str], float] = {}
    for size in sizes:
        for name in learners:
            group = [r for r in reports if r.size == size and r.learner == name]
            ok = [
                _metric_value(r, metric)
                for r in group
                if r.status == STATUS_OK and _metric_value(r, metric) is not None
            ]
            if ok:
                means[(size, name)] = float(np.mean(ok))
                cells[(size, name)] = format_number(means[(size, name)])
            else:
                statuses = [r.status for r in group if r.status != STATUS_OK]
                word = max(set(statuses), key=statuses.count) if statuses else "-"
                cells[(size, name)] = word

    if format == "csv":
        lines = ["size," + ",".join(learners)]
        for size in sizes:
            lines.append(
                f"{size}," + ",".join(cells[(size, name)] for name in learners)
            )
        return "\n".join(lines) + "\n"

    lines = [
        "\\begin{tabular}{r" + "r" * len(learners) + "}",
        "\\toprule",
        "Size & " + " & ".join(learners) + " \\\\",
        "\\midrule",
    ]
    for size in sizes:
        row = []
        best = None
        if metric == "ll":
            row_means = [means.get((size, n)) for n in learners]
            present = [m for m in row_means if m is not None]
            best = max(present) if present else None
        for name in learners:
            cell = cells[(size, name)]
            if (size, name) not in means:
                cell = "-"
            elif best is not None and means[(size, name)] == best:
                cell = f"\\textbf{{{cell}}}"
            row.append(cell)
        lines.append(f"{size} & " + " & ".join(row) + " \\\\")
    lines += ["\\bottomrule", "\\end{tabular}"]
    return "\n".join(lines) + "\n"


CURVE_METRICS = ("kld-vs-size", "ll-vs-size", "ll-vs-time", "kld-vs-time")


def emit_curves(reports: list[LearnerReport], metric: str) -> str:
    """Long-format CSV (learner, x, mean, stderr) for external plotting."""
    if metric not in CURVE_METRICS:
        raise ValueError(f"metric must be one of {CURVE_METRICS}")
    y_name, _, x_name = metric.partition("-vs-")
    lines = ["learner,x,mean,stderr"]
    for name in _ordered_learners(reports):
        for size in sorted({r.size for r in reports if r.learner == name}):
            group = [
                r
                for r in reports
                if r.learner == name and r.size == size and r.status == STATUS_OK
            ]
            ys = [
                _metric_value(r, y_name)
                for r in group
                if _metric_value(r, y_name) is not None
            ]
            if not ys:
                continue
            x = size if x_name == "size" else float(
                np.mean([r.seconds for r in group])
            )
            mean = float(np.mean(ys))
            stderr = (
                float(np.std(ys, ddof=1) / np.sqrt(len(ys))) if len(ys) > 1 else 0.0
            )
            lines.append(
                f"{name},{format_number(x)},{format_number(mean)},{format_number(stderr)}"
            )
    return "\n".join(lines) + "\n"


def format_number(x: float) -> str:
    return format(float(x), ".6g")


def parse_experiment_file(text: str, load_network) -> ExperimentConfig:
    """Parse the key-value experiment format (``key = value``, ``#``
    comments); ``load_network`` maps the network path to a network."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, 1, "expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    if "network" not in values:
        raise ParseError(1, 1, "experiment config needs a 'network' entry")
    network = load_network(values.pop("network"))

    def split_list(v):
        return [part.strip() for part in v.split(",") if part.strip()]

    mech = MechanismSettings(kind=values.pop("mechanism", "mcar"))
    for key, cast in (
        ("m", float), ("q", float), ("p", int), ("s", int),
    ):
        if key in values:
            setattr(mech, key, cast(values.pop(key)))
    if "beta" in values:
        parts = split_list(values.pop("beta"))
        mech.beta = (float(parts[0]), float(parts[-1]))
    for key in ("x", "y"):
        if key in values:
            setattr(mech, key, network.variable_named(values.pop(key)).id)

    config = ExperimentConfig(
        network=network,
        mechanism=mech,
        sizes=[int(s) for s in split_list(values.pop("sizes", "1000"))],
        learners=split_list(values.pop("learners", "d-mcar")),
    )
    plain = {
        "time_limit": float, "repetitions": int, "seed": int,
        "test_size": int, "prior": float, "em_restarts": int,
        "kld_state_budget": int, "aggregation": str,
    }
    for key, cast in plain.items():
        if key in values:
            config = replace(config, **{key: cast(values.pop(key))})
    if "metrics" in values:
        config = replace(config, metrics=tuple(split_list(values.pop("metrics"))))
    if values:
        raise ParseError(1, 1, f"unknown experiment keys {sorted(values)}")
    config.check()
    return config


def reports_to_csv(reports: list[LearnerReport]) -> str:
    lines = ["learner,size,repetition,seconds,ll,kld,status"]
    for r in reports:
        ll = "" if r.ll is None else format_number(r.ll)
        kld = "" if r.kld is None else format_number(r.kld)
        lines.append(
            f"{r.learner},{r.size},{r.repetition},{r.seconds:.3f},{ll},{kld},{r.status}"
        )
    return "\n".join(lines) + "\n"
