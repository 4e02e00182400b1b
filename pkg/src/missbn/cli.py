"""Command-line interface.

Subcommands: ``simulate`` (network + mechanism -> dataset and graph files),
``classify`` (missingness graph -> MCAR/MAR/MNAR), ``learn`` (skeleton +
dataset + learner -> learned network file), ``evaluate`` (true + learned +
test set -> one ll,kld CSV line), ``bench`` (experiment config -> reports and
tables).

Exit codes: 0 success, 1 usage error, 2 data/model error, 3 the time limit
expired before a first result.  Randomized subcommands require --seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench as bench_mod
from . import io as io_mod
from .errors import DeadlineBeforeFirstIteration, MissbnError
from .inference import kl_divergence, test_log_likelihood
from .learners import make_learner
from .missingness import classify as classify_graph

_EM_LEARNERS = ("em-jt", "em-bp", "fmar-em-jt")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="missbn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="sample an incomplete dataset")
    sim.add_argument("--network", required=True)
    sim.add_argument(
        "--mechanism", required=True, choices=bench_mod.MECHANISMS
    )
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--size", type=int, required=True)
    sim.add_argument("--m", type=float, default=0.3)
    sim.add_argument("--q", type=float, default=0.7)
    sim.add_argument("--p", type=int, default=2)
    sim.add_argument("--alpha", type=float, default=1.0, help="Beta shape a")
    sim.add_argument("--beta", type=float, default=0.5, help="Beta shape b")
    sim.add_argument("--s", type=int, default=3)
    sim.add_argument("--x", help="cross pair variable name")
    sim.add_argument("--y", help="cross pair variable name")
    sim.add_argument("--out", required=True, help="dataset CSV output path")
    sim.add_argument("--graph", required=True, help="missingness graph output path")

    cls = sub.add_parser("classify", help="print MCAR/MAR/MNAR for a graph")
    cls.add_argument("--graph", required=True)

    lrn = sub.add_parser("learn", help="learn parameters from a dataset")
    lrn.add_argument("--network", required=True, help="skeleton network file")
    lrn.add_argument("--dataset", required=True)
    lrn.add_argument("--learner", required=True)
    lrn.add_argument("--graph", help="missingness graph (for informed learners)")
    lrn.add_argument("--seed", type=int)
    lrn.add_argument("--time-limit", type=float)
    lrn.add_argument(
        "--aggregation",
        default="inverse-variance",
        choices=("mean", "median", "inverse-variance", "lowest-variance"),
    )
    lrn.add_argument("--prior", type=float, default=2.0)
    lrn.add_argument("--restarts", type=int, default=1)
    lrn.add_argument("--out", required=True, help="learned network output path")

    ev = sub.add_parser("evaluate", help="print one ll,kld CSV line")
    ev.add_argument("--network", required=True, help="true network file")
    ev.add_argument("--learned", required=True, help="learned network file")
    ev.add_argument("--dataset", required=True, help="fully observed test set")

    ben = sub.add_parser("bench", help="run an experiment grid")
    ben.add_argument("--config", required=True)
    ben.add_argument("--out", required=True, help="output directory")
    ben.add_argument("--format", default="csv", choices=("csv", "latex"))
    ben.add_argument("--seed", type=int, help="override the config seed")
    return parser


def _load_network(path: str):
    return io_mod.parse_network(Path(path).read_text())


def _load_dataset(path: str, network):
    return io_mod.read_dataset(Path(path).read_text(), network)


def _cmd_simulate(args) -> int:
    network = _load_network(args.network)
    mech = bench_mod.MechanismSettings(
        kind=args.mechanism, m=args.m, q=args.q, p=args.p,
        beta=(args.alpha, args.beta), s=args.s,
    )
    if args.mechanism == "mnar-cross":
        if args.x is None or args.y is None:
            raise MissbnError("mnar-cross simulation needs --x and --y")
        mech.x = network.variable_named(args.x).id
        mech.y = network.variable_named(args.y).id
    dataset, graph = bench_mod.simulate_dataset(network, mech, args.seed, args.size)
    Path(args.out).write_text(io_mod.write_dataset(dataset))
    Path(args.graph).write_text(io_mod.serialize_missingness_graph(graph))
    return 0


def _cmd_classify(args) -> int:
    graph = io_mod.parse_missingness_graph(Path(args.graph).read_text())
    print(classify_graph(graph))
    return 0


def _cmd_learn(args, parser) -> int:
    if args.learner.lower() in _EM_LEARNERS and args.seed is None:
        parser.error(f"--seed is required for learner {args.learner!r}")
    try:
        learner = make_learner(
            args.learner,
            prior=args.prior,
            aggregation=args.aggregation,
            seed=args.seed or 0,
            time_limit=args.time_limit,
            restarts=args.restarts,
        )
    except ValueError as exc:
        parser.error(str(exc))
    network = _load_network(args.network)
    dataset = _load_dataset(args.dataset, network)
    graph = None
    if args.graph:
        graph = io_mod.parse_missingness_graph(Path(args.graph).read_text())
    learner.fit(dataset, graph)
    Path(args.out).write_text(io_mod.serialize_network(learner.network_))
    return 0


def _cmd_evaluate(args) -> int:
    true_net = _load_network(args.network)
    learned = _load_network(args.learned)
    dataset = _load_dataset(args.dataset, true_net)
    ll = test_log_likelihood(learned, dataset.rows)
    try:
        kld = bench_mod.format_number(kl_divergence(true_net, learned))
    except MissbnError:
        kld = ""
    print(f"{bench_mod.format_number(ll)},{kld}")
    return 0


def _cmd_bench(args) -> int:
    config = bench_mod.parse_experiment_file(
        Path(args.config).read_text(),
        lambda rel: _load_network(str(Path(args.config).parent / rel)),
    )
    if args.seed is not None:
        config.seed = args.seed
    reports = bench_mod.run_experiment(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reports.csv").write_text(bench_mod.reports_to_csv(reports))
    ext = "tex" if args.format == "latex" else "csv"
    table_format = "latex-tabular" if args.format == "latex" else "csv"
    for metric in config.metrics:
        text = bench_mod.emit_overview_table(reports, table_format, metric)
        (out / f"overview-{metric}.{ext}").write_text(text)
    for curve in bench_mod.CURVE_METRICS:
        y = curve.split("-", 1)[0]
        if y in config.metrics:
            (out / f"curve-{curve}.csv").write_text(
                bench_mod.emit_curves(reports, curve)
            )
    print(f"wrote {len(reports)} reports to {out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "classify":
            return _cmd_classify(args)
        if args.command == "learn":
            return _cmd_learn(args, parser)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        return _cmd_bench(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except DeadlineBeforeFirstIteration as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    except (MissbnError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
