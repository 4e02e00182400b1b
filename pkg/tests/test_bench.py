from pathlib import Path

import numpy as np
import pytest

from missbn.bench import (
    ExperimentConfig,
    LearnerReport,
    MechanismSettings,
    emit_curves,
    emit_overview_table,
    parse_experiment_file,
    reports_to_csv,
    run_experiment,
)
from missbn.errors import ParseError

from conftest import chain_network

GOLDEN_OVERVIEW = Path(__file__).parent / "data" / "golden_overview.csv"


def small_config(**overrides):
    base = dict(
        network=chain_network(3),
        mechanism=MechanismSettings(kind="mcar", m=0.4, q=0.5),
        sizes=[50, 200],
        learners=["d-mcar", "f-mcar"],
        repetitions=2,
        seed=5,
        test_size=500,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_single_cell_grid():
    config = small_config(sizes=[100], learners=["d-mcar"], repetitions=1)
    reports = run_experiment(config)
    assert len(reports) == 1
    (r,) = reports
    assert r.status == "ok"
    assert r.ll is not None and r.kld is not None
    assert r.seconds >= 0


def test_grid_shape_and_determinism():
    config = small_config()
    first = run_experiment(config)
    second = run_experiment(small_config())
    assert len(first) == 2 * 2 * 2
    for a, b in zip(first, second):
        assert (a.learner, a.size, a.repetition, a.status) == (
            b.learner, b.size, b.repetition, b.status
        )
        assert a.ll == pytest.approx(b.ll)
        assert a.kld == pytest.approx(b.kld)


def test_em_deadline_reports_no_iteration():
    config = small_config(
        learners=["em-jt"], sizes=[5000], repetitions=1, time_limit=1e-9
    )
    reports = run_experiment(config)
    assert [r.status for r in reports] == ["no-iteration"]
    assert reports[0].ll is None


def test_closed_form_timeout_status():
    config = small_config(learners=["d-mcar"], sizes=[200], repetitions=1,
                          time_limit=1e-12)
    reports = run_experiment(config)
    assert [r.status for r in reports] == ["timeout"]


def test_kld_decreases_with_size_for_consistent_learner():
    config = small_config(
        sizes=[100, 1000, 10000], learners=["d-mcar"], repetitions=16,
        test_size=100,
    )
    reports = run_experiment(config)
    medians = []
    for size in config.sizes:
        klds = [r.kld for r in reports if r.size == size and r.status == "ok"]
        medians.append(float(np.median(klds)))
    assert medians[0] > medians[1] > medians[2]


def test_overview_table_single_report():
    reports = [LearnerReport("d-mcar", 100, 0, 0.01, ll=-2.5, kld=0.1)]
    text = emit_overview_table(reports, "csv", "ll")
    assert text.splitlines() == ["size,d-mcar", "100,-2.5"]


def test_overview_table_bolds_best_ll():
    reports = [
        LearnerReport("a", 100, 0, 0.0, ll=-3.0),
        LearnerReport("b", 100, 0, 0.0, ll=-2.0),
    ]
    text = emit_overview_table(reports, "latex-tabular", "ll")
    assert "\\textbf{-2}" in text
    assert "\\textbf{-3}" not in text


def test_overview_table_statuses():
    reports = [
        LearnerReport("a", 100, 0, 0.0, status="timeout"),
        LearnerReport("a", 100, 1, 0.0, status="timeout"),
    ]
    csv = emit_overview_table(reports, "csv", "ll")
    assert "timeout" in csv
    latex = emit_overview_table(reports, "latex-tabular", "ll")
    assert " - " in latex.replace("&", " ").replace("\\\\", " ")


def test_overview_golden_file():
    config = small_config(sizes=[50, 100], repetitions=2, test_size=200)
    reports = run_experiment(config)
    text = emit_overview_table(reports, "csv", "kld")
    assert text == GOLDEN_OVERVIEW.read_text()


def test_curves_one_point():
    reports = [LearnerReport("a", 100, 0, 0.5, ll=-2.0, kld=0.3)]
    text = emit_curves(reports, "kld-vs-size")
    assert text.splitlines() == ["learner,x,mean,stderr", "a,100,0.3,0"]


def test_curves_stderr_zero_for_single_repetition():
    reports = [LearnerReport("a", 100, 0, 0.5, ll=-2.0)]
    lines = emit_curves(reports, "ll-vs-size").splitlines()
    assert lines[1].endswith(",0")


def test_curves_row_count():
    config = small_config()
    reports = run_experiment(config)
    lines = emit_curves(reports, "ll-vs-size").splitlines()
    assert len(lines) == 1 + 2 * 2  # header + learners x sizes


def test_curves_time_axis_uses_mean_seconds():
    reports = [
        LearnerReport("a", 100, 0, 0.4, ll=-2.0),
        LearnerReport("a", 100, 1, 0.6, ll=-3.0),
    ]
    line = emit_curves(reports, "ll-vs-time").splitlines()[1]
    assert line.startswith("a,0.5,-2.5,")


def test_reports_csv_round_trippable_fields():
    reports = [LearnerReport("a", 10, 0, 0.123456, ll=-1.5, kld=None,
                             status="ok")]
    text = reports_to_csv(reports)
    assert text.splitlines()[0] == "learner,size,repetition,seconds,ll,kld,status"
    assert text.splitlines()[1] == "a,10,0,0.123,-1.5,,ok"


def test_parse_experiment_file():
    nets = {"net.bif": chain_network(3)}
    text = """
    # comment
    network = net.bif
    mechanism = mar
    m = 0.4
    p = 1
    beta = 1.0, 0.5
    sizes = 10, 20
    learners = d-mar, f-mar
    repetitions = 3
    seed = 11
    test_size = 50
    metrics = ll, kld
    """
    config = parse_experiment_file(text, nets.__getitem__)
    assert config.mechanism.kind == "mar"
    assert config.mechanism.beta == (1.0, 0.5)
    assert config.sizes == [10, 20]
    assert config.learners == ["d-mar", "f-mar"]
    assert config.repetitions == 3
    assert config.metrics == ("ll", "kld")


def test_parse_experiment_file_rejects_unknown_keys():
    with pytest.raises(ParseError):
        parse_experiment_file("network = n\nbogus = 1\n", lambda _: chain_network(2))


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(sizes=[200, 50]).check()
    with pytest.raises(ValueError):
        small_config(repetitions=0).check()
    with pytest.raises(ValueError):
        small_config(mechanism=MechanismSettings(kind="weird")).check()
