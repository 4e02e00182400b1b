from pathlib import Path

import numpy as np
import pytest

from missbn import (
    MissingnessGraph,
    MechanismSpec,
    parse_missingness_graph,
    parse_network,
    read_dataset,
    serialize_missingness_graph,
    serialize_network,
    write_dataset,
)
from missbn.dataset import MISSING
from missbn.errors import ParseError, RaggedRow, UnknownStateLabel, UnknownVariable

from conftest import random_network

GOLDEN = Path(__file__).parent / "data" / "golden_network.bif"

MINIMAL = """
network tiny { }
variable A { type discrete [ 2 ] { lo, hi }; }
probability ( A ) { table 0.25, 0.75; }
"""

CHAIN = """
// two-variable chain
network chain { }
variable X { type discrete [ 2 ] { x0, x1 }; }
variable Y { type discrete [ 2 ] { y0, y1 }; }
probability ( X ) { table 0.5, 0.5; }
probability ( Y | X ) {
  (x0): 0.2, 0.8;
  (x1): 0.7, 0.3;
}
"""


def test_parse_minimal_document():
    net = parse_network(MINIMAL)
    assert net.n_variables == 1
    assert net.variables[0].states == ("lo", "hi")
    assert net.cpts[0][0, 1] == pytest.approx(0.75)


def test_parse_chain_with_comment():
    net = parse_network(CHAIN)
    assert net.parents[1] == (0,)
    assert net.cpts[1][1, 0] == pytest.approx(0.7)


def test_parse_reports_position_for_missing_row():
    broken = CHAIN.replace("  (x1): 0.7, 0.3;\n", "")
    with pytest.raises(ParseError) as exc:
        parse_network(broken)
    assert "x1" in str(exc.value)
    assert exc.value.line >= 1


def test_parse_error_position_inside_input():
    text = "network n { }\nvariable A { type discrete [ 2 ] { a, b } }\n"
    with pytest.raises(ParseError) as exc:
        parse_network(text)
    lines = text.splitlines()
    assert 1 <= exc.value.line <= len(lines) + 1
    assert exc.value.column >= 1


def test_serialize_round_trip(xy_network):
    text = serialize_network(xy_network)
    assert parse_network(text) == xy_network


def test_serialize_deterministic(xy_network):
    assert serialize_network(xy_network) == serialize_network(xy_network)


def test_serialize_fixpoint_after_one_parse():
    text = serialize_network(parse_network(CHAIN))
    assert serialize_network(parse_network(text)) == text


def test_golden_network_file(xy_network):
    assert serialize_network(xy_network) == GOLDEN.read_text()


def test_round_trip_random_networks():
    for seed in range(100):
        net = random_network(np.random.default_rng(seed), int(seed % 8) + 1)
        assert parse_network(serialize_network(net)) == net


def test_dataset_round_trip(xy_network, xy_dataset):
    text = write_dataset(xy_dataset)
    again = read_dataset(text, xy_network)
    assert again == xy_dataset
    assert (again.rows == MISSING).sum() == 2


def test_dataset_fig_fragment(xy_network, xy_dataset):
    assert xy_dataset.partially_observed == {1}
    assert xy_dataset.fully_observed == {0}
    assert xy_dataset.n_rows == 4
    assert list(xy_dataset.rows[:, 0]) == [0, 1, 1, 0]


def test_dataset_empty_body(xy_network):
    ds = read_dataset("X,Y\n", xy_network)
    assert ds.n_rows == 0
    assert write_dataset(ds) == "X,Y\n"


def test_dataset_unknown_label(xy_network):
    with pytest.raises(UnknownStateLabel) as exc:
        read_dataset("X,Y\nx0,nope\n", xy_network)
    assert exc.value.label == "nope"


def test_dataset_unknown_variable(xy_network):
    with pytest.raises(UnknownVariable):
        read_dataset("X,Q\nx0,y0\n", xy_network)


def test_dataset_ragged_row(xy_network):
    with pytest.raises(RaggedRow):
        read_dataset("X,Y\nx0\n", xy_network)


def test_dataset_round_trip_random():
    rng = np.random.default_rng(17)
    for _ in range(20):
        net = random_network(rng, 4)
        n = int(rng.integers(0, 30))
        rows = np.zeros((n, 4), dtype=np.int64)
        for v in range(4):
            rows[:, v] = rng.integers(0, net.variables[v].n_states, size=n)
        hide = rng.random((n, 4)) < 0.3
        rows[hide] = MISSING
        from missbn import IncompleteDataset

        ds = IncompleteDataset(net, rows)
        assert read_dataset(write_dataset(ds), net) == ds


def test_parse_errors_from_corrupted_documents_stay_in_bounds():
    """Randomly corrupt a valid document; the parser either succeeds or
    reports a position inside the text, never any other exception."""
    rng = np.random.default_rng(9)
    base = CHAIN
    junk = "{}();:|,?*![]"
    for _ in range(300):
        text = base
        for _ in range(int(rng.integers(1, 4))):
            pos = int(rng.integers(0, len(text)))
            if rng.random() < 0.5:
                text = text[:pos] + text[pos + 1 :]
            else:
                ch = junk[int(rng.integers(len(junk)))]
                text = text[:pos] + ch + text[pos:]
        try:
            parse_network(text)
        except ParseError as exc:
            lines = text.splitlines() or [""]
            assert 1 <= exc.line <= len(lines) + 1
            assert exc.column >= 1
        except Exception as exc:  # no other leak from the parser
            from missbn.errors import MissbnError

            assert isinstance(exc, MissbnError), repr(exc)


def test_dataset_reader_rejects_corrupted_bodies(xy_network):
    rng = np.random.default_rng(10)
    base = "X,Y\nx0,y1\nx1,?\nx1,y0\n"
    from missbn.errors import MissbnError

    for _ in range(200):
        text = base
        pos = int(rng.integers(0, len(text)))
        if rng.random() < 0.5:
            text = text[:pos] + text[pos + 1 :]
        else:
            text = text[:pos] + "," + text[pos:]
        try:
            read_dataset(text, xy_network)
        except MissbnError:
            pass


def test_missingness_graph_round_trip(xy_network):
    graph = MissingnessGraph(
        xy_network,
        {1: MechanismSpec((0,), np.array([0.25, 0.5]))},
        informed=frozenset({0}),
    )
    text = serialize_missingness_graph(graph)
    again = parse_missingness_graph(text)
    assert again.network == xy_network
    assert again.informed == {0}
    spec = again.mechanisms[1]
    assert spec.parents == (0,)
    assert np.allclose(spec.p_unobserved, [0.25, 0.5])
