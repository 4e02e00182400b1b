import numpy as np
import pytest

from missbn import (
    BayesianNetwork,
    Variable,
    family_of,
    forward_sample,
    joint_probability,
    topological_order,
    validate,
)
from missbn.errors import (
    CptRowNotNormalized,
    CycleDetected,
    DimensionMismatch,
    IncompleteInstantiation,
    UnknownVariable,
)
from missbn.network import all_instantiations, log_joint_rows

from conftest import random_network


def binary(i, name):
    return Variable(i, name, ("f", "t"))


def test_validate_accepts_chain(xy_network):
    validate(xy_network)


def test_validate_detects_cycle():
    net = BayesianNetwork(
        [binary(0, "A"), binary(1, "B")],
        [(1,), (0,)],
        [np.full((2, 2), 0.5), np.full((2, 2), 0.5)],
    )
    with pytest.raises(CycleDetected):
        validate(net)


def test_validate_detects_unnormalized_row():
    net = BayesianNetwork(
        [binary(0, "A")], [()], [np.array([[0.4, 0.5]])]
    )
    with pytest.raises(CptRowNotNormalized) as exc:
        validate(net)
    assert exc.value.total == pytest.approx(0.9)


def test_validate_detects_dimension_mismatch():
    net = BayesianNetwork(
        [binary(0, "A"), binary(1, "B")],
        [(), (0,)],
        [np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]])],  # needs 2 rows
    )
    with pytest.raises(DimensionMismatch):
        validate(net)


def test_topological_order_chain(xy_network):
    assert topological_order(xy_network) == [0, 1]


def test_topological_order_tie_break_by_id():
    net = BayesianNetwork(
        [binary(0, "A"), binary(1, "B")],
        [(), ()],
        [np.array([[0.5, 0.5]])] * 2,
    )
    assert topological_order(net) == [0, 1]


def test_topological_order_diamond():
    variables = [binary(i, n) for i, n in enumerate("ABCD")]
    parents = [(), (0,), (0,), (1, 2)]
    cpts = [
        np.array([[0.5, 0.5]]),
        np.full((2, 2), 0.5),
        np.full((2, 2), 0.5),
        np.full((4, 2), 0.5),
    ]
    net = BayesianNetwork(variables, parents, cpts)
    assert topological_order(net) == [0, 1, 2, 3]


def test_topological_order_is_permutation_respecting_edges():
    for seed in range(20):
        net = random_network(np.random.default_rng(seed), 8)
        order = topological_order(net)
        assert sorted(order) == list(range(8))
        position = {v: i for i, v in enumerate(order)}
        for v in range(8):
            for p in net.parents[v]:
                assert position[p] < position[v]


def test_joint_probability_single_root():
    net = BayesianNetwork(
        [Variable(0, "X", ("x0", "x1"))], [()], [np.array([[0.3, 0.7]])]
    )
    assert joint_probability(net, {0: 0}) == pytest.approx(0.3)


def test_joint_probability_chain(xy_network):
    assert joint_probability(xy_network, {0: 0, 1: 0}) == pytest.approx(0.10)


def test_joint_probability_requires_complete(xy_network):
    with pytest.raises(IncompleteInstantiation) as exc:
        joint_probability(xy_network, {0: 0})
    assert exc.value.missing_ids == (1,)


def test_joint_probabilities_sum_to_one():
    for seed in range(10):
        net = random_network(np.random.default_rng(seed), 6)
        insts = all_instantiations([v.n_states for v in net.variables])
        total = np.exp(log_joint_rows(net, insts)).sum()
        assert total == pytest.approx(1.0, abs=1e-9)


def test_forward_sample_deterministic_network():
    det = BayesianNetwork(
        [binary(0, "A"), binary(1, "B")],
        [(), (0,)],
        [np.array([[0.0, 1.0]]), np.array([[1.0, 0.0], [0.0, 1.0]])],
    )
    rows = forward_sample(det, seed=3, count=50)
    assert np.array_equal(rows, np.tile([1, 1], (50, 1)))


def test_forward_sample_fair_coin_frequency():
    net = BayesianNetwork(
        [Variable(0, "C", ("h", "t"))], [()], [np.array([[0.5, 0.5]])]
    )
    rows = forward_sample(net, seed=11, count=100_000)
    assert abs((rows[:, 0] == 0).mean() - 0.5) < 0.01


def test_forward_sample_reproducible():
    net = random_network(np.random.default_rng(4), 5)
    assert np.array_equal(forward_sample(net, 9, 200), forward_sample(net, 9, 200))


def test_forward_sample_marginals_converge():
    net = random_network(np.random.default_rng(7), 5)
    rows = forward_sample(net, seed=21, count=100_000)
    insts = all_instantiations([v.n_states for v in net.variables])
    true = np.exp(log_joint_rows(net, insts))
    for v in range(5):
        fam = sorted(family_of(net, v))
        # empirical family marginal vs exact
        k = [net.variables[u].n_states for u in fam]
        emp = np.zeros(k)
        np.add.at(emp, tuple(rows[:, u] for u in fam), 1)
        emp /= rows.shape[0]
        exact = np.zeros(k)
        np.add.at(exact, tuple(insts[:, u] for u in fam), true)
        assert np.abs(emp - exact).max() < 0.01


def test_family_of():
    variables = [binary(i, n) for i, n in enumerate("XBCD")]
    parents = [(), (), (), (1, 2)]
    cpts = [np.array([[0.5, 0.5]])] * 3 + [np.full((4, 2), 0.5)]
    net = BayesianNetwork(variables, parents, cpts)
    assert family_of(net, 0) == {0}
    assert family_of(net, 3) == {1, 2, 3}
    with pytest.raises(UnknownVariable):
        family_of(net, 9)
