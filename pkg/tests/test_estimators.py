import numpy as np
import pytest

from missbn import (
    IncompleteDataset,
    aggregate,
    augment,
    build_lattice,
    contributing_rows,
    direct_deletion_mar,
    direct_deletion_mcar,
    extract_parameters,
    factored_deletion_mar,
    factored_deletion_mcar,
    forward_sample,
    listwise_deletion,
    mnar_cross_estimate,
    simulate_mar,
    simulate_mcar,
    simulate_mnar_cross,
)
from missbn.dataset import MISSING
from missbn.errors import (
    EmptyCandidates,
    GroundSetTooLarge,
    ScopeMismatch,
    ZeroSupport,
)
from missbn.estimators import AGGREGATION_METHODS, EstimateTable
from missbn.network import all_instantiations, log_joint_rows

from conftest import one_based, random_network

X, Y, W, Z = 0, 1, 2, 3  # manifest variable ids


# ---------------------------------------------------------------- lattice

def test_lattice_counts_small():
    lat = build_lattice((0,))
    assert (len(lat.nodes), len(lat.edges)) == (2, 1)
    lat = build_lattice((0, 1, 2))
    assert (len(lat.nodes), len(lat.edges)) == (8, 12)
    lat = build_lattice(tuple(range(6)))
    assert (len(lat.nodes), len(lat.edges)) == (64, 192)


def test_lattice_counts_formula():
    for k in range(1, 11):
        lat = build_lattice(tuple(range(k)))
        assert len(lat.nodes) == 2**k
        assert len(lat.edges) == k * 2 ** (k - 1)


def test_lattice_guard():
    with pytest.raises(GroundSetTooLarge):
        build_lattice(())
    with pytest.raises(GroundSetTooLarge):
        build_lattice(tuple(range(21)))


# ------------------------------------------------- manifest row-usage audits

def test_listwise_rows_for_xw(manifest_dist):
    table = listwise_deletion(manifest_dist, [X, W], track_rows=True)
    assert one_based(table.rows_used) == set(range(1, 17))
    # the (x=1, w=1) cell draws on exactly these complete rows
    cell = contributing_rows(manifest_dist, {X: 1, W: 1, Y: "ob"})
    assert one_based(cell) == {11, 12, 15, 16}
    assert table.values[1, 1] == pytest.approx(4 / 16)
    assert table.support == 16


def test_direct_rows_for_xw(manifest_dist):
    table = direct_deletion_mcar(manifest_dist, [X, W], track_rows=True)
    assert one_based(table.rows_used) == set(range(1, 17)) | set(range(17, 25))
    cell = contributing_rows(manifest_dist, {X: 1, W: 1})
    assert one_based(cell) == {11, 12, 15, 16, 23, 24}
    assert table.support == 24


def test_factored_rows_for_xw(manifest_dist):
    # factorization Pr(x | w, R_x = ob) Pr(w): union over numerator cells
    fact_a = contributing_rows(manifest_dist, {X: 1, W: 1}) | contributing_rows(
        manifest_dist, {W: 1}
    )
    assert one_based(fact_a) == {3, 4, 7, 8, 11, 12, 15, 16, 19, 20, 23, 24,
                                 27, 28, 31, 32, 35, 36}
    # factorization Pr(w | x, R_x = ob) Pr(x | R_x = ob)
    fact_b = contributing_rows(manifest_dist, {X: 1, W: 1}) | contributing_rows(
        manifest_dist, {X: 1}
    )
    assert one_based(fact_b) == {9, 10, 11, 12, 13, 14, 15, 16, 21, 22, 23, 24}
    union = fact_a | fact_b
    assert len(union) == 24
    direct = contributing_rows(manifest_dist, {X: 1, W: 1})
    assert direct < union


def test_mar_rows_for_xy(manifest_dist):
    conditional = contributing_rows(manifest_dist, {X: 1, Y: 1})
    assert one_based(conditional) == {13, 14, 15, 16}
    weights = contributing_rows(manifest_dist, {})
    assert one_based(weights) == set(range(1, 37))


def test_factored_mar_factor_rows(manifest_dist):
    # Pr(y | w, z, R_y = ob) numerator rows across all (w, z)
    rows = contributing_rows(manifest_dist, {Y: 1})
    assert one_based(rows) == {5, 6, 7, 8, 13, 14, 15, 16, 29, 30, 31, 32}


def test_informed_weight_rows(manifest_dist):
    rows = contributing_rows(manifest_dist, {W: 0})
    assert len(rows) == 18
    # informed direct deletion with scope {W} runs and normalizes
    table = direct_deletion_mar(manifest_dist, [X, Y], scope=[W])
    assert table.values.sum() == pytest.approx(1.0, abs=1e-9)


def test_data_usage_monotone_on_random_datasets():
    rng = np.random.default_rng(2)
    for _ in range(10):
        net = random_network(rng, 5, max_states=2)
        ds, _ = simulate_mcar(net, 0.5, 0.5, seed=int(rng.integers(1 << 30)), n_rows=60)
        dist = augment(ds)
        family = sorted(rng.choice(5, size=3, replace=False).tolist())
        try:
            lw = listwise_deletion(dist, family, track_rows=True).rows_used
            dm = direct_deletion_mcar(dist, family, track_rows=True).rows_used
        except ZeroSupport:
            continue
        fm = factored_deletion_mcar(dist, family, track_rows=True).rows_used
        assert lw <= dm <= fm


# ------------------------------------------------------ small exact examples

def test_direct_mcar_two_variable_toy(xy_dataset):
    dist = augment(xy_dataset)
    table = direct_deletion_mcar(dist, [0, 1])
    assert table.values[1, 0] == pytest.approx(0.5)
    assert table.support == 2


def test_listwise_zero_support(xy_network):
    rows = np.array([[0, MISSING], [1, MISSING]])
    dist = augment(IncompleteDataset(xy_network, rows))
    with pytest.raises(ZeroSupport):
        listwise_deletion(dist, [0, 1])


def test_factored_zero_support(xy_network):
    rows = np.array([[MISSING, MISSING]], dtype=np.int64)
    ds = IncompleteDataset(xy_network, np.repeat(rows, 3, axis=0))
    dist = augment(ds)
    with pytest.raises(ZeroSupport):
        factored_deletion_mcar(dist, [0, 1])


def test_direct_mar_on_fully_observed_family(manifest_dist):
    # family within the observed variables: empirical joint over all rows
    table = direct_deletion_mar(manifest_dist, [W, Z])
    expected = np.full((2, 2), 0.25)
    assert np.allclose(table.values, expected, atol=1e-12)


def test_factored_mar_single_partial_equals_direct(manifest_dist):
    # with one partially observed member the lattice is a single edge
    for fam in ([X, W], [X, W, Z], [Y, Z]):
        d = direct_deletion_mar(manifest_dist, fam)
        f = factored_deletion_mar(manifest_dist, fam)
        assert np.allclose(d.values, f.values, atol=1e-12)


def test_direct_mar_equals_direct_mcar_for_all_partial_family(manifest_dist):
    # no observed members in the family and an empty outer sum collapse the
    # re-weighting exactly onto the MCAR conditional
    rows = np.array([[0, 0], [0, MISSING], [1, 1], [MISSING, 1], [1, 0]])
    from conftest import manifest_network

    net = manifest_network()
    ds = IncompleteDataset(net, np.hstack([rows, np.zeros((5, 2), dtype=int)]),
                           declared_partial=[X, Y])
    # make W, Z constant so the context is a single group
    dist = augment(ds)
    d_mar = direct_deletion_mar(dist, [X, Y])
    d_mcar = direct_deletion_mcar(dist, [X, Y])
    assert np.allclose(d_mar.values, d_mcar.values, atol=1e-12)


# -------------------------------------------------- complete-data collapse

def _empirical_joint(dist, family):
    shape = tuple(dist.network.variables[v].n_states for v in sorted(family))
    dense = np.zeros(shape)
    np.add.at(dense, tuple(dist.keys[:, v] for v in sorted(family)), dist.counts)
    return dense / dist.n_rows


def test_complete_data_collapse_all_estimators():
    rng = np.random.default_rng(9)
    for _ in range(10):
        net = random_network(rng, 5)
        rows = forward_sample(net, int(rng.integers(1 << 30)), 300)
        dist = augment(IncompleteDataset(net, rows))
        family = sorted(rng.choice(5, size=2, replace=False).tolist())
        expected = _empirical_joint(dist, family)
        for estimate in (
            listwise_deletion(dist, family),
            direct_deletion_mcar(dist, family),
            direct_deletion_mar(dist, family),
        ):
            assert np.allclose(estimate.values, expected, atol=1e-12)
        for method in AGGREGATION_METHODS:
            assert np.allclose(
                factored_deletion_mcar(dist, family, method).values,
                expected,
                atol=1e-12,
            )
            assert np.allclose(
                factored_deletion_mar(dist, family, method).values,
                expected,
                atol=1e-12,
            )


def _mixed_state_network():
    # family of C is {B, C, D} with 3, 2, 2 states: exercises the lattice
    # axis alignment with heterogeneous cardinalities
    from missbn import BayesianNetwork, Variable

    rng = np.random.default_rng(0)
    variables = [
        Variable(0, "A", ("a0", "a1")),
        Variable(1, "B", ("b0", "b1", "b2")),
        Variable(2, "C", ("c0", "c1")),
        Variable(3, "D", ("d0", "d1")),
    ]
    parents = [(), (0,), (1, 3), ()]
    cpts = []
    for v, par in enumerate(parents):
        n_cfg = int(np.prod([variables[p].n_states for p in par])) if par else 1
        g = rng.gamma(1.0, size=(n_cfg, variables[v].n_states))
        cpts.append(g / g.sum(axis=1, keepdims=True))
    return BayesianNetwork(variables, parents, cpts)


def test_factored_estimators_exact_on_mixed_state_family():
    net = _mixed_state_network()
    rows = forward_sample(net, 5, 400)
    ds = IncompleteDataset(net, rows, declared_partial=[1, 3])
    dist = augment(ds)
    family = [1, 2, 3]
    emp = np.zeros((3, 2, 2))
    np.add.at(emp, (rows[:, 1], rows[:, 2], rows[:, 3]), 1)
    emp /= len(rows)
    for method in AGGREGATION_METHODS:
        assert np.allclose(
            factored_deletion_mar(dist, family, method).values, emp, atol=1e-12
        )
        assert np.allclose(
            factored_deletion_mcar(dist, family, method).values, emp, atol=1e-12
        )


def test_factored_mar_consistent_on_mixed_state_family():
    from missbn.missingness import MechanismSpec, _apply_mechanisms
    from missbn.network import all_instantiations, log_joint_rows

    net = _mixed_state_network()
    mechanisms = {
        1: MechanismSpec((0,), np.array([0.7, 0.3])),
        3: MechanismSpec((2,), np.array([0.2, 0.6])),
    }
    complete = forward_sample(net, 9, 300_000)
    rows = _apply_mechanisms(net, mechanisms, complete, np.random.default_rng(1))
    dist = augment(IncompleteDataset(net, rows, declared_partial=[1, 3]))
    insts = all_instantiations([v.n_states for v in net.variables])
    joint = np.exp(log_joint_rows(net, insts))
    family = [1, 2, 3]
    truth = np.zeros((3, 2, 2))
    np.add.at(truth, (insts[:, 1], insts[:, 2], insts[:, 3]), joint)
    for table in (
        factored_deletion_mar(dist, family),
        direct_deletion_mar(dist, family),
    ):
        assert np.abs(table.values - truth).max() < 0.01


# ----------------------------------------------------------- normalization

def test_all_estimators_normalized_under_missingness():
    rng = np.random.default_rng(31)
    for seed in range(8):
        net = random_network(rng, 5, max_states=3)
        ds, graph = simulate_mar(net, 0.4, 1, (1.0, 0.8), seed=seed, n_rows=300)
        dist = augment(ds)
        family = sorted(rng.choice(5, size=2, replace=False).tolist())
        for table in (
            direct_deletion_mar(dist, family),
            factored_deletion_mar(dist, family),
            factored_deletion_mcar(dist, family),
        ):
            assert table.values.sum() == pytest.approx(1.0, abs=1e-9)
            assert (table.values >= 0).all()


# ------------------------------------------------------------- MNAR cross

def test_mnar_cross_no_missingness_equals_empirical(xy_network):
    rows = forward_sample(xy_network, 5, 500)
    dist = augment(IncompleteDataset(xy_network, rows, declared_partial=[0, 1]))
    table = mnar_cross_estimate(dist, 0, 1)
    assert np.allclose(table.values, _empirical_joint(dist, [0, 1]), atol=1e-12)


def test_mnar_cross_recovers_truth_where_mcar_is_biased(xy_network):
    ds, _ = simulate_mnar_cross(xy_network, 0, 1, (4.0, 6.0), seed=3, n_rows=100_000)
    dist = augment(ds)
    insts = all_instantiations([2, 2])
    true = np.exp(log_joint_rows(xy_network, insts)).reshape(2, 2)
    cross_err = np.abs(mnar_cross_estimate(dist, 0, 1).values - true).max()
    mcar_err = np.abs(direct_deletion_mcar(dist, [0, 1]).values - true).max()
    assert cross_err < 0.01
    assert mcar_err > 3 * cross_err


# ------------------------------------------------------------- aggregation

def _table(values, variance, support=10.0):
    values = np.asarray(values, dtype=float)
    return EstimateTable((0,), values, support, variance)


def test_aggregate_single_candidate_unchanged():
    single = _table([0.2, 0.8], 0.01)
    for method in AGGREGATION_METHODS:
        out = aggregate([single], method)
        assert np.allclose(out.values, single.values)


def test_aggregate_equal_variances_inverse_variance_is_mean():
    a, b = _table([0.2, 0.8], 0.05), _table([0.4, 0.6], 0.05)
    iv = aggregate([a, b], "inverse-variance")
    mean = aggregate([a, b], "mean")
    assert np.allclose(iv.values, mean.values, atol=1e-12)


def test_aggregate_inverse_variance_hand_value():
    a, b = _table([0.2, 0.8], 0.01), _table([0.4, 0.6], 0.03)
    out = aggregate([a, b], "inverse-variance")
    assert out.values[0] == pytest.approx(0.25, abs=1e-9)


def test_aggregate_lowest_variance_tie_breaks_by_order():
    a, b = _table([0.2, 0.8], 0.01), _table([0.4, 0.6], 0.01)
    out = aggregate([a, b], "lowest-variance")
    assert np.allclose(out.values, a.values)


def test_aggregate_errors():
    with pytest.raises(EmptyCandidates):
        aggregate([], "mean")
    a = _table([0.5, 0.5], 0.1)
    b = EstimateTable((1,), np.array([0.5, 0.5]), 1.0, 0.1)
    with pytest.raises(ScopeMismatch):
        aggregate([a, b], "mean")


# ----------------------------------------------------- parameter extraction

def test_extract_parameters_ml_on_complete_data():
    rng = np.random.default_rng(23)
    net = random_network(rng, 4, max_states=2)
    rows = forward_sample(net, 7, 500)
    dist = augment(IncompleteDataset(net, rows))
    learned = extract_parameters(
        net, lambda d, fam: direct_deletion_mcar(d, fam), dist,
        prior_concentration=1.0,
    )
    for v in range(4):
        parents = net.parents[v]
        counts = np.zeros_like(net.cpts[v])
        cfg = np.zeros(rows.shape[0], dtype=np.int64)
        for p in parents:
            cfg = cfg * net.variables[p].n_states + rows[:, p]
        np.add.at(counts, (cfg, rows[:, v]), 1)
        totals = counts.sum(axis=1, keepdims=True)
        ml = np.where(totals > 0, counts / np.maximum(totals, 1),
                      1 / net.variables[v].n_states)
        assert np.allclose(learned.cpts[v], ml, atol=1e-9)


def test_extract_parameters_smoothing_arithmetic(xy_network):
    # child counts {3, 1} with concentration 2 give {4/6, 2/6}
    rows = np.array([[0, 0]] * 3 + [[0, 1]] + [[1, MISSING]] * 0)
    dist = augment(IncompleteDataset(xy_network, rows))

    def estimator(d, fam):
        return direct_deletion_mcar(d, fam)

    learned = extract_parameters(xy_network, estimator, dist, prior_concentration=2.0)
    assert np.allclose(learned.cpts[1][0], [4 / 6, 2 / 6], atol=1e-12)


def test_extract_parameters_zero_support_row_is_uniform(xy_network):
    rows = np.array([[0, 0], [0, 1]])  # x1 never observed
    dist = augment(IncompleteDataset(xy_network, rows))
    learned = extract_parameters(
        xy_network, lambda d, fam: direct_deletion_mcar(d, fam), dist, 2.0
    )
    assert np.allclose(learned.cpts[1][1], [0.5, 0.5])


def test_extract_parameters_rejects_sub_one_prior(xy_network, xy_dataset):
    dist = augment(xy_dataset)
    with pytest.raises(ValueError):
        extract_parameters(
            xy_network, lambda d, fam: direct_deletion_mcar(d, fam), dist, 0.5
        )


# ----------------------------------------------------- statistical behavior

def test_dmcar_consistency_on_mcar_data():
    rng = np.random.default_rng(77)
    net = random_network(rng, 5, max_states=2)
    insts = all_instantiations([v.n_states for v in net.variables])
    true = np.exp(log_joint_rows(net, insts))
    hits = 0
    seeds = 20
    for seed in range(seeds):
        ds, _ = simulate_mcar(net, 0.3, 0.7, seed=seed, n_rows=100_000)
        dist = augment(ds)
        worst = 0.0
        for v in range(5):
            family = sorted({v, *net.parents[v]})
            est = direct_deletion_mcar(dist, family).values
            exact = np.zeros(est.shape)
            np.add.at(exact, tuple(insts[:, u] for u in family), true)
            worst = max(worst, float(np.abs(est - exact).max()))
        if worst < 0.01:
            hits += 1
    assert hits >= 0.9 * seeds


def test_dmar_consistency_on_mar_data():
    rng = np.random.default_rng(78)
    net = random_network(rng, 5, max_states=2)
    insts = all_instantiations([v.n_states for v in net.variables])
    true = np.exp(log_joint_rows(net, insts))
    hits = 0
    seeds = 20
    for seed in range(seeds):
        ds, _ = simulate_mar(net, 0.4, 2, (2.0, 2.0), seed=seed, n_rows=100_000)
        dist = augment(ds)
        worst = 0.0
        for v in range(5):
            family = sorted({v, *net.parents[v]})
            est = direct_deletion_mar(dist, family).values
            exact = np.zeros(est.shape)
            np.add.at(exact, tuple(insts[:, u] for u in family), true)
            worst = max(worst, float(np.abs(est - exact).max()))
        if worst < 0.01:
            hits += 1
    assert hits >= 0.9 * seeds
