import numpy as np
import pytest

from missbn import BayesianNetwork, Variable, augment, read_dataset


def random_network(rng, n_vars, max_parents=2, max_states=3, min_states=2):
    """Random DAG (edges only from lower to higher id) with Dirichlet CPTs."""
    variables, parents, cpts = [], [], []
    for v in range(n_vars):
        k = int(rng.integers(min_states, max_states + 1))
        variables.append(Variable(v, f"V{v}", tuple(f"s{i}" for i in range(k))))
        pool = list(range(v))
        n_par = int(rng.integers(0, min(max_parents, len(pool)) + 1))
        if n_par:
            chosen = sorted(rng.choice(pool, size=n_par, replace=False).tolist())
        else:
            chosen = []
        parents.append(tuple(chosen))
    for v in range(n_vars):
        n_cfg = 1
        for p in parents[v]:
            n_cfg *= variables[p].n_states
        g = rng.gamma(1.0, size=(n_cfg, variables[v].n_states))
        cpts.append(g / g.sum(axis=1, keepdims=True))
    return BayesianNetwork(variables, parents, cpts)


def chain_network(n=3, p_root=(0.3, 0.7), p_cond=((0.2, 0.8), (0.9, 0.1))):
    """Binary chain V0 -> V1 -> ... -> V(n-1)."""
    variables = [Variable(i, f"V{i}", ("a", "b")) for i in range(n)]
    parents = [()] + [(i - 1,) for i in range(1, n)]
    cpts = [np.array([list(p_root)])] + [np.array([list(r) for r in p_cond])] * (n - 1)
    return BayesianNetwork(variables, parents, cpts)


@pytest.fixture
def xy_network():
    """X -> Y, both binary, the running two-variable example."""
    x = Variable(0, "X", ("x0", "x1"))
    y = Variable(1, "Y", ("y0", "y1"))
    return BayesianNetwork(
        [x, y],
        [(), (0,)],
        [np.array([[0.5, 0.5]]), np.array([[0.2, 0.8], [0.7, 0.3]])],
    )


@pytest.fixture
def xy_dataset(xy_network):
    """Four rows over (X, Y) with Y hidden twice."""
    text = "X,Y\nx0,y1\nx1,?\nx1,y0\nx0,?\n"
    return read_dataset(text, xy_network)


def manifest_network():
    """X, Y, W, Z binary; X and Y are the partially observed pair."""
    names = ["X", "Y", "W", "Z"]
    variables = [Variable(i, n, ("0", "1")) for i, n in enumerate(names)]
    parents = [(), (0,), (), (2,)]
    uniform2 = np.full((1, 2), 0.5)
    cond2 = np.full((2, 2), 0.5)
    return BayesianNetwork(
        variables, parents, [uniform2, cond2, uniform2, cond2]
    )


# 36-row data-usage manifest: every combination of (X, Y, W, Z) with X and Y
# each fully observed, singly hidden, and jointly hidden.  Row numbers in the
# audit tests are 1-based.
MANIFEST_CSV = "X,Y,W,Z\n" + "\n".join(
    [
        f"{x},{y},{w},{z}"
        for x in "01" for y in "01" for w in "01" for z in "01"
    ]
    + [f"{x},?,{w},{z}" for x in "01" for w in "01" for z in "01"]
    + [f"?,{y},{w},{z}" for y in "01" for w in "01" for z in "01"]
    + [f"?,?,{w},{z}" for w in "01" for z in "01"]
) + "\n"


@pytest.fixture
def manifest_dist():
    net = manifest_network()
    return augment(read_dataset(MANIFEST_CSV, net))


def one_based(rows):
    return {r + 1 for r in rows}
