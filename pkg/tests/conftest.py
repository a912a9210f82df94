import numpy as np
import pytest

from corestab.graph import Graph

# Zachary karate club, 34 nodes, 78 edges (1-indexed as usually published)
KARATE_EDGES = [
    (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 11),
    (1, 12), (1, 13), (1, 14), (1, 18), (1, 20), (1, 22), (1, 32),
    (2, 3), (2, 4), (2, 8), (2, 14), (2, 18), (2, 20), (2, 22), (2, 31),
    (3, 4), (3, 8), (3, 9), (3, 10), (3, 14), (3, 28), (3, 29), (3, 33),
    (4, 8), (4, 13), (4, 14),
    (5, 7), (5, 11),
    (6, 7), (6, 11), (6, 17),
    (7, 17),
    (9, 31), (9, 33), (9, 34),
    (10, 34),
    (14, 34),
    (15, 33), (15, 34),
    (16, 33), (16, 34),
    (19, 33), (19, 34),
    (20, 34),
    (21, 33), (21, 34),
    (23, 33), (23, 34),
    (24, 26), (24, 28), (24, 30), (24, 33), (24, 34),
    (25, 26), (25, 28), (25, 32),
    (26, 32),
    (27, 30), (27, 34),
    (28, 34),
    (29, 32), (29, 34),
    (30, 33), (30, 34),
    (31, 33), (31, 34),
    (32, 33), (32, 34),
    (33, 34),
]


@pytest.fixture(scope="session")
def karate():
    edges = np.array(KARATE_EDGES, dtype=np.int64) - 1
    return Graph(34, edges)


@pytest.fixture(scope="session")
def karate_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "karate.txt"
    path.write_text("".join(f"{u} {v}\n" for u, v in KARATE_EDGES))
    return str(path)


@pytest.fixture
def triangle():
    return Graph(3, [[0, 1], [1, 2], [0, 2]])


def naive_coreness(g):
    """Fixpoint-deletion oracle: for each k, repeatedly delete nodes of
    degree < k until none remain; coreness is the largest k a node survives."""
    core = np.zeros(g.n, dtype=np.int64)
    adj = [set(g.neighbors(v).tolist()) for v in range(g.n)]
    for k in range(1, g.n + 1):
        alive = set(range(g.n))
        nbrs = [set(s) for s in adj]
        changed = True
        while changed:
            changed = False
            for v in sorted(alive):
                if len(nbrs[v]) < k:
                    alive.discard(v)
                    for u in nbrs[v]:
                        nbrs[u].discard(v)
                    nbrs[v] = set()
                    changed = True
        if not alive:
            break
        for v in alive:
            core[v] = k
    return core


def emd_lp(a, b):
    """Optimal-transport LP between two small empirical distributions."""
    from scipy.optimize import linprog

    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = len(a), len(b)
    cost = np.abs(a[:, None] - b[None, :]).ravel()
    a_eq = []
    b_eq = []
    for i in range(na):
        row = np.zeros(na * nb)
        row[i * nb:(i + 1) * nb] = 1.0
        a_eq.append(row)
        b_eq.append(1.0 / na)
    for j in range(nb):
        row = np.zeros(na * nb)
        row[j::nb] = 1.0
        a_eq.append(row)
        b_eq.append(1.0 / nb)
    res = linprog(cost, A_eq=np.array(a_eq), b_eq=np.array(b_eq),
                  bounds=(0, None), method="highs")
    assert res.success
    return res.fun


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        grad.flat[i] = (f(x + step) - f(x - step)) / (2 * h)
    return grad


def random_er(rng, n, p):
    i, j = np.triu_indices(n, 1)
    keep = rng.random(len(i)) < p
    return Graph(n, np.column_stack([i[keep], j[keep]]))
