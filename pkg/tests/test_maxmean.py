from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ergolock import dynamics as dyn
from ergolock.errors import NoCycle
from ergolock.maxmean import (build_transfer_graph, graph_from_edges, karp_max_mean_cycle,
                              oracle_Q)
from ergolock.orbits import enumerate_periodic, orbit_averages
from ergolock.potentials import Cosine, Step, constant


def test_doubling_edges():
    g = build_transfer_graph(dyn.doubling(), Cosine(0.0, 1.0), 2)
    assert g.successors(0) == [0, 1] and g.successors(1) == [0, 1]
    g = build_transfer_graph(dyn.doubling(), Cosine(0.0, 1.0), 4)
    assert [g.successors(i) for i in range(4)] == [[0, 1], [2, 3], [0, 1], [2, 3]]


def test_identity_markov_self_loops():
    m = dyn.markov([0, Fr(1, 2), 1], [0, Fr(1, 2)], [1, 1])
    g = build_transfer_graph(m, constant(0.0), 8)
    for i in range(8):
        assert i in g.successors(i)


def test_every_node_has_out_edge():
    for m in (dyn.doubling(), dyn.logistic(3.7), dyn.tent(1.3)):
        g = build_transfer_graph(m, Cosine(0.0, 1.0), 257)
        assert np.all(np.diff(g.indptr) >= 1)


def test_karp_small_examples():
    g = graph_from_edges(2, [(0, 0), (1, 1), (0, 1), (1, 0)], [1.0, 3.0])
    r = karp_max_mean_cycle(g)
    assert r.value == 3.0 and r.cycle == [1]
    r = karp_max_mean_cycle(graph_from_edges(1, [(0, 0)], [-2.0]))
    assert r.value == -2.0


def test_dag_raises():
    with pytest.raises(NoCycle):
        karp_max_mean_cycle(graph_from_edges(3, [(0, 1), (1, 2)], [0.0, 1.0, 2.0]))


def _brute_force(n, edges, w):
    # max mean simple cycle by DFS over all simple cycles
    adj = {i: [j for a, j in edges if a == i] for i in range(n)}
    best = -np.inf

    def dfs(start, v, path, seen):
        nonlocal best
        for j in adj[v]:
            if j == start:
                best = max(best, np.mean([w[k] for k in path]))
            elif j > start and j not in seen:
                seen.add(j)
                dfs(start, j, path + [j], seen)
                seen.discard(j)
    for s in range(n):
        dfs(s, s, [s], {s})
    return best


@given(seed=st.integers(0, 100_000))
def test_karp_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    edges = [(i, j) for i in range(n) for j in range(n) if rng.uniform() < 0.4]
    edges.append((0, 0))
    w = rng.normal(size=n)
    r = karp_max_mean_cycle(graph_from_edges(n, edges, w))
    assert r.value == pytest.approx(_brute_force(n, edges, w), abs=1e-12)
    assert np.mean(w[r.cycle]) == pytest.approx(r.value, abs=1e-12)


@given(c=st.floats(-100, 100), seed=st.integers(0, 1000))
def test_karp_shift_equivariance(c, seed):
    g = build_transfer_graph(dyn.doubling(), Cosine(np.random.default_rng(seed).uniform(), 1.0), 64)
    v0 = karp_max_mean_cycle(g).value
    v1 = karp_max_mean_cycle(g.shifted(c)).value
    assert abs(v1 - (v0 + c)) <= 1e-12 * max(1.0, abs(c))


def test_doubling_cosine_n64():
    v, _ = oracle_Q(dyn.doubling(), Cosine(0.0, 1.0), 64)
    assert abs(v - 1.0) <= 0.01


def test_constant_potential_exact():
    v, b = oracle_Q(dyn.logistic(3.7), constant(0.25), 128)
    assert v == 0.25 and b == 0.0


def test_step_potential_bound_unusable():
    m = dyn.doubling()
    v, b = oracle_Q(m, Step((0.0, 0.5, 1.0), (1.0, 0.0)), 16)
    assert b == np.inf


@pytest.mark.parametrize("m", [dyn.doubling(), dyn.tent(2.0)], ids=["doubling", "tent"])
def test_oracle_agrees_with_enumeration(m):
    p = Cosine(0.3, 1.0)
    v, b = oracle_Q(m, p, 4096)
    q = float(np.max(orbit_averages(enumerate_periodic(m, 12), p)))
    assert abs(v - q) <= b + 1e-9
