import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from tempnet.state import Edges, Population, pair_key


def test_append_assigns_increasing_ids():
    pop = Population()
    pop.append(3, male=True)
    rows = pop.append(2, spread=0.5)
    assert rows.tolist() == [3, 4]
    assert pop.ids.tolist() == [0, 1, 2, 3, 4]
    assert pop.male.tolist() == [True, True, True, False, False]
    assert pop.spread[3:].tolist() == [0.5, 0.5]
    assert pop.next_id == 5


def test_keep_returns_remap_and_ids_survive():
    pop = Population()
    pop.append(5)
    remap = pop.keep(np.array([True, False, True, False, True]))
    assert remap.tolist() == [0, -1, 1, -1, 2]
    assert pop.ids.tolist() == [0, 2, 4]
    assert pop.append(1).tolist() == [3] and pop.ids[-1] == 5


def test_pair_key_symmetric_and_unique():
    a = np.array([1, 7, 3])
    b = np.array([7, 1, 4])
    k = pair_key(a, b)
    assert k[0] == k[1] != k[2]


def test_edges_remap_drops_dead_endpoints():
    pop = Population()
    pop.append(4)
    e = Edges()
    e.add(np.array([0, 1, 2]), np.array([1, 3, 3]), pair_key(np.array([0, 1, 2]), np.array([1, 3, 3])), 0)
    remap = pop.keep(np.array([True, True, False, True]))
    assert e.remap_nodes(remap) == 1
    assert list(zip(e.u.tolist(), e.v.tolist())) == [(0, 1), (1, 2)]
    assert e.degree(3).tolist() == [1, 2, 1]


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
                                            .filter(lambda p: p[0] != p[1]).map(lambda p: (min(p), max(p)))))))
def test_adjacency_matches_edge_list(case):
    n, pairs = case
    pairs = sorted(pairs)
    e = Edges()
    if pairs:
        u = np.array([p[0] for p in pairs])
        v = np.array([p[1] for p in pairs])
        e.add(u, v, pair_key(u, v), 0)
    indptr, nbrs, eidx = e.adjacency(n)
    for node in range(n):
        got = sorted(nbrs[indptr[node]:indptr[node + 1]].tolist())
        want = sorted([b for a, b in pairs if a == node] + [a for a, b in pairs if b == node])
        assert got == want
    for k in range(len(nbrs)):
        node = np.searchsorted(indptr, k, side="right") - 1
        assert {int(e.u[eidx[k]]), int(e.v[eidx[k]])} == {int(node), int(nbrs[k])}
    assert e.degree(n).sum() == 2 * len(pairs)


def test_round_trip_dicts():
    pop = Population()
    pop.append(3, offset=np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]))
    back = Population.from_dict(pop.to_dict())
    for name in Population.COLUMNS:
        assert np.array_equal(getattr(back, name), getattr(pop, name))
        assert getattr(back, name).dtype == getattr(pop, name).dtype
    assert back.next_id == 3
