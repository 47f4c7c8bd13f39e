import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symnet.graph import (
    Condensation,
    DepGraph,
    build_dependency_graph,
    condense,
    leaves,
    post,
    post_inverse,
    strongly_connected_components,
)
from symnet.netspec import parse_network_text

BENCH_EDGES = {(1, 2), (2, 3), (3, 2), (4, 5), (5, 3), (5, 4), (5, 6)}


def test_benchmark_dependency_graph(example_net):
    g = build_dependency_graph(example_net)
    assert set(g.edges) == BENCH_EDGES


def test_single_decoupled_subsystem():
    net = parse_network_text(
        """
        [[subsystem]]
        id = 1
        state_box = [[-1, 1]]
        input_box = [[-1, 1]]
        dynamics = ["0.5*x1 + u1"]
        [subsystem.cert]
        lipschitz = 1
        alpha_lower = 1
        alpha_upper = 1
        rho = 0.5
        sigma_self = 1
        """
    )
    assert set(build_dependency_graph(net).edges) == set()


def test_two_cycle(toy_pair_net):
    assert set(build_dependency_graph(toy_pair_net).edges) == {(1, 2), (2, 1)}


def test_deps_override_replaces_syntactic():
    net = parse_network_text(
        """
        [[subsystem]]
        id = 1
        state_box = [[-1, 1]]
        input_box = [[-1, 1]]
        dynamics = ["0.5*x1 + u1"]
        [subsystem.cert]
        lipschitz = 1
        alpha_lower = 1
        alpha_upper = 1
        rho = 0.5
        sigma_self = 1

        [[subsystem]]
        id = 2
        state_box = [[-1, 1]]
        input_box = [[-1, 1]]
        dynamics = ["0.5*x2 + 0*x1"]
        [subsystem.deps]
        states = []
        [subsystem.cert]
        lipschitz = 1
        alpha_lower = 1
        alpha_upper = 1
        rho = 0.5
        sigma_self = 0
        """
    )
    # x1 occurs syntactically in f2 with a zero coefficient; the override
    # removes the spurious edge
    assert set(build_dependency_graph(net).edges) == set()


def test_self_loops_never_stored():
    with pytest.raises(ValueError, match="self-loop"):
        DepGraph(n=2, edges=frozenset({(1, 1)}))


def test_benchmark_partition(example_analysis):
    comps = example_analysis.partition.components
    assert [c.members for c in comps] == [(1,), (4, 5), (2, 3), (6,)]
    assert [c.index for c in comps] == [1, 2, 3, 4]
    # aggregated spaces cover the member boxes in ascending member order
    assert comps[1].state_dim == 2 and comps[1].input_dim == 2


def test_edgeless_graph_three_singletons():
    g = DepGraph(n=3, edges=frozenset())
    p = strongly_connected_components(g)
    assert [c.members for c in p.components] == [(1,), (2,), (3,)]


def test_three_cycle_single_component():
    g = DepGraph(n=3, edges=frozenset({(1, 2), (2, 3), (3, 1)}))
    p = strongly_connected_components(g)
    assert [c.members for c in p.components] == [(1, 2, 3)]


def test_benchmark_condensation(example_analysis):
    cond = example_analysis.condensation
    assert set(cond.edges) == {(1, 3), (2, 3), (2, 4)}


def test_single_component_condensation():
    g = DepGraph(n=2, edges=frozenset({(1, 2), (2, 1)}))
    p = strongly_connected_components(g)
    cond = condense(g, p)
    assert cond.n_components == 1 and set(cond.edges) == set()


def test_chain_condensation():
    g = DepGraph(n=3, edges=frozenset({(1, 2), (2, 3)}))
    p = strongly_connected_components(g)
    cond = condense(g, p)
    assert set(cond.edges) == {(1, 2), (2, 3)}


def test_benchmark_post_and_leaves(example_analysis):
    cond = example_analysis.condensation
    assert leaves(cond, {1, 2, 3, 4}) == {4}
    assert leaves(cond, {1, 2, 3}) == {3}
    assert leaves(cond, {1, 2}) == {1, 2}
    assert post_inverse(cond, 3) == {1, 2}
    assert post(cond, 2) == {3, 4}
    assert post(cond, 1) == {3}


def test_component_numbering_topological(example_analysis):
    # edges of the condensation always point from lower to higher index
    for a, b in example_analysis.condensation.edges:
        assert a < b


def test_acyclicity_enforced():
    with pytest.raises(ValueError, match="cycle"):
        Condensation(n_components=2, edges=frozenset({(1, 2), (2, 1)}))


def _brute_force_sccs(n, edges):
    """Mutual reachability via transitive closure."""
    reach = [[i == j for j in range(n + 1)] for i in range(n + 1)]
    for i, j in edges:
        reach[i][j] = True
    for k in range(1, n + 1):
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                reach[i][j] = reach[i][j] or (reach[i][k] and reach[k][j])
    groups = {}
    for i in range(1, n + 1):
        key = frozenset(
            j for j in range(1, n + 1) if reach[i][j] and reach[j][i]
        )
        groups[key] = True
    return set(groups)


@given(st.integers(1, 10), st.data())
@settings(max_examples=150, deadline=None)
def test_scc_matches_brute_force(n, data):
    possible = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j]
    chosen = data.draw(st.lists(st.sampled_from(possible), unique=True) if possible else st.just([]))
    g = DepGraph(n=n, edges=frozenset(chosen))
    p = strongly_connected_components(g)
    assert {frozenset(c.members) for c in p.components} == _brute_force_sccs(n, chosen)
    # partition covers 1..n exactly
    all_members = list(itertools.chain.from_iterable(c.members for c in p.components))
    assert sorted(all_members) == list(range(1, n + 1))


@given(st.integers(1, 8), st.data())
@settings(max_examples=100, deadline=None)
def test_leaves_are_sinks(n, data):
    possible = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j]
    chosen = data.draw(st.lists(st.sampled_from(possible), unique=True) if possible else st.just([]))
    g = DepGraph(n=n, edges=frozenset(chosen))
    p = strongly_connected_components(g)
    cond = condense(g, p)
    subset = data.draw(st.sets(st.integers(1, p.n_components), min_size=1))
    found = leaves(cond, subset)
    assert found <= subset
    for k in found:
        assert not (post(cond, k) & subset)
    # condensation admits a topological order: numbering is one
    for a, b in cond.edges:
        assert a < b
