"""Dependency graph of a network, strongly connected components, and the
component DAG used to order the quantization design.

Edge convention: ``(i, j)`` means subsystem j's dynamics read subsystem
i's state, so influence flows i -> j. Dependence is syntactic (variable
occurrence in the parsed dynamics) unless a subsystem declares an
explicit override.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .expr import free_variables
from .netspec import NetworkSpec

__all__ = [
    "DepGraph",
    "SccComponent",
    "SccPartition",
    "Condensation",
    "build_dependency_graph",
    "strongly_connected_components",
    "condense",
    "post",
    "post_inverse",
    "leaves",
    "peel_post",
    "peel_post_inverse",
]


@dataclass(frozen=True)
class DepGraph:
    """Directed graph over subsystem ids 1..n, self-loops never stored."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop ({i},{i}) is implicit and never stored")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ValueError(f"edge ({i},{j}) outside vertex range 1..{self.n}")

    def successors(self, i: int) -> set[int]:
        return {j for (a, j) in self.edges if a == i}

    def predecessors(self, j: int) -> set[int]:
        return {i for (i, b) in self.edges if b == j}


def build_dependency_graph(net: NetworkSpec) -> DepGraph:
    """Edges (i, j) where x_i occurs in subsystem j's dynamics (i != j),
    or where j's explicit deps override lists i."""
    edges = set()
    for sub in net.subsystems:
        if sub.deps_override is not None:
            sources = set(sub.deps_override)
        else:
            sources = set()
            for e in sub.dynamics:
                for name in free_variables(e):
                    if name.startswith("x"):
                        sources.add(int(name[1:]))
        for i in sources:
            if i != sub.id:
                edges.add((i, sub.id))
    return DepGraph(n=net.n, edges=frozenset(edges))


@dataclass(frozen=True)
class SccComponent:
    """One strongly connected component with its aggregated spaces."""

    index: int  # 1-based, in partition order
    members: tuple[int, ...]  # ascending subsystem ids
    state_box: tuple[tuple[Fraction, Fraction], ...]
    input_box: tuple[tuple[Fraction, Fraction], ...]

    @property
    def state_dim(self) -> int:
        return len(self.state_box)

    @property
    def input_dim(self) -> int:
        return len(self.input_box)


@dataclass(frozen=True)
class SccPartition:
    components: tuple[SccComponent, ...]
    component_of: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self,
            "component_of",
            {i: c.index for c in self.components for i in c.members},
        )

    @property
    def n_components(self) -> int:
        return len(self.components)

    def component(self, k: int) -> SccComponent:
        return self.components[k - 1]


def _tarjan_sets(n: int, succ: Mapping[int, set[int]]) -> list[frozenset[int]]:
    """Iterative Tarjan; returns the SCCs as unordered sets."""
    index_of: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    sccs: list[frozenset[int]] = []
    counter = 0

    for root in range(1, n + 1):
        if root in index_of:
            continue
        work = [(root, iter(sorted(succ.get(root, ()))))]
        index_of[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index_of:
                    index_of[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(succ.get(w, ())))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index_of[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index_of[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                sccs.append(frozenset(comp))
    return sccs


def strongly_connected_components(g: DepGraph, net: NetworkSpec | None = None) -> SccPartition:
    """Maximal SCCs, numbered along a topological order of the component
    DAG (components with no successors come last); ties are broken by the
    smallest member id so the numbering is reproducible."""
    succ = {i: g.successors(i) for i in range(1, g.n + 1)}
    raw = _tarjan_sets(g.n, succ)
    comp_ix = {v: ci for ci, comp in enumerate(raw) for v in comp}

    quotient_succ: dict[int, set[int]] = {ci: set() for ci in range(len(raw))}
    indegree = {ci: 0 for ci in range(len(raw))}
    seen = set()
    for (i, j) in g.edges:
        a, b = comp_ix[i], comp_ix[j]
        if a != b and (a, b) not in seen:
            seen.add((a, b))
            quotient_succ[a].add(b)
            indegree[b] += 1

    # Kahn order, smallest member id first among ready components
    heap = [(min(raw[ci]), ci) for ci in indegree if indegree[ci] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        _, ci = heapq.heappop(heap)
        order.append(ci)
        for nxt in quotient_succ[ci]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(heap, (min(raw[nxt]), nxt))
    if len(order) != len(raw):
        raise AssertionError("component quotient is cyclic")  # cannot happen

    components = []
    for pos, ci in enumerate(order, start=1):
        members = tuple(sorted(raw[ci]))
        if net is not None:
            state_box = tuple(iv for m in members for iv in net.subsystem(m).state_box)
            input_box = tuple(iv for m in members for iv in net.subsystem(m).input_box)
        else:
            state_box = input_box = ()
        components.append(
            SccComponent(index=pos, members=members, state_box=state_box, input_box=input_box)
        )
    return SccPartition(components=tuple(components))


@dataclass(frozen=True)
class Condensation:
    """Quotient DAG over component indices 1..n_components.

    ``edges`` is the plain quotient of the dependency edges. ``peel_edges``
    additionally chains the terminal components (those with no successors)
    in ascending index order; the design pass peels with respect to this
    deterministic sequencing, so exactly one terminal component starts the
    peel and earlier terminal components defer to later ones.
    """

    n_components: int
    edges: frozenset[tuple[int, int]]
    peel_edges: frozenset[tuple[int, int]] = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.peel_edges is None:
            sinks = sorted(
                k
                for k in range(1, self.n_components + 1)
                if not any(a == k for (a, _) in self.edges)
            )
            chain = {(a, b) for a, b in zip(sinks, sinks[1:])}
            object.__setattr__(self, "peel_edges", frozenset(self.edges | chain))
        self._assert_acyclic(self.peel_edges)

    def _assert_acyclic(self, edges: Iterable[tuple[int, int]]) -> None:
        succ: dict[int, set[int]] = {}
        indeg = {k: 0 for k in range(1, self.n_components + 1)}
        for a, b in edges:
            succ.setdefault(a, set()).add(b)
            indeg[b] += 1
        ready = [k for k, d in indeg.items() if d == 0]
        seen = 0
        while ready:
            k = ready.pop()
            seen += 1
            for nxt in succ.get(k, ()):
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        if seen != self.n_components:
            raise ValueError("condensation contains a cycle")


def condense(g: DepGraph, p: SccPartition) -> Condensation:
    """Quotient of the dependency graph by the SCC partition."""
    edges = set()
    for (i, j) in g.edges:
        a, b = p.component_of[i], p.component_of[j]
        if a != b:
            edges.add((a, b))
    return Condensation(n_components=p.n_components, edges=frozenset(edges))


def post(c: Condensation, k: int) -> set[int]:
    """Components reachable from k in one step."""
    return {b for (a, b) in c.edges if a == k}


def post_inverse(c: Condensation, k: int) -> set[int]:
    """Components l with k in post(c, l)."""
    return {a for (a, b) in c.edges if b == k}


def peel_post(c: Condensation, k: int) -> set[int]:
    """Successors of k in the peel ordering (edges plus terminal chain)."""
    return {b for (a, b) in c.peel_edges if a == k}


def peel_post_inverse(c: Condensation, k: int) -> set[int]:
    return {a for (a, b) in c.peel_edges if b == k}


def leaves(c: Condensation, subset: Iterable[int]) -> set[int]:
    """Members of ``subset`` with no peel successor inside ``subset``.

    Every returned component also has no plain successor inside the
    subset, so the result is always a subset of the true sinks.
    """
    members = set(subset)
    for k in members:
        if not 1 <= k <= c.n_components:
            raise ValueError(f"component index {k} out of range")
    return {k for k in members if not (peel_post(c, k) & members)}
