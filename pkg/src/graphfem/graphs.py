"""Metric graphs and their edge-disjoint partitions.

A metric graph is a finite simple connected graph whose edges carry positive
lengths; each edge is an interval ``[0, length]`` with the local coordinate
running from the origin vertex to the terminal vertex.  Partitions split the
edge set into subgraphs; vertices shared by two or more subgraphs form the
interface on which the substructured solvers operate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class GraphValidationError(ValueError):
    """Base class for invalid graph construction input."""


class LoopEdgeError(GraphValidationError):
    """An edge connects a vertex to itself."""


class DuplicateEdgeError(GraphValidationError):
    """The same unordered vertex pair appears more than once."""


class NonpositiveLengthError(GraphValidationError):
    """An edge length is zero, negative, or not finite."""


class DisconnectedGraphError(GraphValidationError):
    """The graph is not connected."""


class PartitionValidationError(ValueError):
    """A partition fails one of its structural requirements.

    ``reason`` is one of ``"uncovered-edge"``, ``"duplicate-edge"``,
    ``"disconnected-subgraph"``, ``"interface-mismatch"``.
    """

    def __init__(self, reason: str, message: str):
        self.reason = reason
        super().__init__(message)


@dataclass(frozen=True)
class MetricGraph:
    """Directed simple connected graph with positive edge lengths.

    ``edges[k] = (origin, terminal, length)``.  Vertex ids are the integers
    ``0 .. n_vertices-1``.  Instances are immutable and safe to share.
    """

    n_vertices: int
    edges: tuple[tuple[int, int, float], ...]
    meta: dict | None = None

    @property
    def n(self) -> int:
        return self.n_vertices

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=int)
        for a, b, _ in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    @cached_property
    def incident_edges(self) -> tuple[tuple[int, ...], ...]:
        """Edge ids incident to each vertex."""
        inc: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for k, (a, b, _) in enumerate(self.edges):
            inc[a].append(k)
            inc[b].append(k)
        return tuple(tuple(e) for e in inc)

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([l for _, _, l in self.edges], dtype=float)

    def endpoints(self, edge: int) -> tuple[int, int]:
        a, b, _ = self.edges[edge]
        return a, b


def build_graph(edge_list, meta: dict | None = None) -> MetricGraph:
    """Validate an edge list ``[(origin, terminal, length), ...]``.

    Vertex ids must be nonnegative integers; the vertex set is
    ``0 .. max_id``.  Raises a distinct :class:`GraphValidationError`
    subclass for loops, duplicate edges, nonpositive lengths, and
    disconnected graphs.
    """
    edges = []
    seen: set[frozenset[int]] = set()
    max_id = -1
    for k, (a, b, length) in enumerate(edge_list):
        a, b = int(a), int(b)
        length = float(length)
        if a < 0 or b < 0:
            raise GraphValidationError(f"edge {k}: negative vertex id ({a}, {b})")
        if not (length > 0.0) or not np.isfinite(length):
            raise NonpositiveLengthError(f"edge {k} ({a}, {b}): length {length} is not positive")
        if a == b:
            raise LoopEdgeError(f"edge {k}: loop at vertex {a}")
        pair = frozenset((a, b))
        if pair in seen:
            raise DuplicateEdgeError(f"edge {k}: duplicate of unordered pair ({a}, {b})")
        seen.add(pair)
        max_id = max(max_id, a, b)
        edges.append((a, b, length))
    if not edges:
        raise GraphValidationError("empty edge list")
    n = max_id + 1
    _check_connected(n, edges)
    return MetricGraph(n_vertices=n, edges=tuple(edges), meta=meta)


def _check_connected(n: int, edges) -> None:
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b, _ in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                stack.append(w)
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise DisconnectedGraphError(f"vertex {missing} is not reachable from vertex 0")


def dgm(level: int) -> MetricGraph:
    """Dorogovtsev-Goltsev-Mendes graph of the given generation.

    Generation 0 is the single unit edge (0, 1).  Each following generation
    adds, per existing edge, one new vertex joined to both endpoints of that
    edge.  Edge counts follow 3**level; vertex counts follow the recurrence
    n(k+1) = n(k) + 3**k.  All lengths are 1.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    edges: list[tuple[int, int, float]] = [(0, 1, 1.0)]
    n = 2
    for _ in range(level):
        new_edges = list(edges)
        for a, b, _ in edges:
            w = n
            n += 1
            new_edges.append((a, w, 1.0))
            new_edges.append((b, w, 1.0))
        edges = new_edges
    return MetricGraph(n_vertices=n, edges=tuple(edges), meta={"family": "dgm", "level": level})


def barabasi_albert(n: int, m_attach: int, seed: int) -> MetricGraph:
    """Preferential-attachment graph on ``n`` vertices, unit lengths.

    Starts from a star on ``m_attach + 1`` vertices (vertex 0 is the hub).
    Each new vertex attaches ``m_attach`` edges to distinct existing vertices
    drawn with probability proportional to current degree (sampling from the
    degree-repeated vertex list, redrawing until distinct).  Deterministic for
    a fixed seed: the sampling stream is numpy's PCG64.
    """
    if m_attach < 1:
        raise ValueError("m_attach must be >= 1")
    if n <= m_attach:
        raise ValueError(f"need n > m_attach, got n={n}, m_attach={m_attach}")
    rng = np.random.default_rng(seed)
    edges: list[tuple[int, int, float]] = [(0, leaf, 1.0) for leaf in range(1, m_attach + 1)]
    # vertex id repeated once per incident edge; sampling uniformly from this
    # list realizes degree-proportional attachment
    repeated: list[int] = []
    for a, b, _ in edges:
        repeated.extend((a, b))
    for v in range(m_attach + 1, n):
        targets: list[int] = []
        while len(targets) < m_attach:
            t = repeated[int(rng.integers(len(repeated)))]
            if t not in targets:
                targets.append(t)
        for t in targets:
            edges.append((t, v, 1.0))
            repeated.append(t)
        repeated.extend([v] * m_attach)
    return MetricGraph(
        n_vertices=n,
        edges=tuple(edges),
        meta={"family": "ba", "n": n, "m_attach": m_attach, "seed": seed},
    )


@dataclass(frozen=True)
class Partition:
    """Edge-disjoint decomposition of a metric graph.

    ``subgraphs[i]`` lists the edge ids of subgraph ``i``.  The interface is
    the set of vertices belonging to two or more subgraphs; ``multiplicity``
    counts, per vertex, the number of subgraphs containing it.
    """

    graph: MetricGraph = field(repr=False)
    subgraphs: tuple[tuple[int, ...], ...]

    @cached_property
    def subgraph_of_edge(self) -> dict[int, int]:
        owner: dict[int, int] = {}
        for i, es in enumerate(self.subgraphs):
            for e in es:
                owner[e] = i
        return owner

    @cached_property
    def multiplicity(self) -> np.ndarray:
        count = np.zeros(self.graph.n_vertices, dtype=int)
        for es in self.subgraphs:
            verts: set[int] = set()
            for e in es:
                a, b = self.graph.endpoints(e)
                verts.add(a)
                verts.add(b)
            for v in verts:
                count[v] += 1
        return count

    @cached_property
    def interface(self) -> np.ndarray:
        """Sorted vertex ids shared by at least two subgraphs."""
        return np.flatnonzero(self.multiplicity >= 2)

    @cached_property
    def subgraph_vertices(self) -> tuple[tuple[int, ...], ...]:
        out = []
        for es in self.subgraphs:
            verts: set[int] = set()
            for e in es:
                a, b = self.graph.endpoints(e)
                verts.add(a)
                verts.add(b)
            out.append(tuple(sorted(verts)))
        return tuple(out)

    @property
    def n_subgraphs(self) -> int:
        return len(self.subgraphs)


def partition_by_edges(g: MetricGraph) -> Partition:
    """One subgraph per edge; the interface is every vertex of degree >= 2."""
    return Partition(graph=g, subgraphs=tuple((e,) for e in range(g.m)))


def validate_partition(g: MetricGraph, p: Partition) -> None:
    """Check edge-disjoint cover, subgraph connectivity, and the interface.

    Raises :class:`PartitionValidationError` with a machine-readable
    ``reason`` on the first violation found.
    """
    seen = np.zeros(g.m, dtype=int)
    for es in p.subgraphs:
        for e in es:
            if e < 0 or e >= g.m:
                raise PartitionValidationError("uncovered-edge", f"unknown edge id {e}")
            seen[e] += 1
    if (seen > 1).any():
        e = int(np.flatnonzero(seen > 1)[0])
        raise PartitionValidationError("duplicate-edge", f"edge {e} assigned to several subgraphs")
    if (seen == 0).any():
        e = int(np.flatnonzero(seen == 0)[0])
        raise PartitionValidationError("uncovered-edge", f"edge {e} not covered by any subgraph")
    for i, es in enumerate(p.subgraphs):
        if not _subgraph_connected(g, es):
            raise PartitionValidationError("disconnected-subgraph", f"subgraph {i} is not connected")
    mult = p.multiplicity
    gamma = set(int(v) for v in p.interface)
    expected = set(int(v) for v in np.flatnonzero(mult >= 2))
    if gamma != expected:
        raise PartitionValidationError(
            "interface-mismatch",
            f"interface {sorted(gamma)} inconsistent with multiplicities {sorted(expected)}",
        )


def _subgraph_connected(g: MetricGraph, edge_ids) -> bool:
    if not edge_ids:
        return False
    verts: set[int] = set()
    adj: dict[int, list[int]] = {}
    for e in edge_ids:
        a, b = g.endpoints(e)
        verts.update((a, b))
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    start = next(iter(verts))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == verts


# --- JSON graph files -------------------------------------------------------

def graph_to_dict(g: MetricGraph) -> dict:
    d = {
        "vertices": g.n_vertices,
        "edges": [{"from": a, "to": b, "length": l} for a, b, l in g.edges],
    }
    if g.meta is not None:
        d["meta"] = g.meta
    return d


def graph_from_dict(d: dict) -> MetricGraph:
    edges = [(e["from"], e["to"], e.get("length", 1.0)) for e in d["edges"]]
    g = build_graph(edges, meta=d.get("meta"))
    declared = d.get("vertices")
    if declared is not None and int(declared) != g.n_vertices:
        raise DisconnectedGraphError(
            f"file declares {declared} vertices but edges span {g.n_vertices}"
        )
    return g


def save_graph(g: MetricGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=1) + "\n")


def load_graph(path) -> MetricGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))
