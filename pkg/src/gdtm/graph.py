"""Graph representation of spring chains and adjacency-based aggregation.

Adjacency matrices follow the stiffness (Laplacian) pattern: off-diagonal
entries are ``-weight`` for each connecting spring and the diagonal holds the
sum of spring weights attached to the vertex, ground springs included. For a
uniform chain with stiffness ``k`` this gives ``K == k * A`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

HOMOGENEOUS = "homogeneous"
HETEROGENEOUS = "heterogeneous"


class GraphError(ValueError):
    """Invalid graph, adjacency, or aggregation input."""


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    type_label: int = 0
    weight: float = 1.0


@dataclass(frozen=True)
class Graph:
    """Vertices connected by typed, weighted springs.

    Every grounded vertex carries one spring to ground of type ``ground_type``
    with unit weight.
    """

    vertex_count: int
    edges: tuple[Edge, ...] = ()
    grounded_vertices: tuple[int, ...] = ()
    ground_type: int = 0

    def __post_init__(self):
        if self.vertex_count < 1:
            raise GraphError(f"vertex_count must be >= 1, got {self.vertex_count}")
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "grounded_vertices", tuple(self.grounded_vertices))
        seen = set()
        for e in self.edges:
            for idx in (e.i, e.j):
                if not 0 <= idx < self.vertex_count:
                    raise GraphError(f"edge index {idx} out of range")
            if e.i == e.j:
                raise GraphError(f"self-edge at vertex {e.i}")
            if not np.isfinite(e.weight):
                raise GraphError(f"non-finite weight on edge ({e.i}, {e.j})")
            key = (min(e.i, e.j), max(e.i, e.j), e.type_label)
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
        for g in self.grounded_vertices:
            if not 0 <= g < self.vertex_count:
                raise GraphError(f"grounded vertex {g} out of range")

    @property
    def type_labels(self) -> list[int]:
        labels = {e.type_label for e in self.edges}
        if self.grounded_vertices:
            labels.add(self.ground_type)
        return sorted(labels)

    def neighbors(self, i: int) -> list[int]:
        out = set()
        for e in self.edges:
            if e.i == i:
                out.add(e.j)
            elif e.j == i:
                out.add(e.i)
        return sorted(out)


def chain_graph(n: int, grounded: bool = True, types: Sequence[int] | None = None,
                weights: Sequence[float] | None = None) -> Graph:
    """Chain ``0 - 1 - ... - n-1`` with an optional ground spring at vertex 0.

    ``types`` and ``weights`` are per spring, ordered ground->0, 0->1, ...
    (length ``n`` when grounded, ``n - 1`` otherwise) and are cycled when
    shorter.
    """
    if n < 1:
        raise GraphError(f"chain needs at least one vertex, got {n}")
    n_springs = n if grounded else n - 1
    types = list(types) if types else [0]
    weights = list(weights) if weights else [1.0]
    spring_types = [types[s % len(types)] for s in range(n_springs)]
    spring_weights = [float(weights[s % len(weights)]) for s in range(n_springs)]
    offset = 1 if grounded else 0
    edges = tuple(
        Edge(i - 1, i, spring_types[i - 1 + offset], spring_weights[i - 1 + offset])
        for i in range(1, n)
    )
    if grounded:
        if spring_weights[0] != 1.0:
            raise GraphError("ground spring weight is fixed at 1; scale with scale_edges")
        return Graph(n, edges, (0,), ground_type=spring_types[0])
    return Graph(n, edges)


@dataclass(frozen=True)
class AdjacencySet:
    kind: str
    matrices: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        if self.kind not in (HOMOGENEOUS, HETEROGENEOUS):
            raise GraphError(f"unknown adjacency kind {self.kind!r}")
        mats = tuple(np.array(m, dtype=float) for m in self.matrices)
        if not mats:
            raise GraphError("adjacency set is empty")
        v = mats[0].shape[0]
        for m in mats:
            if m.shape != (v, v):
                raise GraphError(f"adjacency matrices must all be {v}x{v}, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise GraphError("adjacency entries must be finite")
            m.setflags(write=False)
        if self.kind == HOMOGENEOUS and len(mats) != 1:
            raise GraphError("homogeneous adjacency holds exactly one matrix")
        if self.kind == HETEROGENEOUS and not np.array_equal(mats[-1], np.eye(v)):
            raise GraphError("heterogeneous adjacency must end with the identity self matrix")
        object.__setattr__(self, "matrices", mats)

    @property
    def N(self) -> int:
        return len(self.matrices)

    @property
    def vertex_count(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def stacked(self) -> np.ndarray:
        return np.stack(self.matrices)

    @property
    def coupling_matrices(self) -> tuple[np.ndarray, ...]:
        """Matrices carrying spring couplings (the self matrix excluded)."""
        return self.matrices[:-1] if self.kind == HETEROGENEOUS else self.matrices


def _assemble(n: int, springs) -> np.ndarray:
    # springs: iterable of (i, j, w); j=None means a ground spring
    a = np.zeros((n, n))
    for i, j, w in springs:
        a[i, i] += w
        if j is not None:
            a[j, j] += w
            a[i, j] -= w
            a[j, i] -= w
    return a


def build_chain_adjacency(n: int, grounded: bool = True) -> AdjacencySet:
    if n < 1:
        raise GraphError(f"invalid chain size {n}")
    return homogeneous_adjacency(chain_graph(n, grounded))


def homogeneous_adjacency(graph: Graph) -> AdjacencySet:
    """Single stiffness-pattern matrix over all edges, types ignored."""
    springs = [(e.i, e.j, e.weight) for e in graph.edges]
    springs += [(g, None, 1.0) for g in graph.grounded_vertices]
    return AdjacencySet(HOMOGENEOUS, (_assemble(graph.vertex_count, springs),))


def build_heterogeneous_adjacency(graph: Graph) -> AdjacencySet:
    labels = graph.type_labels
    if not labels:
        raise GraphError("heterogeneous adjacency needs at least one edge type")
    mats = []
    for t in labels:
        springs = [(e.i, e.j, e.weight) for e in graph.edges if e.type_label == t]
        if graph.ground_type == t:
            springs += [(g, None, 1.0) for g in graph.grounded_vertices]
        mats.append(_assemble(graph.vertex_count, springs))
    mats.append(np.eye(graph.vertex_count))
    return AdjacencySet(HETEROGENEOUS, tuple(mats))


def aggregate(adj: AdjacencySet, features: np.ndarray) -> np.ndarray:
    """Aggregate ``(..., V, 2)`` features into ``(..., V, 2N)``.

    Columns ``2k`` and ``2k + 1`` hold ``A_k @ velocity`` and
    ``A_k @ displacement``.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim < 2 or features.shape[-2:] != (adj.vertex_count, 2):
        raise GraphError(
            f"features of shape {features.shape} do not match V={adj.vertex_count} x 2"
        )
    out = np.einsum("kij,...jf->...ikf", adj.stacked, features)
    return out.reshape(*features.shape[:-1], 2 * adj.N)


def spring_scale_matrix(n: int, factors: Sequence[float], grounded: bool = True) -> np.ndarray:
    """Per-entry scale matrix for a chain from per-spring factors.

    ``factors`` follow the spring ordering of :func:`chain_graph`. The ground
    spring factor sits on the diagonal.
    """
    factors = np.asarray(factors, dtype=float)
    expected = n if grounded else n - 1
    if factors.shape != (expected,):
        raise GraphError(f"expected {expected} spring factors, got {factors.shape}")
    s = np.ones((n, n))
    offset = 1 if grounded else 0
    if grounded:
        s[0, 0] = factors[0]
    for i in range(1, n):
        s[i - 1, i] = s[i, i - 1] = factors[i - 1 + offset]
    return s


def scale_edges(adj: AdjacencySet, scales) -> AdjacencySet:
    """Scale spring contributions of every coupling matrix.

    ``scales`` is a positive scalar or a symmetric ``V x V`` array. With an
    array, off-diagonal entry ``(i, j)`` scales the spring between ``i`` and
    ``j`` and diagonal entry ``(i, i)`` scales the ground spring at ``i``;
    diagonals are then rebuilt from the scaled springs. The heterogeneous
    self matrix is never scaled.
    """
    v = adj.vertex_count
    s = np.asarray(scales, dtype=float)
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        raise GraphError("scale factors must be positive and finite")
    if s.ndim == 0:
        scaled = [m * float(s) for m in adj.coupling_matrices]
    else:
        if s.shape != (v, v):
            raise GraphError(f"per-entry scales must be {v}x{v}, got {s.shape}")
        scaled = []
        for m in adj.coupling_matrices:
            off = m - np.diag(np.diag(m))
            ground = m.sum(axis=1)
            new_off = off * s
            new_off[np.diag_indices(v)] = 0.0
            scaled.append(new_off + np.diag(ground * np.diag(s) - new_off.sum(axis=1)))
    if adj.kind == HETEROGENEOUS:
        scaled.append(adj.matrices[-1])
    return AdjacencySet(adj.kind, tuple(scaled))


def load_graph(path) -> Graph:
    """Read a graph file of ``vertex_count=``, ``grounded=``, ``edge=`` lines.

    ``ground_type=<t>`` sets the ground spring type (default 0). Blank lines
    and ``#`` comments are skipped.
    """
    vertex_count = None
    grounded: list[int] = []
    ground_type = 0
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise GraphError(f"{path}:{lineno}: expected key=value")
        key, value = key.strip(), value.strip()
        try:
            if key == "vertex_count":
                vertex_count = int(value)
            elif key == "grounded":
                grounded = [int(x) for x in value.split(",") if x.strip()]
            elif key == "ground_type":
                ground_type = int(value)
            elif key == "edge":
                i, j, t, w = value.split(",")
                edges.append(Edge(int(i), int(j), int(t), float(w)))
            else:
                raise GraphError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphError(f"{path}:{lineno}: {exc}") from exc
    if vertex_count is None:
        raise GraphError(f"{path}: missing vertex_count")
    return Graph(vertex_count, tuple(edges), tuple(grounded), ground_type)


def save_graph(graph: Graph, path) -> None:
    lines = [f"vertex_count={graph.vertex_count}"]
    if graph.grounded_vertices:
        lines.append("grounded=" + ",".join(str(g) for g in graph.grounded_vertices))
        lines.append(f"ground_type={graph.ground_type}")
    lines += [f"edge={e.i},{e.j},{e.type_label},{e.weight!r}" for e in graph.edges]
    Path(path).write_text("\n".join(lines) + "\n")
