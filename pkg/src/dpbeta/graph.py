"""Simple undirected labeled networks: storage, edge-list I/O and basic statistics."""

from __future__ import annotations

import io
from typing import BinaryIO, Iterable

import numpy as np


class EdgeListError(ValueError):
    """Raised when an edge-list stream cannot be parsed."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class Graph:
    """Immutable simple undirected graph on ``p`` nodes labeled ``0..p-1``.

    The adjacency is held as a dense symmetric boolean matrix with a zero
    diagonal. Released networks are dense (jittering switches on roughly a
    fraction ``alpha`` of all pairs), so a sparse layout would not pay off.
    """

    __slots__ = ("_adj",)

    def __init__(self, adj: np.ndarray, *, validate: bool = True):
        adj = np.asarray(adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] < 1:
            raise ValueError("graph needs at least one node")
        if validate:
            if adj.dtype != np.bool_:
                if not np.isin(adj, (0, 1)).all():
                    raise ValueError("adjacency entries must be 0 or 1")
            adj = adj.astype(bool, copy=True)
            if adj.diagonal().any():
                raise ValueError("self-loops are not allowed")
            if not np.array_equal(adj, adj.T):
                raise ValueError("adjacency must be symmetric")
        adj.flags.writeable = False
        self._adj = adj

    @classmethod
    def empty(cls, p: int) -> "Graph":
        return cls(np.zeros((p, p), dtype=bool), validate=False)

    @classmethod
    def complete(cls, p: int) -> "Graph":
        adj = ~np.eye(p, dtype=bool)
        return cls(adj, validate=False)

    @classmethod
    def from_edges(cls, p: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        adj = np.zeros((p, p), dtype=bool)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            adj[i, j] = adj[j, i] = True
        return cls(adj, validate=False)

    @classmethod
    def from_upper(cls, p: int, values: np.ndarray) -> "Graph":
        """Build from a 0/1 vector over pairs ``i<j`` in row-major order."""
        iu = np.triu_indices(p, 1)
        adj = np.zeros((p, p), dtype=bool)
        adj[iu] = values
        adj |= adj.T
        return cls(adj, validate=False)

    @property
    def p(self) -> int:
        return self._adj.shape[0]

    @property
    def adj(self) -> np.ndarray:
        """Read-only boolean adjacency matrix."""
        return self._adj

    def upper(self) -> np.ndarray:
        """Pair indicators for ``i<j`` in row-major order."""
        return self._adj[np.triu_indices(self.p, 1)]

    def edges(self) -> np.ndarray:
        """Array of shape (E, 2) holding ``(i, j)`` with ``i<j``, lexicographically sorted."""
        i, j = np.nonzero(np.triu(self._adj, 1))
        return np.column_stack([i, j])

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(self._adj)) // 2

    def permute(self, perm: np.ndarray) -> "Graph":
        """Relabel nodes so that new node ``k`` is old node ``perm[k]``."""
        perm = np.asarray(perm)
        return Graph(self._adj[np.ix_(perm, perm)], validate=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.p == other.p and bool(np.array_equal(self._adj, other._adj))

    def __hash__(self) -> int:
        return hash((self.p, np.packbits(self.upper()).tobytes()))

    def __repr__(self) -> str:
        return f"Graph(p={self.p}, edges={self.n_edges})"


def load_edge_list(source: BinaryIO | bytes | str) -> Graph:
    """Parse the ``p <count>`` / ``i j`` edge-list format.

    Duplicate and reversed pairs collapse onto one edge. Any malformed line,
    out-of-range index or self-loop raises :class:`EdgeListError` carrying
    the 1-based line number.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    lines = text.splitlines()
    p = None
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if p is None:
            if len(tokens) != 2 or tokens[0] != "p":
                raise EdgeListError(lineno, f"expected header 'p <count>', got {raw!r}")
            try:
                p = int(tokens[1])
            except ValueError:
                raise EdgeListError(lineno, f"bad node count {tokens[1]!r}") from None
            if p < 1:
                raise EdgeListError(lineno, "node count must be positive")
            continue
        if len(tokens) != 2:
            raise EdgeListError(lineno, f"expected 'i j', got {raw!r}")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListError(lineno, f"non-integer node index in {raw!r}") from None
        if not (0 <= i < p and 0 <= j < p):
            raise EdgeListError(lineno, f"node index out of range [0, {p})")
        if i == j:
            raise EdgeListError(lineno, f"self-loop at node {i}")
        edges.append((i, j))
    if p is None:
        raise EdgeListError(max(len(lines), 1), "missing header 'p <count>'")
    return Graph.from_edges(p, edges)


def save_edge_list(g: Graph) -> bytes:
    """Canonical serialization: header, then ``i j`` with ``i<j`` in lexicographic order."""
    buf = io.StringIO()
    buf.write(f"p {g.p}\n")
    e = g.edges()
    if len(e):
        buf.write("\n".join(f"{i} {j}" for i, j in e.tolist()))
    return buf.getvalue().encode("utf-8")


def hamming_distance(x: Graph, y: Graph) -> int:
    """Number of unordered pairs on which ``x`` and ``y`` disagree."""
    if x.p != y.p:
        raise ValueError(f"size mismatch: {x.p} vs {y.p}")
    return int(np.count_nonzero(x.adj != y.adj)) // 2


def degrees(g: Graph) -> np.ndarray:
    return g.adj.sum(axis=1, dtype=np.int64)
