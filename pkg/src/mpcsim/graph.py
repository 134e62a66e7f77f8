"""Immutable edge-list graphs, deterministic generators, sparsity measures.

Vertices are 0..n-1.  Edges are stored once, as (min, max) pairs in
lexicographic order, so machine placement downstream is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from ._backend import kernels


class GraphParseError(ValueError):
    """Malformed edge-list input; message names the offending line."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: np.ndarray  # (m, 2) int64, canonical order
    _csr: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR adjacency (indptr, indices) with sorted neighbor lists."""
        if "indptr" not in self._csr:
            indptr, indices = build_csr(self.n, self.edges[:, 0], self.edges[:, 1])
            self._csr["indptr"] = indptr
            self._csr["indices"] = indices
        return self._csr["indptr"], self._csr["indices"]

    def degrees(self) -> np.ndarray:
        indptr, _ = self.adjacency()
        return np.diff(indptr)

    @property
    def max_degree(self) -> int:
        if self.n == 0:
            return 0
        return int(self.degrees().max())

    def neighbors(self, v: int) -> np.ndarray:
        indptr, indices = self.adjacency()
        return indices[indptr[v] : indptr[v + 1]]


@dataclass(frozen=True)
class HopBall:
    """The radius-t neighborhood of a center: induced subgraph + distances."""

    center: int
    radius: int
    vertices: np.ndarray  # sorted vertex ids
    dist: np.ndarray  # aligned with vertices
    edges: np.ndarray  # (k, 2) canonical, both endpoints inside

    @property
    def size_words(self) -> int:
        return len(self.vertices) + 2 * len(self.edges)


@dataclass(frozen=True)
class SparsityReport:
    degeneracy: int
    density_bound: float

    @property
    def arboricity_upper(self) -> int:
        """Degeneracy is itself an upper bound on arboricity."""
        return self.degeneracy

    @property
    def arboricity_lower(self) -> int:
        import math

        return max(1, math.ceil(self.density_bound - 1e-12)) if self.density_bound > 0 else 0


def build_csr(n: int, us: np.ndarray, vs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR over both edge directions with sorted neighbor lists."""
    heads = np.concatenate([us, vs])
    tails = np.concatenate([vs, us])
    order = np.lexsort((tails, heads))
    heads = heads[order]
    tails = tails[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(heads, minlength=n), out=indptr[1:])
    return indptr, tails.astype(np.int64)


def _canonicalize(n: int, pairs: np.ndarray) -> np.ndarray:
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    order = np.lexsort((hi, lo))
    out = np.stack([lo[order], hi[order]], axis=1).astype(np.int64)
    return out


def make_graph(n: int, pairs: Iterable[tuple[int, int]] | np.ndarray) -> Graph:
    """Validating constructor: rejects self-loops, duplicates, bad ids."""
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
    if arr.size == 0:
        arr = np.zeros((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if len(arr):
        if arr.min() < 0 or arr.max() >= n:
            raise ValueError(f"edge endpoint out of range for n={n}")
        if (arr[:, 0] == arr[:, 1]).any():
            raise ValueError("self-loop")
    canon = _canonicalize(n, arr)
    if len(canon) > 1:
        dup = (np.diff(canon[:, 0]) == 0) & (np.diff(canon[:, 1]) == 0)
        if dup.any():
            raise ValueError("duplicate edge")
    return Graph(n=n, edges=canon)


def load_edge_list(stream: IO[str] | str) -> Graph:
    """Parse the edge-list text format.

    One "u v" pair per line; '#' starts a comment line; an optional first
    data line "n <count>" overrides the vertex count (otherwise 1 + max id).
    """
    if isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = stream.read().splitlines()
    header_n = None
    pairs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    first_data = True
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if first_data and parts[0] == "n" and len(parts) == 2:
            try:
                header_n = int(parts[1])
            except ValueError:
                raise GraphParseError(f"line {lineno}: bad header {line!r}")
            if header_n < 0:
                raise GraphParseError(f"line {lineno}: negative vertex count")
            first_data = False
            continue
        first_data = False
        if len(parts) != 2:
            raise GraphParseError(f"line {lineno}: expected two integers, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(f"line {lineno}: expected two integers, got {line!r}")
        if u < 0 or v < 0:
            raise GraphParseError(f"line {lineno}: negative vertex id")
        if u == v:
            raise GraphParseError(f"line {lineno}: self-loop at vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphParseError(f"line {lineno}: duplicate edge ({u}, {v})")
        seen.add(key)
        pairs.append((u, v))
    n = 1 + max((max(p) for p in pairs), default=-1)
    if header_n is not None:
        if pairs and header_n < n:
            raise GraphParseError(f"header n={header_n} smaller than max vertex id")
        n = header_n
    return make_graph(n, pairs)


def dump_edge_list(g: Graph) -> str:
    lines = [f"n {g.n}"]
    lines.extend(f"{u} {v}" for u, v in g.edges.tolist())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# generators


def _prufer_tree(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random labeled tree via a Prüfer sequence."""
    if n <= 1:
        return np.zeros((0, 2), dtype=np.int64)
    if n == 2:
        return np.array([[0, 1]], dtype=np.int64)
    seq = rng.integers(0, n, size=n - 2)
    deg = np.ones(n, dtype=np.int64)
    for x in seq:
        deg[x] += 1
    import heapq

    leaves = [v for v in range(n) if deg[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(x)))
        deg[x] -= 1
        if deg[x] == 1:
            heapq.heappush(leaves, int(x))
    a = heapq.heappop(leaves)
    b = heapq.heappop(leaves)
    edges.append((a, b))
    return np.asarray(edges, dtype=np.int64)


def generate(family: str, *, seed: int = 0, **params) -> Graph:
    """Deterministic graph generators for the experiment families.

    tree(n) — uniform random tree; grid(rows, cols); forest_union(n, alpha)
    — union of alpha uniform spanning trees (degeneracy <= 2*alpha - 1);
    gnm(n, m) — m distinct random edges.
    """
    rng = np.random.default_rng(np.random.PCG64(seed))
    if family == "tree":
        n = int(params["n"])
        if n < 1:
            raise ValueError("tree requires n >= 1")
        return make_graph(n, _prufer_tree(n, rng))
    if family == "grid":
        rows = int(params["rows"])
        cols = int(params["cols"])
        if rows < 1 or cols < 1:
            raise ValueError("grid requires rows, cols >= 1")
        pairs = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    pairs.append((v, v + 1))
                if r + 1 < rows:
                    pairs.append((v, v + cols))
        return make_graph(rows * cols, pairs)
    if family == "forest_union":
        n = int(params["n"])
        alpha = int(params.get("alpha", 1))
        if n < 1 or alpha < 1:
            raise ValueError("forest_union requires n >= 1 and alpha >= 1")
        seen: set[tuple[int, int]] = set()
        pairs = []
        for _ in range(alpha):
            for u, v in _prufer_tree(n, rng):
                key = (min(u, v), max(u, v))
                if key not in seen:
                    seen.add(key)
                    pairs.append(key)
        return make_graph(n, pairs)
    if family == "gnm":
        n = int(params["n"])
        m = int(params["m"])
        cap = n * (n - 1) // 2
        if n < 1 or m < 0 or m > cap:
            raise ValueError("gnm requires n >= 1 and 0 <= m <= n(n-1)/2")
        seen = set()
        pairs = []
        while len(pairs) < m:
            us = rng.integers(0, n, size=2 * (m - len(pairs)) + 8)
            vs = rng.integers(0, n, size=len(us))
            for u, v in zip(us.tolist(), vs.tolist()):
                if u == v:
                    continue
                key = (min(u, v), max(u, v))
                if key in seen:
                    continue
                seen.add(key)
                pairs.append(key)
                if len(pairs) == m:
                    break
        return make_graph(n, pairs)
    raise ValueError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# sparsity and hop balls


def degeneracy(g: Graph) -> SparsityReport:
    indptr, indices = g.adjacency()
    d, density = kernels.peel_core(indptr, indices)
    return SparsityReport(degeneracy=int(d), density_bound=float(density))


def t_hop(g: Graph, v: int, t: int) -> HopBall:
    """Sequential t-hop oracle: exact induced ball by BFS."""
    if not (0 <= v < g.n):
        raise ValueError(f"vertex {v} out of range")
    if t < 0:
        raise ValueError("t must be >= 0")
    indptr, indices = g.adjacency()
    dist = kernels.bfs_dists(indptr, indices, v)
    inside = (dist >= 0) & (dist <= t)
    verts = np.nonzero(inside)[0].astype(np.int64)
    eu, ev = g.edges[:, 0], g.edges[:, 1]
    keep = inside[eu] & inside[ev]
    return HopBall(
        center=v,
        radius=t,
        vertices=verts,
        dist=dist[verts],
        edges=g.edges[keep],
    )
