"""O(1)-round communication primitives on the simulated cluster.

Separable-function neighborhood aggregation (tree-folded with a seeded,
load-balanced combiner assignment), degree computation, and exponential-
growth hop collection.  ``GraphContext`` owns the cluster-side placement
metadata (vertex responsibility map, edge-host subscriptions) that the
paper treats as cheap replicated state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .graph import Graph, HopBall
from .runtime import (
    BallOverflowFault,
    CapacityError,
    Cluster,
    ClusterConfig,
    init_cluster,
)

UMAX = np.uint64(0xFFFFFFFFFFFFFFFF)


# ---------------------------------------------------------------------------
# separable functions


@dataclass(frozen=True)
class SeparableFn:
    """f with f(A) = f(f(B), f(A\\B)) for every split of A.

    ``kind`` selects a vectorized fold; ``combine`` is the scalar form used
    by the generic path and by property tests.  ``lift`` maps a neighbor's
    payload to the folded value domain.
    """

    name: str
    identity: int
    combine: object  # (value, value) -> value
    kind: str = "custom"  # sum | min | max | custom
    lift: object = None

    def fold(self, values):
        acc = self.identity
        for x in values:
            acc = self.combine(acc, x)
        return acc


FN_SUM = SeparableFn("sum", 0, lambda a, b: a + b, kind="sum")
FN_MIN = SeparableFn("min", (1 << 62), lambda a, b: min(a, b), kind="min")
FN_MAX = SeparableFn("max", 0, lambda a, b: max(a, b), kind="max")


@dataclass(frozen=True)
class LoadBalanceParams:
    partitions: int
    sigma: float
    seed: int
    n: int
    slack: float = 4.0  # c_lb in the published bound

    def __post_init__(self):
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")
        if not (0 < self.sigma < 1):
            raise ValueError("sigma must be in (0, 1)")


def balanced_partition(weights, params: LoadBalanceParams) -> np.ndarray:
    """Assign weighted items to partitions (rank-grouped seeded hashing).

    Items are rank-grouped into ``p`` descending weight classes, then spread
    by a hash seeded with O(log p) bits; with high probability each
    partition's load is within ``load_bound``.
    """
    w = np.asarray(weights, dtype=np.float64)
    bound = float(params.n) ** params.sigma
    if len(w) and (w.min() <= 1.0 or w.max() >= bound):
        raise ValueError(f"weights must lie in (1, n^sigma) = (1, {bound:.3g})")
    p = params.partitions
    if p == 1:
        return np.zeros(len(w), dtype=np.int64)
    # rank grouping is what makes the per-partition bound hold; the hash
    # itself acts per item
    order = np.argsort(-w, kind="stable")
    ranks = np.empty(len(w), dtype=np.int64)
    ranks[order] = np.arange(len(w))
    seed_bits = 2 * max(1, math.ceil(math.log2(p))) + 1
    seed = params.seed & ((1 << seed_bits) - 1)
    h = kernels.tape_chunks(seed, np.arange(len(w), dtype=np.int64), 0x1B)
    return (h % np.uint64(p)).astype(np.int64)


def load_bound(weights, params: LoadBalanceParams) -> float:
    total = float(np.sum(weights))
    return params.slack * (total / params.partitions + params.n**params.sigma) * max(
        1.0, math.log2(params.partitions)
    )


# ---------------------------------------------------------------------------
# graph context: placement metadata


@dataclass
class GraphContext:
    """A graph placed on a cluster, plus the replicated routing metadata."""

    cluster: Cluster
    g: Graph
    seed: int
    resp: np.ndarray = field(default=None)  # vertex -> responsible machine
    version: int = 0
    _cache: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def config(self) -> ClusterConfig:
        return self.cluster.config

    def invalidate(self) -> None:
        self.version += 1
        self._cache.clear()

    # -- active-edge views --------------------------------------------------

    def active_edges(self):
        key = "act"
        if key not in self._cache:
            c = self.cluster
            idx = np.nonzero(c.edge_active)[0]
            self._cache[key] = (c.edge_u[idx], c.edge_v[idx], idx)
        return self._cache[key]

    def active_edge_count(self) -> int:
        return int(self.cluster.edge_active.sum())

    def subscriptions(self):
        """Distinct (vertex, host) pairs over active edges, sorted."""
        key = "subs"
        if key not in self._cache:
            eu, ev, idx = self.active_edges()
            host = self.cluster.edge_host[idx]
            vert = np.concatenate([eu, ev])
            mach = np.concatenate([host, host])
            pairs = np.unique(np.stack([vert, mach], axis=1), axis=0)
            self._cache[key] = (pairs[:, 0], pairs[:, 1])
        return self._cache[key]

    def csr(self, vertex_ok: np.ndarray | None = None):
        """CSR incidence over active edges restricted to allowed vertices.

        Returns (vids, indptr, nbr_ids, eidx): vids are the vertices with the
        restriction applied (all n when None), eidx maps incidence slots to
        global edge indices.
        """
        key = ("csr", None if vertex_ok is None else vertex_ok.tobytes())
        if key not in self._cache:
            eu, ev, idx = self.active_edges()
            if vertex_ok is not None:
                keep = vertex_ok[eu] & vertex_ok[ev]
                eu, ev, idx = eu[keep], ev[keep], idx[keep]
                vids = np.nonzero(vertex_ok)[0].astype(np.int64)
            else:
                vids = np.arange(self.n, dtype=np.int64)
            heads = np.concatenate([eu, ev])
            tails = np.concatenate([ev, eu])
            eidx = np.concatenate([idx, idx])
            order = np.lexsort((tails, heads))
            heads, tails, eidx = heads[order], tails[order], eidx[order]
            pos = np.searchsorted(vids, heads)
            indptr = np.zeros(len(vids) + 1, dtype=np.int64)
            np.cumsum(np.bincount(pos, minlength=len(vids)), out=indptr[1:])
            self._cache[key] = (vids, indptr, tails, eidx)
        return self._cache[key]

    def prune_edges(self, drop_mask: np.ndarray) -> None:
        """Deactivate edges (decided or incident to decided vertices)."""
        c = self.cluster
        hit = c.edge_active & drop_mask
        if hit.any():
            c.edge_active = c.edge_active & ~drop_mask
            m = self.config.machine_count
            c.set_space(
                "edges",
                2 * np.bincount(c.edge_host[c.edge_active], minlength=m).astype(np.int64),
            )
            c.record_space()
            self.invalidate()


def attach_context(cluster: Cluster, g: Graph, seed: int = 0) -> GraphContext:
    """Build the responsibility map (degree-balanced, measured retry)."""
    ctx = GraphContext(cluster=cluster, g=g, seed=seed)
    cfg = cluster.config
    m = cfg.machine_count
    deg = g.degrees() if g.n else np.zeros(0, dtype=np.int64)
    cap_w = max(4.0, float(g.n) ** 0.9)
    w = np.minimum(deg, cap_w - 2).astype(np.float64) + 1.5
    params = LoadBalanceParams(partitions=m, sigma=0.95, seed=seed, n=max(g.n, 4))
    budget = max(2, cfg.machine_space // 4)
    best = None
    best_load = None
    for attempt in range(8):
        resp = balanced_partition(w, LoadBalanceParams(
            partitions=m, sigma=params.sigma, seed=seed + attempt, n=params.n))
        load = np.bincount(resp, weights=(deg + 3).astype(np.float64), minlength=m)
        worst = float(load.max()) if m else 0.0
        if best_load is None or worst < best_load:
            best, best_load = resp, worst
        if worst <= budget:
            break
    if best_load is not None and best_load > cfg.machine_space // 2:
        raise CapacityError(
            f"responsibility map load {int(best_load)} exceeds half of machine space"
        )
    ctx.resp = best if best is not None else np.zeros(0, dtype=np.int64)
    # vertex state shard: ids + status at responsible machines
    if g.n:
        cluster.set_space("vstate", 2 * np.bincount(ctx.resp, minlength=m).astype(np.int64))
    cluster.record_space()
    return ctx


def mpc_context(
    g: Graph,
    epsilon: float = 0.5,
    space_coefficient: float = 8.0,
    seed: int = 0,
    extra_words: int = 0,
    strict: bool | None = None,
) -> GraphContext:
    cfg = ClusterConfig.for_graph(
        g, epsilon=epsilon, space_coefficient=space_coefficient,
        extra_words=extra_words, strict=strict,
    )
    cluster = init_cluster(cfg, g)
    return attach_context(cluster, g, seed=seed)


# ---------------------------------------------------------------------------
# neighborhood aggregation


def aggregate_neighbors(
    ctx: GraphContext,
    values: np.ndarray,
    fn: SeparableFn,
    vertex_ok: np.ndarray | None = None,
) -> np.ndarray:
    """result[v] = fn over {values[u] : u ~ v} on active edges, in O(1/ε) rounds.

    Isolated (or fully masked) vertices get the declared identity.  The
    multi-level combine tree reduces per-vertex partial counts by the
    machine fan-in each level.
    """
    n = ctx.n
    out = np.full(n, fn.identity, dtype=np.int64)
    eu, ev, idx = ctx.active_edges()
    if vertex_ok is not None and len(eu):
        keep = vertex_ok[eu] & vertex_ok[ev]
        eu, ev, idx = eu[keep], ev[keep], idx[keep]
    if len(eu) == 0:
        return out
    host = ctx.cluster.edge_host[idx]
    values = np.asarray(values, dtype=np.int64)

    # round 1: responsible machines scatter values to subscribed edge hosts
    sub_v, sub_h = ctx.subscriptions()
    with ctx.cluster.round("agg-scatter") as rd:
        rd.send(ctx.resp[sub_v], sub_h, np.ones(len(sub_v), dtype=np.int64))

    # host-local fold: partials per (vertex, host) for both edge directions
    pv = np.concatenate([eu, ev])
    pm = np.concatenate([host, host])
    pval = np.concatenate([values[ev], values[eu]])
    if fn.lift is not None:
        pval = fn.lift(pval)
    pv, pm, pval = _local_fold(fn, pv, pm, pval)

    m = ctx.config.machine_count
    fan_in = max(2, ctx.config.machine_space // 8)
    level = 0
    while True:
        counts = np.bincount(pv, minlength=n)
        qmax = counts.max() if len(counts) else 0
        if qmax <= 1:
            break
        order = np.lexsort((pm, pv))
        pv, pm, pval = pv[order], pm[order], pval[order]
        starts = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=starts[1:])
        rank = np.arange(len(pv)) - starts[pv]
        bucket = rank // fan_in
        comb_seed = kernels.mix3(ctx.seed, 0xA66, level)
        dest = (
            kernels.tape_chunks(comb_seed, pv * np.int64(1 << 20) + bucket, 0x2C)
            % np.uint64(m)
        ).astype(np.int64)
        with ctx.cluster.round(f"agg-level{level}") as rd:
            rd.send(pm, dest, np.ones(len(pv), dtype=np.int64))
        pm = dest
        pv, pm, pval = _local_fold(fn, pv, pm, pval, key2=pm)
        level += 1
        if level > 64:
            raise RuntimeError("aggregation failed to converge")

    # final delivery to responsible machines
    with ctx.cluster.round("agg-final") as rd:
        rd.send(pm, ctx.resp[pv], np.ones(len(pv), dtype=np.int64))
    out[pv] = pval
    return out


def _local_fold(fn: SeparableFn, pv, pm, pval, key2=None):
    """Fold partials sharing (vertex, machine-or-bucket) into one row."""
    order = np.lexsort((pm, pv))
    pv, pm, pval = pv[order], pm[order], pval[order]
    new_group = np.ones(len(pv), dtype=bool)
    if len(pv) > 1:
        new_group[1:] = (pv[1:] != pv[:-1]) | (pm[1:] != pm[:-1])
    starts = np.nonzero(new_group)[0]
    if fn.kind == "sum":
        red = np.add.reduceat(pval, starts)
    elif fn.kind == "min":
        red = np.minimum.reduceat(pval, starts)
    elif fn.kind == "max":
        red = np.maximum.reduceat(pval, starts)
    else:
        red = np.empty(len(starts), dtype=np.int64)
        bounds = np.append(starts, len(pv))
        for i in range(len(starts)):
            acc = fn.identity
            for j in range(bounds[i], bounds[i + 1]):
                acc = fn.combine(acc, pval[j])
            red[i] = acc
    return pv[starts], pm[starts], red


def compute_degrees(ctx: GraphContext, vertex_ok: np.ndarray | None = None) -> np.ndarray:
    """Exact degrees over active edges via the sum aggregation."""
    ones = np.ones(ctx.n, dtype=np.int64)
    return aggregate_neighbors(ctx, ones, FN_SUM, vertex_ok=vertex_ok)


# ---------------------------------------------------------------------------
# exponential-growth hop collection


class _Ball:
    __slots__ = ("center", "verts", "dist", "eu", "ev", "have", "done", "saturated", "home")

    def __init__(self, center: int):
        self.center = center
        self.home = 0
        self.verts = np.array([center], dtype=np.int64)
        self.dist = np.array([0], dtype=np.int64)
        self.eu = np.zeros(0, dtype=np.int64)
        self.ev = np.zeros(0, dtype=np.int64)
        self.have = np.zeros(1, dtype=bool)
        self.done = False
        self.saturated = False

    def words(self, member_words: int = 1) -> int:
        return member_words * len(self.verts) + 2 * len(self.eu)


def _ball_refresh(ball: _Ball, t: int, new_eu, new_ev, new_have_ids) -> None:
    """Merge incoming edges/N-lists, re-BFS, prune beyond radius t."""
    eu = np.concatenate([ball.eu, new_eu])
    ev = np.concatenate([ball.ev, new_ev])
    if len(eu):
        pairs = np.unique(np.stack([eu, ev], axis=1), axis=0)
        eu, ev = pairs[:, 0], pairs[:, 1]
    have_ids = np.unique(
        np.concatenate([ball.verts[ball.have], np.asarray(new_have_ids, dtype=np.int64)])
    )
    verts = np.unique(np.concatenate([ball.verts, eu, ev]))
    pos_u = np.searchsorted(verts, eu)
    pos_v = np.searchsorted(verts, ev)
    nloc = len(verts)
    heads = np.concatenate([pos_u, pos_v])
    tails = np.concatenate([pos_v, pos_u])
    order = np.argsort(heads, kind="stable")
    heads, tails = heads[order], tails[order]
    indptr = np.zeros(nloc + 1, dtype=np.int64)
    np.cumsum(np.bincount(heads, minlength=nloc), out=indptr[1:])
    src = int(np.searchsorted(verts, ball.center))
    dist = kernels.bfs_dists(indptr, tails, src)
    keep = (dist >= 0) & (dist <= t)
    kept = verts[keep]
    ball.verts = kept
    ball.dist = dist[keep]
    ball.have = np.isin(kept, have_ids, assume_unique=True)
    ekeep = keep[pos_u] & keep[pos_v]
    ball.eu, ball.ev = eu[ekeep], ev[ekeep]
    ball.done = bool(ball.have.all())


def collect_balls(
    ctx: GraphContext,
    centers: np.ndarray,
    t: int,
    per_ball_budget: int,
    member_words: int = 1,
    adaptive: bool = False,
    vertex_ok: np.ndarray | None = None,
) -> dict[int, _Ball]:
    """Doubling hop collection; each finished ball is the exact t-hop.

    Members that are themselves centers contribute their whole gathered
    ball per merge (radius doubling); other members' incident edge lists
    are pulled from their hosts (+1 radius per merge).  Over budget: fault,
    or mark the ball saturated when ``adaptive`` (the control signal used
    by the space-optimized pipeline).
    """
    centers = np.unique(np.asarray(centers, dtype=np.int64))
    balls = {int(c): _Ball(int(c)) for c in centers.tolist()}
    cluster = ctx.cluster
    m = ctx.config.machine_count
    eu, ev, idx = ctx.active_edges()
    if vertex_ok is not None and len(eu):
        keep = vertex_ok[eu] & vertex_ok[ev]
        eu, ev, idx = eu[keep], ev[keep], idx[keep]
    host = cluster.edge_host[idx]
    is_center = np.zeros(ctx.n, dtype=bool)
    if len(centers):
        is_center[centers] = True
    # dedicated collection responsibility: spread centers evenly so ball
    # storage never concentrates (the assignment is replicated metadata)
    home = np.full(ctx.n, -1, dtype=np.int64)
    home[centers] = np.arange(len(centers), dtype=np.int64) % m
    for c in centers.tolist():
        balls[int(c)].home = int(home[c])
    # local incidence index for fringe pulls: vertex -> slots in (eu, ev)
    heads = np.concatenate([eu, ev])
    slot_edge = np.concatenate([np.arange(len(eu)), np.arange(len(eu))])
    horder = np.argsort(heads, kind="stable")
    heads_sorted = heads[horder]
    slot_edge = slot_edge[horder]
    vert_ptr = np.searchsorted(heads_sorted, np.arange(ctx.n + 1))

    def _incident(x: int):
        return slot_edge[vert_ptr[x] : vert_ptr[x + 1]]

    def _account():
        words = np.zeros(m, dtype=np.int64)
        for b in balls.values():
            words[b.home] += b.words(member_words)
        cluster.set_space("balls", words)
        cluster.record_space()

    if t == 0:
        for b in balls.values():
            b.done = True
        _account()
        return balls

    # round 1: hosts ship each center's incident edges to its machine
    sel_u = is_center[eu]
    sel_v = is_center[ev]
    cluster.multiround_send(
        np.concatenate([host[sel_u], host[sel_v]]),
        np.concatenate([home[eu[sel_u]], home[ev[sel_v]]]),
        2 * np.ones(int(sel_u.sum()) + int(sel_v.sum()), dtype=np.int64),
        "hop-scatter",
    )
    for c, b in balls.items():
        slots = _incident(c)
        _ball_refresh(b, t, eu[slots], ev[slots], [c])
        _check_budget(b, per_ball_budget, member_words, adaptive)
    _account()

    max_steps = max(1, math.ceil(math.log2(max(t, 2)))) + t + 2
    for _ in range(max_steps):
        wanted: list[tuple[_Ball, np.ndarray]] = []
        req_src, req_dst = [], []
        for b in balls.values():
            if b.done or b.saturated:
                continue
            need = b.verts[~b.have]
            if len(need) == 0:
                b.done = True
                continue
            wanted.append((b, need))
            cen = is_center[need]
            dsts = np.where(cen, home[need], ctx.resp[need]).astype(np.int64)
            req_src.append(np.full(len(need), b.home, dtype=np.int64))
            req_dst.append(dsts)
        if not wanted:
            break
        cluster.multiround_send(
            np.concatenate(req_src),
            np.concatenate(req_dst),
            np.ones(sum(len(x) for x in req_src), dtype=np.int64),
            "hop-request",
        )
        rsp_src, rsp_dst, rsp_words = [], [], []
        # snapshot payloads before any refresh: all requesters must see the
        # pre-round contents
        payload_cache: dict[int, tuple] = {}
        for _, need in wanted:
            for x in need.tolist():
                if x in payload_cache:
                    continue
                if is_center[x]:
                    bx = balls[x]
                    payload_cache[x] = (
                        bx.eu, bx.ev, bx.verts[bx.have], ((bx.home, bx.words(1)),)
                    )
                else:
                    slots = _incident(x)
                    hosts, cnts = np.unique(host[slots], return_counts=True)
                    rows = tuple(zip(hosts.tolist(), (2 * cnts).tolist()))
                    payload_cache[x] = (
                        eu[slots], ev[slots], np.array([x], dtype=np.int64), rows
                    )

        def _payload(x: int):
            return payload_cache[x]

        for b, need in wanted:
            add_eu, add_ev = [b.eu[:0]], [b.ev[:0]]
            add_have = [b.verts[b.have]]
            dst = b.home
            for x in need.tolist():
                p_eu, p_ev, p_have, rows = _payload(x)
                add_eu.append(p_eu)
                add_ev.append(p_ev)
                add_have.append(p_have)
                for src_m, w in rows:
                    rsp_src.append(src_m)
                    rsp_dst.append(dst)
                    rsp_words.append(w)
            _ball_refresh(
                b, t, np.concatenate(add_eu), np.concatenate(add_ev), np.concatenate(add_have)
            )
            _check_budget(b, per_ball_budget, member_words, adaptive)
        cluster.multiround_send(
            np.array(rsp_src, dtype=np.int64),
            np.array(rsp_dst, dtype=np.int64),
            np.array(rsp_words, dtype=np.int64),
            "hop-response",
        )
        _account()
    return balls


def _check_budget(b: _Ball, budget: int, member_words: int, adaptive: bool) -> None:
    if budget and b.words(member_words) > budget:
        if adaptive:
            b.saturated = True
        else:
            raise BallOverflowFault(b.center, b.words(member_words), budget)


def collect_hops(
    ctx: GraphContext, centers, t: int, per_ball_budget: int = 0
) -> dict[int, HopBall]:
    """Public form: center -> exact HopBall (equals the t_hop oracle)."""
    balls = collect_balls(ctx, np.asarray(centers, dtype=np.int64), t, per_ball_budget)
    out = {}
    for c, b in balls.items():
        order = np.argsort(b.verts)
        pairs = np.stack([np.minimum(b.eu, b.ev), np.maximum(b.eu, b.ev)], axis=1)
        if len(pairs):
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        out[c] = HopBall(
            center=c, radius=t, vertices=b.verts[order], dist=b.dist[order], edges=pairs
        )
    return out
