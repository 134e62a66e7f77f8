"""State-congested local rules: direct simulation, replay, round compression.

A rule updates one word per vertex and per edge each round; vertex updates
see the previous states of incident edges plus a per-vertex random tape,
edge updates see their endpoints.  ``simulate_direct`` advances the whole
graph one MPC round per local round and is the equivalence oracle for
``blind_coordinate``, which replays the rule inside pre-collected hop balls
and broadcasts refreshed states between epochs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .graph import HopBall
from .primitives import GraphContext, collect_balls
from .runtime import RuleViolationFault

M48 = kernels.M48
TAG_SHIFT = kernels.TAG_SHIFT
VT_MIS = kernels.VT_MIS
VT_REMOVED = kernels.VT_REMOVED
VT_MATCHED = kernels.VT_MATCHED
ET_MATCHED = kernels.ET_MATCHED

_ID_LIMIT = 1 << 24  # edge initial state packs both endpoint ids in one word


@dataclass(frozen=True)
class LocalRule:
    """One state-congested local algorithm.

    Built-in rules carry a ``kernel`` id and run vectorized; custom rules
    provide ``vertex_fn(v, own, incident, tape, r)`` and
    ``edge_fn(u, v, su, sv, se, r)`` returning new one-word states
    (``incident`` is a list of (u, v, edge_state) triples).
    """

    name: str
    cycle: int
    kernel: int | None = None
    p_int: tuple = ()
    p_float: tuple = ()
    vertex_fn: object = None
    edge_fn: object = None
    tape_chunks_per_cycle: int = 1
    dead_exclusion_safe: bool = False

    def params(self):
        return (
            np.asarray(self.p_int or (0,), dtype=np.int64),
            np.asarray(self.p_float or (0.0,), dtype=np.float64),
        )

    def tape_chunks_needed(self, rounds: int) -> int:
        return self.tape_chunks_per_cycle * (rounds // self.cycle + 2)


@dataclass
class StateVector:
    """Vertex and edge state words after a given number of rule rounds."""

    round: int
    vids: np.ndarray
    vstates: np.ndarray
    eids: np.ndarray  # global edge indices (into the cluster placement)
    estates: np.ndarray
    eu: np.ndarray
    ev: np.ndarray

    def same_as(self, other: "StateVector") -> bool:
        return (
            self.round == other.round
            and np.array_equal(self.vids, other.vids)
            and np.array_equal(self.vstates, other.vstates)
            and np.array_equal(self.eids, other.eids)
            and np.array_equal(self.estates, other.estates)
        )

    def vertex_state(self, v: int) -> int:
        i = int(np.searchsorted(self.vids, v))
        if i >= len(self.vids) or self.vids[i] != v:
            raise KeyError(v)
        return int(self.vstates[i])

    def vertex_tags(self) -> np.ndarray:
        return (self.vstates >> np.uint64(TAG_SHIFT)).astype(np.int64)

    def edge_tags(self) -> np.ndarray:
        return (self.estates >> np.uint64(TAG_SHIFT)).astype(np.int64)


def initial_states(vids: np.ndarray, eu: np.ndarray, ev: np.ndarray):
    """Round-0 states: a vertex's id; an edge's endpoint-id pair (packed)."""
    if len(vids) and int(vids.max()) >= _ID_LIMIT:
        raise ValueError("vertex ids exceed the packed edge-state range")
    vst = vids.astype(np.uint64)
    est = (eu.astype(np.uint64) << np.uint64(24)) | ev.astype(np.uint64)
    return vst, est


def _check_word(x: int) -> int:
    if not (0 <= x < (1 << 64)):
        raise RuleViolationFault(f"state {x} exceeds one word")
    return x


def _custom_rounds(rule, seed, vids, vst, indptr, nbrs, ecsr_idx, eu_loc, ev_loc,
                   est, r0, r1):
    eu = vids[eu_loc]
    ev = vids[ev_loc]
    for r in range(r0 + 1, r1 + 1):
        it = (r - 1) // rule.cycle
        su = vst[eu_loc]
        sv = vst[ev_loc]
        new_est = est.copy()
        for i in range(len(est)):
            new_est[i] = _check_word(
                rule.edge_fn(int(eu[i]), int(ev[i]), int(su[i]), int(sv[i]), int(est[i]), r)
            )
        new_vst = vst.copy()
        for i in range(len(vids)):
            inc = [
                (int(eu[ecsr_idx[j]]), int(ev[ecsr_idx[j]]), int(est[ecsr_idx[j]]))
                for j in range(indptr[i], indptr[i + 1])
            ]
            tape = kernels.mix3(seed, int(vids[i]), it)
            new_vst[i] = _check_word(
                rule.vertex_fn(int(vids[i]), int(vst[i]), inc, tape, r)
            )
        vst, est = new_vst.astype(np.uint64), new_est.astype(np.uint64)
    return vst, est


def _advance(rule, seed, vids, vst, indptr, nbrs, ecsr_idx, eu_loc, ev_loc, est, r0, r1):
    if rule.kernel is not None:
        p_int, p_float = rule.params()
        return kernels.replay_rounds(
            rule.kernel, p_int, p_float, seed, vids, vst, indptr, nbrs,
            ecsr_idx, eu_loc, ev_loc, est, r0, r1,
        )
    return _custom_rounds(
        rule, seed, vids, vst, indptr, nbrs, ecsr_idx, eu_loc, ev_loc, est, r0, r1
    )


def _layout(ctx: GraphContext, vertex_ok):
    vids, indptr, nbrs, eidx = ctx.csr(vertex_ok)
    sub = np.unique(eidx) if len(eidx) else np.zeros(0, dtype=np.int64)
    eu = ctx.cluster.edge_u[sub]
    ev = ctx.cluster.edge_v[sub]
    ecsr_idx = np.searchsorted(sub, eidx)
    eu_loc = np.searchsorted(vids, eu)
    ev_loc = np.searchsorted(vids, ev)
    return vids, indptr, nbrs, sub, ecsr_idx, eu, ev, eu_loc, ev_loc


def simulate_direct(
    ctx: GraphContext,
    rule: LocalRule,
    r: int,
    seed: int,
    vertex_ok: np.ndarray | None = None,
) -> StateVector:
    """Reference semantics: one MPC exchange per local round.

    Edge states live with the smaller endpoint's responsible machine; each
    round, homes and responsible machines swap the states the transitions
    need, then both sides step.
    """
    vids, indptr, nbrs, sub, ecsr_idx, eu, ev, eu_loc, ev_loc = _layout(ctx, vertex_ok)
    vst, est = initial_states(vids, eu, ev)
    if r > 0 and len(vids):
        resp = ctx.resp
        home = resp[np.minimum(eu, ev)]
        src = np.concatenate([home, home, resp[eu], resp[ev]])
        dst = np.concatenate([resp[eu], resp[ev], home, home])
        words = np.ones(len(src), dtype=np.int64)
        # per-vertex/edge state words at their owners
        msp = ctx.config.machine_count
        ctx.cluster.set_space(
            "rulestate",
            np.bincount(resp[vids], minlength=msp).astype(np.int64)
            + np.bincount(home, minlength=msp).astype(np.int64),
        )
        for k in range(r):
            ctx.cluster.multiround_send(src, dst, words, f"{rule.name}-round{k + 1}")
            vst, est = _advance(
                rule, seed, vids, vst, indptr, nbrs, ecsr_idx, eu_loc, ev_loc,
                est, k, k + 1,
            )
        ctx.cluster.drop_space("rulestate")
        ctx.cluster.record_space()
    return StateVector(
        round=r, vids=vids, vstates=vst, eids=sub, estates=est, eu=eu, ev=ev
    )


def local_replay(
    rule: LocalRule,
    ball: HopBall,
    base_vstates: np.ndarray,
    base_estates: np.ndarray,
    seed: int,
    base_round: int,
    i: int,
):
    """Replay i rounds inside a stored ball; returns the center's state and
    its incident edges' states, all without communication.

    ``base_*`` must be the globally correct states at ``base_round`` aligned
    with ``ball.vertices`` / ``ball.edges``.
    """
    if i < 0 or i > ball.radius:
        raise ValueError(f"replay depth {i} outside ball radius {ball.radius}")
    vids = ball.vertices
    eu = ball.edges[:, 0] if len(ball.edges) else np.zeros(0, dtype=np.int64)
    ev = ball.edges[:, 1] if len(ball.edges) else np.zeros(0, dtype=np.int64)
    indptr, nbrs, ecsr_idx = _ball_csr(vids, eu, ev)
    eu_loc = np.searchsorted(vids, eu)
    ev_loc = np.searchsorted(vids, ev)
    vst, est = _advance(
        rule, seed, vids, np.asarray(base_vstates, dtype=np.uint64), indptr, nbrs,
        ecsr_idx, eu_loc, ev_loc, np.asarray(base_estates, dtype=np.uint64),
        base_round, base_round + i,
    )
    c = int(np.searchsorted(vids, ball.center))
    incident = (eu == ball.center) | (ev == ball.center)
    return int(vst[c]), est[incident]


def _ball_csr(vids, eu, ev):
    pos_u = np.searchsorted(vids, eu)
    pos_v = np.searchsorted(vids, ev)
    heads = np.concatenate([pos_u, pos_v])
    nbrs = np.concatenate([ev, eu])
    eidx = np.concatenate([np.arange(len(eu)), np.arange(len(eu))])
    order = np.lexsort((nbrs, heads))
    heads, nbrs, eidx = heads[order], nbrs[order], eidx[order]
    indptr = np.zeros(len(vids) + 1, dtype=np.int64)
    np.cumsum(np.bincount(heads, minlength=len(vids)), out=indptr[1:])
    return indptr, nbrs, eidx


def pick_hop_radius(n: int, epsilon: float, delta: int) -> int:
    """t = floor((eps/3) * log_delta(n)), clamped to at least 1."""
    d = max(int(delta), 2)
    return max(1, int((epsilon / 3.0) * math.log(max(n, 2)) / math.log(d)))


def blind_coordinate(
    ctx: GraphContext,
    rule: LocalRule,
    r: int,
    seed: int,
    delta: int,
    hop_radius: int | None = None,
    vertex_ok: np.ndarray | None = None,
    centers: np.ndarray | None = None,
    ball_budget: int | None = None,
) -> StateVector:
    """Compute round-r states in ~2·ceil(r/t) + O(log t) MPC rounds.

    Collects t-hops once, then alternates in-machine replay of up to t
    rounds with a two-round publish/refresh of the states each machine is
    responsible for.  Bit-identical to ``simulate_direct``.  When the
    computed t would make compression pointless (t < 2 at desk scales) the
    direct path is used; ``hop_radius`` overrides the choice.
    """
    n = ctx.n
    eps = ctx.config.epsilon
    if delta > ctx.config.machine_space:
        raise RuleViolationFault(
            f"max degree {delta} exceeds machine space {ctx.config.machine_space}"
        )
    t = hop_radius if hop_radius is not None else pick_hop_radius(n, eps, delta)
    if r <= 0:
        return simulate_direct(ctx, rule, 0, seed, vertex_ok=vertex_ok)
    if t < 2 and hop_radius is None:
        return simulate_direct(ctx, rule, r, seed, vertex_ok=vertex_ok)

    vids, indptr, nbrs, sub, ecsr_idx, eu, ev, eu_loc, ev_loc = _layout(ctx, vertex_ok)
    vst, est = initial_states(vids, eu, ev)
    if centers is None:
        centers = vids
    chunks = rule.tape_chunks_needed(min(r, t * rule.cycle))
    member_words = 2 + chunks  # id + state + shipped tape chunks
    if ball_budget is None:
        ball_budget = max(
            64, int(math.ceil(n ** (eps / 3.0)) * (member_words + 3)) * 4
        )
    balls = collect_balls(
        ctx, centers, t, ball_budget, member_words=member_words, vertex_ok=vertex_ok,
    )
    msp = ctx.config.machine_count
    home_e = ctx.resp[np.minimum(eu, ev)]
    ctx.cluster.set_space(
        "rulestate",
        np.bincount(ctx.resp[vids], minlength=msp).astype(np.int64)
        + np.bincount(home_e, minlength=msp).astype(np.int64),
    )

    # precompute per-ball layouts and the publish/refresh routing
    plans = []
    pub_src, pub_dst = [], []
    ref_src, ref_dst = [], []
    edge_key = ctx.cluster.edge_u[sub] * np.int64(_ID_LIMIT) + ctx.cluster.edge_v[sub]
    for c, b in sorted(balls.items()):
        bvids = b.verts[np.argsort(b.verts)]
        beu, bev = np.minimum(b.eu, b.ev), np.maximum(b.eu, b.ev)
        bkey = beu * np.int64(_ID_LIMIT) + bev
        border = np.argsort(bkey)
        beu, bev, bkey = beu[border], bev[border], bkey[border]
        gidx = np.searchsorted(edge_key, bkey)  # position inside sub/est arrays
        bindptr, bnbrs, becsr = _ball_csr(bvids, beu, bev)
        vloc = np.searchsorted(vids, bvids)
        cpos = int(np.searchsorted(bvids, c))
        inc_mask = (beu == c) | (bev == c)
        plans.append(
            dict(
                center=c, home=b.home, vloc=vloc, gidx=gidx, vids=bvids,
                indptr=bindptr, nbrs=bnbrs, ecsr=becsr,
                eu_loc=np.searchsorted(bvids, beu), ev_loc=np.searchsorted(bvids, bev),
                cpos=cpos, inc=np.nonzero(inc_mask)[0],
            )
        )
        resp = ctx.resp
        pub_src.append(np.full(1 + int(inc_mask.sum()), b.home, dtype=np.int64))
        pub_dst.append(
            np.concatenate([[resp[c]], resp[np.minimum(beu, bev)[inc_mask]]])
        )
        ref_src.append(
            np.concatenate([resp[bvids], resp[np.minimum(beu, bev)]])
        )
        ref_dst.append(np.full(len(bvids) + len(beu), b.home, dtype=np.int64))
    pub_src = np.concatenate(pub_src) if pub_src else np.zeros(0, dtype=np.int64)
    pub_dst = np.concatenate(pub_dst) if pub_dst else np.zeros(0, dtype=np.int64)
    ref_src = np.concatenate(ref_src) if ref_src else np.zeros(0, dtype=np.int64)
    ref_dst = np.concatenate(ref_dst) if ref_dst else np.zeros(0, dtype=np.int64)

    r0 = 0
    while r0 < r:
        step = min(t, r - r0)
        new_vst = vst.copy()
        new_est = est.copy()
        for pl in plans:
            bv, be = _advance(
                rule, seed, pl["vids"], vst[pl["vloc"]], pl["indptr"], pl["nbrs"],
                pl["ecsr"], pl["eu_loc"], pl["ev_loc"], est[pl["gidx"]], r0, r0 + step,
            )
            new_vst[pl["vloc"][pl["cpos"]]] = bv[pl["cpos"]]
            new_est[pl["gidx"][pl["inc"]]] = be[pl["inc"]]
        vst, est = new_vst, new_est
        r0 += step
        ctx.cluster.multiround_send(
            pub_src, pub_dst, np.ones(len(pub_src), dtype=np.int64), "blind-publish"
        )
        if r0 < r:
            ctx.cluster.multiround_send(
                ref_src, ref_dst, np.ones(len(ref_src), dtype=np.int64), "blind-refresh"
            )
    ctx.cluster.drop_space("balls")
    ctx.cluster.drop_space("rulestate")
    ctx.cluster.record_space()
    return StateVector(
        round=r, vids=vids, vstates=vst, eids=sub, estates=est, eu=eu, ev=ev
    )
