"""Pure-Python kernel backend.

Vectorized (numpy) implementations of the hot kernels: the per-round
transitions of the built-in state-congested local rules, multi-round replay
on a subgraph, BFS distances, min-degree peeling, and the greedy finishers.
The compiled backend in ``_kernels.pyx`` mirrors every function bit for bit;
``_backend`` selects whichever is available.

State words are uint64: a 16-bit tag in the high bits and a 48-bit payload.
Tags >= 0x100 are absorbing (the state never changes again).  Rule round
indices are 1-based: round ``r`` maps to phase ``(r-1) % cycle`` of iteration
``(r-1) // cycle``.
"""

from __future__ import annotations

import numpy as np

IS_COMPILED = False

M64 = (1 << 64) - 1
M48 = (1 << 48) - 1
M40 = (1 << 40) - 1

TAG_SHIFT = 48

# Absorbing vertex tags (shared by all rules).
VT_MIS = 0x100
VT_REMOVED = 0x101
VT_MATCHED = 0x102
# Absorbing edge tag.
ET_MATCHED = 0x100

KERNEL_LUBY = 1
KERNEL_MATCHING = 2
KERNEL_DEGRED = 3

CYCLES = {KERNEL_LUBY: 5, KERNEL_MATCHING: 6, KERNEL_DEGRED: 13}

# Flag bits inside the 48-bit vertex payload (degree-reduction rule).
BIT_HIGH = 47
BIT_EXP = 46
BIT_LEAF = 45
BIT_GOOD = 44

# Flag bits inside the edge payload (degree-reduction rule).
EB_PICKED = 0
EB_DISC = 1
EB_UEXP = 2
EB_VEXP = 3
EB_UHIGH = 4
EB_VHIGH = 5
EB_ULEAF = 6
EB_VLEAF = 7

_PHI = 0x9E3779B97F4A7C15
_MIXK1 = 0xBF58476D1CE4E5B9
_MIXK2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """Splitmix64 finalizer on a 64-bit word."""
    x &= M64
    x = ((x ^ (x >> 30)) * _MIXK1) & M64
    x = ((x ^ (x >> 27)) * _MIXK2) & M64
    return x ^ (x >> 31)


def mix3(a: int, b: int, c: int) -> int:
    """Counter-style mix of three words into one pseudorandom word."""
    h = mix64((a + _PHI) & M64)
    h = mix64((h ^ b) + _PHI)
    return mix64((h ^ c) + _PHI)


def _mix64_arr(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIXK1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIXK2)
    return x ^ (x >> np.uint64(31))


def tape_chunks(seed: int, vids: np.ndarray, chunk: int) -> np.ndarray:
    """One 64-bit tape chunk per vertex, derived from (seed, id, chunk)."""
    h0 = np.uint64(mix64((seed + _PHI) & M64))
    h = _mix64_arr((h0 ^ vids.astype(np.uint64)) + np.uint64(_PHI))
    return _mix64_arr((h ^ np.uint64(chunk)) + np.uint64(_PHI))


# ---------------------------------------------------------------------------
# segment helpers over CSR incidence arrays


def _seg_count(indptr: np.ndarray, mask: np.ndarray) -> np.ndarray:
    cs = np.zeros(len(mask) + 1, dtype=np.int64)
    np.cumsum(mask, out=cs[1:])
    return cs[indptr[1:]] - cs[indptr[:-1]]


def _seg_min(indptr: np.ndarray, values: np.ndarray, empty: int) -> np.ndarray:
    lens = np.diff(indptr)
    out = np.full(len(lens), empty, dtype=np.uint64)
    nz = lens > 0
    if values.size and nz.any():
        out[nz] = np.minimum.reduceat(values, indptr[:-1][nz])
    return out


def _seg_kth(indptr: np.ndarray, values: np.ndarray, k: np.ndarray, empty: int) -> np.ndarray:
    """Per-segment k-th smallest value (k is 1-based, per segment).

    Entries that must not participate are pre-set to a sentinel larger than
    any real value.  Segments whose k exceeds the real entry count get
    whatever sits at that rank (callers mask validity themselves).
    """
    nv = len(indptr) - 1
    out = np.full(nv, empty, dtype=np.uint64)
    if not values.size:
        return out
    seg = np.repeat(np.arange(nv, dtype=np.int64), np.diff(indptr))
    order = np.lexsort((values, seg))
    vsorted = values[order]
    idx = indptr[:-1] + np.maximum(k, 1) - 1
    ok = (k >= 1) & (idx < indptr[1:])
    out[ok] = vsorted[idx[ok]]
    return out


def _u(x) -> np.uint64:
    return np.uint64(x)


# ---------------------------------------------------------------------------
# Luby MIS rule (5-round cycle)
#   vertex tags: 0 init, 1 drawn; edge tags: 0 init, 1 min-endpoint,
#   2 incident-to-MIS, 3 dead pair.


def _luby_vertex(p, it, seed, vids, vst, indptr, nbrs, ecsr):
    tags = vst >> _u(TAG_SHIFT)
    alive = tags < _u(0x100)
    if p == 0:
        draws = tape_chunks(seed, vids, it) >> _u(16)
        return np.where(alive, (_u(1) << _u(TAG_SHIFT)) | draws, vst)
    if p == 2:
        et = ecsr >> _u(TAG_SHIFT)
        pay = ecsr & _u(M48)
        own = np.repeat(vids.astype(np.uint64), np.diff(indptr))
        rel = et == _u(1)
        mine = rel & (pay == own)
        join = _seg_count(indptr, rel) == _seg_count(indptr, mine)
        hit = (tags == _u(1)) & join
        return np.where(hit, (_u(VT_MIS) << _u(TAG_SHIFT)) | vids.astype(np.uint64), vst)
    if p == 4:
        et = ecsr >> _u(TAG_SHIFT)
        marked = _seg_count(indptr, et == _u(2)) > 0
        hit = (tags == _u(1)) & marked
        return np.where(hit, (_u(VT_REMOVED) << _u(TAG_SHIFT)) | vids.astype(np.uint64), vst)
    return vst.copy()


def _luby_edge(p, eu, ev, su, sv, est):
    et = est >> _u(TAG_SHIFT)
    keep = et >= _u(0x100)
    if p == 1:
        ut = su >> _u(TAG_SHIFT)
        vt = sv >> _u(TAG_SHIFT)
        au = ut == _u(1)
        av = vt == _u(1)
        du = su & _u(M48)
        dv = sv & _u(M48)
        ueu = eu.astype(np.uint64)
        uev = ev.astype(np.uint64)
        u_wins = (du < dv) | ((du == dv) & (ueu < uev))
        w = np.where(u_wins, ueu, uev)
        w = np.where(au & ~av, ueu, w)
        w = np.where(av & ~au, uev, w)
        new = np.where(au | av, (_u(1) << _u(TAG_SHIFT)) | w, _u(3) << _u(TAG_SHIFT))
        return np.where(keep, est, new)
    if p == 3:
        mis_adj = ((su >> _u(TAG_SHIFT)) == _u(VT_MIS)) | ((sv >> _u(TAG_SHIFT)) == _u(VT_MIS))
        return np.where(~keep & mis_adj, _u(2) << _u(TAG_SHIFT), est)
    return est.copy()


# ---------------------------------------------------------------------------
# Israeli–Itai style matching rule (6-round cycle)
#   vertex tags: 0 init, 1 coin+rand, 2 sender-with-target, 3 receiver,
#   4 accepted; edge tags: 0 init, 1 live, 2 proposal, 5 dead.


def _matching_vertex(p, it, seed, vids, vst, indptr, nbrs, ecsr):
    tags = vst >> _u(TAG_SHIFT)
    alive = tags < _u(0x100)
    uvids = vids.astype(np.uint64)
    if p == 0:
        chunk = tape_chunks(seed, vids, it)
        coin = (chunk >> _u(63)) & _u(1)
        rand = chunk & _u(M40)
        pay = (coin << _u(47)) | rand
        return np.where(alive, (_u(1) << _u(TAG_SHIFT)) | pay, vst)
    if p == 1:
        et = ecsr >> _u(TAG_SHIFT)
        live = et == _u(1)
        k = _seg_count(indptr, live)
        vals = np.where(live, nbrs.astype(np.uint64), _u(M48))
        rand = vst & _u(M40)
        j = np.zeros(len(vids), dtype=np.int64)
        nzk = k > 0
        j[nzk] = (rand[nzk] % k[nzk].astype(np.uint64)).astype(np.int64)
        target = _seg_kth(indptr, vals, j + 1, M48)
        sender = ((vst >> _u(47)) & _u(1)) == _u(1)
        me = (tags == _u(1)) & alive
        new = vst.copy()
        pick = me & sender & nzk
        new[pick] = (_u(2) << _u(TAG_SHIFT)) | target[pick]
        recv = me & ~sender
        new[recv] = _u(3) << _u(TAG_SHIFT)
        return new
    if p == 3:
        et = ecsr >> _u(TAG_SHIFT)
        pay = ecsr & _u(M48)
        own = np.repeat(uvids, np.diff(indptr))
        prop = (et == _u(2)) & (pay != own)
        vals = np.where(prop, pay, _u(M48))
        best = _seg_min(indptr, vals, M48)
        hit = (tags == _u(3)) & (best != _u(M48))
        return np.where(hit, (_u(4) << _u(TAG_SHIFT)) | best, vst)
    if p == 5:
        et = ecsr >> _u(TAG_SHIFT)
        matched = _seg_count(indptr, et == _u(ET_MATCHED)) > 0
        hit = alive & matched
        return np.where(hit, (_u(VT_MATCHED) << _u(TAG_SHIFT)) | uvids, vst)
    return vst.copy()


def _matching_edge(p, eu, ev, su, sv, est):
    et = est >> _u(TAG_SHIFT)
    keep = et >= _u(0x100)
    ueu = eu.astype(np.uint64)
    uev = ev.astype(np.uint64)
    if p == 0:
        both = ((su >> _u(TAG_SHIFT)) < _u(0x100)) & ((sv >> _u(TAG_SHIFT)) < _u(0x100))
        new = np.where(both, _u(1) << _u(TAG_SHIFT), _u(5) << _u(TAG_SHIFT))
        return np.where(keep, est, new)
    if p == 2:
        ut = su >> _u(TAG_SHIFT)
        vt = sv >> _u(TAG_SHIFT)
        pu = su & _u(M48)
        pv = sv & _u(M48)
        u2v = (ut == _u(2)) & (pu == uev) & (vt == _u(3))
        v2u = (vt == _u(2)) & (pv == ueu) & (ut == _u(3))
        new = est.copy()
        live = ~keep & (et == _u(1))
        new[live & u2v] = (_u(2) << _u(TAG_SHIFT)) | ueu[live & u2v]
        new[live & v2u] = (_u(2) << _u(TAG_SHIFT)) | uev[live & v2u]
        return new
    if p == 4:
        prop = et == _u(2)
        proposer = est & _u(M48)
        # the target is the endpoint that is not the proposer
        tstate = np.where(proposer == ueu, sv, su)
        acc = ((tstate >> _u(TAG_SHIFT)) == _u(4)) & ((tstate & _u(M48)) == proposer)
        hit = ~keep & prop & acc
        return np.where(hit, (_u(ET_MATCHED) << _u(TAG_SHIFT)) | proposer, est)
    return est.copy()


# ---------------------------------------------------------------------------
# Degree-reduction rule (13-round cycle; params pin the thresholds)
#   vertex tags: 0 init, 1 alive, 2 degree, 3 exposure/cutoff, 4 leaf,
#   5 good/draw, 6 mm-proposal, 7 mm-accept.
#   edge tags: 0 inert, 1 alive, 2 roles, 4 pick/discard, 6 leaf info,
#   8 winner, 9 proposal.


def _degred_vertex(p, call, seed, p_int, p_float, vids, vst, indptr, nbrs, ecsr):
    sqrt_d, leaf_pick, mm = int(p_int[0]), int(p_int[1]), int(p_int[2])
    beta, beta2 = float(p_float[0]), float(p_float[1])
    tags = vst >> _u(TAG_SHIFT)
    alive = tags < _u(0x100)
    uvids = vids.astype(np.uint64)
    et = ecsr >> _u(TAG_SHIFT)
    epay = ecsr & _u(M48)
    if p == 0:
        return np.where(alive, (_u(1) << _u(TAG_SHIFT)) | uvids, vst)
    if p == 1:
        deg = _seg_count(indptr, et == _u(1)).astype(np.uint64)
        high = (deg >= _u(sqrt_d)).astype(np.uint64)
        pay = (high << _u(BIT_HIGH)) | deg
        hit = tags == _u(1)
        return np.where(hit, (_u(2) << _u(TAG_SHIFT)) | pay, vst)
    if p == 3:
        own = np.repeat(uvids, np.diff(indptr))
        nb = nbrs.astype(np.uint64)
        # edge payload has role bits: bit1 = high(eu), bit0 = high(ev);
        # I am eu iff my id is the smaller endpoint.
        i_am_u = own < nb
        other_high = np.where(i_am_u, epay & _u(1), (epay >> _u(1)) & _u(1))
        rel = (et == _u(2)) & (other_high == _u(0))
        cnt_low = _seg_count(indptr, rel)
        high = (vst >> _u(BIT_HIGH)) & _u(1)
        exposed = (high == _u(1)) & (cnt_low >= leaf_pick)
        vals = np.where(rel, nb, _u(M48))
        kvec = np.full(len(vids), leaf_pick, dtype=np.int64)
        cutoff = _seg_kth(indptr, vals, kvec, M48)
        pay = (high << _u(BIT_HIGH)) | (exposed.astype(np.uint64) << _u(BIT_EXP))
        pay = pay | np.where(exposed, cutoff, _u(0))
        hit = tags == _u(2)
        return np.where(hit, (_u(3) << _u(TAG_SHIFT)) | pay, vst)
    if p == 5:
        picked = (et == _u(4)) & ((epay & _u(1)) == _u(1))
        cnt = _seg_count(indptr, picked).astype(np.uint64)
        high = (vst >> _u(BIT_HIGH)) & _u(1)
        exposed = (vst >> _u(BIT_EXP)) & _u(1)
        leaf = ((high == _u(0)) & (cnt >= _u(1))).astype(np.uint64)
        pay = (high << _u(BIT_HIGH)) | (exposed << _u(BIT_EXP)) | (leaf << _u(BIT_LEAF))
        pay = pay | np.where(leaf == _u(1), cnt, _u(0))
        hit = tags == _u(3)
        return np.where(hit, (_u(4) << _u(TAG_SHIFT)) | pay, vst)
    if p == 7:
        own = np.repeat(uvids, np.diff(indptr))
        nb = nbrs.astype(np.uint64)
        i_am_u = own < nb
        other_leaf = np.where(
            i_am_u, (epay >> _u(EB_VLEAF)) & _u(1), (epay >> _u(EB_ULEAF)) & _u(1)
        )
        not_disc = ((epay >> _u(EB_DISC)) & _u(1)) == _u(0)
        ok = (et == _u(6)) & not_disc & (other_leaf == _u(1))
        leafnb = _seg_count(indptr, ok)
        high = (vst >> _u(BIT_HIGH)) & _u(1)
        exposed = (vst >> _u(BIT_EXP)) & _u(1)
        leaf = (vst >> _u(BIT_LEAF)) & _u(1)
        picked_cnt = vst & _u(M40)
        good = (
            (leaf == _u(1))
            & (picked_cnt.astype(np.float64) < beta)
            & (leafnb.astype(np.float64) < beta2)
        ).astype(np.uint64)
        pay = (
            (high << _u(BIT_HIGH))
            | (exposed << _u(BIT_EXP))
            | (leaf << _u(BIT_LEAF))
            | (good << _u(BIT_GOOD))
        )
        if mm:
            pay = pay | np.where(good == _u(1), picked_cnt, _u(0))
        else:
            draws = tape_chunks(seed, vids, call) >> _u(24)
            pay = pay | np.where(good == _u(1), draws, _u(0))
        hit = tags == _u(4)
        return np.where(hit, (_u(5) << _u(TAG_SHIFT)) | pay, vst)
    if not mm:
        if p == 9:
            own = np.repeat(uvids, np.diff(indptr))
            gg = (et == _u(8)) & (((epay >> _u(47)) & _u(1)) == _u(1))
            winner = epay & _u(M40)
            lost = gg & (winner != own)
            good = ((vst >> _u(BIT_GOOD)) & _u(1)) == _u(1)
            win = _seg_count(indptr, lost) == 0
            hit = (tags == _u(5)) & good & win
            return np.where(hit, (_u(VT_MIS) << _u(TAG_SHIFT)) | uvids, vst)
        if p == 11:
            marked = _seg_count(indptr, et == _u(10)) > 0
            hit = alive & marked
            return np.where(hit, (_u(VT_REMOVED) << _u(TAG_SHIFT)) | uvids, vst)
        return vst.copy()
    # maximal-matching branch
    if p == 8:
        picked = (et == _u(6)) & ((epay & _u(1)) == _u(1))
        nb = nbrs.astype(np.uint64)
        vals = np.where(picked, nb, _u(M48))
        good = ((vst >> _u(BIT_GOOD)) & _u(1)) == _u(1)
        k = (vst & _u(M40)).astype(np.int64)
        chunk = tape_chunks(seed, vids, call)
        j = np.zeros(len(vids), dtype=np.int64)
        nz = k > 0
        j[nz] = (chunk[nz] % k[nz].astype(np.uint64)).astype(np.int64)
        target = _seg_kth(indptr, vals, j + 1, M48)
        hit = (tags == _u(5)) & good & nz
        return np.where(hit, (_u(6) << _u(TAG_SHIFT)) | target, vst)
    if p == 10:
        own = np.repeat(uvids, np.diff(indptr))
        prop = (et == _u(9)) & ((ecsr & _u(M48)) != own)
        vals = np.where(prop, ecsr & _u(M48), _u(M48))
        best = _seg_min(indptr, vals, M48)
        exposed = ((vst >> _u(BIT_EXP)) & _u(1)) == _u(1)
        hit = (tags == _u(5)) & exposed & (best != _u(M48))
        return np.where(hit, (_u(7) << _u(TAG_SHIFT)) | best, vst)
    if p == 12:
        matched = _seg_count(indptr, et == _u(ET_MATCHED)) > 0
        hit = alive & matched
        return np.where(hit, (_u(VT_MATCHED) << _u(TAG_SHIFT)) | uvids, vst)
    return vst.copy()


def _degred_edge(p, p_int, eu, ev, su, sv, est):
    mm = int(p_int[2])
    et = est >> _u(TAG_SHIFT)
    keep = et >= _u(0x100)
    ueu = eu.astype(np.uint64)
    uev = ev.astype(np.uint64)
    ut = su >> _u(TAG_SHIFT)
    vt = sv >> _u(TAG_SHIFT)
    if p == 0:
        both = (ut < _u(0x100)) & (vt < _u(0x100))
        new = np.where(both, _u(1) << _u(TAG_SHIFT), _u(0))
        return np.where(keep, est, new)
    if p == 2:
        uh = (su >> _u(BIT_HIGH)) & _u(1)
        vh = (sv >> _u(BIT_HIGH)) & _u(1)
        new = (_u(2) << _u(TAG_SHIFT)) | (uh << _u(1)) | vh
        hit = ~keep & (et == _u(1))
        return np.where(hit, new, est)
    if p == 4:
        uh = (su >> _u(BIT_HIGH)) & _u(1)
        vh = (sv >> _u(BIT_HIGH)) & _u(1)
        ue = (su >> _u(BIT_EXP)) & _u(1)
        ve = (sv >> _u(BIT_EXP)) & _u(1)
        cu = su & _u(M48) & _u(M40)
        cv = sv & _u(M48) & _u(M40)
        picked = ((ue == _u(1)) & (vh == _u(0)) & (uev <= cu)) | (
            (ve == _u(1)) & (uh == _u(0)) & (ueu <= cv)
        )
        disc = ((ue == _u(1)) | (ve == _u(1))) & ~picked
        pay = (
            picked.astype(np.uint64)
            | (disc.astype(np.uint64) << _u(EB_DISC))
            | (ue << _u(EB_UEXP))
            | (ve << _u(EB_VEXP))
            | (uh << _u(EB_UHIGH))
            | (vh << _u(EB_VHIGH))
        )
        hit = ~keep & (et == _u(2))
        return np.where(hit, (_u(4) << _u(TAG_SHIFT)) | pay, est)
    if p == 6:
        ul = (su >> _u(BIT_LEAF)) & _u(1)
        vl = (sv >> _u(BIT_LEAF)) & _u(1)
        pay = (est & _u(0x3F)) | (ul << _u(EB_ULEAF)) | (vl << _u(EB_VLEAF))
        hit = ~keep & (et == _u(4))
        return np.where(hit, (_u(6) << _u(TAG_SHIFT)) | pay, est)
    if not mm:
        if p == 8:
            ug = (su >> _u(BIT_GOOD)) & _u(1)
            vg = (sv >> _u(BIT_GOOD)) & _u(1)
            disc = (est >> _u(EB_DISC)) & _u(1)
            gg = (ug == _u(1)) & (vg == _u(1)) & (disc == _u(0))
            du = su & _u(M40)
            dv = sv & _u(M40)
            u_wins = (du < dv) | ((du == dv) & (ueu < uev))
            winner = np.where(u_wins, ueu, uev)
            pay = np.where(gg, (_u(1) << _u(47)) | winner, _u(0))
            hit = ~keep & (et == _u(6))
            return np.where(hit, (_u(8) << _u(TAG_SHIFT)) | pay, est)
        if p == 10:
            mis_adj = (ut == _u(VT_MIS)) | (vt == _u(VT_MIS))
            hit = ~keep & mis_adj
            return np.where(hit, _u(10) << _u(TAG_SHIFT), est)
        return est.copy()
    if p == 9:
        picked = ((est & _u(M48)) & _u(1)) == _u(1)
        u_prop = (ut == _u(6)) & ((su & _u(M48)) == uev)
        v_prop = (vt == _u(6)) & ((sv & _u(M48)) == ueu)
        new = est.copy()
        hit = ~keep & (et == _u(6)) & picked
        sel_u = hit & u_prop
        sel_v = hit & v_prop & ~u_prop
        new[sel_u] = (_u(9) << _u(TAG_SHIFT)) | ueu[sel_u]
        new[sel_v] = (_u(9) << _u(TAG_SHIFT)) | uev[sel_v]
        return new
    if p == 11:
        proposer = est & _u(M48)
        tstate = np.where(proposer == ueu, sv, su)
        acc = ((tstate >> _u(TAG_SHIFT)) == _u(7)) & ((tstate & _u(M48)) == proposer)
        hit = ~keep & (et == _u(9)) & acc
        return np.where(hit, (_u(ET_MATCHED) << _u(TAG_SHIFT)) | proposer, est)
    return est.copy()


# ---------------------------------------------------------------------------
# public round API


def vertex_round(kernel, p_int, p_float, r, seed, vids, vstates, indptr, nbrs, ecsr):
    cycle = CYCLES[kernel]
    p = (r - 1) % cycle
    it = (r - 1) // cycle
    if kernel == KERNEL_LUBY:
        return _luby_vertex(p, it, seed, vids, vstates, indptr, nbrs, ecsr)
    if kernel == KERNEL_MATCHING:
        return _matching_vertex(p, it, seed, vids, vstates, indptr, nbrs, ecsr)
    if kernel == KERNEL_DEGRED:
        return _degred_vertex(p, it, seed, p_int, p_float, vids, vstates, indptr, nbrs, ecsr)
    raise ValueError(f"unknown kernel {kernel}")


def edge_round(kernel, p_int, p_float, r, eu, ev, su, sv, estates):
    cycle = CYCLES[kernel]
    p = (r - 1) % cycle
    if kernel == KERNEL_LUBY:
        return _luby_edge(p, eu, ev, su, sv, estates)
    if kernel == KERNEL_MATCHING:
        return _matching_edge(p, eu, ev, su, sv, estates)
    if kernel == KERNEL_DEGRED:
        return _degred_edge(p, p_int, eu, ev, su, sv, estates)
    raise ValueError(f"unknown kernel {kernel}")


def replay_rounds(
    kernel, p_int, p_float, seed, vids, vstates, indptr, nbrs, ecsr_idx,
    eu_loc, ev_loc, estates, r0, r1,
):
    """Advance rule states on a stored subgraph from round r0 to r1.

    ``vids`` are global vertex ids; CSR is local, ``ecsr_idx`` maps incidence
    slots to local edge indices, ``eu_loc``/``ev_loc`` are local endpoint
    indices.  No communication happens; this is the in-machine half of blind
    coordination.
    """
    vst = vstates.copy()
    est = estates.copy()
    eu = vids[eu_loc]
    ev = vids[ev_loc]
    for r in range(r0 + 1, r1 + 1):
        su = vst[eu_loc]
        sv = vst[ev_loc]
        new_est = edge_round(kernel, p_int, p_float, r, eu, ev, su, sv, est)
        new_vst = vertex_round(
            kernel, p_int, p_float, r, seed, vids, vst, indptr, nbrs, est[ecsr_idx]
        )
        vst, est = new_vst, new_est
    return vst, est


# ---------------------------------------------------------------------------
# graph kernels


def bfs_dists(indptr, indices, src):
    """BFS distances over a local CSR graph; -1 marks unreachable."""
    n = len(indptr) - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[src] = 0
    frontier = [src]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for x in frontier:
            for j in range(indptr[x], indptr[x + 1]):
                y = indices[j]
                if dist[y] < 0:
                    dist[y] = d
                    nxt.append(y)
        frontier = nxt
    return dist


def peel_core(indptr, indices):
    """Min-degree peeling: returns (degeneracy, density_bound).

    density_bound is the max over peeling states of |E(S)| / (|S|-1), the
    densest-subgraph lower bound read off the same trace.
    """
    n = len(indptr) - 1
    if n == 0:
        return 0, 0.0
    deg = np.diff(indptr).astype(np.int64)
    m = int(deg.sum()) // 2
    max_deg = int(deg.max()) if n else 0
    # bucket queue
    bucket_heads = [-1] * (max_deg + 2)
    nxt = [-1] * n
    prv = [-1] * n
    where = deg.tolist()
    for v in range(n - 1, -1, -1):
        d = where[v]
        nxt[v] = bucket_heads[d]
        if bucket_heads[d] >= 0:
            prv[bucket_heads[d]] = v
        prv[v] = -1
        bucket_heads[d] = v

    def _remove(v, d):
        if prv[v] >= 0:
            nxt[prv[v]] = nxt[v]
        else:
            bucket_heads[d] = nxt[v]
        if nxt[v] >= 0:
            prv[nxt[v]] = prv[v]

    removed = [False] * n
    degeneracy = 0
    density = float(m) / (n - 1) if n >= 2 else 0.0
    edges_left = m
    verts_left = n
    cur = 0
    ind = indices.tolist()
    iptr = indptr.tolist()
    for _ in range(n):
        while cur <= max_deg + 1 and bucket_heads[cur] < 0:
            cur += 1
        v = bucket_heads[cur]
        d = where[v]
        degeneracy = max(degeneracy, d)
        _remove(v, d)
        removed[v] = True
        edges_left -= d
        verts_left -= 1
        if verts_left >= 2:
            density = max(density, edges_left / (verts_left - 1))
        for j in range(iptr[v], iptr[v + 1]):
            u = ind[j]
            if not removed[u]:
                du = where[u]
                _remove(u, du)
                where[u] = du - 1
                nxt[u] = bucket_heads[du - 1]
                if bucket_heads[du - 1] >= 0:
                    prv[bucket_heads[du - 1]] = u
                prv[u] = -1
                bucket_heads[du - 1] = u
                if du - 1 < cur:
                    cur = du - 1
    return degeneracy, density


def greedy_mis(indptr, indices):
    """Greedy MIS in index order; callers order vertices by global id."""
    n = len(indptr) - 1
    chosen = np.zeros(n, dtype=np.uint8)
    blocked = np.zeros(n, dtype=np.uint8)
    ind = indices
    for v in range(n):
        if not blocked[v]:
            chosen[v] = 1
            blocked[v] = 1
            for j in range(indptr[v], indptr[v + 1]):
                blocked[ind[j]] = 1
    return chosen


def greedy_matching(n, eu, ev):
    """Greedy maximal matching over edges in given order."""
    used = np.zeros(n, dtype=np.uint8)
    take = np.zeros(len(eu), dtype=np.uint8)
    for i in range(len(eu)):
        a, b = eu[i], ev[i]
        if not used[a] and not used[b]:
            take[i] = 1
            used[a] = 1
            used[b] = 1
    return take
