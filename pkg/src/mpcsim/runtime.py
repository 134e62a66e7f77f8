"""Simulated MPC deployment: machines, synchronous rounds, caps, meters.

Two execution paths share one accounting core:

* ``run_round(cluster, program)`` — the general per-machine contract. A
  program is a pure function of its machine's pre-round contents; messages
  are delivered at the barrier.
* ``cluster.round(...)`` — a columnar barrier used by the primitives, where
  traffic and storage are declared as (src, dst, words) arrays and the
  payloads live in vectorized shared structures. Machine-locality of the
  computation is preserved by construction in the callers; the runtime
  enforces the caps and meters both paths identically.

A word holds O(log n) bits: one id or state is 1 word, an edge is 2.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np


class SimulationFault(RuntimeError):
    """A cap violation: falsifies a space or traffic claim."""


class SpaceOverflowFault(SimulationFault):
    def __init__(self, machine: int, words: int, cap: int):
        super().__init__(f"machine {machine} holds {words} words > space cap {cap}")
        self.machine = machine
        self.words = words
        self.cap = cap


class TrafficOverflowFault(SimulationFault):
    def __init__(self, machine: int, words: int, cap: int, direction: str):
        super().__init__(
            f"machine {machine} {direction} {words} words > traffic cap {cap}"
        )
        self.machine = machine
        self.words = words
        self.cap = cap
        self.direction = direction


class BallOverflowFault(SimulationFault):
    def __init__(self, center: int, words: int, budget: int):
        super().__init__(f"hop ball of {center}: {words} words > budget {budget}")
        self.center = center
        self.words = words
        self.budget = budget


class RuleViolationFault(SimulationFault):
    pass


class CapacityError(ValueError):
    """The input does not fit the configured cluster."""


def strict_default() -> bool:
    return os.environ.get("MPCSIM_STRICT", "1") != "0"


@dataclass(frozen=True)
class ClusterConfig:
    n: int
    epsilon: float = 0.5
    space_coefficient: float = 8.0
    machine_space: int = 0  # S, words; derived when 0
    machine_count: int = 0  # M; derived when 0
    total_space_budget: int = 0
    word_bits: int = 0
    strict: bool = True

    def __post_init__(self):
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must be in (0, 1)")
        if self.space_coefficient <= 0:
            raise ValueError("space_coefficient must be positive")
        s = self.machine_space or math.ceil(
            self.space_coefficient * max(self.n, 1) ** self.epsilon
        )
        s = max(s, 2)
        object.__setattr__(self, "machine_space", int(s))
        if self.machine_count:
            m = int(self.machine_count)
        else:
            budget = self.total_space_budget or 4 * self.n
            m = max(1, math.ceil(budget / s))
        object.__setattr__(self, "machine_count", m)
        object.__setattr__(self, "total_space_budget", int(m * s))
        object.__setattr__(
            self, "word_bits", self.word_bits or max(2, math.ceil(math.log2(max(self.n, 2))))
        )

    @property
    def slack(self) -> float:
        if self.strict:
            return 1.0
        return float(max(1, math.ceil(math.log2(max(self.n, 4))) ** 2))

    @property
    def cap_words(self) -> int:
        return int(self.machine_space * self.slack)

    @staticmethod
    def for_graph(g, epsilon: float = 0.5, space_coefficient: float = 8.0,
                  extra_words: int = 0, strict: bool | None = None) -> "ClusterConfig":
        """Provision a cluster for a graph: 25% base occupancy headroom.

        ``extra_words`` reserves room for transient structures (hop balls in
        the space-inefficient mode); provisioned capacity is not metered.
        """
        s = max(2, math.ceil(space_coefficient * max(g.n, 1) ** epsilon))
        needed = 4 * g.m + 4 * g.n + extra_words + s
        machines = max(1, math.ceil(4 * needed / s))
        return ClusterConfig(
            n=g.n,
            epsilon=epsilon,
            space_coefficient=space_coefficient,
            machine_space=s,
            machine_count=machines,
            strict=strict_default() if strict is None else strict,
        )


@dataclass
class RoundMeter:
    rounds_elapsed: int = 0
    peak_machine_space: int = 0
    peak_machine_traffic: int = 0
    total_space_now: int = 0
    peak_total_space: int = 0

    def snapshot(self) -> "RoundMeter":
        return replace(self)


class _Round:
    """Accumulates one round's declared traffic until the barrier."""

    def __init__(self, cluster: "Cluster", label: str):
        self.cluster = cluster
        self.label = label
        self._src: list[np.ndarray] = []
        self._dst: list[np.ndarray] = []
        self._words: list[np.ndarray] = []

    def send(self, src, dst, words) -> None:
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        words = np.asarray(words, dtype=np.int64)
        if src.shape != dst.shape or src.shape != words.shape:
            raise ValueError("send arrays must be aligned")
        keep = src != dst  # staying put is not communication
        self._src.append(src[keep])
        self._dst.append(dst[keep])
        self._words.append(words[keep])

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.cluster._barrier(self)
        return False


class Cluster:
    """Machine stores plus meters; all mutation flows through barriers."""

    def __init__(self, config: ClusterConfig):
        self.config = config
        self.meter = RoundMeter()
        m = config.machine_count
        self.obj_store: list[dict] = [dict() for _ in range(m)]
        self.inbox: list[list] = [[] for _ in range(m)]
        self._obj_words = np.zeros(m, dtype=np.int64)
        self._inbox_words = np.zeros(m, dtype=np.int64)
        self._ns_words: dict[str, np.ndarray] = {}
        self.tracing = False
        self.trace: list[dict] = []
        # graph placement (populated by init_cluster)
        self.edge_u = np.zeros(0, dtype=np.int64)
        self.edge_v = np.zeros(0, dtype=np.int64)
        self.edge_host = np.zeros(0, dtype=np.int64)
        self.edge_active = np.zeros(0, dtype=bool)

    # -- storage accounting ------------------------------------------------

    def set_space(self, namespace: str, words_per_machine: np.ndarray) -> None:
        arr = np.asarray(words_per_machine, dtype=np.int64)
        if arr.shape != (self.config.machine_count,):
            raise ValueError("words_per_machine must have one entry per machine")
        self._ns_words[namespace] = arr.copy()

    def add_space(self, namespace: str, machine: int, delta: int) -> None:
        arr = self._ns_words.setdefault(
            namespace, np.zeros(self.config.machine_count, dtype=np.int64)
        )
        arr[machine] += delta

    def drop_space(self, namespace: str) -> None:
        self._ns_words.pop(namespace, None)

    def space_per_machine(self) -> np.ndarray:
        total = self._obj_words + self._inbox_words
        for arr in self._ns_words.values():
            total = total + arr
        return total

    def put(self, machine: int, key, value, words: int) -> None:
        old = self.obj_store[machine].get(key)
        if old is not None:
            self._obj_words[machine] -= old[1]
        self.obj_store[machine][key] = (value, int(words))
        self._obj_words[machine] += int(words)

    def delete(self, machine: int, key) -> None:
        old = self.obj_store[machine].pop(key, None)
        if old is not None:
            self._obj_words[machine] -= old[1]

    def get(self, machine: int, key, default=None):
        item = self.obj_store[machine].get(key)
        return default if item is None else item[0]

    # -- rounds --------------------------------------------------------------

    def round(self, label: str = "") -> _Round:
        return _Round(self, label)

    def _barrier(self, rd: _Round) -> None:
        cfg = self.config
        cap = cfg.cap_words
        m = cfg.machine_count
        sent = np.zeros(m, dtype=np.int64)
        recv = np.zeros(m, dtype=np.int64)
        for src, dst, words in zip(rd._src, rd._dst, rd._words):
            if len(src):
                sent += np.bincount(src, weights=words, minlength=m).astype(np.int64)
                recv += np.bincount(dst, weights=words, minlength=m).astype(np.int64)
        worst_out = int(sent.max()) if m else 0
        worst_in = int(recv.max()) if m else 0
        if worst_out > cap:
            mid = int(sent.argmax())
            raise TrafficOverflowFault(mid, worst_out, cap, "sent")
        if worst_in > cap:
            mid = int(recv.argmax())
            raise TrafficOverflowFault(mid, worst_in, cap, "received")
        space = self.space_per_machine()
        worst = int(space.max()) if m else 0
        if worst > cap:
            mid = int(space.argmax())
            raise SpaceOverflowFault(mid, worst, cap)
        meter = self.meter
        meter.rounds_elapsed += 1
        meter.peak_machine_traffic = max(meter.peak_machine_traffic, worst_in, worst_out)
        meter.peak_machine_space = max(meter.peak_machine_space, worst)
        meter.total_space_now = int(space.sum())
        meter.peak_total_space = max(meter.peak_total_space, meter.total_space_now)
        if self.tracing:
            self.trace.append(
                {
                    "label": rd.label,
                    "round": meter.rounds_elapsed,
                    "space": space.copy(),
                    "sent": sent,
                    "recv": recv,
                }
            )

    def record_space(self) -> None:
        """Refresh space meters outside a communication round."""
        space = self.space_per_machine()
        worst = int(space.max()) if len(space) else 0
        self.meter.peak_machine_space = max(self.meter.peak_machine_space, worst)
        self.meter.total_space_now = int(space.sum())
        self.meter.peak_total_space = max(self.meter.peak_total_space, self.meter.total_space_now)

    def multiround_send(self, src, dst, words, label: str = "") -> int:
        """Deliver a batch of messages, splitting into as many rounds as the
        per-machine traffic caps require.  Returns the number of rounds used.

        Wave packing is deterministic: rows are ordered by (src, dst), each
        sender's rows are chunked at the cap, then each (chunk, receiver)
        stream is chunked again, so every wave respects both directions.
        """
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        words = np.asarray(words, dtype=np.int64)
        keep = src != dst
        src, dst, words = src[keep], dst[keep], words[keep]
        if len(src) == 0:
            with self.round(label):
                pass
            return 1
        cap = self.config.cap_words
        over = words > cap
        if over.any():
            # stream oversized payloads: split them into cap-sized pieces
            pieces_src, pieces_dst, pieces_w = [src[~over]], [dst[~over]], [words[~over]]
            for s, d, w in zip(src[over], dst[over], words[over]):
                k = int(-(-w // cap))
                each = int(-(-w // k))
                sizes = np.full(k, each, dtype=np.int64)
                sizes[-1] = w - each * (k - 1)
                pieces_src.append(np.full(k, s, dtype=np.int64))
                pieces_dst.append(np.full(k, d, dtype=np.int64))
                pieces_w.append(sizes)
            src = np.concatenate(pieces_src)
            dst = np.concatenate(pieces_dst)
            words = np.concatenate(pieces_w)
        order = np.lexsort((dst, src))
        src, dst, words = src[order], dst[order], words[order]
        w1 = _chunk_by(src, words, cap)
        key2 = w1 * np.int64(self.config.machine_count + 1) + dst
        order2 = np.argsort(key2, kind="stable")
        src, dst, words, w1 = src[order2], dst[order2], words[order2], w1[order2]
        w2 = _chunk_by(key2[order2], words, cap)
        wave = w1 * (int(w2.max()) + 1) + w2
        nrounds = 0
        for k in np.unique(wave):
            sel = wave == k
            with self.round(f"{label}[{nrounds}]") as rd:
                rd.send(src[sel], dst[sel], words[sel])
            nrounds += 1
        return nrounds


def _chunk_by(key: np.ndarray, words: np.ndarray, cap: int) -> np.ndarray:
    """Chunk index per row so each (key, chunk) group sums to <= cap.

    Rows must already be grouped by key (sorted).  A chunk collects rows
    whose before-cumsum lies in one window of width cap - max(words), which
    keeps even a boundary-straddling last row within the cap.
    """
    cum = np.cumsum(words)
    new_group = np.ones(len(key), dtype=bool)
    new_group[1:] = key[1:] != key[:-1]
    starts = np.nonzero(new_group)[0]
    base = np.zeros(len(key), dtype=np.int64)
    base[starts] = cum[starts] - words[starts]
    group_base = np.maximum.accumulate(base)
    before = cum - group_base - words
    window = max(1, cap - int(words.max(initial=0)))
    return before // window


class MachineView:
    """What a per-machine program may see: its own contents only."""

    def __init__(self, cluster: Cluster, mid: int, inbox: list):
        self._cluster = cluster
        self.machine = mid
        self.inbox = inbox

    def items(self):
        return {k: v for k, (v, _) in self._cluster.obj_store[self.machine].items()}

    def get(self, key, default=None):
        return self._cluster.get(self.machine, key, default)

    def put(self, key, value, words: int) -> None:
        self._cluster.put(self.machine, key, value, words)

    def delete(self, key) -> None:
        self._cluster.delete(self.machine, key)

    def stored_words(self) -> int:
        return int(self._cluster._obj_words[self.machine])


def init_cluster(config: ClusterConfig, g) -> Cluster:
    """Place the input edges round-robin and zero the meters."""
    if 2 * g.m > config.machine_count * config.machine_space:
        raise CapacityError(
            f"{g.m} edges need {2 * g.m} words; cluster holds "
            f"{config.machine_count * config.machine_space}"
        )
    cluster = Cluster(config)
    m = config.machine_count
    cluster.edge_u = g.edges[:, 0].copy()
    cluster.edge_v = g.edges[:, 1].copy()
    cluster.edge_host = (np.arange(g.m, dtype=np.int64)) % m
    cluster.edge_active = np.ones(g.m, dtype=bool)
    cluster.set_space(
        "edges", 2 * np.bincount(cluster.edge_host, minlength=m).astype(np.int64)
    )
    cluster.record_space()
    return cluster


def run_round(cluster: Cluster, program) -> Cluster:
    """One synchronous round of a per-machine program.

    ``program(machine_view) -> [(dst, payload, words), ...]``.  Every machine
    steps on its pre-round contents (programs may only touch their own
    machine); messages are delivered at the barrier.
    """
    m = cluster.config.machine_count
    inboxes = [cluster.inbox[i] for i in range(m)]
    cluster.inbox = [[] for _ in range(m)]
    cluster._inbox_words = np.zeros(m, dtype=np.int64)
    outgoing: list[tuple[int, int, object, int]] = []
    with cluster.round("program") as rd:
        srcs, dsts, words = [], [], []
        for mid in range(m):
            view = MachineView(cluster, mid, inboxes[mid])
            for dst, payload, w in program(view) or []:
                if not (0 <= dst < m):
                    raise ValueError(f"bad destination machine {dst}")
                outgoing.append((mid, dst, payload, int(w)))
                srcs.append(mid)
                dsts.append(dst)
                words.append(int(w))
        for src, dst, payload, w in outgoing:
            cluster.inbox[dst].append(payload)
            cluster._inbox_words[dst] += w
        rd.send(np.array(srcs, dtype=np.int64), np.array(dsts, dtype=np.int64),
                np.array(words, dtype=np.int64))
    return cluster


def report(cluster: Cluster) -> RoundMeter:
    """Immutable snapshot of the meters."""
    return cluster.meter.snapshot()
