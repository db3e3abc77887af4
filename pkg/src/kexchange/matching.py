"""Iterative top-trading-cycle matching with bounded cycle length.

Every iteration rescores the surviving pairs, points each patient at the
donor it values most (ties broken by pair priority or by enrollment
order), and removes one exchange: either an altruistic-donor chain (when
enabled) or the first bounded cycle reached from the priority queue.

Orientation used throughout: ``succ[u] == v`` means the patient of ``u``
receives the kidney of ``v``'s donor.  A cycle ``(u0, u1, ..., uk)`` thus
has u0 receiving from u1, u1 from u2, ... and uk from u0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

from .config import EngineConfig
from .registry import NddDonor, Pair, Pool
from .scoring import EdgeScoreBreakdown, WeightMatrix, edge_score, ZERO_EDGE

Vertex = Union[Pair, NddDonor]

REASON_NO_DONOR = "no compatible donor"
REASON_FILTERED = "filtered by F_star"
REASON_NO_CYCLE = "no closing cycle"


class MatchingInvariantError(RuntimeError):
    """Internal consistency failure (e.g. removing a vertex that is not in the pool)."""


# -- ordering ------------------------------------------------------------------

def queue_key(pair: Pair) -> tuple:
    return (-pair.priority, pair.enrolled_at, pair.uid)


def order_queue(pool: Pool) -> list[str]:
    """Pair uids by priority (highest first), then enrollment, then uid."""
    return [p.uid for p in sorted(pool.pairs, key=queue_key)]


def donor_rank_key(vertex: Vertex, mode: str) -> tuple:
    """Smaller key wins a tie.  Altruistic donors lose ties to any pair."""
    if isinstance(vertex, NddDonor):
        return (1, vertex.enrolled_at, vertex.uid)
    if mode == "priority":
        return (0, -vertex.priority, vertex.enrolled_at, vertex.uid)
    return (0, vertex.enrolled_at, vertex.uid)


def argmax_with_tiebreak(row: Sequence[Fraction], donors: Sequence[Vertex], mode: str = "priority",
                         f_star: Fraction = Fraction(0)) -> Optional[int]:
    """Index of the preferred donor in ``row``, or None when nothing beats ``f_star``."""
    if not row:
        return None
    best = max(row)
    if best <= f_star:
        return None
    tied = [i for i, w in enumerate(row) if w == best]
    return min(tied, key=lambda i: donor_rank_key(donors[i], mode))


# -- successor graph -----------------------------------------------------------

@dataclass(frozen=True)
class SuccessorGraph:
    """At most one out-edge per patient vertex."""

    vertices: tuple[str, ...]
    succ: Mapping[str, Optional[str]]
    best_weight: Mapping[str, Fraction]
    tied: Mapping[str, tuple[str, ...]]

    @property
    def n(self) -> int:
        return len(self.vertices)

    def weight(self, uid: str) -> Fraction:
        return self.best_weight[uid]


def _vertex_lookup(pool: Pool) -> dict[str, Vertex]:
    out: dict[str, Vertex] = {p.uid: p for p in pool.pairs}
    out.update({d.uid: d for d in pool.ndds})
    return out


def gen_successor_graph(W: WeightMatrix, pool: Pool, config: EngineConfig = EngineConfig()) -> SuccessorGraph:
    lookup = _vertex_lookup(pool)
    donors = [lookup[u] for u in W.labels]
    succ: dict[str, Optional[str]] = {}
    best: dict[str, Fraction] = {}
    tied: dict[str, tuple[str, ...]] = {}
    patients = [u for u in W.labels if u in W.patient_labels]
    for uid in patients:
        j = W.index(uid)
        row = [W.cells[i][j].final for i in range(W.n)]
        top = max(row)
        best[uid] = top
        tied[uid] = tuple(W.labels[i] for i, w in enumerate(row) if w == top and top > 0)
        pick = argmax_with_tiebreak(row, donors, config.tiebreak_mode, config.f_star)
        succ[uid] = None if pick is None else W.labels[pick]
    return SuccessorGraph(tuple(patients), succ, best, tied)


# -- cycles --------------------------------------------------------------------

def dfs_cycle(g: SuccessorGraph, start: str, l_max: int) -> Optional[tuple[str, ...]]:
    """Follow successors from ``start``; return the walk if it closes within ``l_max`` vertices."""
    walk = [start]
    seen = {start}
    v = g.succ.get(start)
    while v is not None:
        if v == start:
            return tuple(walk)
        if len(walk) == l_max:
            return None
        if v in seen or v not in g.succ:
            return None  # repeat off the start, or an altruistic donor (no patient)
        walk.append(v)
        seen.add(v)
        v = g.succ.get(v)
    return None


def first_cycle(g: SuccessorGraph, queue: Iterable[str], l_max: int) -> Optional[tuple[str, ...]]:
    for v in queue:
        c = dfs_cycle(g, v, l_max)
        if c is not None:
            return c
    return None


def find_cycle(W: WeightMatrix, queue: Sequence[str], pool: Pool,
               config: EngineConfig = EngineConfig()) -> Optional[tuple[str, ...]]:
    """Build the successor graph once and poll the queue for the first closing walk."""
    g = gen_successor_graph(W, pool, config)
    return first_cycle(g, queue, config.l_max)


def remove_cycle(pool: Pool, vertices: Iterable[str]) -> Pool:
    try:
        return pool.without(vertices)
    except KeyError as exc:
        raise MatchingInvariantError(f"cannot remove {exc.args[0]}") from None


# -- chains --------------------------------------------------------------------

@dataclass(frozen=True)
class ChainProposal:
    ndd_uid: str
    vertices: tuple[str, ...]


def chain_candidates(g: SuccessorGraph, ndd_uids: Sequence[str], l_max: int) -> list[ChainProposal]:
    """Every path of patients leading back to an altruistic donor, up to ``l_max`` pairs.

    Patient ``u`` joins a chain after ``x`` when ``succ[u] == x``: it takes
    x's donor (or the altruistic kidney itself for the first hop).
    """
    takers: dict[str, list[str]] = {}
    for u in g.vertices:
        t = g.succ[u]
        if t is not None:
            takers.setdefault(t, []).append(u)
    out: list[ChainProposal] = []

    def grow(ndd: str, path: list[str]) -> None:
        tail = path[-1] if path else ndd
        if path:
            out.append(ChainProposal(ndd, tuple(path)))
        if len(path) == l_max:
            return
        for u in takers.get(tail, ()):
            grow(ndd, path + [u])

    for ndd in ndd_uids:
        grow(ndd, [])
    return out


def pick_chain(candidates: Sequence[ChainProposal], queue: Sequence[str],
               ndd_order: Sequence[str]) -> Optional[ChainProposal]:
    """Longest chain; then the one holding the highest-priority pairs; then NDD order."""
    if not candidates:
        return None
    rank = {u: i for i, u in enumerate(queue)}
    nrank = {u: i for i, u in enumerate(ndd_order)}
    return min(candidates, key=lambda c: (-len(c.vertices),
                                          tuple(sorted(rank[v] for v in c.vertices)),
                                          nrank[c.ndd_uid]))


def build_chain(pool: Pool, W: WeightMatrix, config: EngineConfig = EngineConfig(),
                graph: Optional[SuccessorGraph] = None) -> Optional[ChainProposal]:
    if not config.chains_enabled or not pool.ndds:
        return None
    g = graph or gen_successor_graph(W, pool, config)
    ndd_order = [d.uid for d in sorted(pool.ndds, key=lambda d: (d.enrolled_at, d.uid))]
    cands = chain_candidates(g, ndd_order, config.l_max)
    return pick_chain(cands, order_queue(pool), ndd_order)


def bridge_uid(pair_uid: str) -> str:
    return f"{pair_uid}-bridge"


# -- results -------------------------------------------------------------------

@dataclass(frozen=True)
class Cycle:
    id: str
    vertices: tuple[str, ...]
    # weights[i]: patient of vertices[i] receiving from donor of vertices[i + 1] (wrapping)
    weights: tuple[Fraction, ...]
    iteration: int

    @property
    def internal(self) -> bool:
        """A one-pair cycle: the patient receives its own donor's kidney."""
        return len(self.vertices) == 1


@dataclass(frozen=True)
class Chain:
    id: str
    ndd_uid: str
    # donor flow: ndd -> vertices[0] -> vertices[1] -> ...
    vertices: tuple[str, ...]
    weights: tuple[Fraction, ...]
    iteration: int
    bridge_donor: str  # uid of the last pair, whose donor is left over
    bridge_uid: str


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    survivors: tuple[str, ...]
    ndds: tuple[str, ...]
    queue: tuple[str, ...]
    successors: Mapping[str, Optional[str]]
    best_weights: Mapping[str, Fraction]
    tied: Mapping[str, tuple[str, ...]]
    exchange: Optional[str] = None
    removed: tuple[str, ...] = ()


@dataclass(frozen=True)
class MatchResult:
    cycles: tuple[Cycle, ...] = ()
    chains: tuple[Chain, ...] = ()
    unmatched: tuple[str, ...] = ()
    reasons: Mapping[str, str] = field(default_factory=dict)
    iteration_log: tuple[IterationRecord, ...] = ()
    bridges: tuple[NddDonor, ...] = ()
    remaining_ndds: tuple[str, ...] = ()

    @property
    def matched(self) -> list[str]:
        out = [u for c in self.cycles for u in c.vertices]
        out += [u for c in self.chains for u in c.vertices]
        return out

    def exchange(self, exchange_id: str) -> Union[Cycle, Chain]:
        for x in (*self.cycles, *self.chains):
            if x.id == exchange_id:
                return x
        raise KeyError(exchange_id)

    def outcome(self) -> tuple:
        """Comparable summary: exchanges in discovery order plus the unmatched set."""
        events = []
        for c in self.cycles:
            events.append((c.iteration, "cycle", None, c.vertices, c.weights))
        for c in self.chains:
            events.append((c.iteration, "chain", c.ndd_uid, c.vertices, c.weights))
        events.sort(key=lambda e: e[0])
        return tuple(events), tuple(sorted(self.unmatched))


class _EdgeCache:
    """Edge scores depend only on the two profiles and k*, so rescoring survivors can reuse them."""

    def __init__(self, config: EngineConfig, k_star: int):
        self.config = config
        self.k_star = k_star
        self._cells: Dict[tuple[str, str], EdgeScoreBreakdown] = {}

    def matrix(self, pool: Pool, include_ndds: bool) -> WeightMatrix:
        verts: List[Vertex] = list(pool.pairs) + (list(pool.ndds) if include_ndds else [])
        rows = []
        for v in verts:
            row = []
            for u in verts:
                if not isinstance(u, Pair):
                    row.append(ZERO_EDGE)
                    continue
                key = (v.uid, u.uid)
                cell = self._cells.get(key)
                if cell is None:
                    cell = self._cells[key] = edge_score(v, u, self.config, self.k_star)
                row.append(cell)
            rows.append(tuple(row))
        return WeightMatrix(tuple(v.uid for v in verts), tuple(rows),
                            frozenset(v.uid for v in verts if isinstance(v, Pair)))


def _unmatched_reason(g: SuccessorGraph, uid: str, f_star: Fraction) -> str:
    best = g.best_weight[uid]
    if best == 0:
        return REASON_NO_DONOR
    if best <= f_star:
        return REASON_FILTERED
    return REASON_NO_CYCLE


def run_ikepa(pool: Pool, config: EngineConfig = EngineConfig()) -> MatchResult:
    """Run the iterative mechanism on a pool whose priorities are already set.

    Stops when the pool is empty or an iteration yields no exchange.
    """
    cache = _EdgeCache(config, config.effective_k_star(pool.n_sd))
    cycles: list[Cycle] = []
    chains: list[Chain] = []
    log: list[IterationRecord] = []
    bridges: list[NddDonor] = []
    reasons: dict[str, str] = {}
    use_chains = config.chains_enabled
    iteration = 0
    while pool.pairs:
        iteration += 1
        W = cache.matrix(pool, use_chains)
        queue = order_queue(pool)
        g = gen_successor_graph(W, pool, config)
        base = dict(
            iteration=iteration,
            survivors=tuple(p.uid for p in pool.pairs),
            ndds=tuple(d.uid for d in pool.ndds) if use_chains else (),
            queue=tuple(queue),
            successors=dict(g.succ),
            best_weights=dict(g.best_weight),
            tied=dict(g.tied),
        )
        proposal = build_chain(pool, W, config, graph=g) if use_chains else None
        if proposal is not None:
            cid = f"K{len(chains) + 1}"
            path = (proposal.ndd_uid,) + proposal.vertices
            weights = tuple(W.weight(path[i], path[i + 1]) for i in range(len(proposal.vertices)))
            last = pool.pair(proposal.vertices[-1])
            bridge = NddDonor(bridge_uid(last.uid), last.donor, pool.next_seq(), bridged_from=last.uid)
            chains.append(Chain(cid, proposal.ndd_uid, proposal.vertices, weights, iteration,
                                last.uid, bridge.uid))
            log.append(IterationRecord(**base, exchange=cid, removed=path))
            pool = remove_cycle(pool, path).extended(ndds=[bridge])
            bridges.append(bridge)
            continue
        found = first_cycle(g, queue, config.l_max)
        if found is None:
            for uid in queue:
                reasons[uid] = _unmatched_reason(g, uid, config.f_star)
            log.append(IterationRecord(**base))
            break
        cid = f"C{len(cycles) + 1}"
        k = len(found)
        weights = tuple(W.weight(found[(i + 1) % k], found[i]) for i in range(k))
        cycles.append(Cycle(cid, found, weights, iteration))
        log.append(IterationRecord(**base, exchange=cid, removed=found))
        pool = remove_cycle(pool, found)
    unmatched = tuple(p.uid for p in pool.pairs)
    return MatchResult(
        cycles=tuple(cycles),
        chains=tuple(chains),
        unmatched=unmatched,
        reasons={u: reasons[u] for u in unmatched},
        iteration_log=tuple(log),
        bridges=tuple(bridges),
        remaining_ndds=tuple(d.uid for d in pool.ndds),
    )
