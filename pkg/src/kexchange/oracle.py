"""Brute-force reference for the matching loop, for small pools in tests.

Nothing here calls into ``scoring`` or ``matching`` logic: weights are
re-derived from raw profile fields, every bounded cycle is enumerated,
and the winning exchange is picked by replaying the selection rule
against the full candidate set.  Only the result dataclasses are shared.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Optional, Union

from .config import EngineConfig
from .matching import Chain, Cycle, MatchResult, SuccessorGraph
from .registry import NddDonor, Pair, Pool

DEFAULT_BOUND = 12

_GIVES_TO = {"O": "O A B AB", "A": "A AB", "B": "B AB", "AB": "AB"}


class OracleBoundError(ValueError):
    pass


def _check_bound(n: int, bound: int) -> None:
    if n > bound:
        raise OracleBoundError(f"{n} vertices exceeds the oracle bound of {bound}")


def enumerate_cycles(g: SuccessorGraph, l_max: int, bound: int = DEFAULT_BOUND) -> list[tuple[str, ...]]:
    """Every simple cycle of at most ``l_max`` vertices, smallest uid first, sorted."""
    _check_bound(g.n, bound)
    found = set()
    for start in g.vertices:
        walk = [start]
        v = g.succ.get(start)
        while v is not None and v in g.succ and v not in walk and len(walk) <= l_max:
            walk.append(v)
            v = g.succ.get(v)
        if v == start and len(walk) <= l_max:
            i = walk.index(min(walk))
            found.add(tuple(walk[i:] + walk[:i]))
    return sorted(found)


def reference_weight(donor, patient, config: EngineConfig, k_star: int) -> Fraction:
    """Edge weight recomputed straight from the profiles (donor -> patient)."""
    d, p = donor, patient
    if p.blood.abo.value not in _GIVES_TO[d.blood.abo.value].split():
        return Fraction(0)
    if d.blood.rh_positive and not p.blood.rh_positive:
        return Fraction(0)
    shared = len(set(d.hla).intersection(p.hla))
    if shared == 0 or shared < config.h_min:
        return Fraction(0)
    gap = d.age - p.age
    age = config.v_a if gap < 0 else (config.v_a - config.alpha_a * gap if gap <= config.d_a else 0)
    size_gap = abs(d.kidney_size - p.kidney_size)
    kidney = config.v_k - size_gap if size_gap <= config.d_k else 0
    common = 0
    while common < 6 and d.pincode[common] == p.pincode[common]:
        common += 1
    pin = {6: config.v_p, 5: config.v_p - config.d_p, 4: config.v_p - config.d_p,
           3: config.v_p - config.d_p, 2: config.v_p - config.alpha_p1 * config.d_p,
           1: config.v_p - config.alpha_p2 * config.d_p}.get(common, 0)
    general = shared + config.v_b + age + kidney + pin
    prefs = list(p.societal_pref)
    if not prefs:
        sas = Fraction(1)
    elif d.societal_dist in prefs:
        sas = Fraction(1, prefs.index(d.societal_dist) + 1)
    else:
        sas = Fraction(1, k_star)
    return Fraction(general) * sas


def _graph(pairs: list[Pair], ndds: list[NddDonor], weigh, config: EngineConfig) -> SuccessorGraph:
    donors: list[Union[Pair, NddDonor]] = pairs + ndds
    succ: dict[str, Optional[str]] = {}
    best: dict[str, Fraction] = {}
    for p in pairs:
        scored = [(weigh(d, p), d) for d in donors]
        top = max(w for w, _ in scored)
        best[p.uid] = top
        if top <= config.f_star:
            succ[p.uid] = None
            continue
        # ties: any pair beats an altruistic donor; among pairs, by mode
        def rank(d):
            if isinstance(d, NddDonor):
                return (1, 0, d.enrolled_at, d.uid)
            lead = -d.priority if config.tiebreak_mode == "priority" else 0
            return (0, lead, d.enrolled_at, d.uid)
        winner = sorted((d for w, d in scored if w == top), key=rank)[0]
        succ[p.uid] = winner.uid
    return SuccessorGraph(tuple(p.uid for p in pairs), succ, best, {})


def _all_chains(g: SuccessorGraph, ndd: str, l_max: int) -> list[tuple[str, ...]]:
    """Brute force: every ordered selection of distinct patients consistent with succ."""
    out = []
    frontier = [()]
    for _ in range(l_max):
        nxt = []
        for path in frontier:
            tail = path[-1] if path else ndd
            for u in g.vertices:
                if u not in path and g.succ[u] == tail:
                    nxt.append(path + (u,))
        out += nxt
        frontier = nxt
    return out


def reference_run(pool: Pool, config: EngineConfig = EngineConfig(), bound: int = DEFAULT_BOUND) -> MatchResult:
    _check_bound(len(pool.pairs) + len(pool.ndds), bound)
    k_star = config.k_star if config.k_star is not None else pool.n_sd + 1
    memo: dict[tuple[str, str], Fraction] = {}

    def weigh(donor_side, pair: Pair) -> Fraction:
        key = (donor_side.uid, pair.uid)
        if key not in memo:
            memo[key] = reference_weight(donor_side.donor, pair.patient, config, k_star)
        return memo[key]

    pairs = list(pool.pairs)
    ndds = list(pool.ndds) if config.chains_enabled else []
    by_uid: dict[str, Union[Pair, NddDonor]] = {v.uid: v for v in pairs + ndds}
    next_seq = max([v.enrolled_at for v in pool.pairs] + [d.enrolled_at for d in pool.ndds], default=-1) + 1
    cycles: list[Cycle] = []
    chains: list[Chain] = []
    bridges: list[NddDonor] = []
    it = 0
    while pairs:
        it += 1
        g = _graph(pairs, ndds, weigh, config)
        queue = [p.uid for p in sorted(pairs, key=lambda p: (-p.priority, p.enrolled_at, p.uid))]
        pos = {u: i for i, u in enumerate(queue)}

        options = []
        for n_i, d in enumerate(sorted(ndds, key=lambda d: (d.enrolled_at, d.uid))):
            for path in _all_chains(g, d.uid, config.l_max):
                options.append(((-len(path), tuple(sorted(pos[u] for u in path)), n_i), d, path))
        if options:
            _, ndd, path = min(options, key=lambda o: o[0])
            hops = (ndd.uid,) + path
            weights = tuple(weigh(by_uid[hops[i]], by_uid[hops[i + 1]]) for i in range(len(path)))
            last = by_uid[path[-1]]
            bridge = NddDonor(f"{last.uid}-bridge", last.donor, next_seq, bridged_from=last.uid)
            next_seq += 1
            chains.append(Chain(f"K{len(chains) + 1}", ndd.uid, path, weights, it, last.uid, bridge.uid))
            bridges.append(bridge)
            pairs = [p for p in pairs if p.uid not in path]
            ndds = [d for d in ndds if d.uid != ndd.uid] + [bridge]
            by_uid[bridge.uid] = bridge
            continue

        cands = enumerate_cycles(g, config.l_max, bound)
        if not cands:
            break
        # the first queue vertex lying on any cycle seeds the winning rotation
        seed = min((u for c in cands for u in c), key=pos.__getitem__)
        cyc = next(c for c in cands if seed in c)
        i = cyc.index(seed)
        cyc = cyc[i:] + cyc[:i]
        weights = tuple(weigh(by_uid[cyc[(j + 1) % len(cyc)]], by_uid[cyc[j]]) for j in range(len(cyc)))
        cycles.append(Cycle(f"C{len(cycles) + 1}", cyc, weights, it))
        pairs = [p for p in pairs if p.uid not in cyc]

    return MatchResult(
        cycles=tuple(cycles),
        chains=tuple(chains),
        unmatched=tuple(p.uid for p in pairs),
        bridges=tuple(bridges),
        remaining_ndds=tuple(d.uid for d in ndds),
    )


def outcomes_equal(a: MatchResult, b: MatchResult) -> bool:
    return a.outcome() == b.outcome()


def describe_mismatch(a: MatchResult, b: MatchResult) -> Mapping[str, object]:
    return {"engine": a.outcome(), "reference": b.outcome()}
