"""Multi-round replay: arrivals, matching, offer review, carry-over.

Each round adds that round's arriving pairs, recomputes priorities (pairs
carried over from an earlier round gain waiting score), runs the matcher
and applies the review verdicts.  Exchanges that are not explicitly
rejected are accepted.  Pairs in rejected exchanges, like unmatched pairs,
stay in the pool for the next round.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .config import EngineConfig
from .matching import Chain, MatchResult, run_ikepa
from .priority import PriorityBreakdown, calculate_priorities
from .registry import FORMAT_VERSION, Pool, PoolFormatError, records_to_pool


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class Review:
    accepted: tuple[str, ...] = ()
    rejected: tuple[str, ...] = ()
    reject_all: bool = False


@dataclass(frozen=True)
class RoundState:
    round: int
    pool: Pool  # as matched this round: arrivals applied, priorities set
    result: MatchResult
    priorities: Mapping[str, PriorityBreakdown]
    accepted: tuple[str, ...] = ()
    rejected: tuple[str, ...] = ()


@dataclass(frozen=True)
class SimulationResult:
    rounds: tuple[RoundState, ...]
    final_pool: Pool
    initial_pool: Pool = field(default_factory=Pool)


def apply_review(result: MatchResult, review: Optional[Review]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Split exchange ids into (accepted, rejected); unknown ids are an error."""
    ids = [x.id for x in (*result.cycles, *result.chains)]
    if review is None:
        return tuple(ids), ()
    unknown = sorted((set(review.accepted) | set(review.rejected)) - set(ids))
    if unknown:
        raise SimulationError(f"unknown exchange id(s) in review: {unknown}")
    both = sorted(set(review.accepted) & set(review.rejected))
    if both:
        raise SimulationError(f"exchange id(s) both accepted and rejected: {both}")
    if review.reject_all:
        if review.accepted:
            raise SimulationError("a round cannot both reject all and accept some exchanges")
        return (), tuple(ids)
    rejected = tuple(i for i in ids if i in review.rejected)
    return tuple(i for i in ids if i not in rejected), rejected


def carry_over(pool: Pool, result: MatchResult, accepted: Sequence[str]) -> Pool:
    """Remove accepted exchanges; an accepted chain consumes its NDD and leaves a bridge donor."""
    gone: list[str] = []
    bridges = []
    by_bridge = {b.uid: b for b in result.bridges}
    for xid in accepted:
        x = result.exchange(xid)
        gone.extend(x.vertices)
        if isinstance(x, Chain):
            if any(b.uid == x.ndd_uid for b in bridges):
                bridges = [b for b in bridges if b.uid != x.ndd_uid]
            elif any(d.uid == x.ndd_uid for d in pool.ndds):
                gone.append(x.ndd_uid)
            else:
                raise SimulationError(f"{xid} starts from a bridge donor whose chain was not accepted")
            bridges.append(by_bridge[x.bridge_uid])
    survivor = pool.without(gone)
    seq = survivor.next_seq()
    renumbered = []
    for b in bridges:
        renumbered.append(type(b)(b.uid, b.donor, seq, b.bridged_from))
        seq += 1
    return survivor.extended(ndds=renumbered)


def simulate(initial: Pool, config: EngineConfig, rounds: int,
             arrivals: Optional[Mapping[int, Sequence[Mapping[str, Any]]]] = None,
             reviews: Optional[Mapping[int, Review]] = None) -> SimulationResult:
    arrivals = arrivals or {}
    reviews = reviews or {}
    bad = sorted(r for r in list(arrivals) + list(reviews) if not 1 <= r <= rounds)
    if bad:
        raise SimulationError(f"round index out of range 1..{rounds}: {bad}")
    pool = initial
    states = []
    for r in range(1, rounds + 1):
        if arrivals.get(r):
            pool = records_to_pool(arrivals[r], config, first_seq=pool.next_seq(), base=pool)
        pool, bd = calculate_priorities(pool, config)
        result = run_ikepa(pool, config)
        accepted, rejected = apply_review(result, reviews.get(r))
        states.append(RoundState(r, pool, result, bd, accepted, rejected))
        pool = carry_over(pool, result, accepted)
    return SimulationResult(tuple(states), pool, initial)


# -- round-indexed files -------------------------------------------------------

def _rounds_section(path: Path) -> Mapping[str, Any]:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PoolFormatError([(str(path), "*", f"invalid JSON: {exc}")]) from None
    if not isinstance(data, dict) or not isinstance(data.get("rounds"), dict):
        raise PoolFormatError([(str(path), "rounds", "expected an object keyed by round number")])
    if data.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise PoolFormatError([(str(path), "format_version", f"unsupported version {data['format_version']!r}")])
    return data["rounds"]


def _round_index(key: str, path: Path) -> int:
    try:
        return int(key)
    except ValueError:
        raise PoolFormatError([(str(path), "rounds", f"round key {key!r} is not an integer")]) from None


def load_arrivals(path: Path | str) -> dict[int, list[dict[str, Any]]]:
    """``{"format_version": 1, "rounds": {"2": [pair records...]}}``"""
    path = Path(path)
    out = {}
    for key, records in _rounds_section(path).items():
        if not isinstance(records, list):
            raise PoolFormatError([(str(path), f"rounds.{key}", "expected a list of records")])
        out[_round_index(key, path)] = records
    return out


def load_reviews(path: Path | str) -> dict[int, Review]:
    """``{"format_version": 1, "rounds": {"1": {"accepted": [...], "rejected": [...]}}}``

    ``"rejected": "all"`` rejects every exchange proposed that round.
    """
    path = Path(path)
    out = {}
    for key, entry in _rounds_section(path).items():
        if not isinstance(entry, dict):
            raise PoolFormatError([(str(path), f"rounds.{key}", "expected accepted/rejected lists")])
        rej = entry.get("rejected", [])
        reject_all = rej == "all"
        out[_round_index(key, path)] = Review(
            accepted=tuple(entry.get("accepted", [])),
            rejected=() if reject_all else tuple(rej),
            reject_all=reject_all,
        )
    return out
