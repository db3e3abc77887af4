"""Structured documents and plain-text tables for engine outputs.

Every document carries ``format_version``; numbers appear both as JSON
numbers and as exact text (``"1/3"``) so nothing is lost to floats.
"""

from __future__ import annotations

import datetime as _dt
import os
from fractions import Fraction
from typing import Any, Mapping, Optional, Sequence

from .config import EngineConfig, format_number
from .matching import REASON_NO_CYCLE, REASON_NO_DONOR, MatchResult
from .priority import PriorityBreakdown
from .registry import FORMAT_VERSION, Pool
from .scoring import WeightMatrix

TIMESTAMP_ENV = "KEXCHANGE_TIMESTAMP"


def now_stamp() -> str:
    """UTC timestamp, or the fixed value from $KEXCHANGE_TIMESTAMP for reproducible output."""
    fixed = os.environ.get(TIMESTAMP_ENV)
    if fixed:
        return fixed
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def num(x: Fraction) -> dict[str, Any]:
    return {"value": float(x), "exact": format_number(x)}


def metadata(config: EngineConfig, timestamp: Optional[str] = None, **extra) -> dict[str, Any]:
    out = {
        "config_hash": config.digest(),
        "timestamp": timestamp or now_stamp(),
        "tiebreak_mode": config.tiebreak_mode,
        "chains_enabled": config.chains_enabled,
        "l_max": config.l_max,
        "f_star": format_number(config.f_star),
    }
    out.update(extra)
    return out


# -- match ---------------------------------------------------------------------

def match_document(result: MatchResult, config: EngineConfig, timestamp: Optional[str] = None) -> dict:
    cycles = []
    for c in result.cycles:
        k = len(c.vertices)
        hops = [{"patient": c.vertices[i], "donor": c.vertices[(i + 1) % k], "weight": num(c.weights[i])}
                for i in range(k)]
        cycles.append({"id": c.id, "iteration": c.iteration, "internal": c.internal,
                       "vertices": list(c.vertices), "hops": hops})
    chains = []
    for ch in result.chains:
        flow = (ch.ndd_uid,) + ch.vertices
        hops = [{"donor": flow[i], "patient": flow[i + 1], "weight": num(ch.weights[i])}
                for i in range(len(ch.vertices))]
        chains.append({"id": ch.id, "iteration": ch.iteration, "ndd": ch.ndd_uid,
                       "vertices": list(ch.vertices), "hops": hops,
                       "bridge_donor": ch.bridge_donor, "bridge_uid": ch.bridge_uid})
    log = []
    for rec in result.iteration_log:
        log.append({
            "iteration": rec.iteration,
            "queue": list(rec.queue),
            "ndds": list(rec.ndds),
            "successors": dict(rec.successors),
            "best_weights": {u: format_number(w) for u, w in rec.best_weights.items()},
            "ties": {u: list(t) for u, t in rec.tied.items() if len(t) > 1},
            "exchange": rec.exchange,
            "removed": list(rec.removed),
        })
    return {
        "format_version": FORMAT_VERSION,
        "kind": "match_result",
        "metadata": metadata(config, timestamp),
        "cycles": cycles,
        "chains": chains,
        "unmatched": [{"uid": u, "reason": result.reasons.get(u, REASON_NO_CYCLE)} for u in result.unmatched],
        "bridge_donors": [b.uid for b in result.bridges],
        "iteration_log": log,
    }


def match_table(result: MatchResult) -> str:
    rows = []
    for c in result.cycles:
        flag = "  (internal)" if c.internal else ""
        k = len(c.vertices)
        hops = ", ".join(f"{c.vertices[i]}<-{c.vertices[(i + 1) % k]} {format_number(c.weights[i])}"
                         for i in range(k))
        rows.append((c.iteration, f"{c.id}  iter {c.iteration}  ({', '.join(c.vertices)}){flag}  [{hops}]"))
    for ch in result.chains:
        flow = " -> ".join((ch.ndd_uid,) + ch.vertices)
        ws = ", ".join(format_number(w) for w in ch.weights)
        rows.append((ch.iteration, f"{ch.id}  iter {ch.iteration}  {flow}  [{ws}]  bridge: {ch.bridge_donor}"))
    lines = [text for _, text in sorted(rows, key=lambda r: r[0])] or ["no exchanges"]
    for u in result.unmatched:
        lines.append(f"unmatched {u}: {result.reasons.get(u, REASON_NO_CYCLE)}")
    return "\n".join(lines) + "\n"


# -- score matrix --------------------------------------------------------------

def matrix_document(W: WeightMatrix, config: EngineConfig, timestamp: Optional[str] = None) -> dict:
    cells = []
    for i, donor in enumerate(W.labels):
        for j, patient in enumerate(W.labels):
            if patient not in W.patient_labels:
                continue
            c = W.cells[i][j]
            cells.append({"donor": donor, "patient": patient,
                          **{k: format_number(getattr(c, k)) for k in
                             ("abo", "hla", "age", "kidney", "pin", "general", "sas", "final")}})
    return {
        "format_version": FORMAT_VERSION,
        "kind": "score_matrix",
        "metadata": metadata(config, timestamp),
        "labels": list(W.labels),
        "orientation": "w[donor][patient]",
        "final": [[format_number(x) for x in row] for row in W.w],
        "cells": cells,
    }


def _grid(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    fmt = lambda r: "  ".join(str(x).rjust(w) for x, w in zip(r, widths))  # noqa: E731
    return "\n".join([fmt(header)] + [fmt(r) for r in rows]) + "\n"


def matrix_table(W: WeightMatrix) -> str:
    patients = [u for u in W.labels if u in W.patient_labels]
    rows = [[f"D:{d}"] + [format_number(W.weight(d, p)) for p in patients] for d in W.labels]
    return _grid(["donor \\ patient"] + patients, rows)


# -- priority ------------------------------------------------------------------

_FACTORS = ("pra", "pair_type", "age", "va", "ipd", "dist", "eco", "wt")


def priority_document(breakdowns: Mapping[str, PriorityBreakdown], config: EngineConfig,
                      timestamp: Optional[str] = None) -> dict:
    pairs = []
    for uid, bd in breakdowns.items():
        entry = {"uid": uid, **{k: format_number(getattr(bd, k)) for k in _FACTORS}}
        entry["fixed"] = None if bd.fixed is None else format_number(bd.fixed)
        entry["total"] = format_number(bd.total)
        pairs.append(entry)
    return {"format_version": FORMAT_VERSION, "kind": "priorities",
            "metadata": metadata(config, timestamp), "pairs": pairs}


def priority_table(breakdowns: Mapping[str, PriorityBreakdown]) -> str:
    rows = []
    for uid, bd in breakdowns.items():
        fixed = "-" if bd.fixed is None else format_number(bd.fixed)
        rows.append([uid, *(format_number(getattr(bd, k)) for k in _FACTORS), fixed, format_number(bd.total)])
    return _grid(["uid", *_FACTORS, "fixed", "total"], rows)


# -- explain -------------------------------------------------------------------

def _walk(successors: Mapping[str, Optional[str]], start: str, l_max: int) -> tuple[list[str], str]:
    path = [start]
    v = successors.get(start)
    while True:
        if v is None:
            return path, "terminates"
        if v == start:
            return path, "closes"
        if v not in successors:
            return path + [v], "reaches an altruistic donor"
        if v in path:
            return path + [v], "loops back without returning"
        if len(path) == l_max:
            return path + [v], "exceeds the length cap"
        path.append(v)
        v = successors.get(v)


def explain_document(uid: str, pool: Pool, result: MatchResult, config: EngineConfig,
                     timestamp: Optional[str] = None) -> dict:
    """Trace one pair through the run: what it wanted each iteration and how it ended."""
    if uid not in pool.uids():
        raise KeyError(uid)
    iterations = []
    for rec in result.iteration_log:
        if uid not in rec.survivors:
            continue
        best = rec.best_weights[uid]
        iterations.append({
            "iteration": rec.iteration,
            "row_max": format_number(best),
            "tied_donors": list(rec.tied.get(uid, ())),
            "chosen_donor": rec.successors[uid],
            "passes_f_star": best > config.f_star,
        })
    status: str
    detail: str
    exchange = next((x for x in (*result.cycles, *result.chains) if uid in x.vertices), None)
    if exchange is not None:
        status = "matched"
        detail = f"matched in iteration {exchange.iteration} ({exchange.id})"
    else:
        status = "unmatched"
        last = result.iteration_log[-1]
        reason = result.reasons.get(uid, REASON_NO_CYCLE)
        if reason == REASON_NO_CYCLE:
            path, how = _walk(last.successors, uid, config.l_max)
            detail = f"no cycle closes: successor {' -> '.join(path[1:])} chain {how}"
        elif reason == REASON_NO_DONOR:
            detail = "no compatible donor: every offer scores 0"
        else:
            detail = (f"filtered by F_star: best offer {format_number(last.best_weights[uid])} "
                      f"does not exceed {format_number(config.f_star)}")
    return {
        "format_version": FORMAT_VERSION,
        "kind": "explanation",
        "metadata": metadata(config, timestamp),
        "uid": uid,
        "status": status,
        "detail": detail,
        "iterations": iterations,
    }


def explain_table(doc: Mapping[str, Any]) -> str:
    lines = [f"{doc['uid']}: {doc['detail']}"]
    for it in doc["iterations"]:
        ties = f" tie among {', '.join(it['tied_donors'])}" if len(it["tied_donors"]) > 1 else ""
        keep = "" if it["passes_f_star"] else " (below F_star, no edge)"
        lines.append(f"  iter {it['iteration']}: row max {it['row_max']} -> {it['chosen_donor']}{ties}{keep}")
    return "\n".join(lines) + "\n"
