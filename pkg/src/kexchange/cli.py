"""Batch command line: ``kexchange {match,score-matrix,priority,simulate,explain}``.

Exit status: 0 success, 1 invalid input, 2 I/O failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import report
from .config import ConfigError, EngineConfig, load_config
from .matching import MatchingInvariantError, run_ikepa
from .priority import calculate_priorities
from .registry import FORMAT_VERSION, PoolFormatError, detect_format, parse_pool, pool_records, serialize_pool
from .scoring import gen_compatibility_matrix
from .simulate import SimulationError, load_arrivals, load_reviews, simulate

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("kexchange")


class UsageError(ValueError):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pool", required=True, type=Path, help="pool file (.csv, .tsv or .json)")
    p.add_argument("--config", type=Path, help="flat JSON object of engine constants")
    p.add_argument("--out", type=Path, help="write here instead of stdout")
    p.add_argument("--format", choices=("table", "object"), default="object",
                   help="object = versioned JSON document (default), table = plain text")
    p.add_argument("--tiebreak", choices=("priority", "lexicographic"), help="override tiebreak_mode")
    p.add_argument("--chains", action="store_true", default=None, help="enable altruistic-donor chains")
    p.add_argument("--timestamp", help="fixed metadata timestamp (also $%s)" % report.TIMESTAMP_ENV)
    p.add_argument("--workers", type=int, default=1, help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kexchange", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("match", help="run the matcher once and report exchanges"))
    _common(sub.add_parser("score-matrix", help="print every donor/patient weight with its components"))
    _common(sub.add_parser("priority", help="print per-pair priority factors"))

    sim = sub.add_parser("simulate", help="replay several rounds with arrivals and offer reviews")
    _common(sim)
    sim.add_argument("--rounds", type=int, required=True)
    sim.add_argument("--arrivals", type=Path, help="JSON: round -> new pair records")
    sim.add_argument("--reviews", type=Path, help="JSON: round -> accepted/rejected exchange ids")
    sim.add_argument("--state-out", type=Path, help="write the carried-over pool here")

    exp = sub.add_parser("explain", help="trace one pair through a run")
    _common(exp)
    exp.add_argument("--uid", required=True)
    return parser


def _config(args: argparse.Namespace) -> EngineConfig:
    config = load_config(args.config)
    changes: dict[str, Any] = {}
    if args.tiebreak:
        changes["tiebreak_mode"] = args.tiebreak
    if args.chains:
        changes["chains_enabled"] = True
    return config.replace(**changes) if changes else config


def _emit(args: argparse.Namespace, doc: dict, table: str) -> None:
    text = table if args.format == "table" else json.dumps(doc, indent=2) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_match(args: argparse.Namespace) -> int:
    config = _config(args)
    pool, _ = calculate_priorities(parse_pool(args.pool, config), config)
    result = run_ikepa(pool, config)
    _emit(args, report.match_document(result, config, args.timestamp), report.match_table(result))
    return EXIT_OK


def cmd_score_matrix(args: argparse.Namespace) -> int:
    config = _config(args)
    pool = parse_pool(args.pool, config)
    W = gen_compatibility_matrix(pool, config, workers=args.workers)
    _emit(args, report.matrix_document(W, config, args.timestamp), report.matrix_table(W))
    return EXIT_OK


def cmd_priority(args: argparse.Namespace) -> int:
    config = _config(args)
    _, bd = calculate_priorities(parse_pool(args.pool, config), config)
    _emit(args, report.priority_document(bd, config, args.timestamp), report.priority_table(bd))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config(args)
    if args.rounds < 0:
        raise UsageError("--rounds must be >= 0")
    initial = parse_pool(args.pool, config)
    arrivals = load_arrivals(args.arrivals) if args.arrivals else {}
    reviews = load_reviews(args.reviews) if args.reviews else {}
    sim = simulate(initial, config, args.rounds, arrivals, reviews)
    stamp = args.timestamp or report.now_stamp()
    rounds = []
    lines = []
    for st in sim.rounds:
        rounds.append({
            "round": st.round,
            "pool": [p.uid for p in st.pool.pairs],
            "priorities": report.priority_document(st.priorities, config, stamp)["pairs"],
            "result": report.match_document(st.result, config, stamp),
            "accepted": list(st.accepted),
            "rejected": list(st.rejected),
        })
        lines.append(f"== round {st.round}: accepted {list(st.accepted)} rejected {list(st.rejected)}")
        lines.append(report.match_table(st.result).rstrip("\n"))
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "simulation",
        "metadata": report.metadata(config, stamp, rounds=args.rounds),
        "rounds": rounds,
        "final_state": pool_records(sim.final_pool),
    }
    lines.append(f"carried over: {[p.uid for p in sim.final_pool.pairs]}")
    _emit(args, doc, "\n".join(lines) + "\n")
    if args.state_out:
        args.state_out.write_text(serialize_pool(sim.final_pool, detect_format(args.state_out)))
    return EXIT_OK


def cmd_explain(args: argparse.Namespace) -> int:
    config = _config(args)
    pool, _ = calculate_priorities(parse_pool(args.pool, config), config)
    if args.uid not in pool.uids():
        raise UsageError(f"unknown pair uid {args.uid!r}")
    result = run_ikepa(pool, config)
    doc = report.explain_document(args.uid, pool, result, config, args.timestamp)
    _emit(args, doc, report.explain_table(doc))
    return EXIT_OK


COMMANDS = {
    "match": cmd_match,
    "score-matrix": cmd_score_matrix,
    "priority": cmd_priority,
    "simulate": cmd_simulate,
    "explain": cmd_explain,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PoolFormatError as exc:
        for where, fld, msg in exc.problems:
            print(f"error: {where}, field {fld!r}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, SimulationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MatchingInvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.debug("unexpected failure", exc_info=True)
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
