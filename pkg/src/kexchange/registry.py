"""Pairs, altruistic donors and pools, plus the pool file formats.

Two encodings carry the same flat records:

* delimited text (``.csv`` / ``.tsv``) with a header row, and
* a JSON object ``{"format_version": 1, "records": [...]}``.

Antigen lists and societal preference lists are semicolon-joined in the
delimited form and may be either joined strings or arrays in JSON.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .config import EngineConfig, as_fraction, format_number

FORMAT_VERSION = 1

PAIR_FIELDS = (
    "uid",
    "ndd",
    "patient_name",
    "patient_age",
    "patient_blood",
    "patient_hla",
    "patient_kidney_size",
    "patient_pincode",
    "pra",
    "societal_pref",
    "distance_km",
    "economic_slab_lakhs",
    "was_donor",
    "vascular_status",
    "donor_name",
    "donor_age",
    "donor_blood",
    "donor_hla",
    "donor_kidney_size",
    "donor_pincode",
    "donor_societal_dist",
    "fixed_priority",
    "wt_score",
    "is_initial",
)
DONOR_ONLY_FIELDS = (
    "uid",
    "ndd",
    "donor_name",
    "donor_age",
    "donor_blood",
    "donor_hla",
    "donor_kidney_size",
    "donor_pincode",
    "donor_societal_dist",
)

_PIN_RE = re.compile(r"^[0-9]{6}$")


class PoolFormatError(ValueError):
    """One or more records failed to parse; ``problems`` lists (record, field, message)."""

    def __init__(self, problems: Sequence[tuple[str, str, str]]):
        self.problems = list(problems)
        lines = [f"{where}, field {fld!r}: {msg}" for where, fld, msg in self.problems]
        super().__init__("\n".join(lines))


class ABO(str, Enum):
    A = "A"
    B = "B"
    AB = "AB"
    O = "O"  # noqa: E741


@dataclass(frozen=True)
class BloodGroup:
    abo: ABO
    rh_positive: bool

    @classmethod
    def parse(cls, text: str) -> "BloodGroup":
        t = str(text).strip().upper()
        if len(t) < 2 or t[-1] not in "+-" or t[:-1] not in ABO.__members__:
            raise ValueError(f"unknown blood group {text!r}")
        return cls(ABO(t[:-1]), t[-1] == "+")

    def __str__(self) -> str:
        return f"{self.abo.value}{'+' if self.rh_positive else '-'}"


class VascularStatus(str, Enum):
    NONE = "none"
    SITUATION1 = "situation1"
    SITUATION2 = "situation2"


@dataclass(frozen=True)
class DonorProfile:
    name: str
    age: int
    blood: BloodGroup
    hla: tuple[str, ...]
    kidney_size: Fraction
    pincode: str
    societal_dist: Optional[str] = None


@dataclass(frozen=True)
class PatientProfile:
    name: str
    age: int
    blood: BloodGroup
    hla: tuple[str, ...]
    kidney_size: Fraction
    pincode: str
    pra: Fraction = Fraction(0)
    societal_pref: tuple[str, ...] = ()
    distance_km: Fraction = Fraction(0)
    economic_slab_lakhs: Fraction = Fraction(10)
    was_donor: bool = False
    vascular_status: VascularStatus = VascularStatus.NONE


@dataclass(frozen=True)
class Pair:
    uid: str
    patient: PatientProfile
    donor: DonorProfile
    enrolled_at: int
    priority: Fraction = Fraction(0)
    wt_score: Fraction = Fraction(0)
    is_initial: bool = True
    # Operator-supplied priority that replaces the seven-factor sum.
    fixed_priority: Optional[Fraction] = None

    def replace(self, **changes) -> "Pair":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class NddDonor:
    uid: str
    donor: DonorProfile
    enrolled_at: int = 0
    # uid of the pair whose donor this is, when re-entered as a bridge donor
    bridged_from: Optional[str] = None


@dataclass(frozen=True)
class Pool:
    pairs: tuple[Pair, ...] = ()
    ndds: tuple[NddDonor, ...] = ()
    societal_universe: frozenset[str] = field(default=frozenset())

    def __post_init__(self) -> None:
        uids = [p.uid for p in self.pairs] + [d.uid for d in self.ndds]
        dupes = {u for u in uids if uids.count(u) > 1}
        if dupes:
            raise ValueError(f"duplicate uid(s): {sorted(dupes)}")
        if not self.societal_universe:
            object.__setattr__(self, "societal_universe", infer_universe(self.pairs, self.ndds))

    @property
    def n_sd(self) -> int:
        return len(self.societal_universe)

    def pair(self, uid: str) -> Pair:
        for p in self.pairs:
            if p.uid == uid:
                return p
        raise KeyError(uid)

    def uids(self) -> list[str]:
        return [p.uid for p in self.pairs]

    def next_seq(self) -> int:
        seqs = [p.enrolled_at for p in self.pairs] + [d.enrolled_at for d in self.ndds]
        return max(seqs, default=-1) + 1

    def with_pairs(self, pairs: Iterable[Pair]) -> "Pool":
        return Pool(tuple(pairs), self.ndds, self.societal_universe)

    def without(self, uids: Iterable[str]) -> "Pool":
        gone = set(uids)
        missing = gone - {p.uid for p in self.pairs} - {d.uid for d in self.ndds}
        if missing:
            raise KeyError(f"not in pool: {sorted(missing)}")
        return Pool(
            tuple(p for p in self.pairs if p.uid not in gone),
            tuple(d for d in self.ndds if d.uid not in gone),
            self.societal_universe,
        )

    def extended(self, pairs: Sequence[Pair] = (), ndds: Sequence[NddDonor] = ()) -> "Pool":
        all_pairs = self.pairs + tuple(pairs)
        all_ndds = self.ndds + tuple(ndds)
        universe = self.societal_universe | infer_universe(all_pairs, all_ndds)
        return Pool(all_pairs, all_ndds, universe)


def infer_universe(pairs: Iterable[Pair], ndds: Iterable[NddDonor]) -> frozenset[str]:
    labels: set[str] = set()
    for p in pairs:
        labels.update(p.patient.societal_pref)
        if p.donor.societal_dist:
            labels.add(p.donor.societal_dist)
    for d in ndds:
        if d.donor.societal_dist:
            labels.add(d.donor.societal_dist)
    return frozenset(labels)


def _donor_violations(d: DonorProfile, prefix: str, h_star: Optional[int]) -> list[str]:
    out = []
    if d.age < 0:
        out.append(f"{prefix}age must be >= 0")
    if d.kidney_size <= 0:
        out.append(f"{prefix}kidney_size must be > 0")
    if not _PIN_RE.match(d.pincode):
        out.append(f"{prefix}pincode must be 6 digits")
    if len(set(d.hla)) != len(d.hla):
        out.append(f"{prefix}hla entries must be unique")
    if h_star is not None and len(d.hla) != h_star:
        out.append(f"{prefix}hla must list exactly {h_star} antigens")
    return out


def validate_pair(
    pair: Pair, universe: Iterable[str], h_star: Optional[int] = None
) -> list[str]:
    """Return every broken invariant of ``pair``; an empty list means valid."""
    universe = set(universe)
    pt = pair.patient
    out = _donor_violations(pt, "patient ", h_star)  # type: ignore[arg-type]
    out += _donor_violations(pair.donor, "donor ", h_star)
    if not 0 <= pt.pra <= 100:
        out.append("pra must lie in [0, 100]")
    if len(set(pt.societal_pref)) != len(pt.societal_pref):
        out.append("societal_pref entries must be unique")
    for label in pt.societal_pref:
        if label not in universe:
            out.append(f"societal_pref label {label!r} is not in the societal universe")
    sd = pair.donor.societal_dist
    if sd and sd not in universe:
        out.append(f"donor societal_dist {sd!r} is not in the societal universe")
    if pt.distance_km < 0:
        out.append("distance_km must be >= 0")
    if pt.economic_slab_lakhs < 0:
        out.append("economic_slab_lakhs must be >= 0")
    if pair.wt_score < 0:
        out.append("wt_score must be >= 0")
    if pair.priority < 0:
        out.append("priority must be >= 0")
    if pair.is_initial and pair.wt_score != 0:
        out.append("wt_score must be 0 while is_initial is true")
    return out


# -- parsing -------------------------------------------------------------------

def _split_list(value: Any) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        items = [str(v).strip() for v in value]
    else:
        items = [s.strip() for s in str(value).split(";")]
    return tuple(s for s in items if s)


def _blank(value: Any) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


def _parse_bool(value: Any, default: bool) -> bool:
    if _blank(value):
        return default
    if isinstance(value, bool):
        return value
    t = str(value).strip().lower()
    if t in ("true", "yes", "1", "y"):
        return True
    if t in ("false", "no", "0", "n"):
        return False
    raise ValueError(f"expected true/false, got {value!r}")


def _parse_int(value: Any) -> int:
    f = as_fraction(value)
    if f.denominator != 1:
        raise ValueError(f"expected a whole number, got {value!r}")
    return int(f)


def _parse_pin(value: Any) -> str:
    t = str(value).strip()
    if not _PIN_RE.match(t):
        raise ValueError(f"pincode must be 6 digits, got {value!r}")
    return t


class _RecordReader:
    """Pulls typed fields out of one raw record, collecting every problem."""

    def __init__(self, raw: Mapping[str, Any], where: str):
        self.raw = raw
        self.where = where
        self.problems: list[tuple[str, str, str]] = []

    def get(self, name: str, conv, *, required: bool = True, default: Any = None):
        value = self.raw.get(name)
        if _blank(value):
            if required:
                self.problems.append((self.where, name, "missing value"))
            return default
        try:
            return conv(value)
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            self.problems.append((self.where, name, str(exc)))
            return default


def _read_donor(r: _RecordReader, h_star: int) -> Optional[DonorProfile]:
    name = r.get("donor_name", str, required=False, default="")
    age = r.get("donor_age", _parse_int)
    blood = r.get("donor_blood", BloodGroup.parse)
    hla = r.get("donor_hla", _split_list)
    size = r.get("donor_kidney_size", as_fraction)
    pin = r.get("donor_pincode", _parse_pin)
    sd = r.get("donor_societal_dist", lambda v: str(v).strip(), required=False)
    if hla is not None and len(hla) != h_star:
        r.problems.append((r.where, "donor_hla", f"expected {h_star} antigens, got {len(hla)}"))
    if None in (age, blood, hla, size, pin):
        return None
    return DonorProfile(name, age, blood, hla, size, pin, sd or None)


def _record_to_entry(raw: Mapping[str, Any], index: int, seq: int, config: EngineConfig):
    where = f"record {index}"
    if not _blank(raw.get("uid")):
        where += f" (uid {str(raw['uid']).strip()})"
    r = _RecordReader(raw, where)
    uid = r.get("uid", lambda v: str(v).strip())
    is_ndd = r.get("ndd", lambda v: _parse_bool(v, False), required=False, default=False)
    donor = _read_donor(r, config.h_star)
    if is_ndd:
        extra = [k for k in raw if k not in DONOR_ONLY_FIELDS and not _blank(raw[k])]
        for k in extra:
            r.problems.append((where, k, "altruistic donor records carry donor fields only"))
        if r.problems:
            return None, r.problems
        return NddDonor(uid, donor, seq), []

    hla = r.get("patient_hla", _split_list)
    if hla is not None and len(hla) != config.h_star:
        r.problems.append((where, "patient_hla", f"expected {config.h_star} antigens, got {len(hla)}"))

    def pra_conv(v):
        x = as_fraction(v)
        if not 0 <= x <= 100:
            raise ValueError(f"pra must lie in [0, 100], got {v!r}")
        return x

    patient_kwargs = dict(
        name=r.get("patient_name", str, required=False, default=""),
        age=r.get("patient_age", _parse_int),
        blood=r.get("patient_blood", BloodGroup.parse),
        hla=hla,
        kidney_size=r.get("patient_kidney_size", as_fraction),
        pincode=r.get("patient_pincode", _parse_pin),
        pra=r.get("pra", pra_conv, required=False, default=Fraction(0)),
        societal_pref=r.get("societal_pref", _split_list, required=False, default=()),
        distance_km=r.get("distance_km", as_fraction, required=False, default=Fraction(0)),
        economic_slab_lakhs=r.get(
            "economic_slab_lakhs", as_fraction, required=False, default=Fraction(10)
        ),
        was_donor=r.get("was_donor", lambda v: _parse_bool(v, False), required=False, default=False),
        vascular_status=r.get(
            "vascular_status", lambda v: VascularStatus(str(v).strip().lower()),
            required=False, default=VascularStatus.NONE,
        ),
    )
    fixed = r.get("fixed_priority", as_fraction, required=False)
    wt = r.get("wt_score", as_fraction, required=False, default=Fraction(0))
    initial = r.get("is_initial", lambda v: _parse_bool(v, True), required=False, default=True)
    if r.problems or donor is None or None in patient_kwargs.values():
        return None, r.problems
    pair = Pair(
        uid=uid,
        patient=PatientProfile(**patient_kwargs),
        donor=donor,
        enrolled_at=seq,
        wt_score=wt,
        is_initial=initial,
        fixed_priority=fixed,
    )
    return pair, []


def records_to_pool(
    records: Sequence[Mapping[str, Any]],
    config: Optional[EngineConfig] = None,
    *,
    first_seq: int = 0,
    base: Optional[Pool] = None,
) -> Pool:
    """Build a validated pool from flat records; raises PoolFormatError listing every fault."""
    config = config or EngineConfig()
    problems: list[tuple[str, str, str]] = []
    pairs: list[Pair] = []
    ndds: list[NddDonor] = []
    seen: set[str] = set(base.uids() + [d.uid for d in base.ndds]) if base else set()
    for i, raw in enumerate(records, start=1):
        if not isinstance(raw, Mapping):
            problems.append((f"record {i}", "*", "expected a key-value record"))
            continue
        unknown = [k for k in raw if k not in PAIR_FIELDS]
        for k in unknown:
            problems.append((f"record {i}", k, "unknown field"))
        entry, errs = _record_to_entry(raw, i, first_seq + i - 1, config)
        problems.extend(errs)
        if entry is None:
            continue
        if entry.uid in seen:
            problems.append((f"record {i}", "uid", f"duplicate uid {entry.uid!r}"))
            continue
        seen.add(entry.uid)
        (ndds if isinstance(entry, NddDonor) else pairs).append(entry)
    if problems:
        raise PoolFormatError(problems)
    if base is not None:
        pool = base.extended(pairs, ndds)
    else:
        pool = Pool(tuple(pairs), tuple(ndds))
    for p in pairs:
        for v in validate_pair(p, pool.societal_universe, config.h_star):
            problems.append((f"pair {p.uid}", "*", v))
    if problems:
        raise PoolFormatError(problems)
    return pool


def read_records(text: str, fmt: str) -> list[dict[str, Any]]:
    if fmt in ("csv", "tsv"):
        delim = "\t" if fmt == "tsv" else ","
        reader = csv.DictReader(io.StringIO(text), delimiter=delim)
        return [dict(row) for row in reader]
    if fmt == "json":
        data = json.loads(text) if text.strip() else {"records": []}
        if isinstance(data, list):
            return data
        if not isinstance(data, dict) or "records" not in data:
            raise PoolFormatError([("document", "records", "expected a 'records' array")])
        version = data.get("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise PoolFormatError([("document", "format_version", f"unsupported version {version!r}")])
        return list(data["records"])
    raise ValueError(f"unknown pool format {fmt!r}")


def detect_format(path: Path | str) -> str:
    suffix = Path(path).suffix.lower()
    return {".csv": "csv", ".tsv": "tsv", ".json": "json"}.get(suffix, "csv")


def parse_pool(source: Path | str, config: Optional[EngineConfig] = None, fmt: Optional[str] = None) -> Pool:
    """Read a pool file; enrollment order follows record order."""
    path = Path(source)
    fmt = fmt or detect_format(path)
    try:
        records = read_records(path.read_text(), fmt)
    except json.JSONDecodeError as exc:
        raise PoolFormatError([(str(path), "*", f"invalid JSON: {exc}")]) from None
    return records_to_pool(records, config)


def parse_pool_text(text: str, fmt: str, config: Optional[EngineConfig] = None) -> Pool:
    return records_to_pool(read_records(text, fmt), config)


# -- serialization -------------------------------------------------------------

def _donor_record(d: DonorProfile) -> dict[str, str]:
    return {
        "donor_name": d.name,
        "donor_age": str(d.age),
        "donor_blood": str(d.blood),
        "donor_hla": ";".join(d.hla),
        "donor_kidney_size": format_number(d.kidney_size),
        "donor_pincode": d.pincode,
        "donor_societal_dist": d.societal_dist or "",
    }


def pair_record(p: Pair) -> dict[str, str]:
    pt = p.patient
    rec = {
        "uid": p.uid,
        "ndd": "false",
        "patient_name": pt.name,
        "patient_age": str(pt.age),
        "patient_blood": str(pt.blood),
        "patient_hla": ";".join(pt.hla),
        "patient_kidney_size": format_number(pt.kidney_size),
        "patient_pincode": pt.pincode,
        "pra": format_number(pt.pra),
        "societal_pref": ";".join(pt.societal_pref),
        "distance_km": format_number(pt.distance_km),
        "economic_slab_lakhs": format_number(pt.economic_slab_lakhs),
        "was_donor": str(pt.was_donor).lower(),
        "vascular_status": pt.vascular_status.value,
        "fixed_priority": "" if p.fixed_priority is None else format_number(p.fixed_priority),
        "wt_score": format_number(p.wt_score),
        "is_initial": str(p.is_initial).lower(),
    }
    rec.update(_donor_record(p.donor))
    return {k: rec[k] for k in PAIR_FIELDS}


def ndd_record(d: NddDonor) -> dict[str, str]:
    rec = {"uid": d.uid, "ndd": "true", **_donor_record(d.donor)}
    return {k: rec.get(k, "") for k in PAIR_FIELDS}


def pool_records(pool: Pool) -> list[dict[str, str]]:
    entries = [(p.enrolled_at, pair_record(p)) for p in pool.pairs]
    entries += [(d.enrolled_at, ndd_record(d)) for d in pool.ndds]
    entries.sort(key=lambda e: e[0])
    return [rec for _, rec in entries]


def serialize_pool(pool: Pool, fmt: str = "csv") -> str:
    records = pool_records(pool)
    if fmt in ("csv", "tsv"):
        buf = io.StringIO()
        writer = csv.DictWriter(
            buf, fieldnames=PAIR_FIELDS, delimiter="\t" if fmt == "tsv" else ",",
            lineterminator="\n",
        )
        writer.writeheader()
        writer.writerows(records)
        return buf.getvalue()
    if fmt == "json":
        slim = [{k: v for k, v in r.items() if v != ""} for r in records]
        return json.dumps({"format_version": FORMAT_VERSION, "records": slim}, indent=2) + "\n"
    raise ValueError(f"unknown pool format {fmt!r}")
