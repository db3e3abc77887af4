from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from kexchange.registry import (
    ABO,
    BloodGroup,
    NddDonor,
    PoolFormatError,
    VascularStatus,
    parse_pool,
    parse_pool_text,
    serialize_pool,
    validate_pair,
)

from conftest import fixture_path, random_pool

HEADER = "uid,patient_blood,patient_hla,patient_age,patient_kidney_size,patient_pincode,donor_blood,donor_hla,donor_age,donor_kidney_size,donor_pincode"
ROW = "X1,A-,A1;B8;DR10;A3;B14;DR17,45,11,496001,B+,A2;B7;DR11;A10;B16;DR8,30,12,496001"


def test_table1_parses_to_five_pairs():
    pool = parse_pool(fixture_path("table1.csv"))
    assert [p.uid for p in pool.pairs] == ["P1", "P2", "P3", "P4", "P5"]
    assert pool.ndds == ()
    assert [p.enrolled_at for p in pool.pairs] == [0, 1, 2, 3, 4]
    p1 = pool.pair("P1")
    assert p1.patient.blood == BloodGroup(ABO.A, False)
    assert p1.patient.hla == ("A1", "B8", "DR10", "A3", "B14", "DR17")
    assert p1.donor.kidney_size == 12 and p1.patient.kidney_size == 11
    assert p1.fixed_priority == 5 and p1.is_initial


def test_ndd_record_from_json():
    pool = parse_pool(fixture_path("table4_ndd.json"))
    assert [d.uid for d in pool.ndds] == ["A1"]
    assert pool.ndds[0].donor.societal_dist == "sd1"
    assert pool.n_sd == 3


def test_empty_pool():
    assert parse_pool_text(HEADER + "\n", "csv").pairs == ()
    assert parse_pool_text("", "json").pairs == ()


@pytest.mark.parametrize("text", ["A+", "A-", "B+", "B-", "AB+", "AB-", "O+", "O-"])
def test_blood_groups_round_trip(text):
    assert str(BloodGroup.parse(text)) == text


@pytest.mark.parametrize("bad", ["C+", "A", "AB", "O*", "", "+"])
def test_unknown_blood_groups(bad):
    with pytest.raises(ValueError):
        BloodGroup.parse(bad)


def _problems(text: str, fmt: str = "csv"):
    with pytest.raises(PoolFormatError) as info:
        parse_pool_text(text, fmt)
    return info.value.problems


def test_bad_blood_names_field():
    probs = _problems(HEADER + "\n" + ROW.replace("A-", "C+", 1))
    assert probs == [("record 1 (uid X1)", "patient_blood", "unknown blood group 'C+'")]


def test_hla_length_checked():
    probs = _problems(HEADER + "\n" + ROW.replace("A1;B8;DR10;A3;B14;DR17", "A1;B8"))
    assert [(p[0], p[1]) for p in probs] == [("record 1 (uid X1)", "patient_hla")]


def test_duplicate_uid_and_pra_range():
    text = HEADER + ",pra\n" + ROW + ",10\n" + ROW + ",120\n"
    assert {p[1] for p in _problems(text)} == {"pra"}
    text = HEADER + "\n" + ROW + "\n" + ROW + "\n"
    assert [p[1] for p in _problems(text)] == ["uid"]


def test_all_problems_reported_together():
    bad = ROW.replace("496001", "49600", 1).replace("B+", "Q+")
    probs = _problems(HEADER + "\n" + bad)
    assert {p[1] for p in probs} == {"patient_pincode", "donor_blood"}


def test_unknown_field_rejected():
    assert ("record 1", "colour", "unknown field") in _problems(HEADER + ",colour\n" + ROW + ",red")


def test_ndd_with_patient_fields_rejected():
    doc = {"records": [{"uid": "N1", "ndd": True, "donor_blood": "O+", "donor_hla": "A1;A2;A3;B7;B8;B14",
                        "donor_age": 40, "donor_kidney_size": 11, "donor_pincode": "496001", "pra": 10}]}
    probs = _problems(json.dumps(doc), "json")
    assert [p[1] for p in probs] == ["pra"]


def test_format_version_checked():
    probs = _problems(json.dumps({"format_version": 9, "records": []}), "json")
    assert probs[0][1] == "format_version"


def test_validate_pair_examples():
    pool = parse_pool(fixture_path("table2.csv"))
    p1 = pool.pair("P1")
    assert validate_pair(p1, pool.societal_universe) == []
    bad = p1.replace(patient=p1.patient.__class__(**{**p1.patient.__dict__, "pra": Fraction(120)}))
    assert validate_pair(bad, pool.societal_universe) == ["pra must lie in [0, 100]"]
    odd = p1.replace(patient=p1.patient.__class__(**{**p1.patient.__dict__, "societal_pref": ("sd9",)}))
    assert validate_pair(odd, {"sd1", "sd2", "sd3"}) == [
        "societal_pref label 'sd9' is not in the societal universe"]


def test_validate_pair_wt_invariant():
    p = parse_pool(fixture_path("table1.csv")).pair("P1")
    assert "wt_score must be 0 while is_initial is true" in validate_pair(p.replace(wt_score=Fraction(1)), set())


def test_optional_fields_default():
    p = parse_pool_text(HEADER + "\n" + ROW, "csv").pair("X1")
    assert p.patient.pra == 0 and p.patient.societal_pref == ()
    assert p.patient.vascular_status is VascularStatus.NONE
    assert p.patient.economic_slab_lakhs == 10 and not p.patient.was_donor


@pytest.mark.parametrize("name", ["table1.csv", "table2.csv", "table3.csv", "table4_ndd.json"])
@pytest.mark.parametrize("fmt", ["csv", "tsv", "json"])
def test_fixture_round_trip(name, fmt):
    pool = parse_pool(fixture_path(name))
    assert parse_pool_text(serialize_pool(pool, fmt), fmt) == pool


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["csv", "tsv", "json"]))
def test_random_pool_round_trip(seed, fmt):
    pool = random_pool(seed)
    # file order defines enrollment, so renumber the generated pool the way a parse would
    entries = sorted([*pool.pairs, *pool.ndds], key=lambda v: v.enrolled_at)
    pairs = tuple(v.replace(enrolled_at=i, priority=Fraction(0), is_initial=True)
                  for i, v in enumerate(entries) if not isinstance(v, NddDonor))
    ndds = tuple(NddDonor(v.uid, v.donor, i) for i, v in enumerate(entries) if isinstance(v, NddDonor))
    pool = pool.__class__(pairs, ndds, pool.societal_universe)
    again = parse_pool_text(serialize_pool(pool, fmt), fmt)
    assert again.pairs == pool.pairs and again.ndds == pool.ndds
