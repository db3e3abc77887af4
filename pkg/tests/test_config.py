from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from kexchange.config import ConfigError, EngineConfig, as_fraction, config_from_mapping, format_number, load_config


def test_defaults():
    c = EngineConfig()
    assert (c.v_a, c.alpha_a, c.d_a) == (6, Fraction(15, 100), 40)
    assert (c.v_b, c.h_star, c.h_min, c.v_k, c.d_k) == (6, 6, 1, 6, 3)
    assert (c.v_p, c.d_p, c.alpha_p1, c.alpha_p2) == (6, 1, 2, 3)
    assert (c.f_star, c.l_max, c.k_star) == (0, 3, None)
    assert (c.d_pra, c.alpha_pra, c.v_pt, c.v_ap, c.alpha_ap) == (20, Fraction(1, 20), 1, 3, 1)
    assert c.age_groups == (6, 12, 18)
    assert (c.v_wt, c.v_vap, c.v_vap1, c.v_ipd, c.v_d, c.alpha_d) == (1, 6, 2, 5, 3, 1)
    assert c.dist_bounds == (50, 10)
    assert (c.v_eco, c.alpha_eco, c.eco_bounds) == (4, 1, (1, 5, 10))
    assert c.tiebreak_mode == "priority" and c.chains_enabled is False
    assert c.max_general_weight == 30


def test_missing_keys_keep_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"L_MAX": 4, "f_star": 2.5}))
    c = load_config(p)
    assert c.l_max == 4 and c.f_star == Fraction(5, 2)
    assert c.replace(l_max=3, f_star=Fraction(0)) == EngineConfig()


@pytest.mark.parametrize("data", [
    {"bogus": 1},
    {"alpha_a": 1.5},
    {"alpha_pra": -0.1},
    {"l_max": 0},
    {"v_b": 0},
    {"k_star": 1},
    {"tiebreak_mode": "random"},
    {"chains_enabled": "yes"},
    {"h_star": 2.5},
])
def test_rejects_bad_values(data):
    with pytest.raises(ConfigError):
        config_from_mapping(data)


def test_rejects_nested_and_non_object(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"l_max": {"x": 1}}')
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_k_star_must_exceed_label_count():
    assert EngineConfig().effective_k_star(3) == 4
    assert EngineConfig(k_star=10).effective_k_star(3) == 10
    with pytest.raises(ConfigError):
        EngineConfig(k_star=3).effective_k_star(3)


def test_float_conversion_is_exact_by_repr():
    assert as_fraction(0.15) == Fraction(3, 20)
    with pytest.raises(TypeError):
        as_fraction(True)


def test_digest_tracks_content():
    assert EngineConfig().digest() == EngineConfig().digest()
    assert EngineConfig().digest() != EngineConfig(l_max=4).digest()


@pytest.mark.parametrize("x,text", [(Fraction(23, 2), "11.5"), (Fraction(3), "3"), (Fraction(1, 3), "1/3"),
                                     (Fraction(-3, 40), "-0.075"), (Fraction(0), "0")])
def test_format_number(x, text):
    assert format_number(x) == text


@given(st.fractions(max_denominator=10_000))
def test_format_number_round_trips(x):
    assert as_fraction(format_number(x)) == x
