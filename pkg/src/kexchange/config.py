"""Engine constants and config-file loading."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Optional, Tuple

TIEBREAK_MODES = ("priority", "lexicographic")


class ConfigError(ValueError):
    """Raised for unknown keys or out-of-range constants."""


def as_fraction(value: Any) -> Fraction:
    """Exact conversion; floats go through their shortest repr so 0.15 -> 3/20."""
    if isinstance(value, bool):
        raise TypeError(f"expected a number, got {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"expected a number, got {value!r}")


def _frac(default) -> Any:
    return field(default=Fraction(default), metadata={"kind": "number"})


def _bounds(*default) -> Any:
    return field(
        default=tuple(Fraction(d) for d in default), metadata={"kind": "numbers"}
    )


@dataclass(frozen=True)
class EngineConfig:
    # edge weights
    v_a: Fraction = _frac(6)
    alpha_a: Fraction = _frac("0.15")
    d_a: Fraction = _frac(40)
    v_b: Fraction = _frac(6)
    h_star: int = 6
    h_min: int = 1
    v_k: Fraction = _frac(6)
    d_k: Fraction = _frac(3)
    v_p: Fraction = _frac(6)
    d_p: Fraction = _frac(1)
    alpha_p1: Fraction = _frac(2)
    alpha_p2: Fraction = _frac(3)
    # mechanism
    f_star: Fraction = _frac(0)
    l_max: int = 3
    k_star: Optional[int] = None  # None -> n_sd + 1 for the pool at hand
    # priority
    d_pra: Fraction = _frac(20)
    alpha_pra: Fraction = _frac("0.05")
    v_pt: Fraction = _frac(1)
    v_ap: Fraction = _frac(3)
    alpha_ap: Fraction = _frac(1)
    age_groups: Tuple[Fraction, ...] = _bounds(6, 12, 18)
    v_wt: Fraction = _frac(1)
    v_vap: Fraction = _frac(6)
    v_vap1: Fraction = _frac(2)
    v_ipd: Fraction = _frac(5)
    v_d: Fraction = _frac(3)
    alpha_d: Fraction = _frac(1)
    dist_bounds: Tuple[Fraction, ...] = _bounds(50, 10)
    v_eco: Fraction = _frac(4)
    alpha_eco: Fraction = _frac(1)
    eco_bounds: Tuple[Fraction, ...] = _bounds(1, 5, 10)
    tiebreak_mode: str = "priority"
    chains_enabled: bool = False

    def __post_init__(self) -> None:
        errors = self.violations()
        if errors:
            raise ConfigError("; ".join(errors))

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.alpha_a < 1:
            out.append("alpha_a must lie in (0, 1)")
        if not 0 <= self.alpha_pra <= 1:
            out.append("alpha_pra must lie in [0, 1]")
        if self.l_max < 1:
            out.append("l_max must be >= 1")
        if self.h_star < 1:
            out.append("h_star must be >= 1")
        if not 0 <= self.h_min <= self.h_star:
            out.append("h_min must lie in [0, h_star]")
        for f in fields(self):
            if f.name.startswith("v_") and getattr(self, f.name) <= 0:
                out.append(f"{f.name} must be > 0")
        if self.f_star < 0:
            out.append("f_star must be >= 0")
        if self.k_star is not None and self.k_star < 2:
            out.append("k_star must be >= 2")
        if self.tiebreak_mode not in TIEBREAK_MODES:
            out.append(f"tiebreak_mode must be one of {TIEBREAK_MODES}")
        if list(self.age_groups) != sorted(self.age_groups):
            out.append("age_groups must be increasing")
        if list(self.eco_bounds) != sorted(self.eco_bounds):
            out.append("eco_bounds must be increasing")
        if list(self.dist_bounds) != sorted(self.dist_bounds, reverse=True):
            out.append("dist_bounds must be decreasing (neediest range first)")
        return out

    @property
    def max_general_weight(self) -> Fraction:
        return self.v_a + self.v_b + self.h_star + self.v_k + self.v_p

    def effective_k_star(self, n_sd: int) -> int:
        k = n_sd + 1 if self.k_star is None else self.k_star
        if k <= n_sd:
            raise ConfigError(f"k_star={k} must exceed the number of societal labels ({n_sd})")
        return k

    def replace(self, **changes) -> "EngineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Fraction):
                v = format_number(v)
            elif isinstance(v, tuple):
                v = [format_number(x) for x in v]
            out[f.name] = v
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def format_number(x: Fraction) -> str:
    """Shortest exact text for a rational: '11.5', '3', or '1/3' when non-terminating."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    d = x.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    places = max(twos, fives)
    scaled = x * 10**places
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
    text = f"{digits[:-places]}.{digits[-places:]}".rstrip("0").rstrip(".")
    return sign + text


def config_from_mapping(data: Mapping[str, Any]) -> EngineConfig:
    known = {f.name: f for f in fields(EngineConfig)}
    kwargs: dict[str, Any] = {}
    for raw_key, value in data.items():
        key = raw_key.lower()
        if key not in known:
            raise ConfigError(f"unknown config key {raw_key!r}")
        if key in kwargs:
            raise ConfigError(f"duplicate config key {raw_key!r}")
        kind = known[key].metadata.get("kind")
        try:
            if kind == "number":
                value = as_fraction(value)
            elif kind == "numbers":
                value = tuple(as_fraction(v) for v in value)
            elif key in ("h_star", "h_min", "l_max"):
                value = _as_int(value)
            elif key == "k_star":
                value = None if value is None else _as_int(value)
            elif key == "chains_enabled":
                if not isinstance(value, bool):
                    raise TypeError("expected true/false")
            elif key == "tiebreak_mode":
                value = str(value)
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad value for {raw_key!r}: {exc}") from None
        kwargs[key] = value
    return EngineConfig(**kwargs)


def _as_int(value: Any) -> int:
    if isinstance(value, bool):
        raise TypeError("expected an integer")
    if isinstance(value, int):
        return value
    f = as_fraction(value)
    if f.denominator != 1:
        raise TypeError(f"expected an integer, got {value!r}")
    return int(f)


def load_config(path: Optional[Path | str]) -> EngineConfig:
    """Read a flat JSON object; missing keys keep their defaults."""
    if path is None:
        return EngineConfig()
    text = Path(path).read_text()
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat key-value object")
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigError(f"{path}: nested value under {k!r}; config must be flat")
    return config_from_mapping(data)
