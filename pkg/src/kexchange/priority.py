"""Pair priorities used to make patient preferences strict.

Each factor is a small step function of one patient attribute.  Grouped
factors (age, distance, income) use a 1-based group index with the
neediest group first, scoring ``V - alpha * (index - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .config import EngineConfig
from .registry import ABO, BloodGroup, Pair, Pool, VascularStatus

ZERO = Fraction(0)

HARD_PAIR_TYPES = frozenset({
    (ABO.O, ABO.A),
    (ABO.O, ABO.B),
    (ABO.O, ABO.AB),
    (ABO.A, ABO.AB),
    (ABO.B, ABO.AB),
})


def pra_priority(pra, config: EngineConfig = EngineConfig()) -> Fraction:
    pra = Fraction(pra)
    if pra <= config.d_pra:
        return ZERO
    return (pra - config.d_pra) * config.alpha_pra


def pair_type_priority(patient_bg: BloodGroup, donor_bg: BloodGroup,
                       config: EngineConfig = EngineConfig()) -> Fraction:
    # (patient, donor) ABO types that offer a less-demanded kidney than they need
    return config.v_pt if (patient_bg.abo, donor_bg.abo) in HARD_PAIR_TYPES else ZERO


def _stepped(v: Fraction, alpha: Fraction, index: Optional[int]) -> Fraction:
    if index is None:
        return ZERO
    return max(ZERO, v - alpha * (index - 1))


def age_group_index(age, config: EngineConfig = EngineConfig()) -> Optional[int]:
    for i, upper in enumerate(config.age_groups, start=1):
        if age < upper:
            return i
    return None


def age_priority(patient_age, config: EngineConfig = EngineConfig()) -> Fraction:
    return _stepped(config.v_ap, config.alpha_ap, age_group_index(patient_age, config))


def vascular_priority(status: VascularStatus | str, config: EngineConfig = EngineConfig()) -> Fraction:
    status = VascularStatus(status)
    if status is VascularStatus.SITUATION2:
        return config.v_vap
    if status is VascularStatus.SITUATION1:
        return config.v_vap1
    return ZERO


def ipd_priority(was_donor: bool, config: EngineConfig = EngineConfig()) -> Fraction:
    return config.v_ipd if was_donor else ZERO


def distance_index(distance_km, config: EngineConfig = EngineConfig()) -> Optional[int]:
    # bounds are decreasing lower limits: [50, 10] -> >=50 is 1, (10, 50) is 2
    bounds = config.dist_bounds
    d = Fraction(distance_km)
    for i, lower in enumerate(bounds, start=1):
        last = i == len(bounds)
        if (d > lower) if last else (d >= lower):
            return i
    return None


def distance_priority(distance_km, config: EngineConfig = EngineConfig()) -> Fraction:
    return _stepped(config.v_d, config.alpha_d, distance_index(distance_km, config))


def economic_index(income_lakhs, config: EngineConfig = EngineConfig()) -> int:
    x = Fraction(income_lakhs)
    for i, upper in enumerate(config.eco_bounds, start=1):
        if x < upper:
            return i
    return len(config.eco_bounds) + 1


def economic_priority(income_lakhs, config: EngineConfig = EngineConfig()) -> Fraction:
    return _stepped(config.v_eco, config.alpha_eco, economic_index(income_lakhs, config))


@dataclass(frozen=True)
class PriorityBreakdown:
    pra: Fraction
    pair_type: Fraction
    age: Fraction
    va: Fraction
    ipd: Fraction
    dist: Fraction
    eco: Fraction
    wt: Fraction
    fixed: Optional[Fraction] = None

    @property
    def factor_sum(self) -> Fraction:
        return self.pra + self.pair_type + self.age + self.va + self.ipd + self.dist + self.eco

    @property
    def total(self) -> Fraction:
        base = self.factor_sum if self.fixed is None else self.fixed
        return base + self.wt

    def as_dict(self) -> dict:
        out = {k: float(getattr(self, k)) for k in
               ("pra", "pair_type", "age", "va", "ipd", "dist", "eco", "wt")}
        out["fixed"] = None if self.fixed is None else float(self.fixed)
        out["total"] = float(self.total)
        return out


def factor_breakdown(pair: Pair, wt: Fraction, config: EngineConfig = EngineConfig()) -> PriorityBreakdown:
    pt = pair.patient
    return PriorityBreakdown(
        pra=pra_priority(pt.pra, config),
        pair_type=pair_type_priority(pt.blood, pair.donor.blood, config),
        age=age_priority(pt.age, config),
        va=vascular_priority(pt.vascular_status, config),
        ipd=ipd_priority(pt.was_donor, config),
        dist=distance_priority(pt.distance_km, config),
        eco=economic_priority(pt.economic_slab_lakhs, config),
        wt=wt,
        fixed=pair.fixed_priority,
    )


def calculate_priorities(pool: Pool, config: EngineConfig = EngineConfig()) -> tuple[Pool, dict[str, PriorityBreakdown]]:
    """Start-of-run priority pass.

    New pairs get a zero waiting score and lose their initial flag; pairs
    carried over from an earlier run gain ``v_wt``.  A pair's
    ``fixed_priority``, when set, replaces the factor sum (waiting score is
    still added).
    """
    updated = []
    breakdowns: dict[str, PriorityBreakdown] = {}
    for pair in pool.pairs:
        wt = ZERO if pair.is_initial else pair.wt_score + config.v_wt
        bd = factor_breakdown(pair, wt, config)
        breakdowns[pair.uid] = bd
        updated.append(pair.replace(wt_score=wt, is_initial=False, priority=bd.total))
    return pool.with_pairs(updated), breakdowns
