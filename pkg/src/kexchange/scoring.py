"""Edge weights between a donor and a patient.

All arithmetic is exact (``fractions.Fraction``) so that equal weights
compare equal and tie-breaking is never decided by rounding noise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .config import EngineConfig
from .registry import ABO, BloodGroup, DonorProfile, NddDonor, Pair, PatientProfile, Pool

ZERO = Fraction(0)

# donor ABO -> recipient ABO groups it can give to
ABO_RECIPIENTS = {
    ABO.O: frozenset({ABO.A, ABO.B, ABO.AB, ABO.O}),
    ABO.A: frozenset({ABO.A, ABO.AB}),
    ABO.B: frozenset({ABO.B, ABO.AB}),
    ABO.AB: frozenset({ABO.AB}),
}


def abo_compatible(donor: BloodGroup, patient: BloodGroup) -> bool:
    """ABO rule plus RH: an RH-negative donor gives to anyone, RH-positive only to RH-positive."""
    if patient.abo not in ABO_RECIPIENTS[donor.abo]:
        return False
    return patient.rh_positive or not donor.rh_positive


def abo_score(donor: BloodGroup, patient: BloodGroup, config: EngineConfig = EngineConfig()) -> Fraction:
    return config.v_b if abo_compatible(donor, patient) else ZERO


def age_score(donor_age: int, patient_age: int, config: EngineConfig = EngineConfig()) -> Fraction:
    diff = Fraction(donor_age) - Fraction(patient_age)
    if diff < 0:
        return config.v_a
    if diff <= config.d_a:
        return config.v_a - config.alpha_a * diff
    return ZERO


def hla_score(donor_hla: Sequence[str], patient_hla: Sequence[str], config: EngineConfig = EngineConfig()) -> Fraction:
    matched = len(set(donor_hla) & set(patient_hla))
    if matched == 0 or matched < config.h_min:
        return ZERO
    return Fraction(matched)


def kidney_score(donor_size, patient_size, config: EngineConfig = EngineConfig()) -> Fraction:
    diff = abs(Fraction(donor_size) - Fraction(patient_size))
    return config.v_k - diff if diff <= config.d_k else ZERO


def _check_pin(pin: str) -> str:
    pin = str(pin)
    if len(pin) != 6 or not pin.isdigit():
        raise ValueError(f"pincode must be 6 digits, got {pin!r}")
    return pin


def pin_score(donor_pin: str, patient_pin: str, config: EngineConfig = EngineConfig()) -> Fraction:
    """Equal codes score highest; then same city (3 digits), sub-zone (2), zone (1)."""
    a, b = _check_pin(donor_pin), _check_pin(patient_pin)
    if a == b:
        return config.v_p
    if a[:3] == b[:3]:
        return config.v_p - config.d_p
    if a[:2] == b[:2]:
        return config.v_p - config.alpha_p1 * config.d_p
    if a[0] == b[0]:
        return config.v_p - config.alpha_p2 * config.d_p
    return ZERO


def societal_acceptance_score(donor_sd: Optional[str], patient_pref: Sequence[str], k_star: int) -> Fraction:
    if not patient_pref:
        return Fraction(1)
    for k, label in enumerate(patient_pref, start=1):
        if label == donor_sd:
            return Fraction(1, k)
    return Fraction(1, k_star)


@dataclass(frozen=True)
class EdgeScoreBreakdown:
    abo: Fraction = ZERO
    hla: Fraction = ZERO
    age: Fraction = ZERO
    kidney: Fraction = ZERO
    pin: Fraction = ZERO
    general: Fraction = ZERO
    sas: Fraction = Fraction(1)
    final: Fraction = ZERO

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in
                ("abo", "hla", "age", "kidney", "pin", "general", "sas", "final")}


ZERO_EDGE = EdgeScoreBreakdown()

DonorSide = Union[Pair, NddDonor, DonorProfile]


def _donor_of(v: DonorSide) -> DonorProfile:
    return v if isinstance(v, DonorProfile) else v.donor


def _patient_of(v: Union[Pair, PatientProfile]) -> PatientProfile:
    return v if isinstance(v, PatientProfile) else v.patient


def edge_score(donor_side: DonorSide, patient_side: Union[Pair, PatientProfile],
               config: EngineConfig = EngineConfig(), k_star: Optional[int] = None) -> EdgeScoreBreakdown:
    """Score the donor of ``donor_side`` giving to the patient of ``patient_side``.

    ABO and HLA act as gates: if either scores zero the whole edge is zero
    and the remaining components are not evaluated.  Without an explicit
    ``k_star`` (normally n_sd + 1 for the whole pool) the fallback is one
    past the patient's own preference list.
    """
    d = _donor_of(donor_side)
    p = _patient_of(patient_side)
    b = abo_score(d.blood, p.blood, config)
    if b == 0:
        return ZERO_EDGE
    h = hla_score(d.hla, p.hla, config)
    if h == 0:
        return ZERO_EDGE
    a = age_score(d.age, p.age, config)
    k = kidney_score(d.kidney_size, p.kidney_size, config)
    pn = pin_score(d.pincode, p.pincode, config)
    general = h + b + k + a + pn
    if k_star is None:
        k_star = config.k_star if config.k_star is not None else len(p.societal_pref) + 1
    sas = societal_acceptance_score(d.societal_dist, p.societal_pref, k_star)
    return EdgeScoreBreakdown(b, h, a, k, pn, general, sas, general * sas)


@dataclass(frozen=True)
class WeightMatrix:
    """Square matrix over ``labels``; ``w[i][j]`` is donor of i giving to patient of j.

    Altruistic donors occupy rows like pairs but their columns are all zero,
    as there is no patient to receive.
    """

    labels: tuple[str, ...]
    cells: tuple[tuple[EdgeScoreBreakdown, ...], ...]
    patient_labels: frozenset[str]

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def w(self) -> list[list[Fraction]]:
        return [[c.final for c in row] for row in self.cells]

    def index(self, uid: str) -> int:
        return self.labels.index(uid)

    def weight(self, donor_uid: str, patient_uid: str) -> Fraction:
        return self.cells[self.index(donor_uid)][self.index(patient_uid)].final

    def breakdown(self, donor_uid: str, patient_uid: str) -> EdgeScoreBreakdown:
        return self.cells[self.index(donor_uid)][self.index(patient_uid)]

    def offers_to(self, patient_uid: str) -> dict[str, Fraction]:
        """Final weight of every donor in the matrix for one patient, in label order."""
        j = self.index(patient_uid)
        return {self.labels[i]: self.cells[i][j].final for i in range(self.n)}

    def scaled(self, factor) -> "WeightMatrix":
        factor = Fraction(factor)
        cells = tuple(
            tuple(EdgeScoreBreakdown(c.abo, c.hla, c.age, c.kidney, c.pin, c.general * factor,
                                     c.sas, c.final * factor) for c in row)
            for row in self.cells
        )
        return WeightMatrix(self.labels, cells, self.patient_labels)


def _vertices(pool: Pool, include_ndds: bool) -> list[Union[Pair, NddDonor]]:
    verts: list[Union[Pair, NddDonor]] = list(pool.pairs)
    if include_ndds:
        verts += list(pool.ndds)
    return verts


def gen_compatibility_matrix(pool: Pool, config: EngineConfig = EngineConfig(),
                             include_ndds: Optional[bool] = None, workers: int = 1) -> WeightMatrix:
    """Score every donor against every patient in the pool (diagonal included).

    NDD rows are added when ``include_ndds`` is true, defaulting to
    ``config.chains_enabled``.  ``workers > 1`` scores rows on a thread pool;
    the result is identical to the sequential one.
    """
    if include_ndds is None:
        include_ndds = config.chains_enabled
    verts = _vertices(pool, include_ndds)
    k_star = config.effective_k_star(pool.n_sd)

    def row(v) -> tuple[EdgeScoreBreakdown, ...]:
        return tuple(
            edge_score(v, u, config, k_star) if isinstance(u, Pair) else ZERO_EDGE
            for u in verts
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = tuple(ex.map(row, verts))
    else:
        rows = tuple(row(v) for v in verts)
    return WeightMatrix(
        tuple(v.uid for v in verts),
        rows,
        frozenset(v.uid for v in verts if isinstance(v, Pair)),
    )
