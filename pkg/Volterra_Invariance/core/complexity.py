"""Additional multiplications of the corrected cascade over the naive one.

Closed forms:
    A_S = p(p-2) + 2                                                   (scalar factors)
    A_M = mu_1 + M_1                                                   (p = 2)
    A_M = mu_{p-1} + p M_{p-1} + sum_{i=1}^{p-2} mu_i + i (mu_i + M_i) (p > 2)

Scalar accounting treats H_i(0) u(n) as free, since hbar_i costs one
multiplication less than H_i; matrix accounting charges it at mu_i.
"""
from typing import Dict, List, Optional

from loguru import logger
from pydantic import BaseModel, ConfigDict, model_validator

from core.cascade import CORRECTION_CATEGORIES, OpCategory, OpCounter, nonzero_count
from core.models import Accounting, ValidationError
from core.system import FactorChain


class ComplexityProfile(BaseModel):
    """Interface widths M_1..M_{p-1} and non-null counts mu_1..mu_{p-1} of H_i(0)"""
    model_config = ConfigDict(frozen=True)

    p: int
    dims: List[int]
    sparsities: List[int]

    @model_validator(mode="after")
    def check_profile(self):
        if self.p < 2:
            raise ValidationError(f"complexity profiles need p >= 2, got {self.p}")
        if len(self.dims) != self.p - 1 or len(self.sparsities) != self.p - 1:
            raise ValidationError(
                f"need {self.p - 1} widths and sparsities, got {len(self.dims)} and {len(self.sparsities)}"
            )
        if any(m < 1 for m in self.dims):
            raise ValidationError(f"widths must be positive, got {self.dims}")
        widths = self.widths
        for i, mu in enumerate(self.sparsities, start=1):
            if not 0 <= mu <= widths[i] * widths[i - 1]:
                raise ValidationError(
                    f"mu_{i} = {mu} outside [0, M_{i} M_{i-1}] = [0, {widths[i] * widths[i - 1]}]"
                )
        return self

    @property
    def widths(self) -> List[int]:
        """M_0 .. M_p with M_0 = M_p = 1"""
        return [1] + list(self.dims) + [1]

    def M(self, i: int) -> int:
        return self.widths[i]

    def mu(self, i: int) -> int:
        return self.sparsities[i - 1]


def a_scalar(p: int) -> int:
    if p < 2:
        raise ValidationError(f"A_S is defined for p >= 2, got {p}")
    return p * (p - 2) + 2


def a_matrix(profile: ComplexityProfile, accounting: Accounting = Accounting.MATRIX) -> int:
    """A_M as printed; scalar accounting drops the H_i(0) u charges (mu_i per stage).

    Under scalar accounting the p = 2 case is not absorbed, so with
    M_i = mu_i = 1 the result equals a_scalar(p) for every p >= 2.
    """
    p = profile.p
    if accounting is Accounting.MATRIX and p == 2:
        return profile.mu(1) + profile.M(1)
    total = p * profile.M(p - 1)
    if accounting is Accounting.MATRIX:
        total += profile.mu(p - 1)
    for i in range(1, p - 1):
        total += i * (profile.mu(i) + profile.M(i))
        if accounting is Accounting.MATRIX:
            total += profile.mu(i)
    return total


def profile_from_chain(chain: FactorChain) -> ComplexityProfile:
    p = chain.order
    if p < 2:
        raise ValidationError(f"complexity profiles need p >= 2, got {p}")
    widths = chain.dims
    return ComplexityProfile(
        p=p,
        dims=widths[1:p],
        sparsities=[nonzero_count(f.at_zero()) for f in chain.factors[: p - 1]],
    )


def predicted_categories(profile: ComplexityProfile, absorb_half: bool = False) -> Dict[OpCategory, int]:
    """Per-sample category deltas (corrected minus naive) of the cascade as built"""
    p = profile.p
    M, mu = profile.M, profile.mu
    scaling = sum((i - 1) * M(i - 1) for i in range(1, p))
    if not absorb_half:
        scaling += (p - 1) * M(p - 2)
    return {
        OpCategory.BASE_FILTER: -sum(mu(i) for i in range(1, p)),
        OpCategory.BASE_PRODUCT: 0,
        OpCategory.CORRECTION_PRODUCT: sum(i * mu(i) for i in range(1, p - 1)) + M(p - 1),
        OpCategory.CORRECTION_SCALING: scaling,
        OpCategory.FEEDTHROUGH_PRODUCT: sum(mu(i) for i in range(1, p)),
    }


def measured_additional(measured: OpCounter, baseline: OpCounter, convention: Accounting) -> int:
    """Per-sample additional multiplications under one accounting convention"""
    if measured.samples != baseline.samples:
        raise ValidationError(f"runs differ in length: {measured.samples} vs {baseline.samples}")
    if measured.samples <= 0:
        raise ValidationError("counters carry no samples")
    if convention is Accounting.SCALAR:
        # the hbar filter savings offset the H_i(0) u products
        delta = measured.total - baseline.total
    else:
        categories = CORRECTION_CATEGORIES + (OpCategory.FEEDTHROUGH_PRODUCT,)
        delta = sum(measured[c] - baseline[c] for c in categories)
    if delta % measured.samples:
        raise ValidationError(f"additional count {delta} is not a whole number per sample")
    return delta // measured.samples


class CategoryLine(BaseModel):
    category: str
    measured_per_sample: int
    expected_per_sample: Optional[int] = None
    match: Optional[bool] = None


class ReconcileReport(BaseModel):
    convention: Accounting
    samples: int
    measured: int
    predicted: int
    match: bool
    lines: List[CategoryLine]

    def rows(self) -> List[Dict[str, object]]:
        out = [
            {
                "item": "additional",
                "convention": self.convention.value,
                "predicted": self.predicted,
                "measured": self.measured,
                "match": self.match,
            }
        ]
        for line in self.lines:
            out.append(
                {
                    "item": line.category,
                    "convention": self.convention.value,
                    "predicted": line.expected_per_sample,
                    "measured": line.measured_per_sample,
                    "match": line.match,
                }
            )
        return out


def reconcile(
    measured: OpCounter,
    baseline: OpCounter,
    predicted: int,
    convention: Accounting = Accounting.SCALAR,
    expected: Optional[Dict[OpCategory, int]] = None,
) -> ReconcileReport:
    """Compare instrumented per-sample additional counts with a closed form"""
    additional = measured_additional(measured, baseline, convention)
    n = measured.samples
    lines = []
    for category in OpCategory:
        delta = measured[category] - baseline[category]
        if delta % n:
            raise ValidationError(f"{category.value} delta {delta} is not a whole number per sample")
        exp = expected.get(category) if expected else None
        lines.append(
            CategoryLine(
                category=category.value,
                measured_per_sample=delta // n,
                expected_per_sample=exp,
                match=None if exp is None else exp == delta // n,
            )
        )
    report = ReconcileReport(
        convention=convention,
        samples=n,
        measured=additional,
        predicted=predicted,
        match=additional == predicted,
        lines=lines,
    )
    level = "INFO" if report.match else "WARNING"
    logger.log(level, f"reconcile ({convention.value}): measured {additional}, predicted {predicted}")
    return report
