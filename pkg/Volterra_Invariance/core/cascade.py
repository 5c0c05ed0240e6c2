"""Discrete-time cascade realizations of separable Volterra kernels.

naive_cascade samples every factor (v_p = h_p(nT), no correction).
corrected_cascade realizes the impulse invariant kernel with the auxiliary
signals z_{i,j}:

    z_{0,1} = u
    s_i     = sum_{j=1}^{i} z_{i-1,j} / j!
    z_{i,1} = [hbar_i * s_i] u
    z_{i,j} = H_i(0) z_{i-1,j-1} u,          j = 2..i+1
    y       = H_p * sum_{j=1}^{p} z_{p-1,j} / j!

At the last correction stage the j >= 2 terms are summed first and multiplied
by H_{p-1}(0) and u once.
"""
from enum import Enum
from math import factorial
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from core.matexp import expm
from core.models import ArrayModel, DimensionError, SignalSequence, ValidationError
from core.system import Kernel, LtiFactor, kernel_terms


class OpCategory(Enum):
    BASE_FILTER = "base_filter"
    BASE_PRODUCT = "base_product"
    CORRECTION_PRODUCT = "correction_product"
    CORRECTION_SCALING = "correction_scaling"
    FEEDTHROUGH_PRODUCT = "feedthrough_product"


CORRECTION_CATEGORIES = (OpCategory.CORRECTION_PRODUCT, OpCategory.CORRECTION_SCALING)


class OpCounter(BaseModel):
    """Scalar multiplication tallies of one cascade run"""
    counts: Dict[OpCategory, int] = Field(default_factory=lambda: {c: 0 for c in OpCategory})
    samples: int = 0

    def add(self, category: OpCategory, n: int) -> None:
        if n < 0:
            raise ValidationError(f"operation counts cannot decrease (got {n} for {category.value})")
        self.counts[category] = self.counts.get(category, 0) + int(n)

    def __getitem__(self, category: OpCategory) -> int:
        return self.counts.get(category, 0)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def merge(self, other: "OpCounter") -> "OpCounter":
        """Fold the counts of a finished run into this counter"""
        if self.samples and other.samples and self.samples != other.samples:
            raise ValidationError(f"cannot merge runs of {self.samples} and {other.samples} samples")
        for category, n in other.counts.items():
            self.add(category, n)
        self.samples = self.samples or other.samples
        return self

    def as_dict(self) -> Dict[str, int]:
        return {c.value: self[c] for c in OpCategory}


def nonzero_count(M: np.ndarray) -> int:
    """Structural non-null elements (exact zero test)"""
    return int(np.count_nonzero(M))


class DiscreteFactor(ArrayModel):
    """Impulse invariant state-space block

        xi(n+1) = A_d xi(n) + B_d v(n)
        out(n)  = C xi(n) + D v(n)      (D term only with feedthrough)
    """
    A_d: np.ndarray
    B_d: np.ndarray
    C: np.ndarray
    D: np.ndarray
    feedthrough_enabled: bool = True

    @property
    def state_dim(self) -> int:
        return self.A_d.shape[0]

    @property
    def in_width(self) -> int:
        return self.B_d.shape[1]

    @property
    def out_width(self) -> int:
        return self.C.shape[0]

    def filter_cost(self) -> int:
        """Multiplications per sample, feedthrough included when enabled"""
        s = self.state_dim
        cost = s * s + s * self.in_width + self.out_width * s
        if self.feedthrough_enabled:
            cost += nonzero_count(self.D)
        return cost

    def impulse_response(self, K: int) -> np.ndarray:
        """(K, out_width, in_width) array of the first K impulse response samples"""
        h = np.empty((K, self.out_width, self.in_width))
        X = self.B_d.copy()
        for n in range(K):
            if n == 0:
                h[0] = self.D if self.feedthrough_enabled else 0.0
            else:
                h[n] = self.C @ X
                X = self.A_d @ X
        return h


def discretize_factor(f: LtiFactor, T: float, feedthrough: bool = True) -> DiscreteFactor:
    """Sample H(tau) = C exp(A tau) B at tau = nT; without feedthrough the n = 0 sample is 0"""
    if not T > 0:
        raise ValidationError(f"sampling period must be positive, got {T}")
    A_d = expm(f.A * T)
    return DiscreteFactor(
        A_d=A_d,
        B_d=A_d @ f.B,
        C=f.C.copy(),
        D=f.at_zero(),
        feedthrough_enabled=feedthrough,
    )


def _filter_columns(df: DiscreteFactor, v: np.ndarray, counter: Optional[OpCounter]) -> np.ndarray:
    n = v.shape[0]
    if v.shape[1] != df.in_width:
        raise DimensionError(f"filter expects input width {df.in_width}, got {v.shape[1]}")
    out = np.zeros((n, df.out_width))
    xi = np.zeros(df.state_dim)
    for k in range(n):
        out[k] = df.C @ xi
        if df.feedthrough_enabled:
            out[k] += df.D @ v[k]
        xi = df.A_d @ xi + df.B_d @ v[k]
    if counter is not None:
        counter.add(OpCategory.BASE_FILTER, df.filter_cost() * n)
    return out


def filter_run(df: DiscreteFactor, v: SignalSequence, counter: Optional[OpCounter] = None) -> SignalSequence:
    """Run the block from zero state; scalar output comes back 1-D"""
    out = _filter_columns(df, v.columns(), counter)
    samples = out[:, 0] if df.out_width == 1 else out
    return SignalSequence(samples=samples, T=v.T)


def _times_u(z: np.ndarray, u: np.ndarray, counter: Optional[OpCounter], category: OpCategory) -> np.ndarray:
    if counter is not None:
        counter.add(category, z.shape[0] * z.shape[1])
    return z * u[:, None]


def _check_cascade_input(kernel: Kernel, u: SignalSequence) -> int:
    terms = kernel_terms(kernel)
    p = terms[0].order
    if p < 2:
        raise ValidationError(f"cascade realizations need order >= 2, got {p}; use order1")
    if u.width != 1:
        raise DimensionError(f"input must be scalar, got width {u.width}")
    if not np.isclose(terms[0].T, u.T, rtol=1e-12, atol=0.0):
        raise ValidationError(f"signal period {u.T} does not match kernel period {terms[0].T}")
    return p


def naive_cascade(kernel: Kernel, u: SignalSequence, counter: Optional[OpCounter] = None) -> SignalSequence:
    """Cascade of sampled factors and input products, no impulse invariance correction"""
    _check_cascade_input(kernel, u)
    run = OpCounter(samples=len(u))
    uc = u.samples
    y = np.zeros(len(u))
    for chain in kernel_terms(kernel):
        z = uc[:, None]
        for factor in chain.factors[:-1]:
            df = discretize_factor(factor, chain.T, feedthrough=True)
            z = _times_u(_filter_columns(df, z, run), uc, run, OpCategory.BASE_PRODUCT)
        last = discretize_factor(chain.factors[-1], chain.T, feedthrough=True)
        y += _filter_columns(last, z, run)[:, 0]
    if counter is not None:
        counter.merge(run)
    logger.debug(f"naive cascade: p={kernel_terms(kernel)[0].order}, n={len(u)}, mults={run.total}")
    return SignalSequence(samples=y, T=u.T)


class CascadeResult(BaseModel):
    """Output of a corrected cascade run with its intermediate signals.

    taps[r][(i, j)] holds z_{i,j} of term r for stages i < p-1 and z_{p-1,1}.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    output: SignalSequence
    taps: List[Dict[Tuple[int, int], np.ndarray]]
    counter: OpCounter


def _weighted_sum(z: Dict[int, np.ndarray], js: range, offset: int, counter: OpCounter) -> np.ndarray:
    """sum_j z[j - offset] / j! over js; the j = 1 term is not scaled"""
    acc = None
    for j in js:
        term = z[j - offset]
        if j > 1:
            term = term * (1.0 / factorial(j))
            counter.add(OpCategory.CORRECTION_SCALING, term.size)
        acc = term if acc is None else acc + term
    return acc


def _corrected_chain(chain, uc: np.ndarray, absorb_half: bool, run: OpCounter):
    p = chain.order
    T = chain.T
    z: Dict[int, np.ndarray] = {1: uc[:, None]}
    taps: Dict[Tuple[int, int], np.ndarray] = {}

    for i in range(1, p - 1):
        factor = chain.factors[i - 1]
        D = factor.at_zero()
        s = _weighted_sum(z, range(1, i + 1), 0, run)
        hbar = discretize_factor(factor, T, feedthrough=False)
        new = {1: _times_u(_filter_columns(hbar, s, run), uc, run, OpCategory.BASE_PRODUCT)}

        # W_i(n) = H_i(0) u(n)
        mu = nonzero_count(D)
        W = D[None, :, :] * uc[:, None, None]
        run.add(OpCategory.FEEDTHROUGH_PRODUCT, mu * len(uc))
        for j in range(2, i + 2):
            new[j] = np.einsum("nab,nb->na", W, z[j - 1])
            run.add(OpCategory.CORRECTION_PRODUCT, mu * len(uc))
        z = new
        taps.update({(i, j): sig for j, sig in z.items()})

    i = p - 1
    factor = chain.factors[i - 1]
    D = factor.at_zero()
    s = _weighted_sum(z, range(1, i + 1), 0, run)
    hbar = discretize_factor(factor, T, feedthrough=False)
    z_last = _times_u(_filter_columns(hbar, s, run), uc, run, OpCategory.BASE_PRODUCT)
    taps[(i, 1)] = z_last

    # sum_{j=2}^{p} z_{p-1,j} / j! = u H_{p-1}(0) sum_{j=2}^{p} z_{p-2,j-1} / j!
    if absorb_half:
        t = z[1]
        D = D * 0.5
    else:
        t = _weighted_sum(z, range(2, p + 1), 1, run)
    corr = t @ D.T
    run.add(OpCategory.FEEDTHROUGH_PRODUCT, nonzero_count(D) * len(uc))
    corr = _times_u(corr, uc, run, OpCategory.CORRECTION_PRODUCT)

    last = discretize_factor(chain.factors[-1], T, feedthrough=True)
    y = _filter_columns(last, z_last + corr, run)[:, 0]
    return y, taps


def corrected_cascade(
    kernel: Kernel,
    u: SignalSequence,
    counter: Optional[OpCounter] = None,
    absorb_half: Optional[bool] = None,
) -> CascadeResult:
    """Impulse invariant realization of a separable kernel of order p >= 2.

    absorb_half folds the 1/2! of the p = 2 correction into H_1(0); by default
    it is on for p = 2 chains with a non-scalar interface and off otherwise.
    """
    p = _check_cascade_input(kernel, u)
    terms = kernel_terms(kernel)
    if absorb_half and p != 2:
        raise ValidationError("absorb_half only applies to order 2 kernels")

    run = OpCounter(samples=len(u))
    y = np.zeros(len(u))
    all_taps = []
    for chain in terms:
        absorb = absorb_half if absorb_half is not None else (p == 2 and not chain.is_scalar)
        y_r, taps = _corrected_chain(chain, u.samples, absorb, run)
        y += y_r
        all_taps.append(taps)

    if counter is not None:
        counter.merge(run)
    logger.debug(f"corrected cascade: p={p}, n={len(u)}, terms={len(terms)}, counts={run.as_dict()}")
    return CascadeResult(output=SignalSequence(samples=y, T=u.T), taps=all_taps, counter=run)


def order1(factor: LtiFactor, u: SignalSequence, T: float, counter: Optional[OpCounter] = None) -> SignalSequence:
    """Impulse invariant linear response h(n) = h_c(nT)"""
    if factor.in_width != 1 or factor.out_width != 1:
        raise DimensionError(
            f"order1 needs a scalar-in scalar-out factor, got {factor.in_width} -> {factor.out_width}"
        )
    if u.width != 1:
        raise DimensionError(f"input must be scalar, got width {u.width}")
    if not np.isclose(T, u.T, rtol=1e-12, atol=0.0):
        raise ValidationError(f"signal period {u.T} does not match period {T}")
    return filter_run(discretize_factor(factor, T, feedthrough=True), u, counter)
