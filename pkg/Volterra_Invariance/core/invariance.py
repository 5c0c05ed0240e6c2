"""Generalized impulse invariance for Volterra kernels.

Sampled kernels are corrected by 1/(m_1!...m_q!):
  - triangular lags: m_k are the multiplicities of the distinct lag values;
  - regular lags: each maximal run of L consecutive zeros among n_1..n_{p-1}
    contributes 1/(L+1)!.
The two conventions are related by tau_k = n_p + n_{p-1} + ... + n_{p-k+1}.
"""
from fractions import Fraction
from functools import lru_cache
from itertools import groupby
from math import factorial
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from core.models import Convention, KernelIndex, MultiplicityFactor, ValidationError
from core.system import Kernel, kernel_terms, kernel_value

LagsLike = Union[KernelIndex, Sequence[int]]


def _nonnegative_ints(lags: Sequence[int]) -> Tuple[int, ...]:
    out = []
    for lag in lags:
        if isinstance(lag, bool) or int(lag) != lag:
            raise ValidationError(f"lags must be integers, got {lag!r}")
        if lag < 0:
            raise ValidationError(f"lags must be nonnegative, got {tuple(lags)}")
        out.append(int(lag))
    return tuple(out)


def m_tri(taus: LagsLike) -> MultiplicityFactor:
    """1 / prod(m_k!) over the multiplicities of the distinct triangular lags"""
    lags = taus.lags if isinstance(taus, KernelIndex) else _nonnegative_ints(taus)
    if any(a > b for a, b in zip(lags, lags[1:])):
        raise ValidationError(f"triangular lags must be nondecreasing, got {lags}")
    denominator = 1
    groups = []
    for value, run in groupby(lags):
        m = len(list(run))
        groups.append((f"{m} x {value}", factorial(m)))
        denominator *= factorial(m)
    return MultiplicityFactor(value=Fraction(1, denominator), groups=tuple(groups))


def m_reg(ns: Sequence[int]) -> MultiplicityFactor:
    """Product of 1/(L+1)! over maximal runs of L zeros in n_1..n_{p-1}.

    Takes the p-1 leading regular lags; an empty tuple (p = 1) gives 1.
    """
    lags = _nonnegative_ints(ns)
    denominator = 1
    groups = []
    start = 0
    for is_zero, run in groupby(lags, key=lambda n: n == 0):
        length = len(list(run))
        if is_zero:
            groups.append((f"n[{start + 1}..{start + length}] = 0", factorial(length + 1)))
            denominator *= factorial(length + 1)
        start += length
    return MultiplicityFactor(value=Fraction(1, denominator), groups=tuple(groups))


def m_value(convention: Convention, lags: LagsLike) -> MultiplicityFactor:
    """Multiplicity factor of a full p-tuple in either convention"""
    index = KernelIndex.coerce(lags, convention)
    if convention is Convention.TRIANGULAR:
        return m_tri(index)
    return m_reg(index.lags[:-1])


def regular_to_triangular(ns: LagsLike, p: Optional[int] = None) -> KernelIndex:
    """tau_k = sum_{j=p-k+1}^{p} n_j"""
    index = KernelIndex.coerce(ns, Convention.REGULAR)
    if p is not None and index.order != p:
        raise ValidationError(f"expected {p} lags, got {index.order}")
    taus = np.cumsum(index.lags[::-1])
    return KernelIndex(convention=Convention.TRIANGULAR, lags=tuple(int(t) for t in taus))


def triangular_to_regular(taus: LagsLike) -> KernelIndex:
    """theta_k = tau_{p-k+1} - tau_{p-k}, with tau_0 = 0"""
    index = KernelIndex.coerce(taus, Convention.TRIANGULAR)
    gaps = np.diff((0,) + index.lags)[::-1]
    return KernelIndex(convention=Convention.REGULAR, lags=tuple(int(g) for g in gaps))


def _check_arity(kernel: Kernel, index: KernelIndex) -> None:
    p = kernel_terms(kernel)[0].order
    if index.order != p:
        raise ValidationError(f"kernel has order {p} but {index.order} lags were given")


def sample_regular(kernel: Kernel, ns: LagsLike) -> float:
    """v_p(n_1..n_p) = m_reg(n_1..n_{p-1}) h_p(n_1 T, ..., n_p T)"""
    index = KernelIndex.coerce(ns, Convention.REGULAR)
    _check_arity(kernel, index)
    T = kernel_terms(kernel)[0].T
    return float(m_reg(index.lags[:-1])) * kernel_value(kernel, [n * T for n in index.lags])


def sample_triangular(kernel: Kernel, taus: LagsLike) -> float:
    """v_p^tri(tau_1..tau_p) = m_tri(taus) h_p^tri(tau_1 T, ..., tau_p T)"""
    index = KernelIndex.coerce(taus, Convention.TRIANGULAR)
    _check_arity(kernel, index)
    T = kernel_terms(kernel)[0].T
    gaps = triangular_to_regular(index).lags
    return float(m_tri(index)) * kernel_value(kernel, [n * T for n in gaps])


@lru_cache(maxsize=None)
def m_reg_from_pattern(zero_pattern: Tuple[bool, ...]) -> float:
    """Float m_reg for a zero/non-zero pattern of n_1..n_{p-1}"""
    return float(m_reg([0 if z else 1 for z in zero_pattern]))


@lru_cache(maxsize=None)
def m_tri_from_pattern(equal_pattern: Tuple[bool, ...]) -> float:
    """Float m_tri for the pattern tau_k == tau_{k+1}, k = 1..p-1"""
    lags, level = [0], 0
    for equal in equal_pattern:
        level += 0 if equal else 1
        lags.append(level)
    return float(m_tri(lags))
