"""Brute-force homogeneous outputs straight from the kernel definitions.

This is the slow trusted path: O(L^p) kernel terms per output sample. Both
forms enumerate exactly the same kernel support (total lag <= L), so the
regular and triangular sums agree up to summation order.
"""
from math import comb
from typing import List, Sequence, Union

import numpy as np
from loguru import logger

from core.matexp import expm
from core.invariance import m_reg_from_pattern, m_tri_from_pattern
from core.models import SignalSequence, ValidationError
from core.system import FactorChain, Kernel, kernel_terms

Memory = Union[int, str, None]

AUTO_MEMORY_TOL = 1e-12
AUTO_MEMORY_CAP = 512


def auto_memory(kernel: Kernel, tol: float = AUTO_MEMORY_TOL, cap: int = AUTO_MEMORY_CAP) -> int:
    """Smallest L whose first omitted lag shell is below tol.

    The shell estimate is gain * max_i ||exp(A_i L T)|| * C(L+p-1, p-1), where
    gain bounds the C_i, B_i products. For p = 1 this is the plain
    ||exp(A L T)|| < tol rule.
    """
    terms = kernel_terms(kernel)
    p = terms[0].order
    T = terms[0].T
    factors = [f for chain in terms for f in chain.factors]
    gain = max(
        float(np.prod([np.linalg.norm(f.C, 2) * np.linalg.norm(f.B, 2) for f in chain.factors]))
        for chain in terms
    )
    steps = [expm(f.A * T) for f in factors]
    powers = [np.eye(f.state_dim) for f in factors]
    for L in range(cap + 1):
        rho = max(np.linalg.norm(P, 2) for P in powers)
        if gain * rho * comb(L + p - 1, p - 1) < tol:
            logger.debug(f"auto memory: p={p}, L={L}, rho={rho:.3e}")
            return L
        powers = [P @ E for P, E in zip(powers, steps)]
    logger.warning(f"auto memory hit the cap L={cap} for order {p}; truncation error may exceed {tol}")
    return cap


def resolve_memory(kernel: Kernel, L: Memory) -> int:
    if L is None or L == "auto":
        return auto_memory(kernel)
    if isinstance(L, bool) or int(L) != L or L < 0:
        raise ValidationError(f"memory must be a nonnegative integer or 'auto', got {L!r}")
    return int(L)


def _check_input(kernel: Kernel, u: SignalSequence) -> None:
    T = kernel_terms(kernel)[0].T
    if not np.isclose(T, u.T, rtol=1e-12, atol=0.0):
        raise ValidationError(f"signal period {u.T} does not match kernel period {T}")
    if u.width != 1:
        raise ValidationError(f"input must be scalar, got width {u.width}")


def _factor_tables(chain: FactorChain, L: int) -> List[np.ndarray]:
    """tables[i][k] = H^(i+1)(k T) for k = 0..L"""
    tables = []
    for f in chain.factors:
        step = expm(f.A * chain.T)
        X = f.B.copy()
        table = np.empty((L + 1, f.out_width, f.in_width))
        for k in range(L + 1):
            table[k] = f.C @ X
            X = step @ X
        tables.append(table)
    return tables


def _shift_table(x: np.ndarray, L: int) -> np.ndarray:
    """row d holds x delayed by d samples, zero-filled"""
    n = x.shape[0]
    out = np.zeros((L + 1, n))
    for d in range(min(L, n - 1) + 1):
        out[d, d:] = x[: n - d]
    return out


def _regular_sum(chain: FactorChain, U: np.ndarray, X: np.ndarray, L: int, corrected: bool, out: np.ndarray) -> None:
    p = chain.order
    tables = _factor_tables(chain, L)
    lags = [0] * p

    # choose n_p, n_{p-1}, ..., n_1; nbar is the running suffix sum
    def descend(i: int, acc_H: np.ndarray, acc_u: np.ndarray, nbar: int) -> None:
        table = tables[i - 1]
        for n_i in range(L - nbar + 1):
            total = nbar + n_i
            lags[i - 1] = n_i
            H = acc_H @ table[n_i]
            if i == 1:
                m = m_reg_from_pattern(tuple(n == 0 for n in lags[:-1])) if corrected else 1.0
                out[:] += (m * H[0, 0]) * acc_u * X[total]
            else:
                prod = acc_u * U[total]
                if prod.any():
                    descend(i - 1, H, prod, total)

    descend(p, np.ones((1, 1)), np.ones(U.shape[1]), 0)


def cascade_operator(
    kernel: Kernel,
    u: SignalSequence,
    x: SignalSequence,
    L: Memory = "auto",
    corrected: bool = True,
) -> SignalSequence:
    """v_p o x(n) = sum v_p(n_1..n_p) x(n - nbar_1) prod_{i=2}^p u(n - nbar_i)"""
    _check_input(kernel, u)
    if x.samples.shape != u.samples.shape:
        raise ValidationError(f"x has shape {x.samples.shape}, u has {u.samples.shape}")
    L = resolve_memory(kernel, L)
    U = _shift_table(u.samples, L)
    X = _shift_table(x.samples, L)
    out = np.zeros(len(u))
    for chain in kernel_terms(kernel):
        _regular_sum(chain, U, X, L, corrected, out)
    return SignalSequence(samples=out, T=u.T)


def eval_regular(kernel: Kernel, u: SignalSequence, L: Memory = "auto", corrected: bool = True) -> SignalSequence:
    """y_p(n) = sum over n_1 + ... + n_p <= L of v_p(n_1..n_p) prod_i u(n - nbar_i).

    Each term is sample_regular(kernel, ns) times the input product, with
    nbar_i = n_i + ... + n_p. corrected=False drops the multiplicity factor
    (m = 1), which is what the uncorrected cascade realizes.
    """
    return cascade_operator(kernel, u, u, L, corrected)


def _triangular_sum(chain: FactorChain, U: np.ndarray, L: int, out: np.ndarray) -> None:
    p = chain.order
    tables = _factor_tables(chain, L)
    equal = [False] * (p - 1)

    # choose tau_1 <= tau_2 <= ... <= tau_p; tau_k - tau_{k-1} is the gap of factor p-k+1
    def descend(k: int, acc_H: np.ndarray, acc_u: np.ndarray, prev: int) -> None:
        table = tables[p - k]
        for tau in range(prev, L + 1):
            if k > 1:
                equal[k - 2] = tau == prev
            H = acc_H @ table[tau - prev]
            prod = acc_u * U[tau]
            if k == p:
                out[:] += (m_tri_from_pattern(tuple(equal)) * H[0, 0]) * prod
            elif prod.any():
                descend(k + 1, H, prod, tau)

    descend(1, np.ones((1, 1)), np.ones(U.shape[1]), 0)


def eval_triangular(kernel: Kernel, u: SignalSequence, L: Memory = "auto") -> SignalSequence:
    """y_p(n) = sum over 0 <= tau_1 <= ... <= tau_p <= L of v_p^tri(taus) prod_i u(n - tau_i)"""
    _check_input(kernel, u)
    L = resolve_memory(kernel, L)
    U = _shift_table(u.samples, L)
    out = np.zeros(len(u))
    for chain in kernel_terms(kernel):
        _triangular_sum(chain, U, L, out)
    return SignalSequence(samples=out, T=u.T)


def total_output(kernels: Sequence[Kernel], u: SignalSequence, L: Memory = "auto") -> SignalSequence:
    """y(n) = sum_{p=1}^{P} y_p(n); kernels[k] must have order k + 1"""
    if not kernels:
        raise ValidationError("total_output needs at least one kernel")
    periods = {kernel_terms(k)[0].T for k in kernels}
    if len(periods) != 1:
        raise ValidationError(f"kernels disagree on the sampling period: {sorted(periods)}")
    total = np.zeros(len(u))
    for p, kernel in enumerate(kernels, start=1):
        order = kernel_terms(kernel)[0].order
        if order != p:
            raise ValidationError(f"kernel at position {p} has order {order}")
        y_p = eval_regular(kernel, u, L)
        if len(y_p) != len(u):
            raise ValidationError(f"order {p} output has length {len(y_p)}, expected {len(u)}")
        total += y_p.samples
    return SignalSequence(samples=total, T=u.T)
