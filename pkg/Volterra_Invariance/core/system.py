"""Continuous-time bilinear systems and separable factor chains.

This is the physical ground truth: exact kernel values, the exact response to
an impulse train, and homogeneous-order extraction from scaled runs.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.matexp import expm, impulse_jump
from core.models import (
    ArrayModel,
    DimensionError,
    SignalSequence,
    ValidationError,
    as_matrix,
    as_vector,
    require_square,
)

VANDERMONDE_COND_LIMIT = 1e12


class LtiFactor(ArrayModel):
    """Matrix impulse response H(tau) = C exp(A tau) B, tau >= 0"""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @field_validator("A", "B", "C", mode="before")
    @classmethod
    def validate_matrix(cls, v, info):
        return as_matrix(v, info.field_name)

    @model_validator(mode="after")
    def check_dims(self):
        require_square(self.A, "A")
        s = self.A.shape[0]
        if self.B.shape[0] != s:
            raise DimensionError(f"B has {self.B.shape[0]} rows, state dimension is {s}")
        if self.C.shape[1] != s:
            raise DimensionError(f"C has {self.C.shape[1]} columns, state dimension is {s}")
        return self

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def in_width(self) -> int:
        return self.B.shape[1]

    @property
    def out_width(self) -> int:
        return self.C.shape[0]

    def response(self, tau: float) -> np.ndarray:
        if tau < 0:
            raise ValidationError(f"lag must be nonnegative, got {tau}")
        return self.C @ expm(self.A * tau) @ self.B

    def at_zero(self) -> np.ndarray:
        """H(0) = C B"""
        return self.C @ self.B

    def scaled(self, alpha: float) -> "LtiFactor":
        return LtiFactor(A=self.A, B=self.B, C=alpha * self.C)


class FactorChain(BaseModel):
    """Separable kernel of order p: h_p(t_1..t_p) = H^(p)(t_p) ... H^(1)(t_1)"""
    model_config = ConfigDict(frozen=True)

    factors: Tuple[LtiFactor, ...]
    T: float = Field(gt=0, description="Sampling period in seconds")

    @model_validator(mode="after")
    def check_widths(self):
        if not self.factors:
            raise ValidationError("a factor chain needs at least one factor")
        if self.factors[0].in_width != 1:
            raise DimensionError(f"first factor must take a scalar input, got width {self.factors[0].in_width}")
        if self.factors[-1].out_width != 1:
            raise DimensionError(f"last factor must give a scalar output, got width {self.factors[-1].out_width}")
        for i, (left, right) in enumerate(zip(self.factors, self.factors[1:]), start=1):
            if left.out_width != right.in_width:
                raise DimensionError(
                    f"factor {i} outputs width {left.out_width} but factor {i + 1} expects {right.in_width}"
                )
        return self

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def dims(self) -> List[int]:
        """Interface widths M_0 .. M_p"""
        return [self.factors[0].in_width] + [f.out_width for f in self.factors]

    @property
    def is_scalar(self) -> bool:
        return all(m == 1 for m in self.dims)

    def scaled(self, i: int, alpha: float) -> "FactorChain":
        """Copy with factor i (1-based) multiplied by alpha"""
        if not 1 <= i <= self.order:
            raise ValidationError(f"factor index {i} out of range 1..{self.order}")
        factors = list(self.factors)
        factors[i - 1] = factors[i - 1].scaled(alpha)
        return FactorChain(factors=tuple(factors), T=self.T)


class SeparableKernel(BaseModel):
    """Sum of R separable terms of the same order and sampling period"""
    model_config = ConfigDict(frozen=True)

    terms: Tuple[FactorChain, ...]

    @model_validator(mode="after")
    def check_terms(self):
        if not self.terms:
            raise ValidationError("a separable kernel needs at least one term")
        orders = {t.order for t in self.terms}
        periods = {t.T for t in self.terms}
        if len(orders) != 1:
            raise ValidationError(f"all terms must share one order, got {sorted(orders)}")
        if len(periods) != 1:
            raise ValidationError(f"all terms must share one sampling period, got {sorted(periods)}")
        return self

    @property
    def order(self) -> int:
        return self.terms[0].order

    @property
    def T(self) -> float:
        return self.terms[0].T


Kernel = Union[FactorChain, SeparableKernel]


def kernel_terms(kernel: Kernel) -> Tuple[FactorChain, ...]:
    if isinstance(kernel, SeparableKernel):
        return kernel.terms
    if isinstance(kernel, FactorChain):
        return (kernel,)
    raise ValidationError(f"expected a FactorChain or SeparableKernel, got {type(kernel).__name__}")


class BilinearSystem(ArrayModel):
    """x' = F x + G x u + b u, y = c^T x, sampled with period T"""
    F: np.ndarray
    G: np.ndarray
    b: np.ndarray
    c: np.ndarray
    T: float = Field(gt=0, description="Sampling period in seconds")

    @field_validator("F", "G", mode="before")
    @classmethod
    def validate_matrix(cls, v, info):
        return as_matrix(v, info.field_name)

    @field_validator("b", "c", mode="before")
    @classmethod
    def validate_vector(cls, v, info):
        return as_vector(v, info.field_name)

    @model_validator(mode="after")
    def check_dims(self):
        require_square(self.F, "F")
        n = self.F.shape[0]
        if self.G.shape != (n, n):
            raise DimensionError(f"G has shape {self.G.shape}, expected {(n, n)}")
        for name, vec in (("b", self.b), ("c", self.c)):
            if vec.shape[0] != n:
                raise DimensionError(f"{name} has length {vec.shape[0]}, expected {n}")
        return self

    @property
    def N(self) -> int:
        return self.F.shape[0]

    def linear_part(self) -> "BilinearSystem":
        """Same system with G = 0"""
        return BilinearSystem(F=self.F, G=np.zeros_like(self.G), b=self.b, c=self.c, T=self.T)


def bilinear_to_chain(sys: BilinearSystem, p: int) -> FactorChain:
    """Separable factors of the order-p kernel of a bilinear system"""
    if p < 1:
        raise ValidationError(f"order must be >= 1, got {p}")
    n = sys.N
    col_b = sys.b.reshape(n, 1)
    row_c = sys.c.reshape(1, n)
    if p == 1:
        return FactorChain(factors=(LtiFactor(A=sys.F, B=col_b, C=row_c),), T=sys.T)

    ident = np.eye(n)
    factors = [LtiFactor(A=sys.F, B=col_b, C=ident)]
    factors += [LtiFactor(A=sys.F, B=sys.G, C=ident) for _ in range(p - 2)]
    factors.append(LtiFactor(A=sys.F, B=sys.G, C=row_c))
    return FactorChain(factors=tuple(factors), T=sys.T)


def _check_taus(taus: Sequence[float], p: int) -> List[float]:
    taus = [float(t) for t in taus]
    if len(taus) != p:
        raise ValidationError(f"expected {p} lags, got {len(taus)}")
    if any(t < 0 or not np.isfinite(t) for t in taus):
        raise ValidationError(f"lags must be finite and nonnegative, got {taus}")
    return taus


def kernel_value(kernel: Kernel, taus: Sequence[float]) -> float:
    """h_p(t_1..t_p) = H^(p)(t_p) ... H^(1)(t_1), summed over separable terms"""
    total = 0.0
    for chain in kernel_terms(kernel):
        taus = _check_taus(taus, chain.order)
        acc = np.ones((1, 1))
        for factor, tau in zip(chain.factors, taus):
            acc = factor.response(tau) @ acc
        total += float(acc[0, 0])
    return total


def kernel_value_triangular(kernel: Kernel, taus: Sequence[float]) -> float:
    """Triangular kernel h_p^tri(t_1 <= ... <= t_p) = h_p(t_p - t_{p-1}, ..., t_2 - t_1, t_1)"""
    taus = [float(t) for t in taus]
    if any(a > b for a, b in zip(taus, taus[1:])):
        raise ValidationError(f"triangular times must be nondecreasing, got {taus}")
    gaps = np.diff(np.concatenate(([0.0], taus)))[::-1]
    return kernel_value(kernel, gaps)


def _check_period(sys_T: float, u: SignalSequence) -> None:
    if not np.isclose(sys_T, u.T, rtol=1e-12, atol=0.0):
        raise ValidationError(f"signal period {u.T} does not match system period {sys_T}")


def ct_impulse_train_response(sys: BilinearSystem, u: SignalSequence) -> SignalSequence:
    """Exact output samples y_c(nT+) for the impulse train sum_n u(n) delta(t - nT)"""
    _check_period(sys.T, u)
    if u.width != 1:
        raise DimensionError(f"input must be scalar, got width {u.width}")
    flow = expm(sys.F * sys.T)
    x = np.zeros(sys.N)
    y = np.zeros(len(u))
    for n, w in enumerate(u.samples):
        if w != 0.0:
            J, d = impulse_jump(sys.G, sys.b, float(w))
            x = J @ x + d
        y[n] = sys.c @ x
        x = flow @ x
    return SignalSequence(samples=y, T=sys.T)


class HomogeneousExtraction(BaseModel):
    """Per-order sequences estimated from scaled runs, with fit diagnostics"""
    model_config = ConfigDict(frozen=True)

    orders: Tuple[SignalSequence, ...]
    epsilons: Tuple[float, ...]
    condition: float
    ill_conditioned: bool

    def __len__(self) -> int:
        return len(self.orders)

    def __getitem__(self, p: int) -> SignalSequence:
        """Order-p sequence, 1-based"""
        return self.orders[p - 1]


def symmetric_epsilons(P: int, scale: float = 0.25) -> List[float]:
    """Grid +-scale, +-2 scale, ... with at least P + 1 points"""
    if P < 1:
        raise ValidationError(f"P must be >= 1, got {P}")
    if scale <= 0:
        raise ValidationError(f"epsilon scale must be positive, got {scale}")
    pairs = (P + 2) // 2
    grid = []
    for k in range(1, pairs + 1):
        grid += [k * scale, -k * scale]
    return grid


def _check_epsilons(eps: Sequence[float], P: int) -> None:
    if len(eps) < P + 1:
        raise ValidationError(f"need at least {P + 1} epsilons, got {len(eps)}")
    if any(e == 0.0 or not np.isfinite(e) for e in eps):
        raise ValidationError("epsilons must be finite and nonzero")
    if len(set(eps)) != len(eps):
        raise ValidationError(f"epsilons must be distinct, got {eps}")


def fit_orders(
    runs: Sequence[np.ndarray], epsilons: Sequence[float], P: int, T: float
) -> HomogeneousExtraction:
    """Split runs[k] = sum_p eps_k^p y_p into y_1..y_P.

    The Vandermonde system is square: it carries as many orders as there are
    epsilons and only the first P are kept.
    """
    if P < 1:
        raise ValidationError(f"P must be >= 1, got {P}")
    eps = [float(e) for e in epsilons]
    _check_epsilons(eps, P)
    if len(runs) != len(eps):
        raise ValidationError(f"got {len(runs)} runs for {len(eps)} epsilons")

    K = len(eps)
    V = np.array([[e ** (j + 1) for j in range(K)] for e in eps])
    cond = float(np.linalg.cond(V))
    ill = cond > VANDERMONDE_COND_LIMIT
    if ill:
        logger.warning(f"Vandermonde fit is ill-conditioned: cond={cond:.3e} for epsilons {eps}")

    coeffs = np.linalg.solve(V, np.vstack(runs))
    orders = tuple(SignalSequence(samples=coeffs[p], T=T) for p in range(P))
    logger.debug(f"fit_orders: P={P}, K={K}, cond={cond:.3e}")
    return HomogeneousExtraction(orders=orders, epsilons=tuple(eps), condition=cond, ill_conditioned=ill)


def extract_homogeneous(
    sys: BilinearSystem,
    u: SignalSequence,
    P: int,
    epsilons: Optional[Sequence[float]] = None,
    max_workers: int = 4,
) -> HomogeneousExtraction:
    """Split y_c into homogeneous orders 1..P by fitting sum_p eps^p y_p(n).

    One run per epsilon; the fit uses as many orders as there are epsilons and
    the first P are returned.
    """
    if P < 1:
        raise ValidationError(f"P must be >= 1, got {P}")
    eps = [float(e) for e in (epsilons if epsilons is not None else symmetric_epsilons(P))]
    _check_epsilons(eps, P)

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        runs = list(pool.map(lambda e: ct_impulse_train_response(sys, u.scaled(e)).samples, eps))
    return fit_orders(runs, eps, P, u.T)
