from enum import Enum
from fractions import Fraction
from typing import Any, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class VolterraError(Exception):
    """Base class for every error raised by the package"""


class ValidationError(VolterraError, ValueError):
    """Invalid argument: wrong arity, negative lag, non-finite entry..."""


class DimensionError(ValidationError):
    """Matrix/vector shapes do not line up"""


class UsageError(VolterraError):
    """Bad command-line usage or inconsistent experiment configuration"""


class ComparisonFailure(VolterraError):
    """Two sequences differ by more than the configured tolerance"""


class Convention(Enum):
    REGULAR = "regular"
    TRIANGULAR = "triangular"


class CascadeMode(Enum):
    CORRECTED = "corrected"
    NAIVE = "naive"
    ORDER1 = "order1"


class OracleForm(Enum):
    REGULAR = "regular"
    TRIANGULAR = "triangular"


class Accounting(Enum):
    SCALAR = "scalar"
    MATRIX = "matrix"


class InputKind(Enum):
    CSV = "csv"
    IMPULSE = "impulse"
    RANDOM = "random"
    TWO_IMPULSE = "two_impulse"
    ZERO = "zero"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def as_matrix(value: Any, name: str = "matrix") -> np.ndarray:
    """Coerce nested lists / arrays into a finite, read-only float64 matrix"""
    arr = np.array(value, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return _frozen(arr)


def as_vector(value: Any, name: str = "vector") -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    # row and column matrices are accepted as vectors
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return _frozen(arr)


def require_square(arr: np.ndarray, name: str = "matrix") -> None:
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")


class ArrayModel(BaseModel):
    """Immutable pydantic model holding numpy arrays"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class SignalSequence(ArrayModel):
    """Finite discrete-time signal with sample period T.

    `samples` is 1-D for scalar signals and (n, width) for vector-valued ones.
    """
    samples: np.ndarray
    T: float = Field(default=1.0, gt=0, description="Sample period in seconds")

    @field_validator("samples", mode="before")
    @classmethod
    def validate_samples(cls, v):
        arr = np.array(v, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.ndim > 2:
            raise DimensionError(f"signal samples must be 1-D or 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("signal has non-finite samples")
        return _frozen(arr)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    def columns(self) -> np.ndarray:
        """(n, width) view of the samples"""
        return self.samples.reshape(len(self), -1)

    def scaled(self, alpha: float) -> "SignalSequence":
        return SignalSequence(samples=alpha * self.samples, T=self.T)

    def delayed(self, d: int) -> "SignalSequence":
        """Delay by d samples keeping the length (samples pushed past the end are dropped)"""
        shifted = np.zeros_like(self.samples)
        if d < len(self):
            shifted[d:] = self.samples[: len(self) - d]
        return SignalSequence(samples=shifted, T=self.T)

    def __add__(self, other: "SignalSequence") -> "SignalSequence":
        if not isinstance(other, SignalSequence):
            return NotImplemented
        if self.samples.shape != other.samples.shape:
            raise DimensionError(
                f"cannot add signals of shapes {self.samples.shape} and {other.samples.shape}"
            )
        return SignalSequence(samples=self.samples + other.samples, T=self.T)

    @classmethod
    def impulse(cls, length: int, T: float = 1.0, at: int = 0, weight: float = 1.0) -> "SignalSequence":
        samples = np.zeros(length)
        samples[at] = weight
        return cls(samples=samples, T=T)

    @classmethod
    def zeros(cls, length: int, T: float = 1.0) -> "SignalSequence":
        return cls(samples=np.zeros(length), T=T)


class KernelIndex(BaseModel):
    """Tuple of p nonnegative integer lags in regular or triangular convention"""
    model_config = ConfigDict(frozen=True)

    convention: Convention
    lags: Tuple[int, ...]

    @field_validator("lags", mode="before")
    @classmethod
    def validate_lags(cls, v):
        lags = tuple(v)
        for lag in lags:
            if isinstance(lag, bool) or int(lag) != lag:
                raise ValidationError(f"lags must be integers, got {lag!r}")
            if lag < 0:
                raise ValidationError(f"lags must be nonnegative, got {lags}")
        if not lags:
            raise ValidationError("a kernel index needs at least one lag")
        return tuple(int(lag) for lag in lags)

    @model_validator(mode="after")
    def check_order(self):
        if self.convention is Convention.TRIANGULAR and any(
            a > b for a, b in zip(self.lags, self.lags[1:])
        ):
            raise ValidationError(f"triangular lags must be nondecreasing, got {self.lags}")
        return self

    @property
    def order(self) -> int:
        return len(self.lags)

    @classmethod
    def coerce(cls, value: "KernelIndex | Sequence[int]", convention: Convention) -> "KernelIndex":
        if isinstance(value, KernelIndex):
            if value.convention is not convention:
                raise ValidationError(
                    f"expected a {convention.value} index, got a {value.convention.value} one"
                )
            return value
        return cls(convention=convention, lags=tuple(value))


class MultiplicityFactor(BaseModel):
    """Exact factor 1/(m_1!...m_q!) with the groups that produced it"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    value: Fraction
    groups: Tuple[Tuple[str, int], ...] = ()

    @model_validator(mode="after")
    def check_value(self):
        if not (0 < self.value <= 1) or self.value.numerator != 1:
            raise ValidationError(f"multiplicity factor must be 1/k with k >= 1, got {self.value}")
        return self

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        return str(self.value)
