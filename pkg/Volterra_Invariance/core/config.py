# /volterra-invariance/config.py

import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import yaml
from loguru import logger
from pydantic import BaseModel, Field, field_validator, model_validator

from core.models import InputKind, UsageError
from core.system import (
    BilinearSystem,
    FactorChain,
    Kernel,
    LtiFactor,
    SeparableKernel,
    bilinear_to_chain,
)

Rows = List[List[float]]


class BilinearSpec(BaseModel):
    """x' = F x + G x u + b u, y = c^T x (matrices row-major)"""
    F: Rows
    G: Rows
    b: List[float]
    c: List[float]
    T: float = Field(gt=0, description="Sampling period in seconds")

    def build(self) -> BilinearSystem:
        return BilinearSystem(F=self.F, G=self.G, b=self.b, c=self.c, T=self.T)


class FactorSpec(BaseModel):
    """H(tau) = C exp(A tau) B"""
    A: Rows
    B: Rows
    C: Rows

    def build(self) -> LtiFactor:
        return LtiFactor(A=self.A, B=self.B, C=self.C)


class ChainSpec(BaseModel):
    factors: List[FactorSpec] = Field(min_length=1)
    T: float = Field(gt=0, description="Sampling period in seconds")

    def build(self) -> FactorChain:
        return FactorChain(factors=tuple(f.build() for f in self.factors), T=self.T)


class InputSpec(BaseModel):
    """Input signal source"""
    kind: InputKind = Field(default=InputKind.IMPULSE, description="csv | impulse | random | two_impulse | zero")
    length: int = Field(default=64, gt=0, description="Number of samples for generated inputs")
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="64-bit seed of the random generator")
    amplitude: float = Field(default=1.0, gt=0, description="Impulse weight; random inputs are uniform in [-a, a]")
    gap: int = Field(default=3, ge=1, description="Spacing of the two_impulse input")
    path: Optional[Path] = Field(default=None, description="Two-column CSV (n,value) for kind=csv")

    @model_validator(mode="after")
    def check_path(self):
        if self.kind is InputKind.CSV and self.path is None:
            raise ValueError("input kind 'csv' needs a path")
        if self.kind is InputKind.TWO_IMPULSE and self.gap >= self.length:
            raise ValueError(f"gap {self.gap} does not fit in {self.length} samples")
        return self


class ToleranceConfig(BaseModel):
    """Relative tolerances of the comparisons"""
    oracle_rel: float = Field(default=1e-9, gt=0, description="cascade vs brute-force oracle")
    form_rel: float = Field(default=1e-12, gt=0, description="regular vs triangular oracle")
    ctsim_rel: float = Field(default=1e-8, gt=0, description="summed orders vs continuous-time simulation")
    extract_rel: float = Field(default=1e-6, gt=0, description="extracted order vs cascade")
    naive_divergence: float = Field(default=1e-3, gt=0, description="minimum naive vs oracle gap")


class OutputConfig(BaseModel):
    OUT_PATH: Optional[Path] = Field(default=None, description="CSV destination; stdout when unset")
    FLOAT_FORMAT: str = Field(default="%.17g", description="printf-style float format of CSV values")


class ExperimentConfig(BaseModel):
    """Central configuration of an experiment"""

    # System: exactly one of the two forms
    system: Optional[BilinearSpec] = Field(default=None, description="Bilinear system the kernels come from")
    chains: Optional[Dict[int, List[ChainSpec]]] = Field(
        default=None, description="Explicit separable terms per order"
    )

    orders: List[int] = Field(default_factory=lambda: [1, 2, 3], description="Orders to run")
    input: InputSpec = Field(default_factory=InputSpec)
    memory: Union[int, Literal["auto"]] = Field(default="auto", description="Oracle memory L")
    epsilons: Optional[List[float]] = Field(default=None, description="Scalings of the homogeneous extraction")
    epsilon_scale: float = Field(default=0.25, gt=0, description="Step of the default symmetric epsilon grid")

    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    # System settings
    MAX_WORKERS: int = Field(default=4, ge=1, description="Threads for epsilon sweeps")
    LOG_PATH: Path = Field(default=Path("logs_folder"), description="Base directory of log files")
    LOG_LEVEL: str = Field(default="INFO", description="Minimum log level")

    @field_validator("orders")
    @classmethod
    def validate_orders(cls, v):
        if not v or any(p < 1 for p in v):
            raise ValueError(f"orders must be positive integers, got {v}")
        return sorted(set(v))

    @field_validator("memory")
    @classmethod
    def validate_memory(cls, v):
        if isinstance(v, int) and v < 0:
            raise ValueError(f"memory must be nonnegative, got {v}")
        return v

    @model_validator(mode="after")
    def check_system_form(self):
        if (self.system is None) == (self.chains is None):
            raise ValueError("exactly one of 'system' and 'chains' must be given")
        if self.chains is not None:
            for p, terms in self.chains.items():
                if not terms:
                    raise ValueError(f"order {p} has no chain terms")
                for term in terms:
                    if len(term.factors) != p:
                        raise ValueError(f"a chain listed under order {p} has {len(term.factors)} factors")
        return self

    @property
    def T(self) -> float:
        if self.system is not None:
            return self.system.T
        return next(iter(self.chains.values()))[0].T

    def bilinear(self) -> BilinearSystem:
        if self.system is None:
            raise UsageError("this command needs a bilinear 'system' in the config")
        return self.system.build()

    def kernel(self, p: int) -> Kernel:
        if p < 1:
            raise UsageError(f"order must be >= 1, got {p}")
        if self.system is not None:
            return bilinear_to_chain(self.system.build(), p)
        if p not in self.chains:
            raise UsageError(f"no chains configured for order {p} (have {sorted(self.chains)})")
        terms = tuple(spec.build() for spec in self.chains[p])
        return terms[0] if len(terms) == 1 else SeparableKernel(terms=terms)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2)


def load_config(config_path: Union[str, Path]) -> ExperimentConfig:
    """Load an experiment configuration from a JSON or YAML file"""
    path = Path(config_path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            if path.suffix.lower() in (".yaml", ".yml"):
                data = yaml.safe_load(f)
            else:
                data = json.load(f)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        logger.error(f"Error parsing config {path}: {e}")
        raise UsageError(f"cannot parse config {path}: {e}") from e

    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a mapping at the top level")
    # relative paths in the config are relative to the config file
    input_path = (data.get("input") or {}).get("path")
    if input_path and not Path(input_path).is_absolute():
        data["input"]["path"] = str(path.parent / input_path)
    return ExperimentConfig(**data)
