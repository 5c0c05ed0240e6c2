# experiment.py
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel

from core.cascade import OpCounter, corrected_cascade, naive_cascade, order1
from core.complexity import (
    a_matrix,
    a_scalar,
    predicted_categories,
    profile_from_chain,
    reconcile,
)
from core.config import ExperimentConfig, InputSpec
from core.invariance import (
    m_value,
    regular_to_triangular,
    sample_regular,
    sample_triangular,
    triangular_to_regular,
)
from core.models import (
    Accounting,
    CascadeMode,
    ComparisonFailure,
    Convention,
    InputKind,
    KernelIndex,
    OracleForm,
    SignalSequence,
    UsageError,
    ValidationError,
)
from core.oracle import Memory, eval_regular, eval_triangular, resolve_memory
from core.system import (
    HomogeneousExtraction,
    ct_impulse_train_response,
    extract_homogeneous,
    kernel_terms,
    symmetric_epsilons,
)

# sequence sources accepted by compare
SOURCES = ("corrected", "naive", "order1", "regular", "triangular", "ct")


def read_signal_csv(path: Union[str, Path], T: float) -> SignalSequence:
    """Two-column CSV with header n,value and n = 0, 1, 2, ..."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"input file not found: {path}")
    df = pd.read_csv(path)
    if list(df.columns[:2]) != ["n", "value"]:
        raise ValidationError(f"{path} must have the header 'n,value', got {list(df.columns)}")
    n = df["n"].to_numpy()
    if not np.array_equal(n, np.arange(len(df))):
        raise ValidationError(f"{path}: column n must run 0, 1, 2, ... without gaps")
    return SignalSequence(samples=df["value"].to_numpy(dtype=np.float64), T=T)


def build_input(spec: InputSpec, T: float) -> SignalSequence:
    if spec.kind is InputKind.CSV:
        return read_signal_csv(spec.path, T)
    if spec.kind is InputKind.IMPULSE:
        return SignalSequence.impulse(spec.length, T, weight=spec.amplitude)
    if spec.kind is InputKind.TWO_IMPULSE:
        first = SignalSequence.impulse(spec.length, T, weight=spec.amplitude)
        return first + first.delayed(spec.gap)
    if spec.kind is InputKind.RANDOM:
        rng = np.random.default_rng(spec.seed)
        return SignalSequence(samples=rng.uniform(-spec.amplitude, spec.amplitude, spec.length), T=T)
    return SignalSequence.zeros(spec.length, T)


def write_table(df: pd.DataFrame, out: Optional[Path], float_format: str = "%.17g") -> Optional[str]:
    """Write to out, or return the CSV text when out is None"""
    if out is None:
        return df.to_csv(index=False, float_format=float_format)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out, index=False, float_format=float_format)
    logger.info(f"Wrote {len(df)} rows to {out}")
    return None


def sequence_frame(seq: SignalSequence, column: str = "y") -> pd.DataFrame:
    return pd.DataFrame({"n": np.arange(len(seq)), column: seq.samples})


class ComparisonReport(BaseModel):
    left: str
    right: str
    order: int
    samples: int
    max_abs_error: float
    max_rel_error: float
    tolerance: float
    passed: bool
    first_divergent_sample: Optional[int] = None
    ratio_min: Optional[float] = None
    ratio_max: Optional[float] = None

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.model_dump()])


def compare_sequences(
    left: SignalSequence,
    right: SignalSequence,
    tolerance: float,
    names: Tuple[str, str] = ("left", "right"),
    order: int = 0,
) -> ComparisonReport:
    """Max errors relative to max|right|, with the left/right ratio where right is non-null"""
    if left.samples.shape != right.samples.shape:
        raise ValidationError(f"cannot compare shapes {left.samples.shape} and {right.samples.shape}")
    diff = np.abs(left.samples - right.samples)
    scale = float(np.max(np.abs(right.samples))) if len(right) else 0.0
    max_abs = float(diff.max()) if len(diff) else 0.0
    if scale > 0.0:
        max_rel = max_abs / scale
    else:
        max_rel = 0.0 if max_abs == 0.0 else float("inf")

    bad = np.flatnonzero(diff > tolerance * scale) if scale > 0.0 else np.flatnonzero(diff > 0.0)
    support = np.abs(right.samples) > 1e-12 * scale if scale > 0.0 else np.zeros(len(right), dtype=bool)
    ratios = left.samples[support] / right.samples[support]
    return ComparisonReport(
        left=names[0],
        right=names[1],
        order=order,
        samples=len(left),
        max_abs_error=max_abs,
        max_rel_error=max_rel,
        tolerance=tolerance,
        passed=max_rel <= tolerance,
        first_divergent_sample=int(bad[0]) if bad.size else None,
        ratio_min=float(ratios.min()) if ratios.size else None,
        ratio_max=float(ratios.max()) if ratios.size else None,
    )


class ExperimentRunner:
    """Runs the experiment commands against one configuration"""

    def __init__(self, config: ExperimentConfig, memory: Memory = None, seed: Optional[int] = None):
        self.config = config
        self.memory: Memory = config.memory if memory is None else memory
        spec = config.input
        if seed is not None:
            spec = spec.model_copy(update={"seed": seed})
        self.input_spec = spec
        self._input: Optional[SignalSequence] = None

    @property
    def T(self) -> float:
        return self.config.T

    @property
    def input(self) -> SignalSequence:
        if self._input is None:
            self._input = build_input(self.input_spec, self.T)
            logger.info(
                f"Input: kind={self.input_spec.kind.value}, samples={len(self._input)}, seed={self.input_spec.seed}"
            )
        return self._input

    def run_record(self) -> Dict[str, object]:
        """Fields of the run ledger that identify the input"""
        return {
            "seed": self.input_spec.seed,
            "samples": len(self._input) if self._input is not None else None,
        }

    def tag_seed(self, df: pd.DataFrame) -> pd.DataFrame:
        """Add the generator seed as a column when the input is random"""
        if self.input_spec.kind is InputKind.RANDOM:
            return df.assign(seed=self.input_spec.seed)
        return df

    # --- kernels ---

    def sample_kernel(self, p: int, lags: Sequence[int], convention: Convention) -> Dict[str, object]:
        kernel = self.config.kernel(p)
        index = KernelIndex.coerce(lags, convention)
        if index.order != p:
            raise UsageError(f"order {p} needs {p} lags, got {index.order}")
        if convention is Convention.REGULAR:
            value = sample_regular(kernel, index)
            regular, triangular = index, regular_to_triangular(index)
        else:
            value = sample_triangular(kernel, index)
            regular, triangular = triangular_to_regular(index), index
        m = m_value(convention, index)
        return {
            "order": p,
            "convention": convention.value,
            "lags": " ".join(map(str, index.lags)),
            "regular": " ".join(map(str, regular.lags)),
            "triangular": " ".join(map(str, triangular.lags)),
            "m": str(m),
            "m_groups": "; ".join(g for g, _ in m.groups),
            "h": value / float(m),
            "v": value,
        }

    # --- sequences ---

    def simulate(self, p: int, mode: CascadeMode, counter: Optional[OpCounter] = None) -> SignalSequence:
        kernel = self.config.kernel(p)
        u = self.input
        if p == 1:
            # no correction at order 1: every mode is the sampled response
            y = np.zeros(len(u))
            for term in kernel_terms(kernel):
                y += order1(term.factors[0], u, term.T, counter).samples
            return SignalSequence(samples=y, T=u.T)
        if mode is CascadeMode.ORDER1:
            raise UsageError(f"mode 'order1' needs order 1, got {p}")
        if mode is CascadeMode.NAIVE:
            return naive_cascade(kernel, u, counter)
        return corrected_cascade(kernel, u, counter).output

    def oracle(self, p: int, form: OracleForm, corrected: bool = True) -> SignalSequence:
        kernel = self.config.kernel(p)
        L = resolve_memory(kernel, self.memory)
        logger.info(f"Oracle: p={p}, form={form.value}, L={L}, samples={len(self.input)}")
        if form is OracleForm.TRIANGULAR:
            return eval_triangular(kernel, self.input, L)
        return eval_regular(kernel, self.input, L, corrected=corrected)

    def extract(self, P: int, epsilons: Optional[Sequence[float]] = None) -> HomogeneousExtraction:
        eps = epsilons or self.config.epsilons or symmetric_epsilons(P, self.config.epsilon_scale)
        return extract_homogeneous(
            self.config.bilinear(), self.input, P, eps, max_workers=self.config.MAX_WORKERS
        )

    def sequence(self, p: int, source: str) -> SignalSequence:
        if source not in SOURCES:
            raise UsageError(f"unknown sequence source '{source}', expected one of {SOURCES}")
        if p == 0:
            # totals: y_c itself, or the sum of the configured orders
            if source == "ct":
                return ct_impulse_train_response(self.config.bilinear(), self.input)
            if source == "order1":
                raise UsageError("source 'order1' has no total form")
            parts = [self.sequence(q, source).samples for q in self.config.orders]
            return SignalSequence(samples=np.sum(parts, axis=0), T=self.T)
        if source == "ct":
            return self.extract(p)[p]
        if source in ("regular", "triangular"):
            return self.oracle(p, OracleForm(source))
        return self.simulate(p, CascadeMode(source))

    def tolerance_for(self, left: str, right: str, p: int = 1) -> float:
        tol = self.config.tolerances
        pair = {left, right}
        if "ct" in pair:
            return tol.ctsim_rel if p == 0 else tol.extract_rel
        if pair == {"regular", "triangular"}:
            return tol.form_rel
        return tol.oracle_rel

    def compare(
        self,
        p: int,
        left: str,
        right: str,
        tolerance: Optional[float] = None,
        strict: bool = True,
    ) -> ComparisonReport:
        if p < 0:
            raise UsageError(f"order must be >= 0 (0 compares totals), got {p}")
        tol = tolerance if tolerance is not None else self.tolerance_for(left, right, p)
        report = compare_sequences(
            self.sequence(p, left), self.sequence(p, right), tol, names=(left, right), order=p
        )
        if report.passed:
            logger.info(f"compare p={p} {left} vs {right}: max rel {report.max_rel_error:.3e} <= {tol:.1e}")
        else:
            logger.warning(
                f"compare p={p} {left} vs {right}: max rel {report.max_rel_error:.3e} > {tol:.1e}, "
                f"first divergent sample {report.first_divergent_sample}"
            )
            if strict:
                raise ComparisonFailure(
                    f"{left} and {right} differ at order {p}: max rel error {report.max_rel_error:.3e} "
                    f"exceeds {tol:.1e} (first at n={report.first_divergent_sample})"
                )
        return report

    def ctsim(self, P: Optional[int] = None, epsilons: Optional[Sequence[float]] = None) -> Tuple[pd.DataFrame, Dict[str, object]]:
        """y_c(nT), the extracted orders 1..P and the sum of the realized orders 1..P"""
        system = self.config.bilinear()
        P = P or max(self.config.orders)
        y_ct = ct_impulse_train_response(system, self.input)
        extraction = self.extract(P, epsilons)
        realized = [self.simulate(p, CascadeMode.CORRECTED) for p in range(1, P + 1)]
        model = SignalSequence(samples=np.sum([s.samples for s in realized], axis=0), T=self.T)

        df = sequence_frame(y_ct, "y_ct")
        df["y_model"] = model.samples
        for p in range(1, P + 1):
            df[f"y_{p}"] = extraction[p].samples
            df[f"y_{p}_cascade"] = realized[p - 1].samples

        check = compare_sequences(model, y_ct, self.config.tolerances.ctsim_rel, names=("model", "ct"))
        summary = {
            "orders": P,
            "epsilons": list(extraction.epsilons),
            "condition": extraction.condition,
            "ill_conditioned": extraction.ill_conditioned,
            "model_rel_error": check.max_rel_error,
            "model_matches": check.passed,
        }
        logger.info(
            f"ctsim: P={P}, cond={extraction.condition:.3e}, model vs ct max rel {check.max_rel_error:.3e}"
        )
        return df, summary

    # --- operation counts ---

    def complexity(self, p: int) -> Tuple[pd.DataFrame, bool]:
        """Instrumented corrected vs naive counts against the closed forms"""
        if p < 2:
            raise UsageError(f"complexity needs order >= 2, got {p}")
        kernel = self.config.kernel(p)
        terms = kernel_terms(kernel)
        u = self.input

        corrected_counts, naive_counts, repeat_counts = OpCounter(), OpCounter(), OpCounter()
        corrected_cascade(kernel, u, corrected_counts)
        naive_cascade(kernel, u, naive_counts)
        naive_cascade(kernel, u, repeat_counts)

        scalar = all(chain.is_scalar for chain in terms)
        convention = Accounting.SCALAR if scalar else Accounting.MATRIX
        predicted = 0
        expected: Dict = {}
        for chain in terms:
            profile = profile_from_chain(chain)
            predicted += a_scalar(p) if scalar else a_matrix(profile, convention)
            absorb = p == 2 and not chain.is_scalar
            for category, n in predicted_categories(profile, absorb).items():
                expected[category] = expected.get(category, 0) + n

        report = reconcile(corrected_counts, naive_counts, predicted, convention, expected)
        baseline = reconcile(repeat_counts, naive_counts, 0, convention)

        rows: List[Dict[str, object]] = []
        for row in report.rows():
            rows.append({"run": "corrected_vs_naive", "order": p, **row})
        rows.append({"run": "naive_vs_naive", "order": p, **baseline.rows()[0]})
        df = pd.DataFrame(rows)
        ok = report.match and baseline.match and all(
            line.match is not False for line in report.lines
        )
        return df, ok
