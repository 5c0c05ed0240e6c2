from .models import (
    Accounting,
    CascadeMode,
    ComparisonFailure,
    Convention,
    DimensionError,
    KernelIndex,
    MultiplicityFactor,
    OracleForm,
    SignalSequence,
    UsageError,
    ValidationError,
    VolterraError,
)
from .system import BilinearSystem, FactorChain, LtiFactor, SeparableKernel, bilinear_to_chain
from .invariance import m_reg, m_tri, sample_regular, sample_triangular
from .oracle import eval_regular, eval_triangular, total_output
from .cascade import OpCounter, corrected_cascade, naive_cascade, order1
from .complexity import a_matrix, a_scalar

__all__ = [
    'Accounting',
    'CascadeMode',
    'ComparisonFailure',
    'Convention',
    'DimensionError',
    'KernelIndex',
    'MultiplicityFactor',
    'OracleForm',
    'SignalSequence',
    'UsageError',
    'ValidationError',
    'VolterraError',
    'BilinearSystem',
    'FactorChain',
    'LtiFactor',
    'SeparableKernel',
    'bilinear_to_chain',
    'm_reg',
    'm_tri',
    'sample_regular',
    'sample_triangular',
    'eval_regular',
    'eval_triangular',
    'total_output',
    'OpCounter',
    'corrected_cascade',
    'naive_cascade',
    'order1',
    'a_matrix',
    'a_scalar',
]
