"""Small dense matrix exponentials.

e^A is computed by scaling and squaring around a diagonal [6/6] Padé
approximant. The scaling brings the 1-norm of A/2^s to at most 0.5, where the
[6/6] truncation error is far below double precision.
"""
from math import factorial
from typing import Tuple

import numpy as np
from loguru import logger

from core.models import DimensionError, ValidationError, as_matrix, as_vector, require_square

PADE_ORDER = 6
SCALED_NORM_BOUND = 0.5

# c_k = (2q-k)! q! / ((2q)! k! (q-k)!)
_PADE_COEFFS = tuple(
    factorial(2 * PADE_ORDER - k) * factorial(PADE_ORDER)
    / (factorial(2 * PADE_ORDER) * factorial(k) * factorial(PADE_ORDER - k))
    for k in range(PADE_ORDER + 1)
)


def _squarings(norm: float) -> int:
    if norm <= SCALED_NORM_BOUND:
        return 0
    return int(np.ceil(np.log2(norm / SCALED_NORM_BOUND)))


def expm(A) -> np.ndarray:
    """Return e^A for a square, finite, real matrix."""
    A = as_matrix(A, "A")
    require_square(A, "A")
    n = A.shape[0]

    s = _squarings(np.linalg.norm(A, 1))
    As = A / (2.0 ** s)

    ident = np.eye(n)
    A2 = As @ As
    A4 = A2 @ A2
    A6 = A4 @ A2
    c = _PADE_COEFFS
    U = As @ (c[1] * ident + c[3] * A2 + c[5] * A4)
    V = c[0] * ident + c[2] * A2 + c[4] * A4 + c[6] * A6

    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


def impulse_jump(G, b, w: float) -> Tuple[np.ndarray, np.ndarray]:
    """State jump across a weight-w Dirac impulse of x' = F x + G x u + b u.

    Returns (J, d) with x+ = J x- + d, read off exp(w M) for the augmented
    generator M = [[G, b], [0, 0]].
    """
    G = as_matrix(G, "G")
    require_square(G, "G")
    b = as_vector(b, "b")
    n = G.shape[0]
    if b.shape[0] != n:
        raise DimensionError(f"b has length {b.shape[0]}, expected {n}")
    if not np.isfinite(w):
        raise ValidationError(f"impulse weight must be finite, got {w}")

    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = G
    M[:n, n] = b
    E = expm(w * M)
    logger.trace(f"impulse_jump: n={n}, w={w}")
    return E[:n, :n], E[:n, n]
