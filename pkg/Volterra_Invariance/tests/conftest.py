import os
import sys
from math import factorial

import numpy as np
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from core.models import SignalSequence
from core.system import BilinearSystem, FactorChain, LtiFactor


def taylor_expm(A, terms=30):
    """Plain Taylor series; only trusted for ||A|| <= 1"""
    A = np.asarray(A, dtype=float)
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def random_stable_system(N, seed, T=0.5):
    rng = np.random.default_rng(seed)
    return BilinearSystem(
        F=-2.0 * np.eye(N) + 0.4 * rng.standard_normal((N, N)),
        G=0.5 * rng.standard_normal((N, N)),
        b=rng.standard_normal(N),
        c=rng.standard_normal(N),
        T=T,
    )


def scalar_impulse_order(p, n):
    """Corrected order-p impulse response of the scalar fixture: e^-n / p!"""
    return np.exp(-np.arange(n)) / factorial(p)


@pytest.fixture
def scalar_system():
    # x' = -x + x u + u, y = x, T = 1
    return BilinearSystem(F=[[-1.0]], G=[[1.0]], b=[1.0], c=[1.0], T=1.0)


@pytest.fixture
def random_system_2():
    return random_stable_system(2, seed=7)


@pytest.fixture
def random_system_3():
    return random_stable_system(3, seed=11)


@pytest.fixture
def nilpotent_system():
    """Strictly lower triangular G with lower triangular F: orders >= 4 vanish"""
    F = [[-1.0, 0.0, 0.0],
         [0.3, -1.5, 0.0],
         [0.3, 0.3, -2.0]]
    G = [[0.0, 0.0, 0.0],
         [0.8, 0.0, 0.0],
         [0.5, -0.6, 0.0]]
    return BilinearSystem(F=F, G=G, b=[1.0, 0.5, -0.3], c=[0.7, -0.4, 1.1], T=0.5)


@pytest.fixture
def matrix_chain_3():
    """Order-3 chain with dense 2-wide interfaces, M = (2, 2)"""
    rng = np.random.default_rng(3)

    def stable(n):
        return -1.5 * np.eye(n) + 0.3 * rng.standard_normal((n, n))

    factors = (
        LtiFactor(A=stable(2), B=rng.standard_normal((2, 1)), C=rng.standard_normal((2, 2))),
        LtiFactor(A=stable(2), B=rng.standard_normal((2, 2)), C=rng.standard_normal((2, 2))),
        LtiFactor(A=stable(2), B=rng.standard_normal((2, 2)), C=rng.standard_normal((1, 2))),
    )
    return FactorChain(factors=factors, T=0.5)


@pytest.fixture
def random_input():
    def make(length=12, T=0.5, seed=2024):
        rng = np.random.default_rng(seed)
        return SignalSequence(samples=rng.uniform(-1.0, 1.0, length), T=T)
    return make
