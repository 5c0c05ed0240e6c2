import numpy as np
import pytest

from core.cascade import discretize_factor, filter_run
from core.models import SignalSequence, ValidationError
from core.oracle import (
    auto_memory,
    cascade_operator,
    eval_regular,
    eval_triangular,
    resolve_memory,
    total_output,
)
from core.system import FactorChain, LtiFactor, bilinear_to_chain, ct_impulse_train_response
from tests.conftest import scalar_impulse_order


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_scalar_impulse_response(scalar_system, p):
    chain = bilinear_to_chain(scalar_system, p)
    y = eval_regular(chain, SignalSequence.impulse(12, T=1.0))
    np.testing.assert_allclose(y.samples, scalar_impulse_order(p, 12), rtol=1e-13)


@pytest.mark.parametrize("p", [2, 3])
def test_uncorrected_sum_drops_factor(scalar_system, p):
    chain = bilinear_to_chain(scalar_system, p)
    y = eval_regular(chain, SignalSequence.impulse(10, T=1.0), corrected=False)
    np.testing.assert_allclose(y.samples, np.exp(-np.arange(10)), rtol=1e-13)


def test_scalar_orders_sum_to_ct_response(scalar_system):
    u = SignalSequence.impulse(10, T=1.0)
    kernels = [bilinear_to_chain(scalar_system, p) for p in range(1, 19)]
    total = total_output(kernels, u, L=30)
    y_ct = ct_impulse_train_response(scalar_system, u)
    np.testing.assert_allclose(total.samples, y_ct.samples, rtol=1e-13)


def test_zero_input(random_system_2):
    chain = bilinear_to_chain(random_system_2, 3)
    y = eval_triangular(chain, SignalSequence.zeros(6, T=0.5), L=5)
    np.testing.assert_array_equal(y.samples, np.zeros(6))


@pytest.mark.parametrize("p", [1, 2, 3])
def test_regular_and_triangular_forms_agree(random_system_2, random_input, p):
    chain = bilinear_to_chain(random_system_2, p)
    u = random_input(10)
    regular = eval_regular(chain, u, L=12)
    triangular = eval_triangular(chain, u, L=12)
    scale = np.max(np.abs(regular.samples))
    assert np.max(np.abs(regular.samples - triangular.samples)) <= 1e-12 * scale


def test_short_memory_truncates_both_forms_alike(random_system_3, random_input):
    chain = bilinear_to_chain(random_system_3, 3)
    u = random_input(10)
    regular = eval_regular(chain, u, L=3)
    triangular = eval_triangular(chain, u, L=3)
    np.testing.assert_allclose(regular.samples, triangular.samples, rtol=1e-12, atol=1e-15)


def test_nilpotent_total_matches_ct(nilpotent_system, random_input):
    u = random_input(64)
    kernels = [bilinear_to_chain(nilpotent_system, p) for p in (1, 2, 3)]
    total = total_output(kernels, u)
    y_ct = ct_impulse_train_response(nilpotent_system, u)
    scale = np.max(np.abs(y_ct.samples))
    assert np.max(np.abs(total.samples - y_ct.samples)) <= 1e-8 * scale


def test_total_output_checks(scalar_system):
    u = SignalSequence.impulse(4, T=1.0)
    with pytest.raises(ValidationError):
        total_output([], u)
    with pytest.raises(ValidationError):
        total_output([bilinear_to_chain(scalar_system, 2)], u)


def test_cascade_operator_factorizes_over_first_factor(random_input):
    rng = np.random.default_rng(42)

    def factor():
        return LtiFactor(
            A=-1.0 * np.eye(2) + 0.3 * rng.standard_normal((2, 2)),
            B=rng.standard_normal((2, 1)),
            C=rng.standard_normal((1, 2)),
        )

    chain = FactorChain(factors=(factor(), factor(), factor()), T=0.5)
    rest = FactorChain(factors=chain.factors[1:], T=0.5)
    u = random_input(10)
    x = random_input(10, seed=99)

    # x_1 = [h^(1) * x] u
    x1 = filter_run(discretize_factor(chain.factors[0], 0.5), x).samples * u.samples
    whole = cascade_operator(chain, u, x, L=12, corrected=False)
    split = cascade_operator(rest, u, SignalSequence(samples=x1, T=0.5), L=12, corrected=False)
    np.testing.assert_allclose(whole.samples, split.samples, rtol=1e-12, atol=1e-14)

    np.testing.assert_allclose(
        cascade_operator(chain, u, u, L=12).samples, eval_regular(chain, u, L=12).samples, rtol=1e-15
    )


def test_auto_memory_linear_rule(scalar_system):
    # smallest L with e^-L < 1e-12
    assert auto_memory(bilinear_to_chain(scalar_system, 1)) == 28


def test_auto_memory_grows_with_order(scalar_system):
    L1 = auto_memory(bilinear_to_chain(scalar_system, 1))
    L3 = auto_memory(bilinear_to_chain(scalar_system, 3))
    assert L3 > L1


def test_auto_memory_cap():
    slow = LtiFactor(A=[[-1e-3]], B=[[1.0]], C=[[1.0]])
    chain = FactorChain(factors=(slow,), T=1.0)
    assert auto_memory(chain, cap=20) == 20


def test_resolve_memory():
    chain = FactorChain(factors=(LtiFactor(A=[[-1.0]], B=[[1.0]], C=[[1.0]]),), T=1.0)
    assert resolve_memory(chain, 7) == 7
    assert resolve_memory(chain, "auto") == 28
    assert resolve_memory(chain, None) == 28
    with pytest.raises(ValidationError):
        resolve_memory(chain, -1)
    with pytest.raises(ValidationError):
        resolve_memory(chain, 2.5)


def test_input_checks(scalar_system):
    chain = bilinear_to_chain(scalar_system, 2)
    with pytest.raises(ValidationError):
        eval_regular(chain, SignalSequence.impulse(4, T=0.5), L=3)
    with pytest.raises(ValidationError):
        eval_regular(chain, SignalSequence(samples=np.zeros((4, 2)), T=1.0), L=3)
    with pytest.raises(ValidationError):
        cascade_operator(chain, SignalSequence.impulse(4, T=1.0), SignalSequence.impulse(5, T=1.0), L=3)


@pytest.mark.parametrize("p", [2, 3])
def test_regular_sum_is_homogeneous(random_system_2, random_input, p):
    chain = bilinear_to_chain(random_system_2, p)
    u = random_input(10)
    y = eval_regular(chain, u, L=12).samples
    y_scaled = eval_regular(chain, u.scaled(-1.5), L=12).samples
    np.testing.assert_allclose(y_scaled, (-1.5) ** p * y, rtol=1e-12, atol=1e-15)


def test_regular_sum_is_time_invariant(random_system_3, random_input):
    chain = bilinear_to_chain(random_system_3, 3)
    u = random_input(14)
    y = eval_regular(chain, u, L=12)
    y_delayed = eval_regular(chain, u.delayed(4), L=12)
    np.testing.assert_allclose(y_delayed.samples, y.delayed(4).samples, rtol=1e-12, atol=1e-15)
