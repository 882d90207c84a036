import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdbound.channels import GMap, KrausMap, PinchingChannel
from qkdbound.errors import DomainError, ParameterError, SingularOperandError
from qkdbound.linalg import proj, random_density, random_hermitian
from qkdbound.objective import (ObjectiveContext, eps_max, eval_f, eval_f_eps, grad_f,
                                grad_f_eps, linear_term, zeta)
from qkdbound.protocols import build_bb84_mismatch

from conftest import I2
from oracles import relative_entropy_logm

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def qubit_context(eps=1e-12):
    """G = identity on a qubit, Z = pinching in the computational basis."""
    k = KrausMap((np.eye(2),))
    g = GMap(k, np.eye(2), np.eye(2), k, PinchingChannel((1, 1)), np.eye(2), 2)
    return ObjectiveContext(g, eps=eps)


def bb84_context(eps=1e-12):
    spec, _ = build_bb84_mismatch(0.8, 0.1)
    return spec.context(eps)


def test_block_diagonal_gives_zero():
    ctx = qubit_context()
    assert eval_f(ctx, np.diag([0.3, 0.7])) == pytest.approx(0.0, abs=1e-14)


def test_plus_state_is_one_bit():
    ctx = qubit_context()
    plus = proj([1, 1]) / 2
    assert eval_f(ctx, plus) == pytest.approx(1.0, abs=1e-12)


def test_entropy_form_matches_relative_entropy(rng):
    ctx = bb84_context()
    for _ in range(5):
        rho = random_density(6, rng)
        sigma = ctx.gmap.apply(rho)
        direct = relative_entropy_logm(sigma, ctx.zchannel.apply(sigma))
        assert eval_f(ctx, rho) == pytest.approx(direct, abs=1e-10)


def test_negative_state_rejected():
    with pytest.raises(DomainError):
        eval_f(qubit_context(), np.diag([1.1, -0.1]))


@settings(max_examples=20, deadline=None)
@given(seeds, st.sampled_from([1e-10, 1e-6, 1e-3, 0.02]), st.sampled_from([1, 2, 6]))
def test_perturbation_within_zeta(seed, eps, rank):
    rng = np.random.default_rng(seed)
    ctx = bb84_context()
    rho = random_density(6, rng, rank=rank)
    assert abs(eval_f_eps(ctx, rho, eps) - eval_f(ctx, rho)) <= zeta(eps, ctx.dprime)


def test_eps_limit(rng):
    ctx = bb84_context()
    rho = random_density(6, rng)
    assert abs(eval_f_eps(ctx, rho, 1e-10) - eval_f(ctx, rho)) <= 1e-8


def test_block_diagonal_perturbed():
    ctx = qubit_context()
    rho = np.diag([0.2, 0.8])
    val = eval_f_eps(ctx, rho, 1e-3)
    assert val == pytest.approx(0.0, abs=1e-14)
    assert val <= 0.0 + zeta(1e-3, 2)


def test_eps_zero_rejected_for_perturbed():
    with pytest.raises(ParameterError):
        eval_f_eps(qubit_context(), I2 / 2, 0.0)


def directional_fd(ctx, rho, delta, eps, t=1e-5):
    return (eval_f_eps(ctx, rho + t * delta, eps) - eval_f_eps(ctx, rho - t * delta, eps)) / (2 * t)


def test_gradient_finite_difference(rng):
    ctx = bb84_context()
    rho = random_density(6, rng)
    grad = grad_f_eps(ctx, rho, 1e-12)
    for _ in range(10):
        delta = random_hermitian(6, rng)
        fd = directional_fd(ctx, rho, delta, 1e-12)
        an = linear_term(delta, grad)
        assert abs(fd - an) <= 1e-6 * max(abs(an), 1.0)


def test_gradient_zero_at_maximally_mixed():
    ctx = qubit_context()
    assert np.max(np.abs(grad_f_eps(ctx, I2 / 2, 1e-3))) < 1e-14


def test_gradient_hermitian(rng):
    ctx = bb84_context()
    g = grad_f_eps(ctx, random_density(6, rng))
    assert np.max(np.abs(g - g.conj().T)) <= 1e-12


def test_unperturbed_gradient_singular():
    ctx = qubit_context()
    with pytest.raises(SingularOperandError):
        grad_f(ctx, proj([1, 0]))


def test_zeta_hand_values():
    assert zeta(0.25, 2) == 1.5
    # 2 * 1e-12 * 15 * log2(16 / 1.5e-11), evaluated with natural logarithms
    hand = 3e-11 * math.log(16 / 1.5e-11) / math.log(2)
    assert zeta(1e-12, 16) == pytest.approx(hand, rel=1e-14)
    assert zeta(1e-12, 16) == pytest.approx(1.1987e-9, rel=1e-4)


def test_zeta_monotone():
    grid = np.logspace(-14, math.log10(eps_max(16)), 60)
    vals = [zeta(e, 16) for e in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_zeta_boundary():
    for d in (2, 3, 16, 36):
        e = 1.0 / (math.e * (d - 1))
        assert zeta(e, d) > 0
        with pytest.raises(ParameterError):
            zeta(e * 1.001, d)
    with pytest.raises(ParameterError):
        zeta(0.0, 4)
    with pytest.raises(ParameterError):
        zeta(0.1, 1)
