import math
import warnings

import numpy as np
import pytest

from qkdbound.errors import SingularOperandError
from qkdbound.linalg import binary_entropy, hermitian_basis, random_density
from qkdbound.objective import eval_f, zeta
from qkdbound.protocols import Tolerances, build_bb84_mismatch
from qkdbound.protocols.framework import prepare_problem
from qkdbound.step1 import build_subspace, find_initial, fw_minimize
from qkdbound.step2 import (ConstraintSet, lower_bound_thm1, lower_bound_thm2, lower_bound_thm3,
                            verify_certificate)

from conftest import X
from test_objective import qubit_context


def solved(eta=0.8, p=0.1):
    spec, obs = build_bb84_mismatch(eta, p)
    ctx, cs = prepare_problem(spec, obs)
    sub = build_subspace(cs)
    res = fw_minimize(ctx, sub, find_initial(sub), Tolerances().fw_config())
    return ctx, cs, res


@pytest.fixture(scope="module")
def full_rank():
    return solved(0.8, 0.1)


def test_unique_point_is_tight(rng):
    spec, _ = build_bb84_mismatch(0.8, 0.1)
    ctx = spec.context()
    rho = random_density(6, rng)
    ops = hermitian_basis(6)
    cs = ConstraintSet.from_observations(ops, [np.trace(o @ rho).real for o in ops])
    b = lower_bound_thm1(ctx, cs, rho)
    assert b.certificate_verified
    assert abs(b.lower - eval_f(ctx, rho)) <= 1e-8
    assert abs(b.upper - b.lower) <= 1e-8


def qubit_grid_min(x, n=1201):
    """min over Bloch vectors with r_x = x of h((1+z)/2) - h((1+|r|)/2); y = 0 is optimal."""
    zmax = math.sqrt(1 - x * x)
    best = math.inf
    for z in np.linspace(-zmax, zmax, n):
        r = min(1.0, math.hypot(x, z))
        best = min(best, binary_entropy((1 + z) / 2) - binary_entropy((1 + r) / 2))
    return best


@pytest.mark.parametrize("x", [0.0, 0.3, 0.7])
def test_qubit_bound_against_grid(x):
    ctx = qubit_context()
    cs = ConstraintSet.from_observations([X], [x])
    sub = build_subspace(cs)
    res = fw_minimize(ctx, sub, find_initial(sub))
    b = lower_bound_thm2(ctx, cs, res.rho, 1e-12)
    ref = qubit_grid_min(x)
    assert b.certificate_verified
    assert b.lower <= ref + 1e-12
    assert abs(b.lower - ref) <= 1e-4


def test_fw_output_gap_bb84():
    ctx, cs, res = solved(1.0, 0.1)
    b = lower_bound_thm1(ctx, cs, res.rho)
    assert b.upper - b.lower <= 1e-5


def test_bound_variants_agree_full_rank(full_rank):
    ctx, cs, res = full_rank
    b1 = lower_bound_thm1(ctx, cs, res.rho)
    b2 = lower_bound_thm2(ctx, cs, res.rho, 1e-12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        b3 = lower_bound_thm3(ctx, cs, res.rho, 1e-12, 1e-14)
    assert abs(b1.lower - b2.lower) <= 1e-8
    assert abs(b3.lower - b2.lower) <= 1e-9
    assert all(b.certificate_verified for b in (b1, b2, b3))


def test_thm2_rank_deficient():
    spec, obs = build_bb84_mismatch(1.0, 0.0)
    ctx = spec.context()
    cs = obs.constraint_set(spec)
    rho = spec.source_state
    with pytest.raises(SingularOperandError):
        lower_bound_thm1(ctx, cs, rho)
    b = lower_bound_thm2(ctx, cs, rho, 1e-12)
    assert b.certificate_verified and math.isfinite(b.lower)
    assert b.lower <= eval_f(ctx, rho) + 1e-12


def test_zeta_decomposition(full_rank):
    ctx, cs, res = full_rank
    b = lower_bound_thm2(ctx, cs, res.rho, 1e-6)
    assert b.zeta == zeta(1e-6, ctx.dprime)
    assert b.lower == b.f_eps - b.linear + b.dual_value - b.zeta


def test_eps_prime_monotone(full_rank):
    ctx, cs, res = full_rank
    lowers = []
    for k in range(12, 5, -1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            lowers.append(lower_bound_thm3(ctx, cs, res.rho, 1e-12, 10.0**-k).lower)
    # each point is a separate solve, so allow for solver noise at the 1e-11 level
    assert all(b <= a + 1e-10 for a, b in zip(lowers, lowers[1:]))
    assert lowers[-1] < lowers[0] - 1e-6


def test_eps_prime_raised_with_warning(full_rank):
    ctx, cs, res = full_rank
    rho = res.rho + 1e-6 * np.diag(np.arange(ctx.dim) - (ctx.dim - 1) / 2)
    with pytest.warns(RuntimeWarning):
        b = lower_bound_thm3(ctx, cs, rho, 1e-12, 0.0)
    assert b.eps_prime_raised and b.eps_prime >= cs.violation(rho)
    assert b.certificate_verified


def test_certificate_round_trip(full_rank):
    ctx, cs, res = full_rank
    b = lower_bound_thm3(ctx, cs, res.rho, 1e-12, 1e-12)
    ok, lower = verify_certificate(ctx, cs, b.rho, b.dual_y, b.dual_z, b.eps, b.eps_prime)
    assert ok and abs(lower - b.lower) <= 1e-12


def test_corrupted_y_rejected(full_rank):
    ctx, cs, res = full_rank
    b = lower_bound_thm3(ctx, cs, res.rho, 1e-12, 1e-12)
    y = b.dual_y.copy()
    y[0] += 1e-3
    ok, _, diag = verify_certificate(ctx, cs, b.rho, y, np.abs(y), b.eps, b.eps_prime,
                                     details=True)
    assert not ok and "lmi" in diag


def test_negative_z_rejected(full_rank):
    ctx, cs, res = full_rank
    b = lower_bound_thm3(ctx, cs, res.rho, 1e-12, 1e-12)
    z = b.dual_z.copy()
    z[1] = -abs(z[1]) - 1e-9
    ok, _ = verify_certificate(ctx, cs, b.rho, b.dual_y, z, b.eps, b.eps_prime)
    assert not ok
