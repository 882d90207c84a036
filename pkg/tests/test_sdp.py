import numpy as np
import pytest

from qkdbound.linalg import random_density, random_hermitian
from qkdbound.sdp import SdpProblem, Status, reduce_constraints, restore_dual_feasibility, solve

from conftest import I2, Y, Z
from oracles import qubit_min_linear, qubit_min_linear_plane


def trace_one(c):
    return SdpProblem(c, ((np.eye(c.shape[0]), 1.0),))


def test_diagonal_example():
    sol = solve(trace_one(np.diag([1.0, 2.0])))
    assert sol.status is Status.OPTIMAL
    assert sol.primal_obj == pytest.approx(1.0, abs=1e-7)
    assert np.allclose(sol.primal_X, np.diag([1.0, 0.0]), atol=1e-6)
    assert sol.dual_y[0] == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("c", [-Z, Y])
def test_pauli_examples(c):
    sol = solve(trace_one(c))
    assert sol.primal_obj == pytest.approx(-1.0, abs=1e-7)
    assert sol.primal_obj == pytest.approx(qubit_min_linear(c), abs=1e-5)


def test_minus_z_optimiser():
    sol = solve(trace_one(-Z))
    assert np.allclose(sol.primal_X, np.diag([1.0, 0.0]), atol=1e-6)


def test_contradictory_equalities():
    p = SdpProblem(np.eye(2), ((I2, 1.0), (I2, 2.0)))
    sol = solve(p)
    assert sol.status is Status.INFEASIBLE
    # the Farkas vector separates the two right-hand sides
    y = sol.dual_y
    assert abs(y[0] + y[1]) < 1e-12 and p.b @ y > 0


def test_duplicate_rows_reduced():
    p = SdpProblem(np.diag([1.0, 2.0]), ((I2, 1.0), (2 * I2, 2.0)))
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert sol.primal_obj == pytest.approx(1.0, abs=1e-7)
    reduced, kept, conflict = reduce_constraints(p)
    assert len(kept) == 1 and conflict is None and reduced.n_constraints == 1


def test_restore_noop_when_feasible():
    p = trace_one(np.diag([1.0, 2.0]))
    y, val = restore_dual_feasibility(p, np.array([0.5]), 0)
    assert y[0] == 0.5 and val == 0.5


def test_restore_constructed_violation():
    p = trace_one(np.diag([1.0, 2.0]))
    y0 = np.array([1.0 + 1e-7])
    margin = 1e-12 * (1.0 + 2.0)
    y, val = restore_dual_feasibility(p, y0, 0)
    assert (1.0 + 1e-7) - val == pytest.approx(1e-7 + margin, abs=1e-15)
    assert np.linalg.eigvalsh(p.slack(y))[0] >= 0.0


def test_restore_random_always_verifies(rng):
    for _ in range(20):
        c = random_hermitian(3, rng)
        p = SdpProblem(c, ((np.eye(3), 1.0), (random_hermitian(3, rng), 0.1)))
        y, _ = restore_dual_feasibility(p, rng.normal(size=2) * 3, 0)
        assert np.linalg.eigvalsh(p.slack(y))[0] >= 0.0


def random_qubit_problem(rng):
    c = random_hermitian(2, rng)
    if rng.random() < 0.5:
        return c, None, None
    a = random_hermitian(2, rng)
    rho = random_density(2, rng)
    return c, a, float(np.trace(a @ rho).real)


def test_random_qubit_sdps_against_grid(rng):
    """Random qubit SDPs against a Bloch-sphere grid; weak duality on every solve."""
    for _ in range(60):
        c, a, val = random_qubit_problem(rng)
        cons = ((I2, 1.0),) if a is None else ((I2, 1.0), (a, val))
        p = SdpProblem(c, cons)
        sol = solve(p)
        ref = qubit_min_linear(c) if a is None else qubit_min_linear_plane(c, a, val)
        assert sol.status is Status.OPTIMAL
        assert abs(sol.primal_obj - ref) <= 1e-5
        y, certified = restore_dual_feasibility(p, sol.dual_y, 0)
        # a verified dual point bounds every feasible value from below
        assert certified <= ref + 1e-12
        assert sol.primal_obj >= sol.dual_obj - 1e-8


def test_hermitian_primal(rng):
    p = SdpProblem(random_hermitian(3, rng), ((np.eye(3), 1.0),))
    x = solve(p).primal_X
    assert np.max(np.abs(x - x.conj().T)) < 1e-12
    assert np.linalg.eigvalsh(x)[0] > -1e-8
