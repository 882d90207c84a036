import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdbound.errors import DimensionError, SingularOperandError
from qkdbound.linalg import (eig_hermitian, entropy, gram_schmidt_hs, hermitian, hs_inner, kron,
                             mat_log, orthogonal_complement, partial_trace, random_density,
                             random_hermitian, trace_norm, transpose_std, vec, proj)
from qkdbound.protocols import source_replacement, coherent_overlap

from conftest import I2, PHI_PLUS, X, Y, Z
from oracles import partial_trace_loops

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def test_eig_diagonal():
    w, _ = eig_hermitian(np.diag([3.0, 1.0]))
    assert np.allclose(w, [1, 3])


def test_eig_pauli_x():
    w, v = eig_hermitian(X)
    assert np.allclose(w, [-1, 1])
    minus = np.array([1, -1]) / math.sqrt(2)
    plus = np.array([1, 1]) / math.sqrt(2)
    assert abs(abs(np.vdot(v[:, 0], minus)) - 1) < 1e-12
    assert abs(abs(np.vdot(v[:, 1], plus)) - 1) < 1e-12


def test_eig_reconstructs(rng):
    h = random_hermitian(8, rng)
    assert np.max(np.abs(eig_hermitian(h).reconstruct() - h)) < 1e-12


def test_eig_rejects_non_hermitian():
    with pytest.raises(DimensionError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_mat_log_examples():
    assert np.allclose(mat_log(np.eye(4)), 0)
    assert np.allclose(mat_log(np.diag([2.0, 4.0])), np.diag([1.0, 2.0]))
    assert np.allclose(mat_log(np.diag([0.5, 0.5])), -np.eye(2))


def test_mat_log_singular():
    with pytest.raises(SingularOperandError):
        mat_log(np.diag([1.0, 0.0]))


def test_kron_examples(rng):
    assert np.array_equal(kron(I2, I2), np.eye(4))
    k = kron(np.diag([1, 0]), np.diag([0, 1]))
    assert k[1, 1] == 1 and np.sum(np.abs(k)) == 1
    a, b, c, d = (random_hermitian(2, rng) for _ in range(4))
    assert np.max(np.abs(kron(a, b) @ kron(c, d) - kron(a @ c, b @ d))) < 1e-14 * 100


def test_partial_trace_bell(bell):
    assert np.allclose(partial_trace(bell, [2, 2], [0]), I2 / 2)


def test_partial_trace_product(rng):
    ra, rb = random_density(2, rng), 3.0 * random_density(3, rng)
    assert np.allclose(partial_trace(np.kron(ra, rb), [2, 3], [0]), 3.0 * ra)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_partial_trace_matches_loops(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(6, rng)
    assert np.allclose(partial_trace(rho, [2, 3], [0]), partial_trace_loops(rho, 2, 3), atol=1e-13)


def test_source_replacement_gram():
    probs = np.array([0.4, 0.3, 0.2, 0.1])
    amps = [0.3, -0.3, 0.3j, -0.3j]
    # coherent signals in a 30-level Fock truncation, well converged for |a| = 0.3
    n = np.arange(30)
    fact = np.array([math.factorial(k) for k in n], dtype=float)
    sig = [np.exp(-abs(a) ** 2 / 2) * a ** n / np.sqrt(fact) for a in amps]
    sig = [s / np.linalg.norm(s) for s in sig]
    psi, rho_a, _ = source_replacement(sig, probs)
    traced = partial_trace_loops(np.outer(psi, psi.conj()), 4, 30)
    expect = np.array([[math.sqrt(probs[i] * probs[j]) * coherent_overlap(amps[j], amps[i])
                        for j in range(4)] for i in range(4)])
    assert np.allclose(rho_a, traced, atol=1e-13)
    assert np.allclose(rho_a, expect, atol=1e-12)


def test_hs_inner():
    assert hs_inner(I2, I2) == 2
    assert hs_inner(X, Z) == 0


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_hs_inner_conjugate_symmetry(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert abs(hs_inner(a, b) - np.conj(hs_inner(b, a))) < 1e-12


def test_transpose():
    s = np.array([[1.0, 2.0], [2.0, 5.0]])
    assert np.array_equal(transpose_std(s), s)
    assert np.array_equal(transpose_std(Y), -Y)


def test_transpose_vec_identity(rng):
    s, t = random_hermitian(3, rng), random_hermitian(3, rng)
    assert abs(np.trace(transpose_std(s) @ t) - vec(s) @ vec(t)) < 1e-12


def test_trace_norm():
    assert trace_norm(np.diag([1.0, -2.0])) == pytest.approx(3.0)
    assert trace_norm(proj([0.6, 0.8])) == pytest.approx(1.0)


@pytest.mark.parametrize("theta", [0.1, 0.7, 1.5, 3.0])
def test_trace_norm_pure_difference(theta):
    a = proj([1, 0])
    b = proj([math.cos(theta / 2), math.sin(theta / 2)])
    svd = np.sum(np.linalg.svd(a - b, compute_uv=False))
    assert trace_norm(a - b) == pytest.approx(svd, abs=1e-12)
    assert trace_norm(a - b) == pytest.approx(2 * math.sin(theta / 2), abs=1e-12)


def test_gram_schmidt_examples():
    r = gram_schmidt_hs([I2])
    assert r.rank == 1 and np.allclose(r.basis[0], I2 / math.sqrt(2))
    assert gram_schmidt_hs([I2, I2]).rank == 1
    r = gram_schmidt_hs([I2, X, X + Z])
    assert r.rank == 3
    for i in range(3):
        for j in range(3):
            want = 1.0 if i == j else 0.0
            assert abs(hs_inner(r.basis[i], r.basis[j]) - want) < 1e-12


def test_gram_schmidt_coeffs_transform_values(rng):
    rho = random_density(3, rng)
    ops = [random_hermitian(3, rng) for _ in range(4)]
    r = gram_schmidt_hs(ops)
    vals = np.array([np.trace(o @ rho).real for o in ops])
    for q, v in zip(r.basis, r.coeffs @ vals):
        assert abs(np.trace(q @ rho).real - v) < 1e-12


def test_orthogonal_complement_spans_rest(rng):
    basis = gram_schmidt_hs([np.eye(3), random_hermitian(3, rng)]).basis
    comp = orthogonal_complement(basis, 3)
    assert len(comp) == 7
    for c in comp:
        assert all(abs(hs_inner(b, c)) < 1e-12 for b in basis)


def test_entropy_and_hermitian():
    assert entropy(np.eye(4) / 4) == pytest.approx(2.0)
    assert entropy(proj(PHI_PLUS)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DimensionError):
        hermitian(np.ones((2, 3)))
