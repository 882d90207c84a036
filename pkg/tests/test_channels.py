import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdbound.channels import (AnnouncementMap, KrausMap, PinchingChannel, build_gmap,
                               depolarize_out, depolarize_out_adjoint)
from qkdbound.errors import ConfigError
from qkdbound.linalg import hs_inner, proj, random_density, random_hermitian
from qkdbound.protocols import build_bb84_mismatch

from conftest import I2

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def random_cptni(d_in, d_out, n, rng, scale=0.9):
    ks = [rng.normal(size=(d_out, d_in)) + 1j * rng.normal(size=(d_out, d_in)) for _ in range(n)]
    s = sum(k.conj().T @ k for k in ks)
    w, v = np.linalg.eigh(s)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    return KrausMap(tuple(np.sqrt(scale) * k @ inv_sqrt for k in ks))


def test_identity_map(rng):
    m = KrausMap((np.eye(3),))
    rho = random_density(3, rng)
    assert np.allclose(m.apply(rho), rho)
    assert np.allclose(m.adjoint_apply(np.eye(3)), np.eye(3))


def test_single_projector_kraus():
    m = KrausMap((proj([1, 0]),))
    assert np.allclose(m.apply(I2 / 2), proj([1, 0]) / 2)


def test_rejects_trace_increasing():
    with pytest.raises(ConfigError):
        KrausMap((2 * np.eye(2),))


def test_cptni_trace(rng):
    m = random_cptni(3, 4, 3, rng)
    for _ in range(20):
        rho = random_density(3, rng)
        assert np.trace(m.apply(rho)).real <= np.trace(rho).real + 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_adjoint_duality(seed):
    rng = np.random.default_rng(seed)
    m = random_cptni(3, 2, 2, rng)
    h, rho = random_hermitian(2, rng), random_density(3, rng)
    assert abs(hs_inner(h, m.apply(rho)) - hs_inner(m.adjoint_apply(h), rho)) < 1e-12


def test_adjoint_of_trace_preserving_is_unital(rng):
    m = random_cptni(3, 5, 4, rng, scale=1.0)
    assert np.allclose(m.adjoint_apply(np.eye(5)), np.eye(3), atol=1e-12)


def test_pinching_examples(rng):
    z = PinchingChannel((2, 2))
    bd = np.zeros((4, 4), dtype=complex)
    bd[:2, :2] = random_hermitian(2, rng)
    bd[2:, 2:] = random_hermitian(2, rng)
    assert np.array_equal(z.apply(bd), bd)
    out = z.apply(np.ones((4, 4)))
    assert np.all(out[:2, 2:] == 0) and np.all(out[2:, :2] == 0)
    assert np.all(out[:2, :2] == 1) and np.all(out[2:, 2:] == 1)
    s = random_hermitian(4, rng)
    assert abs(np.trace(z.apply(s)) - np.trace(s)) < 1e-12


def trivial_gmap():
    ann = AnnouncementMap(([np.eye(2)],))
    return build_gmap(ann, ann, [(0, 0)], lambda a, alpha, b: 0)


def test_trivial_gmap_preserves_trace(rng):
    g = trivial_gmap()
    rho = random_density(4, rng)
    assert abs(np.trace(g.apply(rho)) - 1) < 1e-12
    # an isometric relabelling keeps the spectrum
    assert np.allclose(np.linalg.eigvalsh(g.apply(rho)), np.linalg.eigvalsh(rho), atol=1e-12)


def test_gmap_invariants():
    spec, _ = build_bb84_mismatch(1.0, 0.1)
    g = spec.gmap()
    assert np.max(np.abs(g.sift @ g.sift - g.sift)) < 1e-12
    v = g.keymap_isometry
    # V acts isometrically on the kept subspace
    assert np.max(np.abs(g.sift @ v.conj().T @ v @ g.sift - g.sift)) < 1e-12
    assert np.max(np.abs(g.embedding.conj().T @ g.embedding - np.eye(g.out_dim))) < 1e-12


def test_gmap_matches_uncompressed(rng):
    spec, _ = build_bb84_mismatch(0.7, 0.1)
    g = spec.gmap()
    rho = random_density(6, rng)
    full = g.apply_full(rho)
    comp = g.embedding @ g.apply(rho) @ g.embedding.conj().T
    assert np.max(np.abs(full - comp)) < 1e-12


@pytest.mark.parametrize("p_z", [0.5, 0.9, 0.99])
def test_bb84_p_pass_brute_force(p_z, rng):
    spec, _ = build_bb84_mismatch(1.0, 0.0, p_z)
    g = spec.gmap()
    rho = random_density(6, rng)
    # brute force: sum of Tr((A_j x B_k) rho) over outcomes in kept announcement pairs
    la, lb = spec.outcome_labels("A"), spec.outcome_labels("B")
    total = 0.0
    for j, (a, _) in enumerate(la):
        for k, (b, _) in enumerate(lb):
            if (a, b) in spec.kept:
                total += np.trace(np.kron(spec.alice_flat[j], spec.bob_flat[k]) @ rho).real
    assert abs(np.trace(g.apply(rho)).real - total) < 1e-12
    # on the ideal source the pass probability is p_z^2 + (1 - p_z)^2
    assert abs(np.trace(g.apply(spec.source_state)).real - (p_z**2 + (1 - p_z) ** 2)) < 1e-12


def test_partial_keymap_rejected():
    ann = AnnouncementMap(([np.diag([1.0, 0]), np.diag([0, 1.0])],))
    with pytest.raises(ConfigError):
        build_gmap(ann, ann, [(0, 0)], lambda a, alpha, b: {0: 0}[alpha])


def test_depolarize_out_examples(rng):
    g = trivial_gmap()
    rho = random_density(4, rng)
    assert np.array_equal(depolarize_out(g, rho, 0.0), g.apply(rho))
    assert np.allclose(depolarize_out(g, rho, 1.0), np.eye(g.out_dim) / g.out_dim)


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(1e-6, 0.3))
def test_depolarize_out_spectral_floor(seed, eps):
    rng = np.random.default_rng(seed)
    spec, _ = build_bb84_mismatch(0.8, 0.0)
    g = spec.gmap()
    rho = random_density(6, rng, rank=1)
    out = depolarize_out(g, rho, eps)
    floor = eps * np.trace(g.apply(rho)).real / g.out_dim
    assert np.linalg.eigvalsh(out)[0] >= floor - 1e-14


def test_depolarize_adjoint(rng):
    spec, _ = build_bb84_mismatch(0.8, 0.0)
    g = spec.gmap()
    rho, h = random_density(6, rng), random_hermitian(g.out_dim, rng)
    lhs = hs_inner(h, depolarize_out(g, rho, 0.1))
    rhs = hs_inner(depolarize_out_adjoint(g, h, 0.1), rho)
    assert abs(lhs - rhs) < 1e-12
