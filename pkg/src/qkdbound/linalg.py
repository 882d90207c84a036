"""Dense linear algebra for Hermitian operators.

Operators are plain complex ``numpy`` arrays.  The conventions shared by the
whole package are fixed here:

* logarithms and entropies are base 2;
* tensor products follow ``numpy.kron`` (last subsystem index runs fastest);
* the "standard basis" used for transposes and vectorisation is the
  computational product basis in that ordering.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, QKDBoundError, SingularOperandError

HERMITICITY_TOL = 1e-12
SUPPORT_CUTOFF = 1e-14
LN2 = math.log(2.0)


class Spectrum(NamedTuple):
    """Eigen-decomposition of a Hermitian operator, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


class GramSchmidtResult(NamedTuple):
    """Output of :func:`gram_schmidt_hs`.

    ``coeffs[i]`` expresses ``basis[i]`` as a real combination of the inputs,
    so expectation values transform as ``coeffs @ values``.
    """

    basis: list
    rank: int
    coeffs: np.ndarray
    kept: list


def hermitian(m, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Return ``(m + m^dagger)/2`` after checking ``m`` is Hermitian to ``tol`` (relative)."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if asym > tol * scale:
        raise DimensionError(f"matrix is not Hermitian (asymmetry {asym:.3e})")
    return 0.5 * (m + m.conj().T)


def eig_hermitian(op) -> Spectrum:
    """Spectral decomposition with ascending eigenvalues and orthonormal eigenvectors."""
    op = hermitian(op)
    try:
        w, v = np.linalg.eigh(op)
    except np.linalg.LinAlgError as exc:
        raise QKDBoundError(
            f"Hermitian eigensolver did not converge on a {op.shape[0]}x{op.shape[0]} "
            f"operator: {exc}"
        ) from exc
    return Spectrum(w, v)


def mat_log(op, support_cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Base-2 logarithm of a strictly positive Hermitian operator.

    Raises
    ------
    SingularOperandError
        If any eigenvalue is ``<= support_cutoff``.
    """
    w, v = eig_hermitian(op)
    if w[0] <= support_cutoff:
        raise SingularOperandError(
            f"smallest eigenvalue {w[0]:.3e} is below the support cutoff {support_cutoff:.1e}"
        )
    return (v * (np.log(w) / LN2)) @ v.conj().T


def mat_func(op, func) -> np.ndarray:
    """Apply a scalar function to the spectrum of a Hermitian operator."""
    w, v = eig_hermitian(op)
    return (v * func(w)) @ v.conj().T


def entropy(op) -> float:
    """Von Neumann entropy ``-Tr X log2 X`` on the support; works for subnormalised ``X``.

    Eigenvalues below zero are treated as zero, so callers must validate
    positivity themselves.
    """
    w = np.linalg.eigvalsh(hermitian(op))
    w = w[w > 0.0]
    return float(-np.sum(w * np.log(w)) / LN2)


def kron(*ops) -> np.ndarray:
    """Kronecker product of any number of matrices (or vectors)."""
    out = np.asarray(ops[0])
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op))
    return out


def partial_trace(op, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    Parameters
    ----------
    op : (D, D) array
        Operator on the product space with subsystem sizes ``dims``.
    dims : sequence of int
        Subsystem dimensions, product must equal ``D``.
    keep : int or iterable of int
        Indices of the subsystems to keep, in any order (output keeps the
        original ordering).
    """
    op = np.asarray(op)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != op.shape[0] or op.shape[0] != op.shape[1]:
        raise DimensionError(f"dims {dims} do not match operator shape {op.shape}")
    if np.isscalar(keep):
        keep = [keep]
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = op.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # Trace from the highest index down so axis positions stay valid.
    for count, i in enumerate(sorted(traced, reverse=True)):
        remaining = n - count
        t = np.trace(t, axis1=i, axis2=i + remaining)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(dk, dk)


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``Tr(a^dagger b)``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def transpose_std(op) -> np.ndarray:
    """Transpose in the fixed computational (standard) basis."""
    return np.asarray(op).T.copy()


def vec(op) -> np.ndarray:
    """Column-stacking vectorisation; ``vec(s) @ vec(t) == Tr(s^T t)``."""
    return np.asarray(op).reshape(-1, order="F")


def trace_norm(op) -> float:
    """Schatten 1-norm; sum of absolute eigenvalues for Hermitian input."""
    op = np.asarray(op, dtype=complex)
    if np.allclose(op, op.conj().T, atol=HERMITICITY_TOL * max(1.0, np.max(np.abs(op)))):
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (op + op.conj().T)))))
    return float(np.sum(np.linalg.svd(op, compute_uv=False)))


def real_vec(op) -> np.ndarray:
    """Isometric map from d x d Hermitian matrices to R^(d^2).

    ``real_vec(a) @ real_vec(b) == Tr(a b)`` for Hermitian ``a`` and ``b``.
    """
    op = np.asarray(op)
    d = op.shape[0]
    iu = np.triu_indices(d, 1)
    off = op[iu] * math.sqrt(2.0)
    return np.concatenate([np.real(np.diag(op)), off.real, off.imag])


def from_real_vec(v, d: int) -> np.ndarray:
    """Inverse of :func:`real_vec`."""
    v = np.asarray(v, dtype=float)
    iu = np.triu_indices(d, 1)
    k = len(iu[0])
    out = np.zeros((d, d), dtype=complex)
    out[np.diag_indices(d)] = v[:d]
    upper = (v[d : d + k] + 1j * v[d + k :]) / math.sqrt(2.0)
    out[iu] = upper
    out[(iu[1], iu[0])] = upper.conj()
    return out


def gram_schmidt_hs(ops, tol: float = 1e-10) -> GramSchmidtResult:
    """Orthonormalise Hermitian operators under the Hilbert-Schmidt inner product.

    Modified Gram-Schmidt with one re-orthogonalisation pass.  An input whose
    residual norm falls below ``tol`` times its own norm is declared linearly
    dependent and dropped, as is an input that is itself negligible
    (norm below ``tol`` times the largest input norm), since its direction
    would be rounding noise.
    """
    ops = [hermitian(o) for o in ops]
    if not ops:
        return GramSchmidtResult([], 0, np.zeros((0, 0)), [])
    d = ops[0].shape[0]
    vecs = np.array([real_vec(o) for o in ops])
    n = len(ops)
    scale = float(np.max(np.linalg.norm(vecs, axis=1)))
    q_list: list[np.ndarray] = []
    c_list: list[np.ndarray] = []
    kept: list[int] = []
    for i in range(n):
        v = vecs[i].copy()
        c = np.zeros(n)
        c[i] = 1.0
        norm0 = np.linalg.norm(v)
        for _ in range(2):
            for q, cq in zip(q_list, c_list):
                r = q @ v
                v -= r * q
                c -= r * cq
        norm = np.linalg.norm(v)
        if norm0 <= tol * scale or norm <= tol * norm0:
            continue
        q_list.append(v / norm)
        c_list.append(c / norm)
        kept.append(i)
    basis = [from_real_vec(q, d) for q in q_list]
    coeffs = np.array(c_list) if c_list else np.zeros((0, n))
    return GramSchmidtResult(basis, len(basis), coeffs, kept)


def orthogonal_complement(basis, d: int) -> list:
    """HS-orthonormal Hermitian basis of the complement of ``span(basis)``."""
    from scipy.linalg import null_space

    if len(basis) == 0:
        mat = np.zeros((1, d * d))
    else:
        mat = np.array([real_vec(b) for b in basis])
    ns = null_space(mat)
    return [from_real_vec(ns[:, j], d) for j in range(ns.shape[1])]


def min_eig(op) -> float:
    return float(np.linalg.eigvalsh(0.5 * (op + np.asarray(op).conj().T))[0])


def clip_psd(op) -> np.ndarray:
    """Nearest PSD operator in Frobenius norm (negative eigenvalues set to zero)."""
    w, v = eig_hermitian(op)
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def random_density(d: int, rng, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a Ginibre ensemble."""
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d: int, rng) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (g + g.conj().T)


def ket(index: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[index] = 1.0
    return v


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def hermitian_basis(d: int) -> list:
    """HS-orthonormal basis of d x d Hermitian matrices (normalised generalised Gell-Mann)."""
    return [from_real_vec(e, d) for e in np.eye(d * d)]


def psd_sqrt(op) -> np.ndarray:
    """Square root of a PSD operator (tiny negative eigenvalues clipped)."""
    return mat_func(op, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def binary_entropy(q: float) -> float:
    if q <= 0.0 or q >= 1.0:
        return 0.0
    return float(-q * math.log2(q) - (1 - q) * math.log2(1 - q))


def sym_check(op, tol: float = HERMITICITY_TOL) -> float:
    """Max-norm asymmetry ``max|M - M^dagger|``."""
    op = np.asarray(op)
    return float(np.max(np.abs(op - op.conj().T))) if op.size else 0.0
