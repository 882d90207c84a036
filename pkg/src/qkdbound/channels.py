"""Completely positive maps in Kraus form and the post-selection map G.

``G(rho) = V Pi A(rho) Pi V^dagger`` is assembled from two announcement
maps, the set of kept announcement pairs and a key map.  Registers are ordered
``(R, A, A~, A-, B, B~, B-)`` where ``R`` holds the key symbol, ``~`` marks the
public announcement register and ``-`` the outcome-within-announcement register.

After assembly the output space is compressed onto the range of G, one
key-value block at a time, so the pinching channel stays block diagonal and
the output dimension ``d'`` is as small as possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, ParameterError
from .linalg import hermitian, ket, psd_sqrt

CPTNI_TOL = 1e-10
ISO_TOL = 1e-10


def _apply_kraus(stack: np.ndarray, rho: np.ndarray) -> np.ndarray:
    # stack has shape (k, out, in)
    out = np.einsum("kij,jl,kml->im", stack, rho, stack.conj(), optimize=True)
    return 0.5 * (out + out.conj().T)


def _adjoint_kraus(stack: np.ndarray, h: np.ndarray) -> np.ndarray:
    out = np.einsum("kji,jl,klm->im", stack.conj(), h, stack, optimize=True)
    return 0.5 * (out + out.conj().T)


@dataclass(frozen=True, eq=False)
class KrausMap:
    """A completely positive, trace non-increasing map ``rho -> sum_k K_k rho K_k^dagger``."""

    kraus_ops: tuple
    check: bool = True

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ConfigError("a Kraus map needs at least one operator")
        shape = ops[0].shape
        if any(k.ndim != 2 or k.shape != shape for k in ops):
            raise DimensionError("all Kraus operators must share one 2-D shape")
        object.__setattr__(self, "kraus_ops", ops)
        object.__setattr__(self, "_stack", np.array(ops))
        if self.check:
            lam = float(np.linalg.eigvalsh(self.kraus_sum())[-1])
            if lam > 1.0 + CPTNI_TOL:
                raise ConfigError(f"map is not trace non-increasing: ||sum K^dag K|| = {lam:.12g}")

    @property
    def in_dim(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    def kraus_sum(self) -> np.ndarray:
        s = np.einsum("kji,kjl->il", self._stack.conj(), self._stack)
        return 0.5 * (s + s.conj().T)

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.in_dim, self.in_dim):
            raise DimensionError(f"input shape {rho.shape} != ({self.in_dim}, {self.in_dim})")
        return _apply_kraus(self._stack, rho)

    def adjoint_apply(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=complex)
        if h.shape != (self.out_dim, self.out_dim):
            raise DimensionError(f"input shape {h.shape} != ({self.out_dim}, {self.out_dim})")
        return _adjoint_kraus(self._stack, h)

    __call__ = apply


def apply(kmap: KrausMap, rho) -> np.ndarray:
    return kmap.apply(rho)


def adjoint_apply(kmap: KrausMap, h) -> np.ndarray:
    return kmap.adjoint_apply(h)


@dataclass(frozen=True, eq=False)
class PinchingChannel:
    """Pinching onto contiguous diagonal blocks of the given sizes."""

    block_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.block_sizes)
        if any(s < 0 for s in sizes):
            raise ConfigError("block sizes must be non-negative")
        object.__setattr__(self, "block_sizes", sizes)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        object.__setattr__(self, "_offsets", offsets)
        mask = np.zeros((offsets[-1], offsets[-1]), dtype=bool)
        for lo, hi in zip(offsets[:-1], offsets[1:]):
            mask[lo:hi, lo:hi] = True
        object.__setattr__(self, "_mask", mask)

    @classmethod
    def key_register(cls, n_keys: int, rest_dim: int) -> "PinchingChannel":
        """Pinching ``sum_j (|j><j|_R (x) 1) . (|j><j|_R (x) 1)`` with R first."""
        return cls((rest_dim,) * n_keys)

    @property
    def dim(self) -> int:
        return int(self._offsets[-1])

    def blocks(self):
        return [slice(lo, hi) for lo, hi in zip(self._offsets[:-1], self._offsets[1:])]

    @property
    def block_projectors(self) -> list:
        out = []
        for sl in self.blocks():
            p = np.zeros((self.dim, self.dim), dtype=complex)
            p[sl, sl] = np.eye(sl.stop - sl.start)
            out.append(p)
        return out

    def apply(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=complex)
        if sigma.shape != (self.dim, self.dim):
            raise DimensionError(f"input shape {sigma.shape} does not match pinching dim {self.dim}")
        return np.where(self._mask, sigma, 0.0)

    __call__ = apply


def pinch(z: PinchingChannel, sigma) -> np.ndarray:
    return z.apply(sigma)


@dataclass(frozen=True, eq=False)
class AnnouncementMap:
    """Announcement channel built from a POVM grouped by public announcement.

    ``groups[a][alpha]`` is the POVM element for announcement ``a`` and
    outcome ``alpha``.  Kraus operators are
    ``K_a = sum_alpha sqrt(P_(a,alpha)) (x) |a> (x) |alpha>``.
    """

    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(hermitian(p) for p in g) for g in self.groups)
        if not groups or any(len(g) == 0 for g in groups):
            raise ConfigError("every announcement needs at least one POVM element")
        object.__setattr__(self, "groups", groups)

    @property
    def system_dim(self) -> int:
        return self.groups[0][0].shape[0]

    @property
    def n_announce(self) -> int:
        return len(self.groups)

    @property
    def n_outcomes(self) -> int:
        return max(len(g) for g in self.groups)

    @property
    def out_dim(self) -> int:
        return self.system_dim * self.n_announce * self.n_outcomes

    def kraus_op(self, a: int) -> np.ndarray:
        d, na, no = self.system_dim, self.n_announce, self.n_outcomes
        k = np.zeros((self.out_dim, d), dtype=complex)
        for alpha, p in enumerate(self.groups[a]):
            tag = np.kron(ket(a, na), ket(alpha, no)).reshape(-1, 1)
            k += np.kron(psd_sqrt(p), tag)
        return k

    def kraus_map(self) -> KrausMap:
        return KrausMap(tuple(self.kraus_op(a) for a in range(self.n_announce)))


@dataclass(frozen=True, eq=False)
class GMap:
    """Post-selection and key map ``sigma -> V Pi A(sigma) Pi V^dagger``, compressed.

    Attributes
    ----------
    announce : KrausMap
        Joint announcement channel ``A`` on ``A (x) B``.
    sift : ndarray
        Projector ``Pi`` onto the kept announcement pairs (uncompressed space).
    keymap_isometry : ndarray
        ``V``; maps the announced space into ``R (x)`` announced space.
    kraus : KrausMap
        Composite Kraus operators restricted to the range of G.
    pinching : PinchingChannel
        Key-register pinching ``Z`` on the compressed output.
    embedding : ndarray
        Isometry from the compressed output into the full ``R A A~ A- B B~ B-`` space.
    """

    announce: KrausMap
    sift: np.ndarray
    keymap_isometry: np.ndarray
    kraus: KrausMap
    pinching: PinchingChannel
    embedding: np.ndarray
    n_keys: int
    full_dims: tuple = field(default=())

    @property
    def in_dim(self) -> int:
        return self.kraus.in_dim

    @property
    def out_dim(self) -> int:
        return self.kraus.out_dim

    def apply(self, rho) -> np.ndarray:
        return self.kraus.apply(rho)

    def adjoint_apply(self, h) -> np.ndarray:
        return self.kraus.adjoint_apply(h)

    def apply_full(self, rho) -> np.ndarray:
        """Uncompressed ``V Pi A(rho) Pi V^dagger`` for cross-checks."""
        out = self.announce.apply(rho)
        out = self.sift @ out @ self.sift
        return self.keymap_isometry @ out @ self.keymap_isometry.conj().T

    __call__ = apply


def build_gmap(
    announce_a: AnnouncementMap,
    announce_b: AnnouncementMap,
    kept: Sequence[tuple],
    keymap: Callable[[int, int, int], int],
    n_keys: int | None = None,
    rank_tol: float = 1e-12,
) -> GMap:
    """Assemble G from announcements, kept pairs and key map.

    ``keymap(a, alpha, b)`` must return an integer key symbol for every
    kept ``(a, b)`` and every outcome ``alpha`` of announcement ``a``.
    """
    kept = sorted({(int(a), int(b)) for a, b in kept})
    if not kept:
        raise ConfigError("the kept announcement set is empty")
    for a, b in kept:
        if not (0 <= a < announce_a.n_announce and 0 <= b < announce_b.n_announce):
            raise ConfigError(f"kept pair {(a, b)} is not a valid announcement pair")

    table = {}
    for a, b in kept:
        for alpha in range(len(announce_a.groups[a])):
            try:
                g = keymap(a, alpha, b)
            except (KeyError, IndexError, TypeError) as exc:
                raise ConfigError(f"key map undefined at (a={a}, alpha={alpha}, b={b})") from exc
            if g is None:
                raise ConfigError(f"key map undefined at (a={a}, alpha={alpha}, b={b})")
            table[(a, alpha, b)] = int(g)
    if any(g < 0 for g in table.values()):
        raise ConfigError("key symbols must be non-negative integers")
    n_keys = max(table.values()) + 1 if n_keys is None else int(n_keys)
    if any(g >= n_keys for g in table.values()):
        raise ConfigError("a key symbol exceeds n_keys")

    dA, naA, noA = announce_a.system_dim, announce_a.n_announce, announce_a.n_outcomes
    dB, naB, noB = announce_b.system_dim, announce_b.n_announce, announce_b.n_outcomes
    ka = [announce_a.kraus_op(a) for a in range(naA)]
    kb = [announce_b.kraus_op(b) for b in range(naB)]
    announce = KrausMap(tuple(np.kron(x, y) for x in ka for y in kb))

    alice_dim = dA * naA * noA
    bob_dim = dB * naB * noB
    mid = alice_dim * bob_dim

    sift = np.zeros((mid, mid), dtype=complex)
    for a, b in kept:
        pa = np.kron(np.eye(dA), np.kron(np.diag(ket(a, naA)), np.eye(noA)))
        pb = np.kron(np.eye(dB), np.kron(np.diag(ket(b, naB)), np.eye(noB)))
        sift += np.kron(pa, pb)

    iso = np.zeros((n_keys * mid, mid), dtype=complex)
    for (a, alpha, b), g in table.items():
        pa = np.kron(np.eye(dA), np.kron(np.diag(ket(a, naA)), np.diag(ket(alpha, noA))))
        pb = np.kron(np.eye(dB), np.kron(np.diag(ket(b, naB)), np.eye(noB)))
        iso += np.kron(ket(g, n_keys).reshape(-1, 1), np.kron(pa, pb))

    _check_projector(sift)
    _check_isometry_on_domain(iso)

    composite = []
    for x in ka:
        for y in kb:
            k = iso @ (sift @ np.kron(x, y))
            if np.max(np.abs(k)) > 0.0:
                composite.append(k)
    if not composite:
        raise ConfigError("every Kraus operator vanishes after sifting")

    # Compress onto the range of G, block by block in the key register.
    stacked = np.hstack(composite)
    blocks = []
    sizes = []
    for j in range(n_keys):
        rows = stacked[j * mid : (j + 1) * mid]
        u, s, _ = np.linalg.svd(rows, full_matrices=False)
        r = int(np.sum(s > rank_tol * max(1.0, s[0] if s.size else 0.0)))
        w = np.zeros((n_keys * mid, r), dtype=complex)
        w[j * mid : (j + 1) * mid] = u[:, :r]
        blocks.append(w)
        sizes.append(r)
    emb = np.hstack(blocks)
    reduced = KrausMap(tuple(emb.conj().T @ k for k in composite))
    return GMap(
        announce=announce,
        sift=sift,
        keymap_isometry=iso,
        kraus=reduced,
        pinching=PinchingChannel(tuple(sizes)),
        embedding=emb,
        n_keys=n_keys,
        full_dims=(n_keys, dA, naA, noA, dB, naB, noB),
    )


def _check_projector(p: np.ndarray) -> None:
    err = np.max(np.abs(p @ p - p))
    if err > ISO_TOL:
        raise ConfigError(f"sifting operator is not a projector (error {err:.2e})")


def _check_isometry_on_domain(v: np.ndarray) -> None:
    g = v.conj().T @ v
    # V^dagger V must be a projector: the identity on the subspace V acts on.
    err = np.max(np.abs(g @ g - g))
    if err > ISO_TOL:
        raise ConfigError(f"key map operator is not a partial isometry (error {err:.2e})")


def depolarize_out(g: GMap, rho, eps: float, trace_scaled: bool = True) -> np.ndarray:
    """Perturbed output ``G_eps(rho)``.

    With ``trace_scaled`` (default) the maximally mixed admixture carries the
    trace of ``G(rho)``: ``(1-eps) G(rho) + eps Tr(G(rho)) 1/d'``, which keeps
    the map linear and trace equal to ``p_pass``.  Otherwise the literal
    ``(1-eps) G(rho) + eps 1/d'`` is returned.
    """
    if not 0.0 <= eps <= 1.0:
        raise ParameterError(f"eps must lie in [0, 1], got {eps}")
    out = g.apply(rho)
    if eps == 0.0:
        return out
    d = g.out_dim
    weight = np.trace(out).real if trace_scaled else 1.0
    return (1.0 - eps) * out + (eps * weight / d) * np.eye(d)


def depolarize_out_adjoint(g: GMap, h, eps: float, trace_scaled: bool = True) -> np.ndarray:
    """Adjoint of the linear part of :func:`depolarize_out`."""
    out = g.adjoint_apply(h)
    if eps == 0.0:
        return out
    if trace_scaled:
        d = g.out_dim
        return (1.0 - eps) * out + (eps * np.trace(h).real / d) * g.kraus.kraus_sum()
    return (1.0 - eps) * out
