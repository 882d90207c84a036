"""Facial reduction: restrict the state space to the smallest face the constraints allow.

If a constraint operator ``Gamma`` is PSD and its observed value is zero,
every feasible ``rho`` satisfies ``Gamma rho = 0``.  Likewise in
prepare-and-measure protocols every feasible state lives on
``supp(rho_A) (x) H_B``.  Restricting to the common kernel keeps the same
feasible set but restores strict feasibility, which interior-point solvers
need.  Only the input side of G is restricted; its output space, and so
``d'``, is unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channels import GMap, KrausMap
from .constraints import ConstraintSet
from .linalg import hermitian

ZERO_TOL = 1e-14
KERNEL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Face:
    """Isometry ``V`` (columns span the face) plus the restricted problem data."""

    isometry: np.ndarray
    constraints: ConstraintSet
    gmap: GMap

    @property
    def dim(self) -> int:
        return self.isometry.shape[1]

    @property
    def reduced(self) -> bool:
        return self.isometry.shape[1] < self.isometry.shape[0]

    def lift(self, rho_r) -> np.ndarray:
        v = self.isometry
        return v @ rho_r @ v.conj().T

    def restrict(self, op) -> np.ndarray:
        v = self.isometry
        return hermitian(v.conj().T @ op @ v, tol=1e-8)


def zero_value_kernel(operators, values, zero_tol: float = ZERO_TOL) -> np.ndarray | None:
    """Sum of normalised PSD constraint operators whose observed value vanishes."""
    w = None
    for g, v in zip(operators, values):
        nrm = float(np.linalg.norm(g, 2))
        if nrm == 0.0 or abs(v) > zero_tol * nrm:
            continue
        if float(np.linalg.eigvalsh(g)[0]) < -1e-12 * nrm:
            continue
        w = g / nrm if w is None else w + g / nrm
    return w


def reduce_to_face(operators, values, gmap: GMap, extra=None, eps_prime: float = 0.0,
                   zero_tol: float = ZERO_TOL) -> Face:
    """Build the restricted constraint set and G map.

    Parameters
    ----------
    operators, values : raw observation operators and their values (no identity).
    extra : PSD operator, optional
        Additional operator known to annihilate every feasible state.
    """
    operators = [hermitian(o, tol=1e-9) for o in operators]
    d = gmap.in_dim
    w = zero_value_kernel(operators, values, zero_tol)
    if extra is not None:
        w = extra if w is None else w + extra
    if w is None:
        v = np.eye(d, dtype=complex)
    else:
        lam, vec = np.linalg.eigh(hermitian(w, tol=1e-9))
        keep = lam <= KERNEL_TOL * max(1.0, float(lam[-1]))
        v = vec[:, keep]
        if v.shape[1] == d:
            v = np.eye(d, dtype=complex)
    if v.shape[1] == d:
        cs = ConstraintSet.from_observations(operators, values, eps_prime=eps_prime)
        return Face(v, cs, gmap)
    ops_r = [hermitian(v.conj().T @ g @ v, tol=1e-8) for g in operators]
    cs = ConstraintSet.from_observations(ops_r, values, eps_prime=eps_prime)
    kraus = KrausMap(tuple(k @ v for k in gmap.kraus.kraus_ops))
    return Face(v, cs, replace(gmap, kraus=kraus))
