"""Linear constraint sets ``Tr(Gamma_i rho) = gamma_i`` with the trace constraint first."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DimensionError, ParameterError
from .linalg import gram_schmidt_hs, hermitian, hs_inner

CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Observed expectation values with a tolerance ``eps_prime``.

    ``gammas[identity_index]`` is always ``(1, 1)``.  Use :meth:`from_observations`
    to build one from raw operators; it prepends the identity and
    orthonormalises the rest.
    """

    gammas: tuple
    eps_prime: float = 0.0
    identity_index: int = 0

    def __post_init__(self):
        gam = tuple((hermitian(g, tol=1e-9), float(v)) for g, v in self.gammas)
        if not gam:
            raise DimensionError("a constraint set needs at least the trace constraint")
        d = gam[0][0].shape[0]
        if any(g.shape != (d, d) for g, _ in gam):
            raise DimensionError("all constraint operators must share one shape")
        if self.eps_prime < 0:
            raise ParameterError("eps_prime must be non-negative")
        g0, v0 = gam[self.identity_index]
        if np.max(np.abs(g0 - np.eye(d))) > 1e-12 or abs(v0 - 1.0) > 1e-12:
            raise DimensionError("the identity-index entry must be (1, 1)")
        object.__setattr__(self, "gammas", gam)

    @classmethod
    def from_observations(cls, operators, values, eps_prime: float = 0.0,
                          tol: float = 1e-10) -> "ConstraintSet":
        """Orthonormalise ``operators`` with the identity placed first.

        The identity is rescaled back to ``1`` so it carries value 1.
        Dependent operators are dropped after checking their values agree.
        """
        operators = [hermitian(o, tol=1e-9) for o in operators]
        values = np.asarray(values, dtype=float)
        if len(operators) != values.size:
            raise DimensionError("operators and values differ in length")
        d = operators[0].shape[0] if operators else None
        if d is None:
            raise DimensionError("need at least one operator to fix the dimension")
        ops = [np.eye(d, dtype=complex)] + operators
        vals = np.concatenate([[1.0], values])
        gs = gram_schmidt_hs(ops, tol=tol)
        new_vals = gs.coeffs @ vals
        _check_dependent(ops, vals, gs, tol)
        # First vector is 1/sqrt(d); rescale so the trace row reads Tr(rho) = 1.
        basis = [np.eye(d, dtype=complex)] + list(gs.basis[1:])
        new_vals = [1.0] + [float(v) for v in new_vals[1:]]
        return cls(tuple(zip(basis, new_vals)), eps_prime, 0)

    @property
    def dim(self) -> int:
        return self.gammas[0][0].shape[0]

    @property
    def operators(self) -> list:
        return [g for g, _ in self.gammas]

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.gammas])

    def __len__(self) -> int:
        return len(self.gammas)

    def residuals(self, rho) -> np.ndarray:
        return np.array([hs_inner(g, rho).real - v for g, v in self.gammas])

    def violation(self, rho) -> float:
        """``max_i |Tr(Gamma_i rho) - gamma_i|`` with compensated sums."""
        rho = np.asarray(rho, dtype=complex)
        worst = 0.0
        for g, v in self.gammas:
            prods = (g.conj() * rho).ravel()
            s = math.fsum(prods.real) - v
            worst = max(worst, abs(s))
        return worst

    def with_eps_prime(self, eps_prime: float) -> "ConstraintSet":
        return ConstraintSet(self.gammas, eps_prime, self.identity_index)

    def digest(self) -> str:
        """SHA-256 of the operators and values, for certificate records."""
        h = hashlib.sha256()
        for g, v in self.gammas:
            h.update(np.ascontiguousarray(g).tobytes())
            h.update(np.float64(v).tobytes())
        return h.hexdigest()


def _check_dependent(ops, vals, gs, tol) -> None:
    kept = set(gs.kept)
    for i, op in enumerate(ops):
        if i in kept:
            continue
        coef = np.array([hs_inner(q, op).real for q in gs.basis])
        implied = float(coef @ (gs.coeffs @ vals))
        if abs(implied - vals[i]) > CONSISTENCY_TOL * (1.0 + abs(vals[i])):
            raise ConsistencyError(
                f"constraint {i - 1} depends linearly on earlier ones but its value "
                f"{vals[i]!r} differs from the implied {implied!r}"
            )
