"""Certified lower bounds from a near-optimal state via the linearised dual.

For any PSD ``rho`` in the domain of the (perturbed) objective, convexity gives

    min_S f  >=  f_eps(rho) - Tr(rho^T grad) + max_{y, z} [gamma . y - eps' sum z] - zeta

where ``(y, z)`` range over ``sum_i y_i Gamma_i^T <= grad`` and ``-z <= y <= z``.
Any dual point that passes the spectral check gives a valid bound, however
inaccurate the SDP solve was.  The ``eps' = 0`` and ``eps = 0`` special cases
are exposed separately as :func:`lower_bound_thm2` and :func:`lower_bound_thm1`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constraints import ConstraintSet
from .errors import CertificateError, ParameterError
from .linalg import clip_psd, hermitian
from .objective import ObjectiveContext, eps_max, eval_f, grad_transposed, linear_term, zeta
from .objective import _relent_blocks
from .sdp import SOLVER_TOL, SdpProblem, Status, restore_dual_feasibility, solve

__all__ = [
    "ConstraintSet",
    "ReliableBound",
    "lower_bound_thm1",
    "lower_bound_thm2",
    "lower_bound_thm3",
    "verify_certificate",
    "certify",
]

EPS_PRIME_INFLATION = 1.01


@dataclass(eq=False)
class ReliableBound:
    """Certified lower bound together with everything needed to re-check it."""

    lower: float
    upper: float
    dual_y: np.ndarray
    dual_z: np.ndarray
    eps: float
    eps_prime: float
    zeta: float
    certificate_verified: bool
    f_eps: float = math.nan
    linear: float = math.nan
    dual_value: float = math.nan
    rho: np.ndarray | None = None
    theorem: int = 3
    solver_status: Status | None = None
    eps_prime_raised: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def _problem_plain(hgrad, constraints: ConstraintSet) -> SdpProblem:
    return SdpProblem(hgrad, tuple(constraints.gammas))


def _problem_relaxed(hgrad, constraints: ConstraintSet, eps_prime: float) -> SdpProblem:
    n = len(constraints)
    d = constraints.dim
    zero = np.zeros((d, d), dtype=complex)
    cons = tuple(constraints.gammas) + tuple((zero, -eps_prime) for _ in range(n))
    eye = np.eye(n)
    # rows of c - L^T (y, z) >= 0 read  y + z >= 0  and  z - y >= 0
    lm = np.block([[-eye, eye], [-eye, -eye]])
    return SdpProblem(hgrad, cons, np.zeros(2 * n), lm)


def _lmi_min(hgrad, constraints: ConstraintSet, y) -> float:
    p = _problem_plain(hgrad, constraints)
    return float(np.linalg.eigvalsh(p.slack(y))[0])


def _objective_terms(ctx: ObjectiveContext, rho, eps: float):
    hgrad = grad_transposed(ctx, rho, eps)
    sigma = ctx.gmap.apply(rho) if eps == 0.0 else ctx.g_eps(rho, eps)
    fval = _relent_blocks(sigma, ctx.zchannel)
    return hgrad, fval, linear_term(rho.T, hgrad)


def _check_eps(ctx: ObjectiveContext, eps: float) -> None:
    if not (0.0 < eps <= eps_max(ctx.dprime) * (1.0 + 1e-15)):
        raise ParameterError(
            f"eps must lie in (0, {eps_max(ctx.dprime):.6g}] for d' = {ctx.dprime}, got {eps}"
        )


def certify(ctx: ObjectiveContext, constraints: ConstraintSet, rho, eps: float,
            eps_prime: float | None, tol: float = SOLVER_TOL, max_iter: int = 100) -> ReliableBound:
    """Shared driver.  ``eps = 0`` gives the unperturbed bound; ``eps_prime = None`` drops slacks."""
    rho = clip_psd(hermitian(rho, tol=1e-8))
    relaxed = eps_prime is not None
    raised = False
    if relaxed:
        viol = constraints.violation(rho)
        used = max(float(eps_prime), EPS_PRIME_INFLATION * viol)
        if used > eps_prime:
            raised = True
            warnings.warn(
                f"eps_prime raised from {eps_prime:.3e} to {used:.3e} to cover the observed "
                f"constraint violation", RuntimeWarning, stacklevel=3)
        eps_prime = used
    else:
        eps_prime = 0.0

    hgrad, fval, lin = _objective_terms(ctx, rho, eps)
    n = len(constraints)
    p = _problem_relaxed(hgrad, constraints, eps_prime) if relaxed else _problem_plain(hgrad, constraints)
    sol = solve(p, tol=tol, max_iter=max_iter)
    y = np.asarray(sol.dual_y, dtype=float)[:n].copy()
    if sol.status is Status.INFEASIBLE or not np.all(np.isfinite(y)):
        y = np.zeros(n)

    plain = _problem_plain(hgrad, constraints)
    y, _ = restore_dual_feasibility(plain, y, constraints.identity_index)
    z = np.abs(y) if relaxed else np.zeros(n)
    dual_value = float(constraints.values @ y - eps_prime * np.sum(z))
    zt = zeta(eps, ctx.dprime) if eps > 0.0 else 0.0
    lower = fval - lin + dual_value - zt

    ok, recomputed, diag = verify_certificate(ctx, constraints, rho, y, z if relaxed else None,
                                              eps, eps_prime, details=True)
    if ok and recomputed != lower:
        raise CertificateError("certificate arithmetic did not reproduce")
    return ReliableBound(
        lower=lower,
        upper=eval_f(ctx, rho),
        dual_y=y,
        dual_z=z,
        eps=eps,
        eps_prime=eps_prime,
        zeta=zt,
        certificate_verified=ok,
        f_eps=fval,
        linear=lin,
        dual_value=dual_value,
        rho=rho,
        theorem=3 if relaxed else (2 if eps > 0 else 1),
        solver_status=sol.status,
        eps_prime_raised=raised,
        diagnostics=diag,
    )


def lower_bound_thm1(ctx: ObjectiveContext, constraints: ConstraintSet, rho, **kw) -> ReliableBound:
    """Unperturbed bound; raises :class:`SingularOperandError` if ``G(rho)`` is singular."""
    return certify(ctx, constraints, rho, 0.0, None, **kw)


def lower_bound_thm2(ctx: ObjectiveContext, constraints: ConstraintSet, rho,
                     eps: float | None = None, **kw) -> ReliableBound:
    """Perturbed bound minus ``zeta``; valid for rank-deficient ``G(rho)``."""
    eps = ctx.eps if eps is None else eps
    _check_eps(ctx, eps)
    return certify(ctx, constraints, rho, eps, None, **kw)


def lower_bound_thm3(ctx: ObjectiveContext, constraints: ConstraintSet, rho,
                     eps: float | None = None, eps_prime: float | None = None, **kw) -> ReliableBound:
    """Perturbed bound over the ``eps'``-relaxed constraint set.

    ``eps_prime`` defaults to ``constraints.eps_prime`` and is raised (with a
    warning) to 1.01 times the measured violation of ``rho`` if smaller.
    """
    eps = ctx.eps if eps is None else eps
    _check_eps(ctx, eps)
    eps_prime = constraints.eps_prime if eps_prime is None else eps_prime
    if eps_prime < 0:
        raise ParameterError("eps_prime must be non-negative")
    return certify(ctx, constraints, rho, eps, eps_prime, **kw)


def verify_certificate(ctx: ObjectiveContext, constraints: ConstraintSet, rho, y, z,
                       eps: float, eps_prime: float, details: bool = False):
    """Independently re-check a dual certificate and recompute the bound.

    ``z = None`` selects the unrelaxed form (``eps_prime`` must then be 0).
    Returns ``(verified, recomputed_lower)``, plus a diagnostics dict when
    ``details`` is true.
    """
    diag = {}
    ok = True
    y = np.asarray(y, dtype=float)
    n = len(constraints)
    try:
        rho = np.asarray(rho, dtype=complex)
        if y.shape != (n,):
            raise CertificateError(f"y has shape {y.shape}, expected ({n},)")
        if eps < 0:
            raise CertificateError("eps must be non-negative")
        hgrad, fval, lin = _objective_terms(ctx, rho, eps)
        zt = zeta(eps, ctx.dprime) if eps > 0.0 else 0.0
    except Exception as exc:  # verification reports, never raises
        diag["error"] = str(exc)
        return (False, math.nan, diag) if details else (False, math.nan)

    lam = _lmi_min(hgrad, constraints, y)
    diag["lmi_min_eig"] = lam
    if not lam >= 0.0:
        ok = False
        diag["lmi"] = f"LMI violated: minimum eigenvalue {lam:.3e}"
    if z is None:
        if eps_prime != 0.0:
            ok = False
            diag["z"] = "eps_prime > 0 requires z"
        z = np.zeros(n)
    else:
        z = np.asarray(z, dtype=float)
        if z.shape != (n,) or not np.all(z >= 0) or not np.all(-z <= y) or not np.all(y <= z):
            ok = False
            diag["z"] = "sign constraints -z <= y <= z violated"
        if eps_prime < 0:
            ok = False
            diag["eps_prime"] = "negative eps_prime"
    # Validity only needs G_eps(rho) > 0, which the matrix logs above checked;
    # a grossly non-PSD rho still signals a corrupted record.
    lmin = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    diag["rho_min_eig"] = lmin
    if lmin < -1e-10:
        ok = False
        diag["rho"] = f"state not PSD (minimum eigenvalue {lmin:.3e})"
    dual_value = float(constraints.values @ y - eps_prime * np.sum(z))
    lower = fval - lin + dual_value - zt
    if not math.isfinite(lower):
        ok = False
    return (ok, lower, diag) if details else (ok, lower)
