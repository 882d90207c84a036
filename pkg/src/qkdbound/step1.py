"""Upper bound by direct minimisation: feasible subspace, initial point, Frank-Wolfe.

The feasible set is ``fixed_part + span(free_basis)`` intersected with the PSD
cone.  Each Frank-Wolfe step solves a linear SDP over that set for the
steepest feasible direction, then line-searches along it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import CONSISTENCY_TOL, ConstraintSet
from .errors import (ConsistencyError, InfeasibleProtocolError, NumericalTroubleError,
                     ParameterError, SingularOperandError)
from .linalg import (clip_psd, entropy, gram_schmidt_hs, hermitian, hs_inner, min_eig,
                     orthogonal_complement)
from .objective import ObjectiveContext, grad_transposed
from .sdp import SdpProblem, Status, solve

log = logging.getLogger(__name__)

INFEASIBLE_TOL = 1e-9
PSD_STEP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FeasibleSubspace:
    """Affine description ``{fixed_part + sum_j w_j Omega_j}`` of the constraint set.

    ``constraint_basis`` holds the HS-orthonormal operators ``Gamma_bar`` and
    ``constraint_values`` their expectation values.
    """

    fixed_part: np.ndarray
    free_basis: tuple
    constraint_basis: tuple
    constraint_values: np.ndarray

    @property
    def m(self) -> int:
        return len(self.free_basis)

    @property
    def dim(self) -> int:
        return self.fixed_part.shape[0]

    def point(self, omega) -> np.ndarray:
        out = self.fixed_part.copy()
        for w, om in zip(omega, self.free_basis):
            out += w * om
        return out

    def coordinates(self, x) -> np.ndarray:
        return np.array([hs_inner(om, x).real for om in self.free_basis])

    def project(self, x) -> np.ndarray:
        """Orthogonal projection of a Hermitian ``x`` onto the affine subspace."""
        return self.point(self.coordinates(x))


@dataclass(frozen=True)
class FwConfig:
    stop_gap: float = 1e-7
    max_iters: int = 500
    line_search_tol: float = 1e-10
    line_search_iters: int = 40
    solver_tol: float = 1e-9
    solver_max_iter: int = 100
    away_steps: bool = True

    def __post_init__(self):
        if self.stop_gap <= 0 or self.max_iters < 0 or self.line_search_tol <= 0:
            raise ParameterError("Frank-Wolfe settings must be positive")


@dataclass(eq=False)
class FwResult:
    rho: np.ndarray
    f_upper: float
    trace_gap: float
    iterations: int
    status: str
    history: list = field(default_factory=list)
    used_eps: float = 0.0

    def __iter__(self):
        # lets callers unpack ``rho, f_upper, gap = fw_minimize(...)``
        return iter((self.rho, self.f_upper, self.trace_gap))


def build_subspace(constraints: ConstraintSet | list, values=None,
                   tol: float = 1e-10) -> FeasibleSubspace:
    """Split operator space into the part fixed by the constraints and the free part.

    Accepts a :class:`ConstraintSet` or a list of operators with ``values``.
    """
    if isinstance(constraints, ConstraintSet):
        ops, vals = constraints.operators, constraints.values
    else:
        ops, vals = [hermitian(o) for o in constraints], np.asarray(values, dtype=float)
    if not ops:
        raise ConsistencyError("no constraints supplied")
    d = ops[0].shape[0]
    gs = gram_schmidt_hs(ops, tol=tol)
    gvals = gs.coeffs @ vals
    for i in range(len(ops)):
        if i in gs.kept:
            continue
        implied = sum(hs_inner(q, ops[i]).real * v for q, v in zip(gs.basis, gvals))
        if abs(implied - vals[i]) > CONSISTENCY_TOL * (1.0 + abs(vals[i])):
            raise ConsistencyError(f"constraint {i} contradicts the span of the others")
    fixed = np.zeros((d, d), dtype=complex)
    for q, v in zip(gs.basis, gvals):
        fixed += v * q
    free = orthogonal_complement(gs.basis, d)
    return FeasibleSubspace(fixed, tuple(free), tuple(gs.basis), np.asarray(gvals))


def find_initial(sub: FeasibleSubspace, tol: float = 1e-9) -> np.ndarray:
    """Feasible point with the largest possible minimum eigenvalue.

    Raises
    ------
    InfeasibleProtocolError
        If no PSD operator satisfies the constraints.
    """
    if sub.m == 0:
        lam = min_eig(sub.fixed_part)
        if lam < -INFEASIBLE_TOL:
            raise InfeasibleProtocolError(f"the unique feasible operator has eigenvalue {lam:.3e}")
        return sub.fixed_part.copy()
    d = sub.dim
    cons = [(-om, 0.0) for om in sub.free_basis] + [(np.eye(d), 1.0)]
    sol = solve(SdpProblem(sub.fixed_part, tuple(cons)), tol=tol, max_iter=200)
    if sol.status is Status.INFEASIBLE:
        # unbounded max-min-eig cannot happen with a fixed trace, so this is emptiness
        raise InfeasibleProtocolError("constraint set is empty (solver infeasibility certificate)")
    omega = sol.dual_y[:-1]
    rho0 = sub.point(omega)
    lam = min_eig(rho0)
    if lam < -INFEASIBLE_TOL:
        raise InfeasibleProtocolError(f"best achievable minimum eigenvalue is {lam:.3e}")
    return rho0


def _f_value(ctx: ObjectiveContext, rho, eps: float) -> float:
    if eps == 0.0:
        sigma = ctx.gmap.apply(rho)
    else:
        sigma = ctx.g_eps(rho, eps)
    return entropy(ctx.zchannel.apply(sigma)) - entropy(sigma)


def line_search(ctx: ObjectiveContext, rho, delta, tol: float = 1e-10, eps: float = 0.0,
                max_iter: int = 40, f0: float | None = None) -> float:
    """Golden-section search for ``argmin_{lam in [0, 1]} f(rho + lam delta)``.

    Returns 0 when no step improves on ``f(rho)``, so the objective never
    increases.  Steps that push the minimum eigenvalue below
    ``min(lambda_min(rho), 0)`` score ``+inf``; along a line the PSD set is an
    interval, so the search stays unimodal.
    """
    rho = np.asarray(rho)
    floor = -math.inf
    if rho.ndim == 2:
        floor = min(min_eig(rho), 0.0) - PSD_STEP_TOL * max(1.0, float(np.trace(rho).real))

    def phi(t):
        x = rho + t * delta
        if floor > -math.inf and min_eig(x) < floor:
            return math.inf
        return _f_value(ctx, x, eps)

    f0 = phi(0.0) if f0 is None else f0
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, 1.0
    c, e = b - inv * (b - a), a + inv * (b - a)
    fc, fe = phi(c), phi(e)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - inv * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, e, fe
            e = a + inv * (b - a)
            fe = phi(e)
    cands = [(fc, c), (fe, e), (phi(1.0), 1.0)]
    best_f, best_t = min(cands)
    if best_f < f0:
        return best_t
    return 0.0


def _direction_problem(sub: FeasibleSubspace, hgrad) -> SdpProblem:
    cons = tuple(zip(sub.constraint_basis, sub.constraint_values))
    return SdpProblem(hgrad, cons)


def _keep_psd(target, anchor, anchor_min):
    """Mix ``target`` toward a strictly positive feasible ``anchor`` until PSD."""
    lam = min_eig(target)
    if lam >= 0.0 or anchor_min <= 0.0:
        return target
    t = min(1.0, -lam / (anchor_min - lam) * (1.0 + 1e-9))
    return (1.0 - t) * target + t * anchor


def fw_minimize(ctx: ObjectiveContext, sub: FeasibleSubspace, rho0=None,
                cfg: FwConfig | None = None, trace=None) -> FwResult:
    """Frank-Wolfe minimisation of ``f`` over the feasible set.

    Parameters
    ----------
    trace : callable, optional
        Called as ``trace(iteration, f_value, gap)`` once per iteration.

    Returns
    -------
    FwResult
        Unpacks as ``(rho, f_upper, trace_gap)``.
    """
    cfg = cfg or FwConfig()
    rho = find_initial(sub) if rho0 is None else hermitian(rho0, tol=1e-9)
    anchor = rho.copy()
    anchor_min = min_eig(anchor)
    eps = 0.0
    hist = []
    if sub.m == 0:
        f = _f_value(ctx, rho, 0.0)
        return FwResult(rho, f, 0.0, 0, "unique", [f], 0.0)

    f = _f_value(ctx, rho, eps)
    # the iterate as a convex combination of visited targets, for away steps
    atoms, weights = [rho.copy()], np.ones(1)
    # start later solves at the tolerance the solver last managed
    tol_now = cfg.solver_tol
    gap = math.inf
    status = "max_iters"
    it = 0
    for it in range(cfg.max_iters):
        try:
            hgrad = grad_transposed(ctx, clip_psd(rho), eps)
        except SingularOperandError:
            # switch to the perturbed objective for the rest of the run
            eps = ctx.eps if ctx.eps > 0 else 1e-12
            f = _f_value(ctx, rho, eps)
            hgrad = grad_transposed(ctx, clip_psd(rho), eps)
        sol = solve(_direction_problem(sub, hgrad), tol=tol_now,
                    max_iter=cfg.solver_max_iter)
        if sol.status is Status.OPTIMAL:
            tol_now = sol.tol
        if sol.status is Status.INFEASIBLE:
            raise NumericalTroubleError("direction-finding SDP reported infeasibility")
        target = _keep_psd(sub.project(sol.primal_X), anchor, anchor_min)
        delta = target - rho
        gap = abs(hs_inner(hgrad, delta).real)
        hist.append(f)
        if trace is not None:
            trace(it, f, gap)
        if gap < cfg.stop_gap:
            status = "converged"
            break
        # away step: move weight off the worst atom when that descends faster
        scores = [hs_inner(hgrad, x).real for x in atoms]
        k = int(np.argmax(scores))
        away_gap = scores[k] - hs_inner(hgrad, rho).real
        away = cfg.away_steps and len(atoms) > 1 and away_gap > gap and weights[k] < 1.0
        if away:
            step_max = weights[k] / (1.0 - weights[k])
            delta = step_max * (rho - atoms[k])
        lam = line_search(ctx, rho, delta, cfg.line_search_tol, eps,
                          cfg.line_search_iters, f0=f)
        if lam == 0.0:
            status = "stalled"
            break
        if away:
            g = lam * step_max
            weights = weights * (1.0 + g)
            weights[k] -= g
            if lam == 1.0:
                del atoms[k]
                weights = np.delete(weights, k)
        elif lam == 1.0:
            atoms, weights = [target], np.ones(1)
        else:
            weights = np.append(weights * (1.0 - lam), lam)
            atoms.append(target)
        rho = rho + lam * delta
        rho = 0.5 * (rho + rho.conj().T)
        f = _f_value(ctx, rho, eps)
    else:
        it = cfg.max_iters
    f_upper = _f_value(ctx, rho, 0.0)
    log.debug("Frank-Wolfe %s after %d iterations, f=%.12g gap=%.3e", status, it, f_upper, gap)
    return FwResult(rho, f_upper, gap, it, status, hist, eps)
