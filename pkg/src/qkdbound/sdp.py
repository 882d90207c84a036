"""Linear semidefinite programs in standard form.

Primal::

    minimise    <A, X> + c . w
    subject to  <B_j, X> + (L w)_j = b_j,   X >= 0,  w >= 0

Dual::

    maximise    b . y
    subject to  A - sum_j y_j B_j >= 0,   c - L^T y >= 0

The optional nonnegative block ``w`` (cost ``c``, coupling ``L``) is how
slack variables enter; plain problems leave it empty.  Complex Hermitian
data are embedded into real symmetric matrices of twice the size and handed
to the homogeneous self-dual interior-point solver in ``cvxopt``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import qr

from .errors import CertificateError, ConsistencyError, DimensionError
from .linalg import hermitian, hs_inner, real_vec

SOLVER_TOL = 1e-9
MAX_ITER = 100
LOOSEST_TOL = 1e-6
DEPENDENCE_TOL = 1e-10


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"
    NUMERICAL_TROUBLE = "NumericalTrouble"


class Residuals(NamedTuple):
    primal: float
    dual: float
    gap: float


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """Standard-form SDP data.

    Parameters
    ----------
    objective : (n, n) Hermitian array
        ``A``.
    constraints : sequence of (B_j, b_j)
        Hermitian constraint operators with real right-hand sides.
    lp_cost : (k,) array, optional
        Cost ``c`` of the nonnegative block.
    lp_matrix : (m, k) array, optional
        Coupling ``L`` of the nonnegative block into the equality rows.
    """

    objective: np.ndarray
    constraints: tuple
    lp_cost: np.ndarray | None = None
    lp_matrix: np.ndarray | None = None

    def __post_init__(self):
        a = hermitian(self.objective, tol=1e-9)
        n = a.shape[0]
        cons = []
        for bj, val in self.constraints:
            bj = hermitian(bj, tol=1e-9)
            if bj.shape != (n, n):
                raise DimensionError(f"constraint shape {bj.shape} != ({n}, {n})")
            cons.append((bj, float(val)))
        object.__setattr__(self, "objective", a)
        object.__setattr__(self, "constraints", tuple(cons))
        if (self.lp_cost is None) != (self.lp_matrix is None):
            raise DimensionError("lp_cost and lp_matrix must be given together")
        if self.lp_cost is not None:
            c = np.asarray(self.lp_cost, dtype=float).reshape(-1)
            lm = np.asarray(self.lp_matrix, dtype=float).reshape(len(cons), c.size)
            object.__setattr__(self, "lp_cost", c)
            object.__setattr__(self, "lp_matrix", lm)

    @property
    def variable_dim(self) -> int:
        return self.objective.shape[0]

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def n_lp(self) -> int:
        return 0 if self.lp_cost is None else self.lp_cost.size

    @property
    def b(self) -> np.ndarray:
        return np.array([v for _, v in self.constraints], dtype=float)

    def slack(self, y) -> np.ndarray:
        """``A - sum_j y_j B_j``."""
        s = self.objective.copy()
        for yj, (bj, _) in zip(np.asarray(y, dtype=float), self.constraints):
            s -= yj * bj
        return 0.5 * (s + s.conj().T)

    def lp_slack(self, y) -> np.ndarray:
        if self.lp_cost is None:
            return np.zeros(0)
        return self.lp_cost - self.lp_matrix.T @ np.asarray(y, dtype=float)

    def dump(self, path) -> None:
        """Write the data as plain text for cross-checking with other solvers."""
        with open(path, "w") as fh:
            n = self.variable_dim
            fh.write(f"% standard-form SDP, n={n}, m={self.n_constraints}, k={self.n_lp}\n")
            _dump_matrix(fh, "A", self.objective)
            for j, (bj, val) in enumerate(self.constraints):
                _dump_matrix(fh, f"B{j}", bj)
                fh.write(f"b{j} {val!r}\n")
            if self.lp_cost is not None:
                fh.write("c " + " ".join(repr(float(v)) for v in self.lp_cost) + "\n")
                for j, row in enumerate(self.lp_matrix):
                    fh.write(f"L{j} " + " ".join(repr(float(v)) for v in row) + "\n")


def _dump_matrix(fh, name, m) -> None:
    n = m.shape[0]
    fh.write(f"{name} {n} {n}\n")
    for i in range(n):
        for j in range(n):
            if m[i, j] != 0:
                fh.write(f"{i + 1} {j + 1} {m[i, j].real!r} {m[i, j].imag!r}\n")


@dataclass(eq=False)
class SdpSolution:
    primal_X: np.ndarray
    dual_y: np.ndarray
    primal_obj: float
    dual_obj: float
    status: Status
    residuals: Residuals
    primal_w: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    infeasible_side: str | None = None
    message: str = ""
    tol: float = math.nan


def _embed(m: np.ndarray) -> np.ndarray:
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])


def _unembed(z: np.ndarray, n: int) -> np.ndarray:
    z11, z12 = z[:n, :n], z[:n, n:]
    z21, z22 = z[n:, :n], z[n:, n:]
    x = (z11 + z22) + 1j * (z21 - z12)
    return 0.5 * (x + x.conj().T)


def _independent_rows(p: SdpProblem, tol: float):
    """Pick a maximal independent subset of constraint rows.

    Returns the kept indices and, for each dropped index, its expansion in
    the kept rows.
    """
    m = p.n_constraints
    if m == 0:
        return [], {}
    rows = np.array([real_vec(bj) for bj, _ in p.constraints])
    if p.lp_matrix is not None:
        rows = np.hstack([rows, p.lp_matrix])
    _, r, perm = qr(rows.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag[0] if diag.size else 0.0
    rank = int(np.sum(diag > tol * max(scale, 1.0)))
    kept = sorted(perm[:rank].tolist())
    dropped = {}
    if rank < m:
        basis = rows[kept].T
        for j in range(m):
            if j in kept:
                continue
            coef, *_ = np.linalg.lstsq(basis, rows[j], rcond=None)
            dropped[j] = coef
    return kept, dropped


def reduce_constraints(p: SdpProblem, tol: float = DEPENDENCE_TOL, raise_on_conflict: bool = True):
    """Drop linearly dependent rows, checking their right-hand sides agree.

    Returns ``(reduced_problem, kept_indices, conflict)`` where ``conflict``
    is ``None`` or a Farkas vector ``y`` with ``sum y_j B_j = 0``,
    ``L^T y = 0`` and ``b . y > 0``.
    """
    kept, dropped = _independent_rows(p, tol)
    b = p.b
    conflict = None
    for j, coef in dropped.items():
        implied = float(coef @ b[kept])
        if abs(implied - b[j]) > 1e-9 * (1.0 + abs(b[j])):
            if raise_on_conflict:
                raise ConsistencyError(
                    f"constraint {j} is a combination of others but its value {b[j]!r} "
                    f"disagrees with the implied {implied!r}"
                )
            y = np.zeros(p.n_constraints)
            y[j] = 1.0
            y[kept] -= coef
            if b @ y < 0:
                y = -y
            conflict = y
            break
    cons = tuple(p.constraints[k] for k in kept)
    lm = None if p.lp_matrix is None else p.lp_matrix[kept]
    return SdpProblem(p.objective, cons, p.lp_cost, lm), kept, conflict


def _cvx_solve(p: SdpProblem, tol: float, max_iter: int):
    import cvxopt
    from cvxopt import solvers

    n = p.variable_dim
    m = p.n_constraints
    k = p.n_lp
    big = 2 * n
    g_psd = np.zeros((big * big, m))
    for j, (bj, _) in enumerate(p.constraints):
        g_psd[:, j] = _embed(bj).reshape(-1, order="F")
    h_psd = _embed(p.objective).reshape(-1, order="F")
    if k:
        g = np.vstack([p.lp_matrix.T, g_psd])
        h = np.concatenate([p.lp_cost, h_psd])
    else:
        g, h = g_psd, h_psd
    dims = {"l": k, "q": [], "s": [big]}
    opts = {
        "show_progress": False,
        "maxiters": int(max_iter),
        "abstol": tol,
        "reltol": tol,
        "feastol": tol,
    }
    c = cvxopt.matrix(-p.b) if m else cvxopt.matrix(np.zeros(0))
    res = solvers.conelp(c, cvxopt.matrix(g), cvxopt.matrix(h), dims, options=opts)
    return res


def solve(p: SdpProblem, tol: float = SOLVER_TOL, max_iter: int = MAX_ITER,
          loosest_tol: float = LOOSEST_TOL) -> SdpSolution:
    """Solve the SDP, returning both primal and dual iterates.

    Linearly dependent constraints with consistent values are dropped (their
    multipliers are zero); conflicting ones return status ``Infeasible`` with
    a Farkas vector in ``dual_y``.

    Near the boundary of the PSD cone the interior-point iterates can lose
    accuracy before ``tol`` is reached, and the last iterate is then worse
    than earlier ones.  If the first attempt does not finish, the solve is
    repeated with tolerances ten times looser, up to ``loosest_tol``, and the
    first optimal (or else the least infeasible) answer is returned.
    """
    best = None
    t = tol
    while True:
        sol = _solve_at(p, t, max_iter)
        sol.tol = t
        if sol.status in (Status.OPTIMAL, Status.INFEASIBLE):
            return sol
        if best is None or max(sol.residuals) < max(best.residuals):
            best = sol
        if t >= loosest_tol:
            return best
        t = min(10.0 * t, loosest_tol)


def _solve_at(p: SdpProblem, tol: float, max_iter: int) -> SdpSolution:
    n = p.variable_dim
    m = p.n_constraints
    reduced, kept, conflict = reduce_constraints(p, raise_on_conflict=False)
    if conflict is not None:
        return SdpSolution(
            primal_X=np.zeros((n, n), dtype=complex),
            dual_y=conflict,
            primal_obj=math.inf,
            dual_obj=math.inf,
            status=Status.INFEASIBLE,
            residuals=Residuals(math.inf, math.inf, math.inf),
            infeasible_side="primal",
            message="dependent constraints with conflicting values",
        )

    if reduced.n_constraints == 0:
        return _solve_unconstrained(p)

    try:
        res = _cvx_solve(reduced, tol, max_iter)
    except (ArithmeticError, ValueError) as exc:
        # breakdown inside the solver's scaling update; no usable iterate
        return SdpSolution(np.zeros((n, n), dtype=complex), np.zeros(m), math.nan, math.nan,
                           Status.NUMERICAL_TROUBLE, Residuals(math.inf, math.inf, math.inf),
                           message=f"solver breakdown: {exc}")
    raw = res["status"]
    iters = int(res.get("iterations", 0) or 0)

    y = np.zeros(m)
    if res["x"] is not None:
        y[kept] = np.array(res["x"]).reshape(-1)
    k = p.n_lp
    x = np.zeros((n, n), dtype=complex)
    w = np.zeros(k)
    if res["z"] is not None:
        zvec = np.array(res["z"]).reshape(-1)
        w = zvec[:k].copy()
        zmat = zvec[k:].reshape(2 * n, 2 * n, order="F")
        zmat = np.tril(zmat) + np.tril(zmat, -1).T
        x = _unembed(zmat, n)

    if raw == "optimal":
        status = Status.OPTIMAL
        side = None
    elif raw == "dual infeasible":
        # cvxopt's dual is our primal
        status, side = Status.INFEASIBLE, "primal"
    elif raw == "primal infeasible":
        status, side = Status.INFEASIBLE, "dual"
    elif iters >= max_iter:
        status, side = Status.MAX_ITER, None
    else:
        status, side = Status.NUMERICAL_TROUBLE, None

    if status is Status.INFEASIBLE:
        return SdpSolution(x, y, math.nan, math.nan, status, Residuals(math.inf, math.inf, math.inf),
                           w, iters, side, f"solver reported {raw}")

    pobj = float(hs_inner(p.objective, x).real + (p.lp_cost @ w if k else 0.0))
    dobj = float(p.b @ y)
    resid = residuals(p, x, w, y)
    if status is Status.OPTIMAL:
        scale = 1.0 + max(np.max(np.abs(p.objective)), np.max(np.abs(p.b)))
        if max(resid) > 1e3 * tol * scale:
            status = Status.NUMERICAL_TROUBLE
    return SdpSolution(x, y, pobj, dobj, status, resid, w, iters, None, raw)


def _solve_unconstrained(p: SdpProblem) -> SdpSolution:
    n = p.variable_dim
    lam = float(np.linalg.eigvalsh(p.objective)[0])
    y = np.zeros(p.n_constraints)
    x = np.zeros((n, n), dtype=complex)
    lp_ok = p.lp_cost is None or bool(np.all(p.lp_cost >= 0))
    if lam < 0 or not lp_ok:
        return SdpSolution(x, y, -math.inf, -math.inf, Status.INFEASIBLE,
                           Residuals(math.inf, math.inf, math.inf), infeasible_side="dual",
                           message="primal unbounded")
    return SdpSolution(x, y, 0.0, 0.0, Status.OPTIMAL, Residuals(0.0, 0.0, 0.0),
                       np.zeros(p.n_lp))


def residuals(p: SdpProblem, x, w, y) -> Residuals:
    """Primal infeasibility, dual infeasibility and absolute duality gap."""
    lhs = np.array([hs_inner(bj, x).real for bj, _ in p.constraints])
    if p.n_lp:
        lhs = lhs + p.lp_matrix @ w
    r_p = float(np.max(np.abs(lhs - p.b))) if p.n_constraints else 0.0
    r_p = max(r_p, max(0.0, -float(np.linalg.eigvalsh(x)[0])))
    if p.n_lp:
        r_p = max(r_p, max(0.0, -float(np.min(w))))
    r_d = max(0.0, -float(np.linalg.eigvalsh(p.slack(y))[0]))
    if p.n_lp:
        r_d = max(r_d, max(0.0, -float(np.min(p.lp_slack(y)))))
    pobj = hs_inner(p.objective, x).real + (p.lp_cost @ w if p.n_lp else 0.0)
    return Residuals(r_p, r_d, float(abs(pobj - p.b @ y)))


def _identity_scale(bj: np.ndarray) -> float:
    n = bj.shape[0]
    c = float(np.trace(bj).real) / n
    if c == 0.0 or np.max(np.abs(bj - c * np.eye(n))) > 1e-12 * abs(c):
        raise CertificateError("the constraint at identity_index is not a multiple of the identity")
    return c


def restore_dual_feasibility(p: SdpProblem, y, identity_index: int, margin: float | None = None):
    """Shift the identity multiplier until ``A - sum y_j B_j`` is verifiably PSD.

    Returns ``(y_restored, b . y_restored)``.  Only ``y[identity_index]`` changes
    and it only decreases (for a positive identity coefficient), so the dual
    objective never increases when ``b[identity_index] > 0``.
    """
    if not 0 <= identity_index < p.n_constraints:
        raise CertificateError("identity constraint absent")
    bid, _ = p.constraints[identity_index]
    c = _identity_scale(bid)
    y = np.array(y, dtype=float).copy()
    if margin is None:
        margin = 1e-12 * (1.0 + float(np.linalg.norm(p.objective, 2)))
    lam = float(np.linalg.eigvalsh(p.slack(y))[0])
    shift = max(0.0, -lam)
    if shift > 0.0:
        shift += margin
    for _ in range(60):
        trial = y.copy()
        trial[identity_index] -= shift / c
        if float(np.linalg.eigvalsh(p.slack(trial))[0]) >= 0.0:
            return trial, float(p.b @ trial)
        shift = max(shift, -lam) + margin
        margin *= 2.0
    raise CertificateError("could not restore dual feasibility")


def solve_dual_restored(p: SdpProblem, identity_index: int, tol: float = SOLVER_TOL,
                        max_iter: int = MAX_ITER):
    """Solve, then restore dual feasibility; usable even on truncated runs."""
    sol = solve(p, tol, max_iter)
    if sol.status is Status.INFEASIBLE:
        return sol, None, -math.inf
    y = sol.dual_y if np.all(np.isfinite(sol.dual_y)) else np.zeros(p.n_constraints)
    y_r, obj = restore_dual_feasibility(p, y, identity_index)
    return sol, y_r, obj


def solve_lmi_dual(objective, operators: Sequence, values, identity_index: int = 0, **kw):
    """Convenience wrapper: maximise ``values . y`` subject to ``objective >= sum y_j operators_j``."""
    p = SdpProblem(objective, tuple(zip(operators, values)))
    return solve_dual_restored(p, identity_index, **kw)
