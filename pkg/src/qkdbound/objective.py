"""Relative-entropy objective, its perturbed form and the perturbation penalty.

``f(rho) = D(G(rho) || Z(G(rho))) = H(Z(G(rho))) - H(G(rho))`` in bits.
The perturbed map is ``G_eps(rho) = (1-eps) G(rho) + eps Tr(G(rho)) 1/d'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import GMap, PinchingChannel, depolarize_out, depolarize_out_adjoint
from .errors import DimensionError, DomainError, ParameterError
from .linalg import SUPPORT_CUTOFF, entropy, hermitian, mat_log

PSD_TOL = 1e-10
DEFAULT_EPS = 1e-12


def eps_max(dprime: int) -> float:
    """Largest admissible perturbation ``1/(e (d'-1))``."""
    if dprime < 2:
        raise ParameterError(f"output dimension must be at least 2, got {dprime}")
    return 1.0 / (math.e * (dprime - 1))


def zeta(eps: float, dprime: int) -> float:
    """Penalty ``2 eps (d'-1) log2(d' / (eps (d'-1)))`` bounding ``|f - f_eps|``."""
    dprime = int(dprime)
    bound = eps_max(dprime)
    if not (eps > 0.0 and eps <= bound * (1.0 + 1e-15)):
        raise ParameterError(f"eps must lie in (0, {bound:.6g}] for d' = {dprime}, got {eps}")
    return 2.0 * eps * (dprime - 1) * math.log2(dprime / (eps * (dprime - 1)))


@dataclass(frozen=True, eq=False)
class ObjectiveContext:
    """Everything needed to evaluate ``f``, ``f_eps`` and the gradient.

    Parameters
    ----------
    gmap : GMap
        Compressed post-selection map.
    zchannel : PinchingChannel, optional
        Key pinching on the output of ``gmap``; defaults to ``gmap.pinching``.
    eps : float
        Perturbation strength used by :meth:`f_eps` and :meth:`grad`.
    trace_scaled : bool
        Whether the admixed identity carries ``Tr G(rho)`` (see
        :func:`qkdbound.channels.depolarize_out`).
    """

    gmap: GMap
    zchannel: PinchingChannel | None = None
    eps: float = DEFAULT_EPS
    trace_scaled: bool = True

    def __post_init__(self):
        if self.zchannel is None:
            object.__setattr__(self, "zchannel", self.gmap.pinching)
        if self.zchannel.dim != self.gmap.out_dim:
            raise DimensionError("pinching dimension differs from the G output dimension")
        if not 0.0 <= self.eps < 1.0:
            raise ParameterError(f"eps must lie in [0, 1), got {self.eps}")

    @property
    def dprime(self) -> int:
        return self.gmap.out_dim

    @property
    def dim(self) -> int:
        return self.gmap.in_dim

    def with_eps(self, eps: float) -> "ObjectiveContext":
        return ObjectiveContext(self.gmap, self.zchannel, eps, self.trace_scaled)

    def g_eps(self, rho, eps: float | None = None) -> np.ndarray:
        eps = self.eps if eps is None else eps
        return depolarize_out(self.gmap, rho, eps, self.trace_scaled)


def _check_state(ctx: ObjectiveContext, rho) -> np.ndarray:
    rho = hermitian(rho, tol=1e-9)
    if rho.shape != (ctx.dim, ctx.dim):
        raise DimensionError(f"state shape {rho.shape} != ({ctx.dim}, {ctx.dim})")
    lam = float(np.linalg.eigvalsh(rho)[0])
    scale = max(1.0, float(np.trace(rho).real))
    if lam < -PSD_TOL * scale:
        raise DomainError(f"state has a negative eigenvalue {lam:.3e}")
    return rho


def _relent_blocks(sigma: np.ndarray, z: PinchingChannel) -> float:
    return entropy(z.apply(sigma)) - entropy(sigma)


def eval_f(ctx: ObjectiveContext, rho) -> float:
    """Unperturbed objective in bits, entropies taken on the support."""
    rho = _check_state(ctx, rho)
    return _relent_blocks(ctx.gmap.apply(rho), ctx.zchannel)


def eval_f_eps(ctx: ObjectiveContext, rho, eps: float | None = None) -> float:
    """Perturbed objective ``D(G_eps(rho) || Z(G_eps(rho)))``."""
    rho = _check_state(ctx, rho)
    eps = ctx.eps if eps is None else eps
    if eps <= 0.0:
        raise ParameterError("the perturbed objective needs eps > 0")
    return _relent_blocks(ctx.g_eps(rho, eps), ctx.zchannel)


def grad_transposed(ctx: ObjectiveContext, rho, eps: float | None = None) -> np.ndarray:
    """``G_eps^dagger(log G_eps(rho) - log Z(G_eps(rho)))``, the transpose of the gradient.

    With ``eps = 0`` this is the unperturbed gradient and raises
    :class:`SingularOperandError` when ``G(rho)`` is not full rank.
    """
    rho = _check_state(ctx, rho)
    eps = ctx.eps if eps is None else eps
    sigma = ctx.g_eps(rho, eps)
    # cutoff relative to Tr(sigma): heavily lossy protocols have p_pass << 1
    cut = SUPPORT_CUTOFF * max(float(np.trace(sigma).real), 0.0)
    h = mat_log(sigma, cut) - mat_log(ctx.zchannel.apply(sigma), cut)
    # Adjoint of the trace-scaled map contains the G^dagger(1) term.
    return depolarize_out_adjoint(ctx.gmap, h, eps, ctx.trace_scaled)


def grad_f_eps(ctx: ObjectiveContext, rho, eps: float | None = None) -> np.ndarray:
    """Gradient matrix in the standard basis, so ``df = Tr(delta^T grad)``."""
    return grad_transposed(ctx, rho, eps).T.copy()


def grad_f(ctx: ObjectiveContext, rho) -> np.ndarray:
    return grad_f_eps(ctx, rho, 0.0)


def linear_term(rho, grad) -> float:
    """``Tr(rho^T grad)``."""
    return float(np.real(np.sum(np.asarray(rho) * np.asarray(grad))))
