"""Protocol description, data simulation, error-correction leak and the key-rate pipeline."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..channels import AnnouncementMap, GMap, build_gmap
from ..constraints import ConstraintSet
from ..face import reduce_to_face
from ..errors import CertificateError, ConfigError, ParameterError
from ..linalg import hermitian, hermitian_basis
from ..objective import DEFAULT_EPS, ObjectiveContext, eps_max
from ..step1 import FwConfig, build_subspace, find_initial, fw_minimize
from ..step2 import ReliableBound, lower_bound_thm3, verify_certificate

POVM_TOL = 1e-10
# a few ulps of ||rho_A||; smaller eigenvalues are not resolvable in double precision
RHO_A_KERNEL_TOL = 1e-15


@dataclass(frozen=True)
class Tolerances:
    """Numerical settings for one key-rate computation."""

    eps: float = DEFAULT_EPS
    eps_prime: float = 1e-12
    stop_gap: float = 1e-7
    max_iters: int = 500
    solver_tol: float = 1e-9
    solver_max_iter: int = 100
    certify_max_iter: int = 100

    def __post_init__(self):
        for name in ("eps", "stop_gap", "solver_tol"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.eps_prime < 0:
            raise ParameterError("eps_prime must be non-negative")
        if self.max_iters < 0 or self.solver_max_iter < 1 or self.certify_max_iter < 1:
            raise ParameterError("iteration limits must be positive")

    def fw_config(self) -> FwConfig:
        return FwConfig(stop_gap=self.stop_gap, max_iters=self.max_iters,
                        solver_tol=self.solver_tol, solver_max_iter=self.solver_max_iter)


@dataclass(eq=False)
class ProtocolSpec:
    """A QKD protocol in announcement / sifting / key-map form.

    Parameters
    ----------
    alice_povm, bob_povm : list of list of (d, d) arrays
        POVM elements grouped by public announcement.
    kept : set of (a, b)
        Announcement pairs that survive sifting.
    keymap : callable
        ``keymap(a, alpha, b) -> key symbol``.
    dims : (d_A, d_B)
    mode : {"EB", "PM"}
    rho_a : (d_A, d_A) array, optional
        Alice's fixed reduced state (prepare-and-measure only).
    """

    name: str
    alice_povm: list
    bob_povm: list
    kept: set
    keymap: Callable
    dims: tuple
    mode: str = "EB"
    rho_a: np.ndarray | None = None
    signal_probs: np.ndarray | None = None
    p_z: float = 0.99
    params: dict = field(default_factory=dict)
    source_state: np.ndarray | None = None
    simulator: Callable | None = None

    def __post_init__(self):
        self.alice_povm = [[hermitian(p) for p in g] for g in self.alice_povm]
        self.bob_povm = [[hermitian(p) for p in g] for g in self.bob_povm]
        self.kept = {(int(a), int(b)) for a, b in self.kept}
        if self.mode not in ("EB", "PM"):
            raise ConfigError(f"mode must be 'EB' or 'PM', got {self.mode!r}")
        for who, groups, d in (("Alice", self.alice_povm, self.dims[0]),
                               ("Bob", self.bob_povm, self.dims[1])):
            check_povm([p for g in groups for p in g], d, who)
        if not self.kept:
            raise ConfigError("the kept announcement set is empty")
        if self.mode == "PM":
            if self.rho_a is None:
                raise ConfigError("prepare-and-measure protocols need Alice's reduced state")
            self.rho_a = hermitian(self.rho_a)
            if self.signal_probs is not None:
                s = float(np.sum(self.signal_probs))
                if abs(s - 1.0) > 1e-10:
                    raise ConfigError(f"signal probabilities sum to {s!r}, not 1")

    @property
    def alice_flat(self) -> list:
        return [p for g in self.alice_povm for p in g]

    @property
    def bob_flat(self) -> list:
        return [p for g in self.bob_povm for p in g]

    @property
    def dim(self) -> int:
        return self.dims[0] * self.dims[1]

    def outcome_labels(self, who: str) -> list:
        groups = self.alice_povm if who == "A" else self.bob_povm
        return [(a, k) for a, g in enumerate(groups) for k in range(len(g))]

    def gmap(self) -> GMap:
        return build_gmap(AnnouncementMap(self.alice_povm), AnnouncementMap(self.bob_povm),
                          self.kept, self.keymap)

    def kernel_projector(self, tol: float = RHO_A_KERNEL_TOL):
        """Projector onto ``ker(rho_A) (x) H_B``, or ``None`` when rho_A is full rank."""
        if self.mode != "PM":
            return None
        lam, vec = np.linalg.eigh(self.rho_a)
        ker = vec[:, lam <= tol * max(lam[-1], 0.0)]
        if ker.shape[1] == 0:
            return None
        return np.kron(ker @ ker.conj().T, np.eye(self.dims[1]))

    def context(self, eps: float = DEFAULT_EPS) -> ObjectiveContext:
        g = self.gmap()
        return ObjectiveContext(g, eps=min(eps, eps_max(g.out_dim)))


def check_povm(elements: Sequence, d: int, who: str = "") -> None:
    total = np.zeros((d, d), dtype=complex)
    for p in elements:
        if p.shape != (d, d):
            raise ConfigError(f"{who} POVM element has shape {p.shape}, expected ({d}, {d})")
        lam = float(np.linalg.eigvalsh(p)[0])
        if lam < -POVM_TOL:
            raise ConfigError(f"{who} POVM element is not PSD (eigenvalue {lam:.3e})")
        total += p
    err = float(np.max(np.abs(total - np.eye(d))))
    if err > POVM_TOL:
        raise ConfigError(f"{who} POVM does not sum to the identity (error {err:.3e})")


@dataclass(eq=False)
class ObservationSet:
    """Observed joint probabilities and, for prepare-and-measure, Alice's tomography."""

    joint_probs: np.ndarray
    tomographic: list = field(default_factory=list)

    def __post_init__(self):
        self.joint_probs = np.asarray(self.joint_probs, dtype=float)
        if np.min(self.joint_probs) < -1e-12:
            raise ConfigError("joint probabilities must be non-negative")
        if np.sum(self.joint_probs) > 1.0 + 1e-10:
            raise ConfigError("joint probabilities sum to more than 1")

    def operators_and_values(self, spec: ProtocolSpec):
        ops, vals = [], []
        d_b = spec.dims[1]
        for j, pa in enumerate(spec.alice_flat):
            for k, pb in enumerate(spec.bob_flat):
                ops.append(np.kron(pa, pb))
                vals.append(self.joint_probs[j, k])
        for theta, val in self.tomographic:
            ops.append(np.kron(theta, np.eye(d_b)))
            vals.append(val)
        return ops, np.array(vals)

    def constraint_set(self, spec: ProtocolSpec, eps_prime: float = 0.0) -> ConstraintSet:
        ops, vals = self.operators_and_values(spec)
        return ConstraintSet.from_observations(ops, vals, eps_prime=eps_prime)


def source_replacement(signals: Sequence, probs: Sequence):
    """Purification ``sum_i sqrt(p_i) |i>_A |phi_i>_A'`` of a prepare-and-measure source.

    Returns
    -------
    psi : (n * d,) array
    rho_a : (n, n) array
        ``rho_a[i, j] = sqrt(p_i p_j) <phi_j|phi_i>``.
    tomography : list of (Theta, theta)
        A Hermitian basis of the A register with its expectation values.
    """
    probs = np.asarray(probs, dtype=float)
    if abs(probs.sum() - 1.0) > 1e-10 or np.any(probs < 0):
        raise ConfigError("signal probabilities must be non-negative and sum to 1")
    sig = [np.asarray(s, dtype=complex).reshape(-1) for s in signals]
    if len(sig) != probs.size or len({s.size for s in sig}) != 1:
        raise ConfigError("signals must all share one dimension and match the probabilities")
    for s in sig:
        if abs(np.vdot(s, s).real - 1.0) > 1e-10:
            raise ConfigError("signal states must be normalised")
    n = len(sig)
    psi = sum(math.sqrt(p) * np.kron(np.eye(n)[i], s) for i, (p, s) in enumerate(zip(probs, sig)))
    gram = np.array([[np.vdot(sig[j], sig[i]) for j in range(n)] for i in range(n)])
    rho_a = np.sqrt(np.outer(probs, probs)) * gram
    return psi, rho_a, tomography(rho_a)


def tomography(rho_a) -> list:
    return [(t, float(np.trace(t @ rho_a).real)) for t in hermitian_basis(rho_a.shape[0])]


def coherent_overlap(beta: complex, gamma: complex) -> complex:
    """``<beta|gamma>`` for coherent states."""
    return complex(np.exp(-(abs(beta) ** 2 + abs(gamma) ** 2) / 2 + np.conj(beta) * gamma))


def tagged_source(qubits: Sequence, tags: Sequence, probs: Sequence):
    """Source state with signals ``|s_i>_S (x) |tag_i>_S'`` where ``tag_i`` are coherent states.

    Returns ``(rho_as, rho_a)`` with the coherent mode traced out of the first.
    """
    probs = np.asarray(probs, dtype=float)
    if abs(probs.sum() - 1.0) > 1e-10:
        raise ConfigError("signal probabilities must sum to 1")
    qs = [np.asarray(q, dtype=complex).reshape(-1) for q in qubits]
    n, d = len(qs), qs[0].size
    rho = np.zeros((n * d, n * d), dtype=complex)
    rho_a = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            w = math.sqrt(probs[i] * probs[j]) * coherent_overlap(tags[j], tags[i])
            rho[i * d:(i + 1) * d, j * d:(j + 1) * d] = w * np.outer(qs[i], qs[j].conj())
            rho_a[i, j] = w * np.vdot(qs[j], qs[i])
    return rho, rho_a


# ---------------------------------------------------------------------------
# channel models for data simulation


@dataclass(frozen=True)
class Depolarizing:
    """``X -> (1-p) X + p Tr(Pi X) Pi/2 + (1-Pi) X (1-Pi)`` on the first two levels."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"depolarizing probability must lie in [0, 1], got {self.p}")

    def apply(self, x: np.ndarray) -> np.ndarray:
        d = x.shape[0]
        pi = np.zeros((d, d))
        pi[0, 0] = pi[1, 1] = 1.0
        rest = np.eye(d) - pi
        mixed = np.trace(pi @ x) * pi / 2 + rest @ x @ rest
        return (1 - self.p) * x + self.p * mixed


@dataclass(frozen=True)
class Loss:
    """Replace the state by the vacuum (last level) with probability ``1 - eta``."""

    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"transmission must lie in [0, 1], got {self.eta}")

    def apply(self, x: np.ndarray) -> np.ndarray:
        d = x.shape[0]
        vac = np.zeros((d, d))
        vac[-1, -1] = 1.0
        return self.eta * x + (1 - self.eta) * np.trace(x) * vac


@dataclass(frozen=True)
class Composed:
    """Apply ``first`` then ``second``."""

    first: object
    second: object

    def apply(self, x):
        return self.second.apply(self.first.apply(x))


@dataclass(frozen=True)
class CoherentLoss:
    """Pure loss on coherent-state signals, ``|a> -> |sqrt(eta) a>``; needs a closed-form simulator."""

    eta: float

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError(f"transmission must lie in (0, 1], got {self.eta}")


def _apply_on_b(channel, rho: np.ndarray, d_a: int, d_b: int) -> np.ndarray:
    out = np.zeros_like(rho)
    for i in range(d_a):
        for j in range(d_a):
            blk = rho[i * d_b:(i + 1) * d_b, j * d_b:(j + 1) * d_b]
            out[i * d_b:(i + 1) * d_b, j * d_b:(j + 1) * d_b] = channel.apply(blk)
    return out


def simulate_statistics(spec: ProtocolSpec, channel=None) -> ObservationSet:
    """Exact joint probabilities ``Tr((P^A_j (x) P^B_k) rho_sim)``.

    The channel acts blockwise on Bob's half of ``spec.source_state``; protocols
    whose statistics are known in closed form supply ``spec.simulator``.
    """
    if spec.simulator is not None and (channel is None or isinstance(channel, CoherentLoss)):
        probs = spec.simulator(channel)
    else:
        if spec.source_state is None:
            raise ConfigError(f"protocol {spec.name!r} has no source state to simulate from")
        rho = spec.source_state if channel is None else _apply_on_b(channel, spec.source_state,
                                                                     *spec.dims)
        probs = np.array([[np.trace(np.kron(pa, pb) @ rho).real for pb in spec.bob_flat]
                          for pa in spec.alice_flat])
    probs = np.where(np.abs(probs) < 1e-300, 0.0, probs)
    tomo = tomography(spec.rho_a) if spec.mode == "PM" else []
    return ObservationSet(probs, tomo)


# ---------------------------------------------------------------------------
# leak and key rate


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def compute_leak(spec: ProtocolSpec, obs: ObservationSet):
    """Shannon-limit error-correction cost ``H(key | beta, a, b)`` on kept rounds.

    Returns ``(leak, p_pass)``; the entropy is taken on the kept distribution
    normalised by ``p_pass``.
    """
    if not spec.kept:
        raise ConfigError("the kept announcement set is empty")
    la, lb = spec.outcome_labels("A"), spec.outcome_labels("B")
    joint = {}
    for j, (a, alpha) in enumerate(la):
        for k, (b, beta) in enumerate(lb):
            if (a, b) not in spec.kept:
                continue
            g = spec.keymap(a, alpha, b)
            key = (a, b, beta)
            joint.setdefault(key, {})
            joint[key][g] = joint[key].get(g, 0.0) + max(obs.joint_probs[j, k], 0.0)
    p_pass = math.fsum(v for cond in joint.values() for v in cond.values())
    if p_pass <= 0:
        return 0.0, 0.0
    h = 0.0
    for cond in joint.values():
        vals = np.array(list(cond.values())) / p_pass
        tot = vals.sum()
        if tot > 0:
            h += _entropy_bits(vals) - (-tot * math.log2(tot))
    return max(h, 0.0), p_pass


@dataclass(eq=False)
class KeyRateResult:
    key_rate_lower: float
    key_rate_raw: float
    pa_lower: float
    pa_upper: float
    p_pass: float
    leak: float
    bound: ReliableBound
    fw_iterations: int = 0
    fw_status: str = ""
    elapsed: float = 0.0

    @property
    def sifted_rate(self) -> float:
        return self.key_rate_raw / self.p_pass if self.p_pass > 0 else 0.0

    @property
    def gap_ratio(self) -> float:
        return (self.pa_upper - self.pa_lower) / max(abs(self.pa_upper), 1e-6)


def prepare_problem(spec: ProtocolSpec, obs: ObservationSet, tolerances: Tolerances | None = None):
    """Objective context and constraint set, restricted to the face the data allow.

    Deterministic in its inputs, so a verifier can rebuild exactly the
    problem a certificate refers to.
    """
    tol = tolerances or Tolerances()
    ctx = spec.context(tol.eps)
    ops, vals = obs.operators_and_values(spec)
    face = reduce_to_face(ops, vals, ctx.gmap, spec.kernel_projector(), tol.eps_prime)
    ctx = ObjectiveContext(face.gmap, ctx.zchannel, ctx.eps, ctx.trace_scaled)
    return ctx, face.constraints


def key_rate(spec: ProtocolSpec, obs: ObservationSet, tolerances: Tolerances | None = None,
             ctx: ObjectiveContext | None = None, cs: ConstraintSet | None = None,
             trace=None) -> KeyRateResult:
    """Run both steps and assemble ``pa_lower - p_pass * leak``.

    Raises
    ------
    CertificateError
        If the dual certificate fails independent verification; no number is
        returned in that case.
    """
    tol = tolerances or Tolerances()
    t0 = time.perf_counter()
    if ctx is None or cs is None:
        ctx, cs = prepare_problem(spec, obs, tol)
    eps = min(tol.eps, eps_max(ctx.dprime))
    sub = build_subspace(cs)
    rho0 = find_initial(sub)
    fw = fw_minimize(ctx, sub, rho0, tol.fw_config(), trace=trace)
    bound = lower_bound_thm3(ctx, cs, fw.rho, eps, tol.eps_prime, tol=tol.solver_tol,
                             max_iter=tol.certify_max_iter)
    ok, recomputed = verify_certificate(ctx, cs, bound.rho, bound.dual_y, bound.dual_z,
                                        bound.eps, bound.eps_prime)
    if not ok or recomputed != bound.lower:
        raise CertificateError(f"certificate for {spec.name} failed verification")
    leak, p_pass = compute_leak(spec, obs)
    raw = bound.lower - p_pass * leak
    return KeyRateResult(
        key_rate_lower=max(0.0, raw),
        key_rate_raw=raw,
        pa_lower=bound.lower,
        pa_upper=fw.f_upper,
        p_pass=p_pass,
        leak=leak,
        bound=bound,
        fw_iterations=fw.iterations,
        fw_status=fw.status,
        elapsed=time.perf_counter() - t0,
    )
