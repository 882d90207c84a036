"""Three BB84 variants: detector-efficiency mismatch, Trojan-horse side channel, phase-coherent signals."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ParameterError
from ..linalg import proj
from .framework import (CoherentLoss, Depolarizing, ProtocolSpec,
                        coherent_overlap, simulate_statistics, tagged_source)

SQ2 = math.sqrt(2.0)
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PLUS = (KET0 + KET1) / SQ2
MINUS = (KET0 - KET1) / SQ2
PLUS_I = (KET0 + 1j * KET1) / SQ2
MINUS_I = (KET0 - 1j * KET1) / SQ2

KEPT = {(0, 0), (1, 1)}


def _key_from_alpha(a, alpha, b):
    return alpha


def _embed3(m2):
    out = np.zeros((3, 3), dtype=complex)
    out[:2, :2] = m2
    return out


def _check_unit(name, x, lo=0.0, hi=1.0, lo_open=False):
    bad = (x <= lo) if lo_open else (x < lo)
    if bad or x > hi or not math.isfinite(x):
        raise ParameterError(f"{name} = {x!r} is out of range")


def _bob_qutrit(p_z: float, eta_2: float = 1.0, eta_4: float = 1.0):
    """Basis-announcing qubit detector plus vacuum level.  Returns grouped POVM."""
    b1 = _embed3(p_z * proj(KET0))
    b2 = _embed3(p_z * eta_2 * proj(KET1))
    b3 = _embed3((1 - p_z) * proj(PLUS))
    b4 = _embed3((1 - p_z) * eta_4 * proj(MINUS))
    b5 = np.eye(3) - (b1 + b2 + b3 + b4)
    return [[b1, b2], [b3, b4], [b5]]


def _alice_register(n: int = 4):
    e = np.eye(n)
    return [[np.diag(e[0]), np.diag(e[1])], [np.diag(e[2]), np.diag(e[3])]]


def build_bb84_mismatch(eta: float = 1.0, p: float = 0.0, p_z: float = 0.99):
    """Entanglement-based BB84 with one detector of efficiency ``eta``.

    Data are simulated by depolarizing (probability ``p``) half of a
    maximally entangled pair; the error rate is ``p/2``.
    """
    _check_unit("eta", eta, lo_open=True)
    _check_unit("p", p)
    _check_unit("p_z", p_z, lo_open=True, hi=1.0)
    alice = [[p_z * proj(KET0), p_z * proj(KET1)],
             [(1 - p_z) * proj(PLUS), (1 - p_z) * proj(MINUS)]]
    bob = _bob_qutrit(p_z, eta, eta)
    phi = np.zeros(6, dtype=complex)
    phi[0] = phi[4] = 1 / SQ2  # |0>|0> + |1>|1> with Bob as a qutrit
    spec = ProtocolSpec(
        name="bb84_mismatch",
        alice_povm=alice,
        bob_povm=bob,
        kept=KEPT,
        keymap=_key_from_alpha,
        dims=(2, 3),
        mode="EB",
        p_z=p_z,
        params={"eta": eta, "p": p, "p_z": p_z},
        source_state=proj(phi),
    )
    return spec, simulate_statistics(spec, Depolarizing(p))


# Trojan horse -------------------------------------------------------------


def trojan_signals(mu_out: float):
    """Single-photon BB84 states with coherent back-reflection tags."""
    a = math.sqrt(mu_out)
    qubits = [PLUS, MINUS, PLUS_I, MINUS_I]
    tags = [a, -a, 1j * a, -1j * a]
    return qubits, tags


def build_trojan(mu_out: float = 0.0, Q: float = 0.0, p_z: float = 0.99):
    """Prepare-and-measure BB84 with a Trojan-horse side channel of intensity ``mu_out``.

    Bob's qubit is the single-photon subspace spanned by one photon in the
    long or the short arm; the channel depolarizes it with ``p = 2Q``.
    """
    if not (0.0 <= mu_out and math.isfinite(mu_out)):
        raise ParameterError(f"mu_out must be non-negative, got {mu_out!r}")
    if not 0.0 <= Q < 0.5:
        raise ParameterError(f"Q must lie in [0, 0.5), got {Q!r}")
    _check_unit("p_z", p_z, lo_open=True)
    probs = np.array([p_z / 2, p_z / 2, (1 - p_z) / 2, (1 - p_z) / 2])
    qubits, tags = trojan_signals(mu_out)
    rho_as, rho_a = tagged_source(qubits, tags, probs)
    bob = [[p_z * proj(PLUS), p_z * proj(MINUS)],
           [(1 - p_z) * proj(PLUS_I), (1 - p_z) * proj(MINUS_I)]]
    spec = ProtocolSpec(
        name="trojan",
        alice_povm=_alice_register(),
        bob_povm=bob,
        kept=KEPT,
        keymap=_key_from_alpha,
        dims=(4, 2),
        mode="PM",
        rho_a=rho_a,
        signal_probs=probs,
        p_z=p_z,
        params={"mu_out": mu_out, "Q": Q, "p_z": p_z},
        source_state=rho_as,
    )
    return spec, simulate_statistics(spec, Depolarizing(2 * Q))


# Phase-coherent signals ---------------------------------------------------


def phase_coherent_amplitudes(alpha: float):
    """Signal-mode amplitudes of the four states; the reference mode always carries ``alpha``."""
    return [alpha, -alpha, 1j * alpha, -1j * alpha]


def detector_click_probs(a_s: complex, a_r: complex, eta: float, theta: float):
    """Closed-form outcome probabilities for one basis setting.

    Returns ``(q_plus, q_minus, q_none)``; double clicks are split evenly.
    """
    amp_p = math.sqrt(eta) * (a_s + np.exp(1j * theta) * a_r) / SQ2
    amp_m = math.sqrt(eta) * (a_s - np.exp(1j * theta) * a_r) / SQ2
    cp = -math.expm1(-abs(amp_p) ** 2)
    cm = -math.expm1(-abs(amp_m) ** 2)
    both = cp * cm
    return cp * (1 - cm) + both / 2, cm * (1 - cp) + both / 2, (1 - cp) * (1 - cm)


def phase_coherent_statistics(alpha: float, eta: float, p_z: float) -> np.ndarray:
    """Joint probabilities for Alice's four signals and Bob's five squashed outcomes."""
    probs = [p_z / 2, p_z / 2, (1 - p_z) / 2, (1 - p_z) / 2]
    out = np.zeros((4, 5))
    for i, a_s in enumerate(phase_coherent_amplitudes(alpha)):
        zp, zm, zn = detector_click_probs(a_s, alpha, eta, 0.0)
        xp, xm, xn = detector_click_probs(a_s, alpha, eta, math.pi / 2)
        row = [p_z * zp, p_z * zm, (1 - p_z) * xp, (1 - p_z) * xm,
               p_z * zn + (1 - p_z) * xn]
        out[i] = probs[i] * np.array(row)
    return out


def build_phase_coherent(alpha: float = 0.5, eta: float = 1.0, p_z: float = 0.99):
    """BB84 with coherent signal and reference pulses and no phase randomisation.

    Bob is modelled by a squashed qutrit (qubit plus vacuum).  Statistics for
    the lossy channel ``|a> -> |sqrt(eta) a>`` follow from threshold detection
    of the interfered signal and reference pulses.
    """
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    _check_unit("eta", eta, lo_open=True)
    _check_unit("p_z", p_z, lo_open=True)
    probs = np.array([p_z / 2, p_z / 2, (1 - p_z) / 2, (1 - p_z) / 2])
    amps = phase_coherent_amplitudes(alpha)
    gram = np.array([[coherent_overlap(amps[j], amps[i]) for j in range(4)] for i in range(4)])
    rho_a = np.sqrt(np.outer(probs, probs)) * gram

    def simulator(channel):
        e = eta if channel is None else channel.eta
        return phase_coherent_statistics(alpha, e, p_z)

    spec = ProtocolSpec(
        name="phase_coherent",
        alice_povm=_alice_register(),
        bob_povm=_bob_qutrit(p_z),
        kept=KEPT,
        keymap=_key_from_alpha,
        dims=(4, 3),
        mode="PM",
        rho_a=rho_a,
        signal_probs=probs,
        p_z=p_z,
        params={"alpha": alpha, "eta": eta, "p_z": p_z},
        simulator=simulator,
    )
    return spec, simulate_statistics(spec, CoherentLoss(eta))
