"""Coherent-state BB84 where the phase reference travels with the signal.

Small amplitudes mean mostly vacuum and few detections; large amplitudes
make the states easier to tell apart for Eve.  The rate per signal
therefore peaks at an intermediate ``alpha``.
"""

import warnings

import numpy as np

from qkdbound.errors import QKDBoundError
from qkdbound.protocols import build_phase_coherent, key_rate

alphas = np.linspace(0.05, 1.0, 20)
for eta in (1.0, 0.8, 0.6):
    rates = []
    for a in alphas:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rates.append(key_rate(*build_phase_coherent(alpha=a, eta=eta)).key_rate_lower)
        except QKDBoundError as exc:
            print(f"eta={eta} alpha={a:.2f}: {exc}")
            rates.append(float("nan"))
    best = int(np.nanargmax(rates))
    print(f"eta={eta:.1f}: peak rate {rates[best]:.5f} at alpha={alphas[best]:.2f}")
    print("   " + " ".join(f"{r:.4f}" for r in rates))
