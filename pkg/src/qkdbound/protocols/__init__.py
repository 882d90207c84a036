"""Protocol framework and the three example protocols."""

from .framework import (CoherentLoss, Composed, Depolarizing, KeyRateResult, Loss,
                        ObservationSet, ProtocolSpec, Tolerances, coherent_overlap,
                        compute_leak, key_rate, simulate_statistics, source_replacement,
                        tagged_source)
from .models import (build_bb84_mismatch, build_phase_coherent, build_trojan,
                     detector_click_probs, phase_coherent_statistics)

BUILDERS = {
    "bb84_mismatch": build_bb84_mismatch,
    "trojan": build_trojan,
    "phase_coherent": build_phase_coherent,
}

__all__ = [
    "BUILDERS", "CoherentLoss", "Composed", "Depolarizing", "KeyRateResult", "Loss",
    "ObservationSet", "ProtocolSpec", "Tolerances", "build_bb84_mismatch",
    "build_phase_coherent", "build_trojan", "coherent_overlap", "compute_leak",
    "detector_click_probs", "key_rate", "phase_coherent_statistics", "simulate_statistics",
    "source_replacement", "tagged_source",
]
