"""Trojan-horse side channel: how much back-reflected light costs.

Eve injects light into Alice's modulator and reads the reflection, a weak
coherent state ``mu_out`` that carries the basis and bit value.  Larger
leakage, or more channel noise, lowers the certified rate.
"""

import numpy as np

from qkdbound.protocols import build_trojan, key_rate

qs = np.linspace(0.0, 0.1, 6)
print("mu_out " + " ".join(f"Q={q:<6.2f}" for q in qs))
for mu in (0.0, 0.01, 0.04):
    rates = [key_rate(*build_trojan(mu_out=mu, Q=q)).key_rate_lower for q in qs]
    print(f"{mu:6.2f} " + " ".join(f"{r:8.5f}" for r in rates))

# With mu_out = 0 the row matches plain BB84; every later row lies below it.
