"""A bound is only as good as its certificate.

This script computes one bound, writes the dual certificate to text,
reads it back and re-verifies it against a freshly rebuilt problem.  It
then nudges one dual entry to show that verification fails.
"""

import tempfile
from pathlib import Path

from qkdbound.certificate import Certificate, verify_record
from qkdbound.protocols import build_trojan, key_rate
from qkdbound.protocols.framework import prepare_problem

params = {"mu_out": 0.01, "Q": 0.03}
spec, obs = build_trojan(**params)
ctx, cs = prepare_problem(spec, obs)
res = key_rate(spec, obs, ctx=ctx, cs=cs)
print(f"privacy-amplification bound: {res.pa_lower:.10f} (FW upper {res.pa_upper:.10f})")

cert = Certificate.from_bound("trojan", params, res.bound, cs.digest())
path = Path(tempfile.mkdtemp()) / "trojan.cert"
cert.save(path)
print(f"certificate written to {path} ({path.stat().st_size} bytes)")

# A verifier rebuilds the problem from the parameters alone
ctx2, cs2 = prepare_problem(*build_trojan(**Certificate.load(path).params))
ok, lower, msg = verify_record(Certificate.load(path), ctx2, cs2)
print(f"re-verified: {ok}, bound {lower!r}, {msg}")

bad = Certificate.load(path)
bad.dual_y[1] += 1e-4
ok, _, msg = verify_record(bad, ctx2, cs2)
print(f"tampered dual re-verified: {ok} ({msg})")
