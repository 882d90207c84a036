"""Plain-text certificate records and their standalone re-verification.

One ``key=value`` pair per line.  Floats are written with ``repr`` so they
read back bit-for-bit; arrays are space separated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CertificateError
from .step2 import ReliableBound, verify_certificate

FORMAT = "qkdbound-certificate-1"


def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values, dtype=float).ravel())


def _parse_floats(text: str) -> np.ndarray:
    text = text.strip()
    return np.array([float(t) for t in text.split()]) if text else np.zeros(0)


@dataclass(eq=False)
class Certificate:
    protocol: str
    params: dict
    rho: np.ndarray
    dual_y: np.ndarray
    dual_z: np.ndarray
    eps: float
    eps_prime: float
    zeta: float
    f_eps: float
    linear: float
    dual_value: float
    lower: float
    constraint_hash: str
    tolerances: dict

    @classmethod
    def from_bound(cls, protocol: str, params: dict, bound: ReliableBound, constraint_hash: str,
                   tolerances: dict | None = None) -> "Certificate":
        return cls(protocol, dict(params), bound.rho, bound.dual_y, bound.dual_z, bound.eps,
                   bound.eps_prime, bound.zeta, bound.f_eps, bound.linear, bound.dual_value,
                   bound.lower, constraint_hash, dict(tolerances or {}))

    def dumps(self) -> str:
        d = self.rho.shape[0]
        lines = [
            f"format={FORMAT}",
            f"protocol={self.protocol}",
            f"params={json.dumps(self.params, sort_keys=True)}",
            f"tolerances={json.dumps(self.tolerances, sort_keys=True)}",
            f"dim={d}",
            f"rho_re={_floats(self.rho.real)}",
            f"rho_im={_floats(self.rho.imag)}",
            f"y={_floats(self.dual_y)}",
            f"z={_floats(self.dual_z)}",
            f"eps={float(self.eps)!r}",
            f"eps_prime={float(self.eps_prime)!r}",
            f"zeta={float(self.zeta)!r}",
            f"f_eps={float(self.f_eps)!r}",
            f"linear_term={float(self.linear)!r}",
            f"dual_value={float(self.dual_value)!r}",
            f"bound={float(self.lower)!r}",
            f"constraint_hash={self.constraint_hash}",
        ]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Certificate":
        rec = {}
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            if "=" not in line:
                raise CertificateError(f"line {n}: expected key=value")
            k, v = line.split("=", 1)
            rec[k.strip()] = v
        if rec.get("format") != FORMAT:
            raise CertificateError(f"unknown certificate format {rec.get('format')!r}")
        try:
            d = int(rec["dim"])
            rho = (_parse_floats(rec["rho_re"]) + 1j * _parse_floats(rec["rho_im"])).reshape(d, d)
            return cls(
                protocol=rec["protocol"],
                params=json.loads(rec["params"]),
                rho=rho,
                dual_y=_parse_floats(rec["y"]),
                dual_z=_parse_floats(rec["z"]),
                eps=float(rec["eps"]),
                eps_prime=float(rec["eps_prime"]),
                zeta=float(rec["zeta"]),
                f_eps=float(rec["f_eps"]),
                linear=float(rec["linear_term"]),
                dual_value=float(rec["dual_value"]),
                lower=float(rec["bound"]),
                constraint_hash=rec["constraint_hash"].strip(),
                tolerances=json.loads(rec.get("tolerances", "{}")),
            )
        except (KeyError, ValueError) as exc:
            raise CertificateError(f"malformed certificate: {exc}") from exc

    @classmethod
    def load(cls, path) -> "Certificate":
        with open(path) as fh:
            return cls.loads(fh.read())


def verify_record(cert: Certificate, ctx, constraints):
    """Check a certificate against a rebuilt problem.

    Returns ``(ok, recomputed_lower, message)``; ``ok`` requires the spectral
    and sign checks to pass, the constraint hash to match and the recomputed
    bound to equal the recorded one exactly.
    """
    if constraints.digest() != cert.constraint_hash:
        return False, math.nan, "constraint-set hash mismatch"
    ok, lower, diag = verify_certificate(ctx, constraints, cert.rho, cert.dual_y, cert.dual_z,
                                         cert.eps, cert.eps_prime, details=True)
    if not ok:
        return False, lower, "; ".join(f"{k}: {v}" for k, v in diag.items() if isinstance(v, str))
    if lower != cert.lower:
        return False, lower, f"recomputed bound {lower!r} differs from recorded {cert.lower!r}"
    return True, lower, "verified"
