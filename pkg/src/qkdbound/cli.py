"""Command-line parameter scans that write certified key rates to CSV.

Usage::

    python -m qkdbound --config scan.json --out rates.csv --certificates certs/
    python -m qkdbound --reproduce fig4 --out fig4.csv
    python -m qkdbound --verify certs/point_000.cert

The exit status is 0 when every point verified and 2 otherwise.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .certificate import Certificate, verify_record
from .errors import ConfigError, QKDBoundError, ValidationError
from .protocols import BUILDERS, Tolerances, key_rate
from .protocols.framework import (Composed, Depolarizing, Loss, ObservationSet, ProtocolSpec,
                                  prepare_problem, simulate_statistics, source_replacement)

log = logging.getLogger("qkdbound")

HEADER = ["param", "key_rate_lower", "pa_upper", "pa_lower", "p_pass", "leak", "eps",
          "eps_prime", "zeta", "verified"]

REQUIRED = {
    "bb84_mismatch": ("eta", "p"),
    "trojan": ("mu_out", "Q"),
    "phase_coherent": ("alpha", "eta"),
    "custom": (),
}
TOLERANCE_KEYS = {f for f in Tolerances.__dataclass_fields__}

FIGURES = {
    "fig3": ("bb84_mismatch", "eta", {"p": [0.0, 0.05, 0.1]}, np.linspace(0.1, 1.0, 10)),
    "fig4": ("trojan", "Q", {"mu_out": [0.0, 0.01, 0.04]}, np.linspace(0.0, 0.1, 11)),
    "fig5": ("phase_coherent", "alpha", {"eta": [1.0, 0.8, 0.6]}, np.linspace(0.05, 1.0, 20)),
}


@dataclass
class RunConfig:
    """A validated scan description."""

    protocol: str
    scan: dict
    fixed: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    certificates: str | None = None
    custom: dict | None = None

    @property
    def param(self) -> str:
        return self.scan["param"]

    @property
    def grid(self) -> list:
        s = self.scan
        if "values" in s:
            return [float(v) for v in s["values"]]
        count = int(s["count"])
        if count == 1:
            return [float(s["start"])]
        if s.get("spacing", "linear") == "log":
            return list(np.geomspace(float(s["start"]), float(s["stop"]), count))
        return list(np.linspace(float(s["start"]), float(s["stop"]), count))

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _fail(where: str, msg: str):
    raise ValidationError(f"{where}: {msg}")


def validate_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        _fail("<root>", "expected a JSON object")
    proto = raw.get("protocol")
    if proto not in REQUIRED:
        _fail("protocol", f"must be one of {sorted(REQUIRED)}, got {proto!r}")
    scan = raw.get("scan")
    if not isinstance(scan, dict) or "param" not in scan:
        _fail("scan", "needs an object with at least 'param'")
    if "values" in scan:
        if not isinstance(scan["values"], list) or not scan["values"]:
            _fail("scan.values", "must be a non-empty list")
    else:
        for k in ("start", "stop", "count"):
            if k not in scan:
                _fail(f"scan.{k}", "missing")
        if int(scan["count"]) < 1:
            _fail("scan.count", "must be at least 1")
        if scan.get("spacing", "linear") not in ("linear", "log"):
            _fail("scan.spacing", "must be 'linear' or 'log'")
        if scan.get("spacing") == "log" and (scan["start"] <= 0 or scan["stop"] <= 0):
            _fail("scan.start", "log spacing needs positive endpoints")
    fixed = raw.get("fixed", {}) or {}
    if not isinstance(fixed, dict):
        _fail("fixed", "must be an object")
    for name in REQUIRED[proto]:
        if name != scan["param"] and name not in fixed:
            _fail(f"fixed.{name}", f"required by protocol {proto!r}")
    tol = raw.get("tolerances", {}) or {}
    for k, v in tol.items():
        if k not in TOLERANCE_KEYS:
            _fail(f"tolerances.{k}", "unknown tolerance")
        if not (isinstance(v, (int, float)) and v >= 0 and (v > 0 or k == "eps_prime")):
            _fail(f"tolerances.{k}", "must be positive")
    try:
        Tolerances(**tol)
    except QKDBoundError as exc:
        _fail("tolerances", str(exc))
    cfg = RunConfig(proto, dict(scan), dict(fixed), dict(tol), raw.get("output"),
                    raw.get("certificates"), raw.get("custom"))
    if proto == "custom":
        if not isinstance(cfg.custom, dict):
            _fail("custom", "required for protocol 'custom'")
        build_custom(cfg.custom, {cfg.param: cfg.grid[0], **cfg.fixed})
    return cfg


def parse_config(path) -> RunConfig:
    """Read and validate a JSON scan configuration."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return validate_config(raw)


def default_config(protocol: str = "bb84_mismatch") -> RunConfig:
    defaults = {
        "bb84_mismatch": ({"param": "eta", "values": [1.0, 0.8, 0.6]}, {"p": 0.05, "p_z": 0.99}),
        "trojan": ({"param": "mu_out", "values": [0.0, 0.01, 0.04]}, {"Q": 0.02, "p_z": 0.99}),
        "phase_coherent": ({"param": "alpha", "start": 0.1, "stop": 0.6, "count": 6},
                           {"eta": 1.0, "p_z": 0.99}),
    }
    if protocol not in defaults:
        raise ConfigError(f"no default configuration for {protocol!r}")
    scan, fixed = defaults[protocol]
    return RunConfig(protocol, scan, fixed, asdict(Tolerances()))


# custom protocols ----------------------------------------------------------


def _matrix(obj, where: str) -> np.ndarray:
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        m = re + 1j * im
    except (KeyError, TypeError, ValueError) as exc:
        _fail(where, f"expected {{'re': [[...]], 'im': [[...]]}} ({exc})")
    if m.ndim == 2:
        if m.shape[0] != m.shape[1]:
            _fail(where, "matrix must be square")
        if np.max(np.abs(m - m.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(m))):
            _fail(where, "matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
    return m


def _grouped(obj, where: str) -> list:
    if not isinstance(obj, list) or not obj:
        _fail(where, "expected a non-empty list of announcement groups")
    out = []
    for a, group in enumerate(obj):
        if not isinstance(group, list) or not group:
            _fail(f"{where}[{a}]", "expected a non-empty list of POVM elements")
        elems = []
        for k, el in enumerate(group):
            m = _matrix(el, f"{where}[{a}][{k}]")
            if float(np.linalg.eigvalsh(m)[0]) < -1e-10:
                _fail(f"{where}[{a}][{k}]", "POVM element is not positive semidefinite")
            elems.append(m)
        out.append(elems)
    return out


def _channel(obj, params, where="custom.channel"):
    if obj is None:
        return None
    kind = obj.get("type")
    val = lambda name: float(params.get(name, obj.get(name)))
    if kind == "depolarizing":
        return Depolarizing(val("p"))
    if kind == "loss":
        return Loss(val("eta"))
    if kind == "composed":
        return Composed(_channel(obj["first"], params, where + ".first"),
                        _channel(obj["second"], params, where + ".second"))
    _fail(f"{where}.type", f"unknown channel {kind!r}")


def build_custom(c: dict, params: dict):
    """Build ``(ProtocolSpec, ObservationSet)`` from a custom-protocol block."""
    for key in ("dims", "alice_povm", "bob_povm", "kept", "keymap"):
        if key not in c:
            _fail(f"custom.{key}", "missing")
    dims = tuple(int(x) for x in c["dims"])
    alice = _grouped(c["alice_povm"], "custom.alice_povm")
    bob = _grouped(c["bob_povm"], "custom.bob_povm")
    kept = {tuple(p) for p in c["kept"]}
    table = {}
    for row in c["keymap"]:
        if len(row) != 4:
            _fail("custom.keymap", "rows must be [a, alpha, b, key]")
        table[tuple(int(x) for x in row[:3])] = int(row[3])
    keymap = lambda a, alpha, b: table[(a, alpha, b)]
    mode, rho_a, probs, source = "EB", None, None, None
    if "signals" in c:
        sig = c["signals"]
        states = [_matrix(s, f"custom.signals.states[{i}]").reshape(-1)
                  for i, s in enumerate(sig["states"])]
        probs = np.asarray(sig["probs"], dtype=float)
        psi, rho_a, _ = source_replacement(states, probs)
        mode = "PM"
        source = np.outer(psi, psi.conj())
    elif "source" in c:
        source = _matrix(c["source"], "custom.source")
    try:
        spec = ProtocolSpec("custom", alice, bob, kept, keymap, dims, mode, rho_a, probs,
                            params=dict(params), source_state=source)
        if "observed" in c:
            jp = np.asarray(c["observed"]["joint_probs"], dtype=float)
            tomo = []
            if mode == "PM":
                from .protocols.framework import tomography
                tomo = tomography(rho_a)
            obs = ObservationSet(jp, tomo)
        else:
            if source is None:
                _fail("custom.source", "needed to simulate statistics (or give custom.observed)")
            obs = simulate_statistics(spec, _channel(c.get("channel"), params))
        spec.gmap()  # raises on a partial key map
    except ValidationError:
        raise
    except ConfigError as exc:
        raise ValidationError(f"custom: {exc}") from exc
    return spec, obs


# running -----------------------------------------------------------------


def build(protocol: str, params: dict, custom: dict | None = None):
    if protocol == "custom":
        return build_custom(custom, params)
    return BUILDERS[protocol](**params)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    return format(float(x), ".17g")


def run_point(task):
    """Worker: one grid point.  Returns the CSV row as a list of strings."""
    index, protocol, param, value, fixed, tol, cert_dir, custom = task
    params = dict(fixed)
    params[param] = value
    tolerances = Tolerances(**tol)
    try:
        spec, obs = build(protocol, params, custom)
        ctx, cs = prepare_problem(spec, obs, tolerances)
        res = key_rate(spec, obs, tolerances, ctx=ctx, cs=cs)
        b = res.bound
        if cert_dir:
            cert = Certificate.from_bound(protocol, params, b, cs.digest(), tol)
            cert.save(Path(cert_dir) / f"point_{index:03d}.cert")
        return [_fmt(value), _fmt(res.key_rate_lower), _fmt(res.pa_upper), _fmt(res.pa_lower),
                _fmt(res.p_pass), _fmt(res.leak), _fmt(b.eps), _fmt(b.eps_prime), _fmt(b.zeta),
                "true"]
    except QKDBoundError as exc:
        log.error("point %s=%r failed: %s", param, value, exc)
        nan = _fmt(math.nan)
        return [_fmt(value)] + [nan] * 8 + ["false"]


def run_scan(cfg: RunConfig, out: str | None = None, certificates: str | None = None,
             jobs: int | None = None) -> int:
    """Evaluate every grid point and write the CSV.  Returns the exit code."""
    out = out or cfg.output
    cert_dir = certificates or cfg.certificates
    if cert_dir:
        os.makedirs(cert_dir, exist_ok=True)
    tasks = [(i, cfg.protocol, cfg.param, v, cfg.fixed, cfg.tolerances, cert_dir, cfg.custom)
             for i, v in enumerate(cfg.grid)]
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(run_point, tasks))  # map keeps grid order
    else:
        rows = [run_point(t) for t in tasks]
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(rows)
    finally:
        if out:
            fh.close()
    return 0 if all(r[-1] == "true" for r in rows) else 2


def reproduce(fig: str, out: str | None, certificates: str | None, jobs: int | None) -> int:
    """Run the parameter grids behind one of the three example figures, one CSV per curve."""
    protocol, param, curves, grid = FIGURES[fig]
    (curve_param, curve_values), = curves.items()
    code = 0
    base = Path(out or f"{fig}.csv")
    for cv in curve_values:
        cfg = RunConfig(protocol, {"param": param, "values": [float(g) for g in grid]},
                        {curve_param: cv, "p_z": 0.99})
        path = base.with_name(f"{base.stem}_{curve_param}{cv:g}{base.suffix or '.csv'}")
        cdir = str(Path(certificates) / f"{curve_param}{cv:g}") if certificates else None
        code = max(code, run_scan(cfg, str(path), cdir, jobs))
        print(f"wrote {path}")
    return code


def verify_file(path, config: str | None = None) -> int:
    cert = Certificate.load(path)
    custom = parse_config(config).custom if config else None
    if cert.protocol == "custom" and custom is None:
        raise ConfigError("verifying a custom-protocol certificate needs --config")
    spec, obs = build(cert.protocol, cert.params, custom)
    tol = Tolerances(**cert.tolerances) if cert.tolerances else Tolerances()
    ctx, cs = prepare_problem(spec, obs, tol)
    ok, lower, msg = verify_record(cert, ctx, cs)
    print(f"{path}: {msg}; bound={lower!r}")
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qkdbound", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON scan configuration")
    p.add_argument("--out", help="CSV output path (default: config 'output' or stdout)")
    p.add_argument("--certificates", help="directory for per-point certificate files")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all CPUs)")
    p.add_argument("--reproduce", choices=sorted(FIGURES), help="run an example figure's grid")
    p.add_argument("--verify", metavar="CERT", help="re-verify a certificate file and exit")
    p.add_argument("--print-default", metavar="PROTOCOL",
                   help="print a default configuration for PROTOCOL and exit")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("QKDBOUND_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.print_default:
            print(json.dumps(default_config(args.print_default).to_dict(), indent=2))
            return 0
        if args.verify:
            return verify_file(args.verify, args.config)
        if args.reproduce:
            return reproduce(args.reproduce, args.out, args.certificates, args.jobs)
        if not args.config:
            build_parser().error("one of --config, --reproduce, --verify is required")
        cfg = parse_config(args.config)
        return run_scan(cfg, args.out, args.certificates, args.jobs)
    except QKDBoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
