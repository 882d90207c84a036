import math

import numpy as np
import pytest

from qkdbound.certificate import Certificate, verify_record
from qkdbound.errors import CertificateError
from qkdbound.protocols import Tolerances, build_bb84_mismatch
from qkdbound.protocols.framework import key_rate, prepare_problem


@pytest.fixture(scope="module")
def record():
    spec, obs = build_bb84_mismatch(0.9, 0.05)
    ctx, cs = prepare_problem(spec, obs)
    res = key_rate(spec, obs, ctx=ctx, cs=cs)
    cert = Certificate.from_bound("bb84_mismatch", {"eta": 0.9, "p": 0.05}, res.bound, cs.digest(),
                                  {"eps": Tolerances().eps})
    return cert, ctx, cs


def test_round_trip_is_bit_exact(record):
    cert, _, _ = record
    back = Certificate.loads(cert.dumps())
    assert back.lower == cert.lower and back.eps_prime == cert.eps_prime
    np.testing.assert_array_equal(back.rho, cert.rho)
    np.testing.assert_array_equal(back.dual_y, cert.dual_y)
    np.testing.assert_array_equal(back.dual_z, cert.dual_z)
    assert back.params == cert.params and back.tolerances == cert.tolerances
    assert back.dumps() == cert.dumps()


def test_file_round_trip(record, tmp_path):
    cert, _, _ = record
    path = tmp_path / "c.cert"
    cert.save(path)
    assert Certificate.load(path).dumps() == cert.dumps()


def test_record_reverifies(record):
    cert, ctx, cs = record
    ok, lower, msg = verify_record(Certificate.loads(cert.dumps()), ctx, cs)
    assert ok and lower == cert.lower and msg == "verified"


def test_hash_mismatch_is_rejected(record):
    cert, ctx, _ = record
    spec, obs = build_bb84_mismatch(0.9, 0.06)
    _, other = prepare_problem(spec, obs)
    ok, lower, msg = verify_record(cert, ctx, other)
    assert not ok and math.isnan(lower) and "hash" in msg


def test_perturbed_dual_changes_bound(record):
    cert, ctx, cs = record
    bad = Certificate.loads(cert.dumps())
    bad.dual_y = bad.dual_y + 1e-3
    ok, _, _ = verify_record(bad, ctx, cs)
    assert not ok


@pytest.mark.parametrize("text", [
    "",
    "format=something-else\n",
    "format=qkdbound-certificate-1\nnot a pair\n",
    "format=qkdbound-certificate-1\nprotocol=x\n",
])
def test_malformed_text_raises(text):
    with pytest.raises(CertificateError):
        Certificate.loads(text)
