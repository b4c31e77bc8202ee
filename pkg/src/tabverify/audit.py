"""Public replay of a session certificate.

A certificate contains everything a third party needs to re-run the
verifier against the recorded developer answers: public parameters, the
public spec, the generation seed, and the full query/answer transcript.
The auditor rebuilds the verifier, feeds it the recorded answers through a
replay channel that insists every outgoing query is byte-identical to the
recorded one, and finally requires the rebuilt certificate to serialize to
exactly the stored bytes. In general mode the checker records are replayed
too: commitments are re-verified and every revealed value is re-decrypted
under the disclosed session key.
"""

import copy
import hashlib
import json
import random

from .channel import canonical_json, decode_frame, encode_frame, make_frame
from .graphtext import parse_graph
from .protocol import PublicParams, SessionFailure, Verifier, b64_cts, str_bits
from .vga import coverage_report

CERT_FORMAT = "tabverify-cert-v1"


class AuditError(Exception):
    pass


def certificate_hash(cert):
    return hashlib.sha256(canonical_json(cert).encode("utf-8")).hexdigest()


def normalize(cert):
    """JSON round trip so in-memory and on-disk certificates compare equal."""
    return json.loads(canonical_json(cert))


def save_certificate(cert, path):
    cert = normalize(cert)
    doc = {
        "format": CERT_FORMAT,
        "content_hash": certificate_hash(cert),
        "certificate": cert,
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(doc))
    return doc["content_hash"]


def load_certificate(path):
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != CERT_FORMAT:
        raise AuditError(f"unknown certificate format {doc.get('format')!r}")
    cert = doc.get("certificate")
    if certificate_hash(cert) != doc.get("content_hash"):
        raise AuditError("certificate content hash mismatch")
    return cert


class ReplayChannel:
    """Serves recorded answers; any divergence from the transcript fails."""

    def __init__(self, qa_e):
        self.records = list(qa_e)
        self.pos = 0
        self._reply = None

    def send(self, frame):
        frame = decode_frame(encode_frame(frame))
        ftype = frame["type"]
        if ftype in ("hello", "end"):
            self._reply = make_frame("reply", frame["session"], {"ok": True})
            return
        if ftype != "encode":
            raise AuditError(f"unexpected frame type {ftype!r} during replay")
        if self.pos >= len(self.records):
            raise AuditError("replay ran past the recorded transcript")
        rec = self.records[self.pos]
        self.pos += 1
        if frame["body"] != rec["q"]:
            raise AuditError(f"query {self.pos} diverges from the transcript")
        self._reply = make_frame("reply", frame["session"], {"answer": rec["a"]})

    def recv(self):
        if self._reply is None:
            raise AuditError("no pending reply")
        reply, self._reply = self._reply, None
        return reply

    @property
    def exhausted(self):
        return self.pos == len(self.records)

    def close(self):
        pass


def _rebuild_verifier(cert):
    pp = PublicParams.from_dict(cert["public_params"])
    g_spec = parse_graph(cert["g_spec"])
    kwargs = {}
    if cert["mode"] == "general":
        kwargs["sk"] = str_bits(cert["sk"])
        kwargs["ct_sk"] = b64_cts(cert["ct_sk"])
    v = Verifier(
        pp,
        g_spec,
        cert["domains"],
        [tuple(x) for x in cert["cp"]],
        seed=cert["vga"]["seed"],
        mode=cert["mode"],
        vga_budget=cert["vga"]["budget"],
        rng=random.Random(0),  # never consulted during replay
        **kwargs,
    )
    return v


def replay(cert):
    """Re-run the hardwired verifier against the transcript.

    Returns (ok, report). ok is True only when every recomputed query
    matches the record, the transcript is fully consumed, and the rebuilt
    certificate is byte-identical to the stored one.
    """
    cert = normalize(cert)
    report = {"mode": cert.get("mode"), "verdict": cert.get("verdict")}
    try:
        v = _rebuild_verifier(cert)
        if cert["mode"] == "general":
            v.replay_qac = copy.deepcopy(cert["qa_c"])
        chan = ReplayChannel(cert["qa_e"])
        verdict, rebuilt = v.run(chan)
    except (AuditError, SessionFailure) as exc:
        report["reason"] = str(exc)
        return False, report
    except Exception as exc:  # malformed field: still a clean audit failure
        report["reason"] = f"{type(exc).__name__}: {exc}"
        return False, report
    if not chan.exhausted:
        report["reason"] = "transcript has unconsumed records"
        return False, report
    if cert["mode"] == "general" and v.replay_qac:
        report["reason"] = "checker records left unconsumed"
        return False, report
    if "annotations" in cert:
        # commentary attached after the session; not replayable, but still
        # covered by the certificate file's content hash
        rebuilt = dict(rebuilt, annotations=cert["annotations"])
    if canonical_json(normalize(rebuilt)) != canonical_json(cert):
        report["reason"] = "rebuilt certificate differs from the stored one"
        return False, report
    report["replayed_verdict"] = verdict
    report["coverage"] = coverage_report(
        cert["qa_e"], cert["public_params"]["structure"]
    ).summary()
    return True, report


def vs_eval_honest(cert):
    """Audit outcome for an honest-mode certificate: 1 accept, 0 otherwise."""
    ok, report = replay(cert)
    return (1 if ok and report.get("replayed_verdict") == "accept" else 0), report


def vs_eval_general(cert):
    """Audit outcome for a general-mode certificate.

    The replay path re-verifies every commitment opening and re-decrypts
    every revealed checker value under the disclosed session key.
    """
    if cert.get("mode") != "general":
        return 0, {"reason": "certificate is not general mode"}
    ok, report = replay(cert)
    return (1 if ok and report.get("replayed_verdict") == "accept" else 0), report


def audit(cert):
    if cert.get("mode") == "general":
        return vs_eval_general(cert)
    return vs_eval_honest(cert)


# --- robustness helper for tests ------------------------------------------------


def _leaf_paths(node, prefix=()):
    if isinstance(node, dict):
        for k, sub in node.items():
            yield from _leaf_paths(sub, prefix + (k,))
    elif isinstance(node, list):
        for i, sub in enumerate(node):
            yield from _leaf_paths(sub, prefix + (i,))
    else:
        yield prefix, node


def mutate_certificate(cert, rng):
    """Perturb one randomly chosen scalar field; returns a fresh copy."""
    doc = normalize(cert)
    leaves = [p for p in _leaf_paths(doc)]
    path, value = leaves[rng.randrange(len(leaves))]
    node = doc
    for step in path[:-1]:
        node = node[step]
    key = path[-1]
    if isinstance(value, bool):
        node[key] = not value
    elif isinstance(value, int):
        node[key] = value + rng.choice([1, -1, 7])
    elif isinstance(value, str) and value:
        i = rng.randrange(len(value))
        alphabet = "0123456789abcdefABCDEF+/xyz"
        repl = rng.choice([c for c in alphabet if c != value[i]])
        node[key] = value[:i] + repl + value[i + 1 :]
    elif value is None:
        node[key] = 0
    else:
        node[key] = "mutated"
    assert canonical_json(doc) != canonical_json(normalize(cert))
    return doc
