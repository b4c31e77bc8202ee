import json
import random

import pytest

from tabverify import he
from tabverify.channel import LoopbackChannel, canonical_json, make_frame
from tabverify.demo import (
    CHAIN_DOMAINS,
    DEMO_DOMAINS,
    DEMO_GRAPH_TEXT,
    DEMO_INPUT,
    DIAMOND_DOMAINS,
    chain_graph,
    diamond_graph,
)
from tabverify.graphtext import parse_graph
from tabverify.protocol import (
    Developer,
    PublicParams,
    Verifier,
    bits_str,
    cts_b64,
    b64_cts,
    pad_data_cts,
    spec_port_outputs,
    str_bits,
    top_tag_bits,
    value_to_word,
    verify_session,
    vs_encrypt,
)
from tabverify.tables import evaluate_plain, transform
from tabverify.vga import input_key

DEMO = parse_graph(DEMO_GRAPH_TEXT)
DEMO_CP = [(DEMO_INPUT, {"w": False, "c": 2})]


def make_dev(graph=DEMO, seed=0, **kw):
    return Developer(graph, rng=random.Random(seed), **kw)


def run_pair(graph, domains, cp, dev_seed=0, v_seed=1, mode="honest", strategy=None):
    dev = make_dev(graph, seed=dev_seed, strategy=strategy)
    v = Verifier(
        dev.pp.to_dict(),
        graph,
        domains,
        cp,
        seed=7,
        mode=mode,
        rng=random.Random(v_seed),
    )
    verdict, cert = verify_session(dev, v)
    return dev, verdict, cert


def test_public_params_round_trip():
    dev = make_dev()
    d = dev.pp.to_dict()
    json.loads(canonical_json(d))  # fully JSON-serializable
    pp2 = PublicParams.from_dict(d)
    assert pp2.to_dict() == d
    assert pp2.programs == dev.pp.programs


def test_structure_hides_design_details():
    dev = make_dev()
    blob = canonical_json(dev.pp.structure)
    # no table names, predicates, or function text leak; only the public
    # boundary names appear
    for secret in ("DL", "CT", "OP", ">", "45", "pred"):
        assert secret not in blob
    assert '"a"' in blob and '"w"' in blob


def test_structure_shape():
    dev = make_dev()
    s = dev.pp.structure
    tg = transform(DEMO)
    assert len(s["tables"]) == len(tg.order)
    assert {t["index"] for t in s["tables"]} == set(range(1, len(tg.order) + 1))
    assert sorted(n for n, _ in tg.external_inputs) == sorted(
        n for n, _ in s["external_inputs"]
    )
    assert {g["name"] for g in s["outputs"]} == {"w", "c"}


def test_honest_session_accepts_demo():
    _, verdict, cert = run_pair(DEMO, DEMO_DOMAINS, DEMO_CP)
    assert verdict == "accept"
    assert cert["failures"] == []
    assert cert["mismatches"] == []
    assert all(r["ok"] for r in cert["cp_results"])


def test_session_outputs_match_plaintext_spec():
    _, verdict, cert = run_pair(DEMO, DEMO_DOMAINS, DEMO_CP)
    tg = transform(DEMO)
    assert verdict == "accept"
    for key, got in cert["outputs"].items():
        X = json.loads(key)
        want = spec_port_outputs(tg, X)
        assert set(got) == {"w", "c"}
        for port in got:
            assert got[port] == want[port]


def test_honest_session_chain_and_diamond():
    for graph, domains in ((chain_graph(), CHAIN_DOMAINS), (diamond_graph(), DIAMOND_DOMAINS)):
        _, verdict, cert = run_pair(graph, domains, [])
        assert verdict == "accept", cert["mismatches"]


def test_general_mode_accepts_and_records_checkers():
    _, verdict, cert = run_pair(DEMO, DEMO_DOMAINS, DEMO_CP, mode="general")
    assert verdict == "accept"
    answered = [r for r in cert["qa_e"] if r["a"].get("kind") != "null"]
    assert len(cert["qa_c"]) == len(answered)
    assert all(r["a"]["d"] is not None for r in cert["qa_c"])
    assert len(str_bits(cert["sk"])) == 16


@pytest.mark.parametrize("strategy", ["flip-payload", "flip-tag", "swap-answers"])
def test_malicious_strategies_rejected_in_general_mode(strategy):
    _, verdict, cert = run_pair(
        DEMO, DEMO_DOMAINS, [], mode="general", strategy=strategy
    )
    assert verdict == "reject"
    assert any(f["reason"] == "checker" for f in cert["failures"])


def test_flip_payload_caught_by_output_mismatch_even_honest_mode():
    _, verdict, cert = run_pair(DEMO, DEMO_DOMAINS, [], strategy="flip-payload")
    assert verdict == "reject"
    assert cert["mismatches"]


def test_wrong_design_rejected():
    # developer runs a design that disagrees with the public spec
    wrong = DEMO_GRAPH_TEXT.replace("(b == true, 2)", "(b == true, 9)")
    dev = make_dev(parse_graph(wrong))
    v = Verifier(dev.pp.to_dict(), DEMO, DEMO_DOMAINS, DEMO_CP, seed=7,
                 rng=random.Random(1))
    verdict, cert = verify_session(dev, v)
    assert verdict == "reject"
    assert cert["mismatches"]


# --- direct frame-level behavior -------------------------------------------------


def frame(dev, ftype, body, session="t"):
    return dev.handle(make_frame(ftype, session, body))["body"]


def test_q1_rejects_malformed_queries():
    dev = make_dev()
    frame(dev, "hello", {})
    m = dev.pp.m
    good = bits_str(top_tag_bits(m // 2) + (0,) * (m // 2))
    assert frame(dev, "encode", {"qkind": 1, "i": 999, "port": 0, "u": good})[
        "answer"
    ]["kind"] == "null"
    assert frame(dev, "encode", {"qkind": 1, "i": 1, "port": 99, "u": good})[
        "answer"
    ]["kind"] == "null"
    assert frame(dev, "encode", {"qkind": 1, "i": 1, "port": 0, "u": "01"})[
        "answer"
    ]["kind"] == "null"
    bad_tag = "0" * m
    assert frame(dev, "encode", {"qkind": 1, "i": 1, "port": 0, "u": bad_tag})[
        "answer"
    ]["kind"] == "null"
    assert frame(dev, "encode", {"qkind": 1, "i": 1, "port": 0, "u": good})[
        "answer"
    ]["kind"] == "w"


def q1_then_q2(dev, i, X_bits_by_port, corrupt=None):
    """Drive one table manually: q1 every port, compute v, ask q2."""
    m = dev.pp.m
    words = []
    for pos, u in enumerate(X_bits_by_port):
        a = frame(dev, "encode", {"qkind": 1, "i": i, "port": pos, "u": bits_str(u)})
        assert a["answer"]["kind"] == "w"
        words.append(b64_cts(a["answer"]["w"]))
    u_cts = [ct for w in words for ct in w]
    v = he.eval_word(
        dev.hpk, dev.u.circuit, dev.pp.programs[i] + pad_data_cts(u_cts, dev.u.n_data)
    )
    if corrupt == "v":
        v = [v[0][:-1] + bytes([v[0][-1] ^ 1])] + v[1:]
    if corrupt == "u":
        u_cts = list(reversed(u_cts))
    return frame(
        dev, "encode", {"qkind": 2, "i": i, "u": cts_b64(u_cts), "v": cts_b64(v)}
    )["answer"]


def first_input_table(dev):
    for t in sorted(dev.pp.structure["tables"], key=lambda t: t["index"]):
        if all(p["producers"][0][0] == "input" for p in t["ports"]):
            return t
    raise AssertionError("no source table")


def test_q2_honest_and_tampered():
    dev = make_dev()
    frame(dev, "hello", {})
    t = first_input_table(dev)
    m = dev.pp.m
    names = [p["producers"][0][1] for p in t["ports"]]
    types = dict(dev.pp.structure["external_inputs"])
    bits = [value_to_word(DEMO_INPUT[n], types[n], m) for n in names]
    a = q1_then_q2(dev, t["index"], bits)
    assert a["kind"] in ("top", "bot", "payload")
    # recomputation mismatch
    frame(dev, "hello", {})
    assert q1_then_q2(dev, t["index"], bits, corrupt="v")["kind"] == "null"
    # inputs not previously recorded for those ports
    frame(dev, "hello", {})
    if len(bits) > 1:
        assert q1_then_q2(dev, t["index"], bits, corrupt="u")["kind"] == "null"
    # q2 without any prior q1
    frame(dev, "hello", {})
    fake = he.enc_word(dev.hpk, bits[0], random.Random(9))
    v = he.eval_word(
        dev.hpk,
        dev.u.circuit,
        dev.pp.programs[t["index"]]
        + pad_data_cts(fake * len(bits), dev.u.n_data),
    )
    a = frame(
        dev,
        "encode",
        {
            "qkind": 2,
            "i": t["index"],
            "u": cts_b64(fake * len(bits)),
            "v": cts_b64(v),
        },
    )["answer"]
    assert a["kind"] == "null"


def test_memory_wiped_between_sessions():
    dev = make_dev()
    t = first_input_table(dev)
    m = dev.pp.m
    names = [p["producers"][0][1] for p in t["ports"]]
    types = dict(dev.pp.structure["external_inputs"])
    bits = [value_to_word(DEMO_INPUT[n], types[n], m) for n in names]
    frame(dev, "hello", {}, session="s1")
    words = []
    for pos, u in enumerate(bits):
        a = frame(
            dev,
            "encode",
            {"qkind": 1, "i": t["index"], "port": pos, "u": bits_str(u)},
            session="s1",
        )
        words.append(b64_cts(a["answer"]["w"]))
    u_cts = [ct for w in words for ct in w]
    v = he.eval_word(
        dev.hpk,
        dev.u.circuit,
        dev.pp.programs[t["index"]] + pad_data_cts(u_cts, dev.u.n_data),
    )
    body = {"qkind": 2, "i": t["index"], "u": cts_b64(u_cts), "v": cts_b64(v)}
    frame(dev, "hello", {}, session="s2")  # fresh session, empty memory
    assert frame(dev, "encode", body, session="s2")["answer"]["kind"] == "null"
    assert frame(dev, "encode", body, session="s1")["answer"]["kind"] != "null"


def test_path_query():
    dev = make_dev(chain_graph())
    idx = dev.index_of
    chain = [idx["A#1"], idx["B#1"], idx["C#1"]]
    r = frame(dev, "path", {"tables": chain})
    X = r["x"]
    if X is not None:
        _, trace = evaluate_plain(dev.tg, X)
        for i in chain:
            v = next(iter(trace[dev.name_of[i]]["outputs"].values()))
            assert v is not None and v.tag
    # non-adjacent pair is never a path
    non_edge = [idx["A#1"], idx["C#1"]]
    tg = dev.tg
    linked = any(
        src == "A#1"
        for port, _ in tg.tables["C#1"].inputs
        for src, _s in tg.producers[("C#1", port)]
    )
    if not linked:
        assert frame(dev, "path", {"tables": non_edge})["x"] is None
    assert frame(dev, "path", {"tables": [999]})["x"] is None
    assert frame(dev, "path", {"tables": []})["x"] is None


def test_checker_requires_commit_before_proof():
    dev = make_dev()
    v = Verifier(dev.pp.to_dict(), DEMO, DEMO_DOMAINS, [], seed=3, mode="general",
                 rng=random.Random(4))
    frame(dev, "hello", {})
    t = first_input_table(dev)
    m = dev.pp.m
    names = [p["producers"][0][1] for p in t["ports"]]
    types = dict(dev.pp.structure["external_inputs"])
    u = value_to_word(DEMO_INPUT[names[0]], types[names[0]], m)
    a = frame(dev, "encode", {"qkind": 1, "i": t["index"], "port": 0, "u": bits_str(u)})
    p = b64_cts(a["answer"]["w"])
    from tabverify.protocol import se_circuit_for

    y = he.eval_word(dev.hpk, se_circuit_for(16, m), list(v.ct_sk) + p)
    r = frame(
        dev,
        "checker",
        {"i": t["index"], "case": "input", "port": 0, "p": cts_b64(p), "y": cts_b64(y)},
    )
    assert "blocks" in r
    # proof before the commitment exchange must fail
    assert frame(dev, "checker_proof", {"ct_sk": cts_b64(v.ct_sk)})["result"] == "null"


def test_checker_rejects_unknown_slice():
    dev = make_dev()
    frame(dev, "hello", {})
    m = dev.pp.m
    p = he.enc_word(dev.hpk, (0,) * m, random.Random(5))
    r = frame(
        dev,
        "checker",
        {"i": 1, "case": "input", "port": 0, "p": cts_b64(p), "y": cts_b64(p)},
    )
    assert r["result"] == "null"


def test_certificate_public_half_has_no_secret_fields():
    dev, _, cert = run_pair(DEMO, DEMO_DOMAINS, [], mode="general")
    pp_dict = cert["public_params"]
    assert set(pp_dict) == {
        "m", "K", "backend", "hpk", "u_params", "structure", "programs",
        "se_key_bits", "code_params",
    }
    pp = PublicParams.from_dict(pp_dict)
    assert pp.hpk.kind == dev.hsk.kind == "transparent"
    # top-level certificate carries no decryption key material
    assert "hsk" not in cert and "p" not in pp_dict["hpk"]


def test_vs_encrypt_returns_consistent_pair():
    dev, pp = vs_encrypt(16, DEMO, rng=random.Random(11))
    assert pp is dev.pp
    assert pp.u_params[2] == DEMO.m
    assert set(pp.programs) == set(range(1, len(dev.tg.order) + 1))
    for cts in pp.programs.values():
        assert len(cts) == dev.u.program_length


def test_loopback_equals_queue_pair():
    import threading

    from tabverify.channel import QueuePairChannel
    from tabverify.protocol import serve

    dev1 = make_dev(seed=3)
    v1 = Verifier(dev1.pp.to_dict(), DEMO, DEMO_DOMAINS, DEMO_CP, seed=2,
                  rng=random.Random(8))
    verdict1, cert1 = verify_session(dev1, v1)

    dev2 = make_dev(seed=3)
    v2 = Verifier(dev2.pp.to_dict(), DEMO, DEMO_DOMAINS, DEMO_CP, seed=2,
                  rng=random.Random(8))
    a, b = QueuePairChannel.pair(timeout=30)
    t = threading.Thread(target=serve, args=(dev2, b))
    t.start()
    verdict2, cert2 = v2.run(a)
    t.join()
    assert (verdict1, cert1["outputs"]) == (verdict2, cert2["outputs"])
