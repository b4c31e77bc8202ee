"""Developer and verifier state machines.

The developer encrypts the transformed design: every row table's circuit is
encoded as a program string for a shared universal circuit and the program
bits are encrypted. The verifier drives evaluation: it asks the developer to
encode external inputs (q1), homomorphically runs the universal circuit on
each table, and asks the developer to validate and decode every output (q2).
In general mode each encode answer is additionally pinned down by a checker
round: the verifier homomorphically computes the symmetric encryption of the
answer slice under its own secret key, the developer commits to the
decryption before seeing the key ciphertext's opening, and the revealed
value must decrypt to exactly the answer the developer gave earlier.

Everything exchanged is recorded; the audit module replays it.
"""

import base64
import hashlib
import random
from dataclasses import dataclass, field

from . import he
from .channel import canonical_json, make_frame
from .circuit import build_universal, compile_table, encode_program
from .commitment import (
    choose_challenge,
    commit_respond,
    gen_code,
    join_blocks,
    split_blocks,
    verify_reveal,
    CommitMessage,
    RevealMessage,
)
from .graphtext import serialize_graph
from .symcrypto import se_dec, se_enc_circuit, se_keygen
from .tables import (
    INPUT,
    Tagged,
    bits_to_int,
    evaluate_plain,
    tagged_to_bits,
    transform,
)
from .vga import generate_suite, input_key

SE_KEY_BITS = 16
CODE_BLOCK_BITS = 4

TOP = "top"
BOT = "bot"
NULL = "null"


class ProtocolError(Exception):
    pass


# --- encoding helpers ---------------------------------------------------------


def bits_str(bits):
    return "".join("1" if b else "0" for b in bits)


def str_bits(s):
    if not isinstance(s, str) or set(s) - {"0", "1"}:
        raise ProtocolError(f"bad bit string {s!r}")
    return tuple(int(ch) for ch in s)


def cts_b64(cts):
    return [base64.b64encode(ct).decode("ascii") for ct in cts]


def b64_cts(items):
    try:
        out = [base64.b64decode(x, validate=True) for x in items]
    except Exception as exc:
        raise ProtocolError(f"bad ciphertext encoding: {exc}") from exc
    # b64decode drops the unused trailing bits of the last symbol, so two
    # distinct strings can decode to the same bytes; insist on the canonical
    # spelling so transcripts have a single byte representation
    if cts_b64(out) != list(items):
        raise ProtocolError("non-canonical ciphertext encoding")
    return out


def value_to_word(value, ptype, m):
    if ptype == "bool":
        return tagged_to_bits(Tagged(True, bool(value)), m)
    return tagged_to_bits(Tagged(True, int(value)), m)


def payload_to_value(bits, ptype):
    if ptype == "bool":
        return bool(bits[0])
    return bits_to_int(bits)


def pad_data_cts(cts, n_data):
    """Stretch a table's input ciphertexts to the bus width by cycling them."""
    return [cts[i % len(cts)] for i in range(n_data)]


def top_tag_bits(h):
    return (1,) + (0,) * (h - 1)


_U_CACHE = {}


def universal_for(params):
    key = tuple(params)
    if key not in _U_CACHE:
        _U_CACHE[key] = build_universal(*key)
    return _U_CACHE[key]


_SE_CIRCUITS = {}


def se_circuit_for(key_bits, width):
    key = (key_bits, width)
    if key not in _SE_CIRCUITS:
        _SE_CIRCUITS[key] = se_enc_circuit(key_bits, width)
    return _SE_CIRCUITS[key]


# --- public parameters ----------------------------------------------------------


@dataclass
class PublicParams:
    m: int
    K: int
    backend: str
    hpk: object
    u_params: tuple  # (n_data, g, m)
    structure: dict
    programs: dict  # table index -> list of ciphertext bytes
    se_key_bits: int = SE_KEY_BITS
    code_params: dict = field(
        default_factory=lambda: {"m_c": CODE_BLOCK_BITS, "eps": [1, 4], "K": 16, "seed": 0}
    )

    def to_dict(self):
        return {
            "m": self.m,
            "K": self.K,
            "backend": self.backend,
            "hpk": he.hpk_to_dict(self.hpk),
            "u_params": list(self.u_params),
            "structure": self.structure,
            "programs": {str(i): cts_b64(p) for i, p in self.programs.items()},
            "se_key_bits": self.se_key_bits,
            "code_params": self.code_params,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            m=d["m"],
            K=d["K"],
            backend=d["backend"],
            hpk=he.hpk_from_dict(d["hpk"]),
            u_params=tuple(d["u_params"]),
            structure=d["structure"],
            programs={int(i): b64_cts(p) for i, p in d["programs"].items()},
            se_key_bits=d["se_key_bits"],
            code_params=d["code_params"],
        )


def public_structure(tg, index_of):
    """Anonymized interconnection data: indices, port wiring, boundary names.

    Table and port identities are reduced to level-order indices and
    positions; only the boundary interface (external input names and output
    port names, which the public specification fixes anyway) keeps names.
    """
    tables = []
    for name in tg.order:
        t = tg.tables[name]
        ports = []
        for port, _ in t.inputs:
            producers = []
            for src, _sport in tg.producers[(name, port)]:
                if src == INPUT:
                    producers.append(["input", _sport])
                else:
                    producers.append(["table", index_of[src]])
            ports.append({"producers": producers})
        tables.append(
            {
                "index": index_of[name],
                "ports": ports,
                "external": name in {n for n, _ in tg.external_outputs},
            }
        )
    groups = {}
    for tname, port in tg.external_outputs:
        ptype = dict(tg.tables[tname].outputs)[port]
        groups.setdefault(port, {"name": port, "type": ptype, "tables": []})
        groups[port]["tables"].append(index_of[tname])
    return {
        "m": tg.m,
        "tables": tables,
        "external_inputs": [[n, t] for n, t in tg.external_inputs],
        "outputs": [groups[p] for p in sorted(groups)],
    }


# --- developer -------------------------------------------------------------------


@dataclass
class _SessionMem:
    q1: dict = field(default_factory=dict)  # (i, port) -> (u_bits, w_cts)
    q2: dict = field(default_factory=dict)  # i -> (u_cts, v_cts, honest answer)
    pending: dict = field(default_factory=dict)  # checker subprotocol state
    swap_held: object = None  # previous answer, for the swap strategy


class Developer:
    """Holds the secret design; answers encode/path/checker queries.

    strategy selects a scripted dishonest behavior for tests:
    flip-payload, flip-tag, or swap-answers. None means honest.
    """

    def __init__(
        self,
        graph,
        K=16,
        backend="transparent",
        rng=None,
        strategy=None,
        he_config=None,
        u_budget=None,
    ):
        self.rng = rng or random.Random()
        self.strategy = strategy
        self.graph = graph
        self.tg = transform(graph)
        self.K = K
        self.index_of = {name: i + 1 for i, name in enumerate(self.tg.order)}
        self.name_of = {i: n for n, i in self.index_of.items()}
        m = graph.m

        circuits = {}
        for name in self.tg.order:
            circuits[self.index_of[name]] = compile_table(self.tg.tables[name], m)
        n_data = max(c.n_inputs for c in circuits.values())
        g = max(len(c.gates) for c in circuits.values())
        if u_budget is not None:  # floor, so unrelated designs can share sizes
            n_data = max(n_data, u_budget[0])
            g = max(g, u_budget[1])
        self.u = universal_for((n_data, g, m))

        keys = he.keygen(K, backend, config=he_config, rng=self.rng)
        self.hpk, self.hsk = keys.hpk, keys.hsk
        self.circuits = circuits
        self.programs_plain = {
            i: encode_program(c, self.u) for i, c in circuits.items()
        }
        programs_enc = {
            i: he.enc_word(self.hpk, p, self.rng)
            for i, p in self.programs_plain.items()
        }
        self.pp = PublicParams(
            m=m,
            K=K,
            backend=backend,
            hpk=self.hpk,
            u_params=(n_data, g, m),
            structure=public_structure(self.tg, self.index_of),
            programs=programs_enc,
        )
        self.code = gen_code(**_code_kwargs(self.pp.code_params))
        self.sessions = {}

    # -- frame dispatch

    def handle(self, frame):
        session = frame.get("session", "default")
        mem = self.sessions.get(session)
        if mem is None or frame.get("type") == "hello":
            mem = _SessionMem()  # memory is wiped at session start
            self.sessions[session] = mem
        ftype = frame.get("type")
        body = frame.get("body", {})
        try:
            if ftype == "hello":
                reply = {"ok": True}
            elif ftype == "encode":
                reply = self._encode(mem, body)
            elif ftype == "path":
                reply = self._path(body)
            elif ftype == "checker":
                reply = self._checker(mem, body)
            elif ftype == "commit_challenge":
                reply = self._commit(mem, body)
            elif ftype == "checker_proof":
                reply = self._proof(mem, body)
            elif ftype == "end":
                self.sessions.pop(session, None)
                reply = {"ok": True}
            else:
                reply = {"error": f"unknown frame type {ftype!r}"}
        except ProtocolError as exc:
            reply = {"error": str(exc)}
        return make_frame("reply", session, reply)

    # -- q1 / q2

    def _encode(self, mem, body):
        if body.get("qkind") == 1:
            return self._encode_q1(mem, body)
        if body.get("qkind") == 2:
            return self._encode_q2(mem, body)
        return {"answer": {"kind": NULL}}

    def _encode_q1(self, mem, body):
        m = self.pp.m
        i, port = body.get("i"), body.get("port")
        name = self.name_of.get(i)
        if name is None or not isinstance(port, int):
            return {"answer": {"kind": NULL}}
        t = self.tg.tables[name]
        if not 0 <= port < len(t.inputs):
            return {"answer": {"kind": NULL}}
        producers = self.tg.producers[(name, t.inputs[port][0])]
        if producers[0][0] != INPUT:
            return {"answer": {"kind": NULL}}
        try:
            u = str_bits(body.get("u", ""))
        except ProtocolError:
            return {"answer": {"kind": NULL}}
        h = m // 2
        if len(u) != m or u[:h] != top_tag_bits(h):
            return {"answer": {"kind": NULL}}
        encoded = u
        if self.strategy == "flip-payload":
            encoded = u[:h] + (u[h] ^ 1,) + u[h + 1 :]
        w = he.enc_word(self.hpk, encoded, self.rng)
        mem.q1[(i, port)] = (u, w)
        return {"answer": {"kind": "w", "w": cts_b64(w)}}

    def _encode_q2(self, mem, body):
        m = self.pp.m
        h = m // 2
        i = body.get("i")
        name = self.name_of.get(i)
        if name is None:
            return {"answer": {"kind": NULL}}
        t = self.tg.tables[name]
        try:
            u_cts = b64_cts(body.get("u", []))
            v_cts = b64_cts(body.get("v", []))
        except ProtocolError:
            return {"answer": {"kind": NULL}}
        if len(u_cts) != len(t.inputs) * m or len(v_cts) != m:
            return {"answer": {"kind": NULL}}

        for j, (port, _) in enumerate(t.inputs):
            segment = u_cts[j * m : (j + 1) * m]
            producers = self.tg.producers[(name, port)]
            if producers[0][0] == INPUT:
                known = mem.q1.get((i, j))
                if known is None or known[1] != segment:
                    return {"answer": {"kind": NULL}}
                continue
            matched = False
            for src, _sport in producers:
                prior = mem.q2.get(self.index_of[src])
                if prior is None:
                    continue
                p_u, p_v, p_ans = prior
                if p_v == segment:
                    if p_ans == BOT:  # producing output decrypts to bot
                        return {"answer": {"kind": NULL}}
                    matched = True
                    break
            if not matched:
                return {"answer": {"kind": NULL}}

        recomputed = he.eval_word(
            self.hpk,
            self.u.circuit,
            self.pp.programs[i] + pad_data_cts(u_cts, self.u.n_data),
        )
        if recomputed != v_cts:
            return {"answer": {"kind": NULL}}

        tag = he.dec_word(self.hsk, v_cts[:h])
        is_top = any(tag)
        external = name in {n for n, _ in self.tg.external_outputs}
        if not is_top:
            honest = {"kind": BOT}
            kind_for_mem = BOT
        elif external:
            payload = he.dec_word(self.hsk, v_cts[h:])
            honest = {"kind": "payload", "payload": bits_str(payload)}
            kind_for_mem = "payload"
        else:
            honest = {"kind": TOP}
            kind_for_mem = TOP
        mem.q2[i] = (u_cts, v_cts, kind_for_mem)
        return {"answer": self._apply_strategy(mem, honest)}

    def _apply_strategy(self, mem, honest):
        if self.strategy == "flip-payload" and honest["kind"] == "payload":
            bits = str_bits(honest["payload"])
            return {"kind": "payload", "payload": bits_str((bits[0] ^ 1,) + bits[1:])}
        if self.strategy == "flip-tag" and honest["kind"] in (TOP, BOT):
            return {"kind": BOT if honest["kind"] == TOP else TOP}
        if self.strategy == "swap-answers":
            held, mem.swap_held = mem.swap_held, honest
            return held if held is not None else honest
        return honest

    # -- path search

    def _path(self, body):
        tables = body.get("tables", [])
        if not tables or not all(isinstance(i, int) for i in tables):
            return {"x": None}
        names = []
        for i in tables:
            name = self.name_of.get(i)
            if name is None:
                return {"x": None}
            names.append(name)
        for a, b in zip(names, names[1:]):
            linked = any(
                src == a
                for port, _ in self.tg.tables[b].inputs
                for src, _s in self.tg.producers[(b, port)]
            )
            if not linked:
                return {"x": None}
        X = find_covering_input(self.tg, names)
        return {"x": X}

    # -- checker subprotocol

    def _checker(self, mem, body):
        m = self.pp.m
        h = m // 2
        i, case, port = body.get("i"), body.get("case"), body.get("port")
        try:
            p = b64_cts(body.get("p", []))
            y = b64_cts(body.get("y", []))
        except ProtocolError:
            return {"result": NULL}
        want = m if case == "input" else h
        if len(p) != want or len(y) != want:
            return {"result": NULL}
        if case == "input":
            known = mem.q1.get((i, port))
            if known is None or known[1] != p:
                return {"result": NULL}
        elif case in ("intermediate", "external"):
            prior = mem.q2.get(i)
            if prior is None:
                return {"result": NULL}
            slice_cts = prior[1][:h] if case == "intermediate" else prior[1][h:]
            if slice_cts != p:
                return {"result": NULL}
        else:
            return {"result": NULL}
        d_bits = he.dec_word(self.hsk, y)
        mem.pending = {
            "d": d_bits,
            "p": p,
            "y": y,
            "blocks": split_blocks(d_bits, self.code.m_c),
            "seeds": None,
        }
        return {"blocks": len(mem.pending["blocks"])}

    def _commit(self, mem, body):
        pending = mem.pending
        if not pending or pending.get("seeds") is not None:
            return {"result": NULL}
        try:
            rs = [str_bits(r) for r in body.get("Rs", [])]
        except ProtocolError:
            return {"result": NULL}
        if len(rs) != len(pending["blocks"]):
            return {"result": NULL}
        seeds, out = [], []
        for blk, R in zip(pending["blocks"], rs):
            s = se_keygen(self.pp.se_key_bits, self.rng)
            try:
                cm = commit_respond(blk, R, s, self.code)
            except Exception:
                return {"result": NULL}
            seeds.append(s)
            out.append(
                {"e": bits_str(cm.e), "exposed": [[i, b] for i, b in cm.exposed]}
            )
        pending["seeds"] = seeds
        pending["Rs"] = rs
        return {"blocks": out}

    def _proof(self, mem, body):
        pending = mem.pending
        if not pending or pending.get("seeds") is None:
            return {"result": NULL}
        mem.pending = {}
        try:
            ct_sk = b64_cts(body.get("ct_sk", []))
        except ProtocolError:
            return {"result": NULL}
        if len(ct_sk) != self.pp.se_key_bits:
            return {"result": NULL}
        try:
            sk_candidate = he.dec_word(self.hsk, ct_sk)
        except he.HeError:
            return {"result": NULL}
        if len(sk_candidate) != self.pp.se_key_bits:
            return {"result": NULL}
        circ = se_circuit_for(self.pp.se_key_bits, len(pending["p"]))
        recomputed = he.eval_word(self.hpk, circ, list(ct_sk) + pending["p"])
        if recomputed != pending["y"]:
            return {"result": NULL}
        reveals = [
            {"seed": bits_str(s), "data": bits_str(d)}
            for s, d in zip(pending["seeds"], pending["blocks"])
        ]
        return {"d": bits_str(pending["d"]), "reveals": reveals}


def _code_kwargs(params):
    return {
        "m_c": params["m_c"],
        "eps": tuple(params["eps"]),
        "K": params["K"],
        "seed": params["seed"],
    }


def find_covering_input(tg, names, tries=600):
    """Bounded search for an external input firing every listed table."""
    h = tg.m // 2
    rng = random.Random("path:" + ",".join(names))
    lo, hi = -(1 << (h - 1)), (1 << (h - 1)) - 1
    for _ in range(tries):
        X = {
            n: (rng.random() < 0.5 if t == "bool" else rng.randint(lo, hi))
            for n, t in tg.external_inputs
        }
        _, trace = evaluate_plain(tg, X)
        ok = True
        for name in names:
            outs = trace[name]["outputs"]
            v = next(iter(outs.values()))
            if v is None or not v.tag:
                ok = False
                break
        if ok:
            return X
    return None


def vs_encrypt(K, graph, backend="transparent", rng=None, strategy=None,
               he_config=None):
    """Build the developer state and the public parameters."""
    dev = Developer(
        graph, K=K, backend=backend, rng=rng, strategy=strategy, he_config=he_config
    )
    return dev, dev.pp


def serve(dev, chan):
    """Answer frames until an end frame or channel close."""
    from .channel import ChannelError

    while True:
        try:
            frame = chan.recv()
        except ChannelError:
            return
        reply = dev.handle(frame)
        chan.send(reply)
        if frame.get("type") == "end":
            return


# --- verifier ----------------------------------------------------------------------


BINDING_FIELDS = (
    "version", "mode", "K", "public_params", "g_spec", "domains", "cp", "vga",
)


def session_binding(cert):
    """Hash of the session's configuration fields.

    Some configuration values have no behavioural effect on a given
    transcript (a spare code parameter, a domain value the suite never
    sampled), so replay alone cannot notice when they are altered.  The
    binding pins them all byte-wise; the auditor recomputes it from the
    certificate it was handed and compares.
    """
    blob = canonical_json({k: cert[k] for k in BINDING_FIELDS})
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class SessionFailure(Exception):
    """Protocol-visible failure (a null where the flow required substance)."""


class Verifier:
    def __init__(
        self,
        pp,
        g_spec,
        domains,
        cp,
        seed=0,
        mode="honest",
        vga_budget=16,
        rng=None,
        sk=None,
        ct_sk=None,
    ):
        if isinstance(pp, dict):
            pp = PublicParams.from_dict(pp)
        if mode not in ("honest", "general"):
            raise ProtocolError(f"unknown mode {mode!r}")
        self.pp = pp
        self.g_spec = g_spec
        self.tg_spec = transform(g_spec)
        self.domains = domains
        self.cp = list(cp)
        self.seed = seed
        self.mode = mode
        self.vga_budget = vga_budget
        self.rng = rng or random.Random()
        self.u = universal_for(pp.u_params)
        self.code = gen_code(**_code_kwargs(pp.code_params))
        if mode == "general":
            self.sk = tuple(sk) if sk else se_keygen(pp.se_key_bits, self.rng)
            self.ct_sk = (
                list(ct_sk)
                if ct_sk
                else he.enc_word(pp.hpk, self.sk, self.rng)
            )
        else:
            self.sk, self.ct_sk = None, None
        self.qa_e = []
        self.qa_c = []
        self.session = f"v{seed}"
        self.failures = []
        self.replay_qac = None  # set by the auditor

    # -- plumbing

    def _ask(self, chan, ftype, body):
        chan.send(make_frame(ftype, self.session, body))
        reply = chan.recv()
        return reply.get("body", {})

    def _encode_query(self, chan, body):
        answer = self._ask(chan, "encode", body).get("answer", {"kind": NULL})
        self.qa_e.append({"q": body, "a": answer})
        if self.mode == "general" and answer.get("kind") != NULL:
            if not self._checker_round(chan, body, answer):
                self.failures.append(
                    {"reason": "checker", "i": body.get("i")}
                )
        return answer

    # -- session driver

    def run(self, chan):
        """Drive the whole verification session; returns (verdict, certificate)."""
        self._ask(chan, "hello", {})
        paths, ei = generate_suite(
            self.pp.structure, self.g_spec, self.domains, self.seed, self.vga_budget
        )
        inputs, seen = [], set()
        for X in ei + [X for X, _ in self.cp]:
            k = input_key(X)
            if k not in seen:
                seen.add(k)
                inputs.append(X)

        results = {}
        for X in inputs:
            results[input_key(X)] = self._eval_encrypted(chan, X)

        mismatches = []
        for X in inputs:
            want = spec_port_outputs(self.tg_spec, X)
            got = results[input_key(X)]
            if not outputs_equal(want, got):
                mismatches.append({"input": X, "expected": want, "observed": got})
        cp_results = []
        for X, Y in self.cp:
            got = results[input_key(X)]
            ok = outputs_equal(normalize_expected(Y), got)
            cp_results.append({"input": X, "expected": Y, "ok": ok})

        verdict = (
            "accept"
            if not mismatches and not self.failures and all(r["ok"] for r in cp_results)
            else "reject"
        )
        self._ask(chan, "end", {})
        cert = {
            "version": 1,
            "mode": self.mode,
            "K": self.pp.K,
            "public_params": self.pp.to_dict(),
            "g_spec": serialize_graph(self.g_spec),
            "domains": {k: list(v) for k, v in self.domains.items()},
            "cp": [[X, Y] for X, Y in self.cp],
            "vga": {"seed": self.seed, "budget": self.vga_budget},
            "paths": [list(p) for p in paths],
            "qa_e": self.qa_e,
            "verdict": verdict,
            "outputs": {k: v for k, v in results.items()},
            "failures": self.failures,
            "mismatches": mismatches,
            "cp_results": cp_results,
        }
        if self.mode == "general":
            cert["qa_c"] = self.qa_c
            cert["sk"] = bits_str(self.sk)
            cert["ct_sk"] = cts_b64(self.ct_sk)
        cert["binding"] = session_binding(cert)
        return verdict, cert

    def _eval_encrypted(self, chan, X):
        m = self.pp.m
        h = m // 2
        struct_tables = sorted(self.pp.structure["tables"], key=lambda t: t["index"])
        ext_types = dict(self.pp.structure["external_inputs"])
        state = {}  # index -> {"v": cts|None, "kind": top/bot/payload/null, ...}

        for t in struct_tables:
            i = t["index"]
            port_words = []
            table_null = False
            for pos, port in enumerate(t["ports"]):
                producers = port["producers"]
                if producers[0][0] == "input":
                    name = producers[0][1]
                    u_bits = value_to_word(X[name], ext_types[name], m)
                    ans = self._encode_query(
                        chan,
                        {"i": i, "qkind": 1, "port": pos, "u": bits_str(u_bits)},
                    )
                    if ans.get("kind") != "w" or len(ans.get("w", [])) != m:
                        self.failures.append({"reason": "q1-null", "i": i})
                        table_null = True
                        break
                    port_words.append(b64_cts(ans["w"]))
                    continue
                cand = [state.get(ref) for _, ref in producers]
                # a null or uniformly non-firing feed makes the consumer
                # null, matching the plaintext evaluation rules
                if any(c is None or c["kind"] == NULL for c in cand):
                    table_null = True
                    break
                tops = [c for c in cand if c["kind"] in (TOP, "payload")]
                if not tops:
                    table_null = True
                    break
                port_words.append(tops[0]["v"])
            if table_null:
                state[i] = {"kind": NULL, "v": None}
                continue

            u_cts = [ct for word in port_words for ct in word]
            v_cts = he.eval_word(
                self.pp.hpk,
                self.u.circuit,
                self.pp.programs[i] + pad_data_cts(u_cts, self.u.n_data),
            )
            ans = self._encode_query(
                chan,
                {"i": i, "qkind": 2, "u": cts_b64(u_cts), "v": cts_b64(v_cts)},
            )
            kind = ans.get("kind")
            if kind == NULL:
                self.failures.append({"reason": "q2-null", "i": i})
                state[i] = {"kind": NULL, "v": None}
            elif kind == "payload":
                state[i] = {"kind": "payload", "v": v_cts, "payload": ans["payload"]}
            elif kind in (TOP, BOT):
                state[i] = {"kind": kind, "v": v_cts}
            else:
                self.failures.append({"reason": "bad-answer", "i": i})
                state[i] = {"kind": NULL, "v": None}

        outputs = {}
        for group in self.pp.structure["outputs"]:
            vals = [state.get(i, {"kind": NULL}) for i in group["tables"]]
            if any(v["kind"] == NULL for v in vals):
                outputs[group["name"]] = None
                continue
            payloads = [v for v in vals if v["kind"] == "payload"]
            if len(payloads) == 1:
                bits = str_bits(payloads[0]["payload"])
                outputs[group["name"]] = payload_to_value(bits, group["type"])
            elif not payloads:
                outputs[group["name"]] = BOT
            else:
                self.failures.append({"reason": "ambiguous-output", "port": group["name"]})
                outputs[group["name"]] = None
        return outputs

    # -- checker round (general mode)

    def _expected_checker(self, q, answer, h):
        if q["qkind"] == 1:
            return "input", q.get("port"), str_bits(q["u"])
        kind = answer.get("kind")
        if kind == "payload":
            return "external", None, str_bits(answer["payload"])
        if kind == TOP:
            return "intermediate", None, top_tag_bits(h)
        return "intermediate", None, (0,) * h

    def _checker_round(self, chan, q, answer):
        m = self.pp.m
        h = m // 2
        case, port, expected = self._expected_checker(q, answer, h)
        if q["qkind"] == 1:
            p = b64_cts(answer["w"])
        else:
            v = b64_cts(q["v"])
            p = v[:h] if case == "intermediate" else v[h:]
        circ = se_circuit_for(self.pp.se_key_bits, len(p))
        y = he.eval_word(self.pp.hpk, circ, list(self.ct_sk) + p)

        record = {
            "q": {
                "i": q["i"],
                "case": case,
                "port": port,
                "p": cts_b64(p),
                "y": cts_b64(y),
            },
            "a": {"d": None},
            "s": {"blocks": []},
        }
        self.qa_c.append(record)

        if self.replay_qac is not None:
            return self._checker_replay(record, expected)

        r = self._ask(
            chan,
            "checker",
            {"i": q["i"], "case": case, "port": port, "p": cts_b64(p), "y": cts_b64(y)},
        )
        if "blocks" not in r:
            return False
        n = r["blocks"]
        if n != len(split_blocks((0,) * len(p), self.code.m_c)):
            return False
        rs = [choose_challenge(self.code.q, self.rng) for _ in range(n)]
        c = self._ask(
            chan, "commit_challenge", {"Rs": [bits_str(R) for R in rs]}
        )
        if "blocks" not in c or len(c["blocks"]) != n:
            return False
        commits = c["blocks"]
        res = self._ask(chan, "checker_proof", {"ct_sk": cts_b64(self.ct_sk)})
        if "d" not in res:
            return False
        try:
            d = str_bits(res["d"])
            reveals = res["reveals"]
        except (ProtocolError, KeyError):
            return False
        if len(d) != len(p) or len(reveals) != n:
            return False

        blocks_record = []
        data_blocks = split_blocks(d, self.code.m_c)
        for R, cm, rv, want_data in zip(rs, commits, reveals, data_blocks):
            try:
                commit = CommitMessage(
                    e=str_bits(cm["e"]),
                    exposed=tuple((int(ii), int(bb)) for ii, bb in cm["exposed"]),
                )
                reveal = RevealMessage(
                    seed=str_bits(rv["seed"]), data=str_bits(rv["data"])
                )
            except (ProtocolError, KeyError, TypeError):
                return False
            if reveal.data != want_data:
                return False
            if not verify_reveal(commit, reveal, R, self.code):
                return False
            blocks_record.append(
                {
                    "R": bits_str(R),
                    "e": cm["e"],
                    "exposed": cm["exposed"],
                    "seed": rv["seed"],
                    "data": rv["data"],
                }
            )
        record["a"]["d"] = bits_str(d)
        record["s"]["blocks"] = blocks_record
        return se_dec(self.sk, d) == tuple(expected)

    def _checker_replay(self, record, expected):
        """Consume the next recorded checker tuple instead of the channel."""
        if not self.replay_qac:
            raise SessionFailure("checker record missing")
        rec = self.replay_qac.pop(0)
        if rec["q"] != record["q"]:
            raise SessionFailure("checker record mismatch")
        if rec["a"].get("d") is None:
            return False
        d = str_bits(rec["a"]["d"])
        blocks = rec["s"]["blocks"]
        data_blocks = split_blocks(d, self.code.m_c)
        if len(blocks) != len(data_blocks):
            return False
        for blk, want_data in zip(blocks, data_blocks):
            commit = CommitMessage(
                e=str_bits(blk["e"]),
                exposed=tuple((int(i), int(b)) for i, b in blk["exposed"]),
            )
            reveal = RevealMessage(
                seed=str_bits(blk["seed"]), data=str_bits(blk["data"])
            )
            if reveal.data != want_data:
                return False
            if not verify_reveal(commit, reveal, str_bits(blk["R"]), self.code):
                return False
        record["a"]["d"] = rec["a"]["d"]
        record["s"]["blocks"] = blocks
        return se_dec(self.sk, d) == tuple(expected)


# --- output comparison helpers ----------------------------------------------------


def spec_port_outputs(tg_spec, X):
    """Per-output-port plaintext results of the public specification."""
    outputs, _ = evaluate_plain(tg_spec, X)
    groups = {}
    for tname, port in tg_spec.external_outputs:
        groups.setdefault(port, []).append(outputs[tname])
    result = {}
    for port, vals in groups.items():
        if any(v is None for v in vals):
            result[port] = None
            continue
        tops = [v for v in vals if v.tag]
        if len(tops) == 1:
            result[port] = tops[0].payload
        elif not tops:
            result[port] = BOT
        else:
            result[port] = None
    return result


def normalize_expected(Y):
    return {port: (BOT if v == BOT else v) for port, v in Y.items()}


def outputs_equal(want, got):
    if set(want) != set(got):
        return False
    for port, w in want.items():
        g = got[port]
        if w is None and g is None:  # semantic null on both sides agrees
            continue
        if w is None or g is None:
            return False
        if w != g or isinstance(w, bool) != isinstance(g, bool):
            return False
    return True


def verify_session(dev, verifier):
    """Run a full in-process session over the loopback channel."""
    from .channel import LoopbackChannel

    return verifier.run(LoopbackChannel(dev.handle))
