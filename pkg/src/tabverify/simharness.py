"""Simulation harness for the security argument.

Two pieces back the indistinguishability claims:

1. Oracle reimplementations of the developer services that keep plaintext
   bookkeeping instead of ever decrypting. Against identical keys and
   randomness they must answer byte-for-byte like the real developer, for
   any valid query sequence. The encode oracle evaluates the secret tables
   in the clear from its memory; the path oracle is the same search the
   real service runs; the checker oracle knows the verifier's symmetric
   key and produces the committed value directly from the recorded answer.

2. A structure-preserving fake-design generator plus a real/ideal
   experiment runner: the ideal run encrypts a fake design with the same
   interconnection structure while answers still come from the real
   tables, and public metadata of both runs must coincide.
"""

import random

from . import he
from .circuit import simulate
from .expr import parse_expr
from .protocol import (
    BOT,
    NULL,
    TOP,
    Developer,
    Verifier,
    b64_cts,
    verify_session,
)
from .symcrypto import se_enc
from .tables import INPUT, Table, TableGraph


class OracleDeveloper(Developer):
    """Answers developer queries without touching the decryption key.

    cipher_graph drives everything public (keys, programs, structure);
    answer_graph supplies the table semantics used for answers. They must
    share the interconnection structure. With answer_graph omitted this is
    a drop-in plaintext-bookkeeping twin of Developer.
    """

    def __init__(self, cipher_graph, answer_graph=None, sk=None, **kw):
        super().__init__(cipher_graph, **kw)
        self.hsk = None  # any accidental decryption now fails loudly
        self.sk = tuple(sk) if sk is not None else None
        if answer_graph is None:
            self.answer_circuits = self.circuits
        else:
            twin = Developer(answer_graph, rng=random.Random(0))
            if twin.pp.structure != self.pp.structure:
                raise ValueError("answer graph has a different structure")
            self.answer_circuits = twin.circuits
        self._plain = {}  # session mem id -> {i: plaintext output word}

    def learn_sk(self, sk):
        self.sk = tuple(sk)

    def _mem_plain(self, mem):
        return self._plain.setdefault(id(mem), {})

    def _encode_q2(self, mem, body):
        from .protocol import cts_b64, pad_data_cts

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
        except Exception:
            return {"answer": {"kind": NULL}}
        if len(u_cts) != len(t.inputs) * m or len(v_cts) != m:
            return {"answer": {"kind": NULL}}

        plain = self._mem_plain(mem)
        u_plain = []
        for j, (port, _) in enumerate(t.inputs):
            segment = u_cts[j * m : (j + 1) * m]
            producers = self.tg.producers[(name, port)]
            if producers[0][0] == INPUT:
                known = mem.q1.get((i, j))
                if known is None or known[1] != segment:
                    return {"answer": {"kind": NULL}}
                u_plain.extend(known[0])
                continue
            matched = False
            for src, _sport in producers:
                k = self.index_of[src]
                prior = mem.q2.get(k)
                if prior is None:
                    continue
                p_u, p_v, p_ans = prior
                if p_v == segment:
                    if p_ans == BOT:
                        return {"answer": {"kind": NULL}}
                    u_plain.extend(plain[k])
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

        # plaintext shadow of what decrypting v would give
        out = simulate(self.answer_circuits[i], u_plain)
        tag, payload = out[:h], out[h:]
        is_top = any(tag)
        external = name in {n for n, _ in self.tg.external_outputs}
        if not is_top:
            honest = {"kind": BOT}
            kind_for_mem = BOT
        elif external:
            from .protocol import bits_str

            honest = {"kind": "payload", "payload": bits_str(payload)}
            kind_for_mem = "payload"
        else:
            honest = {"kind": TOP}
            kind_for_mem = TOP
        mem.q2[i] = (u_cts, v_cts, kind_for_mem)
        plain[i] = out
        return {"answer": self._apply_strategy(mem, honest)}

    def _checker(self, mem, body):
        from .commitment import split_blocks

        m = self.pp.m
        h = m // 2
        i, case, port = body.get("i"), body.get("case"), body.get("port")
        try:
            p = b64_cts(body.get("p", []))
            y = b64_cts(body.get("y", []))
        except Exception:
            return {"result": NULL}
        want = m if case == "input" else h
        if len(p) != want or len(y) != want:
            return {"result": NULL}
        plain = self._mem_plain(mem)
        if case == "input":
            known = mem.q1.get((i, port))
            if known is None or known[1] != p:
                return {"result": NULL}
            slice_plain = known[0]
        elif case in ("intermediate", "external"):
            prior = mem.q2.get(i)
            if prior is None:
                return {"result": NULL}
            slice_cts = prior[1][:h] if case == "intermediate" else prior[1][h:]
            if slice_cts != p:
                return {"result": NULL}
            out = plain[i]
            slice_plain = out[:h] if case == "intermediate" else out[h:]
        else:
            return {"result": NULL}
        # knows the verifier's key: commit to the encryption of the answer
        d_bits = se_enc(self.sk, tuple(slice_plain))
        mem.pending = {
            "d": d_bits,
            "p": p,
            "y": y,
            "blocks": split_blocks(d_bits, self.code.m_c),
            "seeds": None,
        }
        return {"blocks": len(mem.pending["blocks"])}

    def _proof(self, mem, body):
        from .protocol import bits_str, se_circuit_for

        pending = mem.pending
        if not pending or pending.get("seeds") is None:
            return {"result": NULL}
        mem.pending = {}
        try:
            ct_sk = b64_cts(body.get("ct_sk", []))
        except Exception:
            return {"result": NULL}
        if len(ct_sk) != self.pp.se_key_bits:
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


# --- structure-preserving fake designs ---------------------------------------------


def fake_graph_like(g, seed):
    """A different design with the same tables-and-wiring shape as g."""
    rng = random.Random(f"fake:{seed}")
    tables = {}
    for t in g.tables.values():
        int_ports = [p for p, ty in t.inputs if ty == "int"]
        bool_ports = [p for p, ty in t.inputs if ty == "bool"]
        n = len(t.rows)
        preds = _fake_preds(int_ports, bool_ports, n, rng)
        rows = []
        for pred in preds:
            funcs = tuple(
                _fake_func(int_ports, bool_ports, ty, rng) for _, ty in t.outputs
            )
            rows.append((parse_expr(pred), tuple(parse_expr(f) for f in funcs)))
        tables[t.name] = Table(
            name=t.name, inputs=t.inputs, outputs=t.outputs, rows=tuple(rows)
        )
    return TableGraph(
        tables=tables,
        edges=list(g.edges),
        m=g.m,
        external_inputs=list(g.external_inputs),
    )


def _fake_preds(int_ports, bool_ports, n, rng):
    if n == 1:
        return ["true"]
    if int_ports:
        x = int_ports[0]
        cuts = sorted(rng.sample(range(-40, 41), n - 1))
        preds = [f"{x} < {cuts[0]}"]
        for lo, hi in zip(cuts, cuts[1:]):
            preds.append(f"{x} >= {lo} and {x} < {hi}")
        preds.append(f"{x} >= {cuts[-1]}")
        return preds
    if bool_ports and n == 2:
        b = bool_ports[0]
        return [f"{b} == true", f"{b} == false"]
    raise ValueError("cannot shape predicates for this table")


def _fake_func(int_ports, bool_ports, out_type, rng):
    if out_type == "int":
        if int_ports and rng.random() < 0.8:
            x = rng.choice(int_ports)
            return f"{x} + {rng.randint(-30, 30)}"
        return str(rng.randint(-50, 50))
    if int_ports and rng.random() < 0.5:
        return f"{rng.choice(int_ports)} < {rng.randint(-30, 30)}"
    if bool_ports and rng.random() < 0.5:
        return rng.choice(bool_ports)
    return rng.choice(["true", "false"])


# --- real vs ideal experiment --------------------------------------------------------


def shared_budget(*graphs):
    """Universal-circuit floor large enough for every listed design."""
    n_data, gates = 0, 0
    for g in graphs:
        dev = Developer(g, rng=random.Random(0))
        n_data = max(n_data, dev.u.n_data)
        gates = max(gates, dev.u.g)
    return (n_data, gates)


def run_experiment(graph, domains, cp, seed, mode="general", vga_budget=8):
    """One real and one ideal session over the same spec and seeds.

    Real: the actual developer on the actual design. Ideal: a fake design
    with the same structure is encrypted, while answers come from the real
    tables through the plaintext-bookkeeping oracles.
    """
    fake = fake_graph_like(graph, seed)
    budget = shared_budget(graph, fake)

    dev_r = Developer(graph, rng=random.Random(seed), u_budget=budget)
    v_r = Verifier(
        dev_r.pp.to_dict(), graph, domains, cp, seed=seed, mode=mode,
        vga_budget=vga_budget, rng=random.Random(seed + 1),
    )
    verdict_r, cert_r = verify_session(dev_r, v_r)

    dev_i = OracleDeveloper(
        fake, answer_graph=graph, rng=random.Random(seed), u_budget=budget
    )
    v_i = Verifier(
        dev_i.pp.to_dict(), graph, domains, cp, seed=seed, mode=mode,
        vga_budget=vga_budget, rng=random.Random(seed + 1),
    )
    if mode == "general":
        dev_i.learn_sk(v_i.sk)
    verdict_i, cert_i = verify_session(dev_i, v_i)

    return {
        "real": {"verdict": verdict_r, "cert": cert_r},
        "ideal": {"verdict": verdict_i, "cert": cert_i},
    }


def metadata_views(result):
    """The public, non-ciphertext metadata a distinguisher could compare."""
    views = {}
    for side in ("real", "ideal"):
        pp = result[side]["cert"]["public_params"]
        cert = result[side]["cert"]
        views[side] = {
            "structure": pp["structure"],
            "u_params": pp["u_params"],
            "m": pp["m"],
            "K": pp["K"],
            "backend": pp["backend"],
            "program_lengths": sorted(len(v) for v in pp["programs"].values()),
            "verdict": cert["verdict"],
            "outputs": cert["outputs"],
            "paths": cert["paths"],
            "answer_kinds": [r["a"].get("kind") for r in cert["qa_e"]],
        }
    return views
