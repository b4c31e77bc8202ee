"""Test-case generation and coverage from public information only.

The generator sees the anonymized structure and the public specification.
It enumerates source-to-sink paths in the structure, then derives external
inputs by seeded sampling of the spec's declared input domains, aiming to
fire every transformed spec row at least once. Everything is deterministic
in the seed so an auditor can regenerate the exact suite.
"""

import json
import random
from dataclasses import dataclass

from .tables import transform

ROW_SEARCH_TRIES = 400


def input_key(X):
    """Canonical dict key for an external input assignment."""
    return json.dumps({k: X[k] for k in sorted(X)}, sort_keys=True)


def enumerate_paths(structure, limit):
    """Simple Input-to-Output paths over the anonymized node indices."""
    succ = {}
    starts = []
    external = set()
    for t in structure["tables"]:
        idx = t["index"]
        succ.setdefault(idx, [])
        if t["external"]:
            external.add(idx)
        for port in t["ports"]:
            for kind, ref in port["producers"]:
                if kind == "input":
                    starts.append(idx)
                else:
                    succ.setdefault(ref, []).append(idx)
    paths = []

    def walk(node, acc):
        if len(paths) >= limit:
            return
        if node in external:
            paths.append(tuple(acc))
            if len(paths) >= limit:
                return
        for nxt in sorted(succ.get(node, [])):
            if nxt not in acc:
                walk(nxt, acc + [nxt])

    for s in sorted(set(starts)):
        walk(s, [s])
    return paths


def _sample_input(domains, rng):
    return {name: rng.choice(list(vals)) for name, vals in sorted(domains.items())}


def generate_suite(structure, g_spec, domains, seed, budget):
    """Deterministic (paths, external input list) for the given seed."""
    if budget < 1:
        return [], []
    paths = enumerate_paths(structure, budget)
    rng = random.Random(f"vga:{seed}")
    tg = transform(g_spec)
    inputs, seen = [], set()

    def push(X):
        k = input_key(X)
        if k not in seen and len(inputs) < budget:
            seen.add(k)
            inputs.append(X)

    from .tables import evaluate_plain

    for name in tg.order:
        found = None
        for _ in range(ROW_SEARCH_TRIES):
            X = _sample_input(domains, rng)
            _, trace = evaluate_plain(tg, X)
            outs = trace[name]["outputs"]
            v = next(iter(outs.values()))
            if v is not None and v.tag:
                found = X
                break
        if found is not None:
            push(found)
    # top up with plain random samples so small graphs still get a spread
    while len(inputs) < min(budget, len(tg.order) + 2):
        push(_sample_input(domains, rng))
    return paths, inputs


@dataclass
class CoverageReport:
    tables: dict  # index -> {"covered": bool, "anti_covered": bool, "reached": bool}

    @property
    def covered(self):
        return sorted(i for i, t in self.tables.items() if t["covered"])

    @property
    def anti_covered(self):
        return sorted(i for i, t in self.tables.items() if t["anti_covered"])

    @property
    def unreached(self):
        return sorted(i for i, t in self.tables.items() if not t["reached"])

    def summary(self):
        n = len(self.tables) or 1
        return {
            "covered_ratio": len(self.covered) / n,
            "anti_covered_ratio": len(self.anti_covered) / n,
            "unreached": self.unreached,
        }

    def render_text(self):
        lines = ["table  covered  anti-covered  reached"]
        for i in sorted(self.tables):
            t = self.tables[i]
            lines.append(
                f"{i:>5}  {str(t['covered']):>7}  {str(t['anti_covered']):>12}  "
                f"{str(t['reached']):>7}"
            )
        s = self.summary()
        lines.append(
            f"covered {s['covered_ratio']:.0%}, "
            f"anti-covered {s['anti_covered_ratio']:.0%}, "
            f"unreached {len(self.unreached)}"
        )
        return "\n".join(lines)


def coverage_report(qa_e, structure):
    """Row coverage from the public transcript's q2 answers alone."""
    tables = {
        t["index"]: {"covered": False, "anti_covered": False, "reached": False}
        for t in structure["tables"]
    }
    for rec in qa_e:
        q, a = rec["q"], rec["a"]
        if q.get("qkind") != 2:
            continue
        entry = tables.get(q["i"])
        if entry is None:
            continue
        kind = a.get("kind")
        if kind in ("top", "payload"):
            entry["covered"] = True
            entry["reached"] = True
        elif kind == "bot":
            entry["anti_covered"] = True
            entry["reached"] = True
    return CoverageReport(tables=tables)


def check_critical_points(cp, results):
    """Compare each (X, expected Y) against observed session outputs.

    results maps input_key(X) to the observed per-port outputs; a missing or
    null evaluation counts as failure.
    """
    out = []
    for X, Y in cp:
        got = results.get(input_key(X))
        ok = got is not None and all(
            port in got and got[port] == want for port, want in Y.items()
        )
        out.append({"input": X, "expected": Y, "observed": got, "ok": ok})
    return out
