"""Command-line entry points for developer, verifier, and auditor roles.

Exit codes: 0 accept/ok, 1 reject or audit failure, 2 usage or input error,
3 protocol abort. Errors print a machine-readable JSON record to stderr.
"""

import json
import os
import random
import socket
import sys
import threading

import click

from . import audit as audit_mod
from . import demo as demo_mod
from . import he
from .channel import ChannelError, LoopbackChannel, SocketChannel, canonical_json
from .graphtext import GraphError, parse_graph, serialize_graph
from .protocol import (
    Developer,
    ProtocolError,
    PublicParams,
    Verifier,
    serve as serve_loop,
    verify_session,
    vs_encrypt,
)
from .simharness import OracleDeveloper, metadata_views, run_experiment
from .tables import transform
from .vga import coverage_report

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2
EXIT_PROTOCOL = 3


def data_dir():
    return os.environ.get("TABVERIFY_DATA", ".")


def resolve(path):
    if path is None or os.path.isabs(path):
        return path
    return os.path.join(data_dir(), path)


def fail(code, kind, message):
    sys.stderr.write(canonical_json({"error": kind, "message": message}) + "\n")
    sys.exit(code)


def write_json(path, obj):
    with open(resolve(path), "w", encoding="utf-8") as f:
        f.write(canonical_json(obj))


def read_json(path):
    with open(resolve(path), encoding="utf-8") as f:
        return json.load(f)


def load_graph(path, m_width):
    try:
        with open(resolve(path), encoding="utf-8") as f:
            return parse_graph(f.read(), m=m_width)
    except OSError as exc:
        fail(EXIT_USAGE, "io", str(exc))
    except GraphError as exc:
        fail(EXIT_USAGE, "graph", str(exc))


def load_domains(path, graph):
    """Domains file: {name: [values...]} or {name: {"lo": a, "hi": b}}."""
    if path is None:
        h = graph.m // 2
        out = {}
        for name, ptype in graph.external_inputs:
            if ptype == "bool":
                out[name] = [False, True]
            else:
                lo = max(-(1 << (h - 1)), -64)
                hi = min((1 << (h - 1)) - 1, 64)
                out[name] = list(range(lo, hi + 1))
        return out
    raw = read_json(path)
    out = {}
    for name, spec in raw.items():
        if isinstance(spec, dict):
            out[name] = list(range(spec["lo"], spec["hi"] + 1))
        else:
            out[name] = list(spec)
    return out


def load_cp(path):
    if path is None:
        return []
    return [tuple(item) for item in read_json(path)]


def parse_hostport(value):
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        fail(EXIT_USAGE, "flag", f"expected HOST:PORT, got {value!r}")
    return host, int(port)


@click.group()
def main():
    """Two-party design verification over encrypted table graphs."""


@main.command()
@click.option("--backend", default="transparent",
              type=click.Choice(["transparent", "integer-she"]))
@click.option("--security", "-k", "security", default=16, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True)
def keygen(backend, security, seed, out):
    """Generate a homomorphic key pair and write it to a file."""
    rng = random.Random(seed) if seed is not None else random.Random()
    try:
        keys = he.keygen(security, backend, rng=rng)
    except he.HeError as exc:
        fail(EXIT_USAGE, "keygen", str(exc))
    doc = {
        "hpk": he.hpk_to_dict(keys.hpk),
        "hsk": {
            "kind": keys.hsk.kind,
            "key_id": keys.hsk.key_id.hex(),
            "lam_bytes": keys.hsk.lam_bytes,
            "p": format(keys.hsk.p, "x") if keys.hsk.p is not None else None,
        },
    }
    write_json(out, doc)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--graph", required=True)
@click.option("--m-width", default=16, show_default=True)
@click.option("--out", default=None)
def compile(graph, m_width, out):
    """Validate a graph file and report its transformed shape."""
    g = load_graph(graph, m_width)
    tg = transform(g)
    summary = {
        "tables": len(g.tables),
        "row_tables": len(tg.tables),
        "order": tg.order,
        "levels": tg.levels,
        "external_inputs": [[n, t] for n, t in tg.external_inputs],
        "canonical": serialize_graph(g),
    }
    if out:
        write_json(out, summary)
    for name in tg.order:
        t = tg.tables[name]
        ports = ", ".join(f"{p}:{ty}" for p, ty in t.inputs)
        outs = ", ".join(f"{p}:{ty}" for p, ty in t.outputs)
        click.echo(f"level {tg.levels[name]}  {name}  ({ports}) -> ({outs})")
    click.echo(f"valid: {len(tg.tables)} row tables")


@main.command()
@click.option("--graph", required=True)
@click.option("--backend", default="transparent",
              type=click.Choice(["transparent", "integer-she"]))
@click.option("--m-width", default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True)
def encrypt(graph, backend, m_width, seed, out):
    """Encrypt a design and emit its public parameters."""
    g = load_graph(graph, m_width)
    try:
        _, pp = vs_encrypt(16, g, backend=backend, rng=random.Random(seed))
    except (ProtocolError, he.HeError) as exc:
        fail(EXIT_PROTOCOL, "encrypt", str(exc))
    write_json(out, pp.to_dict())
    click.echo(f"wrote {out}")


@main.command()
@click.option("--graph", required=True)
@click.option("--backend", default="transparent",
              type=click.Choice(["transparent", "integer-she"]))
@click.option("--m-width", default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--listen", required=True, help="HOST:PORT to accept verifiers on")
@click.option("--out", default=None, help="also write public parameters here")
@click.option("--concurrent", is_flag=True,
              help="serve each connection in its own thread")
@click.option("--max-sessions", type=int, default=None,
              help="exit after this many connections")
def serve(graph, backend, m_width, seed, listen, out, concurrent, max_sessions):
    """Run a developer endpoint over TCP."""
    g = load_graph(graph, m_width)
    dev, pp = vs_encrypt(16, g, backend=backend, rng=random.Random(seed))
    if out:
        write_json(out, pp.to_dict())
    host, port = parse_hostport(listen)
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        srv.bind((host, port))
    except OSError as exc:
        fail(EXIT_USAGE, "bind", str(exc))
    srv.listen()
    click.echo(f"serving on {host}:{srv.getsockname()[1]}")
    served = 0
    try:
        while max_sessions is None or served < max_sessions:
            conn, _addr = srv.accept()
            chan = SocketChannel(conn)
            if concurrent:
                threading.Thread(
                    target=serve_loop, args=(dev, chan), daemon=True
                ).start()
            else:
                serve_loop(dev, chan)
                chan.close()
            served += 1
    except KeyboardInterrupt:
        pass
    finally:
        srv.close()


@main.command()
@click.option("--spec", "spec_path", required=True,
              help="public specification graph file")
@click.option("--graph", default=None,
              help="developer design for an in-process session")
@click.option("--connect", default=None, help="HOST:PORT of a developer endpoint")
@click.option("--pp", "pp_path", default=None,
              help="public parameters file (required with --connect)")
@click.option("--mode", default="honest",
              type=click.Choice(["honest", "general"]), show_default=True)
@click.option("--m-width", default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--domains", "domains_path", default=None)
@click.option("--cp", "cp_path", default=None,
              help="critical points file: [[input, expected], ...]")
@click.option("--budget", type=int, default=16, show_default=True)
@click.option("--cert", "cert_path", required=True)
@click.option("--out", default=None, help="write the coverage report here")
def verify(spec_path, graph, connect, pp_path, mode, m_width, seed,
           domains_path, cp_path, budget, cert_path, out):
    """Run a verification session and write the certificate."""
    if (graph is None) == (connect is None):
        fail(EXIT_USAGE, "flag", "exactly one of --graph or --connect is required")
    g_spec = load_graph(spec_path, m_width)
    domains = load_domains(domains_path, g_spec)
    cp = load_cp(cp_path)

    if graph is not None:
        dev = Developer(load_graph(graph, m_width), rng=random.Random(seed + 1))
        pp = dev.pp.to_dict()
        chan = LoopbackChannel(dev.handle)
    else:
        if pp_path is None:
            fail(EXIT_USAGE, "flag", "--connect requires --pp")
        pp = read_json(pp_path)
        host, port = parse_hostport(connect)
        try:
            chan = SocketChannel.connect(host, port)
        except OSError as exc:
            fail(EXIT_PROTOCOL, "connect", str(exc))

    v = Verifier(pp, g_spec, domains, cp, seed=seed, mode=mode, vga_budget=budget)
    try:
        verdict, cert = v.run(chan)
    except (ChannelError, ProtocolError, he.HeError) as exc:
        fail(EXIT_PROTOCOL, "session", str(exc))
    digest = audit_mod.save_certificate(cert, resolve(cert_path))
    report = coverage_report(cert["qa_e"], pp["structure"] if isinstance(pp, dict)
                             else pp.structure)
    if out:
        with open(resolve(out), "w", encoding="utf-8") as f:
            f.write(report.render_text() + "\n")
    click.echo(report.render_text())
    click.echo(f"verdict: {verdict}")
    click.echo(f"certificate: {cert_path} ({digest[:16]})")
    sys.exit(EXIT_OK if verdict == "accept" else EXIT_REJECT)


@main.command("audit")
@click.option("--cert", "cert_path", required=True)
@click.option("--out", default=None, help="write the audit report here")
def audit_cmd(cert_path, out):
    """Replay a certificate; exit 0 only if the audit returns 1."""
    try:
        cert = audit_mod.load_certificate(resolve(cert_path))
    except (OSError, ValueError, audit_mod.AuditError) as exc:
        fail(EXIT_REJECT, "certificate", str(exc))
    ok, report = audit_mod.audit(cert)
    if out:
        write_json(out, {"ok": ok, "report": report})
    click.echo(canonical_json({"ok": ok, "report": report}))
    sys.exit(EXIT_OK if ok == 1 else EXIT_REJECT)


@main.command()
@click.option("--mode", default="general",
              type=click.Choice(["honest", "general"]), show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cert", "cert_path", default="demo-cert.json", show_default=True)
@click.option("--out", default=None, help="write the coverage report here")
def demo(mode, seed, cert_path, out):
    """End-to-end run on the built-in worked example."""
    g = demo_mod.demo_graph()
    dev, pp = vs_encrypt(16, g, rng=random.Random(seed + 1))
    cp = _demo_cp(g)
    v = Verifier(pp.to_dict(), g, demo_mod.DEMO_DOMAINS, cp, seed=seed, mode=mode)
    verdict, cert = verify_session(dev, v)
    cert["annotations"] = {
        "documented_claim": {
            "input": demo_mod.DEMO_INPUT,
            "claimed": list(demo_mod.DOCUMENTED_CLAIM_Y),
            "ground_truth": _demo_ground_truth(g),
            "note": "claim recorded as documented; ground truth is the "
                    "plaintext evaluation, which disagrees",
        }
    }
    digest = audit_mod.save_certificate(cert, resolve(cert_path))
    ok, _report = audit_mod.audit(audit_mod.load_certificate(resolve(cert_path)))
    report = coverage_report(cert["qa_e"], pp.structure)
    if out:
        with open(resolve(out), "w", encoding="utf-8") as f:
            f.write(report.render_text() + "\n")
    click.echo(report.render_text())
    click.echo(f"verdict: {verdict}  audit: {ok}")
    click.echo(f"documented claim: {demo_mod.DOCUMENTED_CLAIM_Y}")
    click.echo(
        "ground truth:     "
        f"{cert['annotations']['documented_claim']['ground_truth']}"
    )
    click.echo(f"certificate: {cert_path} ({digest[:16]})")
    sys.exit(EXIT_OK if verdict == "accept" and ok == 1 else EXIT_REJECT)


def _demo_ground_truth(g):
    from .protocol import spec_port_outputs

    res = spec_port_outputs(transform(g), demo_mod.DEMO_INPUT)
    return {k: ("bot" if v == "bot" else v) for k, v in sorted(res.items())}


def _demo_cp(g):
    from .protocol import spec_port_outputs

    want = spec_port_outputs(transform(g), demo_mod.DEMO_INPUT)
    return [(demo_mod.DEMO_INPUT, want)]


@main.command("sim-equiv")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sessions", type=int, default=3, show_default=True)
def sim_equiv(seed, sessions):
    """Check oracle/service byte equivalence and the real-ideal experiment."""
    g = demo_mod.demo_graph()
    for k in range(sessions):
        dev = Developer(g, rng=random.Random(seed + k))
        v1 = Verifier(dev.pp.to_dict(), g, demo_mod.DEMO_DOMAINS, [],
                      seed=seed + k, mode="general", rng=random.Random(1000 + k))
        _, c1 = verify_session(dev, v1)
        orc = OracleDeveloper(g, rng=random.Random(seed + k))
        v2 = Verifier(orc.pp.to_dict(), g, demo_mod.DEMO_DOMAINS, [],
                      seed=seed + k, mode="general", rng=random.Random(1000 + k))
        orc.learn_sk(v2.sk)
        _, c2 = verify_session(orc, v2)
        if canonical_json(c1) != canonical_json(c2):
            fail(EXIT_REJECT, "sim-equiv", f"transcripts diverge in session {k}")
        click.echo(f"session {k}: byte-identical ({len(c1['qa_e'])} queries)")
    res = run_experiment(g, demo_mod.DEMO_DOMAINS, [], seed=seed, vga_budget=6)
    mv = metadata_views(res)
    if canonical_json(mv["real"]) != canonical_json(mv["ideal"]):
        fail(EXIT_REJECT, "sim-equiv", "real/ideal metadata differ")
    click.echo("real/ideal metadata indistinguishable")


if __name__ == "__main__":
    main()
