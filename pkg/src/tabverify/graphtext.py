"""Text format for table-graph designs.

    width: 16;
    table DL {
      inputs: a;
      outputs: z;
      rows: [
        (a > 45, a - 20),
        (35 <= a and a <= 45, a - 5),
      ];
    }
    edges:
      Input.a -> DL.a;
      DL.z -> Output.z;

Input ports default to int; write `b: bool` to override. `outputs` may be
omitted for a single output named `out` (type inferred from the first row).
Rows may list several functions, one per output port. `Input` and `Output`
are the reserved boundary nodes.
"""

from . import expr as _expr
from .expr import ExprError, ExprTypeError, infer_type, to_text
from .tables import INPUT, OUTPUT, GraphError, Table, TableGraph, validate_references

RESERVED = {INPUT, OUTPUT}
_KEYWORDS = {"table", "edges", "inputs", "outputs", "rows", "width"}


class _GraphParser(_expr._Parser):
    def name(self, what):
        tok = self.take()
        if not isinstance(tok, str) or not (tok[0].isalpha() or tok[0] == "_"):
            raise GraphError(f"expected {what}, got {tok!r}")
        return tok

    def maybe(self, tok):
        if self.peek() == tok:
            self.take()
            return True
        return False


def strip_comments(text):
    lines = []
    for line in text.splitlines():
        if "//" in line:
            line = line[: line.index("//")]
        lines.append(line)
    return "\n".join(lines)


def parse_graph(text, m=16):
    """Parse design source into a validated TableGraph."""
    try:
        tokens = _expr.tokenize(strip_comments(text))
    except ExprError as exc:
        raise GraphError(str(exc)) from exc
    p = _GraphParser(tokens)
    tables = {}
    edges = []

    try:
        if p.peek() == "width":
            p.take()
            p.take(":")
            m = p.take()
            if not isinstance(m, int) or m < 4 or m % 2:
                raise GraphError(f"bad width {m!r} (need an even value >= 4)")
            p.maybe(";")

        while p.peek() == "table":
            name, table = _parse_table(p)
            if name in tables:
                raise GraphError(f"duplicate table name '{name}'")
            if name in RESERVED:
                raise GraphError(f"'{name}' is a reserved node name")
            tables[name] = table

        if p.peek() != "edges":
            raise GraphError(f"expected 'edges', got {p.peek()!r}")
        p.take("edges")
        p.take(":")
        while p.peek() is not None:
            src = _parse_endpoint(p)
            p.take("->")
            dst = _parse_endpoint(p)
            p.maybe(";")
            edges.append((src, dst))
    except ExprError as exc:
        raise GraphError(str(exc)) from exc

    if not tables:
        raise GraphError("no tables")
    g = TableGraph(tables=tables, edges=edges, m=m)
    validate_references(g)
    return g


def _parse_endpoint(p):
    node = p.name("node name")
    p.take(".")
    port = p.name("port name")
    return (node, port)


def _parse_ports(p, allow_types):
    ports = []
    while True:
        name = p.name("port name")
        ptype = "int"
        if p.maybe(":"):
            ptype = p.name("port type")
            if ptype not in ("int", "bool"):
                raise GraphError(f"unknown port type '{ptype}'")
            if not allow_types:
                pass  # output types are accepted too, same syntax
        ports.append((name, ptype))
        if not p.maybe(","):
            break
    p.maybe(";")
    return tuple(ports)


def _parse_table(p):
    p.take("table")
    name = p.name("table name")
    p.take("{")
    inputs = outputs = None
    rows = None
    while p.peek() != "}":
        section = p.take()
        p.take(":")
        if section == "inputs":
            inputs = _parse_ports(p, True)
        elif section == "outputs":
            outputs = _parse_ports(p, True)
        elif section == "rows":
            rows = _parse_rows(p)
        else:
            raise GraphError(f"unknown section '{section}' in table '{name}'")
    p.take("}")

    if inputs is None:
        raise GraphError(f"table '{name}' has no inputs section")
    if rows is None or not rows:
        raise GraphError(f"table '{name}' has no rows")

    env = dict(inputs)
    if outputs is None:
        try:
            ftype = infer_type(rows[0][1][0], env)
        except ExprTypeError as exc:
            raise GraphError(f"table '{name}': {exc}") from exc
        outputs = (("out", ftype),)

    for pred, funcs in rows:
        if len(funcs) != len(outputs):
            raise GraphError(
                f"table '{name}': row has {len(funcs)} functions for "
                f"{len(outputs)} outputs"
            )
    return name, Table(name=name, inputs=inputs, outputs=outputs, rows=rows)


def _parse_rows(p):
    p.take("[")
    rows = []
    while p.peek() != "]":
        p.take("(")
        pred = p.parse_expr()
        p.take(",")
        funcs = [p.parse_expr()]
        while p.maybe(","):
            funcs.append(p.parse_expr())
        p.take(")")
        rows.append((pred, tuple(funcs)))
        if not p.maybe(","):
            break
    p.take("]")
    p.maybe(";")
    return tuple(rows)


def serialize_graph(g):
    """Canonical text form; parse_graph(serialize_graph(g)) reproduces g."""
    out = [f"width: {g.m};"]
    for name in sorted(g.tables):
        t = g.tables[name]
        out.append(f"table {name} {{")
        out.append("  inputs: " + ", ".join(f"{p}: {ty}" for p, ty in t.inputs) + ";")
        out.append(
            "  outputs: " + ", ".join(f"{p}: {ty}" for p, ty in t.outputs) + ";"
        )
        out.append("  rows: [")
        for pred, funcs in t.rows:
            fs = ", ".join(to_text(f) for f in funcs)
            out.append(f"    ({to_text(pred)}, {fs}),")
        out.append("  ];")
        out.append("}")
    out.append("edges:")
    for (src, sport), (dst, dport) in sorted(g.edges, key=str):
        out.append(f"  {src}.{sport} -> {dst}.{dport};")
    return "\n".join(out) + "\n"
