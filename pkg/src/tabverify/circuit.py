"""Boolean circuit IR, a compiler from row functions, and a universal
circuit with per-circuit program strings.

A circuit is a flat gate list; each gate is (left, right, tt) where tt is a
4-bit truth table indexed by (left_value << 1) | right_value. Wires 0..n-1
are inputs, wire n+j is gate j's output. Words are lists of wires, least
significant bit first.
"""

import hashlib
from dataclasses import dataclass

from .expr import Binary, Const, IfThenElse, Ref, Unary
from .tables import GraphError

TT_AND = 0b1000
TT_OR = 0b1110
TT_XOR = 0b0110
TT_XNOR = 0b1001
TT_NOT = 0b0001  # unary via (w, w): index 0 -> 1, index 3 -> 0


class CircuitError(Exception):
    pass


@dataclass(frozen=True)
class Circuit:
    n_inputs: int
    gates: tuple  # ((left, right, tt), ...)
    outputs: tuple  # wire indices

    def __post_init__(self):
        n = self.n_inputs
        for j, (l, r, tt) in enumerate(self.gates):
            if not (0 <= l < n + j and 0 <= r < n + j):
                raise CircuitError(f"gate {j} references a later wire")
            if not 0 <= tt < 16:
                raise CircuitError(f"gate {j} has invalid truth table {tt}")
        for w in self.outputs:
            if not 0 <= w < n + len(self.gates):
                raise CircuitError(f"output wire {w} out of range")
        object.__setattr__(self, "_gd", None)

    def gates_digest(self):
        if self._gd is None:
            h = hashlib.sha256()
            h.update(str(self.n_inputs).encode())
            for g in self.gates:
                h.update(b"%d,%d,%d;" % g)
            object.__setattr__(self, "_gd", h.hexdigest())
        return self._gd

    def digest(self):
        h = hashlib.sha256()
        h.update(self.gates_digest().encode())
        h.update(str(list(self.outputs)).encode())
        return h.hexdigest()

    def with_outputs(self, outputs):
        return Circuit(self.n_inputs, self.gates, tuple(outputs))

    @property
    def mult_depth(self):
        """Depth counting only nonlinear gates (the AND depth)."""
        depth = [0] * self.n_inputs
        for l, r, tt in self.gates:
            d = max(depth[l], depth[r])
            depth.append(d + (0 if tt in (TT_XOR, TT_XNOR, TT_NOT, 0, 15) else 1))
        if not self.outputs:
            return 0
        return max(depth[w] for w in self.outputs)


def simulate(c, bits):
    """Evaluate gate by gate; bits is the input vector, LSB-first per word."""
    if len(bits) != c.n_inputs:
        raise CircuitError(f"expected {c.n_inputs} input bits, got {len(bits)}")
    wires = list(bits)
    for l, r, tt in c.gates:
        wires.append((tt >> ((wires[l] << 1) | wires[r])) & 1)
    return tuple(wires[w] for w in c.outputs)


def simulate_wires(c, bits):
    """Like simulate but returns every wire value (inputs included)."""
    if len(bits) != c.n_inputs:
        raise CircuitError(f"expected {c.n_inputs} input bits, got {len(bits)}")
    wires = list(bits)
    for l, r, tt in c.gates:
        wires.append((tt >> ((wires[l] << 1) | wires[r])) & 1)
    return wires


def simulate_batch(c, columns, width):
    """Evaluate many assignments at once.

    columns[i] is an int whose bit k is input i of assignment k; returns one
    int per output wire. Python bignum bitwise ops make this fast enough for
    exhaustive sweeps.
    """
    if len(columns) != c.n_inputs:
        raise CircuitError("column count mismatch")
    mask = (1 << width) - 1
    wires = list(columns)
    for l, r, tt in c.gates:
        a, b = wires[l], wires[r]
        out = 0
        if tt & 1:
            out |= ~a & ~b
        if tt & 2:
            out |= ~a & b
        if tt & 4:
            out |= a & ~b
        if tt & 8:
            out |= a & b
        wires.append(out & mask)
    return [wires[w] & mask for w in c.outputs]


class Builder:
    """Gate-list builder with constant folding and structural sharing."""

    def __init__(self, n_inputs):
        self.n_inputs = n_inputs
        self.gates = []
        self._cache = {}
        self._const = {}  # 0/1 -> wire
        self._value = {}  # wire -> known constant
        self._not = {}  # wire -> its negation, for double-negation collapse

    def constant(self, v):
        v = int(bool(v))
        if v not in self._const:
            w = self._raw(0, 0, 15 if v else 0)
            self._const[v] = w
            self._value[w] = v
        return self._const[v]

    def _raw(self, l, r, tt):
        key = (l, r, tt)
        if key in self._cache:
            return self._cache[key]
        self.gates.append(key)
        w = self.n_inputs + len(self.gates) - 1
        self._cache[key] = w
        return w

    def gate(self, l, r, tt):
        va, vb = self._value.get(l), self._value.get(r)
        if va is not None and vb is not None:
            return self.constant((tt >> ((va << 1) | vb)) & 1)
        if va is not None:
            # unary in r: g(b) = tt at (va, b)
            g0 = (tt >> (va << 1)) & 1
            g1 = (tt >> ((va << 1) | 1)) & 1
            return self._unary(r, g0, g1)
        if vb is not None:
            g0 = (tt >> vb) & 1
            g1 = (tt >> (2 | vb)) & 1
            return self._unary(l, g0, g1)
        if l == r:
            return self._unary(l, tt & 1, (tt >> 3) & 1)
        # canonicalize symmetric operand order
        if l > r:
            l, r = r, l
            tt = (tt & 0b1001) | ((tt & 0b0100) >> 1) | ((tt & 0b0010) << 1)
        return self._raw(l, r, tt)

    def _unary(self, w, g0, g1):
        if g0 == g1:
            return self.constant(g0)
        if (g0, g1) == (0, 1):
            return w
        if w in self._not:
            return self._not[w]
        nw = self._raw(w, w, TT_NOT)
        self._not[w] = nw
        self._not[nw] = w
        return nw

    # single-bit helpers
    def and_(self, a, b):
        return self.gate(a, b, TT_AND)

    def or_(self, a, b):
        return self.gate(a, b, TT_OR)

    def xor(self, a, b):
        return self.gate(a, b, TT_XOR)

    def not_(self, a):
        return self.gate(a, a, TT_NOT)

    def mux(self, s, hi, lo):
        """3-gate multiplexer: lo xor (s and (lo xor hi))."""
        return self.xor(lo, self.and_(s, self.xor(lo, hi)))

    def and_all(self, wires):
        acc = self.constant(1)
        for w in wires:
            acc = self.and_(acc, w)
        return acc

    def or_all(self, wires):
        acc = self.constant(0)
        for w in wires:
            acc = self.or_(acc, w)
        return acc

    # word helpers, LSB-first wire lists
    def add_words(self, A, B, carry_in=None):
        carry = self.constant(0) if carry_in is None else carry_in
        out = []
        for a, b in zip(A, B):
            axb = self.xor(a, b)
            out.append(self.xor(axb, carry))
            carry = self.or_(self.and_(a, b), self.and_(carry, axb))
        return out, carry

    def sub_words(self, A, B):
        nb = [self.not_(b) for b in B]
        out, _ = self.add_words(A, nb, carry_in=self.constant(1))
        return out

    def neg_word(self, A):
        zero = [self.constant(0)] * len(A)
        return self.sub_words(zero, A)

    def mul_words(self, A, B):
        width = len(A)
        acc = [self.constant(0)] * width
        for i, b in enumerate(B):
            partial = [self.constant(0)] * i
            partial += [self.and_(a, b) for a in A[: width - i]]
            acc, _ = self.add_words(acc, partial)
        return acc

    def sign_extend(self, A, width):
        return list(A) + [A[-1]] * (width - len(A))

    def lt_signed(self, A, B):
        """A < B over two's complement: sign of (A - B) at width+1."""
        w = len(A) + 1
        d = self.sub_words(self.sign_extend(A, w), self.sign_extend(B, w))
        return d[-1]

    def eq_words(self, A, B):
        diff = [self.xor(a, b) for a, b in zip(A, B)]
        return self.not_(self.or_all(diff))

    def mux_word(self, s, HI, LO):
        return [self.mux(s, h, l) for h, l in zip(HI, LO)]

    def finish(self, outputs):
        return Circuit(self.n_inputs, tuple(self.gates), tuple(outputs))


# --- compiling expressions and row tables ------------------------------------


def _compile_expr(b, expr, env, h):
    """Return ('int', word) or ('bool', wire)."""
    if isinstance(expr, Const):
        if isinstance(expr.value, bool):
            return ("bool", b.constant(expr.value))
        bits = expr.value & ((1 << h) - 1)
        return ("int", [b.constant((bits >> i) & 1) for i in range(h)])
    if isinstance(expr, Ref):
        return env[expr.name]
    if isinstance(expr, Unary):
        t, v = _compile_expr(b, expr.operand, env, h)
        if expr.op == "not":
            return ("bool", b.not_(v))
        return ("int", b.neg_word(v))
    if isinstance(expr, Binary):
        lt, lv = _compile_expr(b, expr.left, env, h)
        rt, rv = _compile_expr(b, expr.right, env, h)
        op = expr.op
        if op == "+":
            return ("int", b.add_words(lv, rv)[0])
        if op == "-":
            return ("int", b.sub_words(lv, rv))
        if op == "*":
            return ("int", b.mul_words(lv, rv))
        if op == "<":
            return ("bool", b.lt_signed(lv, rv))
        if op == ">":
            return ("bool", b.lt_signed(rv, lv))
        if op == "<=":
            return ("bool", b.not_(b.lt_signed(rv, lv)))
        if op == ">=":
            return ("bool", b.not_(b.lt_signed(lv, rv)))
        if op == "==":
            if lt == "bool":
                return ("bool", b.gate(lv, rv, TT_XNOR))
            return ("bool", b.eq_words(lv, rv))
        if op == "and":
            return ("bool", b.and_(lv, rv))
        if op == "or":
            return ("bool", b.or_(lv, rv))
        raise CircuitError(f"unknown operator '{op}'")
    if isinstance(expr, IfThenElse):
        _, c = _compile_expr(b, expr.cond, env, h)
        tt, tv = _compile_expr(b, expr.then, env, h)
        _, ev = _compile_expr(b, expr.other, env, h)
        if tt == "bool":
            return ("bool", b.mux(c, tv, ev))
        return ("int", b.mux_word(c, tv, ev))
    raise CircuitError(f"not an expression: {expr!r}")


def compile_table(tt, m):
    """Compile a single-row table to a circuit over tagged words.

    Input: the table's input words concatenated in port order, m bits each.
    Output: the m-bit tagged result; the bot branch yields the all-zero word.
    """
    if len(tt.outputs) != 1:
        raise CircuitError(
            f"table '{tt.name}' has {len(tt.outputs)} outputs; circuits cover "
            "single-output tables"
        )
    h = m // 2
    b = Builder(len(tt.inputs) * m)
    env = {}
    tags = []
    for i, (port, ptype) in enumerate(tt.inputs):
        base = i * m
        tags.append(base)  # low bit of the tag half
        if ptype == "bool":
            env[port] = ("bool", base + h)
        else:
            env[port] = ("int", list(range(base + h, base + m)))
    ptyp, pred = _compile_expr(b, tt.pred, env, h)
    if ptyp != "bool":
        raise CircuitError(f"table '{tt.name}': predicate is not boolean")
    live = b.and_all([pred] + tags)

    otype = tt.outputs[0][1]
    ftyp, fval = _compile_expr(b, tt.funcs[0], env, h)
    if ftyp != otype:
        raise CircuitError(f"table '{tt.name}': function type mismatch")
    if otype == "bool":
        payload = [b.and_(live, fval)] + [b.constant(0)] * (h - 1)
    else:
        payload = [b.and_(live, v) for v in fval]
    tag_half = [live] + [b.constant(0)] * (h - 1)
    return b.finish(tag_half + payload)


# --- universal circuit --------------------------------------------------------


def _mux_tree(b, sels, entries):
    ents = list(entries)
    ents += [b.constant(0)] * ((1 << len(sels)) - len(ents))
    for s in sels:
        ents = [b.mux(s, ents[i + 1], ents[i]) for i in range(0, len(ents), 2)]
    return ents[0]


@dataclass(frozen=True)
class UniversalCircuit:
    """Gate-slot universal circuit: g programmable slots over a shared bus.

    The bus holds the data inputs, a constant-zero line, then each slot's
    output. A program supplies two bus selectors and a 4-bit truth table per
    slot plus one selector per output; its length depends only on
    (n_data, g, m), so equally budgeted circuits get equal-length programs.
    """

    n_data: int
    g: int
    m: int
    circuit: Circuit  # inputs: program bits then data bits

    @property
    def bus_width(self):
        return self.n_data + 1 + self.g

    @property
    def sel_bits(self):
        w, k = self.bus_width, 0
        while (1 << k) < w:
            k += 1
        return k

    @property
    def program_length(self):
        return self.g * (2 * self.sel_bits + 4) + self.m * self.sel_bits

    def projection(self, k):
        """Single-output circuit computing output bit k."""
        return self.circuit.with_outputs((self.circuit.outputs[k],))

    def assemble_input(self, program_bits, data_bits):
        if len(program_bits) != self.program_length:
            raise CircuitError("program length mismatch")
        if len(data_bits) != self.n_data:
            raise CircuitError("data width mismatch")
        return tuple(program_bits) + tuple(data_bits)


def build_universal(n_data, g, m):
    if n_data < 1 or g < 1 or m < 1:
        raise CircuitError("universal circuit budget must be positive")
    w = n_data + 1 + g
    sb = 0
    while (1 << sb) < w:
        sb += 1
    plen = g * (2 * sb + 4) + m * sb
    b = Builder(plen + n_data)

    data = list(range(plen, plen + n_data))
    bus = data + [b.constant(0)]
    pos = 0
    for _ in range(g):
        sel_l = list(range(pos, pos + sb))
        sel_r = list(range(pos + sb, pos + 2 * sb))
        ttp = list(range(pos + 2 * sb, pos + 2 * sb + 4))
        pos += 2 * sb + 4
        a = _mux_tree(b, sel_l, bus)
        c = _mux_tree(b, sel_r, bus)
        # programmable gate: pick tt bit (a << 1) | c
        hi = b.mux(c, ttp[3], ttp[2])
        lo = b.mux(c, ttp[1], ttp[0])
        bus.append(b.mux(a, hi, lo))
    outs = []
    for _ in range(m):
        sel = list(range(pos, pos + sb))
        pos += sb
        outs.append(_mux_tree(b, sel, bus))
    return UniversalCircuit(n_data=n_data, g=g, m=m, circuit=b.finish(outs))


def encode_program(c, u):
    """Program string making the universal circuit compute c."""
    if c.n_inputs > u.n_data:
        raise CircuitError(f"circuit needs {c.n_inputs} inputs, budget {u.n_data}")
    if len(c.gates) > u.g:
        raise CircuitError(f"circuit has {len(c.gates)} gates, budget {u.g}")
    if len(c.outputs) != u.m:
        raise CircuitError(f"circuit has {len(c.outputs)} outputs, budget {u.m}")
    sb = u.sel_bits
    zero_pos = u.n_data  # the constant bus line

    def bus_pos(wire, slot):
        pos = wire if wire < c.n_inputs else u.n_data + 1 + (wire - c.n_inputs)
        if wire >= c.n_inputs and wire - c.n_inputs >= slot:
            raise CircuitError("gate references a later slot")
        return pos

    def sel(pos):
        if pos >= u.bus_width:
            raise CircuitError(f"selector {pos} out of bus range")
        return [(pos >> i) & 1 for i in range(sb)]

    bits = []
    for j in range(u.g):
        if j < len(c.gates):
            l, r, tt = c.gates[j]
            bits += sel(bus_pos(l, j)) + sel(bus_pos(r, j))
            bits += [(tt >> i) & 1 for i in range(4)]
        else:
            bits += sel(zero_pos) + sel(zero_pos) + [0, 0, 0, 0]
    for w in c.outputs:
        bits += sel(bus_pos(w, len(c.gates) + 1))
    return tuple(bits)


def budget_for(circuits, n_data=None, m=None):
    """Shared (n_data, g) budget covering every circuit in the list."""
    if not circuits:
        raise CircuitError("no circuits to budget")
    nd = max(c.n_inputs for c in circuits)
    gg = max(len(c.gates) for c in circuits)
    mm = len(circuits[0].outputs)
    for c in circuits:
        if len(c.outputs) != mm:
            raise CircuitError("circuits disagree on output width")
    return (max(nd, n_data or 0), max(gg, 1), mm if m is None else m)
