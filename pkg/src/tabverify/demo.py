"""Built-in worked example: an 8-row, 3-table design.

A limiter DL clamps a reading `a` into a band, a threshold CT turns the
clamped value into a flag, and OP maps a separate boolean input to a code.
After the single-row transformation this yields eight tables (DL#1..#4,
CT#1, CT#2, OP#1, OP#2), which is the graph the demo session runs on.
"""

from .graphtext import parse_graph

DEMO_GRAPH_TEXT = """\
width: 16;
table DL {
  inputs: a;
  outputs: z;
  rows: [
    (a > 45, a - 20),
    (35 <= a and a <= 45, a - 5),
    (25 <= a and a < 35, a),
    (a < 25, 20),
  ];
}
table CT {
  inputs: z;
  outputs: w: bool;
  rows: [
    (z > 30, true),
    (z <= 30, false),
  ];
}
table OP {
  inputs: b: bool;
  outputs: c;
  rows: [
    (b == true, 2),
    (b == false, 3),
  ];
}
edges:
  Input.a -> DL.a;
  Input.b -> OP.b;
  DL.z -> CT.z;
  CT.w -> Output.w;
  OP.c -> Output.c;
"""

# input domains the public specification declares for test generation
DEMO_DOMAINS = {"a": list(range(0, 101)), "b": [False, True]}

# the default demo run drives these external inputs
DEMO_INPUT = {"a": 46, "b": True}

# five-slot output tuple claimed for this run by the design's documentation;
# it disagrees with the plaintext evaluator (the graph has four external
# tables and CT#2, not CT#1, fires at a=46), so it is recorded as a claim
# and never used as ground truth
DOCUMENTED_CLAIM_Y = ("True", "bot", "bot", "2", "bot")


def demo_graph():
    return parse_graph(DEMO_GRAPH_TEXT)


CHAIN_GRAPH_TEXT = """\
width: 16;
table A {
  inputs: x;
  outputs: y;
  rows: [
    (x >= 0, x + 1),
    (x < 0, 0 - x),
  ];
}
table B {
  inputs: y;
  outputs: z;
  rows: [
    (y > 10, y - 10),
    (y <= 10, y),
  ];
}
table C {
  inputs: z;
  outputs: r: bool;
  rows: [
    (z == 0, false),
    (not (z == 0), true),
  ];
}
edges:
  Input.x -> A.x;
  A.y -> B.y;
  B.z -> C.z;
  C.r -> Output.r;
"""

DIAMOND_GRAPH_TEXT = """\
width: 16;
table S {
  inputs: x;
  outputs: y;
  rows: [
    (x > 0, x),
    (x <= 0, 0 - x),
  ];
}
table L {
  inputs: y;
  outputs: u;
  rows: [
    (y > 20, y - 20),
    (y <= 20, y + 1),
  ];
}
table R {
  inputs: y;
  outputs: v;
  rows: [
    (y > 40, 1),
    (y <= 40, 2),
  ];
}
table J {
  inputs: u, v;
  outputs: w;
  rows: [
    (u > v, u - v),
    (u <= v, v - u),
  ];
}
edges:
  Input.x -> S.x;
  S.y -> L.y;
  S.y -> R.y;
  L.u -> J.u;
  R.v -> J.v;
  J.w -> Output.w;
"""


def chain_graph():
    return parse_graph(CHAIN_GRAPH_TEXT)


def diamond_graph():
    return parse_graph(DIAMOND_GRAPH_TEXT)


CHAIN_DOMAINS = {"x": list(range(-60, 61))}
DIAMOND_DOMAINS = {"x": list(range(-60, 61))}
