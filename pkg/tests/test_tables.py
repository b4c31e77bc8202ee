import pytest

from tabverify.demo import (
    DEMO_DOMAINS,
    chain_graph,
    demo_graph,
    diamond_graph,
)
from tabverify.expr import parse_expr
from tabverify.graphtext import parse_graph, serialize_graph
from tabverify.tables import (
    BOT,
    GraphError,
    Tagged,
    bits_to_int,
    bits_to_tagged,
    check_properties,
    consistent_order,
    evaluate_original,
    evaluate_plain,
    int_to_bits,
    tagged_to_bits,
    transform,
)


def test_bit_round_trip():
    for v in range(-128, 128):
        assert bits_to_int(int_to_bits(v, 8)) == v


def test_tagged_encoding():
    m = 16
    word = tagged_to_bits(Tagged(True, 26), m)
    assert len(word) == m
    assert word[:8] == (1, 0, 0, 0, 0, 0, 0, 0)
    assert bits_to_int(word[8:]) == 26
    assert bits_to_tagged(word) == Tagged(True, 26)
    assert tagged_to_bits(BOT, m) == (0,) * m
    assert bits_to_tagged((0,) * m) == BOT


def test_tagged_bool_payload():
    word = tagged_to_bits(Tagged(True, True), 16)
    assert bits_to_tagged(word, "bool") == Tagged(True, True)
    assert bits_to_tagged(tagged_to_bits(Tagged(True, False), 16), "bool") == Tagged(
        True, False
    )


def test_bot_payload_must_be_zero():
    with pytest.raises(ValueError):
        Tagged(False, 3)


def test_parse_demo_graph():
    g = demo_graph()
    assert set(g.tables) == {"DL", "CT", "OP"}
    assert len(g.tables["DL"].rows) == 4
    pred, funcs = g.tables["DL"].rows[0]
    assert pred == parse_expr("a > 45")
    assert funcs == (parse_expr("a - 20"),)
    assert dict(g.external_inputs) == {"a": "int", "b": "bool"}


def test_parse_errors():
    with pytest.raises(GraphError, match="no tables"):
        parse_graph("edges:\n")
    with pytest.raises(GraphError, match="cycle"):
        parse_graph(
            """
            table T1 { inputs: x; outputs: y; rows: [(true, x)]; }
            table T2 { inputs: y; outputs: x; rows: [(true, y)]; }
            edges:
              T1.y -> T2.y;
              T2.x -> T1.x;
            """
        )
    with pytest.raises(GraphError, match="duplicate"):
        parse_graph(
            """
            table T { inputs: x; rows: [(true, x)]; }
            table T { inputs: x; rows: [(true, x)]; }
            edges:
              Input.x -> T.x;
            """
        )
    with pytest.raises(GraphError, match="dangling|unknown"):
        parse_graph(
            """
            table T { inputs: x; rows: [(true, x)]; }
            edges:
              Input.x -> T.x;
              Nope.y -> T.x;
            """
        )
    with pytest.raises(GraphError, match="undeclared|unknown input reference"):
        parse_graph(
            """
            table T { inputs: x; rows: [(y > 0, x)]; }
            edges:
              Input.x -> T.x;
            """
        )


def test_serialize_round_trip():
    for g in (demo_graph(), chain_graph(), diamond_graph()):
        g2 = parse_graph(serialize_graph(g))
        assert set(g2.tables) == set(g.tables)
        for name in g.tables:
            assert g2.tables[name] == g.tables[name]
        assert sorted(g2.edges, key=str) == sorted(g.edges, key=str)
        assert g2.m == g.m


def test_check_properties_demo_complete_disjoint():
    g = demo_graph()
    rep = check_properties(g.tables["DL"], {"a": list(range(0, 101))})
    assert rep.mode == "exhaustive"
    assert rep.complete and rep.disjoint
    rep = check_properties(g.tables["CT"], {"z": list(range(-128, 128))})
    assert rep.complete and rep.disjoint
    rep = check_properties(g.tables["OP"], {"b": [False, True]})
    assert rep.complete and rep.disjoint


def test_check_properties_violations():
    g = parse_graph(
        """
        table T { inputs: a; rows: [(a > 10, a), (a > 20, a)]; }
        edges:
          Input.a -> T.a;
          T.out -> Output.out;
        """
    )
    rep = check_properties(g.tables["T"], {"a": list(range(0, 40))})
    assert not rep.complete  # a <= 10 hits no row
    assert not rep.disjoint  # a = 30 hits both
    assert any(env["a"] <= 10 for env in rep.completeness_witnesses)
    assert any(env["a"] > 20 for env, _ in rep.disjointness_witnesses)


def test_check_properties_sampled_mode():
    g = parse_graph(
        """
        table T { inputs: a, b, c; rows: [(a + b + c > 0, a), (a + b + c <= 0, b)]; }
        edges:
          Input.a -> T.a;
          Input.b -> T.b;
          Input.c -> T.c;
          T.out -> Output.out;
        """
    )
    big = list(range(-128, 128))
    rep = check_properties(g.tables["T"], {"a": big, "b": big, "c": big})
    assert rep.mode == "sampled"
    assert rep.complete and rep.disjoint


def test_transform_demo_shape():
    tg = transform(demo_graph())
    assert set(tg.tables) == {
        "DL#1",
        "DL#2",
        "DL#3",
        "DL#4",
        "CT#1",
        "CT#2",
        "OP#1",
        "OP#2",
    }
    for tt in tg.tables.values():
        assert len(tt.funcs) == 1
    # sibling rows all feed the threshold tables
    assert sorted(src for src, _ in tg.producers[("CT#1", "z")]) == [
        "DL#1",
        "DL#2",
        "DL#3",
        "DL#4",
    ]
    assert ("OP#1", "c") in tg.external_outputs
    assert ("CT#2", "w") in tg.external_outputs


def test_levels_and_consistent_order():
    tg = transform(demo_graph())
    order = consistent_order(tg)
    pos = {n: i for i, n in enumerate(order)}
    for k in range(1, 5):
        assert pos[f"DL#{k}"] < pos["CT#1"]
        assert pos[f"DL#{k}"] < pos["CT#2"]
    assert tg.levels["DL#1"] == 1
    assert tg.levels["CT#1"] == 2
    assert tg.levels["OP#1"] == 1
    levels = [tg.levels[n] for n in order]
    assert levels == sorted(levels)


def test_chain_order():
    tg = transform(chain_graph())
    order = consistent_order(tg)
    pos = {n: i for i, n in enumerate(order)}
    assert pos["A#1"] < pos["B#1"] < pos["C#1"]


def test_structure_graph_is_anonymous():
    tg = transform(demo_graph())
    struc = tg.structure_graph()
    assert "Input" in struc["nodes"] and "Output" in struc["nodes"]
    # no table names or port names leak
    flat = str(struc)
    for name in ("DL", "CT", "OP", "#"):
        assert name not in flat.replace("Input", "").replace("Output", "")


def test_single_row_transform_semantics():
    tg = transform(demo_graph())
    _, trace = evaluate_plain(tg, {"a": 46, "b": True})
    assert trace["DL#1"]["outputs"]["z"] == Tagged(True, 26)
    for k in (2, 3, 4):
        assert trace[f"DL#{k}"]["outputs"]["z"] == BOT


def test_demo_evaluation_a46():
    tg = transform(demo_graph())
    outputs, trace = evaluate_plain(tg, {"a": 46, "b": True})
    # z = 26 is not above the threshold, so CT row 2 fires
    assert outputs["CT#1"] == BOT
    assert outputs["CT#2"] == Tagged(True, False)
    assert outputs["OP#1"] == Tagged(True, 2)
    assert outputs["OP#2"] == BOT
    assert trace["CT#1"]["inputs"]["z"] == Tagged(True, 26)


def test_demo_evaluation_b_true():
    tg = transform(demo_graph())
    outputs, _ = evaluate_plain(tg, {"a": 50, "b": True})
    assert outputs["OP#1"] == Tagged(True, 2)
    assert outputs["OP#2"] == BOT


def test_demo_evaluation_high_z():
    tg = transform(demo_graph())
    outputs, _ = evaluate_plain(tg, {"a": 60, "b": False})
    # z = 40 > 30
    assert outputs["CT#1"] == Tagged(True, True)
    assert outputs["CT#2"] == BOT
    assert outputs["OP#1"] == BOT
    assert outputs["OP#2"] == Tagged(True, 3)


def test_null_propagation():
    g = parse_graph(
        """
        table P { inputs: a; outputs: y; rows: [(a > 0, a)]; }
        table Q { inputs: y; outputs: z; rows: [(true, y + 1)]; }
        edges:
          Input.a -> P.a;
          P.y -> Q.y;
          Q.z -> Output.z;
        """
    )
    tg = transform(g)
    outputs, trace = evaluate_plain(tg, {"a": -3})
    # P's only row misses, its bot output makes Q null
    assert trace["P#1"]["outputs"]["y"] == BOT
    assert outputs["Q#1"] is None


def test_evaluate_plain_deterministic():
    tg = transform(diamond_graph())
    a = evaluate_plain(tg, {"x": 33})
    b = evaluate_plain(tg, {"x": 33})
    assert a == b


def test_missing_external_input():
    tg = transform(demo_graph())
    with pytest.raises(GraphError):
        evaluate_plain(tg, {"a": 1})


def test_transform_matches_original_evaluation():
    cases = [
        (demo_graph(), [{"a": a, "b": b} for a in range(0, 101, 7) for b in (False, True)]),
        (chain_graph(), [{"x": x} for x in range(-60, 61, 5)]),
        (diamond_graph(), [{"x": x} for x in range(-60, 61, 5)]),
    ]
    for g, inputs in cases:
        tg = transform(g)
        for X in inputs:
            outputs, _ = evaluate_plain(tg, X)
            ref = evaluate_original(g, X)
            for (tname, port) in tg.external_outputs:
                tt = tg.tables[tname]
                got = outputs[tname]
                want = ref[tt.origin][port]
                if got is not None and got.tag:
                    assert got.payload == want
    # at least one case exercised per graph
    assert all(inputs for _, inputs in cases)


def test_exactly_one_top_among_siblings():
    tg = transform(demo_graph())
    for a in range(0, 101, 3):
        _, trace = evaluate_plain(tg, {"a": a, "b": bool(a % 2)})
        tops = [
            k for k in range(1, 5) if trace[f"DL#{k}"]["outputs"]["z"].tag
        ]
        assert len(tops) == 1


def test_constant_width_overflow():
    with pytest.raises(GraphError, match="payload width"):
        parse_graph(
            """
            table T { inputs: a; rows: [(a > 200, a)]; }
            edges:
              Input.a -> T.a;
              T.out -> Output.out;
            """
        )
