import io
import json

import pytest
from hypothesis import given, settings, strategies as st

from nmcprof.synth import GeneratorSpec, generate
from nmcprof.trace import (
    IngestOptions,
    Trace,
    TraceError,
    build_dependency_graph,
    ingest,
    loads_trace,
    serialize,
    tag_index_updates,
)

from conftest import make_trace, random_trace, small_generated


def line(**kw):
    base = {"seq": 0, "sid": 0, "op": "add", "def": None, "use": [], "addr": None,
            "size": None, "bb": 0, "bbi": 0, "idx": False}
    base.update(kw)
    return json.dumps(base)


def test_empty_stream():
    t = ingest(io.StringIO(""))
    assert len(t) == 0
    assert t.word_size == 4 and t.address_bits == 64


def test_single_load_without_header():
    t = ingest([line(op="load", addr="0x10", size=4, **{"def": 1})])
    assert len(t) == 1
    assert t.events[0].mem == (0x10, 4)


def test_header_sets_geometry():
    text = '{"word_size": 8, "address_bits": 32}\n' + line(op="load", addr="0xff", size=8) + "\n"
    t = loads_trace(text)
    assert (t.word_size, t.address_bits) == (8, 32)


def test_bytes_stream():
    t = ingest(io.BytesIO((line() + "\n").encode()))
    assert len(t) == 1


@pytest.mark.parametrize(
    "lines, fragment, lineno",
    [
        ([line(addr="0x10", size=4)], "mem on non-memory opcode", 1),
        ([line(), "{not json"], "malformed line", 2),
        ([line(use=[3])], "dangling use", 1),
        ([line(), line(seq=2)], "non-monotone seq", 2),
        ([line(seq=1)], "non-monotone seq", 1),
        ([line(op="load")], "load without a memory access", 1),
        ([line(op="load", addr="0x10", size=3)], "access size", 1),
        ([line(op="store", addr="0x10", size=4, extra=1)], "unknown field", 1),
        ([line(), line(seq=1, bb=1), line(seq=2)], "not contiguous", 3),
        (['{"word_size": 3}'], "power of two", 1),
        ([line(op="load", addr="12", size=4)], "hex string", 1),
    ],
)
def test_ingest_errors(lines, fragment, lineno):
    with pytest.raises(TraceError) as info:
        ingest(lines)
    assert fragment in str(info.value)
    assert info.value.line == lineno


def test_address_must_fit():
    text = '{"word_size": 4, "address_bits": 8}\n' + line(op="load", addr="0x100", size=4)
    with pytest.raises(TraceError, match="address space"):
        loads_trace(text)


def test_error_carries_source():
    with pytest.raises(TraceError, match=r"^f\.jsonl:1: "):
        ingest([line(use=[9])], IngestOptions(source="f.jsonl"))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_round_trip(seed):
    t = random_trace(seed)
    assert loads_trace(serialize(t)) == t
    assert serialize(loads_trace(serialize(t))) == serialize(t)


def test_round_trip_generated():
    for seed in range(14):
        t = small_generated(seed)
        assert loads_trace(serialize(t)) == t


# -- dependency graph ------------------------------------------------------


def test_linear_chain(chain3):
    g = build_dependency_graph(chain3)
    assert {(e.producer, e.consumer) for e in g.edges} == {(0, 1), (1, 2)}


def test_redefinition_uses_latest_def():
    t = make_trace([
        {"op": "add", "def": 0},
        {"op": "add", "def": 0},
        {"op": "mul", "def": 1, "use": [0, 0]},
    ])
    assert {(e.producer, e.consumer) for e in build_dependency_graph(t).edges} == {(1, 2)}


def _store_load(load_addr, load_size=4):
    return make_trace([
        {"op": "store", "addr": 0x10, "size": 4},
        {"op": "load", "addr": load_addr, "size": load_size, "def": 0},
    ])


def test_store_load_alias():
    g = build_dependency_graph(_store_load(0x10), include_memory_deps=True)
    assert [(e.producer, e.consumer, e.kind) for e in g.edges] == [(0, 1, "memory")]


def test_store_load_disjoint():
    assert not build_dependency_graph(_store_load(0x20), include_memory_deps=True).edges


def test_partial_overlap_and_shadowing():
    t = make_trace([
        {"op": "store", "addr": 0, "size": 8},
        {"op": "store", "addr": 0, "size": 4},
        {"op": "load", "addr": 0, "size": 8, "def": 0},
        {"op": "load", "addr": 0, "size": 4, "def": 1},
    ])
    mem = {(e.producer, e.consumer) for e in build_dependency_graph(t, True).edges}
    # bytes 4..7 still come from the first store; bytes 0..3 were overwritten
    assert mem == {(0, 2), (1, 2), (1, 3)}


def test_memory_edges_off_by_default():
    assert not build_dependency_graph(_store_load(0x10)).edges


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_graph_forward_and_deterministic(seed):
    t = random_trace(seed)
    g = build_dependency_graph(t, include_memory_deps=True)
    assert all(e.producer < e.consumer for e in g.edges)
    assert g.edges == build_dependency_graph(t, include_memory_deps=True).edges
    assert {e for e in g.edges if e.kind == "value"} == build_dependency_graph(t).edges
    assert g.index_update_edges == {e for e in g.edges if t.events[e.producer].idx}


# -- index tagging ---------------------------------------------------------


def _loop(iterations, escape=False):
    rows = []
    for i in range(iterations):
        rows += [
            {"op": "load", "addr": 0x100 + 4 * i, "def": 1, "use": [0] if i else [], "sid": 1, "bb": 1, "bbi": i},
            {"op": "add", "def": 0, "use": [0] if i else [], "sid": 2, "bb": 1, "bbi": i},
            {"op": "cmp", "def": 3, "use": [0], "sid": 3, "bb": 1, "bbi": i},
            {"op": "branch", "use": [3], "sid": 4, "bb": 1, "bbi": i},
        ]
    if not escape:
        for r in rows:
            if r["op"] == "load":
                r["use"] = []
    return make_trace(rows)


def test_tag_canonical_induction():
    t = tag_index_updates(_loop(3))
    assert [e.seq for e in t.events if e.idx] == [1, 5, 9]


def test_tag_escaping_value_not_flagged():
    # the index also feeds the next iteration's load address
    t = tag_index_updates(_loop(3, escape=True))
    assert [e.seq for e in t.events if e.idx] == [9]


def test_tag_store_address_not_flagged():
    t = make_trace([
        {"op": "add", "def": 0},
        {"op": "store", "addr": 0x40, "use": [0]},
    ])
    assert not any(e.idx for e in tag_index_updates(t).events)


def test_tag_keeps_existing_flags():
    t = generate(GeneratorSpec("data_parallel_loop", n=4))
    assert tag_index_updates(t) == t


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_tag_idempotent(seed):
    t = random_trace(seed, idx_rate=0.0)
    once = tag_index_updates(t)
    assert tag_index_updates(once) == once
    assert all(a.idx <= b.idx for a, b in zip(t.events, once.events))


def test_instances_contiguous_ranges():
    t = _loop(3)
    assert [(i.start, i.stop, i.bbi) for i in t.instances] == [(0, 4, 0), (4, 8, 1), (8, 12, 2)]
    assert list(t.instance_of) == [0] * 4 + [1] * 4 + [2] * 4
