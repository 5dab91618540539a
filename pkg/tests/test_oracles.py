import math

import pytest

from nmcprof import oracles

from conftest import load_stream, make_trace

inf = math.inf


def stream(letters):
    return load_stream([4 * (ord(c) - ord("A")) for c in letters])


def test_reuse_examples():
    assert oracles.oracle_reuse_distance(stream("ABA"), 4) == [inf, inf, 1]
    assert oracles.oracle_reuse_distance(stream("ABCBA"), 4) == [inf, inf, inf, 1, 2]


def test_entropy_direct():
    assert oracles.oracle_entropy(load_stream([0, 4, 8, 12]), 0) == 2.0
    with pytest.raises(ValueError):
        oracles.oracle_entropy(make_trace([{"op": "add", "def": 0}]), 0)


def test_dependencies_scan():
    t = make_trace([
        {"op": "store", "addr": 0, "size": 8},
        {"op": "add", "def": 0},
        {"op": "load", "addr": 4, "size": 4, "def": 1, "use": [0]},
    ])
    assert oracles.oracle_dependencies(t, True) == {(1, 2, "value"), (0, 2, "memory")}
    assert oracles.oracle_dependencies(t, False) == {(1, 2, "value")}


def test_schedule_relaxation():
    t = make_trace([
        {"op": "add", "def": 0},
        {"op": "mul", "def": 1, "use": [0]},
        {"op": "mul", "def": 2, "use": [0]},
        {"op": "add", "def": 3, "use": [1, 2]},
    ])
    edges = oracles.oracle_dependencies(t)
    assert oracles.oracle_schedule(t, edges, "ideal_ilp") == [1, 2, 2, 3]
    with pytest.raises(ValueError):
        oracles.oracle_schedule(t, edges, "nonsense")


def test_slq_sequential_pair():
    per_pair, total = oracles.oracle_slq(load_stream([4 * i for i in range(16)]), 8)
    assert per_pair == [(4, 8, 0.5)]
    assert total == 0.5


def test_pbblp_none_when_bookkeeping_only():
    t = make_trace([{"op": "cmp", "def": 0}, {"op": "branch", "use": [0]}])
    assert oracles.oracle_pbblp(t, oracles.oracle_dependencies(t)) == ({}, None)
