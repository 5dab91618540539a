import random

import pytest

from nmcprof.synth import KINDS, GeneratorSpec, generate
from nmcprof.trace import Trace, TraceEvent, validate


def make_trace(rows, word_size=4, address_bits=64):
    """Build a validated trace from dicts; seq is assigned automatically.

    Row keys: sid, op, def, use, addr, size, bb, bbi, idx.
    """
    events = []
    for seq, r in enumerate(rows):
        addr = r.get("addr")
        events.append(
            TraceEvent(
                seq=seq,
                static_id=r.get("sid", seq),
                op=r["op"],
                def_id=r.get("def"),
                uses=tuple(r.get("use", ())),
                addr=addr,
                size=r.get("size", 4 if addr is not None else None),
                bb=r.get("bb", 0),
                bbi=r.get("bbi", 0),
                idx=r.get("idx", False),
            )
        )
    return validate(Trace(tuple(events), word_size, address_bits))


def load_stream(addrs, word_size=4, size=4):
    """One load per address, each in its own block instance."""
    return make_trace(
        [{"op": "load", "addr": a, "size": size, "bb": 0, "bbi": i, "sid": 0} for i, a in enumerate(addrs)],
        word_size=word_size,
    )


_OPS = ["load", "store", "add", "sub", "mul", "cmp", "branch", "const"]


def random_trace(seed, max_events=200, static_blocks=4, value_ids=10, space=512,
                 idx_rate=0.15, word_size=4):
    """A valid trace with random structure: blocks, value reuse, aliasing memory."""
    rng = random.Random(seed)
    target = rng.randint(1, max_events)
    defined = []
    counts = {}
    rows = []
    while len(rows) < target:
        bb = rng.randrange(static_blocks)
        bbi = counts.get(bb, 0)
        counts[bb] = bbi + 1
        for _ in range(rng.randint(1, 8)):
            op = rng.choice(_OPS)
            uses = rng.sample(defined, min(len(defined), rng.randint(0, 2)))
            row = {"op": op, "use": uses, "bb": bb, "bbi": bbi, "sid": rng.randrange(20)}
            if op in ("load", "store"):
                size = rng.choice((1, 2, 4, 8))
                row["addr"] = rng.randrange(space // size) * size
                row["size"] = size
            if op not in ("store", "branch"):
                row["def"] = rng.randrange(value_ids)
                if row["def"] not in defined:
                    defined.append(row["def"])
            if op in ("add", "sub") and rng.random() < idx_rate:
                row["idx"] = True
            rows.append(row)
    return make_trace(rows, word_size=word_size)


def small_generated(seed):
    """A generated trace of random kind and small size (at most ~2000 memory accesses)."""
    rng = random.Random(seed)
    kind = rng.choice(KINDS)
    if kind == "strided_matmul":
        spec = GeneratorSpec(kind, n=rng.randint(1, 6), seed=seed)
    elif kind == "scattered_loads":
        spec = GeneratorSpec(kind, n=rng.randint(1, 60), lanes=rng.randint(1, 8), seed=seed,
                             space=rng.choice((256, 4096, 1 << 20)))
    elif kind in ("data_parallel_loop", "dependent_chain_loop"):
        spec = GeneratorSpec(kind, n=rng.randint(1, 120), body=rng.randint(6, 9), seed=seed)
    elif kind == "sequential_scan":
        spec = GeneratorSpec(kind, n=rng.randint(1, 300), passes=rng.randint(1, 3),
                             stride=rng.randint(1, 3), seed=seed)
    else:
        spec = GeneratorSpec(kind, n=rng.randint(1, 400), seed=seed,
                             space=rng.choice((256, 4096, 1 << 20)))
    return generate(spec)


@pytest.fixture
def chain3():
    return make_trace([
        {"op": "add", "def": 0},
        {"op": "add", "def": 1, "use": [0]},
        {"op": "add", "def": 2, "use": [1]},
    ])


_VERDICTS = []


def record_verdict(criterion, ok, detail):
    """Remember one acceptance line so it shows up in the terminal summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    print(line)
    _VERDICTS.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
