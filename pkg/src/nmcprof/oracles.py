"""Brute-force reference implementations.

Deliberately naive and independent of the fast engine: nothing here
imports from ``memory`` or ``parallelism``, and dependencies are
recomputed by scanning the trace.  Meant for traces of a few thousand
events.
"""
from __future__ import annotations

import math
from collections import Counter

from .trace import Trace

INF = math.inf


def oracle_dependencies(trace: Trace, include_memory_deps: bool = False) -> set:
    """``{(producer, consumer, kind)}`` found by scanning backwards from every use."""
    events = trace.events
    edges = set()
    for e in events:
        for u in e.uses:
            for p in range(e.seq - 1, -1, -1):
                if events[p].def_id == u:
                    edges.add((p, e.seq, "value"))
                    break
        if include_memory_deps and e.op == "load":
            pending = set(range(e.addr, e.addr + e.size))
            for p in range(e.seq - 1, -1, -1):
                if not pending:
                    break
                s = events[p]
                if s.op != "store":
                    continue
                hit = pending.intersection(range(s.addr, s.addr + s.size))
                if hit:
                    edges.add((p, e.seq, "memory"))
                    pending -= hit
    return edges


def oracle_reuse_distance(trace: Trace, line_size: int) -> list:
    lines = [e.addr // line_size for e in trace.events if e.op in ("load", "store")]
    seen = set()
    out = []
    for t, x in enumerate(lines):
        if x not in seen:
            out.append(INF)
            seen.add(x)
            continue
        p = t - 1
        while lines[p] != x:
            p -= 1
        out.append(len(set(lines[p + 1:t])))
    return out


def oracle_entropy(trace: Trace, k: int) -> float:
    counts = Counter(e.addr >> k for e in trace.events if e.op in ("load", "store"))
    n = sum(counts.values())
    if n == 0:
        raise ValueError("no memory accesses")
    h = 0.0
    for c in counts.values():
        p = c / n
        h -= p * math.log2(p)
    return h


def _bin(d) -> float:
    if d == INF:
        return INF
    b = 0
    while (1 << b) <= d:
        b += 1
    return b


def oracle_slq(trace: Trace, max_line: int, word_size: int | None = None):
    """``(per_pair, total)``: per pair, the fraction of accesses whose bin drops."""
    word = word_size or trace.word_size
    pairs = []
    b = word
    while 2 * b <= max_line:
        pairs.append(b)
        b *= 2
    per_pair = []
    num = den = 0.0
    for b in pairs:
        small = [_bin(d) for d in oracle_reuse_distance(trace, b)]
        large = [_bin(d) for d in oracle_reuse_distance(trace, 2 * b)]
        dropped = sum(1 for x, y in zip(small, large) if y < x)
        score = dropped / len(small)
        beta = math.log2(b / word) + 1
        num += score * 2 ** -beta
        den += 2 ** -beta
        per_pair.append((b, 2 * b, score))
    return per_pair, num / den


def _instance_keys(trace: Trace) -> list:
    return [(e.bb, e.bbi) for e in trace.events]


def oracle_schedule(trace: Trace, edges, regime: str) -> list:
    """Issue cycle per event by relaxing every edge until nothing changes."""
    edges = sorted((p, c) for p, c, _ in edges)
    n = len(trace.events)
    if regime == "ideal_ilp":
        cycle = [1] * n
        changed = True
        while changed:
            changed = False
            for p, c in edges:
                if cycle[c] < cycle[p] + 1:
                    cycle[c] = cycle[p] + 1
                    changed = True
        return cycle

    smart = regime == "bblp_smart"
    if regime not in ("bblp_real", "bblp_smart"):
        raise ValueError(regime)
    keys = _instance_keys(trace)
    length = Counter(keys)
    first = {}
    for seq, k in enumerate(keys):
        first.setdefault(k, seq)
    # visiting producers in trace order lets most traces settle in one sweep
    inst_edges = sorted(
        {
            (keys[p], keys[c])
            for p, c in edges
            if keys[p] != keys[c] and not (smart and trace.events[p].idx)
        },
        key=lambda uv: (first[uv[0]], first[uv[1]]),
    )
    start = {k: 1 for k in length}
    changed = True
    while changed:
        changed = False
        for u, v in inst_edges:
            need = start[u] + length[u]
            if start[v] < need:
                start[v] = need
                changed = True
    offset = Counter()
    cycle = []
    for k in keys:
        cycle.append(start[k] + offset[k])
        offset[k] += 1
    return cycle


def oracle_ilp_specialized(trace: Trace, cycles: list) -> dict:
    groups = {}
    for e in trace.events:
        groups.setdefault(e.op, []).append(cycles[e.seq])
    return {op: len(cs) / len(set(cs)) for op, cs in groups.items()}


def oracle_dlp(trace: Trace, cycles: list, consecutiveness: bool) -> float:
    n = len(trace.events)
    by_op = {}
    for e in trace.events:
        by_op.setdefault(e.op, {}).setdefault(cycles[e.seq], []).append(e)
    total = 0.0
    for op, per_cycle in by_op.items():
        count = sum(len(v) for v in per_cycle.values())
        if consecutiveness and op in ("load", "store"):
            groups = 0
            for evs in per_cycle.values():
                accs = sorted((e.addr, e.size) for e in evs)
                groups += 1
                for (a0, s0), (a1, _) in zip(accs, accs[1:]):
                    if a1 != a0 + s0:
                        groups += 1
        else:
            groups = len(per_cycle)
        total += (count / groups) * (count / n)
    return total


def oracle_pbblp(trace: Trace, edges):
    """Per-block ``#instances / longest chain`` via explicit reachability search."""
    events = trace.events
    succ = {}
    for p, c, _ in edges:
        if not events[p].idx:
            succ.setdefault(p, set()).add(c)
    keys = _instance_keys(trace)
    members = {}
    for k in dict.fromkeys(keys):
        members.setdefault(k[0], []).append(k)
    inst_events = {}
    for e in events:
        inst_events.setdefault((e.bb, e.bbi), []).append(e.seq)

    def bookkeeping(bb):
        return all(
            events[s].idx or events[s].op in ("cmp", "branch")
            for k in members[bb] for s in inst_events[k]
        )

    per_block = {}
    weights = {}
    for bb, insts in members.items():
        if bookkeeping(bb):
            continue
        reach = {}
        for u in insts:
            stack = list(inst_events[u])
            seen = set(stack)
            while stack:
                x = stack.pop()
                for y in succ.get(x, ()):
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            reach[u] = {keys[s] for s in seen if keys[s][0] == bb} - {u}
        # reachability only points forward in trace order
        depth = {}
        for u in reversed(insts):
            depth[u] = 1 + max((depth[v] for v in reach[u]), default=0)
        longest = max(depth.values())
        per_block[bb] = len(insts) / longest
        weights[bb] = len(insts)
    if not per_block:
        return {}, None
    avg = sum(per_block[b] * weights[b] for b in per_block) / sum(weights.values())
    return dict(sorted(per_block.items())), avg
