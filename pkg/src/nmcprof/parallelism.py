"""Parallelism metrics over the dynamic dependency DAG.

Three schedules are computed, all with unit latency and unlimited
resources:

* ``ideal_ilp``: every instruction issues one cycle after its latest producer.
* ``bblp_real``: block instances are atomic sequential tasks; an instance
  starts after every instance it depends on has finished.
* ``bblp_smart``: as ``bblp_real`` but ignoring edges out of loop-index
  updates.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .memory import MetricUndefined
from .trace import MEMORY_OPS, DependencyGraph, Trace

IDEAL = "ideal_ilp"
BBLP_REAL = "bblp_real"
BBLP_SMART = "bblp_smart"


@dataclass(frozen=True)
class ScheduleResult:
    regime: str
    issue_cycle: np.ndarray
    max_issue_cycle: int


def _result(regime: str, cycles) -> ScheduleResult:
    arr = np.asarray(cycles, dtype=np.int64)
    arr.setflags(write=False)
    return ScheduleResult(regime, arr, int(arr.max()) if arr.size else 0)


def schedule_ideal(trace: Trace, deps: DependencyGraph) -> ScheduleResult:
    cycles = [0] * len(trace)
    for c, prods in enumerate(deps.producers()):
        if not prods:
            cycles[c] = 1
        elif len(prods) == 1:
            cycles[c] = cycles[prods[0]] + 1
        else:
            cycles[c] = max([cycles[p] for p in prods]) + 1
    return _result(IDEAL, cycles)


def schedule_bblp(trace: Trace, deps: DependencyGraph, smart: bool = False) -> ScheduleResult:
    producers = deps.producers(skip_index_updates=smart)
    finish = []
    inst_of = trace.instance_of.tolist()
    cycles = np.empty(len(trace), dtype=np.int64)
    for inst in trace.instances:
        start = 1
        s = inst.start
        for t in range(s, inst.stop):
            for p in producers[t]:
                if p < s:
                    f = finish[inst_of[p]] + 1
                    if f > start:
                        start = f
        n = inst.stop - s
        cycles[s:inst.stop] = np.arange(start, start + n)
        finish.append(start + n - 1)
    return _result(BBLP_SMART if smart else BBLP_REAL, cycles)


def _require(sched: ScheduleResult, trace: Trace, *regimes: str) -> None:
    if sched.regime not in regimes:
        raise ValueError(f"expected a {' or '.join(regimes)} schedule, got {sched.regime}")
    if not len(trace):
        raise MetricUndefined("trace is empty")


def ilp_total(sched: ScheduleResult, trace: Trace) -> float:
    _require(sched, trace, IDEAL)
    return len(trace) / sched.max_issue_cycle


def _op_codes(trace: Trace):
    names = sorted({e.op for e in trace.events})
    index = {n: i for i, n in enumerate(names)}
    codes = np.fromiter((index[e.op] for e in trace.events), dtype=np.int64, count=len(trace))
    return names, codes


def _cycles_per_op(sched: ScheduleResult, codes: np.ndarray, n_ops: int) -> np.ndarray:
    """Number of distinct issue cycles each opcode occupies."""
    keys = np.unique(codes * (sched.max_issue_cycle + 1) + sched.issue_cycle)
    return np.bincount(keys // (sched.max_issue_cycle + 1), minlength=n_ops)


def ilp_specialized_all(sched: ScheduleResult, trace: Trace) -> dict:
    """Same-opcode instructions per cycle in which that opcode issues, per opcode."""
    _require(sched, trace, IDEAL)
    names, codes = _op_codes(trace)
    counts = np.bincount(codes, minlength=len(names))
    occupied = _cycles_per_op(sched, codes, len(names))
    return {n: float(counts[i] / occupied[i]) for i, n in enumerate(names)}


def ilp_specialized(sched: ScheduleResult, trace: Trace, opcode: str) -> float:
    _require(sched, trace, IDEAL)
    mask = np.fromiter((e.op == opcode for e in trace.events), dtype=bool, count=len(trace))
    n = int(mask.sum())
    if not n:
        raise MetricUndefined(f"no {opcode} instructions in trace")
    return n / np.unique(sched.issue_cycle[mask]).size


def _consecutive_runs(sched: ScheduleResult, trace: Trace, opcode: str) -> int:
    """Total maximal address-consecutive runs of ``opcode`` accesses over all cycles."""
    evs = [e for e in trace.memory_events if e.op == opcode]
    if not evs:
        return 0
    seqs = np.fromiter((e.seq for e in evs), dtype=np.int64, count=len(evs))
    addr = np.fromiter((e.addr for e in evs), dtype=np.uint64, count=len(evs))
    size = np.fromiter((e.size for e in evs), dtype=np.uint64, count=len(evs))
    cyc = sched.issue_cycle[seqs]
    order = np.lexsort((size, addr, cyc))
    cyc, addr, size = cyc[order], addr[order], size[order]
    same_cycle = cyc[1:] == cyc[:-1]
    adjacent = addr[1:] == addr[:-1] + size[:-1]
    return int(1 + np.count_nonzero(~(same_cycle & adjacent)))


def dlp(sched: ScheduleResult, trace: Trace, consecutiveness: bool = False) -> float:
    """Opcode-frequency weighted specialized ILP.

    With ``consecutiveness`` the load/store terms count address-consecutive
    runs per cycle instead of cycles, so only vectorisable groups score.
    """
    _require(sched, trace, IDEAL)
    names, codes = _op_codes(trace)
    counts = np.bincount(codes, minlength=len(names))
    groups = _cycles_per_op(sched, codes, len(names)).astype(np.float64)
    if consecutiveness:
        for i, name in enumerate(names):
            if name in MEMORY_OPS:
                groups[i] = _consecutive_runs(sched, trace, name)
    # sum(c_i^2 / g_i) / n keeps rounding monotone, so the result is never below 1
    return float(sum(float(counts[i]) ** 2 / groups[i] for i in range(len(names))) / len(trace))


def bblp(sched: ScheduleResult, trace: Trace) -> float:
    _require(sched, trace, BBLP_REAL, BBLP_SMART)
    return len(trace) / sched.max_issue_cycle


def _eligible_blocks(trace: Trace) -> dict:
    """Static block -> instance indices, minus blocks that only do index bookkeeping."""
    by_block = defaultdict(list)
    for i, inst in enumerate(trace.instances):
        by_block[inst.bb].append(i)
    bookkeeping = {}
    for inst in trace.instances:
        if bookkeeping.get(inst.bb, True):
            bookkeeping[inst.bb] = all(
                e.idx or e.op in ("cmp", "branch") for e in trace.events[inst.start:inst.stop]
            )
    return {bb: idx for bb, idx in by_block.items() if not bookkeeping[bb]}


def _longest_instance_chain(trace: Trace, producers: list, members: list) -> int:
    """Longest chain of dependent instances among ``members`` (one static block).

    ``best[t]`` is the deepest chain ending in a member instance that
    reaches event ``t`` through any sequence of events.
    """
    instances = trace.instances
    member = set(members)
    first = instances[members[0]].start
    last = instances[members[-1]].stop
    best = [0] * (last - first)
    longest = 0
    for i in range(members[0], members[-1] + 1):
        inst = instances[i]
        s, stop = inst.start, inst.stop
        if i in member:
            chain = 0
            for t in range(s, stop):
                for p in producers[t]:
                    if first <= p < s and best[p - first] > chain:
                        chain = best[p - first]
            chain += 1
            for t in range(s - first, stop - first):
                best[t] = chain
            if chain > longest:
                longest = chain
        else:
            for t in range(s, stop):
                m = 0
                for p in producers[t]:
                    if p >= first and best[p - first] > m:
                        m = best[p - first]
                best[t - first] = m
    return longest


def pbblp(trace: Trace, deps: DependencyGraph) -> tuple[dict, float]:
    """Potential block-level parallelism: per-block ``#instances / longest chain``
    and its instance-weighted average."""
    blocks = _eligible_blocks(trace)
    if not blocks:
        raise MetricUndefined("no basic blocks beyond index bookkeeping")
    producers = deps.producers(skip_index_updates=True)
    per_block = {}
    for bb in sorted(blocks):
        members = blocks[bb]
        per_block[bb] = len(members) / _longest_instance_chain(trace, producers, members)
    total = sum(len(m) for m in blocks.values())
    avg = sum(per_block[bb] * len(blocks[bb]) for bb in per_block) / total
    return per_block, avg


@dataclass(frozen=True)
class ParallelismReport:
    ilp_total: Optional[float] = None
    ilp_specialized: dict = field(default_factory=dict)
    dlp1: Optional[float] = None
    dlp2: Optional[float] = None
    bblp_real: Optional[float] = None
    bblp_smart: Optional[float] = None
    pbblp: Optional[float] = None
    per_block_pbblp: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ilp_total": self.ilp_total,
            "ilp_specialized": dict(self.ilp_specialized),
            "dlp1": self.dlp1,
            "dlp2": self.dlp2,
            "bblp_real": self.bblp_real,
            "bblp_smart": self.bblp_smart,
            "pbblp": self.pbblp,
            # JSON object keys are strings
            "per_block_pbblp": {str(k): v for k, v in self.per_block_pbblp.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParallelismReport":
        return cls(
            d["ilp_total"], dict(d["ilp_specialized"]), d["dlp1"], d["dlp2"],
            d["bblp_real"], d["bblp_smart"], d["pbblp"],
            {int(k): v for k, v in d["per_block_pbblp"].items()},
        )


def analyze_parallelism(trace: Trace, deps: DependencyGraph) -> tuple[ParallelismReport, dict]:
    """All parallelism scores; returns the report and ``{field: reason}`` for undefined ones."""
    if not len(trace):
        return ParallelismReport(), {"parallelism": "trace is empty"}
    undefined = {}
    ideal = schedule_ideal(trace, deps)
    real = schedule_bblp(trace, deps, smart=False)
    smart = schedule_bblp(trace, deps, smart=True)
    try:
        per_block, avg = pbblp(trace, deps)
    except MetricUndefined as exc:
        per_block, avg = {}, None
        undefined["parallelism.pbblp"] = exc.reason
    report = ParallelismReport(
        ilp_total=ilp_total(ideal, trace),
        ilp_specialized=ilp_specialized_all(ideal, trace),
        dlp1=dlp(ideal, trace, consecutiveness=False),
        dlp2=dlp(ideal, trace, consecutiveness=True),
        bblp_real=bblp(real, trace),
        bblp_smart=bblp(smart, trace),
        pbblp=avg,
        per_block_pbblp=per_block,
    )
    return report, undefined
