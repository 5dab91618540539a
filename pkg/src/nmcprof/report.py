"""Report assembly and serialization (JSON / CSV)."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Optional

from . import oracles
from .memory import (
    EntropyReport,
    MetricUndefined,
    ReuseSignature,
    SpatialLocalityReport,
    entropy_sweep,
    line_size_pairs,
    spatial_locality,
)
from .parallelism import ParallelismReport, analyze_parallelism
from .trace import Trace, build_dependency_graph, load_trace, tag_index_updates

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AnalysisConfig:
    word_size: Optional[int] = None  # None: take it from the trace header
    max_line_size: int = 64
    k_max: int = 16
    memory_deps: bool = False


@dataclass
class MetricsReport:
    config: dict
    trace_meta: dict
    entropy: Optional[EntropyReport] = None
    reuse_signatures: list = field(default_factory=list)
    spatial_locality: Optional[SpatialLocalityReport] = None
    parallelism: Optional[ParallelismReport] = None
    undefined: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": dict(self.config),
            "trace_meta": dict(self.trace_meta),
            "entropy": self.entropy.to_dict() if self.entropy else None,
            "reuse_signatures": [s.to_dict() for s in self.reuse_signatures],
            "spatial_locality": self.spatial_locality.to_dict() if self.spatial_locality else None,
            "parallelism": self.parallelism.to_dict() if self.parallelism else None,
            "undefined": dict(self.undefined),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        return cls(
            config=d["config"],
            trace_meta=d["trace_meta"],
            entropy=EntropyReport.from_dict(d["entropy"]) if d["entropy"] else None,
            reuse_signatures=[ReuseSignature.from_dict(s) for s in d["reuse_signatures"]],
            spatial_locality=(
                SpatialLocalityReport.from_dict(d["spatial_locality"]) if d["spatial_locality"] else None
            ),
            parallelism=ParallelismReport.from_dict(d["parallelism"]) if d["parallelism"] else None,
            undefined=d["undefined"],
        )


def prepare(trace: Trace, config: AnalysisConfig) -> tuple[Trace, dict]:
    """Apply config overrides and index tagging; returns the trace and config echo."""
    if config.word_size is not None and config.word_size != trace.word_size:
        ws = config.word_size
        if ws < 1 or ws & (ws - 1):
            raise ValueError(f"word size must be a power of two, got {ws}")
        trace = replace(trace, word_size=ws)
    line_size_pairs(trace.word_size, config.max_line_size)
    if not 0 <= config.k_max < trace.address_bits:
        raise ValueError(f"entropy LSB cut must be in [0, {trace.address_bits})")
    echo = {
        "word_size": trace.word_size,
        "max_line_size": config.max_line_size,
        "k_max": config.k_max,
        "memory_deps": config.memory_deps,
    }
    return trace, echo


def _meta(trace: Trace, flag_source: str) -> dict:
    return {
        "events": len(trace),
        "memory_accesses": len(trace.memory_events),
        "distinct_addresses": len({e.addr for e in trace.memory_events}),
        "blocks": len({inst.bb for inst in trace.instances}),
        "block_instances": len(trace.instances),
        "index_flags": flag_source,
    }


def _line_sizes(word_size: int, max_line: int) -> list:
    return [word_size << i for i in range(max_line.bit_length() - word_size.bit_length() + 1)]


def analyze_trace(trace: Trace, config: AnalysisConfig = AnalysisConfig()) -> MetricsReport:
    trace, echo = prepare(trace, config)
    flag_source = "trace"
    if not trace.has_index_flags:
        trace = tag_index_updates(trace)
        flag_source = "heuristic"
    report = MetricsReport(echo, _meta(trace, flag_source))

    try:
        report.entropy = entropy_sweep(trace, config.k_max)
    except MetricUndefined as exc:
        report.undefined["entropy"] = exc.reason

    signatures: dict = {}
    try:
        report.spatial_locality = spatial_locality(trace, config.max_line_size, signatures)
    except MetricUndefined as exc:
        report.undefined["spatial_locality"] = exc.reason
    report.reuse_signatures = [
        signatures.get(b, ReuseSignature(b, (), 0, 0))
        for b in _line_sizes(trace.word_size, config.max_line_size)
    ]

    deps = build_dependency_graph(trace, config.memory_deps)
    report.parallelism, undefined = analyze_parallelism(trace, deps)
    if undefined.get("parallelism"):
        report.parallelism = None
    report.undefined.update(undefined)
    return report


def analyze(trace_path, config: AnalysisConfig = AnalysisConfig()) -> MetricsReport:
    return analyze_trace(load_trace(trace_path), config)


def oracle_report(trace: Trace, config: AnalysisConfig = AnalysisConfig()) -> MetricsReport:
    """Same report, every number recomputed by the brute-force oracles."""
    trace, echo = prepare(trace, config)
    flag_source = "trace"
    if not trace.has_index_flags:
        trace = tag_index_updates(trace)
        flag_source = "heuristic"
    report = MetricsReport(echo, _meta(trace, flag_source))
    mem = [e.addr for e in trace.events if e.op in ("load", "store")]

    if mem:
        rows = tuple((k, oracles.oracle_entropy(trace, k)) for k in range(config.k_max + 1))
        report.entropy = EntropyReport(rows, len(set(mem)))
        per_pair, total = oracles.oracle_slq(trace, config.max_line_size, trace.word_size)
        report.spatial_locality = SpatialLocalityReport(tuple(per_pair), total)
    else:
        report.undefined["entropy"] = "trace has no memory accesses"
        report.undefined["spatial_locality"] = "trace has no memory accesses"

    for b in _line_sizes(trace.word_size, config.max_line_size):
        counts: dict = {}
        cold = 0
        for d in oracles.oracle_reuse_distance(trace, b):
            if d == oracles.INF:
                cold += 1
            else:
                i = int(d).bit_length()
                counts[i] = counts.get(i, 0) + 1
        width = max(counts, default=-1) + 1
        report.reuse_signatures.append(
            ReuseSignature(b, tuple(counts.get(i, 0) for i in range(width)), cold, len(mem))
        )

    if not len(trace):
        report.undefined["parallelism"] = "trace is empty"
        return report
    edges = oracles.oracle_dependencies(trace, config.memory_deps)
    ideal = oracles.oracle_schedule(trace, edges, "ideal_ilp")
    real = oracles.oracle_schedule(trace, edges, "bblp_real")
    smart = oracles.oracle_schedule(trace, edges, "bblp_smart")
    per_block, avg = oracles.oracle_pbblp(trace, edges)
    if avg is None:
        report.undefined["parallelism.pbblp"] = "no basic blocks beyond index bookkeeping"
    n = len(trace)
    report.parallelism = ParallelismReport(
        ilp_total=n / max(ideal),
        ilp_specialized=dict(sorted(oracles.oracle_ilp_specialized(trace, ideal).items())),
        dlp1=oracles.oracle_dlp(trace, ideal, False),
        dlp2=oracles.oracle_dlp(trace, ideal, True),
        bblp_real=n / max(real),
        bblp_smart=n / max(smart),
        pbblp=avg,
        per_block_pbblp=per_block,
    )
    return report


def csv_rows(report: MetricsReport) -> list:
    """Flatten every defined metric into ``(metric, parameter, value)`` rows."""
    rows = []
    if report.entropy:
        rows += [("entropy", f"k={k}", h) for k, h in report.entropy.per_lsb_cut]
    for sig in report.reuse_signatures:
        if sig.empty:
            continue
        rows.append(("reuse_cold_fraction", f"b={sig.line_size}", sig.cold_fraction))
        rows += [("reuse_p", f"b={sig.line_size};bin=[{lo},{hi})", p) for lo, hi, p in sig.bins]
    if report.spatial_locality:
        rows += [("slq_pair", f"b={b}", s) for b, _, s in report.spatial_locality.per_pair]
        rows.append(("slq_total", "", report.spatial_locality.total))
    par = report.parallelism
    if par:
        for name in ("ilp_total", "dlp1", "dlp2", "bblp_real", "bblp_smart", "pbblp"):
            value = getattr(par, name)
            if value is not None:
                rows.append((name, "", value))
        rows += [("ilp_specialized", f"op={op}", v) for op, v in par.ilp_specialized.items()]
        rows += [("pbblp_block", f"bb={bb}", v) for bb, v in par.per_block_pbblp.items()]
    return rows


def emit(report: MetricsReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("metric", "parameter", "value"))
        writer.writerows((m, p, repr(float(v))) for m, p, v in csv_rows(report))
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def parse_json_report(text: str) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(text))
