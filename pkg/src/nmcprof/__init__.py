"""Platform-independent memory and parallelism characterization of
dynamic instruction traces, aimed at spotting near-memory-computing
candidates."""
from .memory import (
    DistributionMap,
    EntropyReport,
    MetricUndefined,
    ReuseSignature,
    SpatialLocalityReport,
    distribution_map,
    entropy_sweep,
    memory_entropy,
    reuse_distance_stream,
    reuse_signature,
    spatial_locality,
)
from .parallelism import (
    ParallelismReport,
    ScheduleResult,
    analyze_parallelism,
    bblp,
    dlp,
    ilp_specialized,
    ilp_total,
    pbblp,
    schedule_bblp,
    schedule_ideal,
)
from .report import AnalysisConfig, MetricsReport, analyze, analyze_trace, emit
from .synth import GeneratorSpec, generate
from .trace import (
    DependencyGraph,
    IngestOptions,
    Trace,
    TraceError,
    TraceEvent,
    build_dependency_graph,
    ingest,
    load_trace,
    serialize,
    tag_index_updates,
)

__version__ = "0.1.0"
