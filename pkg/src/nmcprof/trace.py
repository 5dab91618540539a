"""Dynamic instruction trace model: events, ingestion, dependencies.

A trace is a JSON-Lines file.  The optional first line is a header
``{"word_size": 4, "address_bits": 64}``; every other line is one
dynamically executed instruction::

    {"seq": 0, "sid": 3, "op": "load", "def": 7, "use": [2],
     "addr": "0x1000", "size": 4, "bb": 1, "bbi": 0, "idx": false}

Value ids are virtual registers: a later ``def`` of the same id shadows
the earlier one, so a loop body can reuse its ids on every iteration.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import IO, Iterable, Iterator, NamedTuple, Optional

import numpy as np

MEMORY_OPS = frozenset({"load", "store"})
KNOWN_OPS = frozenset(
    {"load", "store", "add", "sub", "mul", "div", "cmp", "branch", "phi", "call"}
)
ACCESS_SIZES = frozenset({1, 2, 4, 8, 16, 32, 64})
EVENT_KEYS = ("seq", "sid", "op", "def", "use", "addr", "size", "bb", "bbi", "idx")
_REQUIRED_KEYS = frozenset({"seq", "sid", "op", "bb", "bbi"})
_HEADER_KEYS = frozenset({"word_size", "address_bits"})

DEFAULT_WORD_SIZE = 4
DEFAULT_ADDRESS_BITS = 64


def opcode_kind(op: str) -> str:
    """Map an opcode name to its kind; unknown names are ``"other"``."""
    return op if op in KNOWN_OPS else "other"


class TraceError(ValueError):
    """Raised for malformed or inconsistent trace input."""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.message = message
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class TraceEvent(NamedTuple):
    seq: int
    static_id: int
    op: str
    def_id: Optional[int] = None
    uses: tuple = ()
    addr: Optional[int] = None
    size: Optional[int] = None
    bb: int = 0
    bbi: int = 0
    idx: bool = False

    @property
    def kind(self) -> str:
        return opcode_kind(self.op)

    @property
    def mem(self) -> Optional[tuple[int, int]]:
        if self.addr is None:
            return None
        return self.addr, self.size

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "sid": self.static_id,
            "op": self.op,
            "def": self.def_id,
            "use": list(self.uses),
            "addr": None if self.addr is None else hex(self.addr),
            "size": self.size,
            "bb": self.bb,
            "bbi": self.bbi,
            "idx": self.idx,
        }


class BlockInstance(NamedTuple):
    start: int  # first seq
    stop: int  # one past the last seq
    bb: int
    bbi: int


@dataclass(frozen=True, eq=True)
class Trace:
    events: tuple = ()
    word_size: int = DEFAULT_WORD_SIZE
    address_bits: int = DEFAULT_ADDRESS_BITS

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    @cached_property
    def memory_events(self) -> tuple:
        return tuple(e for e in self.events if e.addr is not None)

    @cached_property
    def addresses(self) -> np.ndarray:
        """Addresses of all loads/stores in trace order (uint64)."""
        return np.fromiter(
            (e.addr for e in self.memory_events), dtype=np.uint64, count=len(self.memory_events)
        )

    @cached_property
    def instances(self) -> tuple:
        """Block instances as contiguous ``[start, stop)`` seq ranges, in order."""
        out = []
        start = 0
        key = None
        for e in self.events:
            k = (e.bb, e.bbi)
            if k != key:
                if key is not None:
                    out.append(BlockInstance(start, e.seq, key[0], key[1]))
                start, key = e.seq, k
        if key is not None:
            out.append(BlockInstance(start, len(self.events), key[0], key[1]))
        return tuple(out)

    @cached_property
    def instance_of(self) -> np.ndarray:
        """Index into :attr:`instances` for every event."""
        out = np.empty(len(self.events), dtype=np.int64)
        for i, inst in enumerate(self.instances):
            out[inst.start:inst.stop] = i
        return out

    @property
    def has_index_flags(self) -> bool:
        return any(e.idx for e in self.events)


@dataclass(frozen=True)
class IngestOptions:
    """Defaults applied when the trace has no header line."""

    word_size: int = DEFAULT_WORD_SIZE
    address_bits: int = DEFAULT_ADDRESS_BITS
    source: Optional[str] = None


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_geometry(word_size, address_bits, line=None, source=None):
    if not _is_int(word_size) or word_size < 1 or word_size & (word_size - 1):
        raise TraceError(f"word_size must be a positive power of two, got {word_size!r}", line, source)
    if not _is_int(address_bits) or not 1 <= address_bits <= 64:
        raise TraceError(f"address_bits must be in 1..64, got {address_bits!r}", line, source)


class _Validator:
    """Incremental checker shared by ingest and the generators."""

    def __init__(self, address_bits: int, source: Optional[str] = None):
        self.limit = 1 << address_bits
        self.source = source
        self.defined: set = set()
        self.closed: set = set()
        self.current = None
        self.expected_seq = 0

    def fail(self, msg, line):
        raise TraceError(msg, line, self.source)

    def check(self, e: TraceEvent, line=None) -> None:
        if e.seq != self.expected_seq:
            self.fail(f"non-monotone seq: expected {self.expected_seq}, got {e.seq}", line)
        self.expected_seq += 1
        if e.op in MEMORY_OPS:
            if e.addr is None or e.size is None:
                self.fail(f"{e.op} without a memory access", line)
            if e.size not in ACCESS_SIZES:
                self.fail(f"access size {e.size} not in {sorted(ACCESS_SIZES)}", line)
            if not 0 <= e.addr < self.limit:
                self.fail(f"address {e.addr:#x} does not fit the address space", line)
        elif e.addr is not None or e.size is not None:
            self.fail(f"mem on non-memory opcode {e.op!r}", line)
        for u in e.uses:
            if u not in self.defined:
                self.fail(f"dangling use of value id {u}", line)
        if e.def_id is not None:
            self.defined.add(e.def_id)
        key = (e.bb, e.bbi)
        if key != self.current:
            if key in self.closed:
                self.fail(f"block instance bb={e.bb} bbi={e.bbi} is not contiguous", line)
            if self.current is not None:
                self.closed.add(self.current)
            self.current = key


def validate(trace: Trace) -> Trace:
    """Check every trace invariant; returns the trace unchanged."""
    _check_geometry(trace.word_size, trace.address_bits)
    v = _Validator(trace.address_bits)
    for e in trace.events:
        v.check(e)
    return trace


def _parse_event(obj, line, source) -> TraceEvent:
    if not isinstance(obj, dict):
        raise TraceError("malformed line: expected a JSON object", line, source)
    extra = obj.keys() - EVENT_KEYS
    if extra:
        raise TraceError(f"malformed line: unknown field(s) {sorted(extra)}", line, source)
    missing = _REQUIRED_KEYS - obj.keys()
    if missing:
        raise TraceError(f"malformed line: missing field(s) {sorted(missing)}", line, source)
    seq, sid, op, bb, bbi = obj["seq"], obj["sid"], obj["op"], obj["bb"], obj["bbi"]
    def_id = obj.get("def")
    uses = obj.get("use", [])
    addr = obj.get("addr")
    size = obj.get("size")
    idx = obj.get("idx", False)
    if not (_is_int(seq) and _is_int(sid) and _is_int(bb) and _is_int(bbi)):
        raise TraceError("malformed line: seq/sid/bb/bbi must be integers", line, source)
    if not isinstance(op, str) or not op:
        raise TraceError("malformed line: op must be a non-empty string", line, source)
    if def_id is not None and not _is_int(def_id):
        raise TraceError("malformed line: def must be an integer or null", line, source)
    if not isinstance(uses, list) or not all(_is_int(u) for u in uses):
        raise TraceError("malformed line: use must be a list of integers", line, source)
    if not isinstance(idx, bool):
        raise TraceError("malformed line: idx must be a boolean", line, source)
    if addr is not None:
        if not isinstance(addr, str) or not addr.lower().startswith("0x"):
            raise TraceError("malformed line: addr must be a hex string", line, source)
        try:
            addr = int(addr, 16)
        except ValueError:
            raise TraceError(f"malformed line: bad address {obj['addr']!r}", line, source) from None
    if size is not None and not _is_int(size):
        raise TraceError("malformed line: size must be an integer or null", line, source)
    return TraceEvent(seq, sid, op, def_id, tuple(uses), addr, size, bb, bbi, idx)


def ingest(stream: Iterable, options: IngestOptions = IngestOptions()) -> Trace:
    """Parse and validate a JSON-Lines trace.

    ``stream`` may be a text or binary file object, or any iterable of
    lines.  Blank lines are ignored.  Errors carry the 1-based line number.
    """
    source = options.source
    word_size, address_bits = options.word_size, options.address_bits
    validator = None
    events = []
    loads = json.loads
    for lineno, raw in enumerate(stream, 1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            obj = loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceError(f"malformed line: {exc.msg}", lineno, source) from None
        if validator is None:
            if isinstance(obj, dict) and "seq" not in obj and obj.keys() & _HEADER_KEYS:
                extra = obj.keys() - _HEADER_KEYS
                if extra:
                    raise TraceError(f"malformed header: unknown field(s) {sorted(extra)}", lineno, source)
                word_size = obj.get("word_size", word_size)
                address_bits = obj.get("address_bits", address_bits)
                _check_geometry(word_size, address_bits, lineno, source)
                validator = _Validator(address_bits, source)
                continue
            _check_geometry(word_size, address_bits, None, source)
            validator = _Validator(address_bits, source)
        e = _parse_event(obj, lineno, source)
        validator.check(e, lineno)
        events.append(e)
    if validator is None:
        _check_geometry(word_size, address_bits, None, source)
    return Trace(tuple(events), word_size, address_bits)


def load_trace(path, options: Optional[IngestOptions] = None) -> Trace:
    options = options or IngestOptions(source=str(path))
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return ingest(fh, options)
        except UnicodeDecodeError as exc:
            raise TraceError(f"not UTF-8: {exc.reason}", source=options.source) from None


def iter_lines(trace: Trace) -> Iterator[str]:
    yield json.dumps({"word_size": trace.word_size, "address_bits": trace.address_bits})
    dumps = json.dumps
    for e in trace.events:
        yield dumps(e.to_json(), separators=(",", ":"))


def serialize(trace: Trace) -> str:
    """Render a trace in the JSON-Lines format read by :func:`ingest`."""
    return "".join(line + "\n" for line in iter_lines(trace))


def write_trace(trace: Trace, out: IO[str]) -> None:
    for line in iter_lines(trace):
        out.write(line)
        out.write("\n")


def loads_trace(text: str, options: IngestOptions = IngestOptions()) -> Trace:
    return ingest(io.StringIO(text), options)


# -- dependencies -------------------------------------------------------------

VALUE = "value"
MEMORY = "memory"


class Edge(NamedTuple):
    producer: int
    consumer: int
    kind: str


@dataclass(frozen=True)
class DependencyGraph:
    """Per-consumer producer lists for value and (optionally) memory edges.

    ``value_deps[c]`` holds the seqs whose defs event ``c`` reads;
    ``memory_deps[c]`` the stores whose bytes a load ``c`` reads.
    """

    value_deps: tuple
    memory_deps: tuple
    index_producers: frozenset = field(default_factory=frozenset)

    def __len__(self) -> int:
        return len(self.value_deps)

    @cached_property
    def edges(self) -> frozenset:
        out = set()
        for c, prods in enumerate(self.value_deps):
            out.update(Edge(p, c, VALUE) for p in prods)
        for c, prods in enumerate(self.memory_deps):
            out.update(Edge(p, c, MEMORY) for p in prods)
        return frozenset(out)

    @cached_property
    def index_update_edges(self) -> frozenset:
        return frozenset(e for e in self.edges if e.producer in self.index_producers)

    def producers(self, skip_index_updates: bool = False) -> list:
        """Merged producer tuples per consumer, optionally without index-update edges."""
        return self._smart_producers if skip_index_updates else self._all_producers

    @cached_property
    def _all_producers(self) -> list:
        if not any(self.memory_deps):
            return list(self.value_deps)
        return [
            tuple(sorted(set(v).union(m))) if m else v
            for v, m in zip(self.value_deps, self.memory_deps)
        ]

    @cached_property
    def _smart_producers(self) -> list:
        skip = self.index_producers
        if not skip:
            return self._all_producers
        return [tuple(p for p in prods if p not in skip) for prods in self._all_producers]


def _value_producers(trace: Trace) -> list:
    last_def: dict = {}
    out = []
    for e in trace.events:
        uses = e.uses
        if not uses:
            out.append(())
        elif len(uses) == 1:
            out.append((last_def[uses[0]],))
        else:
            out.append(tuple(sorted({last_def[u] for u in uses})))
        if e.def_id is not None:
            last_def[e.def_id] = e.seq
    return out


def _memory_producers(trace: Trace) -> list:
    # Byte-granular last writer: a load depends on every store that still
    # owns at least one of its bytes.
    writer: dict = {}
    empty = ()
    out = [empty] * len(trace.events)
    for e in trace.memory_events:
        if e.op == "load":
            found = {writer[b] for b in range(e.addr, e.addr + e.size) if b in writer}
            if found:
                out[e.seq] = tuple(sorted(found))
        else:
            for b in range(e.addr, e.addr + e.size):
                writer[b] = e.seq
    return out


def build_dependency_graph(trace: Trace, include_memory_deps: bool = False) -> DependencyGraph:
    value = tuple(_value_producers(trace))
    memory = tuple(_memory_producers(trace)) if include_memory_deps else ((),) * len(trace.events)
    flagged = frozenset(e.seq for e in trace.events if e.idx)
    return DependencyGraph(value, memory, flagged)


def tag_index_updates(trace: Trace) -> Trace:
    """Flag add/sub events that only advance a loop index.

    An event qualifies when it has at least one consumer and every
    consumer is a cmp, a branch, or a later instance of the same static
    instruction.  Existing flags are kept.
    """
    consumers: list = [[] for _ in trace.events]
    for c, prods in enumerate(_value_producers(trace)):
        for p in prods:
            consumers[p].append(c)
    events = trace.events
    changed = []
    for e in events:
        if e.idx or e.def_id is None or e.op not in ("add", "sub"):
            continue
        cons = consumers[e.seq]
        if cons and all(
            events[c].op in ("cmp", "branch") or events[c].static_id == e.static_id for c in cons
        ):
            changed.append(e.seq)
    if not changed:
        return trace
    new = list(events)
    for s in changed:
        new[s] = new[s]._replace(idx=True)
    return replace(trace, events=tuple(new))
