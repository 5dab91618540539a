"""Deterministic synthetic workloads with known metric profiles.

Every generator emits loop-shaped traces: one static block per loop body,
one block instance per iteration, loop-index increments flagged ``idx``.
Value ids equal static ids (each static instruction owns one virtual
register), so a value is redefined on every iteration.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014;
constants 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9, 0x94D049BB133111EB),
seeded directly with ``GeneratorSpec.seed``.

Expected profiles:

==================== =====================================================
sequential_scan      n word loads at base, base+w, ...; high SLQ
random_stream        n loads uniform over ``space`` bytes; SLQ near 0
scattered_loads      n iterations of ``lanes`` independent random loads;
                     dlp1 well above dlp2
repeated_address     n loads of one address; entropy 0, SLQ 0
strided_matmul       naive i-j-k product of n x n row-major matrices
data_parallel_loop   n iterations linked only through the loop index;
                     bblp_real 1, bblp_smart n, PBBLP n
dependent_chain_loop n iterations carrying an accumulator; everything 1
==================== =====================================================
"""
from __future__ import annotations

from dataclasses import dataclass

from .trace import DEFAULT_ADDRESS_BITS, Trace, TraceError, TraceEvent, _Validator

KINDS = (
    "sequential_scan",
    "random_stream",
    "scattered_loads",
    "repeated_address",
    "strided_matmul",
    "data_parallel_loop",
    "dependent_chain_loop",
)

_MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return self.next() % n


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int = 1024  # elements / accesses / iterations / matrix dimension
    seed: int = 0
    lanes: int = 8  # loads per iteration (scattered_loads)
    body: int = 6  # instructions per iteration (loop kinds)
    stride: int = 1  # in words (sequential_scan)
    passes: int = 1  # sweeps over the array (sequential_scan)
    space: int = 1 << 20  # bytes (random kinds)
    word_size: int = 4
    base: int = 0x10000
    address_bits: int = DEFAULT_ADDRESS_BITS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}; choose from {', '.join(KINDS)}")
        for name in ("n", "lanes", "body", "stride", "passes", "space", "word_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.kind in ("data_parallel_loop", "dependent_chain_loop") and self.body < 6:
            raise ValueError(f"{self.kind} needs body >= 6")


class _Builder:
    def __init__(self, spec: GeneratorSpec):
        self.word = spec.word_size
        self.size = min(spec.word_size, 64)
        self.events = []
        self.defined = set()
        self.instances = {}
        self.bb = self.bbi = 0
        self.validator = _Validator(spec.address_bits)
        self.limit = 1 << spec.address_bits

    def block(self, bb: int) -> None:
        self.bb = bb
        self.bbi = self.instances.get(bb, 0)
        self.instances[bb] = self.bbi + 1

    def emit(self, sid, op, uses=(), addr=None, idx=False, define=True):
        """``define``: True defines value id ``sid``, an int defines that id, False nothing."""
        value = sid if define is True else (None if define is False else define)
        if addr is not None and addr >= self.limit:
            raise TraceError(f"generated address {addr:#x} overflows the address space")
        e = TraceEvent(
            seq=len(self.events),
            static_id=sid,
            op=op,
            def_id=value,
            uses=tuple(u for u in uses if u in self.defined),
            addr=addr,
            size=self.size if addr is not None else None,
            bb=self.bb,
            bbi=self.bbi,
            idx=idx,
        )
        self.validator.check(e)
        self.events.append(e)
        if value is not None:
            self.defined.add(value)

    def latch(self, index_sid: int, cmp_sid: int, br_sid: int) -> None:
        self.emit(index_sid, "add", (index_sid,), idx=True)
        self.emit(cmp_sid, "cmp", (index_sid,))
        self.emit(br_sid, "branch", (cmp_sid,), define=False)

    def trace(self, spec: GeneratorSpec) -> Trace:
        return Trace(tuple(self.events), spec.word_size, spec.address_bits)


def _reduction_loop(spec: GeneratorSpec, addresses) -> Trace:
    # sid: 0 load, 1 acc add, 2 index add, 3 cmp, 4 branch
    b = _Builder(spec)
    for a in addresses:
        b.block(1)
        b.emit(0, "load", (2,), addr=a)
        b.emit(1, "add", (1, 0))
        b.latch(2, 3, 4)
    return b.trace(spec)


def _sequential_scan(spec):
    step = spec.stride * spec.word_size
    return _reduction_loop(
        spec, (spec.base + i * step for _ in range(spec.passes) for i in range(spec.n))
    )


def _random_addresses(spec, rng, count):
    words = max(spec.space // spec.word_size, 1)
    return [spec.base + rng.below(words) * spec.word_size for _ in range(count)]


def _random_stream(spec):
    return _reduction_loop(spec, _random_addresses(spec, SplitMix64(spec.seed), spec.n))


def _repeated_address(spec):
    return _reduction_loop(spec, [spec.base] * spec.n)


def _scattered_loads(spec):
    # sid: 0..lanes-1 loads, then index add, cmp, branch
    rng = SplitMix64(spec.seed)
    b = _Builder(spec)
    idx = spec.lanes
    for _ in range(spec.n):
        b.block(1)
        for lane, a in enumerate(_random_addresses(spec, rng, spec.lanes)):
            b.emit(lane, "load", (idx,), addr=a)
        b.latch(idx, idx + 1, idx + 2)
    return b.trace(spec)


def _loop(spec, carried: bool):
    # load x = A[i]; [acc = acc + x]; mul chain; store B[i]; i += 1; cmp; br
    w = spec.word_size
    a_base = spec.base
    b_base = spec.base + spec.n * w
    extra = spec.body - (6 if carried else 5)
    sid_acc = 1
    first_mul = 2
    sid_store = first_mul + extra
    sid_idx = sid_store + 1
    b = _Builder(spec)
    for i in range(spec.n):
        b.block(1)
        b.emit(0, "load", (sid_idx,), addr=a_base + i * w)
        last = 0
        if carried:
            b.emit(sid_acc, "add", (sid_acc, last))
            last = sid_acc
        for m in range(extra):
            b.emit(first_mul + m, "mul", (last,))
            last = first_mul + m
        b.emit(sid_store, "store", (last, sid_idx), addr=b_base + i * w, define=False)
        b.latch(sid_idx, sid_idx + 1, sid_idx + 2)
    return b.trace(spec)


def _strided_matmul(spec):
    n, w = spec.n, spec.word_size
    A = spec.base
    B = A + n * n * w
    C = B + n * n * w
    # inner body (bb 1): 0 ld A, 1 ld B, 2 mul, 3 acc, 4 k++, 5 cmp, 6 br
    # j latch (bb 2): 7 st C, 8 j++, 9 cmp, 10 br, 11 k=0, 12 acc=0
    # i latch (bb 3): 13 i++, 14 cmp, 15 br, 16 j=0
    K, J, I, ACC = 4, 8, 13, 3
    b = _Builder(spec)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                b.block(1)
                b.emit(0, "load", (I, K), addr=A + (i * n + k) * w)
                b.emit(1, "load", (K, J), addr=B + (k * n + j) * w)
                b.emit(2, "mul", (0, 1))
                b.emit(ACC, "add", (ACC, 2))
                b.latch(K, 5, 6)
            b.block(2)
            b.emit(7, "store", (ACC, I, J), addr=C + (i * n + j) * w, define=False)
            b.latch(J, 9, 10)
            b.emit(11, "const", define=K)
            b.emit(12, "const", define=ACC)
        b.block(3)
        b.latch(I, 14, 15)
        b.emit(16, "const", define=J)
    return b.trace(spec)


_GENERATORS = {
    "sequential_scan": _sequential_scan,
    "random_stream": _random_stream,
    "scattered_loads": _scattered_loads,
    "repeated_address": _repeated_address,
    "strided_matmul": _strided_matmul,
    "data_parallel_loop": lambda s: _loop(s, carried=False),
    "dependent_chain_loop": lambda s: _loop(s, carried=True),
}


def generate(spec: GeneratorSpec) -> Trace:
    return _GENERATORS[spec.kind](spec)
