"""Memory-behaviour metrics: address entropy, reuse distance, spatial locality."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._stackdist import stack_distances
from .trace import Trace


class MetricUndefined(ValueError):
    """A metric has no value for this input (e.g. no memory accesses)."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


def _is_pow2(v: int) -> bool:
    return v >= 1 and not v & (v - 1)


def _log2(v: int) -> int:
    return v.bit_length() - 1


# -- entropy --------------------------------------------------------------


@dataclass(frozen=True)
class EntropyReport:
    per_lsb_cut: tuple  # ((k, bits), ...)
    distinct_addresses: int

    def entropy(self, k: int) -> float:
        return dict(self.per_lsb_cut)[k]

    def to_dict(self) -> dict:
        return {
            "distinct_addresses": self.distinct_addresses,
            "per_lsb_cut": [{"k": k, "entropy": h} for k, h in self.per_lsb_cut],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EntropyReport":
        return cls(tuple((r["k"], r["entropy"]) for r in d["per_lsb_cut"]), d["distinct_addresses"])


def _entropy_of_sorted(keys: np.ndarray) -> float:
    n = keys.shape[0]
    starts = np.flatnonzero(keys[1:] != keys[:-1]) + 1
    counts = np.diff(np.concatenate(([0], starts, [n])))
    if counts.shape[0] == 1:
        return 0.0
    p = counts / n
    return float(-(p * np.log2(p)).sum())


def _require_accesses(trace: Trace) -> np.ndarray:
    addrs = trace.addresses
    if addrs.shape[0] == 0:
        raise MetricUndefined("trace has no memory accesses")
    return addrs


def memory_entropy(trace: Trace, lsb_cut: int = 0) -> float:
    """Shannon entropy (bits) of the accessed addresses with ``lsb_cut`` low bits dropped."""
    if not 0 <= lsb_cut < trace.address_bits:
        raise ValueError(f"lsb_cut must be in [0, {trace.address_bits})")
    addrs = _require_accesses(trace)
    return _entropy_of_sorted(np.sort(addrs >> np.uint64(lsb_cut)))


def entropy_sweep(trace: Trace, k_max: int = 16) -> EntropyReport:
    if not 0 <= k_max < trace.address_bits:
        raise ValueError(f"k_max must be in [0, {trace.address_bits})")
    ordered = np.sort(_require_accesses(trace))
    # shifting preserves sort order, so one sort serves every cut
    rows = tuple((k, _entropy_of_sorted(ordered >> np.uint64(k))) for k in range(k_max + 1))
    distinct = int(np.count_nonzero(ordered[1:] != ordered[:-1]) + 1)
    return EntropyReport(rows, distinct)


# -- reuse distance -------------------------------------------------------

COLD = -1


def _check_line(trace: Trace, line_size: int) -> None:
    if not _is_pow2(line_size):
        raise ValueError(f"line size must be a power of two, got {line_size}")
    if line_size < trace.word_size:
        raise ValueError(f"line size {line_size} is below the word size {trace.word_size}")


def line_distances(trace: Trace, line_size: int) -> np.ndarray:
    """Reuse distances as int64 with :data:`COLD` for first touches."""
    _check_line(trace, line_size)
    lines = trace.addresses >> np.uint64(_log2(line_size))
    if lines.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    uniq, ids = np.unique(lines, return_inverse=True)
    return stack_distances(ids.astype(np.int64).ravel(), uniq.shape[0])


def reuse_distance_stream(trace: Trace, line_size: int) -> np.ndarray:
    """Per-access count of distinct lines touched since the previous access
    to the same line; ``inf`` on first touch."""
    d = line_distances(trace, line_size).astype(np.float64)
    d[d < 0] = np.inf
    return d


def distance_bins(d: np.ndarray) -> np.ndarray:
    """Log2 bin index: 0 for distance 0, i for [2**(i-1), 2**i); COLD stays -1."""
    _, exp = np.frexp(np.maximum(d, 0).astype(np.float64))
    return np.where(d < 0, COLD, exp).astype(np.int64)


def bin_range(i: int) -> tuple[int, int]:
    return (0, 1) if i == 0 else (1 << (i - 1), 1 << i)


@dataclass(frozen=True)
class ReuseSignature:
    line_size: int
    counts: tuple  # accesses per finite bin
    cold: int
    total: int

    @property
    def empty(self) -> bool:
        return self.total == 0

    @property
    def probabilities(self) -> tuple:
        if not self.total:
            return tuple(0.0 for _ in self.counts)
        return tuple(c / self.total for c in self.counts)

    @property
    def cold_fraction(self) -> float:
        return self.cold / self.total if self.total else 0.0

    @property
    def bins(self) -> list:
        return [(*bin_range(i), p) for i, p in enumerate(self.probabilities)]

    def to_dict(self) -> dict:
        return {
            "line_size": self.line_size,
            "accesses": self.total,
            "cold": self.cold,
            "cold_fraction": self.cold_fraction,
            "bins": [{"lo": lo, "hi": hi, "count": c, "p": p}
                     for (lo, hi, p), c in zip(self.bins, self.counts)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReuseSignature":
        return cls(d["line_size"], tuple(b["count"] for b in d["bins"]), d["cold"], d["accesses"])


def _signature_from_bins(line_size: int, bins: np.ndarray) -> ReuseSignature:
    finite = bins[bins >= 0]
    counts = np.bincount(finite) if finite.size else np.zeros(0, dtype=np.int64)
    return ReuseSignature(line_size, tuple(int(c) for c in counts),
                          int(bins.size - finite.size), int(bins.size))


def reuse_signature(trace: Trace, line_size: int) -> ReuseSignature:
    return _signature_from_bins(line_size, distance_bins(line_distances(trace, line_size)))


@dataclass(frozen=True)
class DistributionMap:
    """Bin transitions when the line size doubles.

    Row/column ``k`` is finite bin ``k``; the last row/column is the cold
    (infinite) bin.  ``counts`` holds raw access counts, ``cells`` the
    row-normalised probabilities.
    """

    line_size_pair: tuple
    counts: np.ndarray

    @property
    def inf(self) -> int:
        return self.counts.shape[0] - 1

    @property
    def empty_rows(self) -> np.ndarray:
        return self.counts.sum(axis=1) == 0

    @property
    def cells(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, totals, out=np.zeros(self.counts.shape), where=totals > 0)

    def row_scores(self) -> np.ndarray:
        """Per-row probability of moving to a strictly smaller bin; the cold
        row counts every finite column."""
        cells = self.cells
        out = np.tril(cells, k=-1).sum(axis=1)
        out[self.inf] = cells[self.inf, : self.inf].sum()
        return out


def _transition_counts(bins_b: np.ndarray, bins_2b: np.ndarray) -> np.ndarray:
    width = int(max(bins_b.max(initial=-1), bins_2b.max(initial=-1))) + 2
    inf = width - 1
    rows = np.where(bins_b < 0, inf, bins_b)
    cols = np.where(bins_2b < 0, inf, bins_2b)
    return np.bincount(rows * width + cols, minlength=width * width).reshape(width, width)


def distribution_map(trace: Trace, b: int) -> DistributionMap:
    _check_line(trace, b)
    _require_accesses(trace)
    lo = distance_bins(line_distances(trace, b))
    hi = distance_bins(line_distances(trace, 2 * b))
    return DistributionMap((b, 2 * b), _transition_counts(lo, hi))


@dataclass(frozen=True)
class SpatialLocalityReport:
    per_pair: tuple  # ((b, 2b, score), ...)
    total: float

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "per_pair": [{"b": b, "b2": b2, "score": s} for b, b2, s in self.per_pair],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpatialLocalityReport":
        return cls(tuple((r["b"], r["b2"], r["score"]) for r in d["per_pair"]), d["total"])


def line_size_pairs(word_size: int, max_line_size: int) -> list:
    if not _is_pow2(max_line_size) or max_line_size <= word_size:
        raise ValueError(
            f"max line size must be a power of two above the word size ({word_size}), got {max_line_size}"
        )
    pairs = []
    b = word_size
    while 2 * b <= max_line_size:
        pairs.append((b, 2 * b))
        b *= 2
    return pairs


def pair_weight(b: int, word_size: int) -> float:
    """2**-beta with beta = log2(b / word_size) + 1, so the first pair weighs 1/2."""
    return 2.0 ** -(_log2(b // word_size) + 1)


def spatial_locality(
    trace: Trace, max_line_size: int = 64, signatures: Optional[dict] = None
) -> SpatialLocalityReport:
    """Spatial-locality score over line-size pairs (b, 2b) up to ``max_line_size``.

    ``signatures``, if given, is filled with the :class:`ReuseSignature`
    of every line size visited.
    """
    pairs = line_size_pairs(trace.word_size, max_line_size)
    _require_accesses(trace)
    bins = {}
    for b, b2 in pairs:
        for size in (b, b2):
            if size not in bins:
                bins[size] = distance_bins(line_distances(trace, size))
    if signatures is not None:
        for size, bb in bins.items():
            signatures[size] = _signature_from_bins(size, bb)

    scored = []
    num = den = 0.0
    for b, b2 in pairs:
        dmap = DistributionMap((b, b2), _transition_counts(bins[b], bins[b2]))
        # row weights p_i^b, cold mass on the last row
        weights = dmap.counts.sum(axis=1) / bins[b].size
        score = abs(float(dmap.row_scores() @ weights))
        w = pair_weight(b, trace.word_size)
        num += score * w
        den += w
        scored.append((b, b2, score))
    return SpatialLocalityReport(tuple(scored), num / den)
