"""Core value types and the billed sampling oracle.

Distributions live over {0,1}^n for one fixed n.  A tester never sees a whole
sample: it draws opaque handles from a :class:`BilledOracle` and pays one unit
per distinct (handle, position) pair it inspects.  Repeat inspections of a
pair are free, and two handles are billed separately even when the underlying
strings happen to be equal.  Positions are 1-based, so a string x reads
x_1 ... x_n and querying position n+1 is an error.

Randomness: everything runs on numpy's PCG64 generator, with seeds split via
``numpy.random.SeedSequence``.  A (seed, parameters) pair therefore fixes
every verdict bit for bit, across platforms and worker counts.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "WEIGHT_TOL",
    "BitString",
    "FiniteDistribution",
    "ImplicitDistribution",
    "SampleSource",
    "SampleHandle",
    "SampleBatch",
    "SampleView",
    "BilledOracle",
    "TesterReport",
    "new_rng",
    "random_subset",
    "pack_rows",
]

# Weights of an explicit distribution must sum to 1 within this tolerance.
WEIGHT_TOL = 1e-12

_oracle_tokens = itertools.count(1)


def new_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator for ``seed``.

    Accepts an int, a SeedSequence, or an existing Generator (returned as is,
    which lets callers thread one stream through helper functions).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def random_subset(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """Sample a uniformly random ``size``-subset of positions {1, ..., n}.

    Uses Floyd's algorithm, which draws exactly ``size`` integers however
    large n is.  Returns the positions sorted ascending (int64).
    """
    if not 0 <= size <= n:
        raise ValueError(f"subset size {size} outside [0, {n}]")
    if size == n:
        return np.arange(1, n + 1, dtype=np.int64)
    chosen: set[int] = set()
    for j in range(n - size + 1, n + 1):
        t = int(rng.integers(1, j + 1))
        chosen.add(j if t in chosen else t)
    return np.array(sorted(chosen), dtype=np.int64)


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Collapse each row of a 0/1 matrix into one opaque, comparable value.

    The result supports ==, sorting, np.unique and hashing, which is all the
    collision-based testers ever do with sample values.
    """
    arr = np.ascontiguousarray(bits, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d bit matrix")
    if arr.shape[1] == 0:
        raise ValueError("rows must have at least one column")
    return arr.view(np.dtype((np.void, arr.shape[1]))).reshape(arr.shape[0])


def _as_bit_array(bits) -> np.ndarray:
    if isinstance(bits, BitString):
        return bits.bits
    if isinstance(bits, str):
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError("bit strings contain only the characters 0 and 1")
        return np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a non-empty one-dimensional bit array")
    if arr.size and int(arr.max(initial=0)) > 1:
        raise ValueError("bits must be 0 or 1")
    return arr


class BitString:
    """An immutable string over {0,1} with 1-based bit access."""

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = _as_bit_array(bits).copy()
        arr.setflags(write=False)
        self._bits = arr

    @property
    def bits(self) -> np.ndarray:
        """The underlying read-only uint8 array (0-based, for bulk math)."""
        return self._bits

    @property
    def n(self) -> int:
        return int(self._bits.size)

    def bit(self, position: int) -> int:
        """Return bit ``position`` where positions run 1..n."""
        if not 1 <= position <= self._bits.size:
            raise ValueError(f"position {position} outside [1, {self._bits.size}]")
        return int(self._bits[position - 1])

    def to01(self) -> str:
        return "".join("1" if b else "0" for b in self._bits)

    def __len__(self) -> int:
        return int(self._bits.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._bits.size == other._bits.size and bool(
            np.array_equal(self._bits, other._bits)
        )

    def __hash__(self) -> int:
        return hash(self._bits.tobytes())

    def __repr__(self) -> str:
        return f"BitString({self.to01()!r})"


class FiniteDistribution:
    """A distribution over {0,1}^n given by finitely many weighted atoms.

    Atoms are distinct n-bit strings with strictly positive weights that sum
    to one within ``WEIGHT_TOL``; construction validates all three.  The atom
    table is visible to distance computations and generators only; testers
    must reach a distribution through a :class:`BilledOracle`.
    """

    __slots__ = ("_rows", "_weights")

    def __init__(self, atoms: Iterable[tuple] | None = None, *, rows=None, weights=None):
        if atoms is not None:
            pairs = list(atoms)
            if not pairs:
                raise ValueError("a distribution needs at least one atom")
            rows = np.stack([_as_bit_array(bits) for bits, _ in pairs])
            weights = np.array([float(w) for _, w in pairs], dtype=np.float64)
        else:
            rows = np.asarray(rows, dtype=np.uint8)
            weights = np.asarray(weights, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] == 0:
            raise ValueError("atom matrix must be non-empty and two-dimensional")
        if rows.shape[0] != weights.shape[0]:
            raise ValueError("one weight per atom required")
        if int(rows.max(initial=0)) > 1:
            raise ValueError("bits must be 0 or 1")
        if np.any(weights <= 0.0):
            raise ValueError("atom weights must be strictly positive")
        total = float(weights.sum())
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"atom weights sum to {total!r}, not 1")
        if np.unique(rows, axis=0).shape[0] != rows.shape[0]:
            raise ValueError("atoms must be distinct strings")
        rows = np.ascontiguousarray(rows)
        rows.setflags(write=False)
        weights = weights.copy()
        weights.setflags(write=False)
        self._rows = rows
        self._weights = weights

    @classmethod
    def from_rows(cls, rows, weights) -> "FiniteDistribution":
        return cls(rows=rows, weights=weights)

    @classmethod
    def point(cls, bits) -> "FiniteDistribution":
        return cls([(bits, 1.0)])

    @classmethod
    def uniform_over(cls, strings) -> "FiniteDistribution":
        rows = [_as_bit_array(s) for s in strings]
        if not rows:
            raise ValueError("need at least one string")
        return cls(rows=np.stack(rows), weights=np.full(len(rows), 1.0 / len(rows)))

    @property
    def n(self) -> int:
        return int(self._rows.shape[1])

    @property
    def support_size(self) -> int:
        return int(self._rows.shape[0])

    @property
    def rows(self) -> np.ndarray:
        """Atom matrix (support_size x n, read-only)."""
        return self._rows

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def atoms(self) -> list[tuple[BitString, float]]:
        return [(BitString(r), float(w)) for r, w in zip(self._rows, self._weights)]

    def draw_rows(self, rng: np.random.Generator, count: int) -> np.ndarray:
        idx = rng.choice(self.support_size, size=count, p=self._weights)
        return self._rows[idx]

    def project(self, positions) -> "FiniteDistribution":
        """Restrict every atom to ``positions`` (1-based), merging collisions."""
        pos = np.asarray(positions, dtype=np.int64)
        if pos.ndim != 1 or pos.size == 0:
            raise ValueError("need at least one position")
        if pos.min() < 1 or pos.max() > self.n:
            raise ValueError("positions outside [1, n]")
        sub = self._rows[:, pos - 1]
        uniq, inverse = np.unique(sub, axis=0, return_inverse=True)
        merged = np.zeros(uniq.shape[0], dtype=np.float64)
        np.add.at(merged, inverse, self._weights)
        # Exact renormalisation guard: merging only reorders additions, but a
        # long float sum can drift past the construction tolerance.
        merged[-1] += 1.0 - merged.sum()
        return FiniteDistribution(rows=uniq, weights=merged)


@dataclass(frozen=True)
class ImplicitDistribution:
    """A sample-only distribution over {0,1}^n.

    Backed by a sampler instead of an atom table, so it supports drawing but
    no exact distance computation.  ``metadata`` records how the instance was
    built; generators put certified distance labels there.
    """

    n: int
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    metadata: dict = field(default_factory=dict)

    def draw_rows(self, rng: np.random.Generator, count: int) -> np.ndarray:
        rows = np.asarray(self.sampler(rng, int(count)), dtype=np.uint8)
        if rows.shape != (count, self.n):
            raise ValueError(
                f"sampler returned shape {rows.shape}, expected {(count, self.n)}"
            )
        if rows.size and int(rows.max(initial=0)) > 1:
            raise ValueError("sampler produced values other than 0/1")
        return rows


SampleSource = Union[FiniteDistribution, ImplicitDistribution]


@dataclass(frozen=True)
class SampleHandle:
    """Opaque reference to one drawn sample of one oracle."""

    token: int
    source: int
    row: int


class SampleBatch(Sequence):
    """A contiguous block of handles from one draw call, with bulk access."""

    __slots__ = ("token", "source", "rows")

    def __init__(self, token: int, source: int, rows: np.ndarray):
        self.token = token
        self.source = source
        self.rows = np.asarray(rows, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.rows.size)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return SampleBatch(self.token, self.source, self.rows[item])
        return SampleHandle(self.token, self.source, int(self.rows[item]))

    def __iter__(self):
        for r in self.rows:
            yield SampleHandle(self.token, self.source, int(r))


class BilledOracle:
    """Sampling access to one or two distributions with per-bit billing.

    ``draw`` hands out handles; ``query``/``query_block`` reveal single bits
    and charge one unit per distinct (handle, position) pair over the
    oracle's lifetime.  Nothing else about a sample can be observed.
    """

    def __init__(self, sources, seed):
        if isinstance(sources, (FiniteDistribution, ImplicitDistribution)):
            sources = (sources,)
        sources = tuple(sources)
        if not 1 <= len(sources) <= 2:
            raise ValueError("an oracle serves one or two distributions")
        n = sources[0].n
        if any(s.n != n for s in sources):
            raise ValueError("all distributions must share the same n")
        if n < 1:
            raise ValueError("n must be at least 1")
        self._sources = sources
        self._n = n
        self._rng = new_rng(seed)
        self._token = next(_oracle_tokens)
        self._bits: list[np.ndarray] = [
            np.empty((0, n), dtype=np.uint8) for _ in sources
        ]
        self._seen: list[np.ndarray] = [
            np.empty((0, n), dtype=bool) for _ in sources
        ]
        self._queries = 0

    @property
    def n(self) -> int:
        return self._n

    @property
    def num_sources(self) -> int:
        return len(self._sources)

    @property
    def queries_used(self) -> int:
        return self._queries

    @property
    def samples_drawn(self) -> tuple[int, ...]:
        return tuple(int(b.shape[0]) for b in self._bits)

    def draw(self, count: int, source: int = 0) -> SampleBatch:
        """Draw ``count`` i.i.d. samples from ``source`` and return handles."""
        if not isinstance(count, (int, np.integer)) or count < 1:
            raise ValueError("sample count must be a positive integer")
        if not 0 <= source < len(self._sources):
            raise ValueError(f"no distribution with index {source}")
        rows = self._sources[source].draw_rows(self._rng, int(count))
        start = self._bits[source].shape[0]
        self._bits[source] = np.concatenate([self._bits[source], rows])
        self._seen[source] = np.concatenate(
            [self._seen[source], np.zeros((count, self._n), dtype=bool)]
        )
        return SampleBatch(self._token, source, np.arange(start, start + count))

    def query(self, handle: SampleHandle, position: int) -> int:
        """Reveal bit ``position`` (1-based) of the sample behind ``handle``."""
        self._check_handle(handle)
        if not 1 <= position <= self._n:
            raise ValueError(f"position {position} outside [1, {self._n}]")
        row, col = handle.row, position - 1
        seen = self._seen[handle.source]
        if not seen[row, col]:
            seen[row, col] = True
            self._queries += 1
        return int(self._bits[handle.source][row, col])

    def query_block(self, handles, positions) -> np.ndarray:
        """Reveal bits of several handles at once.

        ``positions`` is 1-based: either one 1-d array shared by every handle
        or a 2-d array with one row of positions per handle.  Returns a
        (len(handles), width) uint8 matrix.  Billing stays per distinct
        (handle, position) pair, duplicates inside the call included.
        """
        batch = self._as_batch(handles)
        pos = np.asarray(positions, dtype=np.int64)
        k = len(batch)
        if pos.ndim == 1:
            shared = True
        elif pos.ndim == 2 and pos.shape[0] == k:
            shared = False
        else:
            raise ValueError("positions must be 1-d or have one row per handle")
        if pos.size == 0:
            return np.empty((k, 0), dtype=np.uint8)
        if int(pos.min()) < 1 or int(pos.max()) > self._n:
            raise ValueError(f"positions outside [1, {self._n}]")
        rows = batch.rows
        cols = (pos if not shared else pos[None, :]) - 1
        out = self._bits[batch.source][rows[:, None], cols]

        seen = self._seen[batch.source]
        rows_unique = np.unique(rows).size == rows.size
        if shared:
            pos_unique = np.unique(pos).size == pos.size
        else:
            srt = np.sort(pos, axis=1)
            pos_unique = bool(np.all(srt[:, 1:] != srt[:, :-1])) if pos.shape[1] > 1 else True
        if rows_unique and pos_unique:
            fresh = ~seen[rows[:, None], cols]
            self._queries += int(fresh.sum())
            seen[rows[:, None], cols] = True
        else:
            # Duplicate handles or positions inside one call: bill through the
            # flattened (row, col) pair set instead.
            flat = (rows[:, None] * self._n + cols).ravel()
            uniq = np.unique(flat)
            flat_seen = seen.reshape(-1)
            self._queries += int(np.count_nonzero(~flat_seen[uniq]))
            flat_seen[uniq] = True
        return out

    def _check_handle(self, handle: SampleHandle) -> None:
        if not isinstance(handle, SampleHandle) or handle.token != self._token:
            raise ValueError("handle does not belong to this oracle")
        if not 0 <= handle.source < len(self._sources):
            raise ValueError("handle names an unknown distribution")
        if not 0 <= handle.row < self._bits[handle.source].shape[0]:
            raise ValueError("handle names a sample that was never drawn")

    def _as_batch(self, handles) -> SampleBatch:
        if isinstance(handles, SampleBatch):
            if handles.token != self._token:
                raise ValueError("handles do not belong to this oracle")
            if len(handles) and int(handles.rows.max()) >= self._bits[handles.source].shape[0]:
                raise ValueError("batch names samples that were never drawn")
            return handles
        if isinstance(handles, SampleHandle):
            handles = [handles]
        handles = list(handles)
        if not handles:
            raise ValueError("need at least one handle")
        for h in handles:
            self._check_handle(h)
        source = handles[0].source
        if any(h.source != source for h in handles):
            raise ValueError("one query_block call serves one distribution")
        return SampleBatch(
            self._token, source, np.array([h.row for h in handles], dtype=np.int64)
        )


@dataclass(frozen=True)
class SampleView:
    """Single-sample query window handed to string testers.

    Wraps (oracle, handle) so a string tester can probe one sample without
    seeing the oracle's other samples.  All billing flows through the oracle.
    """

    oracle: BilledOracle
    handle: SampleHandle

    @property
    def n(self) -> int:
        return self.oracle.n

    def query(self, position: int) -> int:
        return self.oracle.query(self.handle, position)

    def query_block(self, positions) -> np.ndarray:
        pos = np.asarray(positions, dtype=np.int64)
        return self.oracle.query_block([self.handle], pos[None, :])[0]


@dataclass(frozen=True)
class TesterReport:
    """Outcome of one tester run.

    ``samples_used`` lists draws per distribution in oracle order;
    ``queries_used`` is the oracle's billed total.  ``trace`` is a JSON-able
    dict; every tester stores its query budget there under ``"budget"`` with
    ``"kind"`` either ``"exact"`` (queries_used must equal ``"value"``) or
    ``"bound"`` (queries_used must not exceed ``"value"``; the schedule
    deduplicates random probes, so the billed count may fall below it).
    """

    verdict: str
    samples_used: tuple[int, ...]
    queries_used: int
    trace: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in ("accept", "reject"):
            raise ValueError("verdict must be 'accept' or 'reject'")

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "samples_used": list(self.samples_used),
            "queries_used": self.queries_used,
            "trace": self.trace,
        }


def finish_report(oracle: BilledOracle, accept: bool, trace: dict) -> TesterReport:
    """Assemble a report from the oracle's final counters."""
    return TesterReport(
        verdict="accept" if accept else "reject",
        samples_used=oracle.samples_drawn,
        queries_used=oracle.queries_used,
        trace=trace,
    )
