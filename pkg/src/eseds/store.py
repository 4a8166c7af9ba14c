"""Server-side state: cell arrays, the sparse-index decoupled layout, persistence.

The server never interprets cell contents.  Cells are opaque byte strings
handed over by the client; the only structure the server maintains is their
order (dense mode: an array with shift-insert plus a fresh random rotation
per insert; decoupled mode: an ordered map from sparse indices to cells with
midpoint insertion and a background rebalancer).
"""

from __future__ import annotations

import io
import random
import struct
from dataclasses import dataclass, field

MAGIC = b"ESEDS\x00"
VERSION = 1

MODE_DENSE = 0
MODE_DECOUPLED = 1
MODE_DET = 2
MODE_OPE = 3
MODE_FHOPE = 4

#: sparse index width used when none is configured (256-bit index space)
DEFAULT_INDEX_BITS = 256

_HEADER = struct.Struct("<HBHQ")  # version, mode, domain_bits, count


class StoreError(Exception):
    """Base class for store failures."""


class OutOfRange(StoreError):
    """A logical index or rank is out of range."""


class ModeError(StoreError):
    """Operation invoked on a store of the wrong mode."""


class MidpointCollision(StoreError):
    """No free sparse index strictly between the two neighbors."""


class StoreFull(StoreError):
    """The sparse index space cannot hold another cell even after rebalance."""


class FormatError(StoreError):
    """Persisted data is malformed (bad magic/version, truncated, trailing)."""


# ---------------------------------------------------------------------------
# persistence helpers shared by all modes (legacy transform files reuse them)
# ---------------------------------------------------------------------------


def read_exact(src: io.BufferedIOBase, n: int) -> bytes:
    buf = src.read(n)
    if buf is None or len(buf) != n:
        raise FormatError("truncated store file")
    return buf


def write_header(sink: io.BufferedIOBase, mode: int, domain_bits: int, count: int) -> None:
    sink.write(MAGIC)
    sink.write(_HEADER.pack(VERSION, mode, domain_bits, count))


def read_header(src: io.BufferedIOBase) -> tuple[int, int, int]:
    """Returns (mode, domain_bits, count); raises FormatError on mismatch."""
    if read_exact(src, len(MAGIC)) != MAGIC:
        raise FormatError("bad magic: not a store file")
    version, mode, domain_bits, count = _HEADER.unpack(read_exact(src, _HEADER.size))
    if version != VERSION:
        raise FormatError(f"unsupported store version {version}")
    return mode, domain_bits, count


def write_blob(sink: io.BufferedIOBase, blob: bytes) -> None:
    sink.write(struct.pack("<I", len(blob)))
    sink.write(blob)


def read_blob(src: io.BufferedIOBase) -> bytes:
    (n,) = struct.unpack("<I", read_exact(src, 4))
    return read_exact(src, n)


def expect_eof(src: io.BufferedIOBase) -> None:
    if src.read(1):
        raise FormatError("trailing bytes after store records")


def peek_mode(source) -> int:
    """Mode byte of a store file, without loading the records."""
    with _as_reader(source) as src:
        mode, _, _ = read_header(src)
        return mode


class _as_reader:
    """Accept either a binary stream or a filesystem path."""

    def __init__(self, source):
        self._source = source
        self._owned = None

    def __enter__(self):
        if hasattr(self._source, "read"):
            return self._source
        self._owned = open(self._source, "rb")
        return self._owned

    def __exit__(self, *exc):
        if self._owned is not None:
            self._owned.close()


class _as_writer:
    def __init__(self, sink):
        self._sink = sink
        self._owned = None

    def __enter__(self):
        if hasattr(self._sink, "write"):
            return self._sink
        self._owned = open(self._sink, "wb")
        return self._owned

    def __exit__(self, *exc):
        if self._owned is not None:
            self._owned.close()


# ---------------------------------------------------------------------------
# dense mode
# ---------------------------------------------------------------------------


class DenseStore:
    """Cell array with shift-insert and a fresh uniform rotation per insert.

    The rotation is kept as a logical start offset instead of physically
    copying the array: cell j lives at ``_cells[(_start + j) % n]``.  Save
    materializes the logical order, so files always load with offset 0.
    """

    mode = MODE_DENSE
    domain_bits = 0  # no sparse indices in this mode

    def __init__(self, cells: list[bytes] | None = None, *, rng: random.Random | None = None):
        self._cells: list[bytes] = list(cells) if cells else []
        self._start = 0
        self._rng = rng if rng is not None else random.SystemRandom()

    def __len__(self) -> int:
        return len(self._cells)

    def get_cell(self, j: int) -> bytes:
        n = len(self._cells)
        if not 0 <= j < n:
            raise OutOfRange(f"index {j} out of range for {n} cells")
        return self._cells[(self._start + j) % n]

    def insert_at(self, l: int, cell: bytes, rotation_coins=None) -> None:
        """Insert at logical slot l (0 <= l <= n), then rotate by a fresh
        uniform offset drawn from the server's randomness."""
        n = len(self._cells)
        if not 0 <= l <= n:
            raise OutOfRange(f"slot {l} out of range for {n} cells")
        logical = [self.get_cell(j) for j in range(n)]
        logical.insert(l, bytes(cell))
        coins = rotation_coins if rotation_coins is not None else self._rng
        s = coins.randrange(n + 1)
        # logical cell j of the rotated array is logical[(j + s) % (n + 1)];
        # storing the post-insert array with start offset s realizes exactly that
        self._cells = logical
        self._start = s

    def logical_cells(self) -> list[bytes]:
        return [self.get_cell(j) for j in range(len(self._cells))]

    def save(self, sink) -> None:
        with _as_writer(sink) as out:
            cells = self.logical_cells()
            write_header(out, self.mode, self.domain_bits, len(cells))
            for cell in cells:
                write_blob(out, cell)

    @classmethod
    def _load_records(cls, src, count: int) -> "DenseStore":
        store = cls()
        store._cells = [read_blob(src) for _ in range(count)]
        expect_eof(src)
        return store

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DenseStore):
            return NotImplemented
        return self.logical_cells() == other.logical_cells()


# ---------------------------------------------------------------------------
# decoupled mode
# ---------------------------------------------------------------------------


@dataclass
class _Entry:
    sparse: int
    cell: bytes


@dataclass
class RebalanceCursor:
    """Progress of one incremental rebalance pass.

    ``next_position`` counts post-rotation ranks already re-indexed;
    ``pending_rotation`` is the offset drawn once at the start of the pass.
    """

    next_position: int
    pending_rotation: int
    _plan: list = field(default_factory=list, repr=False)
    _stamp: int = 0

    @property
    def done(self) -> bool:
        return self.next_position >= len(self._plan)


class DecoupledStore:
    """Sorted map from sparse indices to cells; rank = position in sparse order.

    Inserts go to the midpoint of the two neighboring sparse indices and so
    return immediately; a gap of <= 1 leaves no free midpoint and triggers a
    synchronous local rebalance of the smallest enclosing region with enough
    slack.  A background full pass re-spaces all entries equidistantly and
    applies a fresh rotation.
    """

    mode = MODE_DECOUPLED

    def __init__(self, index_bits: int = DEFAULT_INDEX_BITS, *, rng: random.Random | None = None):
        if not 8 <= index_bits <= 1 << 15 or index_bits % 8:
            raise StoreError(f"index_bits must be a multiple of 8 in [8, 32768], got {index_bits}")
        self.domain_bits = index_bits
        self._entries: list[_Entry] = []
        self._rng = rng if rng is not None else random.SystemRandom()
        self._mutations = 0
        self.collisions = 0  # forced local rebalances observed (test visibility)

    @property
    def index_space(self) -> int:
        return 1 << self.domain_bits

    def __len__(self) -> int:
        return len(self._entries)

    def get_cell(self, j: int) -> bytes:
        if not 0 <= j < len(self._entries):
            raise OutOfRange(f"rank {j} out of range for {len(self._entries)} cells")
        return self._entries[j].cell

    def sparse_indices(self) -> list[int]:
        return [e.sparse for e in self._entries]

    def logical_cells(self) -> list[bytes]:
        return [e.cell for e in self._entries]

    def _bounds(self, j_left: int | None, j_right: int | None) -> tuple[int, int]:
        n = len(self._entries)
        if j_left is None and j_right is None:
            if n:
                raise OutOfRange("both ends open on a non-empty store")
        elif j_left is None:
            if j_right != 0:
                raise OutOfRange("left sentinel requires right rank 0")
        elif j_right is None:
            if j_left != n - 1:
                raise OutOfRange(f"right sentinel requires left rank {n - 1}")
        elif j_right != j_left + 1:
            raise OutOfRange(f"ranks {j_left},{j_right} are not adjacent")
        if j_left is not None and not 0 <= j_left < n:
            raise OutOfRange(f"rank {j_left} out of range")
        if j_right is not None and not 0 <= j_right < n:
            raise OutOfRange(f"rank {j_right} out of range")
        lo = 0 if j_left is None else self._entries[j_left].sparse
        hi = self.index_space if j_right is None else self._entries[j_right].sparse
        return lo, hi

    def insert_between(
        self, j_left: int | None, j_right: int | None, cell: bytes, *, auto_rebalance: bool = True
    ) -> int:
        """Store the cell at the midpoint sparse index between two adjacent
        ranks (None = virtual bound of the index space).  Returns the sparse
        index used.  With auto_rebalance the gap<=1 collision is recovered by
        a synchronous local rebalance and a single retry."""
        lo, hi = self._bounds(j_left, j_right)
        if hi - lo <= 1:
            if not auto_rebalance:
                raise MidpointCollision(f"no free index between {lo} and {hi}")
            self.collisions += 1
            self._local_rebalance(j_left, j_right)
            lo, hi = self._bounds(j_left, j_right)
            if hi - lo <= 1:
                raise StoreFull("sparse index space exhausted")
        sparse = (hi - lo) // 2 + lo
        rank = j_right if j_right is not None else len(self._entries)
        self._entries.insert(rank, _Entry(sparse, bytes(cell)))
        self._mutations += 1
        return sparse

    def _local_rebalance(self, j_left: int | None, j_right: int | None) -> None:
        """Re-space the smallest window of ranks enclosing the collision so
        every gap inside it is >= 2, growing the window until there is slack."""
        n = len(self._entries)
        wl = j_left if j_left is not None else 0
        wr = j_right if j_right is not None else n - 1
        while True:
            lo = 0 if wl == 0 else self._entries[wl - 1].sparse
            hi = self.index_space if wr == n - 1 else self._entries[wr + 1].sparse
            count = wr - wl + 1
            step = (hi - lo) // (count + 1)
            if step >= 2:
                break
            if wl == 0 and wr == n - 1:
                raise StoreFull("sparse index space exhausted")
            wl = max(0, wl - 1)
            wr = min(n - 1, wr + 1)
        for i in range(count):
            self._entries[wl + i].sparse = lo + (i + 1) * step
        self._mutations += 1

    # -- background rebalancer ------------------------------------------------

    def start_rebalance(self) -> RebalanceCursor:
        n = len(self._entries)
        cursor = RebalanceCursor(
            next_position=0,
            pending_rotation=self._rng.randrange(n) if n else 0,
        )
        cursor._plan = list(self._entries)  # entry refs in rank order at pass start
        cursor._stamp = self._mutations
        if n and self.index_space // (n + 1) < 1:
            raise StoreFull("too many cells for the sparse index space")
        return cursor

    def _pass_target(self, p: int, n: int) -> int:
        # rank p lands at (p+1) * floor(space/(n+1)): every inter-entry gap
        # is exactly the step; the division remainder sits above the top entry
        return (p + 1) * (self.index_space // (n + 1))

    def rebalance_step(self, cursor: RebalanceCursor | None, batch: int) -> RebalanceCursor:
        """Re-index up to ``batch`` entries (batch <= 0 means finish the pass).

        The entry with post-rotation rank i ends at the i-th of n evenly
        spread sparse indices; the rotation offset is drawn once per pass.
        If the store was mutated since the pass began, the pass restarts; no
        intermediate state ever holds two entries with the same sparse index.
        """
        if cursor is None or cursor._stamp != self._mutations:
            cursor = self.start_rebalance()
        n = len(cursor._plan)
        if batch <= 0:
            batch = n
        by_sparse = {e.sparse: e for e in self._entries}
        end = min(cursor.next_position + batch, n)
        for p in range(cursor.next_position, end):
            entry = cursor._plan[(p + cursor.pending_rotation) % n]
            target = self._pass_target(p, n)
            if entry.sparse == target:
                continue
            occupant = by_sparse.get(target)
            del by_sparse[entry.sparse]
            if occupant is not None:
                # swap: the displaced entry takes the moving entry's old index,
                # so indices stay pairwise distinct at every intermediate point
                occupant.sparse = entry.sparse
                by_sparse[occupant.sparse] = occupant
            entry.sparse = target
            by_sparse[target] = entry
        cursor.next_position = end
        self._entries.sort(key=lambda e: e.sparse)
        return cursor

    def rebalance(self) -> None:
        """Run one complete pass."""
        self.rebalance_step(None, 0)

    def save(self, sink) -> None:
        with _as_writer(sink) as out:
            write_header(out, self.mode, self.domain_bits, len(self._entries))
            width = self.domain_bits // 8
            for e in self._entries:
                out.write(e.sparse.to_bytes(width, "big"))
                write_blob(out, e.cell)

    @classmethod
    def _load_records(cls, src, domain_bits: int, count: int) -> "DecoupledStore":
        store = cls(domain_bits)
        width = domain_bits // 8
        prev = -1
        for _ in range(count):
            sparse = int.from_bytes(read_exact(src, width), "big")
            if sparse <= prev:
                raise FormatError("sparse indices not strictly increasing")
            prev = sparse
            store._entries.append(_Entry(sparse, read_blob(src)))
        expect_eof(src)
        return store

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DecoupledStore):
            return NotImplemented
        return self.domain_bits == other.domain_bits and [
            (e.sparse, e.cell) for e in self._entries
        ] == [(e.sparse, e.cell) for e in other._entries]


def load(source):
    """Load a dense or decoupled store from a path or binary stream."""
    with _as_reader(source) as src:
        mode, domain_bits, count = read_header(src)
        if mode == MODE_DENSE:
            return DenseStore._load_records(src, count)
        if mode == MODE_DECOUPLED:
            return DecoupledStore._load_records(src, domain_bits, count)
        raise ModeError(f"mode {mode} is a legacy transform file, not a cell store")


def save(store, sink) -> None:
    store.save(sink)
