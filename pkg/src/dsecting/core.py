"""Set-family data model, the imbalance functional and D-secting verification.

A subset of the ground set ``[n] = {1, ..., n}`` is stored as an integer bit
mask: element ``j`` lives at bit ``j - 1``.  Elements are 1-based everywhere
outside this module's serialization boundary.

Bulk operations (verification, generation) run on numpy arrays.  Ground sets
with ``n <= 64`` use one ``uint64`` word per mask; larger ground sets use rows
of 64-bit blocks.  Both paths give identical answers and the block path can be
forced for differential testing.
"""

from __future__ import annotations

import io
import json
import math
import os
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import IO, Iterable, Sequence

import numpy as np

WORD_BITS = 64
DEFAULT_MAX_MEMBERS = 1 << 22


class ContractError(ValueError):
    """Operands violate an operation's precondition (e.g. mismatched ground sets)."""


class BudgetError(RuntimeError):
    """A requested enumeration or matrix exceeds the configured resource budget."""


class FamilyFormatError(ValueError):
    """Malformed family file."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


def max_members() -> int:
    """Enumeration budget, overridable with ``DSECTING_MAX_MEMBERS``."""
    raw = os.environ.get("DSECTING_MAX_MEMBERS")
    return int(raw) if raw else DEFAULT_MAX_MEMBERS


def full_mask(n: int) -> int:
    return (1 << n) - 1


def n_words(n: int) -> int:
    return max(1, -(-n // WORD_BITS))


def to_blocks(bits: int, n: int) -> tuple[int, ...]:
    """Split a mask into little-endian 64-bit words."""
    lo = (1 << WORD_BITS) - 1
    return tuple((bits >> (WORD_BITS * w)) & lo for w in range(n_words(n)))


def _popcount_blocks(a: Sequence[int], b: Sequence[int]) -> int:
    return sum((x & y).bit_count() for x, y in zip(a, b))


@dataclass(frozen=True, order=True)
class SubsetMask:
    """A subset of ``[n]`` as a bit vector."""

    bits: int
    n: int

    def __post_init__(self):
        if type(self.bits) is not int:
            object.__setattr__(self, "bits", int(self.bits))
        if self.n < 1:
            raise ContractError(f"ground set size must be >= 1, got {self.n}")
        if self.bits < 0 or self.bits >> self.n:
            raise ContractError(f"mask {self.bits:#x} has bits outside [1..{self.n}]")

    @classmethod
    def from_elements(cls, elements: Iterable[int], n: int) -> SubsetMask:
        bits = 0
        for e in elements:
            e = int(e)  # numpy integers would overflow the shift past 64
            if not 1 <= e <= n:
                raise ContractError(f"element {e} outside [1..{n}]")
            bits |= 1 << (e - 1)
        return cls(bits, n)

    @classmethod
    def empty(cls, n: int) -> SubsetMask:
        return cls(0, n)

    @classmethod
    def full(cls, n: int) -> SubsetMask:
        return cls(full_mask(n), n)

    def elements(self) -> list[int]:
        out = []
        bits, j = self.bits, 1
        while bits:
            if bits & 1:
                out.append(j)
            bits >>= 1
            j += 1
        return out

    @property
    def cardinality(self) -> int:
        return self.bits.bit_count()

    def __len__(self) -> int:
        return self.cardinality

    def __contains__(self, element: int) -> bool:
        return 1 <= element <= self.n and bool(self.bits >> (element - 1) & 1)

    def __iter__(self):
        return iter(self.elements())

    def complement(self) -> SubsetMask:
        return SubsetMask(full_mask(self.n) ^ self.bits, self.n)

    def intersect(self, other: SubsetMask) -> SubsetMask:
        _same_ground(self, other)
        return SubsetMask(self.bits & other.bits, self.n)

    def blocks(self) -> tuple[int, ...]:
        return to_blocks(self.bits, self.n)

    def pm_vector(self) -> np.ndarray:
        """The +1/-1 incidence vector (+1 on members)."""
        x = self.zero_one_vector()
        return 2 * x - 1

    def zero_one_vector(self) -> np.ndarray:
        return np.array([(self.bits >> j) & 1 for j in range(self.n)], dtype=np.int64)

    def __repr__(self) -> str:
        return f"SubsetMask({{{', '.join(map(str, self.elements()))}}}, n={self.n})"


def _same_ground(a: SubsetMask, b: SubsetMask) -> None:
    if a.n != b.n:
        raise ContractError(f"ground sets differ: n={a.n} vs n={b.n}")


def imbalance(a: SubsetMask, b: SubsetMask, multiword: bool | None = None) -> int:
    """Return ``|A & B| - |A - B|``, i.e. ``2|A & B| - |A|``.

    This is the dot product of A's 0/1 incidence vector with B's +1/-1 vector.
    """
    _same_ground(a, b)
    if multiword is None:
        multiword = a.n > WORD_BITS
    if multiword:
        common = _popcount_blocks(a.blocks(), b.blocks())
    else:
        common = (a.bits & b.bits).bit_count()
    return 2 * common - a.cardinality


@dataclass(frozen=True)
class DSpec:
    """Allowed imbalance set: ``interval`` is ``{-i..i}``, ``singleton`` is ``{i}``."""

    kind: str
    i: int

    def __post_init__(self):
        if self.kind not in ("interval", "singleton"):
            raise ValueError(f"unknown D kind {self.kind!r}")
        if self.i < 0:
            raise ValueError("D parameter must be non-negative")

    @classmethod
    def interval(cls, i: int) -> DSpec:
        return cls("interval", i)

    @classmethod
    def singleton(cls, i: int) -> DSpec:
        return cls("singleton", i)

    @classmethod
    def parse(cls, text: str) -> DSpec:
        """Parse ``interval:i`` or ``singleton:i``."""
        kind, sep, value = text.strip().partition(":")
        if not sep:
            raise ValueError(f"D must look like 'interval:i' or 'singleton:i', got {text!r}")
        try:
            i = int(value)
        except ValueError:
            raise ValueError(f"bad D parameter in {text!r}") from None
        return cls(kind.strip().lower(), i)

    @property
    def symmetric(self) -> bool:
        return self.kind == "interval" or self.i == 0

    def __contains__(self, value: int) -> bool:
        if self.kind == "interval":
            return -self.i <= value <= self.i
        return value == self.i

    def values(self) -> list[int]:
        if self.kind == "interval":
            return list(range(-self.i, self.i + 1))
        return [self.i]

    def canonical(self) -> DSpec:
        # Interval(0) and Singleton(0) denote the same set.
        return DSpec.singleton(0) if self.i == 0 else self

    def __eq__(self, other):
        if not isinstance(other, DSpec):
            return NotImplemented
        a, b = self.canonical(), other.canonical()
        return (a.kind, a.i) == (b.kind, b.i)

    def __hash__(self):
        c = self.canonical()
        return hash((c.kind, c.i))

    def __str__(self) -> str:
        return f"{self.kind}:{self.i}"


def dsects(a: SubsetMask, b: SubsetMask, d: DSpec) -> bool:
    """True iff B D-sects A."""
    return imbalance(a, b) in d


@dataclass(frozen=True)
class Family:
    """An ordered list of subsets of ``[n]``."""

    n: int
    masks: tuple[int, ...]
    dedup: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"ground set size must be >= 1, got {self.n}")
        masks = self.masks
        if not isinstance(masks, tuple) or (masks and type(masks[0]) is not int):
            masks = tuple(int(m) for m in masks)
            object.__setattr__(self, "masks", masks)
        if masks:
            lo, hi = min(masks), max(masks)
            if lo < 0 or hi >> self.n:
                bad = lo if lo < 0 else hi
                raise ContractError(f"mask {bad:#x} has bits outside [1..{self.n}]")

    @classmethod
    def from_sets(cls, sets: Iterable[Iterable[int]], n: int) -> Family:
        return cls(n, tuple(SubsetMask.from_elements(s, n).bits for s in sets))

    @classmethod
    def from_members(cls, members: Iterable[SubsetMask], n: int | None = None) -> Family:
        members = list(members)
        if n is None:
            if not members:
                raise ContractError("cannot infer n from an empty member list")
            n = members[0].n
        for mem in members:
            if mem.n != n:
                raise ContractError(f"member over n={mem.n} in family over n={n}")
        return cls(n, tuple(m.bits for m in members))

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self):
        return (SubsetMask(m, self.n) for m in self.masks)

    def __getitem__(self, idx: int) -> SubsetMask:
        return SubsetMask(self.masks[idx], self.n)

    @property
    def members(self) -> list[SubsetMask]:
        return list(self)

    def sets(self) -> list[list[int]]:
        return [SubsetMask(m, self.n).elements() for m in self.masks]

    def sizes(self) -> list[int]:
        return [m.bit_count() for m in self.masks]

    def deduplicated(self) -> Family:
        seen = set()
        kept = []
        for m in self.masks:
            if m not in seen:
                seen.add(m)
                kept.append(m)
        if len(kept) == len(self.masks):
            return self
        return Family(self.n, tuple(kept), dedup=True)

    @cached_property
    def _word_array(self) -> np.ndarray:
        return masks_to_array(self.masks, self.n, multiword=False)

    @cached_property
    def _block_array(self) -> np.ndarray:
        return masks_to_array(self.masks, self.n, multiword=True)

    def array(self, multiword: bool | None = None) -> np.ndarray:
        """Masks as ``uint64`` words (shape ``(m,)``) or blocks (shape ``(m, W)``)."""
        if multiword is None:
            multiword = self.n > WORD_BITS
        return self._block_array if multiword else self._word_array

    def __repr__(self) -> str:
        body = ", ".join("{" + ",".join(map(str, s)) + "}" for s in self.sets()[:8])
        more = ", ..." if len(self) > 8 else ""
        return f"Family(n={self.n}, [{body}{more}])"


def masks_to_array(masks: Sequence[int], n: int, multiword: bool) -> np.ndarray:
    if not multiword:
        if n > WORD_BITS:
            raise ContractError("single-word path requires n <= 64")
        return np.fromiter(masks, dtype=np.uint64, count=len(masks))
    w = n_words(n)
    out = np.zeros((len(masks), w), dtype=np.uint64)
    lo = (1 << WORD_BITS) - 1
    for r, m in enumerate(masks):
        for c in range(w):
            out[r, c] = (m >> (WORD_BITS * c)) & lo
    return out


def _popcount_rows(arr: np.ndarray) -> np.ndarray:
    counts = np.bitwise_count(arr).astype(np.int64)
    return counts if arr.ndim == 1 else counts.sum(axis=1)


def imbalance_vector(family: Family, b: SubsetMask, multiword: bool | None = None) -> np.ndarray:
    """Imbalance of every member of ``family`` against ``b``."""
    if family.n != b.n:
        raise ContractError(f"ground sets differ: n={family.n} vs n={b.n}")
    if multiword is None:
        multiword = family.n > WORD_BITS
    arr = family.array(multiword)
    if multiword:
        bb = np.array(b.blocks(), dtype=np.uint64)
        common = _popcount_rows(arr & bb)
    else:
        common = _popcount_rows(arr & np.uint64(b.bits))
    return 2 * common - _popcount_rows(arr)


def _in_d(values: np.ndarray, d: DSpec) -> np.ndarray:
    if d.kind == "interval":
        return np.abs(values) <= d.i
    return values == d.i


def covered_members(family: Family, secting: Family, d: DSpec, multiword: bool | None = None) -> np.ndarray:
    """Boolean array: which members of ``family`` some member of ``secting`` D-sects."""
    if family.n != secting.n:
        raise ContractError(f"ground sets differ: n={family.n} vs n={secting.n}")
    covered = np.zeros(len(family), dtype=bool)
    if not len(family):
        return covered
    for b in secting:
        covered |= _in_d(imbalance_vector(family, b, multiword), d)
        if covered.all():
            break
    return covered


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    witness: SubsetMask | None = None
    index: int | None = None
    uncovered: int = 0

    def __bool__(self) -> bool:
        return self.ok


def verify_dsecting(family: Family, secting: Family, d: DSpec, multiword: bool | None = None) -> VerifyResult:
    """Check that every member of ``family`` is D-sected by some member of ``secting``.

    On failure the witness is the first uncovered member in family order.
    """
    covered = covered_members(family, secting, d, multiword)
    missing = np.flatnonzero(~covered)
    if missing.size == 0:
        return VerifyResult(True)
    idx = int(missing[0])
    return VerifyResult(False, family[idx], idx, int(missing.size))


def complement_members(secting: Family, flips: Sequence[bool | int]) -> Family:
    """Replace member ``j`` by its complement wherever ``flips[j]`` is set."""
    if len(flips) != len(secting):
        raise ContractError(f"flips has length {len(flips)}, family has {len(secting)} members")
    top = full_mask(secting.n)
    return Family(secting.n, tuple(m ^ top if f else m for m, f in zip(secting.masks, flips)), secting.dedup)


# ---------------------------------------------------------------------------
# Generators


@dataclass(frozen=True)
class FamilyKind:
    """Descriptor of a generated family: ``all``, ``all:k``, ``odd``, ``parity:i``, ``uppertail:k``, ``pairs``."""

    name: str
    param: int | None = None

    @classmethod
    def parse(cls, text: str) -> FamilyKind:
        name, sep, value = text.strip().lower().partition(":")
        aliases = {"all_nonempty": "all", "all_k_subsets": "all", "odd_subsets": "odd",
                   "parity_subsets": "parity", "upper_tail": "uppertail"}
        name = aliases.get(name, name)
        if name not in ("all", "odd", "parity", "uppertail", "pairs"):
            raise ValueError(f"unknown family kind {text!r}")
        param = int(value) if sep else None
        if name in ("parity", "uppertail") and param is None:
            raise ValueError(f"{name} needs a parameter, e.g. {name}:2")
        if name in ("odd", "pairs") and param is not None:
            raise ValueError(f"{name} takes no parameter")
        return cls(name, param)

    def __str__(self) -> str:
        return self.name if self.param is None else f"{self.name}:{self.param}"

    def count(self, n: int) -> int:
        """Number of members this kind has over ``[n]``."""
        sizes = self.sizes(n)
        return sum(math.comb(n, s) for s in sizes)

    def sizes(self, n: int) -> list[int]:
        p = self.param
        if self.name == "all":
            return list(range(1, n + 1)) if p is None else [p]
        if self.name == "odd":
            return list(range(1, n + 1, 2))
        if self.name == "parity":
            return list(range(p, n + 1, 2))
        if self.name == "uppertail":
            return list(range(p, n + 1))
        return [2]


def _check_range(kind: FamilyKind, n: int) -> None:
    p = kind.param
    if n < 1:
        raise ValueError("n must be >= 1")
    if p is not None and not 0 <= p <= n:
        raise ValueError(f"parameter {p} of {kind} outside [0..{n}]")


def generate_family(n: int, kind: FamilyKind | str, budget: int | None = None) -> Family:
    """Enumerate a standard family in colexicographic (ascending mask) order."""
    if isinstance(kind, str):
        kind = FamilyKind.parse(kind)
    _check_range(kind, n)
    budget = max_members() if budget is None else budget
    total = kind.count(n)
    if total > budget:
        raise BudgetError(f"{kind} over [{n}] has {total} members, budget is {budget}")
    return _generate(n, kind)


@lru_cache(maxsize=16)
def _generate(n: int, kind: FamilyKind) -> Family:
    sizes = set(kind.sizes(n))
    if not sizes:
        return Family(n, ())
    if n <= 26:
        allm = np.arange(1 << n, dtype=np.uint64)
        pc = np.bitwise_count(allm)
        keep = np.isin(pc, np.array(sorted(sizes), dtype=pc.dtype))
        return Family(n, tuple(allm[keep].tolist()))
    # Large n: walk each layer with Gosper's hack, then merge into mask order.
    out: list[int] = []
    for s in sizes:
        out.extend(_layer(n, s))
    out.sort()
    return Family(n, tuple(out))


def _layer(n: int, k: int):
    if k == 0:
        yield 0
        return
    x = (1 << k) - 1
    limit = 1 << n
    while x < limit:
        yield x
        c = x & -x
        r = x + c
        x = (((r ^ x) >> 2) // c) | r


# ---------------------------------------------------------------------------
# Serialization


def _load_checked(n, sets, locate) -> Family:
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise FamilyFormatError(f"'n' must be a positive integer, got {n!r}", *locate(None, None))
    if not isinstance(sets, list):
        raise FamilyFormatError("'sets' must be a list", *locate(None, None))
    masks = []
    for si, s in enumerate(sets):
        if not isinstance(s, list):
            raise FamilyFormatError(f"sets[{si}] is not a list", *locate(si, None))
        bits = 0
        for ei, e in enumerate(s):
            if not isinstance(e, int) or isinstance(e, bool):
                raise FamilyFormatError(f"sets[{si}][{ei}] = {e!r} is not an integer", *locate(si, ei))
            if not 1 <= e <= n:
                raise FamilyFormatError(f"sets[{si}][{ei}]: element {e} outside [1..{n}]", *locate(si, ei))
            if bits >> (e - 1) & 1:
                raise FamilyFormatError(f"sets[{si}]: duplicate element {e}", *locate(si, ei))
            bits |= 1 << (e - 1)
        masks.append(bits)
    return _finish(Family(n, tuple(masks)))


def _finish(fam: Family) -> Family:
    out = fam.deduplicated()
    if out is not fam:
        warnings.warn(f"removed {len(fam) - len(out)} duplicate member(s)", stacklevel=3)
    return out


def _json_locator(text: str):
    """Map (set index, element index) to an approximate line/column in ``text``."""

    def locate(si, ei):
        if si is None:
            return (None, None)
        start = text.find('"sets"')
        if start < 0:
            return (None, None)
        pos = text.find("[", start) + 1
        depth, seen, elem_seen = 0, -1, -1
        while pos < len(text):
            ch = text[pos]
            if ch == "[":
                depth += 1
                if depth == 1:
                    seen += 1
                    elem_seen = -1
                    if seen == si and ei is None:
                        break
            elif ch == "]":
                if depth == 0:
                    return (None, None)
                depth -= 1
            elif depth == 1 and seen == si and (ch.isdigit() or ch == "-"):
                if pos == 0 or not (text[pos - 1].isdigit() or text[pos - 1] == "-"):
                    elem_seen += 1
                    if elem_seen == ei:
                        break
            pos += 1
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        return (line, col)

    return locate


def loads_family(text: str) -> Family:
    """Parse either the JSON format or the compact hex line format."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FamilyFormatError(exc.msg, exc.lineno, exc.colno) from None
        if not isinstance(doc, dict) or "n" not in doc or "sets" not in doc:
            raise FamilyFormatError("expected an object with keys 'n' and 'sets'", 1, 1)
        return _load_checked(doc["n"], doc["sets"], _json_locator(text))
    return _loads_compact(text)


def _loads_compact(text: str) -> Family:
    n = None
    masks = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if n is None:
            if not line.startswith("n="):
                raise FamilyFormatError("first line must be 'n=<int>'", lineno, 1)
            try:
                n = int(line[2:])
            except ValueError:
                raise FamilyFormatError(f"bad ground-set size {line[2:]!r}", lineno, 3) from None
            if n < 1:
                raise FamilyFormatError("n must be >= 1", lineno, 3)
            continue
        if any(c not in "0123456789abcdef" for c in line):
            col = next(i for i, c in enumerate(line) if c not in "0123456789abcdef") + 1
            raise FamilyFormatError(f"not a lowercase hex mask: {line!r}", lineno, col)
        bits = int(line, 16)
        if bits >> n:
            raise FamilyFormatError(f"mask {line} has elements above {n}", lineno, 1)
        masks.append(bits)
    if n is None:
        raise FamilyFormatError("missing 'n=<int>' header", 1, 1)
    return _finish(Family(n, tuple(masks)))


def read_family(stream: IO[str]) -> Family:
    return loads_family(stream.read())


def dumps_family(family: Family, extra: dict | None = None) -> str:
    """Canonical JSON: ascending elements, stored set order, newline-terminated."""
    doc = {"n": family.n, "sets": family.sets()}
    if extra:
        doc.update(extra)
    return json.dumps(doc, separators=(",", ":")) + "\n"


def write_family(family: Family, stream: IO[str], extra: dict | None = None) -> None:
    stream.write(dumps_family(family, extra))


def dumps_compact(family: Family, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        for line in header.splitlines():
            buf.write(f"# {line}\n")
    buf.write(f"n={family.n}\n")
    for m in family.masks:
        buf.write(f"{m:x}\n")
    return buf.getvalue()
