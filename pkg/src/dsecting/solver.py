"""Exact minimum D-secting families and exact discrepancy.

The minimum D-secting family problem is set cover: the universe is the
family's members, and each candidate subset B of [n] covers the members it
D-sects.  :func:`exact_beta` solves it by iterative deepening on the cover
size, seeded with a greedy upper bound.  At each node it branches on the
uncovered member with the fewest live candidates and prunes with
``ceil(uncovered / best single cover)``.

Symmetry.  Two points are twins when swapping them maps the family onto
itself.  Permuting points inside twin classes while fixing the sets already
chosen and the member being branched on preserves everything the search
depends on.  Candidates in the same orbit of that group are interchangeable,
so one representative per orbit is tried and a failed orbit is excluded from
later sibling branches.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import BudgetError, DSpec, Family, SubsetMask, full_mask

DEFAULT_MAX_N = 24
DEFAULT_MAX_BITS = 1 << 31


class InfeasibleError(ValueError):
    """Some member cannot be D-sected by any subset at all."""

    def __init__(self, member: SubsetMask, d: DSpec):
        self.member = member
        super().__init__(f"no subset D-sects {set(member.elements()) or '{}'} for D={d} "
                         f"(|A|={member.cardinality})")


class SearchLimit(Exception):
    pass


def _env_int(name: str, default: int | None) -> int | None:
    raw = os.environ.get(name)
    return int(raw) if raw else default


@dataclass(frozen=True)
class CoverageMatrix:
    """``covers[c]`` has bit ``a`` set iff ``candidates[c]`` D-sects member ``a``."""

    family: Family
    D: DSpec
    candidates: tuple[int, ...]
    covers: tuple[int, ...]

    def column(self, a: int) -> int:
        """Bitset over candidate indices covering member ``a``."""
        out = 0
        for c, row in enumerate(self.covers):
            if row >> a & 1:
                out |= 1 << c
        return out


def _candidate_masks(n: int, d: DSpec, canonical: bool = True) -> np.ndarray:
    if d.symmetric and canonical:
        # one of each complement pair (the one containing element 1), plus the empty set
        odd = np.arange(1, 1 << n, 2, dtype=np.uint64)
        return np.concatenate([np.zeros(1, dtype=np.uint64), odd])
    return np.arange(1 << n, dtype=np.uint64)


def _in_d(values: np.ndarray, d: DSpec) -> np.ndarray:
    if d.kind == "interval":
        return np.abs(values) <= d.i
    return values == d.i


def _bool_matrix(family: Family, d: DSpec, cands: np.ndarray) -> np.ndarray:
    """(candidates x members) boolean coverage."""
    out = np.empty((len(cands), len(family)), dtype=bool)
    for a, mask in enumerate(family.masks):
        size = mask.bit_count()
        imb = 2 * np.bitwise_count(cands & np.uint64(mask)).astype(np.int64) - size
        out[:, a] = _in_d(imb, d)
    return out


def _pack_rows(mat: np.ndarray) -> list[int]:
    if mat.shape[1] == 0:
        return [0] * mat.shape[0]
    packed = np.packbits(mat, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def _check_budget(n: int, m: int, symmetric: bool, max_n: int | None, max_bits: int | None) -> None:
    max_n = _env_int("DSECTING_SOLVER_MAX_N", DEFAULT_MAX_N) if max_n is None else max_n
    max_bits = _env_int("DSECTING_SOLVER_MAX_BITS", DEFAULT_MAX_BITS) if max_bits is None else max_bits
    n_cand = (1 << (n - 1)) + 1 if symmetric else 1 << n
    need = n_cand * max(m, 1)
    if n > max_n or need > max_bits:
        raise BudgetError(f"coverage matrix needs {n_cand} candidates x {m} members = {need} bits "
                          f"(~{need / 8 / 2**20:.1f} MiB); limits are n <= {max_n}, {max_bits} bits")


def coverage_matrix(family: Family, d: DSpec, max_n: int | None = None, max_bits: int | None = None,
                    canonical: bool = True) -> CoverageMatrix:
    """Candidates are all subsets, or for symmetric D one per complement pair plus the empty set."""
    _check_budget(family.n, len(family), d.symmetric and canonical, max_n, max_bits)
    cands = _candidate_masks(family.n, d, canonical)
    rows = _pack_rows(_bool_matrix(family, d, cands))
    return CoverageMatrix(family, d, tuple(cands.tolist()), tuple(rows))


@dataclass(frozen=True)
class BetaResult:
    value: int
    witness: Family
    nodes: int
    proven_optimal: bool
    lower_bound: int = 0

    def to_json(self) -> dict:
        return {"value": self.value, "witness": self.witness.sets(), "nodes": self.nodes,
                "proven_optimal": self.proven_optimal}


def twin_classes(family: Family, max_work: int = 1 << 26) -> list[int]:
    """Partition of [n] into classes of interchangeable points, as bit masks.

    Points i, j are twins when the transposition (i j) maps the family (as a
    set) onto itself.  Falls back to singletons when the check would cost more
    than ``max_work`` element operations.
    """
    n = family.n
    masks = sorted(set(family.masks))
    singles = [1 << j for j in range(n)]
    if not masks or n == 1:
        return [full_mask(n)] if n else []
    # union of complete layers: every permutation preserves it
    layer_counts: dict[int, int] = {}
    for mk in masks:
        s = mk.bit_count()
        layer_counts[s] = layer_counts.get(s, 0) + 1
    if all(cnt == math.comb(n, s) for s, cnt in layer_counts.items()):
        return [full_mask(n)]
    if n > 64 or len(masks) * n * n > max_work:
        return singles
    arr = np.array(masks, dtype=np.uint64)
    degree = [int(np.count_nonzero((arr >> np.uint64(j)) & np.uint64(1))) for j in range(n)]

    def preserved(i: int, j: int) -> bool:
        bi = (arr >> np.uint64(i)) & np.uint64(1)
        bj = (arr >> np.uint64(j)) & np.uint64(1)
        diff = bi ^ bj
        swapped = arr ^ (diff << np.uint64(i)) ^ (diff << np.uint64(j))
        return np.array_equal(np.sort(swapped), arr)

    classes: list[list[int]] = []
    for j in range(n):
        for cls in classes:
            rep = cls[0]
            if degree[rep] == degree[j] and preserved(rep, j):
                cls.append(j)
                break
        else:
            classes.append([j])
    return [sum(1 << j for j in cls) for cls in classes]


def _refine(cells: list[int], mask: int) -> list[int]:
    out = []
    for c in cells:
        a, b = c & mask, c & ~mask
        if a:
            out.append(a)
        if b:
            out.append(b)
    return out


def _bits_to_indices(x: int) -> np.ndarray:
    if x == 0:
        return np.zeros(0, dtype=np.int64)
    raw = np.frombuffer(x.to_bytes((x.bit_length() + 7) // 8, "little"), dtype=np.uint8)
    return np.flatnonzero(np.unpackbits(raw, bitorder="little"))


class _Search:
    def __init__(self, rows: list[int], cand_masks: np.ndarray, n_members: int, n: int,
                 symmetric: bool, base_cells: list[int], member_masks: tuple[int, ...],
                 node_limit: int | None, deadline: float | None):
        self.rows = rows
        self.cand = cand_masks
        self.N = len(rows)
        self.m = n_members
        self.n = n
        self.symmetric = symmetric
        self.base_cells = base_cells
        self.member_masks = member_masks
        self.node_limit = node_limit
        self.deadline = deadline
        self.nodes = 0
        self.all_cands = (1 << self.N) - 1
        mat = np.zeros((self.N, max(n_members, 1)), dtype=bool)
        for c, r in enumerate(rows):
            if r:
                mat[c, _bits_to_indices(r)] = True
        self.cols = _pack_rows(np.ascontiguousarray(mat[:, :n_members].T)) if n_members else []
        self.full = full_mask(n)

    def _tick(self) -> None:
        self.nodes += 1
        if self.node_limit is not None and self.nodes > self.node_limit:
            raise SearchLimit
        if self.deadline is not None and self.nodes % 256 == 0 and time.monotonic() > self.deadline:
            raise SearchLimit

    def _best_cover(self, uncovered: int, allowed: int) -> int:
        best = 0
        for c in _bits_to_indices(allowed).tolist():
            v = (self.rows[c] & uncovered).bit_count()
            if v > best:
                best = v
        return best

    def _signatures(self, idx: np.ndarray, cells: list[int]) -> np.ndarray:
        masks = self.cand[idx]
        sig = np.empty((len(idx), len(cells)), dtype=np.int64)
        sizes = []
        for j, cell in enumerate(cells):
            sig[:, j] = np.bitwise_count(masks & np.uint64(cell))
            sizes.append(cell.bit_count())
        if self.symmetric:
            comp = np.array(sizes, dtype=np.int64) - sig
            # lexicographic min of (sig, complement sig) row by row
            diff = sig - comp
            first = np.argmax(diff != 0, axis=1)
            take_comp = diff[np.arange(len(idx)), first] > 0
            sig = np.where(take_comp[:, None], comp, sig)
        return sig

    def feasible(self, uncovered: int, remaining: int, allowed: int, chosen: list[int], cells: list[int]) -> list[int] | None:
        self._tick()
        if uncovered == 0:
            return list(chosen)
        if remaining == 0:
            return None
        if remaining == 1:
            live = allowed
            u = uncovered
            while u and live:
                low = u & -u
                live &= self.cols[low.bit_length() - 1]
                u ^= low
            if not live:
                return None
            c = (live & -live).bit_length() - 1
            return chosen + [c]
        best = self._best_cover(uncovered, allowed)
        if best == 0 or -(-uncovered.bit_count() // best) > remaining:
            return None
        # member with the fewest live candidates (first in family order on ties)
        pick, pick_live, pick_count = -1, 0, None
        u = uncovered
        while u:
            low = u & -u
            a = low.bit_length() - 1
            live = self.cols[a] & allowed
            cnt = live.bit_count()
            if pick_count is None or cnt < pick_count:
                pick, pick_live, pick_count = a, live, cnt
                if cnt <= 1:
                    break
            u ^= low
        if pick_count == 0:
            return None
        idx = _bits_to_indices(pick_live)
        node_cells = _refine(cells, self.member_masks[pick])
        if len(node_cells) < self.n and len(idx) > 1:
            sig = self._signatures(idx, node_cells)
            _, first, inverse = np.unique(sig, axis=0, return_index=True, return_inverse=True)
            inverse = np.asarray(inverse).reshape(-1)
            order = np.argsort(first, kind="stable")
            groups = [(int(idx[first[g]]), idx[inverse == g]) for g in order]
        else:
            groups = [(int(c), None) for c in idx]
        excluded = 0
        for rep, orbit in groups:
            child_cells = _refine(node_cells, int(self.cand[rep]))
            found = self.feasible(uncovered & ~self.rows[rep], remaining - 1, allowed & ~excluded,
                                  chosen + [rep], child_cells)
            if found is not None:
                return found
            if orbit is None:
                excluded |= 1 << rep
            else:
                for c in orbit.tolist():
                    excluded |= 1 << c
        return None


def _dedupe_rows(rows: list[int]) -> list[int]:
    """Indices of candidates kept after dropping repeated and dominated cover sets."""
    seen: dict[int, int] = {}
    for c, r in enumerate(rows):
        if r and r not in seen:
            seen[r] = c
    uniq = sorted(seen.items(), key=lambda kv: kv[1])
    if len(uniq) > 4096:
        return [c for _, c in uniq]
    by_size = sorted(uniq, key=lambda kv: -kv[0].bit_count())
    kept: list[tuple[int, int]] = []
    for r, c in by_size:
        if any(r & big == r for big, _ in kept):
            continue
        kept.append((r, c))
    return sorted(c for _, c in kept)


def _greedy(rows: list[int], target: int) -> list[int]:
    chosen = []
    u = target
    while u:
        best, best_c = 0, -1
        for c, r in enumerate(rows):
            v = (r & u).bit_count()
            if v > best:
                best, best_c = v, c
        if best_c < 0:
            break
        chosen.append(best_c)
        u &= ~rows[best_c]
    return chosen


def greedy_beta(family: Family, d: DSpec) -> Family:
    """Greedy cover (most newly covered members, lowest mask on ties)."""
    fam = family.deduplicated()
    cov = coverage_matrix(fam, d)
    _raise_if_infeasible(fam, d, cov.covers)
    picks = _greedy(list(cov.covers), (1 << len(fam)) - 1)
    return Family(fam.n, tuple(cov.candidates[c] for c in picks))


def _raise_if_infeasible(fam: Family, d: DSpec, rows) -> None:
    union = 0
    for r in rows:
        union |= r
    missing = ((1 << len(fam)) - 1) & ~union
    if missing:
        a = (missing & -missing).bit_length() - 1
        raise InfeasibleError(fam[a], d)


def exact_beta(family: Family, d: DSpec, node_limit: int | None = None, time_limit: float | None = None,
               symmetry: bool = True, max_n: int | None = None, max_bits: int | None = None,
               canonical: bool = True) -> BetaResult:
    """Minimum size of a D-secting family for ``family``, with one optimal witness.

    If the node or time limit stops the search, the result carries the best
    size found so far and ``proven_optimal=False``.  ``symmetry=False`` turns
    off orbit pruning and ``canonical=False`` searches all 2^n candidates
    instead of one per complement pair.
    """
    n = family.n
    fam = family.deduplicated()
    if len(fam) == 0:
        return BetaResult(0, Family(n, ()), 0, True)
    cov = coverage_matrix(fam, d, max_n, max_bits, canonical)
    _raise_if_infeasible(fam, d, cov.covers)
    keep = _dedupe_rows(list(cov.covers))
    rows = [cov.covers[c] for c in keep]
    cand = np.array([cov.candidates[c] for c in keep], dtype=np.uint64)
    target = (1 << len(fam)) - 1

    greedy = _greedy(rows, target)
    best = max((r.bit_count() for r in rows), default=0)
    lower = max(1, -(-len(fam) // best))
    node_limit = _env_int("DSECTING_NODE_LIMIT", None) if node_limit is None else node_limit
    deadline = time.monotonic() + time_limit if time_limit else None
    cells = twin_classes(fam) if symmetry else [1 << j for j in range(n)]
    search = _Search(rows, cand, len(fam), n, d.symmetric and canonical, cells, fam.masks, node_limit, deadline)

    def witness(picks: Iterable[int]) -> Family:
        return Family(n, tuple(sorted(int(cand[c]) for c in picks)))

    try:
        for size in range(lower, len(greedy)):
            found = search.feasible(target, size, search.all_cands, [], cells)
            if found is not None:
                return BetaResult(len(found), witness(found), search.nodes, True, size)
            lower = size + 1
    except SearchLimit:
        return BetaResult(len(greedy), witness(greedy), search.nodes, False, lower)
    return BetaResult(len(greedy), witness(greedy), search.nodes, True, len(greedy))


def exact_discrepancy(family: Family, max_work: int = 1 << 32, chunk: int = 1 << 16) -> tuple[int, SubsetMask]:
    """min over 2-colourings X of max |imbalance(A, X)|, with the first optimal X.

    Colourings are enumerated one per complement pair (those containing 1),
    in ascending mask order.
    """
    n = family.n
    fam = family.deduplicated()
    total = 1 << (n - 1)
    if total * max(len(fam), 1) > max_work or n > 63:
        raise BudgetError(f"discrepancy enumeration needs {total} colourings x {len(fam)} members")
    if len(fam) == 0:
        return 0, SubsetMask(1, n)
    sizes = [m.bit_count() for m in fam.masks]
    best_val, best_x = None, None
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        xs = (np.arange(start, stop, dtype=np.uint64) << np.uint64(1)) | np.uint64(1)
        worst = np.zeros(len(xs), dtype=np.int64)
        for mask, size in zip(fam.masks, sizes):
            imb = np.abs(2 * np.bitwise_count(xs & np.uint64(mask)).astype(np.int64) - size)
            np.maximum(worst, imb, out=worst)
        j = int(np.argmin(worst))
        if best_val is None or worst[j] < best_val:
            best_val, best_x = int(worst[j]), int(xs[j])
    return best_val, SubsetMask(best_x, n)


def induced_family(family: Family, s: SubsetMask) -> Family:
    """Members intersected with S, over the same ground set."""
    if s.n != family.n:
        raise ValueError(f"ground sets differ: n={family.n} vs n={s.n}")
    return Family(family.n, tuple(m & s.bits for m in family.masks))
