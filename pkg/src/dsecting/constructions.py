"""Explicit deterministic D-secting families.

Every builder returns a :class:`ConstructionTrace` recording the family, the
size it claims, the imbalance set it claims and the family it claims to
D-sect, so the claim can be re-checked with :func:`ConstructionTrace.verify`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    ContractError,
    DSpec,
    Family,
    FamilyKind,
    SubsetMask,
    VerifyResult,
    full_mask,
    generate_family,
    verify_dsecting,
)


class ImproperColoringError(ValueError):
    def __init__(self, edge: tuple[int, int], color):
        self.edge = edge
        super().__init__(f"edge {{{edge[0]},{edge[1]}}} is monochromatic (color {color!r})")


@dataclass(frozen=True)
class ConstructionTrace:
    name: str
    params: dict
    family: Family
    claimed_size: int
    claimed_D: DSpec
    claimed_target: str
    extra_target: Family | None = field(default=None, compare=False)

    def target_family(self, budget: int | None = None) -> Family:
        if self.extra_target is not None:
            return self.extra_target
        return generate_family(self.family.n, FamilyKind.parse(self.claimed_target), budget)

    def verify(self, budget: int | None = None) -> VerifyResult:
        if len(self.family) != self.claimed_size:
            raise AssertionError(f"{self.name}: {len(self.family)} members, claimed {self.claimed_size}")
        return verify_dsecting(self.target_family(budget), self.family, self.claimed_D)

    def header(self) -> str:
        params = " ".join(f"{k}={v}" for k, v in self.params.items())
        return (f"construction={self.name} {params} size={self.claimed_size} "
                f"D={self.claimed_D} target={self.claimed_target}")


def _mask(elements, n: int) -> int:
    bits = 0
    for e in elements:
        bits |= 1 << (e - 1)
    return bits


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def interval_swap_family(n: int, i: int) -> ConstructionTrace:
    """Interval(i)-secting family of size ceil(n / 2i) for all nonempty subsets of [n].

    B_1 = {1..ceil(n/2)}.  Each step swaps the i largest elements still left
    from B_1 for the i smallest elements of [n] - B_1 not yet brought in.
    Continuing one step past the last member would reach the complement of
    B_1, and no step changes any imbalance by more than 2i.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 1 <= i <= n:
        raise ValueError(f"need 1 <= i <= n, got i={i}, n={n}")
    h = _ceil_div(n, 2)
    t = _ceil_div(n, 2 * i)
    original = list(range(1, h + 1))
    incoming = list(range(h + 1, n + 1))
    current = set(original)
    members = [_mask(current, n)]
    for _ in range(t - 1):
        out = [original.pop() for _ in range(min(i, len(original)))]
        inn = [incoming.pop(0) for _ in range(min(i, len(incoming)))]
        current.difference_update(out)
        current.update(inn)
        members.append(_mask(current, n))
    return ConstructionTrace("interval-swap", {"n": n, "i": i}, Family(n, tuple(members)),
                             t, DSpec.interval(i), "all")


def singleton_one_family(n: int) -> ConstructionTrace:
    """Family of size ceil(n/2) giving imbalance exactly +1 on every odd subset of [n].

    For even n: B_1 = {1..n/2+1}, and B_{j+1} replaces n/2-j+2 by n/2+j+1.
    Odd n runs the even construction on [n+1] and drops element n+1, which
    leaves imbalances of subsets of [n] unchanged.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return ConstructionTrace("singleton-one", {"n": 1}, Family(1, (1,)), 1, DSpec.singleton(1), "odd")
    even = n + (n % 2)
    h = even // 2
    current = set(range(1, h + 2))
    members = [current.copy()]
    for j in range(1, h):
        current.discard(h - j + 2)
        current.add(h + j + 1)
        members.append(current.copy())
    masks = tuple(_mask((e for e in s if e <= n), n) for s in members)
    return ConstructionTrace("singleton-one", {"n": n}, Family(n, masks), _ceil_div(n, 2),
                             DSpec.singleton(1), "odd")


def chain_family(n: int, i: int) -> ConstructionTrace:
    """B_1 = [i], B_{j+1} = B_j + {i+j}: Singleton(i)-secting for |A| = i mod 2, |A| >= i."""
    if not 1 <= i <= n:
        raise ValueError(f"need 1 <= i <= n, got i={i}, n={n}")
    masks = tuple((1 << (i + j)) - 1 for j in range(n - i + 1))
    return ConstructionTrace("chain", {"n": n, "i": i}, Family(n, masks), n - i + 1,
                             DSpec.singleton(i), f"parity:{i}")


def upper_tail_family(n: int, k: int) -> ConstructionTrace:
    """Bisecting family of size n-k+1 for all subsets of size >= k.

    S_0 = {1..ceil(k/2)} and S_j = S_{j-1} + {k+j}.  The elements
    ceil(k/2)+1..k never appear in any member.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    base = (1 << _ceil_div(k, 2)) - 1
    masks = [base]
    for j in range(1, n - k + 1):
        masks.append(masks[-1] | 1 << (k + j - 1))
    return ConstructionTrace("upper-tail", {"n": n, "k": k}, Family(n, tuple(masks)), n - k + 1,
                             DSpec.interval(1), f"uppertail:{k}")


def binary_code_family(n: int) -> ConstructionTrace:
    """A_l = {j : bit l of j-1 is set}; separates (hence bisects) every pair."""
    if n < 2:
        raise ValueError("n must be >= 2")
    bits = (n - 1).bit_length()
    masks = []
    for l in range(bits):
        masks.append(sum(1 << (j - 1) for j in range(1, n + 1) if (j - 1) >> l & 1))
    return ConstructionTrace("binary-code", {"n": n}, Family(n, tuple(masks)), bits,
                             DSpec.interval(1), "pairs")


def greedy_coloring(n: int, edges: Family) -> list[int]:
    """Smallest-available-color greedy in ascending vertex order; colors start at 0."""
    adj: list[set[int]] = [set() for _ in range(n + 1)]
    for e in edges:
        u, v = e.elements()
        adj[u].add(v)
        adj[v].add(u)
    color = [0] * (n + 1)
    for v in range(1, n + 1):
        used = {color[u] for u in adj[v] if u < v}
        c = 0
        while c in used:
            c += 1
        color[v] = c
    return color[1:]


def bipartite_cover(edges: Family, coloring: Sequence | Mapping | None = None) -> list[SubsetMask]:
    """Cover a graph's edges by ceil(log2 C) bipartitions, C = colors used.

    Each bipartition is returned as the mask of its 1-side: vertex v goes on
    the 1-side of cut l iff bit l of (the index of v's color) is set.
    ``coloring`` maps vertices 1..n to colors, as a sequence or a mapping.
    """
    n = edges.n
    for e in edges:
        if e.cardinality != 2:
            raise ContractError(f"edge {e.elements()} does not have two endpoints")
    if coloring is None:
        colors = greedy_coloring(n, edges)
    elif isinstance(coloring, Mapping):
        colors = [coloring[v] for v in range(1, n + 1)]
    else:
        if len(coloring) != n:
            raise ContractError(f"coloring has {len(coloring)} entries for {n} vertices")
        colors = list(coloring)
    for e in edges:
        u, v = e.elements()
        if colors[u - 1] == colors[v - 1]:
            raise ImproperColoringError((u, v), colors[u - 1])
    index: dict = {}
    for c in colors:
        index.setdefault(c, len(index))
    width = (len(index) - 1).bit_length()
    cuts = []
    for l in range(width):
        bits = sum(1 << (v - 1) for v in range(1, n + 1) if index[colors[v - 1]] >> l & 1)
        cuts.append(SubsetMask(bits, n))
    return cuts


def hadamard_matrix(k: int) -> np.ndarray:
    """Recursive 2^k x 2^k Hadamard matrix, first row and column all ones."""
    h = np.ones((1, 1), dtype=np.int64)
    for _ in range(k):
        h = np.block([[h, h], [h, -h]])
    return h


def hadamard_system(k: int) -> tuple[Family, Family]:
    """Rows of (H(k) + J) / 2 as sets, and a two-member bisecting family for them."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = 1 << k
    a = (hadamard_matrix(k) + 1) // 2
    masks = tuple(sum(1 << int(j) for j in np.flatnonzero(row)) for row in a)
    hf = Family(n, masks)
    bis = [full_mask(n >> 1)]
    if k > 1:
        bis.append(full_mask(n >> 2))
    return hf, Family(n, tuple(bis))


def hadamard_trace(k: int) -> ConstructionTrace:
    hf, bis = hadamard_system(k)
    return ConstructionTrace("hadamard", {"k": k}, bis, len(bis), DSpec.interval(1), f"hadamard:{k}", hf)


def bipartite_trace(edges: Family, coloring=None) -> ConstructionTrace:
    cuts = bipartite_cover(edges, coloring)
    fam = Family.from_members(cuts, edges.n) if cuts else Family(edges.n, ())
    return ConstructionTrace("bipartite-cover", {"n": edges.n}, fam, len(cuts), DSpec.interval(1),
                             "edges", edges)


BUILDERS = {
    "interval-swap": interval_swap_family,
    "singleton-one": singleton_one_family,
    "chain": chain_family,
    "upper-tail": upper_tail_family,
    "binary-code": binary_code_family,
    "hadamard": hadamard_trace,
}
