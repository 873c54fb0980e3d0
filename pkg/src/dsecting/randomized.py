"""Randomized D-secting families.

``chernoff_family`` draws ``t`` uniformly random subsets and restarts until
every member's imbalance against one of them is within the Chernoff
threshold.  ``lll_bisecting`` and ``lll_uniform_half_bisecting`` run the
Moser-Tardos resampling loop for bisecting families of k-uniform families.

All randomness comes from :class:`dsecting.rng.BitStream`; identical seeds and
parameters reproduce identical runs.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import bounds
from .core import ContractError, DSpec, Family, SubsetMask, generate_family, imbalance_vector, verify_dsecting
from .rng import BitStream

DEFAULT_RESTARTS = 64
RESAMPLES_PER_MEMBER = 1000


@dataclass(frozen=True)
class DependencyStat:
    d: int
    per_member: tuple[int, ...]


@dataclass(frozen=True)
class RandomRun:
    seed: int
    t: int
    iterations: int
    resamples: int
    family: Family
    verified: bool
    D: DSpec
    info: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "t": self.t,
            "iterations": self.iterations,
            "resamples": self.resamples,
            "D": str(self.D),
            "verified": self.verified,
            "n": self.family.n,
            "family": self.family.sets(),
            **self.info,
        }


class RandomizedFailure(RuntimeError):
    """A restart or resample budget ran out before a valid family was found."""

    def __init__(self, message: str, counterexample: SubsetMask | None = None, spent: int = 0):
        self.counterexample = counterexample
        self.spent = spent
        super().__init__(message)


def incidence(family: Family) -> np.ndarray:
    """0/1 incidence matrix, one row per member."""
    m, n = len(family), family.n
    out = np.zeros((m, n), dtype=np.int64)
    for r, mask in enumerate(family.masks):
        j = 0
        while mask:
            if mask & 1:
                out[r, j] = 1
            mask >>= 1
            j += 1
    return out


def dependency(family: Family) -> DependencyStat:
    """For each member, how many other members (by position) it meets."""
    m = len(family)
    if m == 0:
        return DependencyStat(0, ())
    inc = incidence(family)
    meets = (inc @ inc.T) > 0
    np.fill_diagonal(meets, False)
    per = tuple(int(x) for x in meets.sum(axis=1))
    return DependencyStat(max(per), per)


def _rows_to_family(rows: np.ndarray, n: int) -> Family:
    masks = []
    for row in rows:
        masks.append(sum(1 << int(j) for j in np.flatnonzero(row)))
    return Family(n, tuple(masks))


def chernoff_family(family: Family, t: int, seed: int, max_restarts: int = DEFAULT_RESTARTS) -> RandomRun:
    """Random t-member family with per-set imbalance at most sqrt(3|A| ln(2m) / t)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    n, m = family.n, len(family)
    root = BitStream(seed)
    sizes = np.array(family.sizes(), dtype=np.int64)
    log_term = math.log(2 * m) if m else 0.0
    # |imb| <= sqrt(3|A| ln(2m)/t)  <=>  t * imb^2 <= 3|A| ln(2m)
    limit = 3.0 * sizes * log_term
    threshold = math.sqrt(3 * n * log_term / t) if m else 0.0
    d = DSpec.interval(math.ceil(threshold))
    last_bad = None
    for it in range(max_restarts):
        stream = root.split(it)
        rows = stream.bits(t * n).reshape(t, n)
        cand = _rows_to_family(rows, n)
        ok = np.zeros(m, dtype=bool)
        for b in cand:
            imb = imbalance_vector(family, b) if m else np.zeros(0, dtype=np.int64)
            ok |= t * imb * imb <= limit
        if ok.all():
            verified = verify_dsecting(family, cand, d).ok and bool(ok.all())
            info = {"threshold": threshold, "first_draw": it == 0, "hypothesis_ok": m >= 1 and t <= 0.5 * math.log2(m)}
            return RandomRun(seed, t, it + 1, 0, cand, verified, d, info)
        last_bad = family[int(np.flatnonzero(~ok)[0])]
    raise RandomizedFailure(f"no acceptable family in {max_restarts} restarts", last_bad, max_restarts)


def bisect_probability(k: int) -> float:
    """Chance a uniformly random subset bisects a fixed k-set (imbalance in {-1,0,1})."""
    if k % 2 == 0:
        return math.comb(k, k // 2) / 2**k
    return 2 * math.comb(k, k // 2) / 2**k


def lll_condition(p_event: float, d: int) -> bool:
    return math.e * p_event * (d + 1) <= 1.0


def _uniform_k(family: Family) -> int:
    sizes = set(family.sizes())
    if len(sizes) > 1:
        raise ContractError(f"family is not uniform: member sizes {sorted(sizes)}")
    k = sizes.pop() if sizes else 1
    if k < 1:
        raise ContractError("members must be nonempty")
    return k


def lll_bisecting(family: Family, seed: int, t_override: int | None = None,
                  max_resamples: int | None = None) -> RandomRun:
    """Moser-Tardos search for a bisecting family of a k-uniform family.

    Variables are t*n fair bits (bit (j, x) says whether x is in the j-th
    set).  The event for member A is "no drawn set bisects A".  While some
    event holds, the first violated member in family order has the t*|A| bits
    of its elements redrawn.
    """
    n, m = family.n, len(family)
    k = _uniform_k(family)
    dep = dependency(family)
    t = t_override if t_override is not None else bounds.lll_size(k, dep.d)
    if t < 1:
        raise ValueError("t must be >= 1")
    budget = RESAMPLES_PER_MEMBER * m if max_resamples is None else max_resamples
    p_event = (1 - bisect_probability(k)) ** t
    cond = lll_condition(p_event, dep.d)
    info = {"k": k, "d": dep.d, "p_event": p_event, "lll_condition": cond}
    stream = BitStream(seed)
    x = stream.bits(t * n).reshape(t, n).astype(np.int64)
    d = DSpec.interval(1)
    if m == 0:
        return RandomRun(seed, t, 1, 0, _rows_to_family(x, n), True, d, info)
    inc = incidence(family)
    imb = 2 * (inc @ x.T) - k
    bad = ~(np.abs(imb) <= 1).any(axis=1)
    resamples = 0
    while bad.any():
        a = int(np.argmax(bad))
        if resamples >= budget:
            cond_text = "held" if cond else "did not hold"
            raise RandomizedFailure(
                f"resample budget {budget} exhausted (LLL condition e*p*(d+1) <= 1 {cond_text})",
                family[a], resamples)
        cols = np.flatnonzero(inc[a])
        x[:, cols] = stream.bits(t * len(cols)).reshape(t, len(cols))
        touched = np.flatnonzero(inc[:, cols].any(axis=1))
        imb[touched] = 2 * (inc[touched] @ x.T) - k
        bad[touched] = ~(np.abs(imb[touched]) <= 1).any(axis=1)
        resamples += 1
    out = _rows_to_family(x, n)
    verified = verify_dsecting(family, out, d).ok
    return RandomRun(seed, t, 1, resamples, out, verified, d, info)


def lll_uniform_half_bisecting(n: int, k: int, seed: int, t_override: int | None = None,
                               max_resamples: int | None = None) -> RandomRun:
    """Bisecting family for all k-subsets of [n] built from uniform (n/2)-subsets.

    Each drawn set is one random variable and every event depends on all of
    them, so a resampling step redraws all t sets.
    """
    if n % 2 or k % 2:
        raise ValueError(f"n and k must both be even, got n={n}, k={k}")
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    target = generate_family(n, f"all:{k}")
    m = len(target)
    d_stat = math.comb(n, k) - math.comb(n - k, k) - 1
    t = t_override if t_override is not None else bounds.lll_uniform_size(n, k, d_stat)
    budget = RESAMPLES_PER_MEMBER * m if max_resamples is None else max_resamples
    p = math.comb(n // 2, k // 2) ** 2 / math.comb(n, k)
    p_event = (1 - p) ** t
    info = {"k": k, "d": d_stat, "p_event": p_event, "lll_condition": lll_condition(p_event, d_stat)}
    stream = BitStream(seed)
    d = DSpec.singleton(0)
    half = n // 2

    def draw() -> Family:
        return Family(n, tuple(sum(1 << e for e in stream.sample(n, half)) for _ in range(t)))

    fam = draw()
    resamples = 0
    while True:
        res = verify_dsecting(target, fam, d)
        if res.ok:
            break
        if resamples >= budget:
            raise RandomizedFailure(f"resample budget {budget} exhausted", res.witness, resamples)
        fam = draw()
        resamples += 1
    return RandomRun(seed, t, 1, resamples, fam, True, d, info)


def clustered_uniform_family(k: int, clusters: int, per_cluster: int, seed: int) -> Family:
    """k-uniform family with dependency exactly ``per_cluster - 1``.

    Each cluster owns a private block of 2k-1 points and holds
    ``per_cluster`` distinct random k-subsets of it; any two k-subsets of a
    (2k-1)-block intersect, and sets in different blocks never do.
    """
    block = 2 * k - 1
    if per_cluster > math.comb(block, k):
        raise ValueError("too many sets per cluster for the block size")
    n = clusters * block
    stream = BitStream(seed, 1 << 32)
    masks = []
    for c in range(clusters):
        seen: set[int] = set()
        while len(seen) < per_cluster:
            mask = sum(1 << (c * block + e) for e in stream.sample(block, k))
            if mask not in seen:
                seen.add(mask)
                masks.append(mask)
    return Family(n, tuple(masks))


def run_seeds(fn: Callable[[int], object], seeds: Iterable[int], workers: int = 1) -> list:
    """Apply ``fn`` to each seed; results come back in seed order whatever the worker count."""
    seeds = list(seeds)
    if workers <= 1:
        return [fn(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, seeds))


def chernoff_first_draw_rate(family: Family, t: int, seeds: Sequence[int], workers: int = 1) -> tuple[float, list[RandomRun]]:
    runs = run_seeds(_ChernoffJob(family, t), seeds, workers)
    first = sum(1 for r in runs if r.iterations == 1)
    return first / len(runs), runs


@dataclass(frozen=True)
class _ChernoffJob:
    family: Family
    t: int

    def __call__(self, seed: int) -> RandomRun:
        return chernoff_family(self.family, self.t, seed)
