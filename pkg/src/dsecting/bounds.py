"""Closed-form bounds on minimum D-secting family sizes.

Binomials are exact integers and ratios are ``Fraction``; only logarithms and
square roots are floats.  Each row carries an anchor string naming the formula
it evaluates, drawn from :data:`FORMULAS`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .core import DSpec

LLL_C = 0.67
LLL_UNIFORM_C1 = 0.53

FORMULAS = {
    "interval_exact": "ceil(n/(2i)) for all nonempty subsets",
    "singleton_lower": "(n-i+1)/2 for |A|=i mod 2 and |A|>=i",
    "singleton_upper": "n-i+1 via the chain B_j=[i+j-1]",
    "singleton_one_exact": "ceil(n/2) for odd subsets with D={1}",
    "singleton_zero_exact": "ceil(n/2) since D={0} matches [-1..1] on all subsets",
    "counting_lower": "C(n;k)/(2*C(ceil(n/2);ceil(k/2))*C(floor(n/2);floor(k/2)))",
    "entropy_kneser_lower": "log2(n-k+2) when k even and k/2 odd",
    "entropy_coloring_lower": "ceil(log2(ceil(n/ceil(k/2))))",
    "linear_k_lower": "delta(c)*n for one of k..k-3 when cn<k<(1-c)n; delta unquantified",
    "pairs_exact": "ceil(log2 n) for all pairs",
    "n_minus_2_exact": "3 for k=n-2 with n even and n>4",
    "upper_tail_upper": "n-k+1 via S_j=[ceil(k/2)]+{k+1..k+j}",
    "all_subsets_upper": "ceil(n/2) since a k-uniform family is a family on [n]",
    "binary_complement_upper": "log2 n for k=n-2 when n is a power of two",
    "lll_upper": "(sqrt(k)/0.67)*(ln(d+1)+1) with d=C(n;k)-C(n-k;k)-1",
    "lll_uniform_upper": "(1/0.53)*sqrt(k(n-k)/n)*(ln(d+1)+1) for n and k even",
    "chernoff_threshold": "sqrt(3n*ln(2m)/t) needs t<=log2(m)/2",
    "exact_solver": "branch-and-bound minimum cover",
    "construction": "size of a verified explicit construction",
}


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def interval_exact(n: int, i: int) -> int:
    if not 1 <= i <= n:
        raise ValueError(f"need 1 <= i <= n, got i={i}, n={n}")
    return _ceil_div(n, 2 * i)


def singleton_bracket(n: int, i: int) -> tuple[Fraction, int]:
    if not 1 <= i <= n:
        raise ValueError(f"need 1 <= i <= n, got i={i}, n={n}")
    return Fraction(n - i + 1, 2), n - i + 1


def counting_lower(n: int, k: int) -> tuple[Fraction, int]:
    """Ratio of all k-sets to the most one set can bisect, and its ceiling."""
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    hi, lo = _ceil_div(n, 2), n // 2
    denom = 2 * math.comb(hi, _ceil_div(k, 2)) * math.comb(lo, k // 2)
    if denom == 0:
        # k/2 exceeds a half: no single set bisects anything, the ratio is unbounded
        raise ValueError(f"counting bound undefined for n={n}, k={k}")
    q = Fraction(math.comb(n, k), denom)
    return q, math.ceil(q)


def entropy_lower(n: int, k: int) -> tuple[float | None, int]:
    """(log2(n-k+2) if k is even and k/2 odd else None, ceil(log2(ceil(n/ceil(k/2)))))."""
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    first = math.log2(n - k + 2) if k % 2 == 0 and (k // 2) % 2 == 1 else None
    second = (_ceil_div(n, _ceil_div(k, 2)) - 1).bit_length()
    return first, second


def linear_k_lower_flag(n: int, k: int, c: float) -> "BoundRow":
    if not 0 < c < 0.5:
        raise ValueError(f"need 0 < c < 1/2, got c={c}")
    applies = c * n < k < (1 - c) * n
    label = "linear_k_lower" if applies else "linear_k_lower_na"
    return BoundRow(label, "lower", None, FORMULAS["linear_k_lower"], numeric=False)


def chernoff_threshold(n: int, m: int, t: int) -> tuple[float, int, bool]:
    """(threshold, its ceiling, whether t <= log2(m)/2 holds)."""
    if m < 1 or t < 1:
        raise ValueError("need m >= 1 and t >= 1")
    value = math.sqrt(3 * n * math.log(2 * m) / t)
    return value, math.ceil(value), t <= 0.5 * math.log2(m)


def lll_size(k: int, d: int) -> int:
    if k < 1 or d < 0:
        raise ValueError("need k >= 1 and d >= 0")
    return math.ceil(math.sqrt(k) / LLL_C * (math.log(d + 1) + 1))


def lll_uniform_size(n: int, k: int, d: int) -> int:
    if not 0 < k <= n:
        raise ValueError("need 0 < k <= n")
    return math.ceil(math.sqrt(k * (n - k) / n) / LLL_UNIFORM_C1 * (math.log(d + 1) + 1))


def render(value) -> str:
    if value is None:
        return "unquantified"
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if isinstance(value, float):
        return format(value, ".15g")
    return str(value)


@dataclass(frozen=True)
class BoundRow:
    label: str
    kind: str  # lower | upper | exact | info
    value: object
    anchor: str
    numeric: bool = True
    applicable: bool = True

    def as_dict(self) -> dict:
        return {"label": self.label, "kind": self.kind, "value": render(self.value), "anchor": self.anchor}


@dataclass
class BoundReport:
    n: int
    k: int | None
    D: DSpec
    rows: list[BoundRow] = field(default_factory=list)

    def add(self, label: str, kind: str, value, **kw) -> None:
        key = label.split("@")[0]
        self.rows.append(BoundRow(label, kind, value, kw.pop("anchor", FORMULAS[key]), **kw))

    def numeric_rows(self, kind: str) -> list[BoundRow]:
        return [r for r in self.rows if r.kind == kind and r.numeric and r.applicable]

    def best_lower(self):
        vals = [r.value for r in self.numeric_rows("lower")]
        return max(vals) if vals else None

    def best_upper(self):
        vals = [r.value for r in self.numeric_rows("upper")]
        return min(vals) if vals else None

    def exact(self):
        vals = [r.value for r in self.numeric_rows("exact")]
        return vals[0] if vals else None

    def consistency_errors(self) -> list[str]:
        """Rows breaking lower <= exact <= upper."""
        errs = []
        for ex in self.numeric_rows("exact"):
            for lo in self.numeric_rows("lower"):
                if lo.value > ex.value:
                    errs.append(f"{lo.label}={render(lo.value)} > {ex.label}={render(ex.value)}")
            for up in self.numeric_rows("upper"):
                if up.value < ex.value:
                    errs.append(f"{up.label}={render(up.value)} < {ex.label}={render(ex.value)}")
        return errs


def bound_report(n: int, k: int | None, d: DSpec, c: float | None = None) -> BoundReport:
    """Every closed-form row that applies to (n, k, D).

    Without k the family is "all sets the D can reach": all nonempty subsets
    for interval D, subsets with |A| = i mod 2 and |A| >= i for singleton D.
    With k the family is all k-subsets of [n] (only interval:1 / singleton:0
    has closed forms there).
    """
    rep = BoundReport(n, k, d)
    bisect = d == DSpec.interval(1) or d == DSpec.singleton(0)
    if k is None:
        if d.kind == "interval" and d.i >= 1:
            rep.add("interval_exact", "exact", interval_exact(n, min(d.i, n)))
        elif d.i == 0:
            rep.add("singleton_zero_exact", "exact", _ceil_div(n, 2))
        else:
            lower, upper = singleton_bracket(n, d.i)
            rep.add("singleton_lower", "lower", lower)
            rep.add("singleton_upper", "upper", upper)
            if d.i == 1:
                rep.add("singleton_one_exact", "exact", _ceil_div(n, 2))
        return rep
    if not bisect:
        return rep
    if 1 <= k <= n:
        try:
            q, _ = counting_lower(n, k)
            rep.add("counting_lower", "lower", q)
        except ValueError:
            pass
    if 2 <= k <= n:
        first, second = entropy_lower(n, k)
        if first is not None:
            rep.add("entropy_kneser_lower", "lower", first)
        rep.add("entropy_coloring_lower", "lower", second)
    if c is not None:
        rep.rows.append(linear_k_lower_flag(n, k, c))
    if k == 2 and n >= 2:
        rep.add("pairs_exact", "exact", (n - 1).bit_length())
    if k == n - 2 and n % 2 == 0 and n > 4:
        rep.add("n_minus_2_exact", "exact", 3)
    if 1 <= k <= n:
        rep.add("upper_tail_upper", "upper", n - k + 1)
    rep.add("all_subsets_upper", "upper", _ceil_div(n, 2))
    if k == n - 2 and n >= 4 and n & (n - 1) == 0:
        rep.add("binary_complement_upper", "upper", n.bit_length() - 1)
    if 1 <= k < n:
        dd = math.comb(n, k) - math.comb(n - k, k) - 1
        rep.add("lll_upper", "upper", math.sqrt(k) / LLL_C * (math.log(dd + 1) + 1))
        if n % 2 == 0 and k % 2 == 0:
            rep.add("lll_uniform_upper", "upper",
                    math.sqrt(k * (n - k) / n) / LLL_UNIFORM_C1 * (math.log(dd + 1) + 1))
    return rep
