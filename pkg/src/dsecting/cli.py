"""Command-line entry point: ``dsecting <subcommand> ...``.

Exit codes: 0 success, 1 verification failure or infeasible instance,
2 usage or input error, 3 a resource limit stopped the run.  Results go to
stdout (JSON, or CSV for ``table``); diagnostics go to stderr.

Budgets default from the environment: ``DSECTING_MAX_MEMBERS``,
``DSECTING_SOLVER_MAX_N``, ``DSECTING_SOLVER_MAX_BITS``,
``DSECTING_NODE_LIMIT`` and ``DSECTING_TIME_LIMIT`` (seconds).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, bounds, constructions, randomized
from .core import (
    BudgetError,
    ContractError,
    DSpec,
    Family,
    FamilyFormatError,
    FamilyKind,
    dumps_compact,
    dumps_family,
    generate_family,
    loads_family,
    verify_dsecting,
)
from .solver import InfeasibleError, exact_beta, exact_discrepancy

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_LIMIT = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    argv: list[str]
    version: str = __version__
    seeds: list[int] = field(default_factory=list)
    inputs: dict[str, str] = field(default_factory=dict)
    started: float = field(default_factory=time.time)
    wall_clock: float = 0.0
    output_sha256: str = ""
    exit_code: int = 0

    def to_json(self) -> dict:
        return {"command": self.argv, "version": self.version, "seeds": self.seeds,
                "input_sha256": self.inputs, "started": self.started,
                "wall_clock_s": round(self.wall_clock, 6), "output_sha256": self.output_sha256,
                "exit_code": self.exit_code}


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


class Context:
    def __init__(self, argv: list[str], stdin, out):
        self.manifest = RunManifest(list(argv))
        self.stdin = stdin
        self.out = out
        self._stdin_text: str | None = None

    def read_stdin(self) -> str:
        if self._stdin_text is None:
            self._stdin_text = self.stdin.read()
            self.manifest.inputs["-"] = _digest(self._stdin_text)
        return self._stdin_text

    def emit(self, text: str) -> None:
        self.out.write(text)


# ---------------------------------------------------------------------------
# Family sources


def _hadamard(spec: str) -> Family | None:
    m = re.fullmatch(r"hadamard:(\d+)", spec.strip().lower())
    if not m:
        return None
    return constructions.hadamard_system(int(m.group(1)))[0]


def _looks_like_generator(spec: str) -> bool:
    if _hadamard(spec) is not None:
        return True
    try:
        FamilyKind.parse(spec)
        return True
    except ValueError:
        return False


def load_source(ctx: Context, spec: str, n: int | None) -> Family:
    """File path, ``-`` for stdin, or a generator shorthand (needs ``n``)."""
    if spec == "-":
        return loads_family(ctx.read_stdin())
    path = Path(spec)
    if path.is_file():
        text = path.read_text()
        ctx.manifest.inputs[spec] = _digest(text)
        return loads_family(text)
    had = _hadamard(spec)
    if had is not None:
        if n is not None and n != had.n:
            raise UsageError(f"{spec} lives on n={had.n}, not n={n}")
        return had
    if not _looks_like_generator(spec):
        raise UsageError(f"{spec!r} is neither a file nor a generator "
                         "(all, all:k, odd, parity:i, pairs, uppertail:k, hadamard:k)")
    if n is None:
        raise UsageError(f"generator {spec!r} needs --n (or a file family to take n from)")
    return generate_family(n, spec)


def load_pair(ctx: Context, fam_spec: str, other_spec: str, n: int | None) -> tuple[Family, Family]:
    """Load two families; a generator takes its n from the other side when --n is absent."""
    fam_gen = fam_spec != "-" and not Path(fam_spec).is_file() and _hadamard(fam_spec) is None
    if n is None and fam_gen:
        other = load_source(ctx, other_spec, None)
        return load_source(ctx, fam_spec, other.n), other
    fam = load_source(ctx, fam_spec, n)
    return fam, load_source(ctx, other_spec, n if n is not None else fam.n)


def parse_d(text: str) -> DSpec:
    try:
        return DSpec.parse(text)
    except (ValueError, ContractError) as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Subcommands


def _json(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), sort_keys=False) + "\n"


def cmd_construct(args, ctx: Context) -> int:
    name = args.name
    if name == "bipartite-cover":
        if not args.edges:
            raise UsageError("bipartite-cover needs --edges")
        edges = load_source(ctx, args.edges, args.n)
        coloring = json.loads(args.coloring) if args.coloring else None
        trace = constructions.bipartite_trace(edges, coloring)
    else:
        builder = constructions.BUILDERS[name]
        try:
            if name in ("interval-swap", "chain"):
                trace = builder(_need(args.n, "--n"), _need(args.i, "--i"))
            elif name == "upper-tail":
                trace = builder(_need(args.n, "--n"), _need(args.k, "--k"))
            elif name == "hadamard":
                trace = builder(_need(args.k, "--k"))
            else:
                trace = builder(_need(args.n, "--n"))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    res = trace.verify()
    if not res.ok:
        print(f"construction {trace.name} failed verification at {res.witness}", file=sys.stderr)
        return EXIT_FAIL
    if args.format == "compact":
        ctx.emit(dumps_compact(trace.family, trace.header()))
    else:
        ctx.emit(dumps_family(trace.family, {"construction": {
            "name": trace.name, **trace.params, "size": trace.claimed_size,
            "D": str(trace.claimed_D), "target": trace.claimed_target, "verified": True}}))
    return EXIT_OK


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"missing {flag}")
    return value


def cmd_verify(args, ctx: Context) -> int:
    d = parse_d(args.D)
    secting_spec = args.secting or "-"
    fam, secting = load_pair(ctx, args.family, secting_spec, args.n)
    if fam.n != secting.n:
        raise UsageError(f"ground sets differ: family n={fam.n}, secting n={secting.n}")
    res = verify_dsecting(fam, secting, d)
    out = {"ok": res.ok, "D": str(d), "members": len(fam), "secting": len(secting)}
    if not res.ok:
        out.update(witness=res.witness.elements(), index=res.index, uncovered=res.uncovered)
    ctx.emit(_json(out))
    return EXIT_OK if res.ok else EXIT_FAIL


def _limits(args) -> tuple[int | None, float | None]:
    node = args.node_limit
    tl = args.time_limit
    if tl is None and os.environ.get("DSECTING_TIME_LIMIT"):
        tl = float(os.environ["DSECTING_TIME_LIMIT"])
    return node, tl


def cmd_solve(args, ctx: Context) -> int:
    d = parse_d(args.D)
    fam = load_source(ctx, args.family, args.n)
    node, tl = _limits(args)
    res = exact_beta(fam, d, node_limit=node, time_limit=tl)
    if not verify_dsecting(fam, res.witness, d).ok:
        print("internal error: solver witness does not verify", file=sys.stderr)
        return EXIT_FAIL
    ctx.emit(_json({"D": str(d), **res.to_json(), "lower_bound": res.lower_bound}))
    return EXIT_OK if res.proven_optimal else EXIT_LIMIT


def cmd_disc(args, ctx: Context) -> int:
    fam = load_source(ctx, args.family, args.n)
    value, coloring = exact_discrepancy(fam)
    ctx.emit(_json({"value": value, "coloring": coloring.elements(), "n": fam.n}))
    return EXIT_OK


def cmd_random(args, ctx: Context) -> int:
    seeds = list(range(args.seed, args.seed + args.runs))
    ctx.manifest.seeds = seeds
    if args.method == "lll-uniform":
        job = _UniformJob(_need(args.n, "--n"), _need(args.k, "--k"), args.t)
        target = None
    else:
        target = load_source(ctx, _need(args.family, "--family"), args.n)
        job = _ChernoffCli(target, _need(args.t, "--t"), args.restarts) if args.method == "chernoff" \
            else _LllJob(target, args.t)
    try:
        runs = randomized.run_seeds(job, seeds, args.workers)
    except randomized.RandomizedFailure as exc:
        ce = exc.counterexample.elements() if exc.counterexample is not None else None
        ctx.emit(_json({"ok": False, "error": str(exc), "counterexample": ce, "spent": exc.spent}))
        return EXIT_LIMIT
    docs = [r.to_json() for r in runs]
    if not all(r.verified for r in runs):
        ctx.emit(_json(docs[0] if len(docs) == 1 else {"runs": docs}))
        return EXIT_FAIL
    if len(docs) == 1:
        ctx.emit(_json(docs[0]))
    else:
        first = sum(1 for r in runs if r.iterations == 1) / len(runs)
        ctx.emit(_json({"runs": docs, "first_draw_rate": first,
                        "resamples": [r.resamples for r in runs]}))
    return EXIT_OK


@dataclass(frozen=True)
class _ChernoffCli:
    family: Family
    t: int
    restarts: int

    def __call__(self, seed):
        return randomized.chernoff_family(self.family, self.t, seed, self.restarts)


@dataclass(frozen=True)
class _LllJob:
    family: Family
    t: int | None

    def __call__(self, seed):
        return randomized.lll_bisecting(self.family, seed, self.t)


@dataclass(frozen=True)
class _UniformJob:
    n: int
    k: int
    t: int | None

    def __call__(self, seed):
        return randomized.lll_uniform_half_bisecting(self.n, self.k, seed, self.t)


def cmd_bounds(args, ctx: Context) -> int:
    d = parse_d(args.D)
    try:
        rep = bounds.bound_report(args.n, args.k, d, args.c)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    status = EXIT_OK
    if args.with_constructions:
        cons = _best_construction(args.n, args.k, d)
        if cons is not None:
            rep.add("construction", "upper", cons)
    if args.with_exact:
        node, tl = _limits(args)
        res = exact_beta(generate_family(args.n, _table_family(args.n, args.k, d)), d,
                         node_limit=node, time_limit=tl)
        rep.add("exact_solver", "exact" if res.proven_optimal else "upper", res.value)
        if not res.proven_optimal:
            status = EXIT_LIMIT
    errors = rep.consistency_errors()
    for e in errors:
        print(f"inconsistent: {e}", file=sys.stderr)
    if errors:
        status = EXIT_FAIL
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["label", "kind", "value", "anchor"], lineterminator="\n")
        writer.writeheader()
        for r in rep.rows:
            writer.writerow(r.as_dict())
        ctx.emit(buf.getvalue())
        return status
    exact = rep.exact()
    out = {"n": args.n, "k": args.k, "D": str(d), "rows": [r.as_dict() for r in rep.rows],
           "best_lower": bounds.render(rep.best_lower()), "best_upper": bounds.render(rep.best_upper()),
           "exact": None if exact is None else bounds.render(exact)}
    ctx.emit(_json(out))
    return status


# ---------------------------------------------------------------------------
# table


def parse_grid(text: str) -> list[int]:
    """``4..10``, ``6..10:2``, ``6,8,10`` or mixtures like ``2,4..6``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)\.\.(\d+)(?::(\d+))?", part)
        if m:
            lo, hi, step = int(m.group(1)), int(m.group(2)), int(m.group(3) or 1)
            if step < 1 or hi < lo:
                raise UsageError(f"bad range {part!r}")
            out.extend(range(lo, hi + 1, step))
        elif part.isdigit():
            out.append(int(part))
        else:
            raise UsageError(f"bad grid item {part!r}")
    return out


def parse_k(text: str | None):
    """Returns a function n -> list of k values (empty when none apply)."""
    if text is None:
        return lambda n: [None]
    m = re.fullmatch(r"n(?:([+-])(\d+))?", text.strip())
    if m:
        off = int(m.group(2) or 0) * (-1 if m.group(1) == "-" else 1)
        return lambda n: [n + off] if 0 <= n + off <= n else []
    m = re.fullmatch(r"n/(\d+)", text.strip())
    if m:
        q = int(m.group(1))
        return lambda n: [n // q] if n % q == 0 else []
    ks = parse_grid(text)
    return lambda n: [k for k in ks if k <= n]


TABLE_FIELDS = ["n", "k", "D", "family", "lower", "upper", "construction", "exact", "proven", "gap", "flag"]


def _table_family(n: int, k: int | None, d: DSpec) -> str:
    if k is not None:
        return f"all:{k}"
    if d.kind == "interval" and d.i >= 1:
        return "all"
    return f"parity:{d.i}"


def _best_construction(n: int, k: int | None, d: DSpec) -> int | None:
    traces = []
    if k is None:
        if d.kind == "interval" and d.i >= 1:
            traces.append(constructions.interval_swap_family(n, min(d.i, n)))
        elif d.kind == "singleton" and d.i == 1:
            traces.append(constructions.singleton_one_family(n))
        elif d.kind == "singleton" and 1 <= d.i <= n:
            traces.append(constructions.chain_family(n, d.i))
    elif d == DSpec.interval(1) or d == DSpec.singleton(0):
        if 1 <= k <= n:
            traces.append(constructions.upper_tail_family(n, k))
        if k == 2 and n >= 2:
            traces.append(constructions.binary_code_family(n))
    sizes = []
    for tr in traces:
        # singleton:0 on k-sets: a bisector of an even k-set has imbalance 0 exactly
        if tr.verify().ok:
            sizes.append(tr.claimed_size)
    return min(sizes) if sizes else None


def table_rows(ns, kfun, ds, with_exact: bool, node_limit=None, time_limit=None):
    """Yield one dict per (n, k, D) cell in grid order."""
    for d in ds:
        for n in ns:
            for k in kfun(n):
                yield table_cell(n, k, d, with_exact, node_limit, time_limit)


def table_cell(n, k, d, with_exact, node_limit=None, time_limit=None) -> dict:
    row = dict.fromkeys(TABLE_FIELDS, "")
    row.update(n=n, k="" if k is None else k, D=str(d), family=_table_family(n, k, d))
    flags = []
    rep = None
    try:
        rep = bounds.bound_report(n, k, d)
    except ValueError:
        flags.append("no-bounds")
    lower = rep.best_lower() if rep else None
    upper = rep.best_upper() if rep else None
    exact_formula = rep.exact() if rep else None
    lo_int = math.ceil(lower) if lower is not None else None
    up_int = math.floor(upper) if upper is not None else None
    if exact_formula is not None:
        lo_int = max(lo_int or 0, exact_formula)
        up_int = exact_formula if up_int is None else min(up_int, exact_formula)
    try:
        cons = _best_construction(n, k, d)
    except (ValueError, BudgetError):
        cons = None
    if cons is not None:
        up_int = cons if up_int is None else min(up_int, cons)
    row.update(lower=_cell(lo_int), upper=_cell(up_int), construction=_cell(cons))
    if lo_int is not None and up_int is not None:
        row["gap"] = up_int - lo_int
    if with_exact:
        try:
            fam = generate_family(n, row["family"])
            res = exact_beta(fam, d, node_limit=node_limit, time_limit=time_limit)
            row.update(exact=res.value, proven=str(res.proven_optimal).lower())
            if not res.proven_optimal:
                flags.append("limit")
            elif (lo_int is not None and res.value < lo_int) or (up_int is not None and res.value > up_int):
                flags.append("inconsistent")
        except InfeasibleError:
            flags.append("infeasible")
        except BudgetError:
            flags.append("budget")
    row["flag"] = "+".join(flags)
    return row


def _cell(v):
    return "" if v is None else v


def cmd_table(args, ctx: Context) -> int:
    ns = parse_grid(args.n)
    kfun = parse_k(args.k)
    ds = [parse_d(x) for x in args.D.split(",")]
    node, tl = _limits(args)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, TABLE_FIELDS, lineterminator="\n")
    writer.writeheader()
    status = EXIT_OK
    for row in table_rows(ns, kfun, ds, args.with_exact, node, tl):
        writer.writerow(row)
        flags = row["flag"].split("+")
        if {"limit", "budget"} & set(flags):
            status = max(status, EXIT_LIMIT)
        if "inconsistent" in flags:
            print(f"inconsistent cell: {row}", file=sys.stderr)
            status = EXIT_FAIL if status == EXIT_OK else status
    ctx.emit(buf.getvalue())
    return status


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", metavar="PATH", help="write a run manifest (JSON) here")

    p = argparse.ArgumentParser(prog="dsecting", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", parents=[common], help="emit a verified explicit construction")
    c.add_argument("name", choices=sorted(constructions.BUILDERS) + ["bipartite-cover"])
    c.add_argument("--n", type=int)
    c.add_argument("--i", type=int)
    c.add_argument("--k", type=int)
    c.add_argument("--edges", help="edge family (bipartite-cover)")
    c.add_argument("--coloring", help="JSON list or object of vertex colors (bipartite-cover)")
    c.add_argument("--format", choices=["json", "compact"], default="json")
    c.set_defaults(func=cmd_construct)

    v = sub.add_parser("verify", parents=[common], help="check that one family D-sects another")
    v.add_argument("--family", required=True)
    v.add_argument("--secting", help="file, generator, or - for stdin (default)")
    v.add_argument("--D", required=True)
    v.add_argument("--n", type=int)
    v.set_defaults(func=cmd_verify)

    def limits(sp):
        sp.add_argument("--node-limit", type=int)
        sp.add_argument("--time-limit", type=float, help="seconds")

    s = sub.add_parser("solve", parents=[common], help="exact minimum D-secting family")
    s.add_argument("--family", required=True)
    s.add_argument("--D", required=True)
    s.add_argument("--n", type=int)
    limits(s)
    s.set_defaults(func=cmd_solve)

    dd = sub.add_parser("disc", parents=[common], help="exact discrepancy")
    dd.add_argument("--family", required=True)
    dd.add_argument("--n", type=int)
    dd.set_defaults(func=cmd_disc)

    r = sub.add_parser("random", parents=[common], help="seeded randomized constructions")
    r.add_argument("method", choices=["chernoff", "lll", "lll-uniform"])
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--runs", type=int, default=1, help="use seeds seed..seed+runs-1")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--family")
    r.add_argument("--n", type=int)
    r.add_argument("--k", type=int)
    r.add_argument("--t", type=int)
    r.add_argument("--restarts", type=int, default=randomized.DEFAULT_RESTARTS)
    r.set_defaults(func=cmd_random)

    b = sub.add_parser("bounds", parents=[common], help="closed-form bounds for (n, k, D)")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--k", type=int)
    b.add_argument("--D", required=True)
    b.add_argument("--c", type=float, help="constant for the linear-k row, 0 < c < 1/2")
    b.add_argument("--with-exact", action="store_true")
    b.add_argument("--with-constructions", action="store_true")
    b.add_argument("--format", choices=["json", "csv"], default="json")
    limits(b)
    b.set_defaults(func=cmd_bounds)

    t = sub.add_parser("table", parents=[common], help="CSV grid of bounds, constructions and exact values")
    t.add_argument("--n", required=True, help="grid, e.g. 4..10, 6..10:2, 6,8,10")
    t.add_argument("--k", help="grid, n-2, n/2 ...; omit for the unrestricted family")
    t.add_argument("--D", required=True, help="comma-separated list")
    t.add_argument("--with-exact", action="store_true")
    limits(t)
    t.set_defaults(func=cmd_table)
    return p


def main(argv: list[str] | None = None, stdin=None, stdout=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    ctx = Context(argv, stdin, io.StringIO())
    t0 = time.monotonic()
    try:
        code = args.func(args, ctx)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        code = EXIT_FAIL
    except BudgetError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        code = EXIT_LIMIT
    except (UsageError, ContractError, FamilyFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    text = ctx.out.getvalue()
    stdout.write(text)
    stdout.flush()
    if args.manifest:
        m = ctx.manifest
        m.wall_clock = time.monotonic() - t0
        m.output_sha256 = _digest(text)
        m.exit_code = code
        Path(args.manifest).write_text(json.dumps(m.to_json(), indent=2) + "\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
