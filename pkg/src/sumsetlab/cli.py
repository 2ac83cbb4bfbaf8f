"""Command-line front end.

Every subcommand writes one report (text, CSV or JSON) to standard output or
``--out``.  Exit status: 0 success, 1 a check failed, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import density, families, lattice, morphology, setlang, verify
from .errors import DSLSyntaxError, SumsetLabError
from .lattice import LatticeSet, Window

log = logging.getLogger("sumsetlab")


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    def __init__(self, report: str):
        super().__init__("check failed")
        self.report = report


# -- argument helpers ----------------------------------------------------------

def _params(args) -> dict[str, int]:
    out = {}
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects k=v, got {item!r}")
        try:
            out[key] = int(value)
        except ValueError:
            raise UsageError(f"--param {key} must be an integer") from None
    return out


def _window(args, default: str | None = None) -> Window:
    spec = args.window or default
    if spec is None:
        raise UsageError("--window is required")
    try:
        return Window.parse(spec)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _fraction(text: str | None, default) -> Fraction:
    if text is None:
        return Fraction(default)
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {text!r}") from None


def _family_spec(name: str, params: dict) -> families.FamilySpec:
    keep = {k: v for k, v in params.items() if k in ("base", "n0")}
    return families.FamilySpec(name, tuple(sorted(keep.items())))


def _cells(text: str, window: Window) -> LatticeSet:
    """``"1,4,9"`` in one dimension, ``"0:1;2:-3"`` for cells with several coordinates."""
    try:
        if window.dim == 1:
            coords = [int(x) for x in text.split(",") if x.strip()]
        else:
            coords = [tuple(int(v) for v in c.split(":")) for c in text.split(";") if c.strip()]
    except ValueError:
        raise UsageError(f"cannot read cells {text!r}") from None
    return lattice.build_set(window, coords)


def load_sets(args, window: Window) -> list[tuple[str, LatticeSet]]:
    """Sets named by ``--cells``, ``--expr``, ``--file`` and ``--family``, in that order."""
    out = [(text, _cells(text, window)) for text in args.cells or []]
    for text in args.expr or []:
        out.append((text, setlang.evaluate(setlang.parse(text), window)))
    for path in args.file or []:
        s = lattice.loads(Path(path).read_text())
        if s.window != window:
            raise UsageError(f"{path} holds a set on {s.window.spec()}, not {window.spec()}")
        out.append((path, s))
    if args.family:
        parts = families.generate(_family_spec(args.family, _params(args)), window)
        out.extend((f"{args.family}.{k}", v) for k, v in sorted(parts.items()))
    return out


def _one_set(args, window: Window) -> tuple[str, LatticeSet]:
    sets = load_sets(args, window)
    if not sets:
        raise UsageError("no input set; use --cells, --expr, --file or --family")
    return sets[0]


def _csv(rows, header) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _fs(x: Fraction) -> str:
    return density.fraction_str(Fraction(x))


# -- subcommands -----------------------------------------------------------------

def cmd_eval(args) -> str:
    w = _window(args)
    label, s = _one_set(args, w)
    if args.format == "json":
        return json.dumps({"source": label, "window": w.spec(), "cardinality": s.cardinality,
                           "clipped": s.clipped, "set": lattice.dumps(s)}, indent=2)
    return lattice.dumps(s)


TRANSFORMS = ("union", "intersect", "difference", "complement", "translate", "sum",
              "dilate", "erode", "quotient", "fill")


def cmd_transform(args) -> str:
    w = _window(args)
    sets = [s for _, s in load_sets(args, w)]
    p = _params(args)
    op = args.op
    need = 2 if op in ("union", "intersect", "difference", "sum") else 1
    if len(sets) < need:
        raise UsageError(f"{op} needs {need} input set(s)")
    a = sets[0]
    anchor = "origin" if p.get("origin") else "center"
    if op in ("union", "intersect", "difference", "complement"):
        out = lattice.boolean_op(op, a, sets[1] if need == 2 else None)
    elif op == "translate":
        out = lattice.translate(a, tuple(p.get(f"v{i}", 0) for i in range(w.dim)))
    elif op == "sum":
        out = morphology.sumset(a, sets[1], expand=bool(p.get("expand", 0)))
    elif op == "dilate":
        out = morphology.dilate_cube(a, p.get("r", 1), anchor)
    elif op == "erode":
        out = morphology.erode_cube(a, p.get("r", 1), anchor)
    elif op == "quotient":
        out = morphology.block_quotient(a, p.get("n", 2))
    else:
        out = morphology.block_fill(a, p.get("n", 2))
    return lattice.dumps(out)


def cmd_density(args) -> str:
    w = _window(args)
    label, s = _one_set(args, w)
    p = _params(args)
    tail = _fraction(args.tail, density.DEFAULT_TAIL)
    prof = density.prefix_profile(s, p.get("samples", density.DEFAULT_SAMPLES), tail)
    lower, upper = density.tail_estimates(prof)
    shown = density.prefix_profile(s, p.get("samples", density.DEFAULT_SAMPLES), tail, dense_tail=False)
    sigma = density.schnirelmann(s) if w.convention is lattice.Convention.CLASSICAL else None
    banach = density.banach_profile(s, [p["banach"]]) if "banach" in p else []
    if args.format == "json":
        return json.dumps({"source": label, "window": w.spec(),
                           "samples": [[n, _fs(r)] for n, r in shown.samples],
                           "lower": _fs(lower), "upper": _fs(upper),
                           "schnirelmann": None if sigma is None else _fs(sigma),
                           "banach": [[n, _fs(r)] for n, r in banach]}, indent=2)
    rows = [[n, _fs(r)] for n, r in shown.samples]
    rows += [["lower", _fs(lower)], ["upper", _fs(upper)]]
    if sigma is not None:
        rows.append(["schnirelmann", _fs(sigma)])
    rows += [[f"banach:{n}", _fs(r)] for n, r in banach]
    return _csv(rows, ["n", "ratio"])


def cmd_witness(args) -> str:
    w = _window(args)
    sets = load_sets(args, w)
    if not sets:
        raise UsageError("no input set; use --cells, --expr, --file or --family")
    label, s = sets[0]
    if args.sumset and len(sets) >= 2:
        s = morphology.sumset(sets[0][1], sets[1][1])
        label = f"{sets[0][0]} + {sets[1][0]}"
    p = _params(args)
    table = density.witness_table(s, args.m_max, args.k_max,
                                  anchor="origin" if p.get("origin") else "center",
                                  tail_fraction=_fraction(args.tail, density.DEFAULT_TAIL),
                                  threads=args.threads, source=label)
    return table.to_json() if args.format == "json" else table.to_csv()


def cmd_search_m(args) -> str:
    w = _window(args)
    label, s = _one_set(args, w)
    p = _params(args)
    eps = _fraction(args.epsilon, 0)
    if args.mode in ("lower", "upper"):
        m = density.minimal_m_search(s, _fraction(args.level, 1), eps, args.k_max, args.mode,
                                     anchor="origin" if p.get("origin") else "center",
                                     m_max=args.m_max)
        return json.dumps({"source": label, "mode": args.mode, "m": m})
    if eps <= 0:
        raise UsageError("saturation modes need --epsilon in (0, 1)")
    m = density.saturation_search(s, eps, args.mode.replace("-", "_"),
                                  [p["n"]] if "n" in p else None)
    return json.dumps({"source": label, "mode": args.mode, "m": m})


def cmd_gap_check(args) -> str:
    w = _window(args)
    label, s = _one_set(args, w)
    p = _params(args)
    m_f = p.get("m_f", 1)
    base = p.get("f_base", 2)
    table = [base**m if base else 0 for m in range(m_f + 1)]
    est = density.adaptive_gap_check(s, table, m_f)
    return json.dumps({"source": label, "f": table, "m_f": m_f, "lower": _fs(est)})


def _report(verdicts: list[verify.Verdict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([v.to_dict() for v in verdicts], indent=2)
    return _csv([[v.check, v.inputs_digest, v.holds, _fs(v.lhs), _fs(v.rhs), v.witness]
                 for v in verdicts], ["check", "inputs_digest", "holds", "lhs", "rhs", "witness"])


def cmd_mann(args) -> str:
    if args.exhaustive is not None:
        bad, pairs = verify.mann_exhaustive(args.exhaustive, threads=args.threads)
        text = f"{bad} violations / {pairs} pairs\n"
        if bad:
            raise CheckFailed(text)
        return text
    if args.random is not None:
        w = _window(args, "1d:1000")
        bad, fails = verify.mann_random(args.random, w.radius, seed=args.seed)
        text = f"{bad} violations / {args.random} pairs\n"
        if bad:
            raise CheckFailed(text + _report(fails, args.format))
        return text
    w = _window(args)
    sets = load_sets(args, w)
    if len(sets) < 2:
        raise UsageError("mann needs two sets, an --exhaustive size or --random count")
    v = verify.mann_check(sets[0][1], sets[1][1])
    text = _report([v], args.format)
    if not v.holds:
        raise CheckFailed(text)
    return text


def cmd_cover(args) -> str:
    if args.exhaustive:
        sweep = verify.covering_exhaustive()
        text = (f"{sweep.violations} violations / {sweep.checked} instances meeting the "
                f"hypotheses ({sweep.instances} enumerated)\n")
        if sweep.violations:
            raise CheckFailed(text)
        return text
    if args.besicovitch is not None:
        w = _window(args, "c8:2")
        rng = np.random.default_rng(args.seed)
        worst, bad = 0, 0
        for _ in range(args.besicovitch):
            cubes, ground = verify.random_cover_instance(rng, w, extra=w.side)
            audit = verify.cover_audit(cubes, verify.besicovitch_select(cubes, ground), ground)
            worst = max(worst, audit.max_multiplicity)
            bad += not audit.ok
        text = (f"{bad} failed audits / {args.besicovitch} instances; "
                f"max multiplicity {worst} (bound {4**w.dim})\n")
        if bad:
            raise CheckFailed(text)
        return text
    if not args.instance:
        raise UsageError("cover needs --instance FILE, --exhaustive or --besicovitch COUNT")
    raw = json.loads(Path(args.instance).read_text())
    inst = verify.CoverInstance([_cell(c) for c in raw["ground"]],
                                [[_cell(c) for c in t] for t in raw["subsets"]],
                                raw["m"], Fraction(str(raw["t"])),
                                [_cell(c) for c in raw.get("target", [])])
    v = verify.covering_bound_check(inst)
    text = _report([v], args.format)
    if not v.holds:
        raise CheckFailed(text)
    return text


def _cell(c):
    return tuple(c) if isinstance(c, list) else c


def cmd_two_scale(args) -> str:
    w = _window(args)
    p = _params(args)
    cfg = verify.TwoScaleConfig(w.radius, p.get("nu", max(1, w.radius // 1000)), p.get("s", 1),
                                _fraction(args.epsilon, Fraction(1, 50)))
    sets = load_sets(args, w)
    if sets:
        label, e = sets[0]
    else:
        lo, hi = p.get("lo", 0), p.get("hi", w.radius)
        bits = np.zeros(w.shape, dtype=bool)
        axis = w.axis_coords()
        sl = (axis >= lo) & (axis <= hi)
        bits[tuple(np.ix_(*([sl] * w.dim)))] = True
        label, e = f"[{lo},{hi}]^{w.dim}", lattice.make_set(w, bits)
    if args.syndetic:
        if len(sets) < 2:
            raise UsageError("--syndetic needs two sets")
        rows = verify.syndetic_point_fraction(sets[0][1], sets[1][1], cfg, args.m_max)
        if args.format == "json":
            return json.dumps([[m, _fs(f)] for m, f in rows])
        return _csv([[m, _fs(f)] for m, f in rows], ["m", "fraction"])
    frac, meas = verify.two_scale_density_fraction(e, cfg)
    if args.format == "json":
        return json.dumps({"source": label, "fraction": _fs(frac), "smeared": _fs(meas)})
    return _csv([[label, _fs(frac), _fs(meas)]], ["source", "fraction", "smeared"])


def cmd_family(args) -> str:
    if not args.family:
        raise UsageError("family needs --family NAME")
    w = _window(args)
    parts = families.generate(_family_spec(args.family, _params(args)), w)
    if args.format == "json":
        return json.dumps({k: {"cardinality": v.cardinality, "set": lattice.dumps(v)}
                           for k, v in sorted(parts.items())}, indent=2)
    return "".join(f"# part {k}\n{lattice.dumps(v)}" for k, v in sorted(parts.items()))


# -- verify-example bundles ------------------------------------------------------

def _near(x: Fraction, target: Fraction, tol: Fraction) -> bool:
    return abs(x - target) <= tol


def bundle_upper_42(quick: bool = False) -> list[tuple[str, bool, str]]:
    w = Window.classical(2**16 if quick else 2**20)
    a, b = families.gen_upper_pair(w)
    lo, up = density.tail_estimates(density.prefix_profile(a))
    out = [("A lower tail near 1/2", _near(lo, Fraction(1, 2), Fraction(1, 50)), f"{float(lo):.4f}"),
           ("A upper tail near 2/3", _near(up, Fraction(2, 3), Fraction(1, 50)), f"{float(up):.4f}")]
    table = density.witness_table(morphology.sumset(a, b), 8, 8)
    lows = [e.lower_est for e in table.entries]
    ups = [e.upper_est for e in table.entries]
    out.append(("A+B witness lower near 1/2 for all m,k <= 8",
                all(_near(x, Fraction(1, 2), Fraction(3, 100)) for x in lows),
                f"range {float(min(lows)):.4f}..{float(max(lows)):.4f}"))
    out.append(("A+B witness upper near 2/3 for all m,k <= 8",
                all(_near(x, Fraction(2, 3), Fraction(3, 100)) for x in ups),
                f"range {float(min(ups)):.4f}..{float(max(ups)):.4f}"))
    return out


def bundle_epsilon_28(quick: bool = False) -> list[tuple[str, bool, str]]:
    w = Window.classical(2**18 if quick else 2**22)
    a = families.gen_epsilon_set(w)
    k = 64
    out = []
    for m in range(1, 7):
        counts, sizes = density.witness_counts(morphology.dilate_cube(a, m, "origin"), k, "origin")
        start = density._tail_start(w.radius, density.DEFAULT_TAIL)
        up = density.exact_max_ratio(counts[start:], sizes[start:])
        bound = 1 - Fraction(1, 2**m)
        out.append((f"m={m}: witness upper <= 1 - 1/2^m + 0.02", up <= bound + Fraction(1, 50),
                    f"{float(up):.4f} vs {float(bound):.4f}"))
    return out


def bundle_optimal_41(quick: bool = False) -> list[tuple[str, bool, str]]:
    n = math.factorial(9 if quick else 10)
    c = families.gen_optimal_C(Window.classical(n))
    lo, _ = density.tail_estimates(density.prefix_profile(c))
    i = families.first_block_with(5)
    sl = families.gen_optimal_C_slice(math.factorial(i), 100_000)
    wit = morphology.erode_cube(morphology.dilate_cube(sl, 2, "origin"), 4)
    return [("C lower tail near 1/2", _near(lo, Fraction(1, 2), Fraction(1, 100)), f"{float(lo):.5f}"),
            (f"block {i} (s=5), m=2: no witness of radius 4", wit.cardinality == 0,
             f"{wit.cardinality} witnesses")]


def bundle_big_44(quick: bool = False) -> list[tuple[str, bool, str]]:
    out = []
    ok = all(families.r_p(b, p) + Fraction(1, b**p) * (1 - families.r_p(b, p)) == Fraction(1, 2)
             for b in (3, 4, 10) for p in range(1, 13))
    out.append(("r_p + (1 - r_p)/b^p = 1/2 for b in 3,4,10 and p <= 12", ok, ""))
    for b in (3, 4):
        d = families.d_density(b, b**10)
        out.append((f"base {b}: density of D >= 1 - 1/(b-1)", d >= 1 - Fraction(1, b - 1),
                    f"{float(d):.4f}"))
    if not quick:
        w, p = families.big_pair_window(4)
        a, bset = families.gen_big_pair(4, None, w)
        table = density.witness_table(morphology.sumset(a, bset), 1, 16, anchor="origin",
                                      m_values=[1], k_values=[16])
        low = table.entries[0].lower_est
        out.append(("scaled pair: witness lower < 1/2 - 0.02", low < Fraction(12, 25),
                    f"{float(low):.4f} at H={w.radius}"))
    return out


def bundle_nonpws_12(quick: bool = False) -> list[tuple[str, bool, str]]:
    n0 = 6
    w = Window.classical(math.factorial(8) if quick else math.factorial(9))
    s = families.gen_non_pws(n0, w)
    lo, _ = density.tail_estimates(density.prefix_profile(s))
    bound = families.non_pws_lower_bound(n0, w.radius)
    out = [("lower tail >= 1 - sum 1/j", lo >= bound, f"{float(lo):.4f} vs {float(bound):.4f}")]
    # runs between removed blocks are shorter than n0! - (n0-1)!
    k = math.factorial(n0) // 2
    _, up = density.tail_estimates(density.prefix_profile(morphology.erode_cube(s, k)))
    out.append((f"erosion by {k} leaves no tail witness", up == 0, f"{float(up):.4f}"))
    return out


EXAMPLES = {
    "upper-42": bundle_upper_42,
    "epsilon-28": bundle_epsilon_28,
    "optimal-41": bundle_optimal_41,
    "big-44": bundle_big_44,
    "nonpws-12": bundle_nonpws_12,
}


def cmd_verify_example(args) -> str:
    rows = EXAMPLES[args.name](quick=args.quick)
    text = "".join(f"{'PASS' if ok else 'FAIL'} {claim}{' (' + d + ')' if d else ''}\n"
                   for claim, ok, d in rows)
    if not all(ok for _, ok, _ in rows):
        raise CheckFailed(text)
    return text


# -- parser ---------------------------------------------------------------------

COMMANDS = {
    "eval": cmd_eval,
    "transform": cmd_transform,
    "density": cmd_density,
    "witness": cmd_witness,
    "search-m": cmd_search_m,
    "gap-check": cmd_gap_check,
    "mann": cmd_mann,
    "cover": cmd_cover,
    "two-scale": cmd_two_scale,
    "family": cmd_family,
    "verify-example": cmd_verify_example,
}

# module operation -> subcommand that reaches it
OPERATION_COMMANDS = {
    "lattice.build_set": "eval", "lattice.boolean_op": "transform", "lattice.translate": "transform",
    "morphology.sumset": "transform", "morphology.dilate_cube": "transform",
    "morphology.erode_cube": "transform", "morphology.block_quotient": "transform",
    "morphology.block_fill": "transform",
    "density.prefix_profile": "density", "density.tail_estimates": "density",
    "density.schnirelmann": "density", "density.banach_profile": "density",
    "density.witness_table": "witness", "density.minimal_m_search": "search-m",
    "density.saturation_search": "search-m", "density.adaptive_gap_check": "gap-check",
    "families.gen_upper_pair": "family", "families.gen_epsilon_set": "family",
    "families.gen_optimal_C": "family", "families.gen_big_pair": "family",
    "families.gen_non_pws": "family",
    "verify.mann_sigma_sum": "mann", "verify.mann_check": "mann", "verify.mann_exhaustive": "mann",
    "verify.covering_bound_check": "cover", "verify.besicovitch_select": "cover",
    "verify.two_scale_density_fraction": "two-scale", "verify.syndetic_point_fraction": "two-scale",
    "setlang.parse": "eval", "setlang.evaluate": "eval",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--window", help="1d:N for [1,N], cN:d for [-N,N]^d")
    common.add_argument("--cells", action="append", help="explicit cell list (repeatable)")
    common.add_argument("--expr", action="append", help="set expression (repeatable)")
    common.add_argument("--file", action="append", help="serialized set (repeatable)")
    common.add_argument("--family", choices=families.FAMILY_NAMES)
    common.add_argument("--param", action="append", metavar="K=V", help="integer parameter")
    common.add_argument("--m-max", type=int, default=8)
    common.add_argument("--k-max", type=int, default=8)
    common.add_argument("--level")
    common.add_argument("--epsilon")
    common.add_argument("--tail", help="tail fraction, default 1/2")
    common.add_argument("--format", choices=("text", "csv", "json"), default="csv")
    common.add_argument("--out")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sumsetlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[common], help="evaluate a set")
    t = sub.add_parser("transform", parents=[common], help="apply one set operation")
    t.add_argument("op", choices=TRANSFORMS)
    sub.add_parser("density", parents=[common], help="prefix profile and densities")
    wt = sub.add_parser("witness", parents=[common], help="witness-density table")
    wt.add_argument("--sumset", action="store_true", help="use the sum of the first two sets")
    sm = sub.add_parser("search-m", parents=[common], help="minimal m searches")
    sm.add_argument("--mode", default="lower",
                    choices=("lower", "upper", "schnirelmann-union", "banach-dilate"))
    sub.add_parser("gap-check", parents=[common], help="f-adaptive witness density")
    mn = sub.add_parser("mann", parents=[common], help="Mann inequality checks")
    mn.add_argument("--exhaustive", type=int, metavar="N")
    mn.add_argument("--random", type=int, metavar="COUNT")
    cv = sub.add_parser("cover", parents=[common], help="covering bound and cube selection")
    cv.add_argument("--instance")
    cv.add_argument("--exhaustive", action="store_true")
    cv.add_argument("--besicovitch", type=int, metavar="COUNT")
    ts = sub.add_parser("two-scale", parents=[common], help="density-point experiment")
    ts.add_argument("--syndetic", action="store_true")
    sub.add_parser("family", parents=[common], help="generate an example family")
    ve = sub.add_parser("verify-example", parents=[common], help="check one example's claims")
    ve.add_argument("name", choices=sorted(EXAMPLES))
    ve.add_argument("--quick", action="store_true", help="smaller windows")
    return parser


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    code = 0
    try:
        report = COMMANDS[args.command](args)
    except CheckFailed as e:
        report, code = e.report, 1
    except DSLSyntaxError as e:
        print(f"error: syntax error at column {e.column}: {e}", file=stderr)
        return 2
    except (UsageError, SumsetLabError, ValueError, LookupError, OSError) as e:
        print(f"error: {e}", file=stderr)
        return 2
    if report and not report.endswith("\n"):
        report += "\n"
    if args.out:
        Path(args.out).write_text(report)
    else:
        stdout.write(report)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
