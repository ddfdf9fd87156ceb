"""Command-line interface.

Exit codes: 0 success, 2 unparsable input, 3 invalid labels / leaf sets /
out-of-range values, 4 the two multisets are equal, 5 a verification suite
found a violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .disentangle import disentangles, format_multiset, min_disentangling, read_multiset
from .humphries import build_family_pair, pad_family_pair, verify_entangled
from .tree_core import (
    LabelTable,
    LeafSetError,
    NewickError,
    TreeError,
    emit_newick,
    leaf_name,
    parse_newick,
    resolve_labels,
    restrict,
)
from . import verify as suites

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_LABEL = 3
EXIT_EQUAL = 4
EXIT_VIOLATION = 5

# flags that must not change the report
_UNECHOED = {"json", "threads", "timing", "func"}


class CommandError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _mode(args) -> str:
    return "unrooted" if args.unrooted else "rooted"


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc.strerror}", EXIT_PARSE) from None


def cmd_restrict(args) -> tuple[dict, list[str], int]:
    tree = parse_newick(_read(args.tree_file).strip(), _mode(args))
    names = [x for x in args.labels.split(",") if x]
    k = resolve_labels(names, tree.labels)
    result = restrict(tree, k)
    newick = emit_newick(result)
    return {"newick": newick, "n": result.n}, [newick], EXIT_OK


def cmd_dnumber(args) -> tuple[dict, list[str], int]:
    labels = LabelTable()
    s1 = read_multiset(_read(args.file1), _mode(args), labels)
    s2 = read_multiset(_read(args.file2), _mode(args), labels)
    if s1.leaf_mask != s2.leaf_mask:
        raise LeafSetError("the two files have different leaf sets")
    if s1.r != s2.r:
        raise LeafSetError(f"the two files have different sizes ({s1.r} vs {s2.r})")
    if s1 == s2:
        return {"equal": True, "r": s1.r, "n": len(s1.leaves)}, ["equal\ttrue"], EXIT_EQUAL
    res = min_disentangling(s1, s2, args.threads)
    witness = [leaf_name(x, labels) for x in res.witness]
    result = {"cardinality": res.cardinality, "witness": witness, "r": s1.r, "n": len(s1.leaves)}
    lines = [f"cardinality\t{res.cardinality}", f"witness\t{','.join(witness)}"]
    return result, lines, EXIT_OK


def cmd_humphries(args) -> tuple[dict, list[str], int]:
    k = args.k
    if not 1 <= k <= 6:
        raise CommandError("k must be between 1 and 6", EXIT_LABEL)
    r = args.r if args.r is not None else 1 << (k - 1)
    if not (1 << (k - 1)) <= r < (1 << k):
        raise CommandError(f"r={r} outside [{1 << (k - 1)}, {1 << k}) for k={k}", EXIT_LABEL)
    base = None
    if args.base is not None:
        base = parse_newick(args.base, "rooted")
        if base.leaves != list(range(1, k + 1)):
            raise LeafSetError(f"base tree must have leaves 1..{k}")
    pair = build_family_pair(k, base)
    s1, s2 = pad_family_pair(pair, r)
    level = 3 * k - 1
    ok = verify_entangled(s1, s2, level) and disentangles(s1.leaves, s1, s2)
    result = {
        "k": k,
        "r": r,
        "n": 3 * k,
        "base": emit_newick(pair.base),
        "entangled_up_to": level if ok else None,
        "odd": s1.to_lines(),
        "even": s2.to_lines(),
    }
    lines = [f"entangled_up_to\t{level if ok else 'FAILED'}"]
    if args.out_prefix:
        paths = {"odd": f"{args.out_prefix}.odd.nwk", "even": f"{args.out_prefix}.even.nwk"}
        Path(paths["odd"]).write_text(format_multiset(s1))
        Path(paths["even"]).write_text(format_multiset(s2))
        result["files"] = paths
        lines = [f"odd_file\t{paths['odd']}", f"even_file\t{paths['even']}"] + lines
    else:
        lines = ["# odd"] + s1.to_lines() + ["# even"] + s2.to_lines() + lines
    return result, lines, EXIT_OK if ok else EXIT_VIOLATION


def cmd_verify(args) -> tuple[dict, list[str], int]:
    suite = args.suite
    if suite == "rd1":
        res = suites.suite_rd1(args.n or 5, args.threads)
    elif suite == "d1":
        res = suites.suite_d1(args.n or 6, args.threads)
    elif suite == "humphries":
        res = suites.suite_humphries(args.k_max, args.threads)
    elif suite == "bounds":
        if args.seed is None:
            raise CommandError("verify bounds needs an explicit --seed", EXIT_LABEL)
        res = suites.suite_bounds(args.r, args.n or 7, args.trials, args.seed, not args.unrooted, args.threads)
    else:
        res = suites.suite_kahle(args.entry_bound)
    result = {"suite": res.suite, "passed": res.passed, "details": res.payload}
    if res.counterexample is not None:
        result["counterexample"] = res.counterexample
    lines = [f"suite\t{res.suite}", f"status\t{'pass' if res.passed else 'FAIL'}"]
    for key, value in res.payload.items():
        if isinstance(value, (int, str, bool)):
            lines.append(f"{key}\t{value}")
    if res.counterexample is not None:
        lines.append("counterexample\t" + json.dumps(res.counterexample, sort_keys=True))
    return result, lines, EXIT_OK if res.passed else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit a JSON report with sorted keys")
    common.add_argument("--threads", type=int, default=1, help="worker threads for subset search")
    common.add_argument("--timing", action="store_true", help="record wall-clock time in elapsed_ms")

    kind = argparse.ArgumentParser(add_help=False)
    group = kind.add_mutually_exclusive_group()
    group.add_argument("--rooted", action="store_true", help="trees are rooted binary (default)")
    group.add_argument("--unrooted", action="store_true", help="trees are unrooted trivalent")

    parser = argparse.ArgumentParser(prog="disentangle", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("restrict", parents=[common, kind], help="restrict a tree to a leaf subset")
    p.add_argument("tree_file")
    p.add_argument("labels", help="comma-separated leaf labels")
    p.set_defaults(func=cmd_restrict)

    p = sub.add_parser("dnumber", parents=[common, kind], help="minimum disentangling set of two multisets")
    p.add_argument("file1")
    p.add_argument("file2")
    p.set_defaults(func=cmd_dnumber)

    p = sub.add_parser("humphries", parents=[common], help="build the lower-bound family pair")
    p.add_argument("k", type=int)
    p.add_argument("r", type=int, nargs="?")
    p.add_argument("--base", help="rooted Newick on leaves 1..k (default: caterpillar)")
    p.add_argument("--out-prefix", help="write <prefix>.odd.nwk and <prefix>.even.nwk")
    p.set_defaults(func=cmd_humphries)

    p = sub.add_parser("verify", parents=[common, kind], help="run a verification suite")
    p.add_argument("suite", choices=["rd1", "d1", "humphries", "bounds", "kahle"])
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--k-max", type=int, default=3)
    p.add_argument("--entry-bound", type=int, default=2)
    p.set_defaults(func=cmd_verify)
    return parser


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _UNECHOED}


def _emit(args, result: dict, lines: list[str], elapsed_ms: int, out) -> None:
    if args.json:
        report = {
            "command": args.command,
            "inputs": _echo(args),
            "result": result,
            "elapsed_ms": elapsed_ms,
        }
        out.write(json.dumps(report, sort_keys=True) + "\n")
    else:
        for line in lines:
            out.write(line + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    start = time.perf_counter()
    try:
        result, lines, code = args.func(args)
    except CommandError as exc:
        result, lines, code = {"error": str(exc)}, [], exc.code
    except NewickError as exc:
        result, lines, code = {"error": str(exc)}, [], EXIT_PARSE
    except (TreeError, ValueError) as exc:
        result, lines, code = {"error": str(exc)}, [], EXIT_LABEL
    elapsed = int((time.perf_counter() - start) * 1000) if args.timing else 0
    if "error" in result:
        print(f"error: {result['error']}", file=sys.stderr)
        result["exit_code"] = code
    _emit(args, result, lines, elapsed, sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
