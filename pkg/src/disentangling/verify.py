"""Batch verification suites behind ``disentangle verify``.

Each suite returns a SuiteResult whose ``payload`` is JSON-ready and whose
``counterexample`` is set on the first violation.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .disentangle import (
    TreeMultiset,
    check_upper_bound,
    g_bound,
    min_disentangling,
)
from .encoding import SmallComplexInstance, min_kernel_one_norm
from .humphries import build_family_pair, pad_family_pair, verify_entangled
from .tree_core import (
    enumerate_rooted,
    enumerate_unrooted,
    random_rooted,
    random_unrooted,
)


@dataclass
class SuiteResult:
    suite: str
    passed: bool
    payload: dict = field(default_factory=dict)
    counterexample: dict | None = None


def random_multiset(n: int, r: int, rng: random.Random, rooted: bool = True) -> TreeMultiset:
    draw = random_rooted if rooted else random_unrooted
    return TreeMultiset(tuple(draw(n, rng.getrandbits(64)) for _ in range(r)))


def random_distinct_pair(n: int, r: int, rng: random.Random, rooted: bool = True) -> tuple[TreeMultiset, TreeMultiset]:
    s1 = random_multiset(n, r, rng, rooted)
    while True:
        s2 = random_multiset(n, r, rng, rooted)
        if s2 != s1:
            return s1, s2


def _pair_cex(s1: TreeMultiset, s2: TreeMultiset, **extra) -> dict:
    return {"s1": s1.to_lines(), "s2": s2.to_lines(), **extra}


def _single_tree_suite(name: str, n: int, rooted: bool, threads: int) -> SuiteResult:
    trees = list(enumerate_rooted(n) if rooted else enumerate_unrooted(n))
    expected = 3 if rooted else 4
    sizes = set()
    pairs = 0
    for t1, t2 in itertools.combinations(trees, 2):
        s1, s2 = TreeMultiset((t1,)), TreeMultiset((t2,))
        res = min_disentangling(s1, s2, threads)
        pairs += 1
        sizes.add(res.cardinality)
        if res.cardinality != expected:
            return SuiteResult(
                name, False, {"n": n, "pairs": pairs},
                _pair_cex(s1, s2, cardinality=res.cardinality, expected=expected),
            )
    return SuiteResult(name, True, {
        "n": n,
        "trees": len(trees),
        "pairs": pairs,
        "max_cardinality": max(sizes),
        "min_cardinality": min(sizes),
    })


def suite_rd1(n: int = 5, threads: int = 1) -> SuiteResult:
    """Every pair of distinct rooted trees on 1..n separates on exactly 3 leaves."""
    if not 3 <= n <= 6:
        raise ValueError("rd1 suite supports 3 <= n <= 6")
    return _single_tree_suite("rd1", n, True, threads)


def suite_d1(n: int = 6, threads: int = 1) -> SuiteResult:
    """Every pair of distinct unrooted trees on 1..n separates on exactly 4 leaves."""
    if not 4 <= n <= 7:
        raise ValueError("d1 suite supports 4 <= n <= 7")
    return _single_tree_suite("d1", n, False, threads)


def suite_humphries(k_max: int = 3, threads: int = 1) -> SuiteResult:
    """Padded gadget families for every k <= k_max and every r in [2^(k-1), 2^k)."""
    if not 1 <= k_max <= 4:
        raise ValueError("humphries suite supports 1 <= k_max <= 4")
    rows = []
    for k in range(1, k_max + 1):
        pair = build_family_pair(k)
        for r in range(1 << (k - 1), 1 << k):
            s1, s2 = pad_family_pair(pair, r)
            entangled = verify_entangled(s1, s2, 3 * k - 1)
            card = min_disentangling(s1, s2, threads).cardinality if s1 != s2 else None
            row = {"k": k, "r": r, "g": g_bound(r), "entangled": entangled, "cardinality": card}
            rows.append(row)
            if not entangled or card != 3 * k or card != g_bound(r):
                return SuiteResult("humphries", False, {"cases": rows}, _pair_cex(s1, s2, **row))
    return SuiteResult("humphries", True, {"cases": rows})


def suite_bounds(r: int, n: int, trials: int, seed: int, rooted: bool = True, threads: int = 1) -> SuiteResult:
    """Random distinct pairs never need more than g(r) leaves (g(r) + 1 unrooted)."""
    if r < 1 or trials < 1:
        raise ValueError("need r >= 1 and trials >= 1")
    if not (3 if rooted else 4) <= n <= 12:
        raise ValueError("bounds suite supports n up to 12")
    rng = random.Random(seed)
    histogram: dict[int, int] = {}
    bound = g_bound(r) + (0 if rooted else 1)
    for i in range(trials):
        s1, s2 = random_distinct_pair(n, r, rng, rooted)
        rep = check_upper_bound(s1, s2, threads)
        histogram[rep.cardinality] = histogram.get(rep.cardinality, 0) + 1
        if not rep.holds:
            return SuiteResult(
                "bounds", False, {"trial": i, "bound": bound},
                rep.counterexample | {"cardinality": rep.cardinality},
            )
    return SuiteResult("bounds", True, {
        "r": r,
        "n": n,
        "rooted": rooted,
        "trials": trials,
        "seed": seed,
        "bound": bound,
        "max_cardinality": max(histogram),
        "histogram": {str(k): v for k, v in sorted(histogram.items())},
    })


def small_complex_instances() -> list[tuple[str, SmallComplexInstance]]:
    """Small complexes: s = 1..4 on binary levels, three-level variants, and a path."""
    specs = [
        ("s1_d2", (1,), (2,), 0),
        ("s2_d2x2", (1, 2), (2, 2), 1),
        ("s3_d2x2x2", (1, 2, 3), (2, 2, 2), 2),
        ("s1_d3", (1,), (3,), 0),
        ("s2_d3x3", (1, 2), (3, 3), 1),
        ("s3_d3x3x3", (1, 2, 3), (3, 3, 3), 2),
        ("s4_d2x2x2x2", (1, 2, 3, 4), (2, 2, 2, 2), 3),
    ]
    out = [(name, SmallComplexInstance.up_to(g, d, m)) for name, g, d, m in specs]
    path = [frozenset(f) for f in ((), (1,), (2,), (3,), (1, 2), (2, 3))]
    out.append(("s2_path_d2x3x2", SmallComplexInstance((1, 2, 3), {1: 2, 2: 3, 3: 2}, frozenset(path))))
    return out


def suite_kahle(entry_bound: int = 2) -> SuiteResult:
    """Minimum kernel 1-norm is at least 2^s on each small complex."""
    rows = []
    for name, inst in small_complex_instances():
        s = inst.smallest_nonface()
        best = min_kernel_one_norm(inst, entry_bound)
        # None means no kernel element inside the box, which cannot violate the bound
        ok = best is None or best >= 2 ** s
        rows.append({"instance": name, "s": s, "min_one_norm": best, "lower_bound": 2 ** s, "ok": ok})
        if not ok:
            return SuiteResult("kahle", False, {"instances": rows}, rows[-1])
    return SuiteResult("kahle", True, {"entry_bound": entry_bound, "instances": rows})
