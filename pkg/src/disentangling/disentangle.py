"""Tree multisets and exact minimal disentangling-set search."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Iterable, Sequence

from .tree_core import (
    LabelTable,
    LeafSetError,
    RootedTopology,
    Topology,
    TreeError,
    emit_newick,
    enumerate_rooted,
    enumerate_unrooted,
    leaves_of,
    mask_of,
    parse_newick,
    restrict,
    root_at_leaf,
)


def g_bound(r: int) -> int:
    """3 * (floor(log2 r) + 1)."""
    if r < 1:
        raise ValueError("r must be positive")
    return 3 * r.bit_length()


@dataclass(frozen=True)
class TreeMultiset:
    """An unordered list of topologies on one shared leaf set.

    Members are kept sorted by canonical key, so equality is plain tuple
    equality.
    """

    members: tuple[Topology, ...]
    labels: LabelTable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise ValueError("a tree multiset needs at least one member")
        kinds = {type(t) for t in members}
        if len(kinds) != 1:
            raise TreeError("cannot mix rooted and unrooted trees")
        masks = {t.leaf_mask for t in members}
        if len(masks) != 1:
            raise LeafSetError("members do not share a leaf set")
        object.__setattr__(self, "members", tuple(sorted(members, key=lambda t: t.key)))
        if self.labels is None:
            object.__setattr__(self, "labels", members[0].labels)

    @property
    def rooted(self) -> bool:
        return isinstance(self.members[0], RootedTopology)

    @property
    def leaf_mask(self) -> int:
        return self.members[0].leaf_mask

    @property
    def leaves(self) -> list[int]:
        return leaves_of(self.leaf_mask)

    @property
    def r(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def signature(self, k_mask: int) -> tuple:
        return tuple(sorted(t.signature(k_mask) for t in self.members))

    def to_lines(self) -> list[str]:
        return [emit_newick(t, self.labels) for t in self.members]


def read_multiset(text: str, mode: str = "rooted", labels: LabelTable | None = None) -> TreeMultiset:
    """Parse the one-Newick-per-line format; blank lines and ``#`` comments are skipped.

    Pass a shared *labels* table when two files must be compared.
    """
    trees = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        trees.append(parse_newick(line, mode, labels))
        if labels is None:
            labels = trees[-1].labels
    if not trees:
        raise LeafSetError("multiset file contains no trees")
    return TreeMultiset(tuple(trees), labels)


def load_multiset(path, mode: str = "rooted", labels: LabelTable | None = None) -> TreeMultiset:
    return read_multiset(Path(path).read_text(), mode, labels)


def format_multiset(s: TreeMultiset) -> str:
    return "\n".join(s.to_lines()) + "\n"


def _check_pair(s1: TreeMultiset, s2: TreeMultiset) -> None:
    if s1.rooted != s2.rooted:
        raise TreeError("cannot compare rooted with unrooted multisets")
    if s1.leaf_mask != s2.leaf_mask:
        raise LeafSetError("multisets have different leaf sets")
    if s1.r != s2.r:
        raise LeafSetError(f"multisets have different sizes ({s1.r} vs {s2.r})")


def restrict_multiset(s: TreeMultiset, k: Iterable[int]) -> TreeMultiset:
    k = set(k)
    return TreeMultiset(tuple(restrict(t, k) for t in s.members), s.labels)


def disentangles(k: Iterable[int], s1: TreeMultiset, s2: TreeMultiset) -> bool:
    """True iff the restrictions of *s1* and *s2* to *k* differ."""
    _check_pair(s1, s2)
    k_mask = mask_of(k)
    if k_mask & ~s1.leaf_mask:
        raise LeafSetError(f"leaves {leaves_of(k_mask & ~s1.leaf_mask)} not in trees")
    return s1.signature(k_mask) != s2.signature(k_mask)


@dataclass(frozen=True)
class DisentangleResult:
    cardinality: int
    witness: tuple[int, ...]


def lower_cutoff(rooted: bool) -> int:
    """Smallest subset size whose restriction can tell two trees apart."""
    return 3 if rooted else 4


def _first_hit(s1: TreeMultiset, s2: TreeMultiset, subsets: Sequence[tuple[int, ...]]):
    for k in subsets:
        m = mask_of(k)
        if s1.signature(m) != s2.signature(m):
            return k
    return None


def _chunks(seq: list, parts: int) -> list[list]:
    size = -(-len(seq) // parts)
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def min_disentangling(s1: TreeMultiset, s2: TreeMultiset, threads: int = 1) -> DisentangleResult:
    """Smallest K with s1|K != s2|K; the witness is lexicographically least.

    Subsets are scanned by increasing size, lexicographically within a size.
    With ``threads > 1`` each size is split into contiguous blocks whose
    first hits are merged by taking the minimum, so the answer does not
    depend on the thread count.
    """
    _check_pair(s1, s2)
    if s1 == s2:
        raise ValueError("multisets are equal; no disentangling set exists")
    leaves = s1.leaves
    start = min(lower_cutoff(s1.rooted), len(leaves))
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for size in range(start, len(leaves) + 1):
            if pool is None:
                hit = _first_hit(s1, s2, itertools.combinations(leaves, size))
            else:
                blocks = _chunks(list(itertools.combinations(leaves, size)), threads)
                hits = [h for h in pool.map(lambda b: _first_hit(s1, s2, b), blocks) if h is not None]
                hit = min(hits) if hits else None
            if hit is not None:
                return DisentangleResult(size, hit)
    finally:
        if pool is not None:
            pool.shutdown()
    # unreachable for s1 != s2: the full leaf set always disentangles
    raise AssertionError("full leaf set failed to disentangle distinct multisets")


@dataclass
class UpperBoundReport:
    r: int
    rooted: bool
    cardinality: int
    witness: tuple[int, ...]
    bound: int
    margin: int
    holds: bool
    counterexample: dict | None = None


def check_upper_bound(s1: TreeMultiset, s2: TreeMultiset, threads: int = 1) -> UpperBoundReport:
    """Compare the exact disentangling size with g(r) (rooted) or g(r) + 1 (unrooted).

    A violation is not raised; it comes back with the offending pair
    serialized in ``counterexample``.
    """
    res = min_disentangling(s1, s2, threads)
    bound = g_bound(s1.r) + (0 if s1.rooted else 1)
    holds = res.cardinality <= bound
    cex = None
    if not holds:
        cex = {"s1": s1.to_lines(), "s2": s2.to_lines(), "rooted": s1.rooted}
    return UpperBoundReport(
        r=s1.r,
        rooted=s1.rooted,
        cardinality=res.cardinality,
        witness=res.witness,
        bound=bound,
        margin=bound - res.cardinality,
        holds=holds,
        counterexample=cex,
    )


@dataclass
class RootingReport:
    leaf0: int
    holds: bool
    checked: int
    rooted_images_equal: bool
    violations: list[tuple[int, ...]]


def rooting_reduction_check(s1: TreeMultiset, s2: TreeMultiset, leaf0: int) -> RootingReport:
    """Check that any K disentangling the pair rooted at *leaf0* lifts to {leaf0} + K.

    Every K over the remaining leaves with at least 2 elements is tried.
    """
    _check_pair(s1, s2)
    if s1.rooted:
        raise TreeError("rooting_reduction_check expects unrooted multisets")
    if not s1.leaf_mask >> leaf0 & 1:
        raise LeafSetError(f"leaf {leaf0} not in trees")
    if s1 == s2:
        return RootingReport(leaf0, True, 0, True, [])
    rs1 = TreeMultiset(tuple(root_at_leaf(t, leaf0) for t in s1), s1.labels)
    rs2 = TreeMultiset(tuple(root_at_leaf(t, leaf0) for t in s2), s2.labels)
    others = rs1.leaves
    bit0 = 1 << leaf0
    checked = 0
    violations = []
    for size in range(2, len(others) + 1):
        for k in itertools.combinations(others, size):
            m = mask_of(k)
            if rs1.signature(m) != rs2.signature(m):
                checked += 1
                if s1.signature(m | bit0) == s2.signature(m | bit0):
                    violations.append(k)
    return RootingReport(leaf0, not violations, checked, rs1 == rs2, violations)


def _double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


EXACT_PAIR_LIMIT = 10**7


def _all_multisets(n: int, r: int, rooted: bool) -> list[TreeMultiset]:
    trees = list(enumerate_rooted(n) if rooted else enumerate_unrooted(n))
    return [TreeMultiset(c) for c in itertools.combinations_with_replacement(trees, r)]


def exact_disentangling_number(n: int, r: int, rooted: bool = True) -> int:
    """Max of min_disentangling over all pairs of distinct r-multisets on 1..n.

    Works level by level: the answer is the least c such that the vectors
    of restrictions to all c-subsets are pairwise distinct across multisets
    (restrictions to smaller sets are determined by these).
    """
    n_trees = _double_factorial(2 * n - 3) if rooted else _double_factorial(2 * n - 5)
    if n < (2 if rooted else 3) or comb(n_trees + r - 1, r) ** 2 > EXACT_PAIR_LIMIT:
        raise ValueError(f"exact search infeasible for n={n}, r={r}")
    family = _all_multisets(n, r, rooted)
    if len(family) < 2:
        raise ValueError("fewer than two distinct multisets; nothing to disentangle")
    leaves = list(range(1, n + 1))
    for size in range(min(lower_cutoff(rooted), n), n + 1):
        masks = [mask_of(k) for k in itertools.combinations(leaves, size)]
        seen = set()
        for s in family:
            vec = tuple(s.signature(m) for m in masks)
            if vec in seen:
                break
            seen.add(vec)
        else:
            return size
    raise AssertionError("distinct multisets agree on the full leaf set")


def exact_rd(n: int, r: int) -> int:
    """RD restricted to leaf set 1..n."""
    return exact_disentangling_number(n, r, rooted=True)


def exact_d(n: int, r: int) -> int:
    """D restricted to leaf set 1..n."""
    return exact_disentangling_number(n, r, rooted=False)
