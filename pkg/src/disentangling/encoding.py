"""
Contingency-table view of tree multisets.

A rooted tree on leaf set X is a point of the table whose axes are the
3-subsets of X, each axis having the three rooted triples on that subset as
its levels.  A multiset of trees is then a nonnegative integer table with
total r.  The full table has 3^C(n,3) cells, so everything here is sparse:
a table is a dict from tuples of TripletChoice (one per axis) to nonzero
integers.

Also contains the triple complex Gamma_r and an exhaustive search for the
smallest 1-norm of a nonzero integer table whose facet marginals all vanish.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .disentangle import TreeMultiset, g_bound
from .tree_core import (
    LabelTable,
    LeafSetError,
    RootedTopology,
    TreeError,
    TripletChoice,
    rooted_triple,
)

Triple = tuple[int, int, int]


def all_triples(leaves: Iterable[int]) -> list[Triple]:
    return list(itertools.combinations(sorted(leaves), 3))


@dataclass(frozen=True)
class SparseTableVector:
    """Integer table over the triple axes ``axes``; zero cells are not stored."""

    leaves: tuple[int, ...]
    axes: tuple[Triple, ...]
    entries: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", {k: v for k, v in self.entries.items() if v != 0})

    @property
    def n(self) -> int:
        return len(self.leaves)

    def one_norm(self) -> int:
        return sum(abs(v) for v in self.entries.values())

    def total(self) -> int:
        return sum(self.entries.values())

    def _combine(self, other: "SparseTableVector", sign: int) -> "SparseTableVector":
        if self.axes != other.axes or self.leaves != other.leaves:
            raise ValueError("tables live on different axes")
        out = dict(self.entries)
        for key, v in other.entries.items():
            out[key] = out.get(key, 0) + sign * v
        return SparseTableVector(self.leaves, self.axes, out)

    def __add__(self, other: "SparseTableVector") -> "SparseTableVector":
        return self._combine(other, 1)

    def __sub__(self, other: "SparseTableVector") -> "SparseTableVector":
        return self._combine(other, -1)

    def __mul__(self, a: int) -> "SparseTableVector":
        return SparseTableVector(self.leaves, self.axes, {k: a * v for k, v in self.entries.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "SparseTableVector":
        return self * -1


def encode_tree(t: RootedTopology) -> SparseTableVector:
    """Unit table at the cell listing every rooted triple of *t*."""
    if not isinstance(t, RootedTopology):
        raise TreeError("only rooted trees have a triple encoding")
    if t.n < 3:
        raise LeafSetError("encoding needs at least 3 leaves")
    axes = tuple(all_triples(t.leaves))
    key = tuple(rooted_triple(t, s) for s in axes)
    return SparseTableVector(tuple(t.leaves), axes, {key: 1})


def encode_multiset(s: TreeMultiset) -> SparseTableVector:
    """Sum of the unit tables of the members; the total equals r."""
    if not s.rooted:
        raise TreeError("only rooted multisets have a triple encoding")
    out = None
    for t in s:
        e = encode_tree(t)
        out = e if out is None else out + e
    return out


def build_from_triples(leaves: Sequence[int], triples: Iterable[TripletChoice]) -> RootedTopology | None:
    """Aho-style BUILD restricted to binary trees.

    Returns the binary tree displaying all *triples*, or None when the
    triples are inconsistent or do not force a binary split at some node.
    """
    triples = list(triples)

    def build(ls: list[int], ts: list[TripletChoice]):
        if len(ls) == 1:
            return ls[0]
        if len(ls) == 2:
            return (ls[0], ls[1])
        parent = {x: x for x in ls}

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for t in ts:
            a, b = find(t.cherry[0]), find(t.cherry[1])
            if a != b:
                parent[a] = b
        groups: dict[int, list[int]] = defaultdict(list)
        for x in ls:
            groups[find(x)].append(x)
        if len(groups) != 2:
            return None
        parts = []
        for g in groups.values():
            gs = set(g)
            sub = build(g, [t for t in ts if t.apex in gs and t.cherry[0] in gs and t.cherry[1] in gs])
            if sub is None:
                return None
            parts.append(sub)
        return tuple(parts)

    shape = build(sorted(leaves), triples)
    if shape is None:
        return None
    tree = RootedTopology(shape)
    if any(rooted_triple(tree, (t.apex,) + t.cherry) != t for t in triples):
        return None
    return tree


def decode_multiset(u: SparseTableVector, labels: LabelTable | None = None) -> TreeMultiset:
    """Inverse of encode_multiset; every cell must be a positive tree-realizable key."""
    trees = []
    for key, count in sorted(u.entries.items()):
        if count < 0:
            raise ValueError("negative entry cannot come from a multiset")
        t = build_from_triples(u.leaves, key)
        if t is None:
            raise ValueError(f"cell {key} is not realized by a binary tree")
        trees.extend([RootedTopology(t.shape, labels)] * count)
    if not trees:
        raise ValueError("empty table")
    return TreeMultiset(tuple(trees), labels)


def _validate_axes(leaves: Sequence[int], subsets: Iterable[Iterable[int]]) -> tuple[Triple, ...]:
    leafset = set(leaves)
    out = []
    for s in subsets:
        t = tuple(sorted(set(s)))
        if len(t) != 3 or not set(t) <= leafset:
            raise ValueError(f"{s!r} is not a 3-subset of the leaves")
        out.append(t)
    if len(set(out)) != len(out):
        raise ValueError("repeated 3-subset in marginal")
    return tuple(sorted(out))


def marginal(u: SparseTableVector, subsets: Iterable[Iterable[int]]) -> SparseTableVector:
    """Sum *u* over every axis not in *subsets*; axes of the result are sorted."""
    axes = _validate_axes(u.leaves, subsets)
    index = {a: i for i, a in enumerate(u.axes)}
    try:
        pos = [index[a] for a in axes]
    except KeyError as exc:
        raise ValueError(f"axis {exc.args[0]} not present in the table") from None
    out: dict = defaultdict(int)
    for key, v in u.entries.items():
        out[tuple(key[i] for i in pos)] += v
    return SparseTableVector(u.leaves, axes, out)


@dataclass(frozen=True)
class TripleComplex:
    """Sets of 3-subsets of ``leaves`` whose union has at most ``budget`` leaves."""

    leaves: tuple[int, ...]
    budget: int

    def contains(self, face: Iterable[Iterable[int]]) -> bool:
        union: set[int] = set()
        leafset = set(self.leaves)
        for s in face:
            s = set(s)
            if len(s) != 3 or not s <= leafset:
                return False
            union |= s
        return len(union) <= self.budget

    __contains__ = contains

    def facet_supports(self) -> Iterator[tuple[int, ...]]:
        """Leaf sets U whose triples form the facets (|U| = min(budget, n))."""
        size = min(self.budget, len(self.leaves))
        if size < 3:
            return iter(())
        return itertools.combinations(self.leaves, size)

    def facets(self) -> Iterator[list[Triple]]:
        for u in self.facet_supports():
            yield all_triples(u)


def gamma_r(n: int, r: int, leaves: Sequence[int] | None = None) -> TripleComplex:
    """Complex with budget g(r) on leaves 1..n (or *leaves*)."""
    if n < 3 or r < 1:
        raise ValueError("need n >= 3 and r >= 1")
    leaves = tuple(range(1, n + 1)) if leaves is None else tuple(sorted(leaves))
    if len(leaves) != n:
        raise ValueError("leaf list does not have n elements")
    return TripleComplex(leaves, g_bound(r))


def marginals_equal(u1: SparseTableVector, u2: SparseTableVector, gamma: TripleComplex) -> bool:
    """Compare the marginals of two tables on every facet of *gamma*.

    Faces below a facet have marginals that are sums of the facet's, so
    facets are enough.
    """
    if u1.leaves != u2.leaves:
        raise ValueError("tables are over different leaf sets")
    if u1 == u2:
        return True
    for facet in gamma.facets():
        if marginal(u1, facet) != marginal(u2, facet):
            return False
    return True


def smallest_nonface_size(gamma: TripleComplex) -> int:
    """Fewest 3-subsets whose union exceeds the budget.

    Searched over configurations up to relabeling: the union size only
    depends on how many fresh leaves each successive triple brings.  The
    result is cross-checked against floor(budget / 3) + 1, which is
    floor(log2 r) + 2 for a g(r) budget.  Raises when n <= budget, since
    then every set of triples is a face.
    """
    n, g = len(gamma.leaves), gamma.budget
    if n <= g:
        raise ValueError(f"every set of triples is a face when n={n} <= budget={g}")

    def reachable(m: int, covered: int) -> bool:
        # can m more triples push the union past the budget?
        if covered > g:
            return True
        if m == 0:
            return False
        for fresh in (3, 2, 1, 0):
            if 3 - fresh <= covered and covered + fresh <= n and reachable(m - 1, covered + fresh):
                return True
        return False

    m = 1
    while not reachable(m, 0):
        m += 1
    closed = g // 3 + 1
    if m != closed:
        raise AssertionError(f"search gave {m}, closed form gives {closed}")
    return m


# ---------------------------------------------------------------------------
# small complexes and the integer-kernel search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmallComplexInstance:
    """An explicit simplicial complex on ``ground`` with level counts ``dims``."""

    ground: tuple
    dims: dict
    faces: frozenset

    def __post_init__(self) -> None:
        faces = frozenset(frozenset(f) for f in self.faces)
        object.__setattr__(self, "faces", faces)
        ground = set(self.ground)
        for f in faces:
            if not f <= ground:
                raise ValueError(f"face {set(f)} not inside the ground set")
            for size in range(len(f)):
                for sub in itertools.combinations(f, size):
                    if frozenset(sub) not in faces:
                        raise ValueError(f"not downward closed: {set(sub)} missing below {set(f)}")
        if set(self.dims) != ground or any(d < 2 for d in self.dims.values()):
            raise ValueError("every ground element needs a dimension >= 2")

    @classmethod
    def up_to(cls, ground: Sequence, dims: Sequence[int], max_face: int) -> "SmallComplexInstance":
        """All subsets of size <= max_face."""
        faces = [frozenset(c) for size in range(max_face + 1) for c in itertools.combinations(ground, size)]
        return cls(tuple(ground), dict(zip(ground, dims)), frozenset(faces))

    @property
    def facets(self) -> list[frozenset]:
        return sorted(
            (f for f in self.faces if not any(f < g for g in self.faces)),
            key=lambda f: (len(f), sorted(f)),
        )

    def smallest_nonface(self) -> int:
        for size in range(len(self.ground) + 1):
            for c in itertools.combinations(self.ground, size):
                if frozenset(c) not in self.faces:
                    return size
        raise ValueError("complex is the full simplex; no non-face")


def min_kernel_one_norm(inst: SmallComplexInstance, entry_bound: int) -> int | None:
    """Least 1-norm of a nonzero integer table, entries in [-b, b], with zero facet marginals.

    Exact branch and bound over cells in lexicographic order.  A cell that
    is the last open cell of some marginal line has its value forced; open
    lines are pruned when their remaining cells cannot cancel the partial
    sum.  Returns None when no such table exists inside the box.
    """
    if entry_bound < 1:
        raise ValueError("entry_bound must be at least 1")
    n_cells = math.prod(inst.dims.values())
    if n_cells > 10**6 / (2 * entry_bound + 1):
        raise ValueError(f"search space too large ({n_cells} cells)")
    ground = list(inst.ground)
    cells = list(itertools.product(*(range(inst.dims[k]) for k in ground)))

    # every facet F contributes one line per assignment of levels on F
    line_of: list[list[int]] = [[] for _ in cells]
    line_cells: list[list[int]] = []
    for facet in inst.facets:
        pos = [ground.index(k) for k in sorted(facet, key=ground.index)]
        ids: dict = {}
        for ci, cell in enumerate(cells):
            key = tuple(cell[p] for p in pos)
            if key not in ids:
                ids[key] = len(line_cells)
                line_cells.append([])
            line_of[ci].append(ids[key])
            line_cells[ids[key]].append(ci)
    last_cell = [cs[-1] for cs in line_cells]
    closes = [[ln for ln in line_of[ci] if last_cell[ln] == ci] for ci in range(len(cells))]
    open_after = [[0] * len(line_cells) for _ in cells]
    for ln, cs in enumerate(line_cells):
        for ci in range(len(cells)):
            open_after[ci][ln] = sum(1 for c in cs if c > ci)

    b = entry_bound
    partial = [0] * len(line_cells)
    best = math.inf
    values_order = sorted(range(-b, b + 1), key=lambda v: (abs(v), v))

    def dfs(ci: int, norm: int, nonzero: bool) -> None:
        nonlocal best
        if norm >= best:
            return
        if ci == len(cells):
            if nonzero:
                best = norm
            return
        if closes[ci]:
            forced = -partial[closes[ci][0]]
            if any(-partial[ln] != forced for ln in closes[ci]) or abs(forced) > b:
                return
            candidates = [forced]
        else:
            candidates = values_order
        for v in candidates:
            ok = True
            for ln in line_of[ci]:
                partial[ln] += v
            for ln in line_of[ci]:
                if abs(partial[ln]) > b * open_after[ci][ln]:
                    ok = False
                    break
            if ok:
                # each open line with nonzero partial sum still needs that much norm
                need = max((abs(partial[ln]) for ln in line_of[ci]), default=0)
                if norm + abs(v) + need < best:
                    dfs(ci + 1, norm + abs(v), nonzero or v != 0)
            for ln in line_of[ci]:
                partial[ln] -= v

    dfs(0, 0, False)
    return None if best == math.inf else int(best)
