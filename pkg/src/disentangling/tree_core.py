"""
Leaf-labeled tree topologies.

Rooted binary trees are stored as nested 2-tuples of integer leaf ids in a
canonical order (at every internal node the child holding the smaller
minimum leaf comes first).  Unrooted trivalent trees are stored as a
*handle* leaf (the smallest id) plus the rooted tree obtained by cutting the
handle's pendant edge.

Internally both kinds are also viewed as sets of bitmask clusters / splits,
which is what restriction and the fast comparison signatures work on.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Union

Shape = Union[int, tuple]


class TreeError(ValueError):
    """Base class for malformed trees and bad leaf sets."""


class NewickError(TreeError):
    """Newick text could not be turned into a topology."""

    def __init__(self, message: str, position: int | None = None) -> None:
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class LeafSetError(TreeError):
    """Leaf labels that are missing, repeated or too few for the operation."""


# ---------------------------------------------------------------------------
# labels
# ---------------------------------------------------------------------------

_NAME_RE = re.compile(r"[A-Za-z0-9_]+")
_NUMERAL_RE = re.compile(r"[0-9]+")


class LabelTable:
    """Interns external leaf names to dense integer ids in first-seen order."""

    def __init__(self, names: Iterable[str] = ()) -> None:
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        for name in names:
            self.intern(name)

    def intern(self, name: str) -> int:
        if name not in self._ids:
            self._ids[name] = len(self._names)
            self._names.append(name)
        return self._ids[name]

    def id_of(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise LeafSetError(f"unknown leaf label {name!r}") from None

    def name(self, leaf: int) -> str:
        return self._names[leaf]

    def __len__(self) -> int:
        return len(self._names)

    def __repr__(self) -> str:
        return f"LabelTable({self._names!r})"


def leaf_name(leaf: int, labels: LabelTable | None) -> str:
    return str(leaf) if labels is None else labels.name(leaf)


def resolve_labels(names: Iterable[str], labels: LabelTable | None) -> set[int]:
    """Map external names to ids; decimal numerals are their own ids when *labels* is None."""
    out = set()
    for name in names:
        if labels is None:
            if not _NUMERAL_RE.fullmatch(name):
                raise LeafSetError(f"unknown leaf label {name!r}")
            out.add(int(name))
        else:
            out.add(labels.id_of(name))
    return out


# ---------------------------------------------------------------------------
# bitmask helpers
# ---------------------------------------------------------------------------


def mask_of(leaves: Iterable[int]) -> int:
    m = 0
    for x in leaves:
        m |= 1 << x
    return m


def leaves_of(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _lowest(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def _shape_mask(shape: Shape) -> int:
    if isinstance(shape, int):
        return 1 << shape
    m = 0
    for child in shape:
        m |= _shape_mask(child)
    return m


def _canonical(shape: Shape) -> tuple[Shape, int]:
    """Return (canonical shape, min leaf)."""
    if isinstance(shape, int):
        return shape, shape
    if len(shape) != 2:
        raise TreeError(f"internal node with {len(shape)} children")
    a, ma = _canonical(shape[0])
    b, mb = _canonical(shape[1])
    if ma == mb:
        raise LeafSetError(f"duplicate leaf {ma}")
    return ((a, b), ma) if ma < mb else ((b, a), mb)


def shape_from_clusters(leaf_mask: int, clusters: Iterable[int]) -> Shape:
    """Build the canonical binary shape whose clusters (size >= 2) are *clusters*.

    The full *leaf_mask* is added as the root cluster.  Raises TreeError if the
    family is not the cluster system of a binary tree.
    """
    cl = {c for c in clusters if c.bit_count() >= 2}
    cl.add(leaf_mask)
    by_size = sorted(cl, key=lambda c: -c.bit_count())

    def build(mask: int) -> Shape:
        if mask.bit_count() == 1:
            return _lowest(mask)
        child = 0
        for c in by_size:
            if c != mask and c & mask == c:
                child = c
                break
        if child == 0:
            if mask.bit_count() != 2:
                raise TreeError("cluster system is not binary")
            child = mask & -mask
        other = mask ^ child
        if other.bit_count() >= 2 and other not in cl:
            raise TreeError("cluster system is not binary")
        a, b = build(child), build(other)
        return (a, b) if _lowest(child) < _lowest(other) else (b, a)

    if len(cl) != leaf_mask.bit_count() - 1 and leaf_mask.bit_count() > 1:
        raise TreeError("cluster system is not binary")
    return build(leaf_mask)


# ---------------------------------------------------------------------------
# topologies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RootedTopology:
    """A rooted binary leaf-labeled tree in canonical form.

    Two topologies are equal iff their canonical shapes are identical.  The
    optional label table only affects Newick output.
    """

    shape: Shape
    labels: LabelTable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        canon, _ = _canonical(self.shape)
        object.__setattr__(self, "shape", canon)

    @classmethod
    def from_clusters(cls, leaf_mask: int, clusters: Iterable[int], labels=None) -> "RootedTopology":
        return cls(shape_from_clusters(leaf_mask, clusters), labels)

    @cached_property
    def leaf_mask(self) -> int:
        return _shape_mask(self.shape)

    @property
    def leaves(self) -> list[int]:
        return leaves_of(self.leaf_mask)

    @property
    def n(self) -> int:
        return self.leaf_mask.bit_count()

    @cached_property
    def clusters(self) -> tuple[int, ...]:
        """Leaf masks of all internal nodes, root included, sorted."""
        out: list[int] = []

        def walk(s: Shape) -> int:
            if isinstance(s, int):
                return 1 << s
            m = walk(s[0]) | walk(s[1])
            out.append(m)
            return m

        walk(self.shape)
        return tuple(sorted(out))

    @cached_property
    def key(self) -> tuple[int, ...]:
        """Preorder encoding (-1 marks an internal node); used for sorting."""
        out: list[int] = []

        def walk(s: Shape) -> None:
            if isinstance(s, int):
                out.append(s)
            else:
                out.append(-1)
                walk(s[0])
                walk(s[1])

        walk(self.shape)
        return tuple(out)

    def signature(self, k_mask: int) -> tuple[int, ...]:
        """Comparable fingerprint of the restriction to *k_mask*.

        Equal for two trees iff their restrictions to the same leaf subset
        coincide.  Does no validation.
        """
        return tuple(sorted({c & k_mask for c in self.clusters if (c & k_mask).bit_count() >= 2}))

    def __str__(self) -> str:
        return emit_newick(self)


@dataclass(frozen=True)
class UnrootedTopology:
    """A trivalent unrooted tree, stored as its smallest leaf plus a rooted remainder.

    ``rooted`` is the binary tree on all other leaves obtained by removing
    ``handle`` and rooting at its former neighbour.
    """

    handle: int
    rooted: RootedTopology
    labels: LabelTable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.rooted.n < 2:
            raise LeafSetError("unrooted trees need at least 3 leaves")
        if self.rooted.leaf_mask >> self.handle & 1:
            raise LeafSetError(f"handle {self.handle} repeated in tree")
        if self.handle > min(self.rooted.leaves):
            # rebuild around the smallest leaf
            other = from_splits(self.leaf_mask, self._raw_splits())
            object.__setattr__(self, "handle", other.handle)
            object.__setattr__(self, "rooted", other.rooted)

    def _raw_splits(self) -> list[int]:
        rest = self.rooted.leaf_mask
        return [c for c in self.rooted.clusters if c != rest]

    @property
    def leaf_mask(self) -> int:
        return self.rooted.leaf_mask | (1 << self.handle)

    @property
    def leaves(self) -> list[int]:
        return leaves_of(self.leaf_mask)

    @property
    def n(self) -> int:
        return self.rooted.n + 1

    @cached_property
    def splits(self) -> tuple[int, ...]:
        """Nontrivial splits, each given by its side not containing the handle."""
        return tuple(self._raw_splits())

    @cached_property
    def key(self) -> tuple[int, ...]:
        return (self.handle,) + self.rooted.key

    def signature(self, k_mask: int) -> tuple[int, ...]:
        """Like RootedTopology.signature, for unrooted restriction (|K| >= 3)."""
        low = k_mask & -k_mask
        out = set()
        for s in self.splits:
            x = s & k_mask
            y = k_mask ^ x
            if x.bit_count() >= 2 and y.bit_count() >= 2:
                out.add(y if x & low else x)
        return tuple(sorted(out))

    def __str__(self) -> str:
        return emit_newick(self)


Topology = Union[RootedTopology, UnrootedTopology]


def from_splits(leaf_mask: int, splits: Iterable[int], labels: LabelTable | None = None) -> UnrootedTopology:
    """Unrooted topology on *leaf_mask* from split sides (either side may be given)."""
    h = _lowest(leaf_mask)
    hbit = 1 << h
    rest = leaf_mask ^ hbit
    clusters = []
    for s in splits:
        side = s & leaf_mask
        if side & hbit:
            side = leaf_mask ^ side
        if side.bit_count() >= 2 and side != rest:
            clusters.append(side)
    return UnrootedTopology(h, RootedTopology.from_clusters(rest, clusters, labels), labels)


class TripletChoice(NamedTuple):
    """Rooted triple apex|cherry."""

    apex: int
    cherry: tuple[int, int]

    def __str__(self) -> str:
        return f"{self.apex}|{self.cherry[0]}{self.cherry[1]}"


class QuartetChoice(NamedTuple):
    """Quartet split ab|cd; the pair holding the smallest leaf comes first."""

    split: tuple[tuple[int, int], tuple[int, int]]

    def __str__(self) -> str:
        (a, b), (c, d) = self.split
        return f"{a}{b}|{c}{d}"


# ---------------------------------------------------------------------------
# Newick
# ---------------------------------------------------------------------------


def _parse_raw(text: str) -> Union[str, list]:
    """Parse into nested lists of names; leaves are strings."""
    pos = 0
    n = len(text)

    def skip() -> None:
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def node():
        nonlocal pos
        skip()
        if pos >= n:
            raise NewickError("unexpected end of input", pos)
        if text[pos] == "(":
            pos += 1
            children = [node()]
            skip()
            while pos < n and text[pos] == ",":
                pos += 1
                children.append(node())
                skip()
            if pos >= n or text[pos] != ")":
                raise NewickError("expected ',' or ')'", pos)
            pos += 1
            return children
        m = _NAME_RE.match(text, pos)
        if not m:
            raise NewickError(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        return m.group()

    tree = node()
    skip()
    if pos >= n or text[pos] != ";":
        raise NewickError("expected ';'", pos)
    pos += 1
    skip()
    if pos != n:
        raise NewickError("trailing text after ';'", pos)
    return tree


def _raw_names(raw) -> list[str]:
    if isinstance(raw, str):
        return [raw]
    return [x for c in raw for x in _raw_names(c)]


def _check_arity(raw, top_arity: int) -> None:
    def walk(node, arity: int) -> None:
        if isinstance(node, str):
            return
        if len(node) != arity:
            raise NewickError(f"internal node has {len(node)} children, expected {arity}")
        for c in node:
            walk(c, 2)

    walk(raw, top_arity)


def parse_newick(text: str, mode: str = "rooted", labels: LabelTable | None = None) -> Topology:
    """Parse a Newick string into a canonical topology.

    Parameters
    ----------
    text : str
        Newick without branch lengths, terminated by ``;``.
    mode : {"rooted", "unrooted"}
        Rooted trees must be strictly binary.  Unrooted trees must have a
        trifurcating top node and binary nodes below it.
    labels : LabelTable, optional
        Table to intern names into.  When omitted and every name is a decimal
        numeral, the numbers themselves are the leaf ids; otherwise a fresh
        table is created and attached to the result.
    """
    if mode not in ("rooted", "unrooted"):
        raise ValueError(f"unknown mode {mode!r}")
    raw = _parse_raw(text)
    names = _raw_names(raw)
    seen = set()
    for name in names:
        if name in seen:
            raise NewickError(f"duplicate leaf label {name!r}")
        seen.add(name)
    if labels is None and not all(_NUMERAL_RE.fullmatch(x) for x in names):
        labels = LabelTable()
    if labels is None and len({int(x) for x in names}) != len(names):
        raise NewickError("duplicate numeric leaf label")

    def convert(node) -> Shape:
        if isinstance(node, str):
            return int(node) if labels is None else labels.intern(node)
        return tuple(convert(c) for c in node)

    if mode == "rooted":
        if isinstance(raw, str):
            raise NewickError("rooted tree needs at least 2 leaves")
        _check_arity(raw, 2)
        return RootedTopology(convert(raw), labels)

    if isinstance(raw, str):
        raise NewickError("unrooted tree needs at least 3 leaves")
    _check_arity(raw, 3)
    shape = convert(raw)
    full = _shape_mask(shape)
    splits = [_shape_mask(s) for s in _subtrees(shape) if not isinstance(s, int)]
    return from_splits(full, splits, labels)


def _subtrees(shape: tuple) -> Iterator[Shape]:
    """All proper subtrees below the top node."""
    for child in shape:
        yield child
        if not isinstance(child, int):
            yield from _subtrees(child)


def _emit_shape(s: Shape, labels: LabelTable | None) -> str:
    if isinstance(s, int):
        return leaf_name(s, labels)
    return f"({_emit_shape(s[0], labels)},{_emit_shape(s[1], labels)})"


def emit_newick(t: Topology, labels: LabelTable | None = None) -> str:
    """Canonical Newick text, no whitespace, ``;``-terminated."""
    labels = labels if labels is not None else t.labels
    if isinstance(t, RootedTopology):
        return _emit_shape(t.shape, labels) + ";"
    left, right = t.rooted.shape
    parts = [leaf_name(t.handle, labels), _emit_shape(left, labels), _emit_shape(right, labels)]
    return "(" + ",".join(parts) + ");"


# ---------------------------------------------------------------------------
# restriction
# ---------------------------------------------------------------------------


def _subset_mask(t: Topology, k: Iterable[int]) -> int:
    k_mask = mask_of(k)
    if k_mask & ~t.leaf_mask:
        missing = leaves_of(k_mask & ~t.leaf_mask)
        raise LeafSetError(f"leaves {missing} not in tree")
    return k_mask


def restrict_rooted(t: RootedTopology, k: Iterable[int]) -> RootedTopology:
    """Induced rooted binary tree on the leaf subset *k*."""
    k_mask = _subset_mask(t, k)
    if k_mask == 0:
        raise LeafSetError("cannot restrict to the empty set")
    return RootedTopology.from_clusters(k_mask, t.signature(k_mask), t.labels)


def restrict_unrooted(t: UnrootedTopology, k: Iterable[int]) -> UnrootedTopology:
    """Induced trivalent tree on the leaf subset *k* (at least 3 leaves)."""
    k_mask = _subset_mask(t, k)
    if k_mask.bit_count() < 3:
        raise LeafSetError("unrooted restriction needs at least 3 leaves")
    return from_splits(k_mask, t.signature(k_mask), t.labels)


def restrict(t: Topology, k: Iterable[int]) -> Topology:
    if isinstance(t, RootedTopology):
        return restrict_rooted(t, k)
    return restrict_unrooted(t, k)


def rooted_triple(t: RootedTopology, s: Iterable[int]) -> TripletChoice:
    s = sorted(set(s))
    if len(s) != 3:
        raise LeafSetError("a rooted triple needs exactly 3 leaves")
    sub = restrict_rooted(t, s)
    a, b = sub.shape
    if isinstance(a, int):
        return TripletChoice(a, b)
    return TripletChoice(b, a)


def quartet(t: UnrootedTopology, s: Iterable[int]) -> QuartetChoice:
    s = sorted(set(s))
    if len(s) != 4:
        raise LeafSetError("a quartet needs exactly 4 leaves")
    sub = restrict_unrooted(t, s)
    # handle is s[0]; its partner is the single leaf beside the cherry
    a, b = sub.rooted.shape
    cherry, single = (a, b) if isinstance(b, int) else (b, a)
    return QuartetChoice(((s[0], single), cherry))


def root_at_leaf(t: UnrootedTopology, leaf0: int) -> RootedTopology:
    """Delete *leaf0* and root the remainder at its former neighbour."""
    if not t.leaf_mask >> leaf0 & 1:
        raise LeafSetError(f"leaf {leaf0} not in tree")
    if t.n < 3:
        raise LeafSetError("tree too small to root at a leaf")
    if leaf0 == t.handle:
        return t.rooted
    full = t.leaf_mask
    xbit = 1 << leaf0
    clusters = [s if not s & xbit else full ^ s for s in t.splits]
    return RootedTopology.from_clusters(full ^ xbit, clusters, t.labels)


def unroot(t: RootedTopology, leaf0: int) -> UnrootedTopology:
    """Attach a new leaf *leaf0* above the root, giving an unrooted tree."""
    if t.leaf_mask >> leaf0 & 1:
        raise LeafSetError(f"leaf {leaf0} already in tree")
    if t.n < 2:
        raise LeafSetError("need at least 2 leaves to unroot")
    full = t.leaf_mask | (1 << leaf0)
    return from_splits(full, [c for c in t.clusters if c != t.leaf_mask], t.labels)


# ---------------------------------------------------------------------------
# enumeration and sampling
# ---------------------------------------------------------------------------


def _insert_everywhere(shape: Shape, leaf: int) -> Iterator[Shape]:
    yield (shape, leaf)
    if not isinstance(shape, int):
        a, b = shape
        for a2 in _insert_everywhere(a, leaf):
            yield (a2, b)
        for b2 in _insert_everywhere(b, leaf):
            yield (a, b2)


def _enumerate_shapes(leaves: list[int]) -> Iterator[Shape]:
    if len(leaves) == 1:
        yield leaves[0]
        return
    for s in _enumerate_shapes(leaves[:-1]):
        yield from _insert_everywhere(s, leaves[-1])


def enumerate_rooted(n: int) -> Iterator[RootedTopology]:
    """All (2n-3)!! rooted binary trees on leaves 1..n, by leaf insertion."""
    if not 2 <= n <= 8:
        raise ValueError("enumerate_rooted supports 2 <= n <= 8")
    seen = set()
    for s in _enumerate_shapes(list(range(1, n + 1))):
        t = RootedTopology(s)
        if t not in seen:
            seen.add(t)
            yield t


def enumerate_unrooted(n: int) -> Iterator[UnrootedTopology]:
    """All (2n-5)!! trivalent trees on leaves 1..n.

    Leaf 1 is held as the handle; the rest are enumerated as rooted trees
    on 2..n, which is leaf insertion into the unrooted tree.
    """
    if not 3 <= n <= 9:
        raise ValueError("enumerate_unrooted supports 3 <= n <= 9")
    for s in _enumerate_shapes(list(range(2, n + 1))):
        yield UnrootedTopology(1, RootedTopology(s))


def random_rooted(n: int, seed: int) -> RootedTopology:
    """Uniform rooted binary tree on 1..n by sequential random leaf insertion."""
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = random.Random(seed)
    # node arrays; node 0.. are leaves-or-internal, parent -1 for root
    left: list[int] = []
    right: list[int] = []
    label: list[int] = []
    parent: list[int] = []

    def new(lab: int, l: int = -1, r: int = -1) -> int:
        label.append(lab)
        left.append(l)
        right.append(r)
        parent.append(-1)
        return len(label) - 1

    a, b = new(1), new(2)
    root = new(-1, a, b)
    parent[a] = parent[b] = root
    for leaf in range(3, n + 1):
        # each existing node stands for the edge above it (root: virtual edge)
        target = rng.randrange(len(label))
        x = new(leaf)
        p = parent[target]
        mid = new(-1, target, x)
        parent[target] = parent[x] = mid
        parent[mid] = p
        if p == -1:
            root = mid
        elif left[p] == target:
            left[p] = mid
        else:
            right[p] = mid

    def shape(i: int) -> Shape:
        if label[i] >= 0:
            return label[i]
        return (shape(left[i]), shape(right[i]))

    return RootedTopology(shape(root))


def random_unrooted(n: int, seed: int) -> UnrootedTopology:
    """Uniform trivalent tree on 1..n (random rooted tree on 2..n plus leaf 1)."""
    if n < 3:
        raise ValueError("n must be at least 3")
    t = random_rooted(n - 1, seed)
    return UnrootedTopology(1, RootedTopology(_shift(t.shape, 1)))


def _shift(s: Shape, d: int) -> Shape:
    if isinstance(s, int):
        return s + d
    return (_shift(s[0], d), _shift(s[1], d))


def relabel(t: Topology, mapping: dict[int, int]) -> Topology:
    """Apply a leaf-id permutation."""
    if isinstance(t, RootedTopology):
        return RootedTopology(_relabel_shape(t.shape, mapping), t.labels)
    full = mask_of(mapping[x] for x in t.leaves)
    splits = [mask_of(mapping[x] for x in leaves_of(s)) for s in t.splits]
    return from_splits(full, splits, t.labels)


def _relabel_shape(s: Shape, mapping: dict[int, int]) -> Shape:
    if isinstance(s, int):
        return mapping[s]
    return (_relabel_shape(s[0], mapping), _relabel_shape(s[1], mapping))


def caterpillar(leaves: Iterable[int]) -> RootedTopology:
    """((…((l1,l2),l3)…),lk); a single leaf for k = 1."""
    it = iter(leaves)
    s: Shape = next(it)
    for x in it:
        s = (s, x)
    return RootedTopology(s)
