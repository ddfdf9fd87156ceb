"""Parity-split gadget families that attain the lower bound.

Each leaf i of a base tree on 1..k is replaced by a three-leaf rooted
gadget on (a_i, b_i, c_i): bit 0 gives a_i|b_i c_i, bit 1 gives
b_i|a_i c_i.  Splitting all 2^k bit vectors by parity yields two families
that agree on every leaf subset of size 3k - 1 but differ on all 3k leaves.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from .disentangle import TreeMultiset, disentangles
from .tree_core import LabelTable, LeafSetError, RootedTopology, Shape, caterpillar


def gadget_ids(i: int) -> tuple[int, int, int]:
    """Leaf ids (a_i, b_i, c_i) for gadget i (1-based)."""
    base = 3 * (i - 1)
    return base, base + 1, base + 2


def gadget_labels(k: int) -> LabelTable:
    return LabelTable(f"{x}{i}" for i in range(1, k + 1) for x in "abc")


def gadget(i: int, bit: int) -> Shape:
    a, b, c = gadget_ids(i)
    if bit == 0:
        return (a, (b, c))
    if bit == 1:
        return (b, (a, c))
    raise ValueError(f"gadget bit must be 0 or 1, got {bit}")


def default_base(k: int) -> RootedTopology:
    """Caterpillar on 1..k."""
    return caterpillar(range(1, k + 1))


def _substitute(shape: Shape, eps: Sequence[int]) -> Shape:
    if isinstance(shape, int):
        return gadget(shape, eps[shape - 1])
    return (_substitute(shape[0], eps), _substitute(shape[1], eps))


def build_tree_epsilon(base: RootedTopology, eps: Sequence[int]) -> RootedTopology:
    """Hang gadget t^i_{eps_i} from leaf i of *base*."""
    k = base.n
    if base.leaves != list(range(1, k + 1)):
        raise LeafSetError(f"base tree must have leaves 1..{k}")
    if len(eps) != k:
        raise ValueError(f"expected {k} bits, got {len(eps)}")
    return RootedTopology(_substitute(base.shape, eps), gadget_labels(k))


@dataclass(frozen=True)
class FamilyPair:
    k: int
    base: RootedTopology
    odd: TreeMultiset
    even: TreeMultiset


def build_family_pair(k: int, base: RootedTopology | None = None) -> FamilyPair:
    """All T_eps split by the parity of sum(eps); each side has 2^(k-1) trees."""
    if k < 1:
        raise ValueError("k must be at least 1")
    base = default_base(k) if base is None else base
    odd, even = [], []
    for eps in itertools.product((0, 1), repeat=k):
        (odd if sum(eps) % 2 else even).append(build_tree_epsilon(base, eps))
    labels = gadget_labels(k)
    return FamilyPair(k, base, TreeMultiset(tuple(odd), labels), TreeMultiset(tuple(even), labels))


def pad_family_pair(
    pair: FamilyPair, r: int, filler: RootedTopology | None = None
) -> tuple[TreeMultiset, TreeMultiset]:
    """Add r - 2^(k-1) copies of *filler* to both families (2^(k-1) <= r < 2^k)."""
    lo = 1 << (pair.k - 1)
    if not lo <= r < 2 * lo:
        raise ValueError(f"r={r} outside [{lo}, {2 * lo}) for k={pair.k}")
    if filler is None:
        filler = build_tree_epsilon(pair.base, [0] * pair.k)
    if filler.leaf_mask != pair.odd.leaf_mask:
        raise LeafSetError("filler must be on the same leaves as the families")
    extra = (filler,) * (r - lo)
    labels = pair.odd.labels
    return (
        TreeMultiset(pair.odd.members + extra, labels),
        TreeMultiset(pair.even.members + extra, labels),
    )


def verify_entangled(s1: TreeMultiset, s2: TreeMultiset, m: int) -> bool:
    """True iff s1 and s2 restrict identically to every m-subset of their leaves.

    Smaller subsets need no separate check: restriction composes, so
    agreement on every m-subset implies agreement below m.
    """
    leaves = s1.leaves
    if m > len(leaves):
        raise ValueError(f"m={m} exceeds the {len(leaves)} leaves")
    return not any(disentangles(k, s1, s2) for k in itertools.combinations(leaves, m))

