import itertools
import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disentangling.tree_core import (
    LabelTable,
    LeafSetError,
    NewickError,
    QuartetChoice,
    RootedTopology,
    TripletChoice,
    UnrootedTopology,
    emit_newick,
    enumerate_rooted,
    enumerate_unrooted,
    leaves_of,
    parse_newick,
    quartet,
    random_rooted,
    random_unrooted,
    restrict_rooted,
    restrict_unrooted,
    root_at_leaf,
    rooted_triple,
    unroot,
)

from oracles import (
    clade_sets,
    double_factorial,
    four_point_quartet,
    graph_from_nested,
    graph_restrict,
    graph_splits,
    prune,
    rooted_split_enumeration,
    triple_by_lca_depth,
    unrooted_nested,
)

CATERPILLAR6 = "((1,2),3,(4,(5,6)));"


def R(text):
    return parse_newick(text, "rooted")


def U(text):
    return parse_newick(text, "unrooted")


# ---------------------------------------------------------------------------
# parsing and emission
# ---------------------------------------------------------------------------


def test_parse_three_leaf_rooted():
    t = R("((1,2),3);")
    assert t.shape == ((1, 2), 3)
    assert emit_newick(t) == "((1,2),3);"


def test_child_order_is_canonicalized():
    assert R("(3,(2,1));") == R("((1,2),3);")
    assert emit_newick(R("(3,(2,1));")) == "((1,2),3);"


def test_unrooted_canonical_form_roots_at_smallest_leaf():
    assert emit_newick(U("((1,2),(3,4),5);")) == "(1,2,((3,4),5));"


def test_emit_keeps_file_order_ids_for_names():
    t = parse_newick("(b,a);")
    assert t.labels is not None
    assert t.labels.name(0) == "b"
    assert emit_newick(t) == "(b,a);"


def test_single_cherry_identity():
    assert emit_newick(R("(1,2);")) == "(1,2);"


def test_shared_label_table_across_trees():
    labels = LabelTable()
    t1 = parse_newick("((x,y),z);", labels=labels)
    t2 = parse_newick("((z,y),x);", labels=labels)
    assert t1.leaf_mask == t2.leaf_mask
    assert t1 != t2


@pytest.mark.parametrize(
    "text, mode",
    [
        ("((1,2),3)", "rooted"),  # no terminator
        ("((1,2),3;", "rooted"),
        ("((1,2),,3);", "rooted"),
        ("((1,2),3);x", "rooted"),
        ("((1-2),3);", "rooted"),
        ("(1,2,3);", "rooted"),  # arity
        ("((1,2),3);", "unrooted"),  # arity: top must have 3
        ("((1,2,3),4,5);", "unrooted"),
        ("((1,1),2);", "rooted"),  # duplicate
        ("((a,b),a);", "rooted"),
        ("1;", "rooted"),
    ],
)
def test_parse_errors(text, mode):
    with pytest.raises(NewickError):
        parse_newick(text, mode)


def test_syntax_error_reports_position():
    with pytest.raises(NewickError) as exc:
        parse_newick("((1,2)#,3);")
    assert exc.value.position == 6


def test_three_leaf_unrooted_star_accepted():
    t = U("(3,1,2);")
    assert emit_newick(t) == "(1,2,3);"


def test_whitespace_is_tolerated():
    assert R(" ( (1, 2) ,3 ) ; ") == R("((1,2),3);")


@given(st.integers(3, 8), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_permuting_children_gives_same_object(n, seed):
    rng = random.Random(seed)
    t = random_rooted(n, seed)

    def shuffled(s):
        if isinstance(s, int):
            return str(s)
        kids = [shuffled(c) for c in s]
        rng.shuffle(kids)
        return "(" + ",".join(kids) + ")"

    text = shuffled(t.shape) + ";"
    assert R(text) == t
    assert emit_newick(R(emit_newick(t))) == emit_newick(t)


@given(st.integers(4, 9), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_unrooted_reparse_from_any_handle(n, seed):
    t = random_unrooted(n, seed)
    x = random.Random(seed).choice(t.leaves)
    # write the tree with x on the trifurcation
    rooted = root_at_leaf(t, x)
    a, b = rooted.shape
    text = f"({x},{emit_newick(RootedTopology(a))[:-1]},{emit_newick(RootedTopology(b))[:-1]});"
    assert U(text) == t


# ---------------------------------------------------------------------------
# restriction
# ---------------------------------------------------------------------------


def test_restrict_rooted_examples():
    t = R("(((1,2),3),4);")
    assert restrict_rooted(t, {1, 3, 4}) == R("((1,3),4);")
    assert restrict_rooted(t, t.leaves) == t
    assert restrict_rooted(R("((1,2),3);"), {1, 2}) == R("(1,2);")
    assert restrict_rooted(t, {2}).shape == 2


def test_restrict_rooted_errors():
    t = R("((1,2),3);")
    with pytest.raises(LeafSetError):
        restrict_rooted(t, {1, 7})
    with pytest.raises(LeafSetError):
        restrict_rooted(t, set())


def test_restrict_unrooted_examples():
    q = U("((1,2),3,4);")
    star = restrict_unrooted(q, {1, 2, 3})
    assert emit_newick(star) == "(1,2,3);"
    cat = U(CATERPILLAR6)
    assert restrict_unrooted(cat, cat.leaves) == cat
    assert restrict_unrooted(cat, {1, 2, 5, 6}) == U("((1,2),5,6);")


def test_restrict_unrooted_errors():
    q = U("((1,2),3,4);")
    with pytest.raises(LeafSetError):
        restrict_unrooted(q, {1, 2})
    with pytest.raises(LeafSetError):
        restrict_unrooted(q, {1, 2, 9})


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_rooted_restriction_matches_pruning_oracle(n):
    trees = list(enumerate_rooted(n))
    for t in trees:
        for size in range(1, n + 1):
            for k in itertools.combinations(t.leaves, size):
                got = restrict_rooted(t, k)
                assert clade_sets(got.shape) == clade_sets(prune(t.shape, set(k)))


@pytest.mark.parametrize("n", [4, 5, 6])
def test_unrooted_restriction_matches_graph_oracle(n):
    for t in enumerate_unrooted(n):
        adj = graph_from_nested(unrooted_nested(t))
        for size in range(3, n + 1):
            for k in itertools.combinations(t.leaves, size):
                got = restrict_unrooted(t, k)
                expected = graph_splits(graph_restrict(adj, set(k)))
                assert graph_splits(graph_from_nested(unrooted_nested(got))) == expected


@pytest.mark.parametrize("n", [4, 5, 6])
def test_restriction_is_functorial(n):
    rng = random.Random(n)
    for t in enumerate_rooted(n):
        k = set(rng.sample(t.leaves, rng.randint(2, n)))
        k2 = set(rng.sample(sorted(k), rng.randint(1, len(k))))
        assert restrict_rooted(restrict_rooted(t, k), k2) == restrict_rooted(t, k2)
    for t in enumerate_unrooted(n):
        k = set(rng.sample(t.leaves, rng.randint(3, n)))
        k2 = set(rng.sample(sorted(k), rng.randint(3, len(k))))
        assert restrict_unrooted(restrict_unrooted(t, k), k2) == restrict_unrooted(t, k2)


# ---------------------------------------------------------------------------
# triples and quartets
# ---------------------------------------------------------------------------


def test_rooted_triple_examples():
    assert rooted_triple(R("((1,2),3);"), {1, 2, 3}) == TripletChoice(3, (1, 2))
    t = R("(((1,2),3),4);")
    assert rooted_triple(t, {1, 3, 4}) == TripletChoice(4, (1, 3))
    assert rooted_triple(t, {1, 2, 4}) == TripletChoice(4, (1, 2))
    with pytest.raises(LeafSetError):
        rooted_triple(t, {1, 2, 9})


def test_rooted_triple_matches_lca_oracle():
    for t in enumerate_rooted(6):
        for s in itertools.combinations(t.leaves, 3):
            apex, cherry = triple_by_lca_depth(t.shape, *s)
            assert rooted_triple(t, s) == TripletChoice(apex, cherry)


def test_quartet_examples():
    q = U("((1,2),3,4);")
    assert quartet(q, {1, 2, 3, 4}) == QuartetChoice(((1, 2), (3, 4)))
    cat = U(CATERPILLAR6)
    assert quartet(cat, {1, 3, 4, 6}) == QuartetChoice(((1, 3), (4, 6)))
    assert quartet(cat, {1, 2, 3, 4}) == QuartetChoice(((1, 2), (3, 4)))
    with pytest.raises(LeafSetError):
        quartet(cat, {1, 2, 3})


def test_quartet_matches_four_point_oracle():
    for t in enumerate_unrooted(6):
        adj = graph_from_nested(unrooted_nested(t))
        for s in itertools.combinations(t.leaves, 4):
            q = quartet(t, s)
            assert frozenset(frozenset(p) for p in q.split) == four_point_quartet(adj, *s)


@pytest.mark.parametrize("n", [4, 5])
def test_rooted_triples_determine_the_tree(n):
    trees = list(enumerate_rooted(n))
    profile = {t: tuple(rooted_triple(t, s) for s in itertools.combinations(range(1, n + 1), 3)) for t in trees}
    assert len(set(profile.values())) == len(trees)


@pytest.mark.parametrize("n", [5, 6])
def test_quartets_determine_the_tree(n):
    trees = list(enumerate_unrooted(n))
    profile = {t: tuple(quartet(t, s) for s in itertools.combinations(range(1, n + 1), 4)) for t in trees}
    assert len(set(profile.values())) == len(trees)


# ---------------------------------------------------------------------------
# rooting at a leaf
# ---------------------------------------------------------------------------


def test_root_at_leaf_examples():
    q = U("((1,2),3,4);")
    assert root_at_leaf(q, 1) == R("(2,(3,4));")
    assert root_at_leaf(q, 3) == R("((1,2),4);")
    with pytest.raises(LeafSetError):
        root_at_leaf(q, 9)


def test_unroot_examples():
    assert emit_newick(unroot(R("(1,2);"), 0)) == "(0,1,2);"
    assert quartet(unroot(R("((1,2),3);"), 0), {0, 1, 2, 3}) == QuartetChoice(((0, 3), (1, 2)))
    with pytest.raises(LeafSetError):
        unroot(R("(1,2);"), 1)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_root_unroot_round_trip(n):
    for t in enumerate_unrooted(n):
        for x in t.leaves:
            assert unroot(root_at_leaf(t, x), x) == t


@given(st.integers(3, 8), st.integers(0, 2**32), st.data())
@settings(max_examples=80, deadline=None)
def test_rooting_compatibility(n, seed, data):
    t = random_rooted(n, seed)
    k = data.draw(st.sets(st.sampled_from(t.leaves), min_size=2))
    left = restrict_unrooted(unroot(t, 0), {0} | k)
    right = unroot(restrict_rooted(t, k), 0)
    assert left == right


# ---------------------------------------------------------------------------
# enumeration and sampling
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n, count", [(2, 1), (3, 3), (4, 15), (5, 105), (6, 945)])
def test_enumerate_rooted_counts(n, count):
    trees = list(enumerate_rooted(n))
    assert len(trees) == count == double_factorial(2 * n - 3)
    assert len(set(trees)) == count


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_enumerate_rooted_matches_split_enumeration(n):
    ours = {t.shape for t in enumerate_rooted(n)}
    theirs = {RootedTopology(s).shape for s in rooted_split_enumeration(range(1, n + 1))}
    assert ours == theirs


@pytest.mark.parametrize("n, count", [(3, 1), (4, 3), (5, 15), (6, 105), (7, 945)])
def test_enumerate_unrooted_counts(n, count):
    trees = list(enumerate_unrooted(n))
    assert len(trees) == count == double_factorial(2 * n - 5)
    assert len(set(trees)) == count


def test_enumerate_unrooted_matches_graph_splits():
    seen = {graph_splits(graph_from_nested(unrooted_nested(t))) for t in enumerate_unrooted(6)}
    assert len(seen) == 105


@pytest.mark.parametrize("bad", [1, 9])
def test_enumerate_rooted_guard(bad):
    with pytest.raises(ValueError):
        next(enumerate_rooted(bad))


def test_enumerate_unrooted_guard():
    with pytest.raises(ValueError):
        next(enumerate_unrooted(10))


def test_random_rooted_two_leaves():
    assert random_rooted(2, 12345) == R("(1,2);")


def test_random_rooted_deterministic():
    assert random_rooted(7, 99) == random_rooted(7, 99)
    assert random_unrooted(7, 99) == random_unrooted(7, 99)


def test_random_rooted_is_uniform():
    n, samples = 5, 10_000
    counts = Counter(random_rooted(n, seed) for seed in range(samples))
    trees = list(enumerate_rooted(n))
    assert set(counts) == set(trees)
    p = 1 / len(trees)
    sigma = math.sqrt(samples * p * (1 - p))
    for t in trees:
        assert abs(counts[t] - samples * p) <= 5 * sigma
    chi2 = sum((counts[t] - samples * p) ** 2 / (samples * p) for t in trees)
    # 104 degrees of freedom; 99.9th percentile is about 153
    assert chi2 < 153


def test_leaves_of_round_trip():
    assert leaves_of(0b101100) == [2, 3, 5]


def test_unrooted_handle_is_normalized():
    t = UnrootedTopology(5, R("((1,2),(3,4));"))
    assert t.handle == 1
    assert t == U("(1,2,(5,(3,4)));")
