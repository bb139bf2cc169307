from fractions import Fraction

from hypothesis import given, strategies as st

from gogtree.words import (
    FiniteGroupTable,
    FreeGroup,
    ball,
    cyclic_reduction,
    distance,
    format_word,
    free_reduce,
    geodesic_path,
    gromov_product,
    inv,
    mul,
    parse_word,
    power,
    primitive_root,
    project_to_segment,
    shortlex_key,
    sphere,
)

raw_words = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=14)


def test_free_reduce_examples():
    assert free_reduce((1, 2, -2, -1, 1)) == (1,)
    assert free_reduce((1, -1)) == ()
    assert parse_word("a^2 b^-1", ["a", "b"]) == (1, 1, -2)


@given(raw_words)
def test_reduce_idempotent_and_reduced(w):
    r = free_reduce(w)
    assert free_reduce(r) == r
    assert all(x != -y for x, y in zip(r, r[1:]))


@given(raw_words, raw_words, raw_words)
def test_group_axioms(u, v, w):
    u, v, w = free_reduce(u), free_reduce(v), free_reduce(w)
    assert mul(mul(u, v), w) == mul(u, mul(v, w))
    assert mul(u, inv(u)) == ()
    assert inv(inv(u)) == u


@given(raw_words, raw_words, raw_words)
def test_gromov_product_and_geodesics(x, y, z):
    x, y, z = free_reduce(x), free_reduce(y), free_reduce(z)
    # trees are 0-hyperbolic: the four-point condition with base 1
    a, b, c = gromov_product(x, y), gromov_product(y, z), gromov_product(x, z)
    assert c >= min(a, b)
    path = geodesic_path(x, y)
    assert path[0] == x and path[-1] == y and len(path) == distance(x, y) + 1
    assert all(distance(p, q) == 1 for p, q in zip(path, path[1:]))
    p = project_to_segment(z, x, y)
    assert p in path
    assert distance(z, p) == min(distance(z, q) for q in path)


def test_ball_counts_and_order():
    assert [len(sphere(2, n)) for n in range(4)] == [1, 4, 12, 36]
    words = list(ball(2, 3))
    assert words == sorted(words, key=shortlex_key)
    assert len(words) == 53


def test_cyclic_and_primitive():
    w = parse_word("b a a b^-1", ["a", "b"])
    conj, core = cyclic_reduction(w)
    assert core == (1, 1) and mul(mul(conj, core), inv(conj)) == w
    assert primitive_root(power((1, 2), 3)) == ((1, 2), 3)
    assert gromov_product((1, 1), (1, 2)) == Fraction(1)


def test_format_roundtrip():
    F = FreeGroup(["x", "y"])
    w = F.parse("x^3 y^-2 x")
    assert F.parse(F.format(w)) == w
    assert format_word((), ["x"]) == "1"


def test_finite_table():
    Z6 = FiniteGroupTable.cyclic(6)
    assert Z6.order == 6
    assert all(Z6.op(x, Z6.inv(x)) == 0 for x in Z6.elements())
