import pytest
from hypothesis import given, settings, strategies as st

from gogtree import load_example
from gogtree import stallings
from gogtree.bass_serre import BassSerreTree
from gogtree.limit_lab import (
    Ray,
    approach_depth,
    attach_subgroup,
    axis_pairs,
    bundled_rays,
    companion_ray,
    extract_witnesses,
    flowable,
    gap_profile,
    hausdorff,
    intersection_defect,
    limit_proxy,
    normalize_ray,
    obstruction_bounded,
    pair_ball,
    step_label,
)
from gogtree.tree_of_spaces import TreeOfSpaces, build_metric_ball
from gogtree.words import free_reduce, mul, parse_word, power, sphere

AB = ["a", "b"]
nonempty = st.lists(st.sampled_from([1, -1, 2, -2]), min_size=1, max_size=6)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=6), nonempty)
def test_normalize_ray_same_boundary_point(u, v):
    v = free_reduce(v)
    if not v:
        return
    h, p = normalize_ray(free_reduce(u), v)
    # the two rays agree on a long prefix
    n = 40
    lhs = mul(free_reduce(u), power(v, 60))[:n]
    rhs = mul(h, power(p, 60))[:n]
    assert lhs == rhs
    assert normalize_ray(h, p) == (h, p)


@pytest.fixture(scope="module")
def double():
    return TreeOfSpaces(load_example("double_f2"))


def test_flow_of_edge_direction(double):
    gog = double.gog
    W = double.tree.base_vertex()
    E = double.tree.edge_at(W, (), 1)
    r = Ray.make(W, (), parse_word("a^2 b^2", AB))
    res = flowable(double, r, E)
    assert res.flowable
    V = gog.group(E.t_vertex.vtype)
    assert res.ray.period == V.parse("x^2 y^2") and res.ray.anchor == E.t_vertex
    # flowing back returns the original ray
    back = flowable(double, res.ray, E)
    assert back.flowable and back.ray == r


def test_non_flowable_ray(double):
    W = double.tree.base_vertex()
    E = double.tree.edge_at(W, (), 1)
    r = Ray.make(W, (), (1,))
    assert not flowable(double, r, E).flowable
    assert obstruction_bounded(double, r, E)


@pytest.mark.parametrize("name", ["free_amalgam_trivial", "double_f2", "hnn_malnormal",
                                  "finite_edge"])
def test_flow_matches_obstruction(name):
    space = TreeOfSpaces(load_example(name))
    rays = bundled_rays(space)
    assert len(rays) == 12
    for r, E in rays:
        assert flowable(space, r, E).flowable != obstruction_bounded(space, r, E)


def test_flowed_pair_plateau(double):
    r, E = bundled_rays(double)[0]
    prof = gap_profile(double, r, companion_ray(double, r, E))
    vals = [g.upper for g in prof.values()]
    assert all(g.exact for g in prof.values())
    assert max(vals) - min(vals) <= 1


def test_limit_proxy_sizes():
    H = stallings.fold([parse_word("a^2", AB), parse_word("b", AB)], 2)
    for R in range(4):
        prox = limit_proxy(H, R)
        assert len(prox.points) == len(sphere(2, R))
        assert all(H.contains(p) for p in prox.points)
    assert approach_depth(H, parse_word("a^2 b a", AB)) == 4     # prefix of a^2 b a^2
    assert approach_depth(H, parse_word("a b", AB)) == 1
    assert hausdorff([()], [(1,)]) == 1


def test_defect_small_radius(double):
    w1 = double.tree.base_vertex()
    w2 = double.tree.incident_edges(w1, 0)[0][0][2]
    ball = pair_ball(double, w1, w2, 4, 5)
    rep = intersection_defect(double, w1, w2, 4, D=5, ball=ball)
    assert not rep.vacuous and rep.pairs > 0
    assert rep.max_defect <= 2 and rep.contrast >= 4


def test_witnesses(double):
    w1 = double.tree.base_vertex()
    w2 = double.tree.incident_edges(w1, 0)[0][0][2]
    pairs = axis_pairs(double, w1, w2, 6)
    ball = build_metric_ball(double, [q for pq in pairs for q in pq], 2)
    rep = extract_witnesses(double, pairs, ball, w1, w2)
    assert len(rep.bucket) >= 3 and rep.all_verified
    I = stallings.fold([parse_word("a^2 b^2", AB)], 2)
    assert all(I.contains(h) for _, h, _, _ in rep.witnesses)


def test_step_labels_translation_invariant(double):
    gog = double.gog
    x0 = double.base_point()
    g = gog.word_to_element((1, 2, 5))
    for q, _ in double.neighbors(x0):
        assert step_label(double, x0, q) == step_label(double, double.act(g, x0),
                                                        double.act(g, q))


def test_attach_subgroup():
    gog = load_example("double_f2")
    K = stallings.fold([parse_word("a^2 b^2", AB)], 2)
    new = attach_subgroup(gog, "u", K)
    assert new.report.ok
    assert "u_K" in new.vertices
    assert len(new.fundamental_presentation().relators) == new.expected_relator_count()
    # the new vertex group is conjugate into G_u with image K
    tree = BassSerreTree(new)
    w = tree.base_vertex(new.vindex["u"])
    k = tree.base_vertex(new.vindex["u_K"])
    stab = tree.path_stabilizer(w, k)
    V = new.group(w.vtype)
    assert V.sub_equal(stab.local, V.sub_generate([V.parse("a^2 b^2")]))
    with pytest.raises(ValueError):
        attach_subgroup(gog, "nowhere", K)
