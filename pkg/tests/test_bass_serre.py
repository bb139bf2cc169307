import random

import pytest

from gogtree import EXAMPLES, load_example
from gogtree.bass_serre import BassSerreTree, build_tree_ball, tree_ball_dot, tree_ball_json
from tests.test_graph_of_groups import random_word


@pytest.fixture(params=sorted(EXAMPLES))
def tree(request):
    return BassSerreTree(load_example(request.param))


def test_ball_is_tree_and_depths_are_distances(tree):
    ball = build_tree_ball(tree, tree.base_vertex(), 2, 4)
    assert ball.is_tree()
    for w, d in ball.vertices.items():
        assert tree.distance(ball.center, w) == d
        verts, edges = tree.tree_geodesic(ball.center, w)
        assert verts[-1] == w and len(edges) == d


def test_edge_endpoint_consistency(tree):
    gog = tree.gog
    ball = build_tree_ball(tree, tree.base_vertex(), 2, 4)
    for e in ball.edges:
        lhs = tree.edge_path(e)
        rhs = gog.mul(e.t_vertex.rep, gog.vertex_path(e.t_vertex.vtype, e.s))
        assert gog.element_eq(lhs, rhs)
        assert tree.distance(e.o_vertex, e.t_vertex) == 1


def test_equivariance(tree):
    gog = tree.gog
    rng = random.Random(4)
    names, _ = gog.generator_table()
    ball = build_tree_ball(tree, tree.base_vertex(), 2, 3)
    for _ in range(10):
        g = gog.word_to_element(random_word(rng, len(names), 5))
        h = gog.word_to_element(random_word(rng, len(names), 5))
        for e in ball.edges[:20]:
            ge = tree.act(g, e)
            assert (ge.o_vertex, ge.t_vertex) == (tree.act(g, e.o_vertex), tree.act(g, e.t_vertex))
            assert tree.act(gog.mul(g, h), e) == tree.act(g, tree.act(h, e))
        for w in list(ball.vertices)[:20]:
            assert tree.distance(tree.act(g, w), tree.act(g, ball.center)) == ball.vertices[w]


def test_incident_edges_anchor_equivariance():
    gog = load_example("double_f2")
    tree = BassSerreTree(gog)
    w = tree.base_vertex()
    V = gog.group(w.vtype)
    c = V.parse("a b")
    plain, _ = tree.incident_edges(w, 2)
    anchored, _ = tree.incident_edges(w, 2, anchor=c)
    g = gog.vertex_element(w.vtype, c)
    assert {tree.act(g, e) for _, e, _, _ in plain} == {e for _, e, _, _ in anchored}


def test_path_stabilizer_double():
    gog = load_example("double_f2")
    tree = BassSerreTree(gog)
    w1 = tree.base_vertex()
    _, e, w2, _ = tree.incident_edges(w1, 0)[0][0]
    stab = tree.path_stabilizer(w1, w2)
    V = gog.group(w1.vtype)
    assert V.sub_equal(stab.local, V.sub_generate([V.parse("a^2 b^2")]))
    for g in stab.generators():
        assert tree.stabilizes(g, w1) and tree.stabilizes(g, w2)
    assert not stab.contains(gog.vertex_element(w1.vtype, V.parse("a^2")))


def test_path_stabilizer_matches_fixers(tree):
    """Random elements fixing both ends lie in the stabilizer and vice versa."""
    gog = tree.gog
    rng = random.Random(9)
    w1 = tree.base_vertex()
    ball = build_tree_ball(tree, w1, 2, 2)
    V = gog.group(w1.vtype)
    for w2 in list(ball.vertices)[:8]:
        stab = tree.path_stabilizer(w1, w2)
        for _ in range(15):
            h = rng.choice(list(V.ball(4)))
            g = gog.vertex_element(w1.vtype, h)
            fixes = tree.stabilizes(g, w1) and tree.stabilizes(g, w2)
            assert stab.contains(g) == fixes


def test_exports(tree):
    ball = build_tree_ball(tree, tree.base_vertex(), 1, 2)
    assert tree_ball_dot(tree, ball).startswith("graph tree {")
    doc = tree_ball_json(tree, ball)
    assert doc["stats"]["vertices"] == len(ball.vertices)
