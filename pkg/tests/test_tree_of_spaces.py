import random
from collections import deque
from fractions import Fraction

import pytest

from gogtree import EXAMPLES, load_example
from gogtree.bass_serre import TreeEdge, TreeVertex
from gogtree.ledger import ConstantsLedger
from gogtree.tree_of_spaces import (
    HALF,
    UNIT,
    TreeOfSpaces,
    build_metric_ball,
    build_space_ball,
    compute_D0,
    orbit_fiber_hausdorff,
    qi_lift,
    space_ball_dot,
)
from tests.test_graph_of_groups import random_word


@pytest.fixture(params=sorted(EXAMPLES))
def space(request):
    return TreeOfSpaces(load_example(request.param))


@pytest.fixture
def ball(space):
    return build_space_ball(space, space.base_point(), 1, 3)


def test_projection_is_simplicial(space, ball):
    for p, q, w in ball.edge_list():
        a, b = space.project_pi(p), space.project_pi(q)
        if w == UNIT:
            assert a == b                                  # edge inside one fiber
        else:
            assert w == HALF
            v, e = (a, b) if isinstance(a, TreeVertex) else (b, a)
            assert isinstance(e, TreeEdge) and v in e.endpoints()


def test_two_attaching_edges_per_edge_point(space):
    ball = build_space_ball(space, space.base_point(), 1, 3)
    for p in ball.nodes:
        if not p.is_vertex:
            half = [q for q, w in space.neighbors(p) if w == HALF]
            assert len(half) == 2
            assert set(half) == set(space.partners(p))


def _fiber_bfs(ball, pts):
    inside = set(pts)
    adj = {p: [] for p in pts}
    for p, q, w in ball.edge_list():
        if w == UNIT and p in inside and q in inside:
            adj[p].append(q)
            adj[q].append(p)
    src = pts[0]
    dist = {src: 0}
    queue = deque([src])
    while queue:
        p = queue.popleft()
        for q in adj[p]:
            if q not in dist:
                dist[q] = dist[p] + 1
                queue.append(q)
    return src, dist


def test_fiber_metric_is_word_metric(space, ball):
    for locus, pts in ball.fibers().items():
        if len(pts) > 500:
            continue
        G = space.fiber_group(locus)
        src, dist = _fiber_bfs(ball, pts)
        for p in pts:
            assert dist[p] == G.length(G.mul(G.inv(src.x), p.x))


def test_double_ball_size():
    space = TreeOfSpaces(load_example("double_f2"))
    ball = build_space_ball(space, space.base_point(), 1, 4)
    sizes = {len(v) for k, v in ball.fibers().items() if isinstance(k, TreeVertex)}
    assert sizes == {161}                        # word ball of radius 4 in F_2


def test_D0_values():
    expect = {"free_amalgam_trivial": 1, "double_f2": 1, "hnn_malnormal": 0, "finite_edge": 1}
    for name, val in expect.items():
        ledger = ConstantsLedger()
        assert compute_D0(TreeOfSpaces(load_example(name)), ledger) == val
        assert ledger["D0"].provenance == "computed"


def test_orbit_map_hausdorff(space):
    gog = space.gog
    rng = random.Random(6)
    names, _ = gog.generator_table()
    D0 = compute_D0(space)
    for _ in range(5):
        g = gog.word_to_element(random_word(rng, len(names), 4))
        for v in range(len(gog.vertices)):
            hs = list(gog.group(v).ball(2))[:6]
            gap, trusted = orbit_fiber_hausdorff(space, g, v, hs)
            assert trusted and 0 <= gap <= D0


def test_distances_are_trusted_near_center():
    space = TreeOfSpaces(load_example("double_f2"))
    x0 = space.base_point()
    ball = build_metric_ball(space, [x0], 3)
    big = build_metric_ball(space, [x0], 5)
    small_d = ball.distances_from(x0)
    big_d = big.distances_from(x0)
    checked = 0
    for i, p in enumerate(ball.nodes):
        if ball.trusted(ball.index[x0], i, small_d[i]):
            # trusted values are exact, so a bigger ball must agree
            assert big_d[big.index[p]] == small_d[i]
            checked += 1
    assert checked > 50


def test_action_is_isometric():
    space = TreeOfSpaces(load_example("hnn_malnormal"))
    gog = space.gog
    x0 = space.base_point()
    ball = build_metric_ball(space, [x0], 3)
    g = gog.word_to_element((3, 1))             # t a
    gball = build_metric_ball(space, [space.act(g, x0)], 3)
    for p in ball.nodes[:50]:
        a = ball.dist(x0, p)
        b = gball.dist(space.act(g, x0), space.act(g, p))
        if a.trust and b.trust:
            assert a.value == b.value


def test_lift_is_a_section():
    space = TreeOfSpaces(load_example("double_f2"))
    tree = space.tree
    w0 = tree.base_vertex()
    path = [w0]
    for _ in range(3):
        inc, _ = tree.incident_edges(path[-1], 1)
        path.append(next(f for _, _, f, _ in inc if f not in path))
    lift = qi_lift(space, path, space.base_point())
    assert [p.locus for p in lift.points] == path
    assert lift.K >= Fraction(1)


def test_dot_export(ball):
    assert space_ball_dot(ball).startswith("graph X {")


def test_action_commutes_with_neighbors(space):
    gog = space.gog
    rng = random.Random(12)
    names, _ = gog.generator_table()
    ball = build_space_ball(space, space.base_point(), 1, 2)
    for _ in range(5):
        g = gog.word_to_element(random_word(rng, len(names), 5))
        for p in ball.nodes[:40]:
            moved = {(space.act(g, q), w) for q, w in space.neighbors(p)}
            assert moved == set(space.neighbors(space.act(g, p)))
