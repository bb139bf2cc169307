"""Finite pieces of the tree of spaces over the Bass-Serre tree.

Points:
  vertex point (W, x)  -- W a TreeVertex, x in G_(W.vtype); ambient element W.rep x
  edge point   (E, a)  -- E a TreeEdge (positive orientation), a in G_e

Edges (weights are doubled so that every weight is an integer):
  intra vertex space  (W, x) -- (W, x s)        s in the fiber generating set, weight 2
  intra edge space    (E, a) -- (E, a c)        c in the edge generating set,  weight 2
  attaching           (E, a) -- (E.o, r phi_o(a)) and (E, a) -- (E.t, s phi_t(a)), weight 1
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .bass_serre import BassSerreTree, TreeEdge, TreeVertex
from .graph_of_groups import GraphOfGroups, Path
from .ledger import ConstantsLedger

HALF = 1
UNIT = 2


class SpacePoint(NamedTuple):
    locus: object      # TreeVertex | TreeEdge
    x: object          # local coordinate

    @property
    def is_vertex(self) -> bool:
        return isinstance(self.locus, TreeVertex)


class MetricEstimate(NamedTuple):
    value: Fraction
    trust: bool


class TreeOfSpaces:
    """Implicit tree of spaces: neighbors of any point are computed on demand."""

    def __init__(self, gog: GraphOfGroups):
        self.gog = gog
        self.tree = BassSerreTree(gog)

    # -- points -----------------------------------------------------------------
    def base_point(self) -> SpacePoint:
        gog = self.gog
        return SpacePoint(self.tree.base_vertex(), gog.group(gog.base).identity)

    def point_of_path(self, p: Path) -> SpacePoint:
        w, h = self.tree.vertex_of_path(p)
        return SpacePoint(w, h)

    def ambient(self, p: SpacePoint) -> Path:
        """Element of the groupoid naming a vertex point."""
        gog = self.gog
        return gog.mul(p.locus.rep, gog.vertex_path(p.locus.vtype, p.x))

    def theta(self, g: Path) -> SpacePoint:
        """Orbit map g -> g x0 with x0 the identity of the base vertex space."""
        return self.point_of_path(g)

    def fiber_identity(self, v: int) -> SpacePoint:
        """The identity of G_v: the point p_v in the vertex space of 1 G_v."""
        return self.point_of_path(self.gog.tree_path_to(v))

    def project_pi(self, p: SpacePoint):
        return p.locus

    def act(self, g: Path, p: SpacePoint) -> SpacePoint:
        if p.is_vertex:
            return self.point_of_path(self.gog.mul(g, self.ambient(p)))
        # the coset rep of gE differs from r, so re-split through the o side
        po, _ = self.partners(p)
        return self.attach(self.act(g, po), p.locus.eid)

    # -- local structure ----------------------------------------------------------
    def fiber_group(self, locus):
        if isinstance(locus, TreeVertex):
            return self.gog.group(locus.vtype)
        return self.gog.edge_group(locus.eid)

    def attach(self, p: SpacePoint, eid: int) -> SpacePoint:
        """Edge point attached to vertex point p through the Y-edge end eid."""
        gog = self.gog
        W, x = p
        if eid > 0:
            r, a = gog.origin_map(eid).split(x)
            return SpacePoint(self.tree.edge_at(W, r, eid), a)
        E = self.tree.edge_at(W, x, eid)
        V = gog.group(W.vtype)
        a = gog.terminus_map(E.eid).preimage_element(V.mul(V.inv(E.s), x))
        if a is None:
            raise AssertionError("vertex point not in the t-side image")
        return SpacePoint(E, a)

    def partners(self, p: SpacePoint) -> tuple[SpacePoint, SpacePoint]:
        """The two vertex points attached to an edge point (o side, t side)."""
        gog = self.gog
        E, a = p
        Vo, Vt = gog.group(E.o_vertex.vtype), gog.group(E.t_vertex.vtype)
        po = SpacePoint(E.o_vertex, Vo.mul(E.r, gog.origin_map(E.eid).image(a)))
        pt = SpacePoint(E.t_vertex, Vt.mul(E.s, gog.terminus_map(E.eid).image(a)))
        return po, pt

    def neighbors(self, p: SpacePoint) -> list[tuple[SpacePoint, int]]:
        G = self.fiber_group(p.locus)
        out = [(SpacePoint(p.locus, G.mul(p.x, s)), UNIT) for s in G.step_gens()]
        if p.is_vertex:
            for eid in self.gog.edges_at(p.locus.vtype):
                out.append((self.attach(p, eid), HALF))
        else:
            po, pt = self.partners(p)
            out += [(po, HALF), (pt, HALF)]
        return out

    def fiber_distance(self, p: SpacePoint, q: SpacePoint) -> int:
        if p.locus != q.locus:
            raise ValueError("points lie in different fibers")
        G = self.fiber_group(p.locus)
        return G.length(G.mul(G.inv(p.x), q.x))

    def nearest_on_edge(self, p: SpacePoint, E: TreeEdge) -> tuple[SpacePoint, int]:
        """Edge point of E whose partner on p's side is nearest to p.

        Returns the edge point and the fiber distance from p to that partner.
        """
        gog = self.gog
        W, c = p
        V = gog.group(W.vtype)
        if E.o_vertex == W:
            m, a1 = gog.origin_map(E.eid).split(V.mul(V.inv(c), E.r))
        elif E.t_vertex == W:
            m, a1 = gog.terminus_map(E.eid).split(V.mul(V.inv(c), E.s))
        else:
            raise ValueError("edge is not incident to the point's vertex")
        a = gog.edge_group(E.eid).inv(a1)
        return SpacePoint(E, a), V.length(m)

    def transport(self, p: SpacePoint, E: TreeEdge) -> tuple[SpacePoint, int]:
        """Nearest-point transport of p across E; returns the point and the doubled jump."""
        q, d = self.nearest_on_edge(p, E)
        po, pt = self.partners(q)
        far = pt if E.o_vertex == p.locus else po
        return far, UNIT * d + 2 * HALF


# -- balls ----------------------------------------------------------------------
@dataclass
class SpaceBall:
    """A finite induced subgraph of X with its metric and leak data."""

    space: TreeOfSpaces
    nodes: list
    index: dict
    rows: list
    cols: list
    weights: list
    leaky: np.ndarray
    meta: dict = field(default_factory=dict)
    _csr: object = None
    _leak_dist: object = None

    @property
    def n(self) -> int:
        return len(self.nodes)

    def __contains__(self, p) -> bool:
        return p in self.index

    def csr(self):
        if self._csr is None:
            self._csr = csr_matrix((np.asarray(self.weights, dtype=np.float64),
                                    (np.asarray(self.rows, dtype=np.int64),
                                     np.asarray(self.cols, dtype=np.int64))),
                                   shape=(self.n, self.n))
        return self._csr

    def edge_list(self):
        for i, j, w in zip(self.rows, self.cols, self.weights):
            if i < j:
                yield self.nodes[i], self.nodes[j], w

    def leak_distance(self) -> np.ndarray:
        """Doubled ball distance from every node to the nearest leaky node."""
        if self._leak_dist is None:
            idx = np.flatnonzero(self.leaky)
            if len(idx) == 0:
                self._leak_dist = np.full(self.n, np.inf)
            else:
                self._leak_dist = dijkstra(self.csr(), directed=False, indices=idx,
                                           min_only=True)
        return self._leak_dist

    def distances_from(self, p: SpacePoint, limit: float = np.inf) -> np.ndarray:
        i = self._idx(p)
        return dijkstra(self.csr(), directed=False, indices=i, limit=limit)

    def _idx(self, p) -> int:
        try:
            return self.index[p]
        except KeyError:
            raise KeyError(f"point outside ball: {p!r}") from None

    def trusted(self, i: int, j: int, d2: float) -> bool:
        # a path that leaves the ball passes a leaky node on the way out and
        # another on the way back in, so it is at least ld[i] + ld[j] long
        ld = self.leak_distance()
        return bool(ld[i] + ld[j] >= d2)

    def dist(self, p: SpacePoint, q: SpacePoint) -> MetricEstimate:
        i, j = self._idx(p), self._idx(q)
        if i == j:
            return MetricEstimate(Fraction(0), True)
        d = self.distances_from(p)[j]
        if not np.isfinite(d):
            return MetricEstimate(Fraction(-1), False)
        return MetricEstimate(Fraction(int(d), 2), self.trusted(i, j, d))

    def geodesic(self, p: SpacePoint, q: SpacePoint) -> list[SpacePoint]:
        i, j = self._idx(p), self._idx(q)
        _, pred = dijkstra(self.csr(), directed=False, indices=i, return_predecessors=True)
        if i != j and pred[j] < 0:
            return []
        out = [j]
        while out[-1] != i:
            out.append(int(pred[out[-1]]))
        return [self.nodes[k] for k in reversed(out)]

    def fiber(self, locus) -> list[SpacePoint]:
        return [p for p in self.nodes if p.locus == locus]

    def fibers(self) -> dict:
        out = {}
        for p in self.nodes:
            out.setdefault(p.locus, []).append(p)
        return out

    def stats(self) -> dict:
        fib = self.fibers()
        vsizes = sorted(len(v) for k, v in fib.items() if isinstance(k, TreeVertex))
        esizes = sorted(len(v) for k, v in fib.items() if isinstance(k, TreeEdge))
        ld = self.leak_distance()
        finite = ld[np.isfinite(ld)]
        out = {"points": self.n, "edges": len(self.weights) // 2,
               "vertex_fibers": len(vsizes), "edge_fibers": len(esizes),
               "max_vertex_fiber": vsizes[-1] if vsizes else 0,
               "max_edge_fiber": esizes[-1] if esizes else 0,
               "leaky_points": int(self.leaky.sum()),
               "max_trust_radius": (float(finite.max()) / 2) if len(finite) else None}
        out.update(self.meta)
        return out


def _assemble(space: TreeOfSpaces, nodes: list, meta: dict) -> SpaceBall:
    index = {p: i for i, p in enumerate(nodes)}
    rows, cols, weights = [], [], []
    leaky = np.zeros(len(nodes), dtype=bool)
    for i, p in enumerate(nodes):
        for q, w in space.neighbors(p):
            j = index.get(q)
            if j is None:
                leaky[i] = True
            else:
                rows.append(i)
                cols.append(j)
                weights.append(w)
    return SpaceBall(space, nodes, index, rows, cols, weights, leaky, meta)


def build_space_ball(space: TreeOfSpaces, center: SpacePoint, tree_radius: int,
                     word_budget: int, coset_budget: int | None = None) -> SpaceBall:
    """Word balls of radius ``word_budget`` in every vertex fiber over a tree ball.

    The fiber of the center vertex is centered at the center point; every other
    fiber is centered at the nearest-point transport of its parent's center.
    Tree edges are enumerated around those centers with coset reps of length
    <= coset_budget.  Edge points are kept when both partners are materialized.
    """
    if coset_budget is None:
        coset_budget = word_budget
    if not center.is_vertex:
        center = space.partners(center)[0]
    tree = space.tree
    centers = {center.locus: center.x}
    depth = {center.locus: 0}
    order = [center.locus]
    edges = set()
    head = 0
    while head < len(order):
        w = order[head]
        head += 1
        if depth[w] == tree_radius:
            continue
        inc, _ = tree.incident_edges(w, coset_budget, anchor=centers[w])
        for _, E, far, _ in inc:
            edges.add(E)
            if far in centers:
                continue
            q, _ = space.transport(SpacePoint(w, centers[w]), E)
            centers[far] = q.x
            depth[far] = depth[w] + 1
            order.append(far)
    nodes = []
    member = set()
    for w in order:
        V = space.gog.group(w.vtype)
        c = centers[w]
        for y in V.ball(word_budget):
            p = SpacePoint(w, V.mul(c, y))
            if p not in member:
                member.add(p)
                nodes.append(p)
    epoints = []
    eseen = set()
    for p in list(nodes):
        for eid in space.gog.edges_at(p.locus.vtype):
            q = space.attach(p, eid)
            if q.locus not in edges or q in eseen:
                continue
            po, pt = space.partners(q)
            if po in member and pt in member:
                eseen.add(q)
                epoints.append(q)
    meta = {"flavour": "word", "tree_radius": tree_radius, "word_budget": word_budget,
            "coset_budget": coset_budget, "tree_vertices": len(order)}
    return _assemble(space, nodes + epoints, meta)


def build_metric_ball(space: TreeOfSpaces, seeds, radius: Fraction | int,
                      tree_radius: int | None = None, max_points: int = 2_000_000) -> SpaceBall:
    """All points within X-distance ``radius`` of the seeds (implicit Dijkstra).

    With ``tree_radius`` set, points over tree vertices farther than that from
    the first seed's vertex are not explored.
    """
    lim = int(Fraction(radius) * 2)
    dist = {}
    heap = []
    for s in seeds:
        if s not in dist:
            dist[s] = 0
            heapq.heappush(heap, (0, len(dist), s))
    root = None
    if tree_radius is not None:
        s0 = seeds[0]
        root = s0.locus if s0.is_vertex else s0.locus.o_vertex
    counter = len(dist)
    done = []
    tdist = {}
    while heap:
        d, _, p = heapq.heappop(heap)
        if d > dist[p]:
            continue
        done.append(p)
        if len(done) > max_points:
            raise MemoryError(f"metric ball exceeds {max_points} points")
        for q, w in space.neighbors(p):
            nd = d + w
            if nd > lim or nd >= dist.get(q, lim + 1):
                continue
            if root is not None and not _within_tree(space, root, q, tree_radius, tdist):
                continue
            dist[q] = nd
            counter += 1
            heapq.heappush(heap, (nd, counter, q))
    meta = {"flavour": "metric", "radius": float(Fraction(radius)),
            "tree_radius": tree_radius, "seeds": len(seeds)}
    return _assemble(space, done, meta)


def _within_tree(space, root, q, tree_radius, cache) -> bool:
    loc = q.locus
    if loc not in cache:
        if isinstance(loc, TreeVertex):
            cache[loc] = space.tree.distance(root, loc)
        else:
            cache[loc] = max(space.tree.distance(root, loc.o_vertex),
                             space.tree.distance(root, loc.t_vertex))
    return cache[loc] <= tree_radius


# -- constants and probes -----------------------------------------------------------
def compute_D0(space: TreeOfSpaces, ledger: ConstantsLedger | None = None) -> Fraction:
    """max over v of d_X(x0, identity of G_v), by implicit Dijkstra from x0."""
    gog = space.gog
    x0 = space.base_point()
    targets = {space.fiber_identity(v) for v in range(len(gog.vertices))}
    found = {}
    dist = {x0: 0}
    heap = [(0, 0, x0)]
    counter = 0
    while heap and len(found) < len(targets):
        d, _, p = heapq.heappop(heap)
        if d > dist[p]:
            continue
        if p in targets:
            found[p] = d
        for q, w in space.neighbors(p):
            if d + w < dist.get(q, float("inf")):
                dist[q] = d + w
                counter += 1
                heapq.heappush(heap, (d + w, counter, q))
    D0 = Fraction(max(found.values()), 2)
    if ledger is not None:
        ledger.record("D0", D0, "computed", "max_v d_X(x0, p_v) by Dijkstra in X")
    return D0


def orbit_fiber_hausdorff(space: TreeOfSpaces, g: Path, v: int, h_samples) -> tuple[Fraction, bool]:
    """Hausdorff gap between Theta(g G_v) and the vertex space of g G_v, on samples.

    For each h in ``h_samples`` (elements of G_v) the orbit point
    Theta(g p_v h p_v^-1) is paired with the fiber point g p_v h.  Distances
    are measured in a metric ball around both points.  Returns the max gap and
    whether every measurement was trusted.
    """
    gog = space.gog
    pv = gog.tree_path_to(v)
    worst = Fraction(0)
    trusted = True
    D0 = compute_D0(space)
    for h in h_samples:
        k = gog.mul_all(g, pv, gog.vertex_path(v, h))
        orbit = space.theta(gog.mul(k, gog.inv(pv)))
        fib = space.point_of_path(k)
        ball = build_metric_ball(space, [orbit], D0 + 2)
        if fib not in ball:
            return Fraction(-1), False
        est = ball.dist(orbit, fib)
        worst = max(worst, est.value)
        trusted &= est.trust
    return worst, trusted


@dataclass
class QILift:
    path: list                # tree vertices
    points: list              # SpacePoint per vertex
    jumps: list               # doubled X-distances between consecutive points
    strategy: str

    @property
    def K(self) -> Fraction:
        if not self.jumps:
            return Fraction(1)
        return Fraction(max(self.jumps), 2)


def qi_lift(space: TreeOfSpaces, path: list, start: SpacePoint, strategy: str = "nearest") -> QILift:
    """Section over a tree geodesic starting at ``start`` (a point over path[0])."""
    tree = space.tree
    gog = space.gog
    if start.locus != path[0]:
        raise ValueError("start point is not over the first path vertex")
    points = [start]
    jumps = []
    if strategy == "nearest":
        for w, w2 in zip(path, path[1:]):
            E = _edge_between(tree, w, w2)
            q, j = space.transport(points[-1], E)
            points.append(q)
            jumps.append(j)
    elif strategy == "constant":
        X = space.ambient(start)
        Q = gog.mul(gog.inv(X), path[-1].rep)
        for i, e in enumerate(Q.edges[:len(path) - 1]):
            V = gog.group(gog.end(X))
            jumps.append(UNIT * V.length(Q.syl[i]) + 2 * HALF)
            X = gog.mul(X, gog.reduce(gog.end(X), [("v", Q.syl[i]), ("e", e)]))
            points.append(space.point_of_path(X))
    else:
        raise ValueError(f"unknown lift strategy {strategy!r}")
    return QILift(list(path), points, jumps, strategy)


def _edge_between(tree: BassSerreTree, w1: TreeVertex, w2: TreeVertex) -> TreeEdge:
    verts, edges = tree.tree_geodesic(w1, w2)
    if len(edges) != 1:
        raise ValueError("vertices are not adjacent")
    return edges[0][1]


def measure_lift(ball: SpaceBall, lift: QILift) -> tuple[Fraction, bool]:
    """K measured in a ball: max trusted dist_X between consecutive lift points."""
    K = Fraction(0)
    ok = True
    for p, q in zip(lift.points, lift.points[1:]):
        est = ball.dist(p, q)
        K = max(K, est.value)
        ok &= est.trust
    return K, ok


def flare_probe(space: TreeOfSpaces, lift1: QILift, lift2: QILift,
                ledger: ConstantsLedger, M: int | None = None) -> dict:
    """Fiber separations of two lifts over the same geodesic of length 2n."""
    if lift1.path != lift2.path:
        raise ValueError("lifts must lie over the same tree geodesic")
    seps = [space.fiber_distance(p, q) for p, q in zip(lift1.points, lift2.points)]
    n2 = len(seps) - 1
    mid = n2 // 2
    M = ledger.get("M_K", 1) if M is None else M
    if "M_K" not in ledger:
        ledger.record("M_K", M, "configured", "flare separation guard")
    central = seps[mid]
    ends = max(seps[0], seps[-1])
    report = {"separations": seps, "central": central, "endpoints": [seps[0], seps[-1]],
              "n": n2 // 2, "guard": M, "skipped": central < M or central == 0}
    if not report["skipped"]:
        lam = Fraction(ends, central)
        report["lambda"] = float(lam)
        ledger.record("lambda_K", lam, "measured", "endpoint / central fiber separation")
        ledger.record("n_K", n2 // 2, "measured", "half-length of the probed geodesic")
    return report


def proper_embedding_profile(ball: SpaceBall, locus, Ms) -> dict:
    """M -> max fiber distance among fiber pairs with trusted d_X <= M."""
    space = ball.space
    pts = ball.fiber(locus)
    out = {M: 0 for M in Ms}
    top = 2 * max(Ms)
    for p in pts:
        d = ball.distances_from(p, limit=top)
        i = ball.index[p]
        for q in pts:
            j = ball.index[q]
            dx = d[j]
            if not np.isfinite(dx) or not ball.trusted(i, j, dx):
                continue
            fd = space.fiber_distance(p, q)
            for M in Ms:
                if dx <= 2 * M and fd > out[M]:
                    out[M] = fd
    return out


# -- export ----------------------------------------------------------------------
def point_label(space: TreeOfSpaces, p: SpacePoint) -> str:
    gog = space.gog
    G = space.fiber_group(p.locus)
    if p.is_vertex:
        return f"{gog.format_path(p.locus.rep)} | {G.format(p.x)}"
    E = p.locus
    return f"[{gog.edge_name(E.eid)} {gog.format_path(E.o_vertex.rep)} {gog.group(E.o_vertex.vtype).format(E.r)}] | {G.format(p.x)}"


def space_ball_dot(ball: SpaceBall) -> str:
    space = ball.space
    lines = ["graph X {", "  node [shape=point];"]
    groups = ball.fibers()
    for k, (locus, pts) in enumerate(groups.items()):
        lines.append(f"  subgraph cluster_{k} {{")
        lines.append(f'    label="{point_label(space, SpacePoint(locus, space.fiber_group(locus).identity)).split(" | ")[0]}";')
        for p in pts:
            lines.append(f"    p{ball.index[p]};")
        lines.append("  }")
    for p, q, w in ball.edge_list():
        style = " [style=dashed]" if w == HALF else ""
        lines.append(f"  p{ball.index[p]} -- p{ball.index[q]}{style};")
    lines.append("}")
    return "\n".join(lines) + "\n"
