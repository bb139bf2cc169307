"""Finite-scale boundary experiments.

Boundary points of free vertex fibers are eventually periodic rays u v^inf.
A ray over the vertex W lies in the limit set of an edge-image coset g A iff
the reduced ray g^-1 u v^inf is spelled by a path in the core graph of A
starting at its base; that makes flow decisions exact.
"""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse.csgraph import dijkstra

from . import stallings
from .bass_serre import TreeEdge, TreeVertex
from .graph_of_groups import GraphOfGroups
from .tree_of_spaces import SpaceBall, SpacePoint, TreeOfSpaces, build_metric_ball
from .words import (
    EMPTY,
    cyclic_reduction,
    free_reduce,
    inv,
    mul,
    primitive_root,
    sphere,
)


# -- rays ---------------------------------------------------------------------------
def normalize_ray(u, v) -> tuple[tuple, tuple]:
    """Canonical (head, period) of the boundary point u v^inf.

    The period is cyclically reduced and primitive, u v^inf is reduced at
    the seam and the head is as short as possible.
    """
    u, v = tuple(u), free_reduce(v)
    if not v:
        raise ValueError("period must be a nontrivial element")
    c, core = cyclic_reduction(v)
    u = mul(u, c)
    v = core
    while u and u[-1] == -v[0]:
        u = u[:-1]
        v = v[1:] + v[:1]
    while u and u[-1] == v[-1]:
        u = u[:-1]
        v = v[-1:] + v[:-1]
    v, _ = primitive_root(v)
    return u, v


@dataclass(frozen=True)
class Ray:
    anchor: TreeVertex
    head: tuple
    period: tuple

    @classmethod
    def make(cls, anchor: TreeVertex, u, v) -> "Ray":
        h, p = normalize_ray(u, v)
        return cls(anchor, h, p)

    def prefix(self, n: int) -> tuple:
        if n <= len(self.head):
            return self.head[:n]
        k = n - len(self.head)
        reps = -(-k // len(self.period))
        return (self.head + self.period * reps)[:n]

    def translate(self, g) -> tuple[tuple, tuple]:
        """(head, period) of g * self, as words in the same fiber."""
        return normalize_ray(mul(g, self.head), self.period)


def ray_point(r: Ray, n: int) -> SpacePoint:
    return SpacePoint(r.anchor, r.prefix(n))


def format_ray(gog: GraphOfGroups, r: Ray) -> str:
    V = gog.group(r.anchor.vtype)
    return f"{gog.format_path(r.anchor.rep)} : {V.format(r.head)} ({V.format(r.period)})^inf"


@dataclass
class FlowResult:
    flowable: bool
    ray: Ray | None = None
    obstruction: int | None = None
    edge: TreeEdge | None = None


def _edge_side(space: TreeOfSpaces, W: TreeVertex, E: TreeEdge):
    gog = space.gog
    if E.o_vertex == W:
        return gog.origin_map(E.eid), gog.terminus_map(E.eid), E.r, E.s, E.t_vertex
    if E.t_vertex == W:
        return gog.terminus_map(E.eid), gog.origin_map(E.eid), E.s, E.r, E.o_vertex
    raise ValueError("edge is not incident to the ray's anchor")


def _read_in_core(H: stallings.SubgroupHandle, head, period):
    """Follow head period^inf from the base of H's core.

    Returns (prefix q, loop l, core vertex p) with the ray equal to q l^inf,
    q ending at p and l a loop at p, or None when the ray leaves the core.
    """
    v = 0
    for x in head:
        v = H.adj[v].get(x)
        if v is None:
            return None
    q = tuple(head)
    seen = {}
    loops = []
    while v not in seen:
        seen[v] = len(loops)
        start = v
        for x in period:
            v = H.adj[v].get(x)
            if v is None:
                return None
        loops.append(start)
    k = seen[v]
    q = q + tuple(period) * k
    loop = tuple(period) * (len(loops) - k)
    return q, loop, v


def flowable(space: TreeOfSpaces, r: Ray, E: TreeEdge) -> FlowResult:
    """Exact flow decision of r across the tree edge E at its anchor."""
    gog = space.gog
    V = gog.group(r.anchor.vtype)
    if V.kind != "free":
        raise ValueError("rays need a free anchor fiber")
    near, far_map, g, g_far, far = _edge_side(space, r.anchor, E)
    if near.mode == "trivial":
        return FlowResult(False, obstruction=0, edge=E)
    H = near.image_handle()
    h, p = r.translate(inv(g))
    read = _read_in_core(H, h, p)
    if read is None:
        return FlowResult(False, obstruction=obstruction_diameter(space, r, E, 10), edge=E)
    q, loop, cv = read
    t = H.tree_word[cv]
    alpha = mul(q, inv(t))           # in A
    beta = mul(mul(t, loop), inv(t))  # in A
    a_src = near.preimage_element(alpha)
    b_src = near.preimage_element(beta)
    W = gog.group(far.vtype)
    head = W.mul(g_far, far_map.image(a_src))
    return FlowResult(True, Ray.make(far, head, far_map.image(b_src)), edge=E)


def flow_along_path(space: TreeOfSpaces, r: Ray, path: list) -> tuple[Ray | None, int]:
    """Flow r along consecutive tree vertices; returns (ray, failed step or -1)."""
    cur = r
    for k, (w1, w2) in enumerate(zip(path, path[1:])):
        verts, edges = space.tree.tree_geodesic(w1, w2)
        if len(edges) != 1:
            raise ValueError("path vertices must be adjacent")
        res = flowable(space, cur, edges[0][1])
        if not res.flowable:
            return None, k
        cur = res.ray
    return cur, -1


def obstruction_diameter(space: TreeOfSpaces, r: Ray, E: TreeEdge, R: int, D: int | None = None) -> int:
    """Fiber diameter of N_D(ray prefix of length R) cap (edge image coset)."""
    near, _, g, _, _ = _edge_side(space, r.anchor, E)
    V = space.gog.group(r.anchor.vtype)
    if D is None:
        D = obstruction_radius(near)
    pts = set()
    for n in range(R + 1):
        z0 = r.prefix(n)
        for y in V.ball(D):
            z = mul(z0, y)
            if near.contains(mul(inv(g), z)):
                pts.add(z)
    pts = sorted(pts)
    best = 0
    for i, x in enumerate(pts):
        for y in pts[i + 1:]:
            best = max(best, len(mul(inv(x), y)))
    return best


def obstruction_radius(near) -> int:
    """Max distance from a core vertex to the base along the core tree."""
    if near.mode != "free":
        return 1
    return max(len(w) for w in near.image_handle().tree_word)


def obstruction_bounded(space: TreeOfSpaces, r: Ray, E: TreeEdge, R1: int = 6, R2: int = 10) -> bool:
    return obstruction_diameter(space, r, E, R2) == obstruction_diameter(space, r, E, R1)


# -- fellow traveling ----------------------------------------------------------------
def ray_trace(r: Ray, R: int) -> list[SpacePoint]:
    return [ray_point(r, n) for n in range(R + 1)]


def trace_ball(space: TreeOfSpaces, rays, R: int, radius) -> SpaceBall:
    seeds = []
    for r in rays:
        seeds += ray_trace(r, R)
    return build_metric_ball(space, seeds, radius)


@dataclass(frozen=True)
class GapBounds:
    """Bounds on max_n d_X(r1(n), r2[0..R]) from a finite ball.

    Ball distances can only overestimate, so ``upper`` is sound; ``lower``
    is the largest trusted (hence exact) value.
    """
    lower: Fraction
    upper: Fraction
    trusted: bool

    @property
    def exact(self) -> bool:
        return self.trusted and self.lower == self.upper


def fellow_travel_check(r1: Ray, r2: Ray, R: int, ball: SpaceBall) -> GapBounds:
    """Gap of r1 from the trace of r2, both cut at R."""
    t2 = [ball.index[p] for p in ray_trace(r2, R)]
    d = dijkstra(ball.csr(), directed=False, indices=np.asarray(t2), min_only=True)
    ld = ball.leak_distance()
    floor = min(ld[i] for i in t2)
    lo, hi = 0.0, 0.0
    ok = True
    for p in ray_trace(r1, R):
        i = ball.index[p]
        hi = max(hi, d[i])
        if np.isfinite(d[i]) and d[i] <= ld[i] + floor:
            lo = max(lo, d[i])
        else:
            ok = False
    up = Fraction(int(hi), 2) if np.isfinite(hi) else None
    return GapBounds(Fraction(int(lo), 2), up, ok)


# -- limit proxies ---------------------------------------------------------------------
@dataclass
class LimitProxy:
    R: int
    points: list
    coset: tuple = EMPTY


def limit_proxy(H: stallings.SubgroupHandle, R: int, coset=EMPTY) -> LimitProxy:
    """Sphere of radius R in H's basis metric, pushed into the ambient group.

    With ``coset = x`` the points are x * h, the proxy of the coset xH.
    """
    n = H.subgroup_rank
    pts = []
    for w in sphere(n, R):
        pts.append(mul(coset, stallings.expand(w, H)))
    return LimitProxy(R, pts, tuple(coset))


def approach_depth(H: stallings.SubgroupHandle, x) -> int:
    """max over z in H of the common prefix length of x and z (read in the core)."""
    _, k = H.walk(x)
    return k


def hausdorff(points1, points2) -> int:
    def one(a, b):
        return max(min(len(mul(inv(p), q)) for q in b) for p in a)
    if not points1 or not points2:
        return 0
    return max(one(points1, points2), one(points2, points1))


# -- main theorem defect ------------------------------------------------------------------
@dataclass
class DefectReport:
    R: int
    max_defect: int | None
    witness: tuple | None
    pairs: int
    candidates: int
    D: Fraction
    vacuous: bool = False
    contrast: int | None = None

    def to_json(self, gog=None) -> dict:
        out = {"R": self.R, "max_defect": self.max_defect, "pairs": self.pairs,
               "candidates": self.candidates, "D": str(self.D), "vacuous": self.vacuous,
               "contrast_defect": self.contrast}
        if self.witness is not None and gog is not None:
            x, y = self.witness
            out["witness"] = [gog.group(x.locus.vtype).format(x.x),
                              gog.group(y.locus.vtype).format(y.x)]
        return out


def default_dconfig(D0) -> Fraction:
    return 2 * (1 + Fraction(D0))


def fellow_pairs(space: TreeOfSpaces, w1: TreeVertex, w2: TreeVertex, R: int, D,
                 ball: SpaceBall | None = None):
    """Trusted pairs (x, y) of fiber-sphere points over w1, w2 with d_X(x,y) <= D."""
    D = Fraction(D)
    if ball is None:
        ball = pair_ball(space, w1, w2, R, D)
    xs = [p for p in ball.nodes if p.locus == w1 and len(p.x) == R]
    ys = set(i for i, p in enumerate(ball.nodes) if p.locus == w2 and len(p.x) == R)
    if not xs or not ys:
        return [], ball, len(xs)
    lim = float(2 * D)
    rows = dijkstra(ball.csr(), directed=False,
                    indices=np.asarray([ball.index[p] for p in xs]), limit=lim)
    yidx = np.asarray(sorted(ys))
    out = []
    for r, p in enumerate(xs):
        i = ball.index[p]
        dj = rows[r, yidx]
        for j, d in zip(yidx, dj):
            if np.isfinite(d) and d <= lim and ball.trusted(i, int(j), d):
                out.append((p, ball.nodes[int(j)], Fraction(int(d), 2)))
    return out, ball, len(xs)


def image_ball(m, L: int) -> list:
    """Edge-group elements a with |m(a)| <= L (reduced core loops at the base)."""
    G = m.source
    if m.mode != "free":
        return list(G.ball(1))
    H = m.image_handle()
    out = []
    stack = [(0, EMPTY)]
    while stack:
        v, w = stack.pop()
        if v == 0:
            out.append(H.express(w))
        if len(w) == L:
            continue
        for x, u in H.adj[v].items():
            if w and w[-1] == -x:
                continue
            stack.append((u, w + (x,)))
    return sorted(set(out), key=G.key)


def pair_ball(space: TreeOfSpaces, w1: TreeVertex, w2: TreeVertex, R: int, D) -> SpaceBall:
    """Metric ball around the edge space between adjacent w1 and w2.

    Every path from the w1 fiber to the w2 fiber crosses that edge space, so
    a fiber-sphere point x with a partner within D lies within D of an edge
    point whose image has length <= R + D.  Radius D + 1 makes every such
    pair distance trusted.
    """
    verts, edges = space.tree.tree_geodesic(w1, w2)
    if len(edges) != 1:
        raise ValueError("fellow pair balls need adjacent vertices")
    E = edges[0][1]
    near = _edge_side(space, w1, E)[0]
    D = Fraction(D)
    g = E.r if E.o_vertex == w1 else E.s
    L = R + int(D) + len(g)
    seeds = [SpacePoint(E, a) for a in image_ball(near, L)]
    return build_metric_ball(space, seeds, D + 1)


def intersection_defect(space: TreeOfSpaces, w1: TreeVertex, w2: TreeVertex, R: int,
                        D=None, ball: SpaceBall | None = None, I=None,
                        contrast: bool = True) -> DefectReport:
    """Max over fellow-traveling pairs of R - depth of x toward the I-proxy."""
    gog = space.gog
    if D is None:
        from .tree_of_spaces import compute_D0
        D = default_dconfig(compute_D0(space))
    if w1 == w2:
        return DefectReport(R, 0, None, 0, 0, Fraction(D))
    V = gog.group(w1.vtype)
    if I is None:
        I = space.tree.path_stabilizer(w1, w2).local
    pairs, ball, ncand = fellow_pairs(space, w1, w2, R, D, ball)
    if not pairs:
        return DefectReport(R, None, None, 0, ncand, Fraction(D), vacuous=True)
    best = None
    for x, y, _ in pairs:
        dfx = R - _depth(V, I, x.x)
        if best is None or dfx > best[0]:
            best = (dfx, (x, y))
    triv = max(R - _depth(V, V.trivial(), x.x) for x, _, _ in pairs)
    return DefectReport(R, best[0], best[1], len(pairs), ncand, Fraction(D),
                        contrast=triv if contrast else None)


def _depth(V, I, x) -> int:
    if V.kind == "free":
        return approach_depth(I, x)
    return len(x) if I and x in I else 0


def trivial_defect(space, w1, w2, R, D=None, ball=None) -> DefectReport:
    """Same scan with the intersection replaced by the trivial subgroup."""
    V = space.gog.group(w1.vtype)
    return intersection_defect(space, w1, w2, R, D, ball, I=V.trivial(), contrast=False)


# -- witnesses ---------------------------------------------------------------------------
@dataclass
class WitnessReport:
    labels: list
    histogram: dict
    bucket: list               # indices of the largest bucket
    witnesses: list            # (k, h_k word, in I, fixes both vertices)
    starved: bool = False

    @property
    def all_verified(self) -> bool:
        return bool(self.witnesses) and all(a and b for _, _, a, b in self.witnesses)

    def to_json(self, V=None) -> dict:
        fmt = (lambda w: V.format(w)) if V is not None else str
        return {"bucket_size": len(self.bucket), "bucket": self.bucket,
                "histogram": {str(k): v for k, v in self.histogram.items()},
                "starved": self.starved,
                "witnesses": [{"k": k, "h": fmt(h), "in_I": a, "fixes_w1_w2": b}
                              for k, h, a, b in self.witnesses]}


def step_label(space: TreeOfSpaces, p: SpacePoint, q: SpacePoint):
    """Translation-invariant label of one ball edge."""
    if p.locus == q.locus:
        G = space.fiber_group(p.locus)
        return ("s", G.mul(G.inv(p.x), q.x))
    if p.is_vertex:
        return ("in", q.locus.eid, p.locus == q.locus.o_vertex)
    return ("out", p.locus.eid, q.locus == p.locus.o_vertex)


def path_label(space: TreeOfSpaces, path) -> tuple:
    return tuple(step_label(space, a, b) for a, b in zip(path, path[1:]))


def extract_witnesses(space: TreeOfSpaces, pairs, ball: SpaceBall, w1: TreeVertex,
                      w2: TreeVertex) -> WitnessReport:
    """Bucket pairs by geodesic label and test h_k = p_n1^-1 p_nk against G_w1 cap G_w2."""
    gog = space.gog
    labels = [path_label(space, ball.geodesic(p, q)) for p, q in pairs]
    hist = Counter(labels)
    top, size = max(hist.items(), key=lambda kv: (kv[1], -labels.index(kv[0])))
    bucket = [i for i, l in enumerate(labels) if l == top]
    rep_hist = {f"label{labels.index(l)}": c for l, c in hist.items()}
    if size < 2:
        return WitnessReport(labels, rep_hist, bucket, [], starved=True)
    stab = space.tree.path_stabilizer(w1, w2)
    V = gog.group(w1.vtype)
    p1 = pairs[bucket[0]][0]
    out = []
    for k in bucket[1:]:
        pk = pairs[k][0]
        h = V.mul(V.inv(p1.x), pk.x)
        # as an element of G fixing w1: rep (p1 h p1^-1) rep^-1 in ambient terms
        amb = gog.mul_all(space.ambient(p1), gog.vertex_path(w1.vtype, h),
                          gog.inv(space.ambient(p1)))
        in_I = stab.contains(amb)
        fixes = space.tree.stabilizes(amb, w1) and space.tree.stabilizes(amb, w2)
        out.append((k, h, in_I, fixes))
    return WitnessReport(labels, rep_hist, bucket, out)


# -- graph extension -------------------------------------------------------------------
def attach_subgroup(gog: GraphOfGroups, v: str, K: stallings.SubgroupHandle,
                    name: str | None = None) -> GraphOfGroups:
    """Add a vertex with group K and an edge K -> v including K into G_v."""
    if v not in gog.vindex:
        raise ValueError(f"unknown vertex {v!r}")
    V = gog.group(gog.vindex[v])
    if V.kind != "free":
        raise ValueError("attach_subgroup needs a free vertex group")
    if K.rank != V.rank:
        raise ValueError("subgroup lives in a different free group")
    doc = gog.to_config()
    base = name or f"{v}_K"
    taken = set(gog.vertices) | {e["name"] for e in doc["edges"]}
    while base in taken:
        base += "'"
    n = K.subgroup_rank
    knames = [f"k{i + 1}" for i in range(n)]
    cnames = [f"c{i + 1}" for i in range(n)]
    doc["vertices"].append({"name": base, "kind": "free", "generators": knames})
    ename = f"i_{base}"
    while ename in taken:
        ename += "'"
    doc["edges"].append({"name": ename, "o": v, "t": base,
                         "group": {"kind": "free", "generators": cnames},
                         "images_o": [V.format(b) for b in K.basis],
                         "images_t": list(knames)})
    doc["spanning_tree"] = list(doc["spanning_tree"]) + [ename]
    doc["name"] = (doc.get("name") or "gog") + f"+{base}"
    return GraphOfGroups.from_config(doc)


# -- reports ----------------------------------------------------------------------------
def defect_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["R", "max_defect", "contrast_defect", "pairs", "vacuous"])
    for r in rows:
        w.writerow([r.R, r.max_defect, r.contrast, r.pairs, int(r.vacuous)])
    return buf.getvalue()


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"


def axis_pairs(space: TreeOfSpaces, w1: TreeVertex, w2: TreeVertex, n: int):
    """Pairs (p_i, q_i), i = 1..n, attached to the edge points c^i between w1 and w2."""
    verts, edges = space.tree.tree_geodesic(w1, w2)
    if len(edges) != 1:
        raise ValueError("axis pairs need adjacent vertices")
    E = edges[0][1]
    G = space.gog.edge_group(E.eid)
    c = G.gen_elements()[0]
    out = []
    a = G.identity
    for _ in range(n):
        a = G.mul(a, c)
        po, pt = space.partners(SpacePoint(E, a))
        out.append((po, pt) if E.o_vertex == w1 else (pt, po))
    return out


def ray_periods(V, images) -> list[tuple[tuple, tuple]]:
    """Deterministic (head, period) specimens: edge images first, then generators."""
    specs = []
    for w in images:
        specs += [((), w), ((), inv(w))]
    gens = [(i,) for i in range(1, V.rank + 1)]
    for g in gens:
        specs += [((), g), ((), inv(g))]
    for g in gens:
        for h in gens:
            if g != h:
                specs.append(((), g + h))
                specs.append((g, h + inv(g)))
    for g in gens:
        for w in images:
            specs.append((g, w))
    seen = []
    for s in specs:
        if s not in seen:
            seen.append(s)
    return seen


def bundled_rays(space: TreeOfSpaces, count: int = 12):
    """``count`` rays over the free vertex types, with the edges they probe.

    Returns (Ray, TreeEdge) pairs, distinct whenever the space has that many.
    The base vertex type comes first and edges at the identity coset before
    edges at further coset reps (shortlex).  A group like Z has only two
    boundary points and a one-edge tree; there the distinct pairs repeat
    cyclically up to ``count``.
    """
    gog = space.gog
    free = [v for v in range(len(gog.vertices)) if gog.group(v).kind == "free"
            and gog.group(v).rank > 0]
    free.sort(key=lambda v: v != gog.base)
    out = []
    for v in free:
        W = space.tree.base_vertex(v)
        V = gog.group(v)
        ends = gog.edges_at(v)
        images = [gog.origin_map(e).image(c) for e in ends
                  if gog.origin_map(e).mode == "free" for c in gog.edge_group(e).gen_elements()]
        specs = ray_periods(V, images)
        for c in V.ball(4):
            for h, p in specs:
                for e in ends:
                    item = (Ray.make(W, h, p), space.tree.edge_at(W, c, e))
                    if item not in out:
                        out.append(item)
                    if len(out) == count:
                        return out
    return [out[k % len(out)] for k in range(count)] if out else []


def companion_ray(space: TreeOfSpaces, r: Ray, E: TreeEdge) -> Ray | None:
    """A reference ray across E: the flowed ray, or a generator ray in the far fiber."""
    f = flowable(space, r, E)
    if f.flowable:
        return f.ray
    far = E.other(r.anchor)
    V = space.gog.group(far.vtype)
    if V.kind != "free" or V.rank == 0:
        return None
    return Ray.make(far, (), V.gen_elements()[0])


def gap_profile(space: TreeOfSpaces, r1: Ray, r2: Ray, radii=(6, 8, 10),
                ball_radius: int = 3) -> dict:
    """GapBounds for each cut-off R, from one trace ball around both rays."""
    ball = trace_ball(space, [r1, r2], max(radii), ball_radius)
    return {R: fellow_travel_check(r1, r2, R, ball) for R in radii}


def divergence_certificate(space: TreeOfSpaces, r1: Ray, r2: Ray, R1: int = 6,
                           R2: int = 10, margin: int = 2, radii=(3, 4, 5)):
    """Grow the trace ball until lower(R2) >= upper(R1) + margin is decided.

    Returns (certified, GapBounds at R1, GapBounds at R2, ball radius used).
    """
    g1 = g2 = None
    for rad in radii:
        ball = trace_ball(space, [r1, r2], R2, rad)
        g1 = fellow_travel_check(r1, r2, R1, ball)
        g2 = fellow_travel_check(r1, r2, R2, ball)
        if g1.upper is not None and g2.lower >= g1.upper + margin:
            return True, g1, g2, rad
        if g1.exact and g2.exact:
            return False, g1, g2, rad
    return False, g1, g2, radii[-1]
