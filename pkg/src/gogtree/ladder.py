"""Ladders B(lambda) over subtrees of the Bass-Serre tree and their retraction.

Segments live in vertex fibers and are stored by their endpoint pair (local
coordinates).  Fibers are free (Cayley trees) or finite (diameter <= 1), so
fiber geodesics and nearest-point projections are exact.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse.csgraph import dijkstra

from . import stallings
from .bass_serre import TreeEdge, TreeVertex
from .ledger import ConstantsLedger
from .tree_of_spaces import SpaceBall, SpacePoint, TreeOfSpaces, build_metric_ball
from .words import geodesic_path, inv, mul, project_to_segment


@dataclass
class Admission:
    parent: TreeVertex
    edge: TreeEdge
    child: TreeVertex
    diameter: int
    admitted: bool
    points: int


@dataclass
class Ladder:
    space: TreeOfSpaces
    origin: TreeVertex
    D0: int
    D1: int
    depth: int
    segments: dict                  # TreeVertex -> (x, y)
    parent: dict                    # TreeVertex -> (TreeEdge, TreeVertex) | None
    level: dict                     # TreeVertex -> depth
    diagnostics: list = field(default_factory=list)

    @property
    def T1(self) -> list[TreeVertex]:
        return list(self.segments)

    def segment_points(self, w: TreeVertex) -> list:
        x, y = self.segments[w]
        return fiber_segment(self.space.gog.group(w.vtype), x, y)

    def points(self) -> list[SpacePoint]:
        out = []
        for w in self.segments:
            out += [SpacePoint(w, z) for z in self.segment_points(w)]
        return out

    def contains(self, p: SpacePoint) -> bool:
        if not p.is_vertex or p.locus not in self.segments:
            return False
        return p.x in set(self.segment_points(p.locus))

    def to_json(self) -> dict:
        gog = self.space.gog
        segs = []
        for w, (x, y) in self.segments.items():
            V = gog.group(w.vtype)
            par = self.parent[w]
            segs.append({"vertex": gog.format_path(w.rep), "type": gog.vertices[w.vtype],
                         "depth": self.level[w], "x": V.format(x), "y": V.format(y),
                         "length": V.length(V.mul(V.inv(x), y)),
                         "parent": None if par is None else gog.format_path(par[1].rep)})
        diag = [{"parent": gog.format_path(d.parent.rep), "edge": gog.edge_name(d.edge.eid),
                 "child": gog.format_path(d.child.rep), "diameter": d.diameter,
                 "points": d.points, "admitted": d.admitted} for d in self.diagnostics]
        return {"origin": gog.format_path(self.origin.rep), "D0": self.D0, "D1": self.D1,
                "depth": self.depth, "T1_size": len(self.segments),
                "segments": segs, "admissions": diag}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def fiber_segment(V, x, y) -> list:
    if V.kind == "free":
        return geodesic_path(x, y)
    return [x] if x == y else [x, y]


def fiber_neighborhood(V, pts, D: int) -> list:
    """All fiber elements within distance D of a point of ``pts``, deterministic order."""
    seen = set()
    out = []
    for p in pts:
        for y in V.ball(D):
            z = V.mul(p, y)
            if z not in seen:
                seen.add(z)
                out.append(z)
    return out


def _diameter_pair(V, pts):
    """Endpoints realizing the fiber diameter, shortlex tie-break on (x, y)."""
    best = None
    keyed = sorted(pts, key=V.key)
    for i, x in enumerate(keyed):
        for y in keyed[i:]:
            d = V.length(V.mul(V.inv(x), y))
            cand = (-d, V.key(x), V.key(y))
            if best is None or cand < best[0]:
                best = (cand, x, y, d)
    return best[1], best[2], best[3]


def build_ladder(space: TreeOfSpaces, origin: TreeVertex, x, y, ledger: ConstantsLedger,
                 depth: int) -> Ladder:
    """Sphere-by-sphere construction of B(lambda) from lambda = [x, y] over origin.

    An outgoing tree edge is admitted when the part of its edge-space image
    inside the D0-neighborhood of the current segment has fiber diameter at
    least D1.  The endpoints of maximal fiber distance are pushed across.
    """
    D0 = ledger.get("D0")
    D1 = ledger.get("D1")
    if D0 is None or D1 is None:
        raise ValueError("D0 and D1 must be recorded in the ledger")
    D0i = int(Fraction(D0))
    gog = space.gog
    segments = {origin: (x, y)}
    parent = {origin: None}
    level = {origin: 0}
    diagnostics = []
    frontier = [origin]
    for n in range(depth):
        nxt = []
        for w in frontier:
            V = gog.group(w.vtype)
            sx, sy = segments[w]
            nbhd = fiber_neighborhood(V, fiber_segment(V, sx, sy), D0i)
            back = parent[w][0] if parent[w] is not None else None
            groups = {}
            for z in nbhd:
                p = SpacePoint(w, z)
                for eid in gog.edges_at(w.vtype):
                    q = space.attach(p, eid)
                    if q.locus == back:
                        continue
                    groups.setdefault(q.locus, []).append((z, q))
            for E, items in groups.items():
                child = E.other(w)
                pts = [z for z, _ in items]
                if len(pts) == 1:
                    diam = 0
                    a, b = pts[0], pts[0]
                else:
                    a, b, diam = _diameter_pair(V, pts)
                ok = diam >= D1
                diagnostics.append(Admission(w, E, child, diam, ok, len(pts)))
                if not ok or child in segments:
                    continue
                lookup = dict(items)
                ends = []
                for z in (a, b):
                    po, pt = space.partners(lookup[z])
                    ends.append((pt if E.o_vertex == w else po).x)
                segments[child] = (ends[0], ends[1])
                parent[child] = (E, w)
                level[child] = n + 1
                nxt.append(child)
        frontier = nxt
    return Ladder(space, origin, D0i, D1, depth, segments, parent, level, diagnostics)


# -- retraction -------------------------------------------------------------------
def _fiber_projection(V, z, x, y):
    if V.kind == "free":
        return project_to_segment(z, x, y)
    seg = fiber_segment(V, x, y)
    if z in seg:
        return z
    return min(seg, key=V.key)


def _coset_projection(space: TreeOfSpaces, w: TreeVertex, E: TreeEdge, x, y):
    """Shortlex-least point of the projection of E's image in w's fiber onto [x, y]."""
    gog = space.gog
    V = gog.group(w.vtype)
    if E.o_vertex == w:
        m, r = gog.origin_map(E.eid), E.r
    else:
        m, r = gog.terminus_map(E.eid), E.s
    if V.kind == "free":
        z = mul(inv(x), y)
        H = m.image_handle()
        ks = stallings.projection_set(H, mul(inv(x), r), z)
        return min((mul(x, z[:k]) for k in ks), key=V.key)
    coset = [V.mul(r, h) for h in m.image_handle()]
    seg = fiber_segment(V, x, y)
    best = min(min(V.length(V.mul(V.inv(c), s)) for c in coset) for s in seg)
    near = [s for s in seg if min(V.length(V.mul(V.inv(c), s)) for c in coset) == best]
    return min(near, key=V.key)


def retract(L: Ladder, p: SpacePoint) -> SpacePoint:
    space = L.space
    tree = space.tree
    if not p.is_vertex:
        E = p.locus
        po, pt = space.partners(p)
        if E.o_vertex in L.segments or E.t_vertex not in L.segments:
            p = po
        else:
            p = pt
    w = p.locus
    V = space.gog.group(w.vtype)
    if w in L.segments:
        x, y = L.segments[w]
        return SpacePoint(w, _fiber_projection(V, p.x, x, y))
    verts, edges = tree.tree_geodesic(L.origin, w)
    k = max(i for i, u in enumerate(verts) if u in L.segments)
    w1 = verts[k]
    E = edges[k][1]
    x, y = L.segments[w1]
    return SpacePoint(w1, _coset_projection(space, w1, E, x, y))


# -- measurement ------------------------------------------------------------------
@dataclass
class RetractionReport:
    pairs: list                 # (dX(x,y), dX(Px,Py)) as Fractions
    A: Fraction
    B: Fraction
    max_violation: Fraction
    skipped: int
    seed: int

    def covers(self, A=None, B=None) -> bool:
        A = self.A if A is None else A
        B = self.B if B is None else B
        return all(dp <= A * d + B for d, dp in self.pairs)

    def to_json(self) -> dict:
        return {"A": str(self.A), "B": str(self.B), "samples": len(self.pairs),
                "skipped_untrusted": self.skipped, "seed": self.seed,
                "max_violation": str(self.max_violation),
                "pairs": [[str(d), str(dp)] for d, dp in self.pairs]}


def fit_lipschitz(pairs) -> tuple[Fraction, Fraction]:
    """Minimal A + B with A >= 1 and dP <= A d + B on every pair."""
    if not pairs:
        return Fraction(1), Fraction(0)
    slopes = {Fraction(1)}
    for d1, p1 in pairs:
        for d2, p2 in pairs:
            if d2 > d1 and p2 > p1:
                s = Fraction(p2 - p1) / (d2 - d1)
                if s > 1:
                    slopes.add(s)
    best = None
    for A in sorted(slopes):
        B = max(max(dp - A * d for d, dp in pairs), Fraction(0))
        if best is None or A + B < best[0] + best[1]:
            best = (A, B)
    return best


def ladder_ball(L: Ladder, radius: int = 4) -> SpaceBall:
    return build_metric_ball(L.space, L.points(), radius)


def _trusted_rows(ball: SpaceBall, idx):
    return dijkstra(ball.csr(), directed=False, indices=np.asarray(idx, dtype=np.int64))


def _sample_trusted_pairs(ball: SpaceBall, sources, rng, pool=None):
    """For each source i pick j != i whose ball distance from i is trusted."""
    ld = ball.leak_distance()
    D = _trusted_rows(ball, sources)
    out = []
    allowed = None if pool is None else np.zeros(ball.n, dtype=bool)
    if pool is not None:
        allowed[pool] = True
    for r, i in enumerate(sources):
        ok = np.isfinite(D[r]) & (D[r] <= ld[i] + ld) & (D[r] > 0)
        if allowed is not None:
            ok &= allowed
        cand = np.flatnonzero(ok)
        if len(cand):
            j = int(cand[rng.randrange(len(cand))])
            out.append((i, j, D[r, j]))
    return out


def measure_retraction(L: Ladder, ball: SpaceBall, samples: int, seed: int,
                       ledger: ConstantsLedger | None = None) -> RetractionReport:
    """Sample trusted pairs (x, y) and record (d(x,y), d(P x, P y))."""
    rng = random.Random(seed)
    nodes = ball.nodes
    ld = ball.leak_distance()
    inner = [i for i in range(ball.n) if ld[i] >= 2]
    pairs = []
    skipped = 0
    if inner:
        src = [rng.choice(inner) for _ in range(samples)]
        chosen = _sample_trusted_pairs(ball, src, rng)
        skipped += samples - len(chosen)
        P = {}
        for i, j, _ in chosen:
            for k in (i, j):
                if k not in P:
                    P[k] = ball.index.get(retract(L, nodes[k]), -1)
        srcP = sorted({P[i] for i, _, _ in chosen if P[i] >= 0})
        rowP = {k: r for r, k in enumerate(srcP)}
        DP = _trusted_rows(ball, srcP) if srcP else None
        for i, j, d in chosen:
            pi, pj = P[i], P[j]
            if pi < 0 or pj < 0:
                skipped += 1
                continue
            dp = DP[rowP[pi], pj]
            if not (np.isfinite(dp) and ball.trusted(pi, pj, dp)):
                skipped += 1
                continue
            pairs.append((Fraction(int(d), 2), Fraction(int(dp), 2)))
    A, B = fit_lipschitz(pairs)
    viol = max((dp - A * d - B for d, dp in pairs), default=Fraction(0))
    if ledger is not None:
        ledger.record("A", A, "measured", f"retraction slope, {len(pairs)} trusted pairs")
        ledger.record("B", B, "measured", "retraction additive constant")
    return RetractionReport(pairs, A, B, viol, skipped, seed)


def measure_quasiconvexity(L: Ladder, ball: SpaceBall, samples: int, seed: int,
                           ledger: ConstantsLedger | None = None) -> dict:
    """Max trusted distance from points of sampled ball geodesics to B(lambda)."""
    rng = random.Random(seed)
    lad = [ball.index[p] for p in L.points() if p in ball.index]
    to_set = dijkstra(ball.csr(), directed=False, indices=np.asarray(lad), min_only=True)
    ld = ball.leak_distance()
    C = Fraction(0)
    used = skipped = 0
    history = []
    srcs = [rng.choice(lad) for _ in range(samples)]
    chosen = _sample_trusted_pairs(ball, srcs, rng, pool=lad)
    skipped = samples - len(chosen)
    for i, j, _ in chosen:
        _, pred = dijkstra(ball.csr(), directed=False, indices=i, return_predecessors=True)
        k = j
        while k != i and k >= 0:
            if to_set[k] <= ld[k]:
                C = max(C, Fraction(int(to_set[k]), 2))
            k = int(pred[k])
        used += 1
        history.append(C)
    if ledger is not None:
        ledger.record("C", C, "measured", f"ladder quasiconvexity over {used} trusted geodesics")
    return {"C_measured": C, "used": used, "skipped": skipped, "seed": seed,
            "history": [str(c) for c in history]}
