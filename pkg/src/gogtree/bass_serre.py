"""Lazy exploration of the Bass-Serre tree.

A tree vertex gG_v is keyed by the canonical path from the base vertex to v
(normal form of g p_v with the trailing syllable dropped).  A tree edge is
keyed by its positive orientation: the origin vertex P, the canonical left
coset representative r of the edge image at o(e), and the edge id.  Its
terminal vertex and the syllable s with P r e = P_t s are cached.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .graph_of_groups import GraphOfGroups, Path


class TreeVertex(NamedTuple):
    vtype: int
    rep: Path


@dataclass(frozen=True)
class TreeEdge:
    eid: int                 # positive edge id
    o_vertex: TreeVertex
    r: object                # canonical left coset rep at o(e)
    t_vertex: TreeVertex = field(compare=False)
    s: object = field(compare=False)   # P_o r e = P_t s

    def endpoints(self) -> tuple[TreeVertex, TreeVertex]:
        return self.o_vertex, self.t_vertex

    def other(self, w: TreeVertex) -> TreeVertex:
        return self.t_vertex if w == self.o_vertex else self.o_vertex


class BassSerreTree:
    """Tree operations for a fixed graph of groups."""

    def __init__(self, gog: GraphOfGroups):
        self.gog = gog

    # -- vertices and edges ---------------------------------------------------
    def vertex_of_path(self, p: Path) -> tuple[TreeVertex, object]:
        """Tree vertex of the coset p G_end and the trailing syllable of p."""
        rep, h = self.gog.strip_last(p)
        return TreeVertex(self.gog.end(p), rep), h

    def vertex(self, g: Path, v: int) -> TreeVertex:
        """The tree vertex gG_v for g in G."""
        return TreeVertex(v, self.gog.coset_rep(g, v))

    def base_vertex(self, v: int | None = None) -> TreeVertex:
        gog = self.gog
        return self.vertex(gog.identity(), gog.base if v is None else v)

    def _positive_edge(self, P: TreeVertex, g, eid: int) -> TreeEdge:
        gog = self.gog
        if eid < 0:
            far, s = self.vertex_of_path(gog.mul(P.rep, gog.reduce(
                P.vtype, [("v", g), ("e", eid)])))
            return self._positive_edge(far, s, -eid)
        r, _ = gog.origin_map(eid).split(g)
        Q = gog.reduce(P.vtype, [("v", r), ("e", eid)])
        far, s = self.vertex_of_path(gog.mul(P.rep, Q))
        return TreeEdge(eid, P, r, far, s)

    def edge_at(self, w: TreeVertex, g, eid: int) -> TreeEdge:
        """The tree edge leaving w through Y-edge eid, in coset g A_(eid,o)."""
        if self.gog.o(eid) != w.vtype:
            raise ValueError("edge does not start at this vertex type")
        return self._positive_edge(w, g, eid)

    def edge_from_path(self, X: Path, g, eid: int) -> TreeEdge:
        """Edge through eid at the vertex of X, for the element (X g) of that fiber."""
        w, h = self.vertex_of_path(self.gog.mul(X, self.gog.vertex_path(self.gog.end(X), g)))
        return self.edge_at(w, h, eid)

    def edge_path(self, edge: TreeEdge) -> Path:
        """P_o r e: a path whose last edge crosses this tree edge."""
        gog = self.gog
        return gog.mul(edge.o_vertex.rep, gog.reduce(edge.o_vertex.vtype,
                                                     [("v", edge.r), ("e", edge.eid)]))

    def incident_edges(self, w: TreeVertex, L: int, anchor=None):
        """Edges at w whose coset rep (relative to anchor) has length <= L.

        Returns (list of (oriented eid, TreeEdge, opposite vertex, rep), truncated).
        With ``anchor = c`` in G_(w.vtype) the reps enumerated are c * r, which
        makes the enumeration equivariant: translating w moves the anchor.
        """
        gog = self.gog
        V = gog.group(w.vtype)
        out = []
        truncated = False
        for eid in gog.edges_at(w.vtype):
            reps, trunc = gog.origin_map(eid).coset_reps(L)
            truncated |= trunc
            seen = set()
            for r in reps:
                g = r if anchor is None else V.mul(anchor, r)
                edge = self.edge_at(w, g, eid)
                if edge in seen:
                    continue
                seen.add(edge)
                out.append((eid, edge, edge.other(w), g))
        return out, truncated

    # -- geodesics and action ---------------------------------------------------
    def tree_geodesic(self, w1: TreeVertex, w2: TreeVertex):
        """Vertices and edges of the unique tree path from w1 to w2."""
        gog = self.gog
        Q = gog.mul(gog.inv(w1.rep), w2.rep)
        verts = [w1]
        edges = []
        X = w1.rep
        for i, e in enumerate(Q.edges):
            edge = self.edge_from_path(X, Q.syl[i], e)
            edges.append((e, edge))
            X = gog.mul(X, gog.reduce(gog.end(X), [("v", Q.syl[i]), ("e", e)]))
            verts.append(self.vertex_of_path(X)[0])
        return verts, edges

    def distance(self, w1: TreeVertex, w2: TreeVertex) -> int:
        gog = self.gog
        return len(gog.mul(gog.inv(w1.rep), w2.rep).edges)

    def act(self, g: Path, x):
        gog = self.gog
        if isinstance(x, TreeVertex):
            return self.vertex_of_path(gog.mul(g, x.rep))[0]
        if isinstance(x, TreeEdge):
            return self.edge_from_path(gog.mul(g, x.o_vertex.rep), x.r, x.eid)
        raise TypeError(f"cannot act on {type(x).__name__}")

    def stabilizes(self, g: Path, w: TreeVertex) -> bool:
        return self.act(g, w) == w

    # -- stabilizers -----------------------------------------------------------
    def path_stabilizer(self, w1: TreeVertex, w2: TreeVertex) -> "PathStabilizer":
        """G_w1 cap G_w2, as a subgroup S of G_(w1.vtype) with w1.rep S w1.rep^-1."""
        gog = self.gog
        Q = gog.mul(gog.inv(w1.rep), w2.rep)
        V0 = gog.group(w1.vtype)
        S = V0.full()
        stack = []
        v = w1.vtype
        for i, e in enumerate(Q.edges):
            V = gog.group(v)
            q = Q.syl[i]
            mo, mt = gog.origin_map(e), gog.terminus_map(e)
            S = V.sub_intersect(V.sub_conjugate(S, V.inv(q)), mo.image_handle())
            S = mt.image_subgroup(mo.preimage_subgroup(S))
            stack.append((e, q))
            v = gog.t(e)
        for e, q in reversed(stack):
            mo, mt = gog.origin_map(e), gog.terminus_map(e)
            S = mo.image_subgroup(mt.preimage_subgroup(S))
            S = gog.group(gog.o(e)).sub_conjugate(S, q)
        return PathStabilizer(gog, w1, S)


@dataclass
class PathStabilizer:
    gog: GraphOfGroups
    w1: TreeVertex
    local: object            # subgroup of the vertex group at w1.vtype

    @property
    def group(self):
        return self.gog.group(self.w1.vtype)

    def local_element(self, g: Path):
        """x with g = rep x rep^-1 when g fixes w1, else None."""
        gog = self.gog
        rep = self.w1.rep
        h = gog.mul_all(gog.inv(rep), g, rep)
        if h.edges:
            return None
        return h.syl[0]

    def contains(self, g: Path) -> bool:
        x = self.local_element(g)
        return x is not None and self.group.sub_contains(self.local, x)

    def contains_local(self, x) -> bool:
        return self.group.sub_contains(self.local, x)

    def generators(self) -> list[Path]:
        gog = self.gog
        rep = self.w1.rep
        return [gog.mul_all(rep, gog.vertex_path(self.w1.vtype, x), gog.inv(rep))
                for x in self.group.sub_gens(self.local)]

    def describe(self) -> str:
        V = self.group
        gens = [V.format(x) for x in V.sub_gens(self.local)]
        conj = self.gog.format_path(self.w1.rep)
        return f"{conj} <{', '.join(gens)}> {conj}^-1"


@dataclass
class TreeBall:
    center: TreeVertex
    radius: int
    budget: int
    vertices: dict            # TreeVertex -> depth
    parent: dict              # TreeVertex -> (TreeEdge, parent vertex) | None
    edges: list
    truncated: dict           # TreeVertex -> bool
    cycles: int = 0

    def is_tree(self) -> bool:
        return self.cycles == 0 and len(self.edges) == len(self.vertices) - 1

    def neighbors(self, w: TreeVertex) -> list[TreeVertex]:
        out = []
        for e in self.edges:
            if e.o_vertex == w:
                out.append(e.t_vertex)
            elif e.t_vertex == w:
                out.append(e.o_vertex)
        return out

    def adjacency(self) -> dict:
        adj = {w: [] for w in self.vertices}
        for e in self.edges:
            adj[e.o_vertex].append(e.t_vertex)
            adj[e.t_vertex].append(e.o_vertex)
        return adj

    def stats(self) -> dict:
        deg = {}
        for nbrs in self.adjacency().values():
            deg[len(nbrs)] = deg.get(len(nbrs), 0) + 1
        return {"radius": self.radius, "budget": self.budget,
                "vertices": len(self.vertices), "edges": len(self.edges),
                "is_tree": self.is_tree(),
                "degree_histogram": {str(k): deg[k] for k in sorted(deg)},
                "truncated_vertices": sum(1 for t in self.truncated.values() if t)}


def build_tree_ball(tree: BassSerreTree, center: TreeVertex, radius: int,
                    budget: int) -> TreeBall:
    """Tree ball explored by BFS.

    ``budget`` bounds the total word length of the coset representatives
    spent along the path from the center, so the ball stays finite when
    edge images have infinite index.
    """
    vertices = {center: 0}
    spent = {center: 0}
    parent = {center: None}
    edges = []
    truncated = {}
    cycles = 0
    queue = deque([center])
    gog = tree.gog
    while queue:
        w = queue.popleft()
        if vertices[w] == radius:
            truncated[w] = bool(gog.edges_at(w.vtype))
            continue
        room = budget - spent[w]
        inc, trunc = tree.incident_edges(w, room)
        truncated[w] = trunc
        V = gog.group(w.vtype)
        for eid, edge, far, g in inc:
            if parent[w] is not None and parent[w][0] == edge:
                continue
            if far in vertices:
                cycles += 1
                continue
            cost = V.length(g)
            vertices[far] = vertices[w] + 1
            spent[far] = spent[w] + cost
            parent[far] = (edge, w)
            edges.append(edge)
            queue.append(far)
    return TreeBall(center, radius, budget, vertices, parent, edges, truncated, cycles)


def tree_ball_dot(tree: BassSerreTree, ball: TreeBall) -> str:
    gog = tree.gog
    palette = ["lightblue", "lightpink", "palegreen", "khaki", "plum", "lightgrey"]
    ids = {w: i for i, w in enumerate(ball.vertices)}
    lines = ["graph tree {", "  node [style=filled];"]
    for w, i in ids.items():
        label = gog.format_path(w.rep).replace('"', "'")
        color = palette[w.vtype % len(palette)]
        lines.append(f'  n{i} [label="{label} | {gog.vertices[w.vtype]}", fillcolor={color}];')
    for e in ball.edges:
        lines.append(f'  n{ids[e.o_vertex]} -- n{ids[e.t_vertex]} [label="{gog.edge_name(e.eid)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def tree_ball_json(tree: BassSerreTree, ball: TreeBall) -> dict:
    gog = tree.gog
    return {"stats": ball.stats(),
            "vertices": [{"rep": gog.format_path(w.rep), "type": gog.vertices[w.vtype],
                          "depth": d, "truncated": ball.truncated.get(w, False)}
                         for w, d in ball.vertices.items()],
            "edges": [{"edge": gog.edge_name(e.eid), "o": gog.format_path(e.o_vertex.rep),
                       "t": gog.format_path(e.t_vertex.rep)} for e in ball.edges]}


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
