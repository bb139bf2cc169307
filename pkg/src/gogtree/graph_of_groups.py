"""Graphs of groups, their fundamental group, and reduced normal forms.

Elements of the fundamental group are handled as paths in the fundamental
groupoid: ``g0 e1 g1 ... en gn`` with ``gi`` in the vertex group at the i-th
vertex of an edge path in Y.  Group elements are the paths that start and end
at the base vertex; spanning-tree edges appear explicitly as syllables, which
is what lets the same normal form address Bass-Serre tree vertices.

Normal form: every syllable before an edge ``e`` is the canonical
representative of its left coset modulo the image of the edge group at the
origin of ``e``; the remainder is pushed through ``e``.  With that choice
reduced sequences are unique, so equality is tuple equality.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .groups import EdgeMap, FiniteSpec, FreeSpec, spec_from_config
from .stallings import NotInjective


class Path(NamedTuple):
    """A reduced sequence g0 e1 g1 ... en gn starting at vertex ``start``.

    Edges are signed ids: ``k+1`` is the k-th configured edge, ``-(k+1)`` its
    reverse.  Vertices are indices into ``GraphOfGroups.vertices``.
    """

    start: int
    syl: tuple
    edges: tuple = ()

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass
class OrientedGraph:
    """An oriented graph (V, E, o, t, bar) with explicit reverse map."""

    V: list
    E: list
    o: dict
    t: dict
    bar: dict

    def problems(self) -> list[tuple[str, str]]:
        out = []
        for e in self.E:
            b = self.bar.get(e)
            if b is None or b not in self.o:
                out.append(("oriented-graph", f"edge {e!r} has no reverse edge"))
                continue
            if b == e:
                out.append(("oriented-graph", f"edge {e!r} is its own reverse"))
            if self.bar.get(b) != e:
                out.append(("oriented-graph", f"bar is not an involution at {e!r}"))
            if self.o[b] != self.t[e] or self.t[b] != self.o[e]:
                out.append(("oriented-graph", f"o/t of reverse of {e!r} are inconsistent"))
            if self.o[e] not in self.V or self.t[e] not in self.V:
                out.append(("oriented-graph", f"edge {e!r} has an unknown endpoint"))
        if self.V:
            seen = {self.V[0]}
            queue = deque([self.V[0]])
            while queue:
                u = queue.popleft()
                for e in self.E:
                    if self.o[e] == u and self.t.get(e) not in seen and self.t.get(e) in self.V:
                        seen.add(self.t[e])
                        queue.append(self.t[e])
            if len(seen) != len(self.V):
                out.append(("oriented-graph", "graph is not connected"))
        return out


@dataclass
class Check:
    clause: str
    ok: bool
    message: str


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def add(self, clause, ok, message):
        self.checks.append(Check(clause, bool(ok), message))

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def to_json(self) -> dict:
        return {"ok": self.ok,
                "checks": [{"clause": c.clause, "ok": c.ok, "message": c.message}
                           for c in self.checks]}


class InvalidGraphOfGroups(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        msgs = "; ".join(f"[{c.clause}] {c.message}" for c in report.failures())
        super().__init__(msgs)


@dataclass
class Presentation:
    generators: list
    relators: list            # words over generator indices (signed, 1-based)
    families: list            # family number (1..4) per relator

    def format_relator(self, w) -> str:
        parts = []
        for x in w:
            name = self.generators[abs(x) - 1]
            parts.append(name if x > 0 else f"{name}^-1")
        return " ".join(parts) if parts else "1"

    def to_text(self) -> str:
        lines = ["generators: " + ", ".join(self.generators)]
        for fam, r in zip(self.families, self.relators):
            lines.append(f"({fam}) {self.format_relator(r)}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"generators": list(self.generators),
                "relators": [{"family": f, "word": self.format_relator(r)}
                             for f, r in zip(self.families, self.relators)]}


class GraphOfGroups:
    """A finite graph of free and finite groups with a chosen spanning tree."""

    def __init__(self, vertices, vgroups, edges, tree=None, base=None,
                 metadata=None, name="", bars=None):
        # vertices: list of names; vgroups: name -> spec
        # edges: list of dicts {name, o, t, group (spec), images_o, images_t}
        self.name = name
        self.vertices = list(vertices)
        self.vindex = {v: i for i, v in enumerate(self.vertices)}
        self.vgroups = [vgroups[v] for v in self.vertices]
        self.edge_defs = list(edges)
        self.bars = dict(bars or {})
        self.metadata = dict(metadata or {})
        self.base = self.vindex[base] if base is not None else self.vindex[min(self.vertices)]
        self.report = ValidationReport()
        self._maps_o: list = []
        self._maps_t: list = []
        self._structural_checks()
        self.tree_names = list(tree) if tree is not None else self._default_tree()
        self._tree_checks()
        self._build_maps()
        if not self.report.ok:
            raise InvalidGraphOfGroups(self.report)
        self._tree_paths()

    # -- construction -----------------------------------------------------
    def oriented_graph(self) -> OrientedGraph:
        E, o, t, bar = [], {}, {}, {}
        for ed in self.edge_defs:
            n = ed["name"]
            b = self.bars.get(n, n + "~")
            E += [n, b] if b != n else [n]
            o[n], t[n] = ed["o"], ed["t"]
            if b != n:
                o[b], t[b] = ed["t"], ed["o"]
            bar[n], bar[b] = b, n
        return OrientedGraph(list(self.vertices), E, o, t, bar)

    def _structural_checks(self):
        rep = self.report
        probs = self.oriented_graph().problems()
        for clause, msg in probs:
            rep.add(clause, False, msg)
        if not probs:
            rep.add("oriented-graph", True, "o(bar e)=t(e), t(bar e)=o(e), bar bar e=e, bar e != e; Y connected")
        names = [ed["name"] for ed in self.edge_defs]
        rep.add("edge-maps", len(set(names)) == len(names), "edge names are distinct")
        rep.add("edge-groups", True, "G_e = G_(bar e): one group per unoriented edge")
        rep.add("edge-maps-reverse", True,
                "phi_(e,o(e)) = phi_(bar e,t(bar e)) and phi_(e,t(e)) = phi_(bar e,o(bar e)) by construction")

    def _default_tree(self):
        seen = {self.vertices[self.base]}
        tree = []
        queue = deque([self.vertices[self.base]])
        while queue:
            u = queue.popleft()
            for ed in self.edge_defs:
                for a, b in ((ed["o"], ed["t"]), (ed["t"], ed["o"])):
                    if a == u and b not in seen:
                        seen.add(b)
                        tree.append(ed["name"])
                        queue.append(b)
        return tree

    def _tree_checks(self):
        names = {ed["name"]: ed for ed in self.edge_defs}
        ok = all(n in names for n in self.tree_names)
        self.report.add("spanning-tree", ok, "spanning tree edges exist")
        if not ok:
            self.tree_idx = set()
            return
        parent = {v: v for v in self.vertices}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        acyclic = True
        for n in self.tree_names:
            a, b = find(names[n]["o"]), find(names[n]["t"])
            if a == b:
                acyclic = False
            parent[a] = b
        spanning = len({find(v) for v in self.vertices}) == 1
        self.report.add("spanning-tree", acyclic, "T is acyclic")
        self.report.add("spanning-tree", spanning, "T spans V(Y)")
        self.tree_idx = {i for i, ed in enumerate(self.edge_defs) if ed["name"] in self.tree_names}

    def _build_maps(self):
        for ed in self.edge_defs:
            G = ed["group"]
            mo = mt = None
            for side in ("o", "t"):
                V = self.vgroups[self.vindex[ed[side]]]
                try:
                    m = EdgeMap(G, V, ed["images_" + side])
                    self.report.add("edge-maps", True,
                                    f"phi_({ed['name']},{side}) is injective")
                    if V.kind == "free":
                        self.report.add(
                            "quasiconvex-image", True,
                            f"phi_({ed['name']},{side}) image is quasiconvex "
                            f"(core diameter {m.quasiconvexity_witness()})")
                except (NotInjective, ValueError) as exc:
                    m = None
                    self.report.add("edge-maps", False,
                                    f"phi_({ed['name']},{side}) is not an injective homomorphism: {exc}")
                if side == "o":
                    mo = m
                else:
                    mt = m
            self._maps_o.append(mo)
            self._maps_t.append(mt)

    def _tree_paths(self):
        # p_v: tree edge path from base to v
        paths = {self.base: ()}
        queue = deque([self.base])
        while queue:
            u = queue.popleft()
            for k in sorted(self.tree_idx):
                for eid in (k + 1, -(k + 1)):
                    if self.o(eid) == u and self.t(eid) not in paths:
                        paths[self.t(eid)] = paths[u] + (eid,)
                        queue.append(self.t(eid))
        self.tree_path = [paths[v] for v in range(len(self.vertices))]

    # -- edges --------------------------------------------------------------
    @property
    def n_edges(self) -> int:
        return len(self.edge_defs)

    def edge_ids(self) -> list[int]:
        out = []
        for k in range(self.n_edges):
            out += [k + 1, -(k + 1)]
        return out

    def edge_name(self, eid: int) -> str:
        n = self.edge_defs[abs(eid) - 1]["name"]
        return n if eid > 0 else self.bars.get(n, n + "~")

    def edge_id(self, name: str) -> int:
        for k, ed in enumerate(self.edge_defs):
            if ed["name"] == name:
                return k + 1
            if self.bars.get(ed["name"], ed["name"] + "~") == name:
                return -(k + 1)
        raise KeyError(name)

    def o(self, eid: int) -> int:
        ed = self.edge_defs[abs(eid) - 1]
        return self.vindex[ed["o"] if eid > 0 else ed["t"]]

    def t(self, eid: int) -> int:
        ed = self.edge_defs[abs(eid) - 1]
        return self.vindex[ed["t"] if eid > 0 else ed["o"]]

    def edge_group(self, eid: int):
        return self.edge_defs[abs(eid) - 1]["group"]

    def origin_map(self, eid: int) -> EdgeMap:
        """phi_(e, o(e))."""
        k = abs(eid) - 1
        return self._maps_o[k] if eid > 0 else self._maps_t[k]

    def terminus_map(self, eid: int) -> EdgeMap:
        """phi_(e, t(e))."""
        k = abs(eid) - 1
        return self._maps_t[k] if eid > 0 else self._maps_o[k]

    def edges_at(self, v: int) -> list[int]:
        """Oriented edges with origin v, in a fixed order."""
        return [e for e in self.edge_ids() if self.o(e) == v]

    def in_tree(self, eid: int) -> bool:
        return abs(eid) - 1 in self.tree_idx

    def group(self, v: int):
        return self.vgroups[v]

    # -- normal forms -------------------------------------------------------
    def end(self, p: Path) -> int:
        return self.t(p.edges[-1]) if p.edges else p.start

    def identity(self, v: int | None = None) -> Path:
        v = self.base if v is None else v
        return Path(v, (self.vgroups[v].identity,), ())

    def is_identity(self, p: Path) -> bool:
        return not p.edges and self.vgroups[p.start].is_identity(p.syl[0])

    def reduce(self, start: int, items) -> Path:
        """Normal form of a raw syllable stream.

        ``items`` is a sequence of ``("v", g)`` and ``("e", eid)`` entries;
        consecutive vertex entries multiply.
        """
        b = _Builder(self, start)
        for kind, val in items:
            if kind == "v":
                b.vertex(val)
            else:
                b.edge(val)
        return b.result()

    def britton_reduce(self, raw: Sequence, start: int | None = None) -> Path:
        """Normal form of an alternating sequence [g0, e1, g1, ..., en, gn].

        Edges may be given by id or name; vertex entries are group elements
        (words for free groups, indices for finite ones) or strings to parse.
        """
        if len(raw) % 2 != 1:
            raise ValueError("alternating sequence must have odd length")
        edges = [self.edge_id(x) if isinstance(x, str) else x for x in raw[1::2]]
        if start is None:
            start = self.o(edges[0]) if edges else self.base
        items = []
        v = start
        for i, g in enumerate(raw[0::2]):
            if isinstance(g, str):
                g = self.vgroups[v].parse(g)
            items.append(("v", g))
            if i < len(edges):
                e = edges[i]
                if self.o(e) != v:
                    raise ValueError(
                        f"path inconsistent: edge {self.edge_name(e)} does not start at "
                        f"{self.vertices[v]}")
                items.append(("e", e))
                v = self.t(e)
        return self.reduce(start, items)

    def mul(self, p: Path, q: Path) -> Path:
        if self.end(p) != q.start:
            raise ValueError("paths are not composable")
        b = _Builder(self, p.start, p)
        b.vertex(q.syl[0])
        for e, g in zip(q.edges, q.syl[1:]):
            b.edge(e)
            b.vertex(g)
        return b.result()

    def mul_all(self, *ps: Path) -> Path:
        out = ps[0]
        for p in ps[1:]:
            out = self.mul(out, p)
        return out

    def inv(self, p: Path) -> Path:
        end = self.end(p)
        items = []
        n = len(p.edges)
        for i in range(n, -1, -1):
            V = self.vgroups[self.t(p.edges[i - 1]) if i > 0 else p.start]
            items.append(("v", V.inv(p.syl[i])))
            if i > 0:
                items.append(("e", -p.edges[i - 1]))
        return self.reduce(end, items)

    def vertex_path(self, v: int, g) -> Path:
        """The path consisting of the single syllable g at vertex v."""
        return Path(v, (g,), ())

    def tree_path_to(self, v: int) -> Path:
        items = [("v", self.vgroups[self.base].identity)]
        for e in self.tree_path[v]:
            items.append(("e", e))
        return self.reduce(self.base, items)

    def vertex_element(self, v: int, g) -> Path:
        """The element p_v g p_v^-1 of G (g in G_v)."""
        p = self.tree_path_to(v)
        return self.mul_all(p, self.vertex_path(v, g), self.inv(p))

    def edge_element(self, eid: int) -> Path:
        """The generator e of G, i.e. p_o(e) e p_t(e)^-1."""
        po = self.tree_path_to(self.o(eid))
        pt = self.tree_path_to(self.t(eid))
        step = self.reduce(self.o(eid), [("v", self.vgroups[self.o(eid)].identity), ("e", eid)])
        return self.mul_all(po, step, self.inv(pt))

    def strip_last(self, p: Path) -> tuple[Path, object]:
        """Split p as (prefix with identity last syllable, last syllable)."""
        v = self.end(p)
        return Path(p.start, p.syl[:-1] + (self.vgroups[v].identity,), p.edges), p.syl[-1]

    def coset_rep(self, g: Path, v: int) -> Path:
        """Canonical representative of the coset g G_v, as a path base -> v.

        The coset is g p_v G_v; its representative is the normal form of
        g p_v with the trailing vertex-group syllable dropped.
        """
        return self.strip_last(self.mul(g, self.tree_path_to(v)))[0]

    def element_eq(self, u: Path, v: Path) -> bool:
        if u.start != v.start or self.end(u) != self.end(v):
            return False
        return self.is_identity(self.mul(u, self.inv(v)))

    def syllable_count(self, p: Path) -> int:
        return len(p.edges)

    def format_path(self, p: Path) -> str:
        parts = []
        v = p.start
        for i, g in enumerate(p.syl):
            V = self.vgroups[v]
            if not V.is_identity(g) or (i == 0 and not p.edges):
                parts.append(V.format(g).replace(" ", ""))
            if i < len(p.edges):
                parts.append(self.edge_name(p.edges[i]))
                v = self.t(p.edges[i])
        return " . ".join(parts) if parts else "1"

    # -- presentation ---------------------------------------------------------
    def generator_table(self):
        """Global generator names and decoding: name -> ("v", v, g) | ("e", eid)."""
        counts = {}
        for V in self.vgroups:
            for n in _gen_names(V):
                counts[n] = counts.get(n, 0) + 1
        names, decode = [], []
        for v, V in enumerate(self.vgroups):
            for n, g in zip(_gen_names(V), V.gen_elements()):
                full = n if counts[n] == 1 and n not in self._all_edge_names() else f"{self.vertices[v]}.{n}"
                names.append(full)
                decode.append(("v", v, g))
        for k in range(self.n_edges):
            for eid in (k + 1, -(k + 1)):
                names.append(self.edge_name(eid))
                decode.append(("e", eid))
        return names, decode

    def _all_edge_names(self):
        return {self.edge_name(e) for e in self.edge_ids()}

    def _vertex_word(self, v: int, g, lookup) -> list[int]:
        V = self.vgroups[v]
        if V.kind == "free":
            return [lookup[("v", v, (abs(x),))] * (1 if x > 0 else -1) for x in g]
        if V.is_identity(g):
            return []
        if g in V.generators:
            return [lookup[("v", v, g)]]
        # write g as a shortest product of declared generators
        return [lookup[("v", v, s)] for s in _finite_word(V, g)]

    def fundamental_presentation(self) -> Presentation:
        names, decode = self.generator_table()
        lookup = {}
        for i, d in enumerate(decode, start=1):
            lookup[d] = i
        rels, fams = [], []
        for v, V in enumerate(self.vgroups):
            if V.kind == "finite":
                gens = list(V.generators)
                for x in gens:
                    for y in gens:
                        z = V.mul(x, y)
                        w = [lookup[("v", v, x)], lookup[("v", v, y)]]
                        w += [-c for c in reversed(self._vertex_word(v, z, lookup))]
                        rels.append(tuple(w))
                        fams.append(1)
        for k in range(self.n_edges):
            e, eb = lookup[("e", k + 1)], lookup[("e", -(k + 1))]
            rels.append((eb, e))
            fams.append(2)
        for k in sorted(self.tree_idx):
            rels.append((lookup[("e", k + 1)],))
            fams.append(3)
        for k in range(self.n_edges):
            eid = k + 1
            e = lookup[("e", eid)]
            G = self.edge_group(eid)
            mo, mt = self.origin_map(eid), self.terminus_map(eid)
            for c in G.gen_elements():
                wt = self._vertex_word(self.t(eid), mt.image(c), lookup)
                wo = self._vertex_word(self.o(eid), mo.image(c), lookup)
                rels.append(tuple([e] + wt + [-e] + [-x for x in reversed(wo)]))
                fams.append(4)
        return Presentation(names, rels, fams)

    def expected_relator_count(self) -> int:
        vrel = sum(len(V.generators) ** 2 for V in self.vgroups if V.kind == "finite")
        egen = sum(self.edge_group(k + 1).rank for k in range(self.n_edges))
        return vrel + self.n_edges + len(self.tree_idx) + egen

    def word_to_element(self, word) -> Path:
        """Evaluate a word over the global generators as an element of G."""
        _, decode = self.generator_table()
        out = self.identity()
        cache = {}
        for x in word:
            d = decode[abs(x) - 1]
            if d not in cache:
                if d[0] == "v":
                    cache[d] = self.vertex_element(d[1], d[2])
                else:
                    cache[d] = self.edge_element(d[1])
            el = cache[d]
            out = self.mul(out, el if x > 0 else self.inv(el))
        return out

    # -- config ---------------------------------------------------------------
    def to_config(self) -> dict:
        vs = []
        for v, V in zip(self.vertices, self.vgroups):
            doc = {"name": v}
            doc.update(V.to_config())
            vs.append(doc)
        es = []
        for ed in self.edge_defs:
            Vo = self.vgroups[self.vindex[ed["o"]]]
            Vt = self.vgroups[self.vindex[ed["t"]]]
            doc = {"name": ed["name"], "o": ed["o"], "t": ed["t"],
                   "group": ed["group"].to_config(),
                   "images_o": [Vo.format(g) for g in ed["images_o"]],
                   "images_t": [Vt.format(g) for g in ed["images_t"]]}
            if ed["name"] in self.bars:
                doc["bar"] = self.bars[ed["name"]]
            es.append(doc)
        out = {"name": self.name, "vertices": vs, "edges": es,
               "spanning_tree": list(self.tree_names),
               "base": self.vertices[self.base], "metadata": self.metadata}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_config(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_config(cls, doc: dict) -> "GraphOfGroups":
        vertices, vgroups = [], {}
        for vd in doc["vertices"]:
            vertices.append(vd["name"])
            vgroups[vd["name"]] = spec_from_config(vd)
        edges, bars = [], {}
        for ed in doc.get("edges", []):
            G = spec_from_config(ed["group"])
            for side in ("o", "t"):
                if ed[side] not in vgroups:
                    raise ValueError(f"edge {ed['name']!r}: unknown vertex {ed[side]!r}")
            Vo, Vt = vgroups[ed["o"]], vgroups[ed["t"]]
            edges.append({
                "name": ed["name"], "o": ed["o"], "t": ed["t"], "group": G,
                "images_o": [Vo.parse(s) for s in ed.get("images_o", [])],
                "images_t": [Vt.parse(s) for s in ed.get("images_t", [])]})
            if "bar" in ed:
                bars[ed["name"]] = ed["bar"]
        return cls(vertices, vgroups, edges, tree=doc.get("spanning_tree"),
                   base=doc.get("base"), metadata=doc.get("metadata"),
                   name=doc.get("name", ""), bars=bars)

    @classmethod
    def loads(cls, text: str) -> "GraphOfGroups":
        return cls.from_config(json.loads(text))


def _gen_names(V) -> list[str]:
    if V.kind == "free":
        return list(V.names)
    return [V.names[g] for g in V.generators]


def _finite_word(V: FiniteSpec, g) -> list:
    prev = {V.identity: None}
    frontier = [V.identity]
    while g not in prev:
        nxt = []
        for h in frontier:
            for s in V.generators:
                k = V.mul(h, s)
                if k not in prev:
                    prev[k] = (h, s)
                    nxt.append(k)
        frontier = nxt
    out = []
    while prev[g] is not None:
        g, s = prev[g]
        out.append(s)
    return out[::-1]


class _Builder:
    """Incremental normal form: a canonical prefix plus a free last syllable."""

    __slots__ = ("gog", "start", "syl", "edges", "v")

    def __init__(self, gog: GraphOfGroups, start: int, init: Path | None = None):
        self.gog = gog
        self.start = start
        if init is None:
            self.syl = [gog.vgroups[start].identity]
            self.edges = []
            self.v = start
        else:
            self.syl = list(init.syl)
            self.edges = list(init.edges)
            self.v = gog.end(init)

    def vertex(self, g):
        self.syl[-1] = self.gog.vgroups[self.v].mul(self.syl[-1], g)

    def edge(self, e: int):
        gog = self.gog
        if gog.o(e) != self.v:
            raise ValueError(f"edge {gog.edge_name(e)} does not start at {gog.vertices[self.v]}")
        r, a = gog.origin_map(e).split(self.syl[-1])
        if self.edges and self.edges[-1] == -e and gog.vgroups[self.v].is_identity(r):
            prev = self.edges.pop()
            self.syl.pop()
            self.v = gog.o(prev)
            self.syl[-1] = gog.vgroups[self.v].mul(self.syl[-1], gog.origin_map(prev).image(a))
            return
        self.syl[-1] = r
        self.edges.append(e)
        self.v = gog.t(e)
        self.syl.append(gog.terminus_map(e).image(a))

    def result(self) -> Path:
        return Path(self.start, tuple(self.syl), tuple(self.edges))


__all__ = ["GraphOfGroups", "Path", "Presentation", "ValidationReport",
           "InvalidGraphOfGroups", "OrientedGraph", "FreeSpec", "FiniteSpec"]


EXAMPLES = ("free_amalgam_trivial", "double_f2", "hnn_malnormal", "finite_edge")


def example_config(name: str) -> dict:
    from importlib import resources
    text = resources.files("gogtree").joinpath("data", f"{name}.json").read_text()
    return json.loads(text)


def load_example(name: str) -> GraphOfGroups:
    return GraphOfGroups.from_config(example_config(name))


def load(path_or_name: str) -> GraphOfGroups:
    """Load a config from a JSON path or a bundled example name."""
    if path_or_name in EXAMPLES:
        return load_example(path_or_name)
    with open(path_or_name) as fh:
        return GraphOfGroups.from_config(json.load(fh))
