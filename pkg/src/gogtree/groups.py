"""Vertex and edge group adapters: free groups and finite table groups.

Both kinds expose the same small interface so that normal forms, trees and
spaces never branch on the group kind.  Subgroups are SubgroupHandles for
free groups and frozensets of element indices for finite groups.
"""
from __future__ import annotations

from . import stallings
from .words import (
    EMPTY,
    FiniteGroupTable,
    FreeGroup,
    format_word,
    inv,
    mul,
    parse_word,
    shortlex_key,
)


class FreeSpec:
    kind = "free"

    def __init__(self, names):
        self.group = FreeGroup(names)
        self.names = self.group.names
        self.rank = self.group.rank

    def __repr__(self):
        return f"FreeSpec({list(self.names)})"

    def __eq__(self, other):
        return isinstance(other, FreeSpec) and self.names == other.names

    def __hash__(self):
        return hash(("free", self.names))

    identity = EMPTY

    def is_identity(self, g) -> bool:
        return not g

    def mul(self, g, h):
        return mul(g, h)

    def inv(self, g):
        return inv(g)

    def length(self, g) -> int:
        return len(g)

    def key(self, g):
        return shortlex_key(g)

    def step_gens(self):
        """Generators and inverses, as elements, in shortlex order."""
        out = []
        for i in range(1, self.rank + 1):
            out += [(i,), (-i,)]
        return out

    def gen_elements(self):
        return [(i,) for i in range(1, self.rank + 1)]

    def ball(self, radius):
        return self.group.ball(radius)

    def parse(self, text):
        return parse_word(text, self.names)

    def format(self, g) -> str:
        return format_word(g, self.names)

    def to_config(self) -> dict:
        return {"kind": "free", "generators": list(self.names)}

    # subgroups
    def full(self):
        return stallings.whole_group(self.rank)

    def trivial(self):
        return stallings.trivial(self.rank)

    def sub_contains(self, S, g) -> bool:
        return S.contains(g)

    def sub_conjugate(self, S, x):
        return stallings.conjugate(S, x)

    def sub_intersect(self, S, T):
        return stallings.intersect(S, T)

    def sub_generate(self, elems):
        return stallings.fold(list(elems), self.rank)

    def sub_equal(self, S, T) -> bool:
        return S == T

    def sub_gens(self, S):
        return list(S.basis)


class FiniteSpec:
    kind = "finite"

    def __init__(self, table: FiniteGroupTable, generators=None):
        self.table = table
        self.names = table.names
        e = table.identity
        if generators is None:
            generators = [x for x in table.elements() if x != e]
        self.generators = tuple(generators)
        self.rank = len(self.generators)
        # generated subgroup must be everything
        if len(self._closure(self.generators)) != table.order:
            raise ValueError("declared generators do not generate the finite group")

    def __repr__(self):
        return f"FiniteSpec(order={self.table.order})"

    def __eq__(self, other):
        return (isinstance(other, FiniteSpec) and self.table == other.table
                and self.generators == other.generators)

    def __hash__(self):
        return hash(("finite", self.table.product))

    @property
    def identity(self):
        return self.table.identity

    def is_identity(self, g) -> bool:
        return g == self.table.identity

    def mul(self, g, h):
        return self.table.op(g, h)

    def inv(self, g):
        return self.table.inv(g)

    def length(self, g) -> int:
        return 0 if g == self.table.identity else 1

    def key(self, g):
        return self.table.key(g)

    def step_gens(self):
        # full element set: every vertex space has diameter <= 1
        return [x for x in self.table.elements() if x != self.table.identity]

    def gen_elements(self):
        return list(self.generators)

    def ball(self, radius):
        if radius <= 0:
            return [self.table.identity]
        return sorted(self.table.elements(), key=self.table.key)

    def parse(self, text):
        text = text.strip()
        if text in ("", "1"):
            return self.table.identity
        if text in self.names:
            return self.names.index(text)
        raise ValueError(f"unknown finite group element {text!r}")

    def format(self, g) -> str:
        return self.names[g]

    def to_config(self) -> dict:
        doc = {"kind": "finite", "table": [list(r) for r in self.table.product],
               "identity": self.table.identity, "elements": list(self.names)}
        default = [x for x in self.table.elements() if x != self.table.identity]
        if list(self.generators) != default:
            doc["generators"] = [self.names[g] for g in self.generators]
        return doc

    def _closure(self, gens):
        seen = {self.table.identity}
        frontier = [self.table.identity]
        while frontier:
            nxt = []
            for g in frontier:
                for s in gens:
                    h = self.table.op(g, s)
                    if h not in seen:
                        seen.add(h)
                        nxt.append(h)
            frontier = nxt
        return frozenset(seen)

    # subgroups
    def full(self):
        return frozenset(self.table.elements())

    def trivial(self):
        return frozenset([self.table.identity])

    def sub_contains(self, S, g) -> bool:
        return g in S

    def sub_conjugate(self, S, x):
        xi = self.inv(x)
        return frozenset(self.mul(self.mul(x, s), xi) for s in S)

    def sub_intersect(self, S, T):
        return S & T

    def sub_generate(self, elems):
        return self._closure(list(elems))

    def sub_equal(self, S, T) -> bool:
        return S == T

    def sub_gens(self, S):
        return sorted(S, key=self.key)


def spec_from_config(doc: dict):
    kind = doc.get("kind")
    if kind == "free":
        if "generators" in doc:
            return FreeSpec(doc["generators"])
        return FreeSpec([f"s{i}" for i in range(int(doc.get("rank", 0)))])
    if kind == "finite":
        names = doc.get("elements") or ()
        table = FiniteGroupTable(doc["table"], int(doc.get("identity", 0)), tuple(names))
        gens = doc.get("generators")
        if gens is not None:
            gens = [table.names.index(g) for g in gens]
        return FiniteSpec(table, gens)
    raise ValueError(f"unknown group kind {kind!r}")


class EdgeMap:
    """An injective homomorphism from an edge group into a vertex group.

    ``images`` gives one vertex-group element per edge-group generator.
    """

    def __init__(self, source, target, images):
        self.source = source
        self.target = target
        self.images = tuple(images)
        if len(self.images) != source.rank:
            raise ValueError(
                f"expected {source.rank} generator images, got {len(self.images)}")
        self.im = None
        self._table_map = None
        if source.kind == "free" and target.kind == "free":
            self.mode = "free"
            self.im = stallings.image_of_map(self.images, target.rank)
        elif source.kind == "finite" and target.kind == "finite":
            self.mode = "finite"
            self._extend_finite()
        elif source.kind == "finite" and source.table.order == 1:
            self.mode = "trivial"
        elif source.kind == "free" and source.rank == 0:
            self.mode = "trivial"
        elif source.kind == "finite":
            raise stallings.NotInjective("a nontrivial finite group has no injective map into a free group")
        else:
            raise stallings.NotInjective("an infinite free group has no injective map into a finite group")

    def _extend_finite(self):
        src, tgt = self.source, self.target
        mapping = {src.identity: tgt.identity}
        frontier = [src.identity]
        while frontier:
            nxt = []
            for g in frontier:
                for s, img in zip(src.generators, self.images):
                    h = src.mul(g, s)
                    val = tgt.mul(mapping[g], img)
                    if h in mapping:
                        if mapping[h] != val:
                            raise ValueError("generator images do not define a homomorphism")
                    else:
                        mapping[h] = val
                        nxt.append(h)
            frontier = nxt
        # a map well defined on the Cayley graph is a homomorphism
        if len(set(mapping.values())) != len(mapping):
            raise stallings.NotInjective("finite edge map has a nontrivial kernel")
        self._table_map = mapping
        self._inverse = {v: k for k, v in mapping.items()}
        self.imset = frozenset(mapping.values())

    def image(self, a):
        if self.mode == "free":
            return stallings.substitute(a, self.images)
        if self.mode == "finite":
            return self._table_map[a]
        return self.target.identity

    def preimage_element(self, h):
        """phi^-1(h) or None when h is not in the image."""
        if self.mode == "free":
            return self.im.express(h)
        if self.mode == "finite":
            return self._inverse.get(h)
        return self.source.identity if self.target.is_identity(h) else None

    def contains(self, h) -> bool:
        if self.mode == "free":
            return self.im.contains(h)
        if self.mode == "finite":
            return h in self.imset
        return self.target.is_identity(h)

    def split(self, g):
        """Write g = r * phi(a) with r the canonical left-coset representative."""
        T = self.target
        if self.mode == "free":
            r = stallings.left_coset_rep(self.im, g)
            a = self.im.express(mul(inv(r), g))
            return r, a
        if self.mode == "finite":
            coset = [T.mul(g, h) for h in self.imset]
            r = min(coset, key=T.key)
            return r, self._inverse[T.mul(T.inv(r), g)]
        return g, self.source.identity

    def coset_reps(self, bound: int):
        """Left-coset representatives of length <= bound and a truncation flag."""
        T = self.target
        if self.mode == "free":
            return stallings.left_coset_reps(self.im, bound)
        if self.mode == "finite":
            reps = sorted({self.split(g)[0] for g in T.ball(bound)}, key=T.key)
            total = T.table.order // len(self.imset)
            return reps, len(reps) < total
        reps = list(T.ball(bound))
        if T.kind == "finite":
            return reps, len(reps) < T.table.order
        return reps, True

    def image_subgroup(self, S):
        T = self.target
        if self.mode == "free":
            return stallings.image(self.images, S, T.rank)
        if self.mode == "finite":
            return frozenset(self._table_map[s] for s in S)
        return T.trivial()

    def preimage_subgroup(self, S):
        if self.mode == "free":
            return stallings.preimage(self.images, S, self.im)
        if self.mode == "finite":
            return frozenset(self._inverse[s] for s in S if s in self._inverse)
        return self.source.trivial()

    def image_handle(self):
        if self.mode == "free":
            return self.im
        if self.mode == "finite":
            return self.imset
        return self.target.trivial()

    def quasiconvexity_witness(self) -> int:
        """Core diameter of the image for free targets (0 otherwise)."""
        if self.mode == "free":
            return self.im.diameter()
        return 0
