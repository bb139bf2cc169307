"""Stallings foldings for finitely generated subgroups of free groups.

Every edge of a core graph carries, besides its target letter, a *source
word*: a word over the generators the subgroup was built from.  Folding keeps
the invariant that the source words read along any closed path at the base
multiply to a preimage of the path label, so membership also yields an
expression in the original generators.  That is what makes preimages under
edge monomorphisms exact.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .words import (
    EMPTY,
    Word,
    format_word,
    inv,
    letters,
    mul,
    mul_all,
    parse_word,
    shortlex_key,
)


# Subgroups of F(a, b) used across the examples and the test suite: the
# documented folding/intersection cases and the edge images of the bundled
# graphs of groups.
BUNDLED_SUBGROUPS = {
    "a": ["a"],
    "b": ["b"],
    "a2": ["a^2"],
    "a3": ["a^3"],
    "b2": ["b^2"],
    "a2_b": ["a^2", "b"],
    "a3_b": ["a^3", "b"],
    "a_ab": ["a", "a b"],
    "a2_b_aba": ["a^2", "b", "a b a^-1"],
    "a2b2": ["a^2 b^2"],
    "trivial": [],
}


def bundled_subgroup(name: str) -> "SubgroupHandle":
    return fold([parse_word(g, ["a", "b"]) for g in BUNDLED_SUBGROUPS[name]], 2)


class NotInjective(ValueError):
    """A homomorphism of free groups was found to have a nontrivial kernel."""


def substitute(w: Word, images: Sequence[Word]) -> Word:
    """Image of ``w`` under the homomorphism sending letter i to images[i-1]."""
    out = EMPTY
    for x in w:
        img = images[abs(x) - 1]
        out = mul(out, img if x > 0 else inv(img))
    return out


class SubgroupHandle:
    """A folded core graph with base vertex 0 plus a spanning-tree basis.

    Vertices are numbered in shortlex BFS order from the base, so two handles
    describe the same subgroup iff their :meth:`signature` agree.
    """

    __slots__ = ("rank", "adj", "src", "source_gens", "tree_word", "tree_src",
                 "basis", "basis_src", "_edge_basis", "_sig")

    def __init__(self, rank, adj, src, source_gens):
        self.rank = rank
        self.adj = adj
        self.src = src
        self.source_gens = tuple(source_gens)
        self._spanning_tree()
        self._sig = None

    # -- construction helpers -------------------------------------------------
    def _spanning_tree(self):
        n = len(self.adj)
        tree_word: list = [None] * n
        tree_src: list = [None] * n
        tree_word[0] = EMPTY
        tree_src[0] = EMPTY
        tree_edges = set()
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for x in letters(self.rank):
                v = self.adj[u].get(x)
                if v is not None and tree_word[v] is None:
                    tree_word[v] = tree_word[u] + (x,)
                    tree_src[v] = mul(tree_src[u], self.src[(u, x)])
                    tree_edges.add((u, x))
                    tree_edges.add((v, -x))
                    queue.append(v)
        basis, basis_src, edge_basis = [], [], {}
        for u in range(n):
            for x in range(1, self.rank + 1):
                v = self.adj[u].get(x)
                if v is None or (u, x) in tree_edges:
                    continue
                basis.append(mul_all(tree_word[u], (x,), inv(tree_word[v])))
                basis_src.append(mul_all(tree_src[u], self.src[(u, x)], inv(tree_src[v])))
                edge_basis[(u, x)] = len(basis)
                edge_basis[(v, -x)] = -len(basis)
        self.tree_word = tree_word
        self.tree_src = tree_src
        self.basis = tuple(basis)
        self.basis_src = tuple(basis_src)
        self._edge_basis = edge_basis

    # -- queries ------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.adj)

    @property
    def n_edges(self) -> int:
        return sum(1 for u in range(len(self.adj)) for x in self.adj[u] if x > 0)

    @property
    def subgroup_rank(self) -> int:
        return len(self.basis)

    def is_trivial(self) -> bool:
        return not self.basis

    def edges(self) -> list[tuple[int, int, int]]:
        return [(u, x, v) for u in range(len(self.adj))
                for x, v in sorted(self.adj[u].items()) if x > 0]

    def signature(self) -> tuple:
        if self._sig is None:
            self._sig = (self.rank, len(self.adj), tuple(self.edges()))
        return self._sig

    def __eq__(self, other) -> bool:
        return isinstance(other, SubgroupHandle) and self.signature() == other.signature()

    def __hash__(self) -> int:
        return hash(self.signature())

    def __repr__(self) -> str:
        return f"SubgroupHandle(rank={self.subgroup_rank}, core={len(self.adj)} vertices)"

    def walk(self, w: Word, start: int = 0) -> tuple[int, int]:
        """Read ``w`` from ``start``; return (vertex reached, letters read)."""
        v = start
        for i, x in enumerate(w):
            nxt = self.adj[v].get(x)
            if nxt is None:
                return v, i
            v = nxt
        return v, len(w)

    def contains(self, w: Word) -> bool:
        v, k = self.walk(w)
        return k == len(w) and v == 0

    def membership(self, w: Word) -> Optional[Word]:
        """Expression of ``w`` in the spanning-tree basis, or None."""
        if not self.contains(w):
            return None
        expr = []
        v = 0
        for x in w:
            b = self._edge_basis.get((v, x))
            if b is not None:
                if expr and expr[-1] == -b:
                    expr.pop()
                else:
                    expr.append(b)
            v = self.adj[v][x]
        return tuple(expr)

    def express(self, w: Word) -> Optional[Word]:
        """Expression of ``w`` in the source generators, or None."""
        if not self.contains(w):
            return None
        out = EMPTY
        v = 0
        for x in w:
            out = mul(out, self.src[(v, x)])
            v = self.adj[v][x]
        return out

    def diameter(self) -> int:
        best = 0
        for s in range(len(self.adj)):
            dist = {s: 0}
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for v in self.adj[u].values():
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        queue.append(v)
            best = max(best, max(dist.values()))
        return best

    def to_dot(self, names: Sequence[str] | None = None, name: str = "core") -> str:
        names = names or [chr(ord("a") + i) for i in range(self.rank)]
        lines = [f"digraph {name} {{", '  0 [shape=doublecircle];']
        for u, x, v in self.edges():
            lines.append(f'  {u} -> {v} [label="{names[x - 1]}"];')
        lines.append("}")
        return "\n".join(lines)


def _build(rank: int, n: int, edges: Iterable[tuple[int, int, int, Word]],
           source_gens: Sequence[Word]) -> SubgroupHandle:
    """Fold, trim and canonically renumber a labelled graph with base 0."""
    adj: list[dict] = [dict() for _ in range(n)]
    srcs: list[dict] = [dict() for _ in range(n)]
    forward: dict[int, tuple[int, Word]] = {}

    def resolve(v):
        c = EMPTY
        while v in forward:
            v, c2 = forward[v]
            c = mul(c, c2)
        return v, c

    pending = list(edges)
    pending.reverse()
    while pending:
        u, x, v, s = pending.pop()
        ru, cu = resolve(u)
        rv, cv = resolve(v)
        s = mul_all(inv(cu), s, cv)
        if x in adj[ru]:
            w = adj[ru][x]
            if w == rv:
                # parallel edges; differing sources witness a kernel element
                continue
            s0 = srcs[ru][x]
            c = mul(inv(s), s0)
            keep, drop, cc = w, rv, c
            if drop == 0:
                keep, drop, cc = rv, w, inv(c)
            forward[drop] = (keep, cc)
            for y, z in list(adj[drop].items()):
                sz = srcs[drop][y]
                if z != drop:
                    del adj[z][-y]
                    del srcs[z][-y]
                pending.append((drop, y, z, sz))
            adj[drop].clear()
            srcs[drop].clear()
            pending.append((ru, x, rv, s))
        elif -x in adj[rv]:
            pending.append((rv, -x, ru, inv(s)))
        else:
            adj[ru][x] = rv
            srcs[ru][x] = s
            adj[rv][-x] = ru
            srcs[rv][-x] = inv(s)

    alive = {v for v in range(n) if v not in forward}
    queue = deque(v for v in alive if v != 0 and len(adj[v]) <= 1)
    while queue:
        v = queue.popleft()
        if v not in alive:
            continue
        alive.discard(v)
        for y, z in list(adj[v].items()):
            if z != v:
                del adj[z][-y]
                del srcs[z][-y]
                if z != 0 and z in alive and len(adj[z]) <= 1:
                    queue.append(z)
        adj[v].clear()

    order = {0: 0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for x in letters(rank):
            v = adj[u].get(x)
            if v is not None and v not in order:
                order[v] = len(order)
                queue.append(v)
    new_adj = [dict() for _ in range(len(order))]
    new_src = {}
    for old, new in order.items():
        for x, v in adj[old].items():
            new_adj[new][x] = order[v]
            new_src[(new, x)] = srcs[old][x]
    return SubgroupHandle(rank, tuple(new_adj), new_src, source_gens)


def fold(generators: Sequence[Word], rank: int) -> SubgroupHandle:
    """Core graph of the subgroup generated by ``generators``.

    Source letter ``j`` refers to ``generators[j-1]``.
    """
    edges = []
    n = 1
    for j, w in enumerate(generators, start=1):
        for x in w:
            if abs(x) > rank:
                raise ValueError(f"letter {x} exceeds ambient rank {rank}")
        if not w:
            continue
        prev = 0
        for i, x in enumerate(w):
            last = i == len(w) - 1
            nxt = 0 if last else n
            if not last:
                n += 1
            edges.append((prev, x, nxt, (j,) if i == 0 else EMPTY))
            prev = nxt
    return _build(rank, n, edges, generators)


def trivial(rank: int) -> SubgroupHandle:
    return fold([], rank)


def whole_group(rank: int) -> SubgroupHandle:
    return fold([(i,) for i in range(1, rank + 1)], rank)


def membership(w: Word, H: SubgroupHandle) -> Optional[Word]:
    return H.membership(w)


def expand(expr: Word, H: SubgroupHandle) -> Word:
    """Evaluate a basis expression back to an ambient word."""
    return substitute(expr, H.basis)


def intersect(H: SubgroupHandle, K: SubgroupHandle) -> SubgroupHandle:
    """Base component of the fiber product; source words follow ``H``."""
    if H.rank != K.rank:
        raise ValueError("ambient ranks differ")
    index = {(0, 0): 0}
    queue = deque([(0, 0)])
    edges = []
    while queue:
        pair = queue.popleft()
        u, v = pair
        for x in letters(H.rank):
            a = H.adj[u].get(x)
            b = K.adj[v].get(x)
            if a is None or b is None:
                continue
            nxt = (a, b)
            if nxt not in index:
                index[nxt] = len(index)
                queue.append(nxt)
            if x > 0:
                edges.append((index[pair], x, index[nxt], H.src[(u, x)]))
    return _build(H.rank, len(index), edges, H.source_gens)


def conjugate(H: SubgroupHandle, x: Word) -> SubgroupHandle:
    """The subgroup x H x^-1."""
    return fold([mul_all(x, h, inv(x)) for h in H.basis], H.rank)


def image(images: Sequence[Word], B: SubgroupHandle, target_rank: int) -> SubgroupHandle:
    """phi(B) where phi sends source letter i to images[i-1]."""
    return fold([substitute(b, images) for b in B.basis], target_rank)


def image_of_map(images: Sequence[Word], target_rank: int) -> SubgroupHandle:
    """Im(phi), checked injective; source letters are phi's source generators."""
    im = fold(images, target_rank)
    if im.subgroup_rank != len(images):
        raise NotInjective(
            f"image of a rank-{len(images)} free group has rank {im.subgroup_rank}")
    return im


def preimage(images: Sequence[Word], A: SubgroupHandle,
             im: SubgroupHandle | None = None) -> SubgroupHandle:
    """phi^-1(A) for an injective phi: source letter i -> images[i-1]."""
    im = im or image_of_map(images, A.rank)
    meet = intersect(im, A)
    gens = [im.express(b) for b in meet.basis]
    return fold(gens, len(images))


@dataclass(frozen=True)
class Transversal:
    """Shortlex right-coset representatives H*g with |rep| <= bound."""

    reps: tuple
    truncated: bool
    bound: int


def _schreier_step(H: SubgroupHandle, node, x):
    v, s = node
    if not s:
        w = H.adj[v].get(x)
        if w is not None:
            return (w, EMPTY)
        return (v, (x,))
    if s[-1] == -x:
        return (v, s[:-1])
    return (v, s + (x,))


def schreier_cosets(H: SubgroupHandle, bound: int) -> Transversal:
    """Right cosets Hg having a representative of length <= bound."""
    start = (0, EMPTY)
    seen = {start: EMPTY}
    layer = [start]
    reps = [EMPTY]
    for _ in range(bound):
        nxt = []
        for node in layer:
            for x in letters(H.rank):
                m = _schreier_step(H, node, x)
                if m not in seen:
                    seen[m] = seen[node] + (x,)
                    reps.append(seen[m])
                    nxt.append(m)
        layer = nxt
    truncated = any(_schreier_step(H, node, x) not in seen
                    for node in layer for x in letters(H.rank))
    return Transversal(tuple(reps), truncated, bound)


def right_coset_rep(H: SubgroupHandle, w: Word) -> Word:
    """Shortlex-least element of H*w."""
    v, k = H.walk(w)
    return H.tree_word[v] + w[k:]


def left_coset_rep(H: SubgroupHandle, g: Word) -> Word:
    """Canonical representative of g*H: inverse of the shortlex rep of H*g^-1."""
    return inv(right_coset_rep(H, inv(g)))


def left_coset_reps(H: SubgroupHandle, bound: int) -> tuple[list[Word], bool]:
    t = schreier_cosets(H, bound)
    return [inv(r) for r in t.reps], t.truncated


def projection_set(H: SubgroupHandle, r: Word, z: Word) -> list[int]:
    """Positions k such that some element of the coset r*H projects to z[:k].

    Projection is onto the Cayley-tree segment [1, z]; an element y projects
    to z[:k] where k is the common prefix length of y and z.
    """
    # y in rH  <=>  reading y from the Schreier node H*r^-1 ends at H
    node = _hanging_node(H, inv(r))
    out = []
    for k in range(len(z) + 1):
        forbidden = set()
        if k < len(z):
            forbidden.add(z[k])
        if k > 0:
            forbidden.add(-z[k - 1])
        if _can_finish(H, node, forbidden):
            out.append(k)
        if k < len(z):
            node = _schreier_step(H, node, z[k])
    return out


def _hanging_node(H: SubgroupHandle, w: Word):
    """Schreier-graph node reached from the base by reading ``w``."""
    v, k = H.walk(w)
    return (v, w[k:])


def _can_finish(H: SubgroupHandle, node, forbidden: set) -> bool:
    """Is there a reduced Schreier path from ``node`` to the base whose first
    letter avoids ``forbidden``?  Off the core the only way back is towards
    the core; every directed core edge continues to the base reducedly.
    """
    v, s = node
    if s:
        return -s[-1] not in forbidden
    if v == 0:
        return True
    return any(x not in forbidden for x in H.adj[v])


def format_handle(H: SubgroupHandle, names: Sequence[str]) -> str:
    return "<" + ", ".join(format_word(b, names) for b in H.basis) + ">"


def sorted_words(ws: Iterable[Word]) -> list[Word]:
    return sorted(ws, key=shortlex_key)
