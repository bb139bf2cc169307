"""Free-group words, finite group tables and tree-metric primitives.

A letter is a nonzero int: generator ``i`` (0-based) is ``i + 1`` and its
inverse is ``-(i + 1)``.  A word is a tuple of letters.  Every function here
returns freely reduced tuples, so two words represent the same element iff
they compare equal.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

Word = tuple

EMPTY: Word = ()


def free_reduce(raw: Iterable[int]) -> Word:
    stack: list[int] = []
    for x in raw:
        if x == 0:
            raise ValueError("0 is not a letter")
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


def mul(u: Word, v: Word) -> Word:
    """Product of two reduced words (cancellation only at the seam)."""
    if not u:
        return v
    if not v:
        return u
    i = 0
    n = min(len(u), len(v))
    while i < n and u[-1 - i] == -v[i]:
        i += 1
    return u[: len(u) - i] + v[i:]


def mul_all(*words: Word) -> Word:
    out: Word = EMPTY
    for w in words:
        out = mul(out, w)
    return out


def inv(u: Word) -> Word:
    return tuple(-x for x in reversed(u))


def power(u: Word, k: int) -> Word:
    if k < 0:
        u, k = inv(u), -k
    out: Word = EMPTY
    for _ in range(k):
        out = mul(out, u)
    return out


def common_prefix_len(x: Word, y: Word) -> int:
    n = 0
    for a, b in zip(x, y):
        if a != b:
            break
        n += 1
    return n


def gromov_product(x: Word, y: Word) -> Fraction:
    """(x|y) based at the identity; an integer for free groups."""
    return Fraction(len(x) + len(y) - len(mul(inv(x), y)), 2)


def distance(x: Word, y: Word) -> int:
    return len(mul(inv(x), y))


def geodesic_path(x: Word, y: Word) -> list[Word]:
    """The unique Cayley-tree geodesic from x to y, as a list of vertices."""
    step = mul(inv(x), y)
    path = [x]
    cur = x
    for letter in step:
        cur = mul(cur, (letter,))
        path.append(cur)
    return path


def project_to_segment(x: Word, p: Word, q: Word) -> Word:
    """Nearest point of the tree geodesic [p, q] to x."""
    rel_x = mul(inv(p), x)
    rel_q = mul(inv(p), q)
    k = common_prefix_len(rel_x, rel_q)
    return mul(p, rel_q[:k])


def letter_key(x: int) -> tuple[int, int]:
    # a < a^-1 < b < b^-1 < ...
    return (abs(x), 0 if x > 0 else 1)


def shortlex_key(w: Word) -> tuple:
    return (len(w), tuple(letter_key(x) for x in w))


def letters(rank: int) -> list[int]:
    """All letters of a rank-``rank`` free group in shortlex order."""
    out = []
    for i in range(1, rank + 1):
        out += [i, -i]
    return out


def is_cyclically_reduced(w: Word) -> bool:
    return len(w) < 2 or w[0] != -w[-1]


def cyclic_reduction(w: Word) -> tuple[Word, Word]:
    """Split reduced ``w`` as ``c * core * c^-1`` and return (c, core)."""
    i = 0
    while i < len(w) - 1 - i and w[i] == -w[-1 - i]:
        i += 1
    return w[:i], w[i: len(w) - i]


def primitive_root(w: Word) -> tuple[Word, int]:
    n = len(w)
    for d in range(1, n + 1):
        if n % d == 0 and w[:d] * (n // d) == w:
            return w[:d], n // d
    return w, 1


def ball(rank: int, radius: int) -> Iterator[Word]:
    """Reduced words of length <= radius, in shortlex order."""
    layer: list[Word] = [EMPTY]
    yield EMPTY
    alphabet = letters(rank)
    for _ in range(radius):
        nxt = []
        for w in layer:
            for x in alphabet:
                if w and w[-1] == -x:
                    continue
                nxt.append(w + (x,))
        yield from nxt
        layer = nxt


def sphere(rank: int, radius: int) -> list[Word]:
    return [w for w in ball(rank, radius) if len(w) == radius]


class FreeGroup:
    """A free group with named generators."""

    def __init__(self, names: Sequence[str]):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate generator names: {names}")
        self.names = names
        self.rank = len(names)

    def __repr__(self) -> str:
        return f"FreeGroup({', '.join(self.names)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FreeGroup) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def check(self, w: Word) -> Word:
        for x in w:
            if not (isinstance(x, int) and 0 < abs(x) <= self.rank):
                raise ValueError(f"letter {x!r} not in {self!r}")
        return w

    def identity(self) -> Word:
        return EMPTY

    def gens(self) -> list[Word]:
        return [(i,) for i in range(1, self.rank + 1)]

    def reduce(self, raw: Iterable[int]) -> Word:
        return free_reduce(self.check(tuple(raw)))

    def op(self, u: Word, v: Word) -> Word:
        return mul(self.check(u), self.check(v))

    def inverse(self, u: Word) -> Word:
        return inv(self.check(u))

    def letters(self) -> list[int]:
        return letters(self.rank)

    def ball(self, radius: int) -> Iterator[Word]:
        return ball(self.rank, radius)

    def parse(self, text: str) -> Word:
        return parse_word(text, self.names)

    def format(self, w: Word) -> str:
        return format_word(w, self.names)


_TOKEN = re.compile(r"^([A-Za-z_][A-Za-z0-9_.']*)(?:\^(-?\d+))?$")


def parse_word(text: str, names: Sequence[str]) -> Word:
    """Parse a word over ``names``.

    Token syntax (``"a^2 b^-1"`` or ``"a*a*b^-1"``) is always accepted.  When
    every generator name is a single lowercase letter, the compact syntax
    ``"aaB"`` (uppercase = inverse) is accepted as well.  ``""``, ``"1"`` and
    ``"e"`` (unless ``e`` is a generator) denote the identity.
    """
    text = text.strip()
    index = {n: i + 1 for i, n in enumerate(names)}
    if text in ("", "1") or (text in ("e", "ε") and "e" not in index):
        return EMPTY
    compact = all(len(n) == 1 and n.islower() for n in names)
    if compact and re.fullmatch(r"[A-Za-z]+", text):
        raw = []
        for ch in text:
            if ch in index:
                raw.append(index[ch])
            elif ch.lower() in index:
                raw.append(-index[ch.lower()])
            else:
                raise ValueError(f"unknown generator {ch!r} in {text!r}")
        return free_reduce(raw)
    raw = []
    for tok in re.split(r"[\s*]+", text):
        if not tok:
            continue
        m = _TOKEN.match(tok)
        if not m or m.group(1) not in index:
            raise ValueError(f"cannot parse {tok!r} over {list(names)}")
        k = int(m.group(2)) if m.group(2) else 1
        x = index[m.group(1)]
        raw += [x if k > 0 else -x] * abs(k)
    return free_reduce(raw)


def format_word(w: Word, names: Sequence[str]) -> str:
    if not w:
        return "1"
    parts = []
    for x, grp in itertools.groupby(w):
        k = len(list(grp))
        name = names[abs(x) - 1]
        k = k if x > 0 else -k
        parts.append(name if k == 1 else f"{name}^{k}")
    return " ".join(parts)


@dataclass(frozen=True)
class FiniteGroupTable:
    """Multiplication table of a finite group; validated on construction."""

    product: tuple
    identity: int = 0
    names: tuple = field(default=())
    inverse: tuple = field(default=(), compare=False)

    def __post_init__(self):
        table = tuple(tuple(int(x) for x in row) for row in self.product)
        object.__setattr__(self, "product", table)
        n = len(table)
        if n == 0 or any(len(row) != n for row in table):
            raise ValueError("table must be square and nonempty")
        if any(not 0 <= x < n for row in table for x in row):
            raise ValueError("table entries out of range")
        e = self.identity
        if not 0 <= e < n or any(table[e][x] != x or table[x][e] != x for x in range(n)):
            raise ValueError("identity law fails")
        inverse = []
        for x in range(n):
            ys = [y for y in range(n) if table[x][y] == e]
            if len(ys) != 1 or table[ys[0]][x] != e:
                raise ValueError(f"element {x} has no two-sided inverse")
            inverse.append(ys[0])
        for x in range(n):
            tx = table[x]
            for y in range(n):
                txy = table[tx[y]]
                ty = table[y]
                for z in range(n):
                    if txy[z] != tx[ty[z]]:
                        raise ValueError(f"associativity fails at {(x, y, z)}")
        object.__setattr__(self, "inverse", tuple(inverse))
        names = tuple(self.names) or tuple(f"g{i}" for i in range(n))
        if len(names) != n or len(set(names)) != n:
            raise ValueError("names must be distinct, one per element")
        object.__setattr__(self, "names", names)

    @property
    def order(self) -> int:
        return len(self.product)

    def op(self, x: int, y: int) -> int:
        return self.product[x][y]

    def inv(self, x: int) -> int:
        return self.inverse[x]

    def elements(self) -> range:
        return range(self.order)

    def key(self, x: int) -> tuple[int, int]:
        """Shortlex-style key: identity first, then by index."""
        return (0 if x == self.identity else 1, x)

    @classmethod
    def cyclic(cls, n: int, prefix: str = "z") -> "FiniteGroupTable":
        table = [[(i + j) % n for j in range(n)] for i in range(n)]
        return cls(table, 0, tuple(f"{prefix}{i}" for i in range(n)))
