"""Brute-force oracles that share no code with the folding machinery."""
from collections import deque

from gogtree.words import free_reduce, inv


def _lcp(x, y):
    n = 0
    for a, b in zip(x, y):
        if a != b:
            break
        n += 1
    return n


def bf_member(gens, w, slack=None) -> bool:
    """Is w a product of the generators?  Targeted BFS over partial products.

    A partial product p is kept while it stays within ``slack`` letters of a
    prefix of w.  For Nielsen-reduced generating sets (every factor keeps at
    least one letter in a reduced product) slack = max generator length makes
    the search complete.
    """
    w = tuple(w)
    gens = [tuple(g) for g in gens if g]
    if not w:
        return True
    if not gens:
        return False
    if slack is None:
        slack = max(len(g) for g in gens)
    steps = gens + [inv(g) for g in gens]
    seen = {()}
    queue = deque([()])
    while queue:
        p = queue.popleft()
        for g in steps:
            q = free_reduce(p + g)
            if q in seen:
                continue
            if len(q) - _lcp(q, w) > slack or len(q) > len(w) + slack:
                continue
            if q == w:
                return True
            seen.add(q)
            queue.append(q)
    return False


def bf_conjugate_member(gens, x, w) -> bool:
    """w in x <gens> x^-1."""
    return bf_member(gens, free_reduce(inv(x) + tuple(w) + tuple(x)))


def bf_schreier_reps(member, rank, bound):
    """Shortlex-least representative of each right coset H g with |g| <= bound.

    ``member`` decides H-membership; cosets are told apart by u v^-1.
    """
    from gogtree.words import ball
    reps = []
    for g in ball(rank, bound):
        if not any(member(free_reduce(g + inv(r))) for r in reps):
            reps.append(g)
    return reps


def _a_parity(w) -> bool:
    return sum(1 for x in w if abs(x) == 1) % 2 == 0


# Finite-index subgroups get closed-form oracles: <a^2, b, a b a^-1> is the
# kernel of F(a,b) -> Z/2 (a -> 1, b -> 0), Schreier transversal {1, a};
# <a, a b> is everything.  Enumerating them by products would be hopeless.
CLOSED_FORMS = {"a2_b_aba": _a_parity, "a_ab": lambda w: True}


def subgroup_oracle(name):
    from gogtree.stallings import BUNDLED_SUBGROUPS
    from gogtree.words import parse_word
    if name in CLOSED_FORMS:
        return CLOSED_FORMS[name]
    gens = [parse_word(g, ["a", "b"]) for g in BUNDLED_SUBGROUPS[name]]
    return lambda w: bf_member(gens, w)


# -- finite quotients ----------------------------------------------------------------------
def _perm_mul(p, q):
    """p then q."""
    return tuple(q[i] for i in p)


def _perm_inv(p):
    out = [0] * len(p)
    for i, j in enumerate(p):
        out[j] = i
    return tuple(out)


def eval_perm(rho, word):
    n = len(next(iter(rho.values())))
    out = tuple(range(n))
    for x in word:
        g = rho[abs(x)]
        out = _perm_mul(out, g if x > 0 else _perm_inv(g))
    return out


def finite_quotients(n_gens, relators, degree=4, count=20, seed=0):
    """Homomorphisms to S_degree (dicts gen -> perm) killing every relator.

    Found by depth-first search over generator images, checking each relator
    as soon as all its letters are assigned.  Different seeds shuffle the
    candidate order, so repeated searches give different quotients.
    """
    import itertools
    import random
    perms = list(itertools.permutations(range(degree)))
    due = {k: [] for k in range(1, n_gens + 1)}
    for r in relators:
        if r:
            due[max(abs(x) for x in r)].append(r)
    ident = tuple(range(degree))
    found = []
    rng = random.Random(seed)
    for attempt in range(count * 5):
        order = [rng.sample(perms, len(perms)) for _ in range(n_gens)]
        rho = {}

        def dfs(k):
            if k > n_gens:
                return True
            for p in order[k - 1]:
                rho[k] = p
                if all(eval_perm(rho, r) == ident for r in due[k]) and dfs(k + 1):
                    return True
            del rho[k]
            return False

        if dfs(1) and any(p != ident for p in rho.values()) and rho not in found:
            found.append(dict(rho))
        if len(found) >= count:
            break
    return found


def certified_nontrivial(quotients, word) -> bool:
    """Some finite quotient maps the word to a nontrivial permutation."""
    for rho in quotients:
        n = len(rho[1])
        if eval_perm(rho, word) != tuple(range(n)):
            return True
    return False
