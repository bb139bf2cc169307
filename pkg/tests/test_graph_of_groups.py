import copy
import json
import random

import pytest

from gogtree import EXAMPLES, GraphOfGroups, load_example
from gogtree.graph_of_groups import InvalidGraphOfGroups, example_config
from tests.oracles import certified_nontrivial, finite_quotients


def random_word(rng, n_gens, max_len):
    return tuple(rng.choice([1, -1]) * rng.randint(1, n_gens)
                 for _ in range(rng.randint(0, max_len)))


@pytest.fixture(params=sorted(EXAMPLES))
def gog(request):
    return load_example(request.param)


def test_examples_validate(gog):
    assert gog.report.ok
    clauses = {c.clause for c in gog.report.checks}
    assert {"oriented-graph", "edge-maps", "spanning-tree"} <= clauses


def test_relator_count_formula(gog):
    pres = gog.fundamental_presentation()
    assert len(pres.relators) == gog.expected_relator_count()
    assert set(pres.families) <= {1, 2, 3, 4}


def test_relators_vanish(gog):
    pres = gog.fundamental_presentation()
    for r in pres.relators:
        assert gog.is_identity(gog.word_to_element(r)), pres.format_relator(r)


def test_hnn_relator():
    g = load_example("hnn_malnormal")
    text = g.fundamental_presentation().to_text()
    assert "t a a t^-1 b^-1 b^-1" in text
    assert "t~ t" in text
    # t a^2 t^-1 = b^2 as elements
    names, _ = g.generator_table()
    ix = {n: i + 1 for i, n in enumerate(names)}
    lhs = g.word_to_element((ix["t"], ix["a"], ix["a"], -ix["t"]))
    rhs = g.word_to_element((ix["b"], ix["b"]))
    assert g.element_eq(lhs, rhs)


def test_multiplication_is_a_group_law(gog):
    rng = random.Random(5)
    names, _ = gog.generator_table()
    for _ in range(100):
        u, v, w = (gog.word_to_element(random_word(rng, len(names), 5)) for _ in range(3))
        assert gog.mul(gog.mul(u, v), w) == gog.mul(u, gog.mul(v, w))
        assert gog.is_identity(gog.mul(u, gog.inv(u)))
        assert gog.is_identity(gog.mul(gog.inv(u), u))


def test_relator_insertion_and_perturbation(gog):
    """Inserting relators never changes an element; certified perturbations do."""
    rng = random.Random(17)
    pres = gog.fundamental_presentation()
    n = len(pres.generators)
    quotients = finite_quotients(n, pres.relators, degree=4, count=20, seed=1)
    for _ in range(60):
        u, v = random_word(rng, n, 5), random_word(rng, n, 5)
        r = rng.choice(pres.relators)
        base = gog.word_to_element(u + v)
        assert gog.element_eq(gog.word_to_element(u + r + v), base)
    certified = 0
    for _ in range(200):
        u, v = random_word(rng, n, 5), random_word(rng, n, 5)
        p = random_word(rng, n, 6)
        if not certified_nontrivial(quotients, p):
            continue
        certified += 1
        assert not gog.element_eq(gog.word_to_element(u + p + v), gog.word_to_element(u + v))
    assert certified > 50


def test_britton_reduction_matches_multiplication(gog):
    rng = random.Random(2)
    names, decode = gog.generator_table()
    for _ in range(50):
        w = random_word(rng, len(names), 8)
        p = gog.word_to_element(w)
        again = gog.word_to_element(w[:3])
        again = gog.mul(again, gog.word_to_element(w[3:]))
        assert p == again


def test_coset_rep_absorbs_vertex_group(gog):
    rng = random.Random(8)
    names, _ = gog.generator_table()
    for _ in range(40):
        g = gog.word_to_element(random_word(rng, len(names), 6))
        for v in range(len(gog.vertices)):
            V = gog.group(v)
            h = rng.choice(list(V.ball(2)))
            gh = gog.mul(g, gog.vertex_element(v, h))
            assert gog.coset_rep(gh, v) == gog.coset_rep(g, v)


def test_config_round_trip(gog):
    text = gog.dumps()
    again = GraphOfGroups.loads(text)
    assert again.dumps() == text
    assert json.loads(text) == gog.to_config()


def _expect_invalid(doc, clause):
    with pytest.raises(InvalidGraphOfGroups) as exc:
        GraphOfGroups.from_config(doc)
    assert clause in {c.clause for c in exc.value.report.failures()}


def test_validation_failures():
    base = example_config("double_f2")
    doc = copy.deepcopy(base)
    doc["edges"][0]["images_o"] = ["a^2 b^2", "a^2 b^2 a^2 b^2"]
    doc["edges"][0]["group"]["generators"] = ["c", "d"]
    doc["edges"][0]["images_t"] = ["x^2 y^2", "x^2 y^2 x^2 y^2"]
    _expect_invalid(doc, "edge-maps")              # not injective
    doc = copy.deepcopy(base)
    doc["spanning_tree"] = []
    _expect_invalid(doc, "spanning-tree")          # does not span
    doc = copy.deepcopy(base)
    doc["edges"][0]["t"] = "nowhere"
    with pytest.raises(ValueError, match="unknown vertex"):
        GraphOfGroups.from_config(doc)
    doc = copy.deepcopy(base)
    doc["edges"][0]["images_t"] = ["x^2"]
    doc["edges"][0]["images_o"] = ["a^2 b^2"]
    g = GraphOfGroups.from_config(doc)             # still a valid graph of groups
    assert g.report.ok
