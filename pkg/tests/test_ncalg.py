import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from qpencil import ncalg
from qpencil.ncalg import (NCError, NecklacePoly, PathAlgebra, c_coefficient, check_c_formula, check_mixed_identity,
                           check_mixed_jacobi, check_rep_morphism, check_weak_poisson, dbr_outer_paths,
                           dbr_right_paths, necklace, pencil_bracket, represent, trace_bracket_vdb,
                           trace_bracket_z)
from qpencil.mvcalc import bracket_of_functions
from qpencil.quiverrep import closed_paths, one_arrow, one_loop, spin_quiver, trace_word
from qpencil.structlib import PencilParams, psi_bivector, vdb_bivector

Q2 = spin_quiver(2, 2)
ALG = PathAlgebra(Q2)
Z = PencilParams.from_pairs({("x", "v1"): Fraction(1, 2), ("x", "v2"): -2, ("v1", "v2"): 3})


def nk(*word):
    return NecklacePoly.of(necklace(ALG, word))


@st.composite
def words(draw, max_len=4):
    """Random composable word on the double of Q2."""
    length = draw(st.integers(1, max_len))
    w = [draw(st.sampled_from(Q2.blocks))]
    while len(w) < length:
        nxt = [b for b in Q2.blocks if Q2.tail_of[b] == Q2.head_of[w[-1]]]
        w.append(draw(st.sampled_from(nxt)))
    return ALG.word(w)


def _swap(T):
    return {(v, u): c for (u, v), c in T.items()}


def _neg(T):
    return {k: -c for k, c in T.items()}


@given(words(), words())
def test_outer_bracket_cyclic_antisymmetry(p, q):
    assert dbr_outer_paths(ALG, q, p) == _neg(_swap(dbr_outer_paths(ALG, p, q)))


@given(words(), words())
def test_right_bracket_cyclic_antisymmetry(p, q):
    assert dbr_right_paths(ALG, q, p, Z) == _neg(_swap(dbr_right_paths(ALG, p, q, Z)))


@given(words(3), words(2), words(2))
def test_outer_bracket_derivation_in_second_slot(p, b, c):
    bc = ALG.mul_paths(b, c)
    if bc is None:
        return
    expected: dict = {}
    for (u, v), k in dbr_outer_paths(ALG, p, c).items():
        left = ALG.mul_paths(b, u)
        if left is not None:
            expected[(left, v)] = expected.get((left, v), 0) + k
    for (u, v), k in dbr_outer_paths(ALG, p, b).items():
        right = ALG.mul_paths(v, c)
        if right is not None:
            expected[(u, right)] = expected.get((u, right), 0) + k
    assert dbr_outer_paths(ALG, p, bc) == {k: v for k, v in expected.items() if v}


def test_paths():
    with pytest.raises(NCError):
        ALG.word(())
    assert ALG.mul_paths(ALG.arrow("v1"), ALG.arrow("x")) is not None
    assert ALG.mul_paths(ALG.arrow("x"), ALG.arrow("v1")) is None
    assert ALG.epsilon("x") == 1 and ALG.epsilon("x*") == -1
    with pytest.raises(NCError):
        PathAlgebra(__import__("qpencil.structlib", fromlist=["char_model"]).char_model(1, 0, 1))


@given(words(6))
def test_necklace_is_rotation_invariant(p):
    w = p[1]
    n = necklace(ALG, w)
    if Q2.head_of[w[-1]] != Q2.tail_of[w[0]]:
        assert n is None
        return
    for k in range(len(w)):
        assert necklace(ALG, w[k:] + w[:k]) == n


def test_necklace_poly_arithmetic():
    f, g = nk("x"), nk("v1", "v1*")
    h = f * g + f * f
    assert h.partial(necklace(ALG, ("x",))) == g + f * 2
    assert (h - h).terms == {}
    assert set(h.necklaces()) == {necklace(ALG, ("x",)), necklace(ALG, ("v1", "v1*"))}


def test_example_brackets():
    one_x = nk("x")
    assert trace_bracket_vdb(ALG, one_x, nk("x*")).terms == nk("x", "x*").terms
    lhs = pencil_bracket(ALG, nk("x", "x*"), nk("v1", "x", "v1*"), Z, 1)
    assert lhs.terms == (nk("x", "x*", "x", "v1*", "v1") * -1).terms
    assert c_coefficient(ALG, necklace(ALG, ("x",)), necklace(ALG, ("v1", "v2*")), Z) == Fraction(5, 2)
    assert trace_bracket_z(ALG, one_x, nk("v1", "v2*"), Z).terms == (one_x * nk("v1", "v2*") * Fraction(5, 2)).terms


def test_c_formula_short_words():
    assert check_c_formula(ALG, closed_paths(Q2, 3), Z).passed


def test_weak_poisson_q2():
    rng = random.Random(4)
    for _ in range(2):
        assert check_weak_poisson(Q2, ncalg.random_params(Q2.quiver.originals, rng)).passed


def test_mixed_identity_and_jacobi():
    rng = random.Random(8)
    for _ in range(8):
        f, g, h = (ncalg.random_necklace(ALG, rng, 3) for _ in range(3))
        assert check_mixed_identity(ALG, f, g, h, Z).passed
        F, G, H = (NecklacePoly.of(x) for x in (f, g, h))
        assert check_mixed_jacobi(ALG, F, G, H, Z, rng.choice((0, 1, Fraction(2, 3)))).passed


def test_represent_against_trace_words():
    f = nk("x", "x*") * nk("v1", "v2*") + nk("x") * 3
    expected = trace_word(Q2, ("x", "x*")) * trace_word(Q2, ("v1", "v2*")) + trace_word(Q2, ("x",)) * 3
    assert represent(Q2, f) == expected


def test_trace_bracket_matches_bivector_symbolically():
    """Two routes for one pair: necklace bracket represented vs the bivector on traces."""
    f, g = ("x", "x*"), ("v1", "x", "v1*")
    nc = represent(Q2, pencil_bracket(ALG, nk(*f), nk(*g), Z, 1))
    P = vdb_bivector(Q2) + psi_bivector(Q2, Z)
    assert nc == bracket_of_functions(P, trace_word(Q2, f), trace_word(Q2, g))


@pytest.mark.parametrize("model, pairs", [
    (one_loop(2, 0), [(("x",), ("x*",)), (("x", "x*"), ("x", "x", "x*"))]),
    (one_loop(2, 3), [(("x", "x"), ("x*", "x"))]),
    (one_arrow(2, 1), [(("a", "a*"), ("a", "a*", "a", "a*"))]),
])
def test_rep_morphism_without_pencil(model, pairs):
    assert check_rep_morphism(model, pairs, PencilParams(), 1, n_points=3).passed


@pytest.mark.parametrize("z0", [0, 1, Fraction(-3, 2)])
def test_rep_morphism_on_q2(z0):
    pairs = [(("v1", "v1*"), ("v2", "v2*")), (("x",), ("v1", "v2*")), (("v1", "v2*"), ("v2", "x*", "v1*"))]
    assert check_rep_morphism(Q2, pairs, Z, z0, n_points=3).passed


def test_rep_morphism_detects_a_wrong_bivector():
    r = check_rep_morphism(Q2, [(("x",), ("v1", "v2*"))], Z, 1, n_points=3,
                           bivector=vdb_bivector(Q2) + psi_bivector(Q2, Z.scale(-1)))
    assert r.status == "fail"
