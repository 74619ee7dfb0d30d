from fractions import Fraction
from itertools import combinations, permutations

import pytest
from hypothesis import given, strategies as st

from qpencil.exactcore import (AvoidanceExhausted, Jet, PointStream, SingularEvaluation, identity, mat_det,
                               mat_inverse, mat_mul, mat_trace, rank, rdiv, to_rat)
from qpencil.polyfield import Poly

from conftest import small_rats


def leibniz_det(A):
    n = len(A)
    total = Fraction(0)
    for perm in permutations(range(n)):
        inv = sum(1 for i, j in combinations(range(n), 2) if perm[i] > perm[j])
        term = Fraction((-1) ** inv)
        for i in range(n):
            term *= A[i][perm[i]]
        total += term
    return total


def minor_rank(A):
    """Largest k with a nonzero k x k minor; slow but independent of elimination."""
    rows, cols = len(A), len(A[0]) if A else 0
    for k in range(min(rows, cols), 0, -1):
        for R in combinations(range(rows), k):
            for C in combinations(range(cols), k):
                if leibniz_det([[A[i][j] for j in C] for i in R]) != 0:
                    return k
    return 0


matrices = st.integers(1, 4).flatmap(
    lambda r: st.integers(1, 4).flatmap(
        lambda c: st.lists(st.lists(st.sampled_from([Fraction(0), Fraction(1), Fraction(-2), Fraction(1, 3)]),
                                    min_size=c, max_size=c), min_size=r, max_size=r)))
square = st.integers(1, 4).flatmap(
    lambda n: st.lists(st.lists(small_rats, min_size=n, max_size=n), min_size=n, max_size=n))


@given(matrices)
def test_rank_matches_minor_oracle(A):
    assert rank(A) == minor_rank(A)


@given(square)
def test_det_matches_leibniz(A):
    assert mat_det(A) == leibniz_det(A)


@given(square)
def test_inverse_is_two_sided(A):
    if leibniz_det(A) == 0:
        with pytest.raises(SingularEvaluation):
            mat_inverse(A)
        return
    n = len(A)
    Ai = mat_inverse(A)
    assert mat_mul(A, Ai) == identity(n) and mat_mul(Ai, A) == identity(n)


def test_rank_of_known_matrices():
    assert rank([[1, 2], [2, 4]]) == 1
    assert rank([[0, 0], [0, 0]]) == 0
    assert rank([[Fraction(1, 2), 1, 0], [0, 0, 1], [1, 2, 1]]) == 2


def test_to_rat_rejects_floats():
    assert to_rat("3/4") == Fraction(3, 4)
    with pytest.raises(TypeError):
        to_rat(0.5)


def test_rdiv():
    assert rdiv(1, 3) == Fraction(1, 3)
    assert rdiv(1.0, 4) == 0.25
    with pytest.raises(SingularEvaluation):
        rdiv(1, 0)


@given(st.lists(small_rats, min_size=3, max_size=3), st.integers(0, 2))
def test_jet_derivative_agrees_with_symbolic_partial(pt, k):
    x, y, z = (Poly.var(i) for i in range(3))
    p = x ** 3 * y - Fraction(2, 3) * y * z ** 2 + x * z + 5
    jets = [Jet.variable(pt[i], i, 3) for i in range(3)]
    val = p.eval(jets)
    assert val.value == p.eval(pt)
    assert val.deriv[k] == p.partial(k).eval(pt)


@given(small_rats.filter(lambda v: v != 0), small_rats)
def test_jet_quotient_rule(a, da):
    u = Jet(a, (da,))
    w = Jet(Fraction(3), (Fraction(1),))
    q = w / u
    assert q.value == 3 / a
    assert q.deriv[0] == (1 * a - 3 * da) / a ** 2


def test_jet_reciprocal_at_zero():
    with pytest.raises(SingularEvaluation):
        Jet(0, (1,)).reciprocal()


def test_point_stream_is_deterministic_and_avoids():
    x0 = Poly.var(0)
    a = PointStream(7, 2, [x0]).take(20)
    b = PointStream(7, 2, [x0]).take(20)
    assert a == b
    assert all(p[0] != 0 for p in a)


def test_point_stream_exhaustion():
    with pytest.raises(AvoidanceExhausted):
        PointStream(1, 1, [lambda p: 0], bound=5).next()


def test_trace():
    assert mat_trace([[1, 2], [3, Fraction(1, 2)]]) == Fraction(3, 2)
