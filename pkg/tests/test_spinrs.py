import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qpencil import spinrs
from qpencil.polyfield import Poly
from qpencil.spinrs import (DegeneratePoint, Layout, SpinBracketTable, SpinRSPoint, ao_table, bracket0_table,
                            check_casimirs, check_flow, check_hamiltonian, check_integrability_algebras,
                            check_jacobi_local, check_table_equal, check_tangency, check_upstairs_psi_g,
                            closed_form_n1, flow, flow_point, g_function, moment_slice_residual,
                            pencil_rank_local, random_point, reverse_spins, special_point, z_minus,
                            z_table)
from qpencil.structlib import BadParams

N, D, Q = 3, 3, Fraction(5, 2)
ZT = z_table(D, {(1, 2): Fraction(1, 3), (2, 3): -2})
TABLE = SpinBracketTable.build(D, 1, ZT)


@pytest.fixture(scope="module")
def points():
    return [random_point(N, D, Q, random.Random(s)) for s in range(3)]


def test_check_q():
    assert spinrs.check_q("5/2", 3) == Q
    for q, n in [(0, 2), (-1, 2), (1, 1), (-1, 3)]:
        with pytest.raises(BadParams):
            spinrs.check_q(q, n)
    assert spinrs.check_q(-1, 1) == -1


def test_point_validation():
    with pytest.raises(DegeneratePoint):
        SpinRSPoint.build([1, 1], [[1, 0], [0, 1]], [[1, 1], [1, 1]], Q)
    with pytest.raises(DegeneratePoint):
        SpinRSPoint.build([1, 2], [[1, 1], [0, 1]], [[1, 1], [1, 1]], Q)
    with pytest.raises(DegeneratePoint):
        SpinRSPoint.build([2, Fraction(4, 5)], [[1, 0], [0, 1]], [[1, 1], [1, 1]], Q)  # x1 = q x2
    p = random_point(2, 2, Q, random.Random(1))
    assert SpinRSPoint.from_coords(2, 2, Q, p.coords()).coords() == p.coords()


def test_layout_names():
    assert Layout(2, 2).names() == ["x1", "x2", "a1^1", "a1^2", "a2^1", "a2^2", "b1^1", "b1^2", "b2^1", "b2^2"]


def test_g_is_antisymmetric_symbolically():
    n, d = 2, 3
    a = [[Poly.var(i * d + al) for al in range(d)] for i in range(n)]
    z = [[Poly.zero()] * d for _ in range(d)]
    k = n * d
    for al in range(d):
        for be in range(al + 1, d):
            z[al][be] = Poly.var(k)
            z[be][al] = -Poly.var(k)
            k += 1
    for i in range(n):
        for j in range(n):
            for al in range(d):
                for be in range(d):
                    assert g_function(a, z, i, j, al, be) == -g_function(a, z, j, i, be, al)


def test_raw_tables_are_antisymmetric(points):
    for p in points:
        v = p.coords()
        for T in (bracket0_table(N, D, Q, v, raw=True), ao_table(N, D, Q, v, 1, raw=True),
                  ao_table(N, D, Q, v, -1, raw=True)):
            size = len(T)
            for u in range(N, size):
                for w in range(N, size):
                    if (u < N + N * D) == (w < N + N * D):
                        assert T[u][w] == -T[w][u]


def test_tables_are_antisymmetric(points):
    v = points[0].coords()
    T = TABLE.table(N, D, Q, v)
    assert all(T[u][w] == -T[w][u] for u in range(len(T)) for w in range(len(T)))


def test_ao_decomposition(points):
    zm = z_minus(D)
    assert check_table_equal(lambda p: ao_table(N, D, Q, p.coords(), -1),
                             lambda p: SpinBracketTable.build(D, 1, zm).table(N, D, Q, p.coords()),
                             points, "ao").passed


def test_ao_decomposition_rejects_wrong_parameters(points):
    zm = [[-v for v in row] for row in z_minus(D)]
    assert check_table_equal(lambda p: ao_table(N, D, Q, p.coords(), -1),
                             lambda p: SpinBracketTable.build(D, 1, zm).table(N, D, Q, p.coords()),
                             points, "ao").status == "fail"


def test_ao_relabel(points):
    assert check_table_equal(lambda p: ao_table(N, D, Q, p.coords(), 1),
                             lambda p: ao_table(N, D, Q, p.coords(), -1),
                             points, "relabel", relabel=reverse_spins).passed


def test_tangency_and_casimirs(points):
    assert check_tangency(lambda p: TABLE.table(p.n, p.d, p.q, p.coords()), points).passed
    assert check_casimirs({(1, 2): Fraction(1, 3), (2, 3): -2}, points).passed


def test_hamiltonian_field(points):
    assert check_hamiltonian(TABLE, points).passed
    assert check_hamiltonian(SpinBracketTable.build(D, Fraction(-2, 7), ZT), points).passed


def test_jacobi_and_its_control(points):
    assert check_jacobi_local(TABLE, points[:1]).passed
    assert check_jacobi_local(TABLE, points[:1], quadratic=False).status == "fail"


def test_moment_slice(points):
    from qpencil.exactcore import mat_add, mat_inverse, mat_mul
    for p in points:
        assert all(v == 0 for row in moment_slice_residual(p) for v in row)
        M = spinrs.chart_matrices(p)
        total = M["Z"]
        for A, B in zip(M["A"], M["B"]):
            total = mat_add(total, mat_mul(A, B))
        lhs = mat_mul(mat_mul(mat_mul(M["X"], M["Z"]), mat_inverse(M["X"])), mat_inverse(total))
        assert lhs == [[Q if i == j else 0 for j in range(N)] for i in range(N)]


@pytest.mark.parametrize("d, rank", [(2, 0), (3, 1), (4, 3), (5, 6)])
def test_special_point_rank(d, rank):
    assert pencil_rank_local(special_point(3, d, Q, random.Random(d))) == rank


@pytest.mark.parametrize("d", [3, 4])
def test_rank_at_random_points_matches_special_point(d):
    """Observed value only; the exact pencil order is not claimed."""
    for s in range(2):
        p = random_point(3, d, Q, random.Random(s))
        assert pencil_rank_local(p) == spinrs.expected_special_rank(d)


def test_integrability(points):
    reports = check_integrability_algebras(TABLE, points[:1], 2)
    assert [r.status for r in reports] == ["pass"] * 3


def test_flow_step_halving():
    p = flow_point(N, D, Q, random.Random(3))
    a = flow(p, 0.5, 1e-2, record_every=50)
    b = flow(p, 0.5, 5e-3, record_every=100)
    assert max(abs(u - v) for u, v in zip(a.states[-1], b.states[-1])) < 1e-7
    assert b.max_drift() < 1e-8


def test_flow_csv():
    p = flow_point(2, 2, Q, random.Random(3))
    res = flow(p, 0.01, 1e-3, record_every=5)
    lines = res.to_csv().splitlines()
    assert lines[0].startswith("t,x1,x2,a1^1") and "tr(Z^1)" in lines[0]
    assert len(lines) == 1 + len(res.times) == 4


@given(st.integers(0, 10 ** 6))
@settings(max_examples=5)
def test_flow_n1_closed_form(seed):
    p = flow_point(1, 3, Q, random.Random(seed))
    res = flow(p, 1.0, 1e-3, record_every=1000)
    assert abs(res.states[-1][0] - closed_form_n1(p, 1.0)) < 1e-10 * abs(closed_form_n1(p, 1.0))


def test_check_flow():
    assert check_flow(flow_point(N, D, Q, random.Random(1))).passed


def test_flow_rejects_bad_steps():
    with pytest.raises(BadParams):
        flow(flow_point(1, 2, Q, random.Random(1), 0), 1.0, 0)


def test_upstairs_psi():
    r = check_upstairs_psi_g(2, 2, {(1, 2): Fraction(3, 2)}, 1)
    assert r.passed
