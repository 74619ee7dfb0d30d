import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qpencil.exactcore import Jet, base_value, mat_mul, mat_transpose
from qpencil.mvcalc import MultiVector, bracket_of_functions
from qpencil.polyfield import Poly
from qpencil.quiverrep import SpecError, one_arrow, spin_quiver, star_quiver, trace_word
from qpencil.structlib import (BadParams, PencilParams, adjacent_swap_map, basis_params, build_char, build_pencil,
                               build_vdb, psi_bivector, psi_explicit, reordered_model, vdb_bivector)
from qpencil.verifysuite import check_moment_map, check_quasi_poisson

from conftest import rand_rat

ARROWS = ["x", "v1", "v2"]

z_tables = st.dictionaries(
    st.sampled_from([("x", "v1"), ("x", "v2"), ("v1", "v2")]),
    st.fractions(min_value=-4, max_value=4, max_denominator=3), max_size=3)


# ---------------------------------------------------------------- parameters

def test_pencil_params_extend_to_the_double():
    z = PencilParams.from_pairs({("x", "v1"): Fraction(2, 3)})
    assert z.value("x", "v1") == Fraction(2, 3)
    assert z.value("v1", "x") == Fraction(-2, 3)
    assert z.value("x*", "v1") == z.value("x", "v1*") == z.value("x*", "v1*") == Fraction(2, 3)
    assert z.value("x", "x") == 0 and z.value("x", "v2") == 0


@pytest.mark.parametrize("pairs", [{("x", "x"): 1}, {("x*", "v1"): 1}, [(("x", "v1"), 1), (("v1", "x"), 1)]])
def test_pencil_params_reject(pairs):
    with pytest.raises(SpecError):
        PencilParams.from_pairs(pairs)


def test_pencil_params_records(tmp_path):
    z = PencilParams.from_pairs({("x", "v1"): Fraction(-1, 2), ("v2", "v1"): 3})
    path = tmp_path / "z.json"
    path.write_text(json.dumps(z.to_records()))
    assert PencilParams.load(str(path)) == z
    assert z.value("v1", "v2") == -3
    with pytest.raises(SpecError):
        PencilParams.from_records([{"a": "x", "b": "v1"}])
    with pytest.raises(SpecError):
        z.validate(["x", "v1"])


def test_basis_params():
    basis = basis_params(ARROWS)
    assert len(basis) == 3
    assert all(len(z.table) == 1 for z in basis)


# ---------------------------------------------------------------- bivectors

@settings(max_examples=15)
@given(z_tables)
def test_psi_two_routes(table):
    m = spin_quiver(2, 2)
    z = PencilParams.from_pairs(table)
    assert psi_bivector(m, z) == psi_explicit(m, z)


@settings(max_examples=10)
@given(z_tables, z_tables)
def test_psi_is_linear_in_z(t1, t2):
    m = spin_quiver(2, 1)
    z1, z2 = PencilParams.from_pairs(t1), PencilParams.from_pairs(t2)
    summed = {k: z1.value(*k) + z2.value(*k) for k in [("x", "v1"), ("x", "v2"), ("v1", "v2")]}
    assert psi_bivector(m, PencilParams.from_pairs(summed)) == psi_bivector(m, z1) + psi_bivector(m, z2)


@pytest.mark.parametrize("gamma", [0, 1, 3, Fraction(-1, 2)])
def test_one_loop_gl1_bracket_equals_its_factor(gamma):
    """For n = 1 the bracket of x and x* is the moment factor gamma + x x*."""
    from qpencil.quiverrep import one_loop
    P = vdb_bivector(one_loop(1, gamma))
    x, xs = Poly.var(0), Poly.var(1)
    assert bracket_of_functions(P, x, xs) == x * xs + gamma


def test_char_example_value():
    """g = 1, r = 0, n = 1: P = A A* dA ^ dA*."""
    b, psi = build_char(1, 0, 1)
    A, As = Poly.var(0), Poly.var(1)
    expected = MultiVector.basis([0, 1], 2).wedge(MultiVector.function(A * As, 2))
    assert b.P == expected
    assert psi.is_zero()


def test_char_pencil_is_quasi_poisson():
    z = PencilParams.from_pairs({("A1", "A2"): Fraction(3, 2)})
    b, psi = build_char(2, 0, 1, z)
    assert not psi.is_zero()
    assert check_quasi_poisson(b.P + psi, b.model).passed


def test_build_pencil_returns_matching_pieces():
    m = spin_quiver(2, 1)
    z = PencilParams.from_pairs({("x", "v1"): 1, ("v1", "v2"): Fraction(-1, 3)})
    psi, varpi = build_pencil(m, z)
    assert psi == psi_bivector(m, z)
    assert varpi.degree == 2


# ---------------------------------------------------------------- reordering

def _pushforward_equal(model, i, j, k, seed=3):
    target, phi = adjacent_swap_map(model, i, j, k)
    P1, P2 = vdb_bivector(model), vdb_bivector(target)
    rng = random.Random(seed)
    pt = [rand_rat(rng) for _ in range(model.n_vars)]
    n = len(pt)
    img = phi([Jet.variable(pt[u], u, n) for u in range(n)])
    y = [base_value(v) for v in img]
    J = [[v.deriv[u] if isinstance(v, Jet) else 0 for u in range(n)] for v in img]
    return mat_mul(mat_mul(J, P1.bivector_matrix(pt)), mat_transpose(J)) == P2.bivector_matrix(y)


@pytest.mark.parametrize("ijk", [(2, 4, 6), (0, 2, 4), (0, 2, 6), (0, 4, 6)])
def test_swap_map_is_a_poisson_isomorphism(ijk):
    assert _pushforward_equal(spin_quiver(2, 2), *ijk)


def test_swap_map_on_star_quiver():
    assert _pushforward_equal(star_quiver([1, 1], 2), 0, 2, 4)


def test_swap_map_rejects_split_pairs():
    with pytest.raises(BadParams):
        adjacent_swap_map(spin_quiver(2, 2), 1, 2, 3)
    with pytest.raises(BadParams):
        adjacent_swap_map(spin_quiver(2, 2), 0, 3, 2)


def test_identity_map_does_not_intertwine_reorderings():
    """Trace brackets change under a plain reordering; only the swap map matches them."""
    m = spin_quiver(2, 2)
    m2 = reordered_model(m, ["x", "x*", "v2", "v2*", "v1", "v1*"])
    idx = {name: i for i, name in enumerate(m.var_names)}
    rename = [Poly.var(idx[name]) for name in m2.var_names]
    f, g = ("v1", "v2*"), ("x", "v1*", "v1")
    lhs = bracket_of_functions(vdb_bivector(m), trace_word(m, f), trace_word(m, g))
    rhs = bracket_of_functions(vdb_bivector(m2), trace_word(m2, f), trace_word(m2, g)).eval(rename)
    assert lhs != rhs


def test_reordering_keeps_quasi_poisson():
    m = reordered_model(one_arrow(2, 1), ["a*", "a"])
    assert check_quasi_poisson(vdb_bivector(m), m).passed


def test_moment_map_of_bundle():
    m = one_arrow(2, 1)
    b = build_vdb(m)
    assert check_moment_map(b.P, b.Phi, m, 4, 11, b.determinant_guards()).passed
