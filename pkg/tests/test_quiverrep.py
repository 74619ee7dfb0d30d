import pytest
from hypothesis import given, strategies as st

from qpencil.exactcore import mat_mul, mat_trace
from qpencil.mvcalc import schouten
from qpencil.quiverrep import (ACTION_BRACKET_SIGN, DimensionMismatch, PathNotClosed, Quiver, SpecError,
                               UnknownArrow, cartan_trivector, closed_paths, cyclic_action_field,
                               cyclic_action_field_trace, infinitesimal_action, infinitesimal_action_trace,
                               lie_fields, load_model, model_from_spec, one_arrow, one_loop, spin_quiver,
                               star_name, star_quiver, trace_word)
from qpencil.structlib import local_block

from conftest import rand_rat, small_rats

Q2_SPEC = {
    "vertices": ["0", "inf"],
    "arrows": [{"name": "x", "tail": "0", "head": "0", "gamma": "0"},
               {"name": "v1", "tail": "inf", "head": "0", "gamma": 1},
               {"name": "v2", "tail": "inf", "head": "0", "gamma": 1}],
    "dims": {"0": 2, "inf": 1},
}


def test_spec_parsing_and_induced_ordering():
    m = model_from_spec(Q2_SPEC)
    assert m.quiver.ordering == ("x", "x*", "v1", "v1*", "v2", "v2*")
    # blocks: x, x* are 2x2, the four framing blocks are 1x2 or 2x1
    assert m.n_vars == 2 * 4 + 4 * 2
    assert m.block_shape("v1") == (1, 2) and m.block_shape("v1*") == (2, 1)


def test_spec_file_matches_builtin(tmp_path):
    import json
    path = tmp_path / "q2.json"
    path.write_text(json.dumps(Q2_SPEC))
    assert load_model(str(path)).var_names == spin_quiver(2, 2).var_names


@pytest.mark.parametrize("mutate, err", [
    (lambda s: s.pop("dims"), SpecError),
    (lambda s: s.update(colour="red"), SpecError),
    (lambda s: s["arrows"].append({"name": "x", "tail": "0", "head": "0"}), SpecError),
    (lambda s: s["arrows"].append({"name": "y", "tail": "0", "head": "nowhere"}), SpecError),
    (lambda s: s["arrows"].append({"name": "y*", "tail": "0", "head": "0"}), SpecError),
    (lambda s: s["arrows"].append({"name": "y"}), SpecError),
])
def test_spec_errors(mutate, err):
    import copy
    spec = copy.deepcopy(Q2_SPEC)
    mutate(spec)
    with pytest.raises(err):
        model_from_spec(spec)


def test_bad_dims_and_arrows():
    with pytest.raises((SpecError, DimensionMismatch)):
        model_from_spec({**Q2_SPEC, "dims": {"0": 0, "inf": 1}})
    with pytest.raises(UnknownArrow):
        spin_quiver(2, 2).check_arrow("w")


def test_star_name_is_an_involution():
    assert star_name("a") == "a*" and star_name("a*") == "a"


def _adjacency_count(model, max_len):
    verts = model.quiver.vertices
    idx = {v: i for i, v in enumerate(verts)}
    A = [[0] * len(verts) for _ in verts]
    for a in model.blocks:
        A[idx[model.tail_of[a]]][idx[model.head_of[a]]] += 1
    total, Ak = 0, A
    for _ in range(max_len):
        total += mat_trace(Ak)
        Ak = mat_mul(Ak, A)
    return total


@pytest.mark.parametrize("model", [one_loop(1), one_arrow(1, 1), spin_quiver(2, 1), star_quiver([1, 2], 1)])
def test_closed_path_count_matches_adjacency_traces(model):
    assert len(closed_paths(model, 5)) == _adjacency_count(model, 5)


def test_trace_word_against_numeric_product(rng):
    m = spin_quiver(2, 3)
    pt = [rand_rat(rng) for _ in range(m.n_vars)]
    for word in [("x",), ("x", "x*"), ("v1", "x", "v2*"), ("v1*", "v1", "x", "x")]:
        M = local_block(m, word[0], pt)
        for a in word[1:]:
            M = mat_mul(M, local_block(m, a, pt))
        assert trace_word(m, word).eval(pt) == mat_trace(M)
    with pytest.raises(PathNotClosed):
        trace_word(m, ("v1", "x"))


def _random_xi(model, rng):
    xi = [[0] * model.size for _ in range(model.size)]
    for _, o, n in model.vertex_blocks():
        for i in range(n):
            for j in range(n):
                xi[o + i][o + j] = rand_rat(rng)
    return xi


def test_infinitesimal_action_two_routes(rng):
    for m in (spin_quiver(2, 2), one_arrow(2, 1), star_quiver([1, 1], 2)):
        xi = _random_xi(m, rng)
        assert infinitesimal_action(m, xi) == infinitesimal_action_trace(m, xi)


def test_cyclic_field_two_routes():
    m = spin_quiver(2, 2)
    for b in ("x", "v1", "v2*"):
        assert cyclic_action_field(m, b) == cyclic_action_field_trace(m, b)


def test_action_is_a_lie_morphism(rng):
    m = one_arrow(2, 1)
    xi, eta = _random_xi(m, rng), _random_xi(m, rng)
    br = [[sum(xi[i][k] * eta[k][j] - eta[i][k] * xi[k][j] for k in range(m.size))
           for j in range(m.size)] for i in range(m.size)]
    lhs = schouten(infinitesimal_action(m, xi), infinitesimal_action(m, eta))
    assert lhs == infinitesimal_action(m, br).scale(ACTION_BRACKET_SIGN)


def test_non_block_diagonal_xi_is_rejected():
    m = one_arrow(1, 1)
    with pytest.raises(DimensionMismatch):
        infinitesimal_action(m, [[0, 1], [0, 0]])


@given(st.lists(small_rats, min_size=8, max_size=8))
def test_traces_are_invariant(pt):
    m = one_loop(2)
    f = trace_word(m, ("x", "x*", "x"))
    assert all(F.apply(f).is_zero() for F in lie_fields(m))
    assert f.eval(pt) == mat_trace(mat_mul(mat_mul(local_block(m, "x", pt), local_block(m, "x*", pt)),
                                           local_block(m, "x", pt)))


def test_cartan_trivector_is_invariant():
    m = one_loop(2)
    phi = cartan_trivector(m)
    assert not phi.is_zero()
    assert all(schouten(F, phi).is_zero() for F in lie_fields(m))


def test_gl1_has_no_cartan_trivector():
    assert cartan_trivector(one_arrow(1, 1)).is_zero()


def test_quiver_star_shape():
    assert star_quiver([1, 1], 2).quiver.is_star_shaped()
    assert not Quiver.build(["0"], [("x", "0", "0"), ("y", "0", "0")]).is_star_shaped()
