"""Quivers, representation-space coordinates and the GL action.

Paths are read left to right, so the block ``X_a`` of an arrow ``a: s -> t``
has size ``n_s x n_t`` and sits at rows of ``s`` and columns of ``t`` inside
one global ``N x N`` matrix, ``N = sum_s n_s``.  The group acts by
``g . X_a = g_s X_a g_t^{-1}`` and the infinitesimal action is normalized by
``xi_M(X_a) = X_a xi - xi X_a``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

from .exactcore import to_rat
from .mvcalc import MatExpr, MatVec, MultiVector
from .polyfield import Poly

# xi -> xi_M satisfies schouten(xi_M, zeta_M) = ACTION_BRACKET_SIGN * ([xi, zeta])_M.
# With xi_M(X_a) = X_a xi - xi X_a this is a homomorphism; measured on gl_2 by
# tests/test_quiverrep.py::test_action_bracket_sign.
ACTION_BRACKET_SIGN = 1

# Global sign of the pushed-forward Cartan trivector relative to the Schouten
# normalization in mvcalc.  Calibrated once on the 1-arrow quiver with dims
# (2, 1), gamma = 1; every other model is then an independent check.
CARTAN_SIGN = -1


class UnknownArrow(KeyError):
    pass


class DimensionMismatch(ValueError):
    pass


class SpecError(ValueError):
    """Malformed quiver description or parameter file."""


def star_name(name: str) -> str:
    return name[:-1] if name.endswith("*") else name + "*"


@dataclass(frozen=True)
class Quiver:
    vertices: tuple
    arrows: tuple  # original arrows as (name, tail, head)
    ordering: tuple  # total order on the double

    @classmethod
    def build(cls, vertices: Sequence, arrows: Sequence, ordering: Sequence | None = None) -> "Quiver":
        vertices = tuple(str(v) for v in vertices)
        arrows = tuple((str(n), str(t), str(h)) for n, t, h in arrows)
        names = [a[0] for a in arrows]
        if len(set(names)) != len(names):
            raise SpecError("duplicate arrow names")
        for n, t, h in arrows:
            if n.endswith("*"):
                raise SpecError(f"original arrow name {n!r} may not end with '*'")
            if t not in vertices or h not in vertices:
                raise SpecError(f"arrow {n!r} uses an unknown vertex")
        double = [x for n in names for x in (n, n + "*")]
        if not ordering:
            ordering = double
        else:
            ordering = [str(o) for o in ordering]
            if set(ordering) <= set(names) and len(ordering) == len(names):
                ordering = [x for n in ordering for x in (n, n + "*")]
            if sorted(ordering) != sorted(double):
                raise SpecError("ordering must list every arrow of the double exactly once")
        return cls(vertices, arrows, tuple(ordering))

    @cached_property
    def tail(self) -> dict:
        out = {}
        for n, t, h in self.arrows:
            out[n], out[n + "*"] = t, h
        return out

    @cached_property
    def head(self) -> dict:
        out = {}
        for n, t, h in self.arrows:
            out[n], out[n + "*"] = h, t
        return out

    @cached_property
    def originals(self) -> tuple:
        return tuple(a[0] for a in self.arrows)

    def star(self, a: str) -> str:
        self.check_arrow(a)
        return star_name(a)

    def epsilon(self, a: str) -> int:
        self.check_arrow(a)
        return -1 if a.endswith("*") else 1

    def check_arrow(self, a: str) -> None:
        if a not in self.tail:
            raise UnknownArrow(a)

    @cached_property
    def position(self) -> dict:
        return {a: k for k, a in enumerate(self.ordering)}

    def less(self, a: str, b: str) -> bool:
        return self.position[a] < self.position[b]

    def o(self, a: str, b: str) -> int:
        """Ordering sign: +1 if a < b, -1 if a > b, 0 if equal."""
        pa, pb = self.position[a], self.position[b]
        return (pa < pb) - (pa > pb)

    def is_star_shaped(self) -> bool:
        """Every vertex but one center has in-degree <= 1 in Q and the
        underlying graph of Q is a tree."""
        verts = set(self.vertices)
        if len(self.arrows) != len(verts) - 1:
            return False
        parent = {v: v for v in verts}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for _, t, h in self.arrows:
            rt, rh = find(t), find(h)
            if rt == rh:
                return False
            parent[rt] = rh
        degree = {v: 0 for v in verts}
        for _, t, h in self.arrows:
            degree[t] += 1
            degree[h] += 1
        return sum(1 for d in degree.values() if d > 2) <= 1


@dataclass(frozen=True)
class LieData:
    """Elementary basis of gl_n (block-diagonal), dual basis under the trace form."""

    basis: tuple  # (vertex, i, j)
    size: int
    offsets: Mapping

    def matrix(self, k: int) -> list:
        v, i, j = self.basis[k]
        o = self.offsets[v]
        M = [[Fraction(0)] * self.size for _ in range(self.size)]
        M[o + i][o + j] = Fraction(1)
        return M

    def dual_index(self, k: int) -> int:
        v, i, j = self.basis[k]
        return self.basis.index((v, j, i))

    def dual_matrix(self, k: int) -> list:
        return self.matrix(self.dual_index(k))

    def structure_constant(self, a: int, b: int, c: int) -> Fraction:
        """``(E^a, [E^b, E^c])`` with ``E^{(v,i,j)} = E_{(v,j,i)}``."""
        va, ia, ja = self.basis[a]
        vb, ib, jb = self.basis[b]
        vc, ic, jc = self.basis[c]
        if not (va == vb == vc):
            return Fraction(0)
        # duals: E^a = e_{ja ia}; tr(e_{pq} e_{rs} e_{tu}) = [q=r][s=t][u=p]
        p, q = ja, ia
        r, s = jb, ib
        t, u = jc, ic
        first = (q == r) and (s == t) and (u == p)
        second = (q == t) and (u == r) and (s == p)
        return Fraction(int(first) - int(second))

    def __len__(self):
        return len(self.basis)


class QuiverModel:
    """Quiver with dimension vector, deformation parameters and coordinates.

    ``blocks`` lists the coordinate matrices in layout order; for a quiver it
    is the ordering of the double.  Builders for non-quiver spaces (character
    varieties) pass their own blocks and ``quiver=None``.
    """

    def __init__(self, quiver: Quiver | None, dims: Mapping, gamma: Mapping | None = None,
                 blocks: Sequence | None = None, vertices: Sequence | None = None):
        self.quiver = quiver
        if quiver is not None:
            vertices = quiver.vertices
            blocks = [(a, quiver.tail[a], quiver.head[a]) for a in quiver.ordering]
        self.vertices = tuple(str(v) for v in vertices)
        self.blocks = tuple(b[0] for b in blocks)
        self.tail_of = {b[0]: str(b[1]) for b in blocks}
        self.head_of = {b[0]: str(b[2]) for b in blocks}
        self.dims = {}
        for v in self.vertices:
            if v not in dims:
                raise SpecError(f"missing dimension for vertex {v!r}")
            n = dims[v]
            if isinstance(n, bool) or not isinstance(n, int) or n <= 0:
                raise SpecError(f"dimension of vertex {v!r} must be a positive integer, got {n!r}")
            self.dims[v] = n
        g = {}
        if quiver is not None:
            for a in quiver.originals:
                val = to_rat((gamma or {}).get(a, 1))
                g[a] = val
                g[a + "*"] = val
        self.gamma = g
        self.offsets = {}
        off = 0
        for v in self.vertices:
            self.offsets[v] = off
            off += self.dims[v]
        self.size = off
        self.var_of: dict = {}
        self.var_names: list = []
        for a in self.blocks:
            nt, nh = self.dims[self.tail_of[a]], self.dims[self.head_of[a]]
            for i in range(nt):
                for j in range(nh):
                    self.var_of[(a, i, j)] = len(self.var_names)
                    self.var_names.append(f"{a}[{i + 1},{j + 1}]")
        self.n_vars = len(self.var_names)
        basis = tuple((v, i, j) for v in self.vertices for i in range(self.dims[v])
                      for j in range(self.dims[v]))
        self.lie = LieData(basis, self.size, dict(self.offsets))

    # -- coordinates
    def arrows(self) -> tuple:
        return self.blocks

    def check_arrow(self, a: str) -> None:
        if a not in self.tail_of:
            raise UnknownArrow(a)

    def block_shape(self, a: str) -> tuple:
        self.check_arrow(a)
        return self.dims[self.tail_of[a]], self.dims[self.head_of[a]]

    def var(self, a: str, i: int, j: int) -> int:
        """Ordinal of the coordinate (X_a)_{ij}, 0-based local indices."""
        self.check_arrow(a)
        try:
            return self.var_of[(a, i, j)]
        except KeyError:
            raise DimensionMismatch(f"({i},{j}) outside block of {a}") from None

    def block_entries(self, a: str):
        """(global row, global col, var) for every entry of X_a."""
        self.check_arrow(a)
        ot, oh = self.offsets[self.tail_of[a]], self.offsets[self.head_of[a]]
        nt, nh = self.block_shape(a)
        return [(ot + i, oh + j, self.var_of[(a, i, j)]) for i in range(nt) for j in range(nh)]

    def X(self, a: str) -> MatExpr:
        return MatExpr.coords((self.size, self.size), self.block_entries(a))

    def X_matvec(self, a: str) -> MatVec:
        return MatVec.from_polys(self.size, self.size, self.n_vars,
                                 {(r, c): Poly.var(v) for r, c, v in self.block_entries(a)})

    def block_identity(self, vertex: str, c=1) -> list:
        """Matrix equal to ``c`` on the diagonal block of ``vertex`` and 0 elsewhere."""
        M = [[Fraction(0)] * self.size for _ in range(self.size)]
        o = self.offsets[vertex]
        for i in range(self.dims[vertex]):
            M[o + i][o + i] = to_rat(c)
        return M

    def identity_except(self, vertex: str) -> list:
        M = [[Fraction(0)] * self.size for _ in range(self.size)]
        for v in self.vertices:
            if v == vertex:
                continue
            o = self.offsets[v]
            for i in range(self.dims[v]):
                M[o + i][o + i] = Fraction(1)
        return M

    def vertex_blocks(self) -> list:
        return [(v, self.offsets[v], self.dims[v]) for v in self.vertices]

    def is_block_diagonal(self, M: Sequence[Sequence]) -> bool:
        owner = {}
        for v, o, n in self.vertex_blocks():
            for i in range(n):
                owner[o + i] = v
        for r, row in enumerate(M):
            for c, x in enumerate(row):
                if x != 0 and owner.get(r) != owner.get(c):
                    return False
        return len(M) == self.size

    def spec_echo(self) -> dict:
        q = self.quiver
        return {
            "vertices": list(q.vertices),
            "arrows": [{"name": n, "tail": t, "head": h,
                        "gamma": f"{self.gamma[n].numerator}/{self.gamma[n].denominator}"}
                       for n, t, h in q.arrows],
            "ordering": list(q.ordering),
            "dims": dict(self.dims),
        }

    def __repr__(self):
        return f"QuiverModel({self.quiver.arrows}, dims={self.dims})"


# ---------------------------------------------------------------- spec files

def model_from_spec(spec: Mapping) -> QuiverModel:
    if not isinstance(spec, Mapping):
        raise SpecError("quiver spec must be a JSON object")
    allowed = {"vertices", "arrows", "ordering", "dims"}
    extra = set(spec) - allowed
    if extra:
        raise SpecError(f"unknown keys in quiver spec: {sorted(extra)}")
    for key in ("vertices", "arrows", "dims"):
        if key not in spec:
            raise SpecError(f"quiver spec is missing {key!r}")
    arrows, gamma = [], {}
    for a in spec["arrows"]:
        try:
            arrows.append((a["name"], a["tail"], a["head"]))
        except (KeyError, TypeError):
            raise SpecError("each arrow needs name, tail and head") from None
        if "gamma" in a:
            gamma[str(a["name"])] = to_rat(a["gamma"])
    quiver = Quiver.build(spec["vertices"], arrows, spec.get("ordering"))
    return QuiverModel(quiver, spec["dims"], gamma)


def load_model(path: str) -> QuiverModel:
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON in {path}: {exc}") from None
    return model_from_spec(spec)


# ---------------------------------------------------------------- standard quivers

def one_loop(n: int, gamma=1) -> QuiverModel:
    return QuiverModel(Quiver.build(["0"], [("x", "0", "0")]), {"0": n}, {"x": gamma})


def one_arrow(n1: int, n2: int, gamma=1) -> QuiverModel:
    return QuiverModel(Quiver.build(["1", "2"], [("a", "1", "2")]), {"1": n1, "2": n2}, {"a": gamma})


def spin_quiver(d: int, n: int, n_inf: int = 1, gamma_x=0, gamma_v=1) -> QuiverModel:
    """Q_d: a loop ``x`` at 0 and arrows ``v1..vd`` from infinity to 0."""
    arrows = [("x", "0", "0")] + [(f"v{k}", "inf", "0") for k in range(1, d + 1)]
    gamma = {"x": gamma_x, **{f"v{k}": gamma_v for k in range(1, d + 1)}}
    return QuiverModel(Quiver.build(["0", "inf"], arrows), {"0": n, "inf": n_inf}, gamma)


def star_quiver(legs: Sequence[int], n=2) -> QuiverModel:
    """Q_{k;l}: legs of lengths l_1..l_k pointing into the central vertex 0."""
    vertices = ["0"]
    arrows = []
    for k, length in enumerate(legs, start=1):
        prev = "0"
        for s in range(1, length + 1):
            v = f"{k},{s}"
            vertices.append(v)
            arrows.append((f"a{k}_{s}", v, prev))
            prev = v
    dims = {v: (n if not isinstance(n, Mapping) else n[v]) for v in vertices}
    return QuiverModel(Quiver.build(vertices, arrows), dims)


# ---------------------------------------------------------------- vector fields

def partial_matrix(model: QuiverModel, a: str) -> MatVec:
    """Grid with ``(d_a)_{ij} = d / d(X_a)_{ji}`` placed at rows of h(a), columns of t(a)."""
    model.check_arrow(a)
    ot, oh = model.offsets[model.tail_of[a]], model.offsets[model.head_of[a]]
    nt, nh = model.block_shape(a)
    n = model.n_vars
    entries = {}
    for i in range(nh):
        for j in range(nt):
            entries[(oh + i, ot + j)] = MultiVector.basis((model.var(a, j, i),), n)
    return MatVec(model.size, model.size, 1, n, entries)


def _check_lie_element(model: QuiverModel, xi) -> list:
    xi = [[to_rat(x) for x in row] for row in xi]
    if len(xi) != model.size or any(len(r) != model.size for r in xi) or not model.is_block_diagonal(xi):
        raise DimensionMismatch("xi must be block-diagonal with the model's dimension vector")
    return xi


def infinitesimal_action(model: QuiverModel, xi) -> MultiVector:
    """``xi_M`` with ``xi_M((X_a)_{ij}) = (X_a xi - xi X_a)_{ij}``."""
    xi = _check_lie_element(model, xi)
    comps: dict = {}
    for a in model.blocks:
        ot, oh = model.offsets[model.tail_of[a]], model.offsets[model.head_of[a]]
        nt, nh = model.block_shape(a)
        for i in range(nt):
            for j in range(nh):
                p: dict = {}
                for k in range(nh):
                    c = xi[oh + k][oh + j]
                    if c:
                        p[((model.var(a, i, k), 1),)] = p.get(((model.var(a, i, k), 1),), 0) + c
                for k in range(nt):
                    c = xi[ot + i][ot + k]
                    if c:
                        key = ((model.var(a, k, j), 1),)
                        p[key] = p.get(key, 0) - c
                p = {m: c for m, c in p.items() if c}
                if p:
                    comps[model.var(a, i, j)] = Poly(p)
    return MultiVector.vector_field(comps, model.n_vars)


def infinitesimal_action_trace(model: QuiverModel, xi) -> MultiVector:
    """Same field assembled as ``sum_a tr((d_a X_a - X_a d_a) xi)`` on grids."""
    xi = _check_lie_element(model, xi)
    n = model.n_vars
    xi_mv = MatVec.from_polys(model.size, model.size, n,
                              {(r, c): Poly.const(x) for r, row in enumerate(xi)
                               for c, x in enumerate(row) if x})
    acc = MultiVector.zero(1, n)
    for a in model.arrows():
        da, Xa = partial_matrix(model, a), model.X_matvec(a)
        L = (da * Xa) - (Xa * da)
        acc = acc + (L * xi_mv).trace()
    return acc


def lie_fields(model: QuiverModel) -> list:
    """``(E_k)_M`` for every basis element, in basis order."""
    cache = model.__dict__.setdefault("_lie_fields", None)
    if cache is None:
        cache = [infinitesimal_action(model, model.lie.matrix(k)) for k in range(len(model.lie))]
        model.__dict__["_lie_fields"] = cache
    return cache


def cartan_trivector(model: QuiverModel) -> MultiVector:
    """``phi_M = 1/12 sum (E^a,[E^b,E^c]) (E_a)_M ^ (E_b)_M ^ (E_c)_M``."""
    lie = model.lie
    fields = lie_fields(model)
    n = model.n_vars
    acc = MultiVector.zero(3, n)
    by_vertex: dict = {}
    for k, (v, _, _) in enumerate(lie.basis):
        by_vertex.setdefault(v, []).append(k)
    for ks in by_vertex.values():
        for ia, a in enumerate(ks):
            for ib, b in enumerate(ks):
                if b <= a:
                    continue
                ab = fields[a].wedge(fields[b])
                if ab.is_zero():
                    continue
                for c in ks:
                    if c <= b:
                        continue
                    # totally antisymmetric coefficient: 6 orderings collapse
                    s = lie.structure_constant(a, b, c)
                    if s:
                        acc = acc + ab.wedge(fields[c]).scale(Fraction(6) * s)
    return acc.scale(Fraction(CARTAN_SIGN, 12))


def cyclic_action_field(model: QuiverModel, b: str) -> MultiVector:
    """``A_b(1) = tr(X_{b*} d_{b*} - X_b d_b)``: scales X_b by -1 and X_{b*} by +1."""
    model.check_arrow(b)
    bs = star_name(b)
    comps = {}
    for _, _, v in model.block_entries(b):
        comps[v] = Poly({((v, 1),): -1})
    for _, _, v in model.block_entries(bs):
        comps[v] = Poly({((v, 1),): 1})
    return MultiVector.vector_field(comps, model.n_vars)


def cyclic_action_field_trace(model: QuiverModel, b: str) -> MultiVector:
    """Second construction of ``A_b(1)`` from the grids."""
    bs = star_name(b)
    L = (model.X_matvec(bs) * partial_matrix(model, bs)) - (model.X_matvec(b) * partial_matrix(model, b))
    return L.trace()


def fuse(P: MultiVector, fields_1: Sequence[MultiVector], fields_2: Sequence[MultiVector]) -> MultiVector:
    """``P - 1/2 sum_a (E_a, 0)_M ^ (0, E^a)_M``; ``fields_2[k]`` must be the
    field of the dual of the element generating ``fields_1[k]``."""
    if len(fields_1) != len(fields_2):
        raise DimensionMismatch("dual bases of different sizes")
    psi = MultiVector.zero(2, P.n_vars)
    for f1, f2 in zip(fields_1, fields_2):
        psi = psi + f1.wedge(f2)
    return P - psi.scale(Fraction(1, 2))


def vertex_action_fields(model: QuiverModel, vertex: str, dual: bool = False) -> list:
    """Fields of the elementary basis of gl(n_vertex), or of its dual basis."""
    lie = model.lie
    out = []
    for k, (v, i, j) in enumerate(lie.basis):
        if v != vertex:
            continue
        out.append(lie_fields(model)[lie.dual_index(k) if dual else k])
    return out


# ---------------------------------------------------------------- closed paths

class PathNotClosed(ValueError):
    pass


def check_path(model: QuiverModel, word: Sequence[str], closed: bool = True) -> None:
    if not word:
        raise PathNotClosed("empty word")
    for a in word:
        model.check_arrow(a)
    for a, b in zip(word, word[1:]):
        if model.head_of[a] != model.tail_of[b]:
            raise PathNotClosed(f"{a} and {b} are not composable")
    if closed and model.head_of[word[-1]] != model.tail_of[word[0]]:
        raise PathNotClosed(f"path {' '.join(word)} is not closed")


def closed_paths(model: QuiverModel, max_len: int) -> list:
    """All closed paths of length 1..max_len, as arrow tuples (rotations kept)."""
    out = []
    frontier = [(a,) for a in model.blocks]
    for _ in range(max_len):
        nxt = []
        for w in frontier:
            if model.head_of[w[-1]] == model.tail_of[w[0]]:
                out.append(w)
            for b in model.blocks:
                if model.tail_of[b] == model.head_of[w[-1]]:
                    nxt.append(w + (b,))
        frontier = nxt
    return out


def trace_word(model: QuiverModel, word: Sequence[str]) -> Poly:
    """``tr(X_{a_1} ... X_{a_k})`` as a polynomial."""
    check_path(model, word)
    rows = model.dims[model.tail_of[word[0]]]
    acc = [[Poly.const(1 if i == j else 0) for j in range(rows)] for i in range(rows)]
    for a in word:
        nt, nh = model.block_shape(a)
        B = [[Poly.var(model.var(a, i, j)) for j in range(nh)] for i in range(nt)]
        acc = [[sum((acc[i][k] * B[k][j] for k in range(nt)), Poly.zero()) for j in range(nh)]
               for i in range(len(acc))]
    return sum((acc[i][i] for i in range(len(acc))), Poly.zero())
