"""Path algebra of the double quiver, double brackets and necklace brackets.

Paths are read left to right.  A path is stored as ``(tail_vertex, arrows)``;
the idempotent ``e_s`` is ``(s, ())``.  Elements of the path algebra are dicts
``path -> Rat`` and tensors are dicts keyed by tuples of paths.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

from .exactcore import PointStream, to_rat
from .mvcalc import bracket_of_functions
from .polyfield import Poly, mono_degree, terms_add_into, terms_mul, terms_partial
from .quiverrep import QuiverModel, check_path, closed_paths, star_name, trace_word
from .structlib import PencilParams, psi_bivector, vdb_bivector
from .verifysuite import CheckReport, _report, point_witness

Path = tuple


class NCError(ValueError):
    pass


# ---------------------------------------------------------------- paths and elements

class PathAlgebra:
    """Path algebra of the double of ``model.quiver`` with its ordering and gamma."""

    def __init__(self, model: QuiverModel):
        if model.quiver is None:
            raise NCError("path algebra needs a quiver model")
        self.model = model
        self.quiver = model.quiver
        self.tail = model.tail_of
        self.head = model.head_of

    # paths
    def idem(self, s: str) -> Path:
        return (str(s), ())

    def arrow(self, a: str) -> Path:
        self.quiver.check_arrow(a)
        return (self.tail[a], (a,))

    def word(self, arrows: Sequence[str]) -> Path:
        arrows = tuple(arrows)
        if not arrows:
            raise NCError("empty word; use idem(s)")
        check_path(self.model, arrows, closed=False)
        return (self.tail[arrows[0]], arrows)

    def path_head(self, p: Path) -> str:
        return self.head[p[1][-1]] if p[1] else p[0]

    def mul_paths(self, p: Path, q: Path):
        if self.path_head(p) != q[0]:
            return None
        return (p[0], p[1] + q[1])

    # elements
    def elem(self, p: Path, c=1) -> dict:
        return {p: to_rat(c)}

    def mul(self, f: Mapping, g: Mapping) -> dict:
        out: dict = {}
        for p, c in f.items():
            for q, d in g.items():
                r = self.mul_paths(p, q)
                if r is not None:
                    out[r] = out.get(r, 0) + c * d
        return {k: v for k, v in out.items() if v}

    def epsilon(self, a: str) -> int:
        return self.quiver.epsilon(a)

    def o(self, a: str, b: str) -> int:
        return self.quiver.o(a, b)


def _add_into(dst: dict, key, c) -> None:
    v = dst.get(key, 0) + c
    if v:
        dst[key] = v
    else:
        dst.pop(key, None)


# ---------------------------------------------------------------- outer double bracket

def dbr_outer_generators(alg: PathAlgebra, a: str, b: str) -> dict:
    """``<<a, b>>_o`` on arrows of the double, as ``{(left, right): coeff}``."""
    out: dict = {}
    ta, ha, tb, hb = alg.tail[a], alg.head[a], alg.tail[b], alg.head[b]
    half = Fraction(1, 2)

    def put(left, right, c):
        if left is not None and right is not None and c:
            _add_into(out, (left, right), c)

    A, B = alg.arrow(a), alg.arrow(b)
    if b == star_name(a):
        eps = alg.epsilon(a)
        gamma = alg.model.gamma[a]
        put(alg.idem(ha), alg.idem(ta), eps * gamma)
        put(alg.mul_paths(B, A), alg.idem(ta), eps * half)
        put(alg.idem(ha), alg.mul_paths(A, B), eps * half)
    # - 1/2 o(a,b) e_{t(b)} a (x) e_{t(a)} b
    put(alg.mul_paths(alg.idem(tb), A), alg.mul_paths(alg.idem(ta), B), -half * alg.o(a, b))
    # - 1/2 o(a*,b*) b e_{h(a)} (x) a e_{h(b)}
    put(alg.mul_paths(B, alg.idem(ha)), alg.mul_paths(A, alg.idem(hb)),
        -half * alg.o(star_name(a), star_name(b)))
    # + 1/2 o(a,b*) ba (x) e_{t(a)}
    put(alg.mul_paths(B, A), alg.idem(ta), half * alg.o(a, star_name(b)))
    # + 1/2 o(a*,b) e_{h(a)} (x) ab
    put(alg.idem(ha), alg.mul_paths(A, B), half * alg.o(star_name(a), b))
    return out


def _sub(alg: PathAlgebra, p: Path, i: int, j: int):
    """Sub-path of ``p`` on arrows ``i..j-1``; the idempotent at the right spot if empty."""
    arrows = p[1]
    if i >= j:
        s = alg.tail[arrows[i]] if i < len(arrows) else alg.path_head(p)
        return (s, ())
    return (alg.tail[arrows[i]], arrows[i:j])


def _cat(alg: PathAlgebra, *parts):
    out = parts[0]
    for q in parts[1:]:
        out = alg.mul_paths(out, q)
        if out is None:
            return None
    return out


def dbr_outer_paths(alg: PathAlgebra, p: Path, q: Path) -> dict:
    """Word formula: ``sum_{i,j} b_<j <<a_i,b_j>>' a_>i (x) a_<i <<a_i,b_j>>'' b_>j``."""
    out: dict = {}
    A, B = p[1], q[1]
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            for (x, y), c in dbr_outer_generators(alg, a, b).items():
                left = _cat(alg, _sub(alg, q, 0, j), x, _sub(alg, p, i + 1, len(A)))
                right = _cat(alg, _sub(alg, p, 0, i), y, _sub(alg, q, j + 1, len(B)))
                if left is not None and right is not None:
                    _add_into(out, (left, right), c)
    return out


def dbr_outer(alg: PathAlgebra, f: Mapping, g: Mapping) -> dict:
    out: dict = {}
    for p, c in f.items():
        for q, d in g.items():
            for k, v in dbr_outer_paths(alg, p, q).items():
                _add_into(out, k, c * d * v)
    return out


# ---------------------------------------------------------------- right double bracket

def y_coeff(alg: PathAlgebra, z: PencilParams, a: str, b: str) -> Fraction:
    return alg.epsilon(a) * alg.epsilon(b) * z.value(a, b)


def dbr_right_paths(alg: PathAlgebra, p: Path, q: Path, z: PencilParams) -> dict:
    """For words every term reproduces ``p (x) q``: the coefficient is ``c_{p,q}``."""
    c = sum((y_coeff(alg, z, a, b) for a in p[1] for b in q[1]), Fraction(0))
    return {(p, q): c} if c else {}


def dbr_right(alg: PathAlgebra, f: Mapping, g: Mapping, z: PencilParams) -> dict:
    out: dict = {}
    for p, c in f.items():
        for q, d in g.items():
            for k, v in dbr_right_paths(alg, p, q, z).items():
                _add_into(out, k, c * d * v)
    return out


def _tensor_apply_right(alg: PathAlgebra, T: Mapping, z: PencilParams) -> dict:
    """``(<<-,->>_r (x) id) o (id (x) <<-,->>_r)`` on a 3-tensor."""
    out: dict = {}
    for (x, y, w), c in T.items():
        for (y1, y2), c1 in dbr_right_paths(alg, y, w, z).items():
            for (x1, x2), c2 in dbr_right_paths(alg, x, y1, z).items():
                _add_into(out, (x1, x2, y2), c * c1 * c2)
    return out


def _tau123(T: Mapping, k: int) -> dict:
    """``tau_(123)^k``: ``x (x) y (x) w -> w (x) x (x) y`` for k = 1."""
    out = {}
    for key, c in T.items():
        for _ in range(k % 3):
            key = (key[2], key[0], key[1])
        out[key] = c
    return out


def triple_bracket(alg: PathAlgebra, a: Path, b: Path, c: Path, z: PencilParams) -> dict:
    out: dict = {}
    base = {(a, b, c): Fraction(1)}
    for k in range(3):
        for key, v in _tau123(_tensor_apply_right(alg, _tau123(base, -k), z), k).items():
            _add_into(out, key, v)
    return out


def check_weak_poisson(model: QuiverModel, z: PencilParams, name: str = "nc:weak-poisson") -> CheckReport:
    """``<<a,b,c>>_r - tau_(12)^{-1} <<tau_(12)(a,b,c)>>_r = 0`` on all generator triples."""
    start = time.perf_counter()
    alg = PathAlgebra(model)
    arrows = model.blocks
    for a, b, c in product(arrows, repeat=3):
        A, B, C = alg.arrow(a), alg.arrow(b), alg.arrow(c)
        lhs = triple_bracket(alg, A, B, C, z)
        swapped = {(k[1], k[0], k[2]): v for k, v in triple_bracket(alg, B, A, C, z).items()}
        diff = dict(lhs)
        for k, v in swapped.items():
            _add_into(diff, k, -v)
        if diff:
            return _report(name, start, {"triple": [a, b, c]}, len(arrows) ** 3)
    return _report(name, start, None, len(arrows) ** 3)


# ---------------------------------------------------------------- necklaces

@dataclass(frozen=True, order=True)
class Necklace:
    """Closed path up to rotation, or the empty necklace ``tr(e_s)`` when ``word`` is empty."""

    word: tuple
    vertex: str = ""

    def __str__(self):
        return "tr(" + (" ".join(self.word) if self.word else f"e_{self.vertex}") + ")"


def necklace(alg: PathAlgebra, word: Sequence[str] | Path) -> Necklace | None:
    """Canonical necklace of a closed word; None for a non-closed path."""
    if isinstance(word, tuple) and len(word) == 2 and isinstance(word[1], tuple):
        s, arrows = word
        if not arrows:
            return Necklace((), s)
    else:
        arrows = tuple(word)
    if alg.head[arrows[-1]] != alg.tail[arrows[0]]:
        return None
    pos = alg.quiver.position
    rots = [arrows[k:] + arrows[:k] for k in range(len(arrows))]
    best = min(rots, key=lambda w: tuple(pos[a] for a in w))
    return Necklace(best)


class NecklacePoly:
    """Commutative polynomial in necklaces (monomials as sorted (necklace, exp) tuples)."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping | None = None):
        self.terms = {m: to_rat(c) for m, c in (terms or {}).items() if c}

    @classmethod
    def of(cls, nk: Necklace | None, c=1) -> "NecklacePoly":
        if nk is None:
            return cls()
        return cls({((nk, 1),): c})

    @classmethod
    def const(cls, c) -> "NecklacePoly":
        return cls({(): c})

    def __add__(self, other):
        out = dict(self.terms)
        terms_add_into(out, other.terms)
        return NecklacePoly(out)

    def __sub__(self, other):
        out = dict(self.terms)
        terms_add_into(out, other.terms, -1)
        return NecklacePoly(out)

    def __neg__(self):
        return NecklacePoly({m: -c for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, NecklacePoly):
            return NecklacePoly(terms_mul(self.terms, other.terms))
        c = to_rat(other)
        return NecklacePoly({m: v * c for m, v in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, NecklacePoly) and self.terms == other.terms

    def is_zero(self) -> bool:
        return not self.terms

    def necklaces(self) -> set:
        return {v for m in self.terms for v, _ in m}

    def partial(self, nk: Necklace) -> "NecklacePoly":
        return NecklacePoly(terms_partial(self.terms, nk))

    def degree(self) -> int:
        return max((mono_degree(m) for m in self.terms), default=-1)

    def format(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in sorted(self.terms.items()):
            mono = "*".join(str(v) + (f"^{e}" if e > 1 else "") for v, e in m) or "1"
            parts.append(f"{c}*{mono}")
        return " + ".join(parts)

    def __repr__(self):
        return f"NecklacePoly({self.format()})"


def tr(alg: PathAlgebra, f: Mapping) -> NecklacePoly:
    out = NecklacePoly()
    for p, c in f.items():
        out = out + NecklacePoly.of(necklace(alg, p), c)
    return out


def _rep_path(alg: PathAlgebra, nk: Necklace) -> Path:
    return (alg.tail[nk.word[0]], nk.word) if nk.word else (nk.vertex, ())


# ---------------------------------------------------------------- trace brackets

def trace_bracket_vdb_necklaces(alg: PathAlgebra, f: Necklace, g: Necklace) -> NecklacePoly:
    """``tr(m(<<f, g>>_o))``."""
    if not f.word or not g.word:
        return NecklacePoly()
    out = NecklacePoly()
    for (x, y), c in dbr_outer_paths(alg, _rep_path(alg, f), _rep_path(alg, g)).items():
        xy = alg.mul_paths(x, y)
        if xy is not None:
            out = out + NecklacePoly.of(necklace(alg, xy), c)
    return out


def trace_bracket_z_necklaces(alg: PathAlgebra, f: Necklace, g: Necklace, z: PencilParams) -> NecklacePoly:
    """``(tr (x) tr) <<f, g>>_r`` computed from the tensor."""
    if not f.word or not g.word:
        return NecklacePoly()
    out = NecklacePoly()
    for (x, y), c in dbr_right_paths(alg, _rep_path(alg, f), _rep_path(alg, g), z).items():
        out = out + NecklacePoly.of(necklace(alg, x), c) * NecklacePoly.of(necklace(alg, y))
    return out


def c_coefficient(alg: PathAlgebra, f: Necklace, g: Necklace, z: PencilParams) -> Fraction:
    return sum((y_coeff(alg, z, a, b) for a in f.word for b in g.word), Fraction(0))


def trace_bracket_z_closed(alg: PathAlgebra, f: Necklace, g: Necklace, z: PencilParams) -> NecklacePoly:
    """Closed form ``c_{f,g} tr f tr g``."""
    return NecklacePoly.of(f) * NecklacePoly.of(g) * c_coefficient(alg, f, g, z)


def extend_leibniz(bracket, F: NecklacePoly, G: NecklacePoly) -> NecklacePoly:
    out = NecklacePoly()
    for u in F.necklaces():
        dF = F.partial(u)
        for v in G.necklaces():
            b = bracket(u, v)
            if not b.is_zero():
                out = out + dF * G.partial(v) * b
    return out


def trace_bracket_vdb(alg: PathAlgebra, F: NecklacePoly, G: NecklacePoly) -> NecklacePoly:
    return extend_leibniz(lambda u, v: trace_bracket_vdb_necklaces(alg, u, v), F, G)


def trace_bracket_z(alg: PathAlgebra, F: NecklacePoly, G: NecklacePoly, z: PencilParams) -> NecklacePoly:
    return extend_leibniz(lambda u, v: trace_bracket_z_necklaces(alg, u, v, z), F, G)


def pencil_bracket(alg: PathAlgebra, F: NecklacePoly, G: NecklacePoly, z: PencilParams, z0) -> NecklacePoly:
    z0 = to_rat(z0)
    out = trace_bracket_z(alg, F, G, z)
    if z0:
        out = out + trace_bracket_vdb(alg, F, G) * z0
    return out


def check_mixed_jacobi(alg: PathAlgebra, f: NecklacePoly, g: NecklacePoly, h: NecklacePoly,
                       z: PencilParams, z0, name: str = "nc:jacobi") -> CheckReport:
    start = time.perf_counter()

    def br(F, G):
        return pencil_bracket(alg, F, G, z, z0)

    J = br(f, br(g, h)) + br(g, br(h, f)) + br(h, br(f, g))
    wit = None if J.is_zero() else {"triple": [f.format(), g.format(), h.format()], "jacobiator": J.format()}
    return _report(name, start, wit, 1)


def check_mixed_identity(alg: PathAlgebra, f: Necklace, g: Necklace, h: Necklace, z: PencilParams,
                         name: str = "nc:mixed-identity") -> CheckReport:
    """``{h, {{f, g}}}_z = (-c_{g,h} + c_{h,f}) {{f, g}} h``."""
    start = time.perf_counter()
    H = NecklacePoly.of(h)
    fg = trace_bracket_vdb_necklaces(alg, f, g)
    lhs = trace_bracket_z(alg, H, fg, z)
    coeff = -c_coefficient(alg, g, h, z) + c_coefficient(alg, h, f, z)
    rhs = fg * H * coeff
    wit = None if lhs == rhs else {"triple": [str(f), str(g), str(h)], "difference": (lhs - rhs).format()}
    return _report(name, start, wit, 1)


def check_c_formula(alg: PathAlgebra, words: Iterable, z: PencilParams, name: str = "nc:c-formula") -> CheckReport:
    """Tensor route against the closed form on all pairs of the given necklaces."""
    start = time.perf_counter()
    nks = sorted({nk for nk in (necklace(alg, w) for w in words) if nk is not None})
    for f in nks:
        for g in nks:
            if trace_bracket_z_necklaces(alg, f, g, z) != trace_bracket_z_closed(alg, f, g, z):
                return _report(name, start, {"pair": [str(f), str(g)]}, len(nks) ** 2)
    return _report(name, start, None, len(nks) ** 2)


# ---------------------------------------------------------------- representations

def represent(model: QuiverModel, F: NecklacePoly) -> Poly:
    """Image under ``tr(a_1 ... a_k) -> tr(X_{a_1} ... X_{a_k})``, ``tr(e_s) -> n_s``."""
    cache: dict = {}
    out = Poly.zero()
    for m, c in F.terms.items():
        t = Poly.const(c)
        for nk, e in m:
            if nk not in cache:
                cache[nk] = trace_word(model, nk.word) if nk.word else Poly.const(model.dims[nk.vertex])
            t = t * cache[nk] ** e
        out = out + t
    return out


def check_rep_morphism(model: QuiverModel, word_pairs: Sequence, z: PencilParams, z0,
                       n_points: int = 16, seed: int = 7, bivector=None,
                       name: str = "nc:rep-morphism") -> CheckReport:
    """Necklace bracket represented vs the bivector bracket of ``z0 P + psi_z`` at sample points.

    ``bivector`` overrides the right-hand side (used by negative controls).
    """
    start = time.perf_counter()
    alg = PathAlgebra(model)
    z0 = to_rat(z0)
    P = bivector if bivector is not None else vdb_bivector(model).scale(z0) + psi_bivector(model, z)
    pts = PointStream(seed, model.n_vars).take(n_points)
    for w1, w2 in word_pairs:
        n1, n2 = necklace(alg, tuple(w1)), necklace(alg, tuple(w2))
        if n1 is None or n2 is None:
            raise NCError("rep-morphism words must be closed paths")
        lhs = represent(model, pencil_bracket(alg, NecklacePoly.of(n1), NecklacePoly.of(n2), z, z0))
        rhs = bracket_of_functions(P, trace_word(model, n1.word), trace_word(model, n2.word))
        for pt in pts:
            if lhs.eval(pt) != rhs.eval(pt):
                return _report(name, start, point_witness(pt, words=[" ".join(w1), " ".join(w2)]),
                               len(pts) * len(word_pairs))
    return _report(name, start, None, len(pts) * len(word_pairs))


# ---------------------------------------------------------------- sampling helpers

def random_necklace(alg: PathAlgebra, rng: random.Random, max_len: int) -> Necklace:
    """Uniform over the closed words of length <= max_len, canonicalized."""
    cache = alg.__dict__.setdefault("_words", {})
    if max_len not in cache:
        cache[max_len] = closed_paths(alg.model, max_len)
    return necklace(alg, rng.choice(cache[max_len]))


def random_params(originals: Sequence[str], rng: random.Random, bound: int = 5) -> PencilParams:
    pairs = {}
    for i, a in enumerate(originals):
        for b in originals[i + 1:]:
            pairs[(a, b)] = Fraction(rng.randint(-bound, bound), rng.randint(1, 3))
    return PencilParams.from_pairs(pairs)
