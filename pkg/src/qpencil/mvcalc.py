"""Polyvector fields, the Schouten bracket, and evaluatable trace forms.

A k-vector is stored as a map from strictly increasing index tuples
``(i_1 < ... < i_k)`` to polynomial term-dicts, meaning
``sum c_I d_{i_1} ^ ... ^ d_{i_k}``.  Pairing with covectors uses the
determinant convention, so ``<d_i ^ d_j, dx_i (x) dx_j> = 1``.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations
from typing import Iterable, Mapping, Sequence

from .exactcore import (Jet, TanJet, identity, mat_add, mat_inverse, mat_mul,
                        mat_scale, mat_trace, mat_transpose, to_rat, zeros)
from .polyfield import (Poly, terms_add_into, terms_mul, terms_mul_add_into, terms_partial,
                        mono_degree)


class DegreeMismatch(ValueError):
    """Operands live on different variable universes or have the wrong degree."""


def _merge_sign(I: tuple, J: tuple):
    """Sign and sorted union for the wedge of basis elements, or (0, None) on overlap."""
    if not I:
        return 1, J
    if not J:
        return 1, I
    inv = 0
    out = []
    i = j = 0
    while i < len(I) and j < len(J):
        if I[i] == J[j]:
            return 0, None
        if I[i] < J[j]:
            out.append(I[i])
            i += 1
        else:
            inv += len(I) - i
            out.append(J[j])
            j += 1
    out.extend(I[i:])
    out.extend(J[j:])
    return (-1 if inv & 1 else 1), tuple(out)


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        while seq[i] != i:
            j = seq[i]
            seq[i], seq[j] = seq[j], seq[i]
            sign = -sign
    return sign


def _sort_indices(idx: Sequence[int]):
    """Sign of the sorting permutation and the sorted tuple; (0, None) on repeats."""
    if len(set(idx)) != len(idx):
        return 0, None
    order = sorted(range(len(idx)), key=lambda k: idx[k])
    return _perm_sign(order), tuple(idx[k] for k in order)


class MultiVector:
    """Polynomial k-vector field on an ``n_vars``-dimensional coordinate space."""

    __slots__ = ("degree", "n_vars", "terms")

    def __init__(self, degree: int, n_vars: int, terms: Mapping | None = None):
        self.degree = degree
        self.n_vars = n_vars
        self.terms: dict = {}
        for I, c in (terms or {}).items():
            if isinstance(c, Poly):
                c = c.terms
            elif not isinstance(c, dict):
                c = Poly.const(c).terms
            if c:
                self.terms[tuple(I)] = dict(c)

    @classmethod
    def _raw(cls, degree, n_vars, terms):
        mv = object.__new__(cls)
        mv.degree = degree
        mv.n_vars = n_vars
        mv.terms = terms
        return mv

    @classmethod
    def zero(cls, degree: int, n_vars: int) -> "MultiVector":
        return cls._raw(degree, n_vars, {})

    @classmethod
    def function(cls, p, n_vars: int) -> "MultiVector":
        p = p if isinstance(p, Poly) else Poly.const(p)
        return cls._raw(0, n_vars, {(): dict(p.terms)} if p.terms else {})

    @classmethod
    def basis(cls, indices: Sequence[int], n_vars: int, coeff=1) -> "MultiVector":
        """``coeff * d_{i_1} ^ ... ^ d_{i_k}`` for arbitrary (unsorted) indices."""
        sign, I = _sort_indices(tuple(indices))
        c = coeff if isinstance(coeff, Poly) else Poly.const(coeff)
        if sign == 0 or not c.terms:
            return cls.zero(len(indices), n_vars)
        return cls._raw(len(indices), n_vars, {I: {m: sign * v for m, v in c.terms.items()}})

    @classmethod
    def vector_field(cls, components: Mapping[int, Poly], n_vars: int) -> "MultiVector":
        return cls(1, n_vars, {(i,): c for i, c in components.items()})

    # -- arithmetic
    def _check(self, other: "MultiVector", same_degree=True):
        if self.n_vars != other.n_vars:
            raise DegreeMismatch("different variable universes")
        if same_degree and self.degree != other.degree and self.terms and other.terms:
            raise DegreeMismatch(f"degrees {self.degree} and {other.degree}")

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "MultiVector") -> "MultiVector":
        self._check(other)
        out = {I: dict(c) for I, c in self.terms.items()}
        for I, c in other.terms.items():
            d = out.setdefault(I, {})
            terms_add_into(d, c)
            if not d:
                del out[I]
        deg = self.degree if self.terms else other.degree
        return MultiVector._raw(deg, self.n_vars, out)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c) -> "MultiVector":
        if isinstance(c, Poly):
            out = {}
            for I, t in self.terms.items():
                p = terms_mul(t, c.terms)
                if p:
                    out[I] = p
            return MultiVector._raw(self.degree, self.n_vars, out)
        c = to_rat(c)
        if not c:
            return MultiVector.zero(self.degree, self.n_vars)
        return MultiVector._raw(self.degree, self.n_vars,
                                {I: {m: v * c for m, v in t.items()} for I, t in self.terms.items()})

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def wedge(self, other: "MultiVector") -> "MultiVector":
        self._check(other, same_degree=False)
        out: dict = {}
        for I, a in self.terms.items():
            for J, b in other.terms.items():
                s, K = _merge_sign(I, J)
                if not s:
                    continue
                d = out.setdefault(K, {})
                terms_mul_add_into(d, a, b, s)
                if not d:
                    del out[K]
        return MultiVector._raw(self.degree + other.degree, self.n_vars, out)

    def __xor__(self, other):
        return self.wedge(other)

    def __eq__(self, other):
        if not isinstance(other, MultiVector):
            return NotImplemented
        return self.n_vars == other.n_vars and self.terms == other.terms and (
            self.degree == other.degree or not self.terms)

    __hash__ = None

    def partial(self, var: int) -> "MultiVector":
        out = {}
        for I, t in self.terms.items():
            p = terms_partial(t, var)
            if p:
                out[I] = p
        return MultiVector._raw(self.degree, self.n_vars, out)

    def coefficient(self, indices: Sequence[int]) -> Poly:
        sign, I = _sort_indices(tuple(indices))
        if not sign or I not in self.terms:
            return Poly.zero()
        return Poly._raw({m: sign * c for m, c in self.terms[I].items()})

    def as_poly(self) -> Poly:
        if self.degree != 0:
            raise DegreeMismatch("not a function")
        return Poly._raw(dict(self.terms.get((), {})))

    def max_coeff_degree(self) -> int:
        return max((mono_degree(m) for t in self.terms.values() for m in t), default=-1)

    def first_term(self):
        """A deterministic nonzero (indices, monomial, coefficient) triple, or None."""
        if not self.terms:
            return None
        I = min(self.terms)
        m = min(self.terms[I])
        return I, m, self.terms[I][m]

    # -- evaluation
    def evaluate(self, point: Sequence) -> dict:
        out = {}
        for I, t in self.terms.items():
            v = Poly._raw(t).eval(point)
            if v != 0:
                out[I] = v
        return out

    def pair(self, covectors: Sequence[Sequence], point: Sequence | None = None):
        """``<A, a_1 (x) ... (x) a_k>``; covectors are dense component lists."""
        if len(covectors) != self.degree:
            raise DegreeMismatch("need one covector per slot")
        vals = self.evaluate(point) if point is not None else {
            I: Poly._raw(t) for I, t in self.terms.items()}
        k = self.degree
        acc = 0
        for I, c in vals.items():
            det = 0
            for perm in permutations(range(k)):
                term = _perm_sign(perm)
                for r in range(k):
                    term = term * covectors[r][I[perm[r]]]
                    if not isinstance(term, (Poly, Jet)) and term == 0:
                        break
                det = det + term
            acc = acc + c * det
        return acc

    def bivector_matrix(self, point: Sequence) -> list:
        """Antisymmetric ``n x n`` matrix ``P^{jk}`` of an evaluated bivector."""
        if self.degree != 2:
            raise DegreeMismatch("bivector expected")
        n = self.n_vars
        M = [[Fraction(0)] * n for _ in range(n)]
        for (j, k), v in self.evaluate(point).items():
            M[j][k] = v
            M[k][j] = -v
        return M

    def vector_at(self, point: Sequence) -> list:
        if self.degree != 1:
            raise DegreeMismatch("vector field expected")
        v = [Fraction(0)] * self.n_vars
        for (i,), c in self.evaluate(point).items():
            v[i] = c
        return v

    def apply(self, f: Poly) -> Poly:
        """Vector field acting on a polynomial."""
        if self.degree != 1:
            raise DegreeMismatch("vector field expected")
        out: dict = {}
        for (i,), t in self.terms.items():
            terms_mul_add_into(out, t, terms_partial(f.terms, i))
        return Poly._raw(out)

    def format(self, names: Sequence[str] | None = None) -> str:
        if not self.terms:
            return "0"
        parts = []
        for I in sorted(self.terms):
            basis = "^".join(f"d[{names[i] if names else i}]" for i in I)
            parts.append(f"({Poly._raw(self.terms[I]).format(names)})" + (f"*{basis}" if basis else ""))
        return " + ".join(parts)

    def __repr__(self):
        return f"MultiVector(deg={self.degree}, {self.format()})"


def bracket_of_functions(P: MultiVector, f: Poly, g: Poly) -> Poly:
    """``{f, g} = <P, df (x) dg>`` as a polynomial."""
    if P.degree != 2:
        raise DegreeMismatch("bivector expected")
    out: dict = {}
    for (j, k), t in P.terms.items():
        fj, fk = terms_partial(f.terms, j), terms_partial(f.terms, k)
        gj, gk = terms_partial(g.terms, j), terms_partial(g.terms, k)
        if fj and gk:
            terms_mul_add_into(out, t, terms_mul(fj, gk))
        if fk and gj:
            terms_mul_add_into(out, t, terms_mul(fk, gj), -1)
    return Poly._raw(out)


def _theta_derivatives(A: MultiVector) -> dict:
    """Right derivatives by each odd generator: var -> list of (rest, sign, coeff)."""
    out: dict = {}
    k = A.degree
    for I, t in A.terms.items():
        for p, i in enumerate(I):
            sign = -1 if (k - 1 - p) & 1 else 1
            out.setdefault(i, []).append((I[:p] + I[p + 1:], sign, t))
    return out


def _x_derivatives(B: MultiVector) -> dict:
    out: dict = {}
    for J, t in B.terms.items():
        seen = {v for m in t for v, _ in m}
        for v in seen:
            d = terms_partial(t, v)
            if d:
                out.setdefault(v, []).append((J, d))
    return out


def _half_bracket(A: MultiVector, B: MultiVector, out: dict, scale: int) -> None:
    """Accumulate ``scale * sum_i (A <- theta_i) ^ (d_i B)`` into ``out``."""
    tA = _theta_derivatives(A)
    if not tA:
        return
    xB = _x_derivatives(B)
    for i, lefts in tA.items():
        rights = xB.get(i)
        if not rights:
            continue
        for I, s1, a in lefts:
            for J, b in rights:
                s2, K = _merge_sign(I, J)
                if not s2:
                    continue
                d = out.setdefault(K, {})
                terms_mul_add_into(d, a, b, scale * s1 * s2)
                if not d:
                    del out[K]


def schouten(A: MultiVector, B: MultiVector) -> MultiVector:
    """Schouten bracket, normalized so that Lie brackets of vector fields are
    ``[X, Y] = XY - YX`` and ``1/2 [P,P](df,dg,dh)`` is the cyclic sum
    ``{{f,g},h} + {{g,h},f} + {{h,f},g}``.

    With ``S`` the odd-symplectic (Buttin) bracket built from right derivatives,
    this is ``[A, B] = (-1)^((k-1)(l-1)) S(A, B) = -S(B, A)``.
    """
    if A.n_vars != B.n_vars:
        raise DegreeMismatch("different variable universes")
    k, l = A.degree, B.degree
    deg = k + l - 1
    if deg < 0:
        return MultiVector.zero(0, A.n_vars)
    out: dict = {}
    # -S(B, A) = -sum (B<-theta)(d A) + (-1)^((k-1)(l-1)) sum (A<-theta)(d B)
    _half_bracket(B, A, out, -1)
    _half_bracket(A, B, out, -1 if ((k - 1) * (l - 1)) & 1 else 1)
    return MultiVector._raw(deg, A.n_vars, out)


def sharp(P: MultiVector, alpha: Sequence) -> MultiVector | list:
    """``P#(alpha)`` with ``P#(alpha)(beta) = <P, alpha (x) beta>``.

    Polynomial covector entries give a vector field; rational entries give the
    components of a tangent vector (``P`` must then be passed pre-evaluated via
    :func:`sharp_at`).
    """
    if P.degree != 2:
        raise DegreeMismatch("bivector expected")
    comps: dict = {}
    for (j, k), t in P.terms.items():
        aj = alpha[j] if isinstance(alpha[j], Poly) else Poly.const(alpha[j])
        ak = alpha[k] if isinstance(alpha[k], Poly) else Poly.const(alpha[k])
        if aj.terms:
            terms_add_into(comps.setdefault(k, {}), terms_mul(t, aj.terms))
        if ak.terms:
            terms_add_into(comps.setdefault(j, {}), terms_mul(t, ak.terms), -1)
    return MultiVector(1, P.n_vars, {(i,): c for i, c in comps.items() if c})


def sharp_at(Pm: Sequence[Sequence], alpha: Sequence) -> list:
    """Tangent vector ``sum_j alpha_j P^{jk}`` from an evaluated bivector matrix."""
    n = len(Pm)
    out = [0] * n
    for j, a in enumerate(alpha):
        if a == 0:
            continue
        row = Pm[j]
        for k in range(n):
            if row[k]:
                out[k] = out[k] + a * row[k]
    return out


# ---------------------------------------------------------------- matrix grids

class MatVec:
    """Sparse grid of multivectors of one common degree."""

    __slots__ = ("rows", "cols", "degree", "n_vars", "entries")

    def __init__(self, rows, cols, degree, n_vars, entries: Mapping | None = None):
        self.rows, self.cols, self.degree, self.n_vars = rows, cols, degree, n_vars
        self.entries = {k: v for k, v in (entries or {}).items() if not v.is_zero()}

    @classmethod
    def from_polys(cls, rows, cols, n_vars, entries: Mapping) -> "MatVec":
        return cls(rows, cols, 0, n_vars,
                   {k: MultiVector.function(p, n_vars) for k, p in entries.items()})

    @classmethod
    def scalar_identity(cls, size, n_vars, c=1) -> "MatVec":
        return cls.from_polys(size, size, n_vars, {(i, i): Poly.const(c) for i in range(size)})

    def _binop(self, other: "MatVec", sign: int) -> "MatVec":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise DegreeMismatch("grid shapes differ")
        out = dict(self.entries)
        for k, v in other.entries.items():
            v = v if sign > 0 else v.scale(-1)
            out[k] = out[k] + v if k in out else v
        return MatVec(self.rows, self.cols, max(self.degree, other.degree), self.n_vars, out)

    def __add__(self, other):
        return self._binop(other, 1)

    def __sub__(self, other):
        return self._binop(other, -1)

    def scale(self, c) -> "MatVec":
        return MatVec(self.rows, self.cols, self.degree, self.n_vars,
                      {k: v.scale(c) for k, v in self.entries.items()})

    def wedge(self, other: "MatVec") -> "MatVec":
        """Matrix product with the wedge product in place of multiplication."""
        if self.cols != other.rows:
            raise DegreeMismatch("grid shapes are not composable")
        by_row: dict = {}
        for (k, j), v in other.entries.items():
            by_row.setdefault(k, []).append((j, v))
        out: dict = {}
        for (i, k), a in self.entries.items():
            for j, b in by_row.get(k, ()):
                w = a.wedge(b)
                if w.is_zero():
                    continue
                out[(i, j)] = out[(i, j)] + w if (i, j) in out else w
        return MatVec(self.rows, other.cols, self.degree + other.degree, self.n_vars, out)

    __mul__ = wedge

    def trace(self) -> MultiVector:
        acc = MultiVector.zero(self.degree, self.n_vars)
        for (i, j), v in self.entries.items():
            if i == j:
                acc = acc + v
        return acc


# ---------------------------------------------------------------- matrix expressions

class MatExpr:
    """Evaluatable AST for rational matrix expressions."""

    __slots__ = ("kind", "args", "shape", "_key")

    def __init__(self, kind: str, args: tuple, shape: tuple):
        self.kind = kind
        self.args = args
        self.shape = shape
        self._key = None

    # constructors
    @classmethod
    def coords(cls, shape, entries: Iterable) -> "MatExpr":
        """Matrix whose (r, c) entry is coordinate ``var``; entries of (r, c, var)."""
        return cls("var", (tuple(sorted(entries)),), tuple(shape))

    @classmethod
    def const(cls, M: Sequence[Sequence]) -> "MatExpr":
        M = tuple(tuple(to_rat(x) for x in row) for row in M)
        return cls("const", (M,), (len(M), len(M[0]) if M else 0))

    @classmethod
    def eye(cls, n: int) -> "MatExpr":
        return cls.const(identity(n))

    def __add__(self, other: "MatExpr") -> "MatExpr":
        if self.shape != other.shape:
            raise DegreeMismatch("shape mismatch in sum")
        return MatExpr("sum", (self, other), self.shape)

    def __neg__(self):
        return MatExpr("scale", (Fraction(-1), self), self.shape)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, MatExpr):
            if self.shape[1] != other.shape[0]:
                raise DegreeMismatch("shape mismatch in product")
            return MatExpr("prod", (self, other), (self.shape[0], other.shape[1]))
        return MatExpr("scale", (to_rat(other), self), self.shape)

    def __rmul__(self, c):
        return MatExpr("scale", (to_rat(c), self), self.shape)

    def inv(self) -> "MatExpr":
        if self.shape[0] != self.shape[1]:
            raise DegreeMismatch("inverse of a non-square matrix")
        return MatExpr("inv", (self,), self.shape)

    def T(self) -> "MatExpr":
        return MatExpr("transpose", (self,), (self.shape[1], self.shape[0]))

    def power(self, e: int) -> "MatExpr":
        if e == 0:
            return MatExpr.eye(self.shape[0])
        base = self if e > 0 else self.inv()
        out = base
        for _ in range(abs(e) - 1):
            out = out * base
        return out

    @staticmethod
    def product(factors: Sequence["MatExpr"], size: int) -> "MatExpr":
        if not factors:
            return MatExpr.eye(size)
        out = factors[0]
        for f in factors[1:]:
            out = out * f
        return out

    def key(self):
        if self._key is None:
            if self.kind in ("var", "const"):
                self._key = (self.kind, self.args, self.shape)
            elif self.kind == "scale":
                self._key = ("scale", self.args[0], self.args[1].key())
            else:
                self._key = (self.kind,) + tuple(a.key() for a in self.args)
        return self._key

    def degree_bound(self) -> int:
        """Crude bound on numerator/denominator degree of the entries."""
        k = self.kind
        if k == "var":
            return 1
        if k == "const":
            return 0
        if k == "scale":
            return self.args[1].degree_bound()
        if k == "transpose":
            return self.args[0].degree_bound()
        if k == "inv":
            return self.shape[0] * self.args[0].degree_bound()
        if k == "sum":
            return sum(a.degree_bound() for a in self.args)
        return sum(a.degree_bound() for a in self.args)

    def evaluate(self, point: Sequence, memo: dict | None = None):
        memo = {} if memo is None else memo
        key = self.key()
        if key in memo:
            return memo[key]
        k = self.kind
        if k == "var":
            M = zeros(*self.shape)
            for r, c, v in self.args[0]:
                M[r][c] = point[v]
        elif k == "const":
            M = [list(row) for row in self.args[0]]
        elif k == "sum":
            M = mat_add(self.args[0].evaluate(point, memo), self.args[1].evaluate(point, memo))
        elif k == "prod":
            M = mat_mul(self.args[0].evaluate(point, memo), self.args[1].evaluate(point, memo))
        elif k == "scale":
            M = mat_scale(self.args[0], self.args[1].evaluate(point, memo))
        elif k == "inv":
            M = mat_inverse(self.args[0].evaluate(point, memo))
        elif k == "transpose":
            M = mat_transpose(self.args[0].evaluate(point, memo))
        else:  # pragma: no cover
            raise ValueError(k)
        memo[key] = M
        return M

    def __repr__(self):
        return f"MatExpr({self.kind}, shape={self.shape})"


class D:
    """Marker for the differential ``d(expr)`` inside a trace word."""

    __slots__ = ("expr",)

    def __init__(self, expr: MatExpr):
        self.expr = expr


class TraceForm:
    """Differential form ``sum_t c_t * prod_r tr(word_{t,r})``.

    Each word is a tuple of ``(is_d, MatExpr)`` factors; the form degree is the
    total number of differentials in a term and must be uniform.
    """

    __slots__ = ("degree", "terms")

    def __init__(self, degree: int, terms: Sequence = ()):
        self.degree = degree
        self.terms = tuple(terms)
        for c, words in self.terms:
            if sum(d for w in words for d, _ in w) != degree:
                raise DegreeMismatch("non-uniform form degree")

    @classmethod
    def trace(cls, *factors, coeff=1) -> "TraceForm":
        word = tuple((isinstance(f, D), f.expr if isinstance(f, D) else f) for f in factors)
        deg = sum(d for d, _ in word)
        return cls(deg, [(to_rat(coeff), (word,))])

    @classmethod
    def zero(cls, degree: int) -> "TraceForm":
        return cls(degree, ())

    def __add__(self, other: "TraceForm") -> "TraceForm":
        if self.terms and other.terms and self.degree != other.degree:
            raise DegreeMismatch("adding forms of different degree")
        deg = self.degree if self.terms else other.degree
        return TraceForm(deg, self.terms + other.terms)

    def scale(self, c) -> "TraceForm":
        c = to_rat(c)
        return TraceForm(self.degree, [(c * t, w) for t, w in self.terms])

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + other.scale(-1)

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def wedge(self, other: "TraceForm") -> "TraceForm":
        """Product of trace forms; the result is a product of traces."""
        terms = [(c1 * c2, w1 + w2) for c1, w1 in self.terms for c2, w2 in other.terms]
        return TraceForm(self.degree + other.degree, terms)

    def expressions(self) -> list:
        seen = {}
        for _, words in self.terms:
            for w in words:
                for _, e in w:
                    seen.setdefault(e.key(), e)
        return list(seen.values())

    def degree_bound(self) -> int:
        best = 0
        for _, words in self.terms:
            best = max(best, sum(e.degree_bound() for w in words for _, e in w))
        return best


# ---------------------------------------------------------------- form evaluation

class FormData:
    """Evaluated factor matrices and their derivatives along chosen directions."""

    def __init__(self, form: TraceForm, point: Sequence, directions: Sequence[Sequence]):
        self.form = form
        self.width = len(directions)
        width = self.width
        jp = [TanJet(point[k], tuple(d[k] for d in directions)) for k in range(len(point))]
        memo: dict = {}
        self.values: dict = {}
        self.derivs: dict = {}
        for e in form.expressions():
            M = e.evaluate(jp, memo)
            val, ders = _split_tan_matrix(M, width)
            self.values[e.key()] = val
            self.derivs[e.key()] = ders

    def evaluate(self, slots: Sequence[int]):
        """Form evaluated on the directions with the given indices."""
        acc = 0
        for coeff, words in self.form.terms:
            dpos = [(w, f) for w, word in enumerate(words) for f, (isd, _) in enumerate(word) if isd]
            for perm in permutations(range(len(dpos))):
                sign = _perm_sign(perm)
                assign = {dpos[s]: slots[perm[s]] for s in range(len(dpos))}
                prod = coeff * sign
                for w, word in enumerate(words):
                    M = None
                    for f, (isd, e) in enumerate(word):
                        F = self.derivs[e.key()][assign[(w, f)]] if isd else self.values[e.key()]
                        M = F if M is None else mat_mul(M, F)
                    prod = mat_trace(M) * prod
                acc = acc + prod
        return acc


def _split_tan_matrix(M, width: int):
    rows, cols = len(M), len(M[0]) if M else 0
    val = [[0] * cols for _ in range(rows)]
    ders = [[[0] * cols for _ in range(rows)] for _ in range(width)]
    for i in range(rows):
        for j in range(cols):
            x = M[i][j]
            if isinstance(x, TanJet):
                val[i][j] = x.value
                for r in range(width):
                    ders[r][i][j] = x.deriv[r]
            else:
                val[i][j] = x
    return val, ders


def _as_direction(t, n: int):
    if isinstance(t, int):
        return [1 if k == t else 0 for k in range(n)]
    if len(t) != n:
        raise DegreeMismatch("tangent vector has wrong length")
    return list(t)


def eval_form(form: TraceForm, point: Sequence, tangents: Sequence):
    """Evaluate a trace form on tangent vectors (coordinate indices or vectors)."""
    if len(tangents) != form.degree:
        raise DegreeMismatch(f"{form.degree}-form needs {form.degree} tangents")
    n = len(point)
    dirs = [_as_direction(t, n) for t in tangents]
    return FormData(form, point, dirs).evaluate(tuple(range(len(dirs))))


def form_matrix(form: TraceForm, point: Sequence) -> list:
    """All values ``omega(d_j, d_k)`` of a 2-form at a point."""
    if form.degree != 2:
        raise DegreeMismatch("2-form expected")
    n = len(point)
    data = FormData(form, point, [_as_direction(k, n) for k in range(n)])
    M = [[Fraction(0)] * n for _ in range(n)]
    for j in range(n):
        for k in range(j + 1, n):
            v = data.evaluate((j, k))
            M[j][k] = v
            M[k][j] = -v
    return M


def form_rows(form: TraceForm, point: Sequence) -> list:
    """Values of a 1-form on every coordinate direction."""
    if form.degree != 1:
        raise DegreeMismatch("1-form expected")
    n = len(point)
    data = FormData(form, point, [_as_direction(k, n) for k in range(n)])
    return [data.evaluate((k,)) for k in range(n)]


def exterior_derivative_at(form: TraceForm, point: Sequence, tangents: Sequence):
    """``u(w(v,t)) - v(w(u,t)) + t(w(u,v))`` for constant fields, via nested jets."""
    if form.degree != 2:
        raise DegreeMismatch("2-form expected")
    n = len(point)
    u, v, w = (_as_direction(t, n) for t in tangents)

    def directional(a, b, c):
        seeded = [Jet(point[k], (a[k],)) for k in range(n)]
        val = eval_form(form, seeded, (b, c))
        return val.deriv[0] if isinstance(val, Jet) else Fraction(0)

    return directional(u, v, w) - directional(v, u, w) + directional(w, u, v)


def exterior_derivative_table(form: TraceForm, point: Sequence):
    """Callable ``(u, v, w) -> d omega(d_u, d_v, d_w)`` sharing one nested-jet
    evaluation across all coordinate triples."""
    if form.degree != 2:
        raise DegreeMismatch("2-form expected")
    n = len(point)
    seeded = [Jet.variable(point[k], k, n) for k in range(n)]
    data = FormData(form, seeded, [_as_direction(k, n) for k in range(n)])
    cache: dict = {}

    def grad(j, k):
        if (j, k) not in cache:
            val = data.evaluate((j, k))
            cache[(j, k)] = val.deriv if isinstance(val, Jet) else (Fraction(0),) * n
        return cache[(j, k)]

    def d_omega(u, v, w):
        return grad(v, w)[u] - grad(u, w)[v] + grad(u, v)[w]

    return d_omega
