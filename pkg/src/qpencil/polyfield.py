"""Sparse multivariate polynomials with rational coefficients.

A monomial is a tuple of ``(variable, exponent)`` pairs sorted by variable,
so the empty tuple is the constant monomial.  Polynomials share one variable
universe per model; variables are plain integer ordinals.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .exactcore import Jet, to_rat

Mono = tuple
ONE: Mono = ()


def mono_mul(m1: Mono, m2: Mono) -> Mono:
    if not m1:
        return m2
    if not m2:
        return m1
    out = []
    i = j = 0
    while i < len(m1) and j < len(m2):
        v1, e1 = m1[i]
        v2, e2 = m2[j]
        if v1 == v2:
            out.append((v1, e1 + e2))
            i += 1
            j += 1
        elif v1 < v2:
            out.append(m1[i])
            i += 1
        else:
            out.append(m2[j])
            j += 1
    out.extend(m1[i:])
    out.extend(m2[j:])
    return tuple(out)


def mono_degree(m: Mono) -> int:
    return sum(e for _, e in m)


# Raw term-dict helpers; used directly by the multivector kernel for speed.

def terms_add_into(dst: dict, src: Mapping, scale=1) -> None:
    for m, c in src.items():
        v = dst.get(m, 0) + scale * c
        if v:
            dst[m] = v
        else:
            dst.pop(m, None)


def terms_mul(t1: Mapping, t2: Mapping) -> dict:
    out: dict = {}
    for m1, c1 in t1.items():
        for m2, c2 in t2.items():
            m = mono_mul(m1, m2)
            v = out.get(m, 0) + c1 * c2
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def terms_mul_add_into(dst: dict, t1: Mapping, t2: Mapping, scale=1) -> None:
    for m1, c1 in t1.items():
        for m2, c2 in t2.items():
            m = mono_mul(m1, m2)
            v = dst.get(m, 0) + scale * c1 * c2
            if v:
                dst[m] = v
            else:
                dst.pop(m, None)


def terms_partial(t: Mapping, var: int) -> dict:
    out: dict = {}
    for m, c in t.items():
        for k, (v, e) in enumerate(m):
            if v == var:
                nm = m[:k] + ((v, e - 1),) + m[k + 1:] if e > 1 else m[:k] + m[k + 1:]
                out[nm] = out.get(nm, 0) + c * e
                break
    return {m: c for m, c in out.items() if c}


def terms_vars(t: Mapping) -> set:
    return {v for m in t for v, _ in m}


class Poly:
    """Immutable sparse polynomial; ``terms`` maps monomials to nonzero rationals."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping | None = None):
        self.terms = {m: to_rat(c) for m, c in (terms or {}).items() if c}

    @classmethod
    def _raw(cls, terms: dict) -> "Poly":
        p = object.__new__(cls)
        p.terms = terms
        return p

    @classmethod
    def const(cls, c) -> "Poly":
        c = to_rat(c)
        return cls._raw({ONE: c} if c else {})

    @classmethod
    def var(cls, i: int) -> "Poly":
        return cls._raw({((i, 1),): Fraction(1)})

    @classmethod
    def zero(cls) -> "Poly":
        return cls._raw({})

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            return other
        return Poly.const(other)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __add__(self, other):
        o = self._coerce(other)
        out = dict(self.terms)
        terms_add_into(out, o.terms)
        return Poly._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        o = self._coerce(other)
        out = dict(self.terms)
        terms_add_into(out, o.terms, -1)
        return Poly._raw(out)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = to_rat(other)
            if not c:
                return Poly.zero()
            return Poly._raw({m: v * c for m, v in self.terms.items()})
        return Poly._raw(terms_mul(self.terms, other.terms))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = Poly.const(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == Poly.const(other).terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def partial(self, var: int) -> "Poly":
        return Poly._raw(terms_partial(self.terms, var))

    def degree(self) -> int:
        return max((mono_degree(m) for m in self.terms), default=-1)

    def variables(self) -> set:
        return terms_vars(self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get(ONE, Fraction(0))

    def eval(self, point: Sequence):
        """Evaluate at rationals or jets, caching powers per variable."""
        powers: dict = {}
        acc = 0
        for m, c in self.terms.items():
            t = c
            for v, e in m:
                key = (v, e)
                pw = powers.get(key)
                if pw is None:
                    pw = point[v] ** e if e > 1 else point[v]
                    powers[key] = pw
                t = pw * t if isinstance(pw, Jet) else t * pw
            acc = acc + t
        return acc

    def __call__(self, point):
        return self.eval(point)

    def sorted_terms(self) -> list:
        return sorted(self.terms.items())

    def to_records(self, n_vars: int | None = None) -> list:
        n = n_vars if n_vars is not None else (max(self.variables(), default=-1) + 1)
        recs = []
        for m, c in self.sorted_terms():
            exps = [0] * n
            for v, e in m:
                exps[v] = e
            recs.append({"exponents": exps, "coefficient": f"{c.numerator}/{c.denominator}"})
        return recs

    @classmethod
    def from_records(cls, recs: Iterable[Mapping]) -> "Poly":
        out: dict = {}
        for r in recs:
            m = tuple((v, e) for v, e in enumerate(r["exponents"]) if e)
            terms_add_into(out, {m: to_rat(r["coefficient"])})
        return cls._raw(out)

    def format(self, names: Sequence[str] | None = None) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            mono = "*".join(
                (names[v] if names else f"x{v}") + (f"^{e}" if e > 1 else "") for v, e in m)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"Poly({self.format()})"
