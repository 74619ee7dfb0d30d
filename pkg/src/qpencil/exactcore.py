"""Exact scalars, forward-mode jets and rational linear algebra.

Scalars are :class:`fractions.Fraction`.  A :class:`Jet` carries a value and a
tuple of first derivatives; its components may themselves be jets, which gives
mixed second derivatives when needed.
"""

from __future__ import annotations

import random
from fractions import Fraction
from math import lcm
from typing import Callable, Iterable, Sequence

Rat = Fraction

SAMPLE_NUM_BOUND = 100
SAMPLE_DEN_BOUND = 16


class AvoidanceExhausted(RuntimeError):
    """No sample point avoided every constraint within the resample budget."""


class SingularEvaluation(ArithmeticError):
    """A matrix inverse or division hit a zero at the sample point."""


def to_rat(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        raise TypeError("floats are not exact; pass a string or Fraction")
    return Fraction(x)


def rat_str(x: Fraction) -> str:
    x = to_rat(x)
    return f"{x.numerator}/{x.denominator}"


def base_value(x):
    """Strip nested jets down to the underlying rational."""
    while isinstance(x, Jet):
        x = x.value
    return x


def is_zero(x) -> bool:
    if isinstance(x, Jet):
        return x.is_zero()
    return x == 0


class Jet:
    """First-order jet ``value + sum_k deriv[k] eps_k`` with ``eps_j eps_k = 0``.

    Jets nest: components may be jets of a lower ``level``, which then behave
    as scalars.  Mixing with a higher-level jet defers to that jet's operator.
    """

    __slots__ = ("value", "deriv")
    level = 0

    def __init__(self, value, deriv: Sequence):
        self.value = value
        self.deriv = tuple(deriv)

    @classmethod
    def variable(cls, value, index: int, width: int) -> "Jet":
        return cls(value, tuple(1 if k == index else 0 for k in range(width)))

    @classmethod
    def constant(cls, value, width: int) -> "Jet":
        return cls(value, (0,) * width)

    def is_zero(self) -> bool:
        return is_zero(self.value) and all(is_zero(d) for d in self.deriv)

    def _peer(self, other) -> bool:
        """True for a same-level jet; raises _Defer for a higher-level one."""
        if isinstance(other, Jet):
            if other.level == self.level:
                if len(other.deriv) != len(self.deriv):
                    raise ValueError("jets of different widths")
                return True
            if other.level > self.level:
                raise _Defer
        return False

    def __add__(self, other):
        try:
            if not self._peer(other):
                return type(self)(self.value + other, self.deriv)
        except _Defer:
            return NotImplemented
        return type(self)(self.value + other.value,
                          tuple(a + b for a, b in zip(self.deriv, other.deriv)))

    __radd__ = __add__

    def __neg__(self):
        return type(self)(-self.value, tuple(-d for d in self.deriv))

    def __sub__(self, other):
        try:
            if not self._peer(other):
                return type(self)(self.value - other, self.deriv)
        except _Defer:
            return NotImplemented
        return type(self)(self.value - other.value,
                          tuple(a - b for a, b in zip(self.deriv, other.deriv)))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            if not self._peer(other):
                return type(self)(self.value * other, tuple(d * other for d in self.deriv))
        except _Defer:
            return NotImplemented
        v, w = self.value, other.value
        return type(self)(v * w, tuple(d * w + v * e for d, e in zip(self.deriv, other.deriv)))

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        if is_zero(base_value(self.value)):
            raise SingularEvaluation("jet reciprocal at zero value")
        inv = self.value.reciprocal() if isinstance(self.value, Jet) else Fraction(1) / self.value
        inv2 = inv * inv
        return type(self)(inv, tuple(-(d * inv2) for d in self.deriv))

    def __truediv__(self, other):
        try:
            if not self._peer(other):
                return self * rdiv(1, other)
        except _Defer:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = type(self)(1, (0,) * len(self.deriv))
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, Jet):
            return self.level == other.level and self.value == other.value and self.deriv == other.deriv
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        return f"{type(self).__name__}({self.value!r}; {list(self.deriv)!r})"


class TanJet(Jet):
    """Jet one level above :class:`Jet`, used for tangent directions of forms."""

    __slots__ = ()
    level = 1


class _Defer(Exception):
    pass


def rdiv(a, b):
    """Exact division that also accepts plain integers on both sides."""
    if isinstance(b, Jet):
        return b.reciprocal() * a
    if b == 0:
        raise SingularEvaluation("division by zero")
    if isinstance(a, (Jet, float)) or isinstance(b, float):
        return a / b
    return Fraction(a) / b


# ---------------------------------------------------------------- matrices

Matrix = list  # list of rows, entries Fraction / int / Jet


def zeros(r: int, c: int) -> Matrix:
    return [[0] * c for _ in range(r)]


def identity(n: int) -> Matrix:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def mat_add(A: Matrix, B: Matrix) -> Matrix:
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_sub(A: Matrix, B: Matrix) -> Matrix:
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_scale(c, A: Matrix) -> Matrix:
    return [[c * a for a in row] for row in A]


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    if A and len(A[0]) != len(B):
        raise ValueError("dimension mismatch in matrix product")
    cols = len(B[0]) if B else 0
    out = []
    for row in A:
        acc = [0] * cols
        for k, a in enumerate(row):
            if not isinstance(a, Jet) and a == 0:
                continue
            for j, b in enumerate(B[k]):
                if not isinstance(b, Jet) and b == 0:
                    continue
                acc[j] = acc[j] + a * b
        out.append(acc)
    return out


def mat_transpose(A: Matrix) -> Matrix:
    return [list(col) for col in zip(*A)] if A else []


def mat_trace(A: Matrix):
    acc = 0
    for i in range(len(A)):
        acc = acc + A[i][i]
    return acc


def mat_inverse(A: Matrix) -> Matrix:
    """Gauss-Jordan inverse over any exact field-like scalars (including jets)."""
    n = len(A)
    M = [list(row) + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if base_value(M[r][col]) != 0), None)
        if piv is None:
            raise SingularEvaluation("singular matrix")
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        inv = p.reciprocal() if isinstance(p, Jet) else Fraction(1) / p
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r == col:
                continue
            f = M[r][col]
            if not isinstance(f, Jet) and f == 0:
                continue
            M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [row[n:] for row in M]


def mat_det(A: Matrix):
    """Determinant by elimination (exact)."""
    n = len(A)
    M = [list(row) for row in A]
    det = 1
    for col in range(n):
        piv = next((r for r in range(col, n) if base_value(M[r][col]) != 0), None)
        if piv is None:
            return 0
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        p = M[col][col]
        det = det * p
        for r in range(col + 1, n):
            f = M[r][col]
            if not isinstance(f, Jet) and f == 0:
                continue
            f = rdiv(f, p)
            M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return det


def rank(M: Sequence[Sequence]) -> int:
    """Rank over Q via fraction-free (Bareiss) elimination on an integer copy."""
    rows = []
    for row in M:
        row = [to_rat(x) for x in row]
        den = lcm(*(x.denominator for x in row)) if row else 1
        ints = [int(x * den) for x in row]
        if any(ints):
            rows.append(ints)
    if not rows:
        return 0
    ncols = len(rows[0])
    r = 0
    prev = 1
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        p = rows[r][c]
        for i in range(r + 1, len(rows)):
            f = rows[i][c]
            rows[i] = [(p * x - f * y) // prev for x, y in zip(rows[i], rows[r])]
        prev = p
        r += 1
        if r == len(rows):
            break
    return r


# ---------------------------------------------------------------- sampling

def _sample_rat(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(-SAMPLE_NUM_BOUND, SAMPLE_NUM_BOUND), rng.randint(1, SAMPLE_DEN_BOUND))


def sample_set_size() -> int:
    """Number of distinct rationals the sampler can produce."""
    vals = {Fraction(p, q) for p in range(-SAMPLE_NUM_BOUND, SAMPLE_NUM_BOUND + 1)
            for q in range(1, SAMPLE_DEN_BOUND + 1)}
    return len(vals)


def _constraint_value(c, point):
    if callable(c):
        return c(point)
    return c.eval(point)


class PointStream:
    """Deterministic stream of sample points drawn from one seeded generator."""

    def __init__(self, seed: int, n_vars: int, avoid: Iterable = (), bound: int = 1000,
                 draw: Callable[[random.Random], list] | None = None):
        self.rng = random.Random(seed)
        self.n_vars = n_vars
        self.avoid = list(avoid)
        self.bound = bound
        self.draw = draw

    def _ok(self, point) -> bool:
        for c in self.avoid:
            try:
                if is_zero(_constraint_value(c, point)):
                    return False
            except (SingularEvaluation, ZeroDivisionError):
                return False
        return True

    def next(self) -> list:
        for _ in range(self.bound):
            if self.draw is not None:
                point = self.draw(self.rng)
            else:
                point = [_sample_rat(self.rng) for _ in range(self.n_vars)]
            if self._ok(point):
                return point
        raise AvoidanceExhausted(f"no admissible point after {self.bound} draws")

    def take(self, k: int) -> list:
        return [self.next() for _ in range(k)]


def sample_point(seed: int, n_vars: int, avoid: Iterable = (), bound: int = 1000) -> list:
    return PointStream(seed, n_vars, avoid, bound).next()


def sample_points(seed: int, n_points: int, n_vars: int, avoid: Iterable = (), bound: int = 1000) -> list:
    return PointStream(seed, n_vars, avoid, bound).take(n_points)
