"""Local chart of the spin Ruijsenaars-Schneider phase space.

Coordinates are ``(x_i, a_i^alpha, b_i^alpha)`` with ``sum_alpha a_i^alpha = 1``.
Structure functions are closed-form rational evaluators that accept exact
rationals or jets, so the same code yields values and first derivatives.
Flat coordinate order: ``x_i -> i``, ``a_i^alpha -> n + i d + alpha``,
``b_i^alpha -> n + n d + i d + alpha`` (all indices 0-based).
"""

from __future__ import annotations

import csv
import io
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .exactcore import (Jet, base_value, identity, is_zero, mat_det,
                        mat_inverse, mat_mul, mat_scale, mat_sub, mat_trace, rank, rdiv, to_rat)
from .mvcalc import bracket_of_functions
from .polyfield import Poly
from .structlib import BadParams, build_spin_rs, psi_bivector, spin_pencil_params
from .verifysuite import CheckReport, _report, point_witness


class DegeneratePoint(ValueError):
    """The point lies outside the regular chart."""


class StepRejected(RuntimeError):
    """The integrator came too close to a collision of the chart."""


def _o(a: int, b: int) -> int:
    return (a < b) - (a > b)


def check_q(q, n: int) -> Fraction:
    q = to_rat(q)
    if q == 0:
        raise BadParams("q must be nonzero")
    for k in range(1, n + 1):
        if q ** k == 1:
            raise BadParams(f"q^{k} = 1 is not allowed for n = {n}")
    return q


# ---------------------------------------------------------------- points

@dataclass(frozen=True)
class SpinRSPoint:
    x: tuple
    a: tuple  # n rows of d entries
    b: tuple
    q: Fraction

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def d(self) -> int:
        return len(self.a[0])

    @classmethod
    def build(cls, x, a, b, q, validate: bool = True) -> "SpinRSPoint":
        p = cls(tuple(to_rat(v) for v in x), tuple(tuple(to_rat(v) for v in r) for r in a),
                tuple(tuple(to_rat(v) for v in r) for r in b), to_rat(q))
        if validate:
            p.validate()
        return p

    def coords(self) -> list:
        return list(self.x) + [v for r in self.a for v in r] + [v for r in self.b for v in r]

    @classmethod
    def from_coords(cls, n: int, d: int, q, vec: Sequence, validate: bool = True) -> "SpinRSPoint":
        x = vec[:n]
        a = [vec[n + i * d:n + (i + 1) * d] for i in range(n)]
        b = [vec[n + n * d + i * d:n + n * d + (i + 1) * d] for i in range(n)]
        return cls.build(x, a, b, q, validate)

    def validate(self) -> None:
        n, q = self.n, self.q
        if any(len(r) != self.d for r in self.a + self.b) or len(self.b) != n:
            raise DegeneratePoint("ragged spin coordinates")
        check_q(q, n)
        for i in range(n):
            if self.x[i] == 0:
                raise DegeneratePoint(f"x_{i + 1} = 0")
            if sum(self.a[i]) != 1:
                raise DegeneratePoint(f"sum_alpha a_{i + 1}^alpha != 1")
            for j in range(n):
                if i != j and (self.x[i] == self.x[j] or self.x[i] == q * self.x[j]):
                    raise DegeneratePoint(f"collision between x_{i + 1} and x_{j + 1}")
        for alpha in range(self.d + 1):
            if mat_det(script_z(self.n, self.d, q, self.coords(), alpha)) == 0:
                raise DegeneratePoint(f"det Zcal_{alpha} = 0")


def random_point(n: int, d: int, q, rng: random.Random, bound: int = 200) -> SpinRSPoint:
    """A valid chart point with small rational coordinates."""
    q = check_q(q, n)
    for _ in range(bound):
        x = [Fraction(rng.randint(1, 40), rng.randint(1, 6)) * rng.choice((1, -1)) for _ in range(n)]
        a = []
        for _ in range(n):
            row = [Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(d - 1)]
            a.append(row + [1 - sum(row, Fraction(0))])
        b = [[Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(d)] for _ in range(n)]
        try:
            return SpinRSPoint.build(x, a, b, q)
        except DegeneratePoint:
            continue
    raise DegeneratePoint("could not draw a regular point")


def flow_point(n: int, d: int, q, rng: random.Random, horizon: float = 1.0) -> SpinRSPoint:
    """A regular initial condition whose trajectory stays in the chart up to ``horizon``.

    The equations are quadratic in the spins, so generic data blow up in
    finite time; candidates are screened with a coarse trial integration.
    """
    q = check_q(q, n)
    Q = max(abs(float(q)), 1 / abs(float(q)))
    ratio = Fraction(Q ** (1 / (n + 1))).limit_denominator(1000)
    for _ in range(200):
        x = [ratio ** k * (1 + (ratio - 1) * Fraction(rng.randint(0, 9), 40)) for k in range(n)]
        a = []
        for _ in range(n):
            row = [Fraction(rng.randint(-5, 5), 10) for _ in range(d - 1)]
            a.append(row + [1 - sum(row, Fraction(0))])
        b = [[Fraction(rng.randint(-5, 5), 400) for _ in range(d)] for _ in range(n)]
        try:
            p = SpinRSPoint.build(x, a, b, q)
            if horizon > 0 and flow(p, horizon, horizon / 200, k_max=1, record_every=200).max_drift() > 1e-6:
                continue
            return p
        except (DegeneratePoint, StepRejected):
            continue
    raise DegeneratePoint("could not draw a regular initial condition")


def special_point(n: int, d: int, q, rng: random.Random) -> SpinRSPoint:
    """``a_i^alpha = delta_{alpha 1}`` with nonzero ``b``."""
    q = check_q(q, n)
    for _ in range(200):
        x = [Fraction(rng.randint(1, 40), rng.randint(1, 6)) for _ in range(n)]
        a = [[1] + [0] * (d - 1) for _ in range(n)]
        b = [[Fraction(rng.choice([k for k in range(-9, 10) if k]), rng.randint(1, 4)) for _ in range(d)]
             for _ in range(n)]
        try:
            return SpinRSPoint.build(x, a, b, q)
        except DegeneratePoint:
            continue
    raise DegeneratePoint("could not draw a regular special point")


# ---------------------------------------------------------------- chart layout

class Layout:
    def __init__(self, n: int, d: int):
        self.n, self.d = n, d
        self.size = n + 2 * n * d

    def x(self, i):
        return i

    def a(self, i, al):
        return self.n + i * self.d + al

    def b(self, i, al):
        return self.n + self.n * self.d + i * self.d + al

    def names(self) -> list:
        n, d = self.n, self.d
        return ([f"x{i + 1}" for i in range(n)]
                + [f"a{i + 1}^{al + 1}" for i in range(n) for al in range(d)]
                + [f"b{i + 1}^{al + 1}" for i in range(n) for al in range(d)])


def _split(n: int, d: int, vec: Sequence):
    x = list(vec[:n])
    a = [list(vec[n + i * d:n + (i + 1) * d]) for i in range(n)]
    b = [list(vec[n + n * d + i * d:n + n * d + (i + 1) * d]) for i in range(n)]
    return x, a, b


def f_matrix(n: int, d: int, vec: Sequence) -> list:
    _, a, b = _split(n, d, vec)
    return [[sum((a[i][g] * b[j][g] for g in range(d)), 0) for j in range(n)] for i in range(n)]


def z_matrix(n: int, d: int, q, vec: Sequence) -> list:
    """``Z_ij = q f_ij / (x_i / x_j - q)``."""
    x, _, _ = _split(n, d, vec)
    f = f_matrix(n, d, vec)
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            den = rdiv(x[i], x[j]) - q
            if is_zero(base_value(den)):
                raise DegeneratePoint(f"x_{i + 1} = q x_{j + 1}")
            row.append(rdiv(q * f[i][j], den))
        out.append(row)
    return out


def script_z(n: int, d: int, q, vec: Sequence, alpha: int) -> list:
    """``Zcal_alpha = Z + sum_{beta <= alpha} A_beta B_beta``."""
    _, a, b = _split(n, d, vec)
    Z = z_matrix(n, d, q, vec)
    return [[Z[i][j] + sum((a[i][g] * b[j][g] for g in range(alpha)), 0) for j in range(n)]
            for i in range(n)]


def chart_matrices(p: SpinRSPoint) -> dict:
    """``X``, ``Z`` and the columns ``A_alpha`` / rows ``B_alpha`` at a point."""
    vec = p.coords()
    n, d = p.n, p.d
    X = [[p.x[i] if i == j else 0 for j in range(n)] for i in range(n)]
    A = [[[p.a[i][al]] for i in range(n)] for al in range(d)]
    B = [[[p.b[j][al] for j in range(n)]] for al in range(d)]
    return {"X": X, "Z": z_matrix(n, d, p.q, vec), "A": A, "B": B}


def moment_slice_residual(p: SpinRSPoint) -> list:
    """``X Z X^{-1} (Z + sum A B)^{-1} - q Id``."""
    M = chart_matrices(p)
    lhs = mat_mul(mat_mul(mat_mul(M["X"], M["Z"]), mat_inverse(M["X"])),
                  mat_inverse(script_z(p.n, p.d, p.q, p.coords(), p.d)))
    return mat_sub(lhs, mat_scale(p.q, identity(p.n)))


# ---------------------------------------------------------------- brackets on generators

def _cot(x, i, j):
    return rdiv(x[i] + x[j], x[i] - x[j])


def bracket0_table(n: int, d: int, q, vec: Sequence, raw: bool = False) -> list:
    """Antisymmetric matrix of ``{u, v}_0`` on the flat coordinates."""
    L = Layout(n, d)
    x, a, b = _split(n, d, vec)
    Z = z_matrix(n, d, q, vec)
    T = [[0] * L.size for _ in range(L.size)]
    half = Fraction(1, 2)

    def put(u, v, val):
        T[u][v] = val
        if not raw:
            T[v][u] = -val

    for i in range(n):
        for al in range(d):
            put(L.x(i), L.b(i, al), x[i] * b[i][al])
    for i in range(n):
        for j in range(n):
            C = _cot(x, i, j) if i != j else 0
            for al in range(d):
                for be in range(d):
                    # {a_i^al, a_j^be}
                    v = half * _o(be, al) * (a[i][al] * a[j][be] + a[j][al] * a[i][be])
                    if i != j:
                        v = v + half * C * (a[i][al] * a[j][be] + a[j][al] * a[i][be]
                                            - a[j][al] * a[j][be] - a[i][al] * a[i][be])
                    for g in range(d):
                        v = v + half * _o(al, g) * a[j][be] * (a[i][al] * a[j][g] + a[j][al] * a[i][g])
                        v = v - half * _o(be, g) * a[i][al] * (a[j][be] * a[i][g] + a[i][be] * a[j][g])
                    if raw or (i, al) < (j, be):
                        put(L.a(i, al), L.a(j, be), v)
                    # {a_i^al, b_j^be}
                    dab = 1 if al == be else 0
                    v = a[i][al] * Z[i][j] - dab * Z[i][j]
                    if i != j:
                        v = v - half * C * (a[i][al] - a[j][al]) * b[j][be]
                    if al < be:
                        v = v + a[i][al] * b[j][be]
                    for g in range(be):
                        v = v + a[i][al] * a[i][g] * (b[j][g] - b[j][be]) - dab * a[i][g] * b[j][g]
                    for g in range(d):
                        v = v - half * _o(al, g) * b[j][be] * (a[i][al] * a[j][g] + a[j][al] * a[i][g])
                    put(L.a(i, al), L.b(j, be), v)
                    # {b_i^al, b_j^be}
                    v = -b[i][al] * Z[i][j] + b[j][be] * Z[j][i] \
                        + half * _o(be, al) * (b[i][al] * b[j][be] - b[j][al] * b[i][be])
                    if i != j:
                        v = v + half * C * (b[i][al] * b[j][be] + b[j][al] * b[i][be])
                    for g in range(be):
                        v = v - b[i][al] * a[i][g] * (b[j][g] - b[j][be])
                    for g in range(al):
                        v = v + b[j][be] * a[j][g] * (b[i][g] - b[i][al])
                    if raw or (i, al) < (j, be):
                        put(L.b(i, al), L.b(j, be), v)
    return T


def g_function(a: Sequence, z: Sequence, i: int, j: int, al: int, be: int, quadratic: bool = True):
    """``G_z(i, j; alpha, beta)``; ``quadratic=False`` drops the last sum (negative control)."""
    d = len(z)
    v = z[al][be]
    for m in range(d):
        v = v + z[m][al] * a[j][m] - z[m][be] * a[i][m]
    if quadratic:
        for m in range(d):
            for k in range(d):
                if z[m][k]:
                    v = v + z[m][k] * a[i][m] * a[j][k]
    return v


def psi_table(n: int, d: int, vec: Sequence, z: Sequence, quadratic: bool = True) -> list:
    L = Layout(n, d)
    _, a, b = _split(n, d, vec)
    T = [[0] * L.size for _ in range(L.size)]
    for i in range(n):
        for j in range(n):
            for al in range(d):
                for be in range(d):
                    G = g_function(a, z, i, j, al, be, quadratic)
                    if (i, al) < (j, be):
                        T[L.a(i, al)][L.a(j, be)] = G * a[i][al] * a[j][be]
                        T[L.a(j, be)][L.a(i, al)] = -T[L.a(i, al)][L.a(j, be)]
                        T[L.b(i, al)][L.b(j, be)] = G * b[i][al] * b[j][be]
                        T[L.b(j, be)][L.b(i, al)] = -T[L.b(i, al)][L.b(j, be)]
                    v = -G * a[i][al] * b[j][be]
                    T[L.a(i, al)][L.b(j, be)] = v
                    T[L.b(j, be)][L.a(i, al)] = -v
    return T


def ao_table(n: int, d: int, q, vec: Sequence, sign: int, raw: bool = False) -> list:
    """Brackets ``{-,-}_+`` (sign = +1) and ``{-,-}_-`` (sign = -1) on the flat coordinates."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    L = Layout(n, d)
    x, a, b = _split(n, d, vec)
    Z = z_matrix(n, d, q, vec)
    T = [[0] * L.size for _ in range(L.size)]
    h = Fraction(sign, 2)
    half = Fraction(1, 2)

    def put(u, v, val):
        T[u][v] = val
        if not raw:
            T[v][u] = -val

    def beyond(g, be):
        return g > be if sign > 0 else g < be

    for i in range(n):
        for al in range(d):
            put(L.x(i), L.b(i, al), x[i] * b[i][al])
    for i in range(n):
        for j in range(n):
            C = _cot(x, i, j) if i != j else 0
            S = 0
            for e in range(d):
                for g in range(d):
                    if e != g:
                        S = S + _o(e, g) * a[i][e] * a[j][g]
            for al in range(d):
                for be in range(d):
                    v = -h * _o(be, al) * a[j][al] * a[i][be] - h * S * a[i][al] * a[j][be]
                    if i != j:
                        v = v + half * C * (a[i][al] * a[j][be] + a[j][al] * a[i][be]
                                            - a[j][al] * a[j][be] - a[i][al] * a[i][be])
                    for g in range(d):
                        v = v - h * _o(al, g) * a[j][be] * a[j][al] * a[i][g]
                        v = v + h * _o(be, g) * a[i][al] * a[i][be] * a[j][g]
                    if raw or (i, al) < (j, be):
                        put(L.a(i, al), L.a(j, be), v)
                    dab = 1 if al == be else 0
                    v = a[i][al] * Z[i][j] - dab * Z[i][j] + h * S * a[i][al] * b[j][be] \
                        + half * a[i][al] * a[i][be] * b[j][be] - half * dab * a[i][al] * b[j][be]
                    if i != j:
                        v = v - half * C * (a[i][al] - a[j][al]) * b[j][be]
                    for g in range(d):
                        if beyond(g, be):
                            v = v + a[i][al] * a[i][g] * b[j][g] - dab * a[i][g] * b[j][g]
                        v = v + h * _o(al, g) * b[j][be] * a[j][al] * a[i][g]
                    put(L.a(i, al), L.b(j, be), v)
                    v = -b[i][al] * Z[i][j] + b[j][be] * Z[j][i] + h * _o(be, al) * b[j][al] * b[i][be] \
                        - h * S * b[i][al] * b[j][be] + half * (a[j][al] - a[i][be]) * b[i][al] * b[j][be]
                    if i != j:
                        v = v + half * C * (b[i][al] * b[j][be] + b[j][al] * b[i][be])
                    for g in range(d):
                        if beyond(g, be):
                            v = v - b[i][al] * a[i][g] * b[j][g]
                        if beyond(g, al):
                            v = v + b[j][be] * a[j][g] * b[i][g]
                    if raw or (i, al) < (j, be):
                        put(L.b(i, al), L.b(j, be), v)
    return T


def z_table(d: int, z: Mapping | Sequence) -> list:
    """Antisymmetric ``d x d`` table from ``{(alpha, beta): value}`` (1-based, alpha < beta) or a matrix."""
    if isinstance(z, Mapping):
        T = [[Fraction(0)] * d for _ in range(d)]
        for (al, be), v in z.items():
            if not (1 <= al <= d and 1 <= be <= d) or al == be:
                raise BadParams(f"bad spin index pair ({al}, {be})")
            T[al - 1][be - 1] = to_rat(v)
            T[be - 1][al - 1] = -to_rat(v)
        return T
    T = [[to_rat(v) for v in row] for row in z]
    if len(T) != d or any(len(r) != d for r in T):
        raise BadParams("z table must be d x d")
    for al in range(d):
        for be in range(d):
            if T[al][be] != -T[be][al]:
                raise BadParams("z table must be antisymmetric")
    return T


def z_minus(d: int) -> list:
    """``z_{alpha beta} = 1/2`` for ``alpha < beta``."""
    return [[Fraction(_o(al, be), 2) for be in range(d)] for al in range(d)]


@dataclass(frozen=True)
class SpinBracketTable:
    """``z0 {-,-}_0 + psi_z``."""

    z0: Fraction
    z: tuple

    @classmethod
    def build(cls, d: int, z0, z) -> "SpinBracketTable":
        return cls(to_rat(z0), tuple(tuple(r) for r in z_table(d, z)))

    def table(self, n: int, d: int, q, vec: Sequence, quadratic: bool = True) -> list:
        T = psi_table(n, d, vec, self.z, quadratic)
        if self.z0:
            T0 = bracket0_table(n, d, q, vec)
            T = [[self.z0 * u + v for u, v in zip(r0, r)] for r0, r in zip(T0, T)]
        return T


# ---------------------------------------------------------------- derivatives and brackets of functions

def jet_coords(vec: Sequence) -> list:
    N = len(vec)
    return [Jet.variable(v, k, N) for k, v in enumerate(vec)]


def _val(e):
    return e.value if isinstance(e, Jet) else e


def _der(e, t):
    return e.deriv[t] if isinstance(e, Jet) else 0


def gradient(fn: Callable, vec: Sequence) -> list:
    out = fn(jet_coords(vec))
    return [_der(out, t) for t in range(len(vec))]


def bracket_functions(T: Sequence[Sequence], grad_f: Sequence, grad_g: Sequence):
    """``grad_f^T T grad_g``."""
    acc = 0
    for u, fu in enumerate(grad_f):
        if fu:
            row = T[u]
            for w, gw in enumerate(grad_g):
                if gw and row[w]:
                    acc = acc + fu * row[w] * gw
    return acc


def jacobiator(jet_table: Sequence[Sequence], u: int, v: int, w: int):
    N = len(jet_table)

    def term(p, r, s):
        acc = 0
        for t in range(N):
            c = _val(jet_table[t][p])
            if c:
                dv = _der(jet_table[r][s], t)
                if dv:
                    acc = acc + c * dv
        return acc

    return term(u, v, w) + term(v, w, u) + term(w, u, v)


# ---------------------------------------------------------------- checks on the chart

def _points(n, d, q, n_points, seed):
    rng = random.Random(seed)
    return [random_point(n, d, q, rng) for _ in range(n_points)]


def check_jacobi_local(table: SpinBracketTable, points: Sequence[SpinRSPoint], triples=None,
                       quadratic: bool = True, name: str = "spinrs:jacobi") -> CheckReport:
    """Jet Jacobiator of ``z0 {-,-}_0 + psi_z`` on coordinate triples, exact at each point."""
    start = time.perf_counter()
    samples = 0
    for p in points:
        n, d = p.n, p.d
        T = table.table(n, d, p.q, jet_coords(p.coords()), quadratic)
        N = len(T)
        trip = triples or [(u, v, w) for u in range(N) for v in range(u + 1, N) for w in range(v + 1, N)]
        names = Layout(n, d).names()
        for u, v, w in trip:
            samples += 1
            J = jacobiator(T, u, v, w)
            if J != 0:
                return _report(name, start, point_witness(p.coords(), triple=[names[u], names[v], names[w]],
                                                          jacobiator=J), samples)
    return _report(name, start, None, samples)


def check_tangency(table_fn: Callable, points: Sequence[SpinRSPoint], name: str = "spinrs:well-defined") -> CheckReport:
    """``{sum_alpha a_i^alpha, G} = 0`` for every generator ``G``."""
    start = time.perf_counter()
    samples = 0
    for p in points:
        L = Layout(p.n, p.d)
        T = table_fn(p)
        for i in range(p.n):
            for w in range(L.size):
                samples += 1
                s = sum((T[L.a(i, al)][w] for al in range(p.d)), 0)
                if s != 0:
                    return _report(name, start, point_witness(p.coords(), i=i + 1, generator=L.names()[w],
                                                              value=s), samples)
    return _report(name, start, None, samples)


def check_table_equal(lhs_fn: Callable, rhs_fn: Callable, points: Sequence[SpinRSPoint],
                      name: str, relabel: Callable | None = None) -> CheckReport:
    """Compare two bracket tables on all generator pairs; ``relabel(point) -> (point', perm)``."""
    start = time.perf_counter()
    samples = 0
    for p in points:
        names = Layout(p.n, p.d).names()
        A = lhs_fn(p)
        if relabel is None:
            B, perm = rhs_fn(p), list(range(len(A)))
        else:
            p2, perm = relabel(p)
            B = rhs_fn(p2)
        for u in range(len(A)):
            for w in range(len(A)):
                samples += 1
                if A[u][w] != B[perm[u]][perm[w]]:
                    return _report(name, start, point_witness(p.coords(), pair=[names[u], names[w]],
                                                              lhs=A[u][w], rhs=B[perm[u]][perm[w]]), samples)
    return _report(name, start, None, samples)


def reverse_spins(p: SpinRSPoint):
    """``alpha -> d + 1 - alpha``; returns the relabeled point and the coordinate permutation."""
    L = Layout(p.n, p.d)
    q = SpinRSPoint.build(p.x, [r[::-1] for r in p.a], [r[::-1] for r in p.b], p.q)
    perm = list(range(L.size))
    for i in range(p.n):
        for al in range(p.d):
            perm[L.a(i, al)] = L.a(i, p.d - 1 - al)
            perm[L.b(i, al)] = L.b(i, p.d - 1 - al)
    return q, perm


def casimirs(n: int, d: int) -> list:
    """``(label, function)`` for ``x_i`` and ``a_j^alpha b_j^alpha``."""
    L = Layout(n, d)
    out = [(f"x{i + 1}", (lambda v, i=i: v[L.x(i)])) for i in range(n)]
    out += [(f"a{j + 1}^{al + 1} b{j + 1}^{al + 1}", (lambda v, j=j, al=al: v[L.a(j, al)] * v[L.b(j, al)]))
            for j in range(n) for al in range(d)]
    return out


def check_casimirs(z, points: Sequence[SpinRSPoint], name: str = "spinrs:casimirs") -> CheckReport:
    start = time.perf_counter()
    samples = 0
    for p in points:
        vec = p.coords()
        T = psi_table(p.n, p.d, vec, z_table(p.d, z))
        names = Layout(p.n, p.d).names()
        for label, fn in casimirs(p.n, p.d):
            gf = gradient(fn, vec)
            for w in range(len(vec)):
                samples += 1
                val = sum((gf[u] * T[u][w] for u in range(len(vec)) if gf[u]), 0)
                if val != 0:
                    return _report(name, start, point_witness(vec, casimir=label, generator=names[w], value=val),
                                   samples)
    return _report(name, start, None, samples)


# ---------------------------------------------------------------- Hamiltonian dynamics

def hamiltonian(n: int, d: int, vec: Sequence):
    """``h = 2 sum_i f_ii``."""
    f = f_matrix(n, d, vec)
    return 2 * sum((f[i][i] for i in range(n)), 0)


def potential(x: Sequence, q, i: int, k: int):
    return rdiv(x[i] + x[k], x[i] - x[k]) - rdiv(x[i] + q * x[k], x[i] - q * x[k])


def trigc_velocity(n: int, d: int, q, vec: Sequence) -> list:
    """Closed-form right-hand side of the spin RS equations of motion."""
    L = Layout(n, d)
    x, a, b = _split(n, d, vec)
    f = f_matrix(n, d, vec)
    out = [0] * L.size
    for i in range(n):
        out[L.x(i)] = 2 * f[i][i] * x[i]
        for al in range(d):
            da = db = 0
            for k in range(n):
                if k == i:
                    continue
                Vik, Vki = potential(x, q, i, k), potential(x, q, k, i)
                da = da + Vik * f[i][k] * (a[k][al] - a[i][al])
                db = db + Vik * f[i][k] * b[i][al] - Vki * f[k][i] * b[k][al]
            out[L.a(i, al)] = da
            out[L.b(i, al)] = db
    return out


def hamiltonian_field(table: SpinBracketTable, p: SpinRSPoint) -> list:
    """Velocities ``dF/dt = {F, z0^{-1} h}`` on the flat coordinates."""
    if table.z0 == 0:
        raise BadParams("the rescaled Hamiltonian needs z0 != 0")
    vec = p.coords()
    T = table.table(p.n, p.d, p.q, vec)
    gh = gradient(lambda v: hamiltonian(p.n, p.d, v), vec)
    return [sum((T[u][w] * gh[w] for w in range(len(vec)) if gh[w]), 0) / table.z0 for u in range(len(vec))]


def check_hamiltonian(table: SpinBracketTable, points: Sequence[SpinRSPoint],
                      name: str = "spinrs:hamiltonian") -> CheckReport:
    start = time.perf_counter()
    samples = 0
    for p in points:
        names = Layout(p.n, p.d).names()
        got = hamiltonian_field(table, p)
        want = trigc_velocity(p.n, p.d, p.q, p.coords())
        for k, (g, w) in enumerate(zip(got, want)):
            samples += 1
            if g != w:
                return _report(name, start, point_witness(p.coords(), coordinate=names[k], bracket=g, closed_form=w),
                               samples)
    return _report(name, start, None, samples)


# ---------------------------------------------------------------- pencil order

def pencil_rank_local(p: SpinRSPoint) -> int:
    """Rank of ``z -> psi_z^loc`` (structure table at ``p``) over the ``d(d-1)/2`` parameters."""
    d, vec = p.d, p.coords()
    rows = []
    for al in range(d):
        for be in range(al + 1, d):
            T = psi_table(p.n, d, vec, z_table(d, {(al + 1, be + 1): 1}))
            rows.append([v for r in T for v in r])
    return rank(rows) if rows else 0


# ---------------------------------------------------------------- integrability

def _powers(M, k_max):
    out, acc = [], M
    for _ in range(k_max):
        out.append(acc)
        acc = mat_mul(acc, M)
    return out


def h_function(n, d, q, k: int) -> Callable:
    """``h_k = tr(Z^k)``."""
    def fn(vec):
        Z = z_matrix(n, d, q, vec)
        return mat_trace(_powers(Z, k)[-1])
    return fn


def h_alpha_function(n, d, q, k: int, alpha: int) -> Callable:
    """``h_{k;alpha} = tr(Zcal_alpha^k)``, ``alpha`` in ``0..d``."""
    def fn(vec):
        return mat_trace(_powers(script_z(n, d, q, vec, alpha), k)[-1])
    return fn


def t_function(n, d, q, k: int, alpha: int, beta: int) -> Callable:
    """``t_{k;alpha beta} = tr(W_alpha V_beta Z^k) = B_beta Zcal_{beta-1}^{-1} Z^k A_alpha`` (1-based spins)."""
    def fn(vec):
        _, a, b = _split(n, d, vec)
        Z = z_matrix(n, d, q, vec)
        V = mat_mul([b_row for b_row in [[b[j][beta - 1] for j in range(n)]]],
                    mat_inverse(script_z(n, d, q, vec, beta - 1)))
        W = [[a[i][alpha - 1]] for i in range(n)]
        return mat_mul(mat_mul(V, _powers(Z, k)[-1]), W)[0][0]
    return fn


def check_integrability_algebras(table: SpinBracketTable, points: Sequence[SpinRSPoint], k_max: int = 3,
                                 name: str = "spinrs:integrability") -> list:
    """Three reports: abelian ``H_int``, the psi-coefficient law on ``t``, and ``H`` central in ``Q``."""
    start = time.perf_counter()
    reports = []
    wit = [None, None, None]
    samples = [0, 0, 0]
    z = table.z
    for p in points:
        n, d, q, vec = p.n, p.d, p.q, p.coords()
        full = table.table(n, d, q, vec)
        T0 = bracket0_table(n, d, q, vec)
        Tpsi = psi_table(n, d, vec, z)
        hs = {(k, al): gradient(h_alpha_function(n, d, q, k, al), vec)
              for k in range(1, k_max + 1) for al in range(d + 1)}
        keys = sorted(hs)
        for x1 in range(len(keys)):
            for x2 in range(x1 + 1, len(keys)):
                samples[0] += 1
                v = bracket_functions(full, hs[keys[x1]], hs[keys[x2]])
                if v != 0 and wit[0] is None:
                    wit[0] = point_witness(vec, pair=[f"h_{keys[x1]}", f"h_{keys[x2]}"], value=v)
        ts = {}
        tv = {}
        for k in range(1, k_max + 1):
            for al in range(1, d + 1):
                for be in range(1, d + 1):
                    fn = t_function(n, d, q, k, al, be)
                    ts[(k, al, be)] = gradient(fn, vec)
                    tv[(k, al, be)] = fn(vec)
        tkeys = sorted(ts)
        for (k, g, e) in tkeys:
            for (l, al, be) in tkeys:
                samples[1] += 1
                lhs = bracket_functions(Tpsi, ts[(k, g, e)], ts[(l, al, be)])
                coeff = z[g - 1][al - 1] + z[e - 1][be - 1] - z[g - 1][be - 1] - z[e - 1][al - 1]
                rhs = coeff * tv[(k, g, e)] * tv[(l, al, be)]
                if lhs != rhs and wit[1] is None:
                    wit[1] = point_witness(vec, pair=[f"t_{(k, g, e)}", f"t_{(l, al, be)}"], lhs=lhs, rhs=rhs)
        for k in range(1, k_max + 1):
            gh = gradient(h_function(n, d, q, k), vec)
            for key in tkeys:
                samples[2] += 1
                for T, label in ((T0, "0"), (full, "pencil")):
                    v = bracket_functions(T, gh, ts[key])
                    if v != 0 and wit[2] is None:
                        wit[2] = point_witness(vec, pair=[f"h_{k}", f"t_{key}"], bracket=label, value=v)
    for suffix, w, s in zip(("h-abelian", "t-psi-law", "h-central"), wit, samples):
        reports.append(_report(f"{name}:{suffix}", start, w, s))
    return reports


# ---------------------------------------------------------------- flow

REGULARITY_TOL = 1e-10


@dataclass
class FlowResult:
    n: int
    d: int
    q: float
    times: list
    states: list
    conserved_names: list
    conserved: list  # one row per time
    drift: dict = field(default_factory=dict)
    constraint_error: float = 0.0

    def max_drift(self, prefix: str = "tr(Z^") -> float:
        vals = [v for k, v in self.drift.items() if k.startswith(prefix)]
        return max(vals) if vals else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + Layout(self.n, self.d).names() + self.conserved_names)
        for t, s, c in zip(self.times, self.states, self.conserved):
            w.writerow([repr(t)] + [repr(v) for v in s] + [repr(v) for v in c])
        return buf.getvalue()


def _float_velocity(n, d, q, vec):
    x = vec[:n]
    for i in range(n):
        for j in range(n):
            if i != j:
                scale = max(abs(x[i]), abs(x[j]), 1.0)
                if abs(x[i] - x[j]) < REGULARITY_TOL * scale or abs(x[i] - q * x[j]) < REGULARITY_TOL * scale:
                    raise StepRejected(f"x_{i + 1} and x_{j + 1} reached a collision")
    out = [float(v) for v in trigc_velocity(n, d, q, vec)]
    if not all(math.isfinite(v) for v in out):
        raise StepRejected("non-finite velocity")
    return out


def conserved_quantities(n: int, d: int, q, vec: Sequence, k_max: int = 3):
    names, vals = [], []
    Z = z_matrix(n, d, q, vec)
    for k, M in enumerate(_powers(Z, k_max), start=1):
        names.append(f"tr(Z^{k})")
        vals.append(float(mat_trace(M)))
    for al in range(1, d + 1):
        for k, M in enumerate(_powers(script_z(n, d, q, vec, al), k_max), start=1):
            names.append(f"tr(Zcal_{al}^{k})")
            vals.append(float(mat_trace(M)))
    return names, vals


def flow(p: SpinRSPoint, t_end: float = 1.0, dt: float = 1e-3, k_max: int = 3, record_every: int = 1) -> FlowResult:
    """Fixed-step RK4 for the spin RS equations in double precision."""
    if dt <= 0 or t_end < 0:
        raise BadParams("need dt > 0 and t_end >= 0")
    n, d = p.n, p.d
    q = float(p.q)
    y = [float(v) for v in p.coords()]
    steps = int(round(t_end / dt))
    names, c0 = conserved_quantities(n, d, q, y, k_max)
    res = FlowResult(n, d, q, [0.0], [list(y)], names, [c0])
    worst = [0.0] * len(c0)
    cons_err = 0.0
    for s in range(1, steps + 1):
        k1 = _float_velocity(n, d, q, y)
        k2 = _float_velocity(n, d, q, [u + 0.5 * dt * v for u, v in zip(y, k1)])
        k3 = _float_velocity(n, d, q, [u + 0.5 * dt * v for u, v in zip(y, k2)])
        k4 = _float_velocity(n, d, q, [u + dt * v for u, v in zip(y, k3)])
        y = [u + dt / 6.0 * (a + 2 * b + 2 * c + e) for u, a, b, c, e in zip(y, k1, k2, k3, k4)]
        _, c = conserved_quantities(n, d, q, y, k_max)
        for i, (u, v) in enumerate(zip(c0, c)):
            worst[i] = max(worst[i], abs(v - u) / max(abs(u), 1e-300))
        for i in range(n):
            cons_err = max(cons_err, abs(sum(y[n + i * d:n + (i + 1) * d]) - 1.0))
        if s % record_every == 0 or s == steps:
            res.times.append(s * dt)
            res.states.append(list(y))
            res.conserved.append(c)
    res.drift = dict(zip(names, worst))
    res.constraint_error = cons_err
    return res


def closed_form_n1(p: SpinRSPoint, t: float) -> float:
    """For ``n = 1``: ``x(t) = x(0) exp(2 f t)`` with ``f = sum_alpha a^alpha b^alpha``."""
    if p.n != 1:
        raise BadParams("closed form only for n = 1")
    f = float(sum(u * v for u, v in zip(p.a[0], p.b[0])))
    return float(p.x[0]) * math.exp(2 * f * t)


def check_flow(p: SpinRSPoint, t_end: float = 1.0, dt: float = 1e-3, tol: float = 1e-8,
               name: str = "spinrs:flow") -> CheckReport:
    start = time.perf_counter()
    res = flow(p, t_end, dt, record_every=max(1, int(round(t_end / dt))))
    wit = None
    if p.n == 1:
        err = abs(res.states[-1][0] / float(p.x[0]) - math.exp(2 * float(sum(u * v for u, v in zip(p.a[0], p.b[0]))) * t_end))
        if err > 1e-10:
            wit = {"closed_form_error": repr(err)}
    worst = max(res.drift.items(), key=lambda kv: kv[1])
    if wit is None and worst[1] > tol:
        wit = {"quantity": worst[0], "relative_drift": repr(worst[1])}
    if wit is None and res.constraint_error > 1e-12:
        wit = {"constraint_error": repr(res.constraint_error)}
    return _report(name, start, wit, len(res.times), drift={k: repr(v) for k, v in res.drift.items()})


# ---------------------------------------------------------------- upstairs consistency

def check_upstairs_psi_g(n: int, d: int, z: Mapping, k_max: int = 1,
                         name: str = "spinrs:upstairs-psi") -> CheckReport:
    """``psi_z(g_{ge;k}, g_{ab;l}) = (z_ga + z_eb - z_gb - z_ea) g g`` with ``g = tr(A B X^k)``, symbolically."""
    start = time.perf_counter()
    sm = build_spin_rs(n, d)
    model = sm.model
    zt = z_table(d, z)
    psi = psi_bivector(model, spin_pencil_params(z))
    ab = sm.vw_to_ab(sm.blocks_vw(None, polys=True))
    X = ab["X"]
    Xk = [[[Poly.const(1 if i == j else 0) for j in range(n)] for i in range(n)]]
    for _ in range(k_max):
        Xk.append(mat_mul(Xk[-1], X))
    g = {}
    for k in range(k_max + 1):
        for al in range(d):
            for be in range(d):
                M = mat_mul(mat_mul(ab["A"][al], ab["B"][be]), Xk[k])
                g[(k, al, be)] = sum((M[i][i] for i in range(n)), Poly.zero())
    keys = sorted(g)
    samples = 0
    for k1 in keys:
        for k2 in keys:
            if k2 < k1:
                continue
            samples += 1
            _, ga, ep = k1
            _, al, be = k2
            coeff = zt[ga][al] + zt[ep][be] - zt[ga][be] - zt[ep][al]
            diff = bracket_of_functions(psi, g[k1], g[k2]) - g[k1] * g[k2] * coeff
            if not diff.is_zero():
                return _report(name, start, {"pair": [str(k1), str(k2)], "difference": diff.format(model.var_names)[:400]},
                               samples)
    return _report(name, start, None, samples)


def check_moment_slice(points: Sequence[SpinRSPoint], name: str = "spinrs:moment-slice") -> CheckReport:
    """``X Z X^{-1} (Z + sum A_alpha B_alpha)^{-1} = q Id`` exactly."""
    start = time.perf_counter()
    for p in points:
        R = moment_slice_residual(p)
        if any(v != 0 for row in R for v in row):
            return _report(name, start, point_witness(p.coords()), len(points))
    return _report(name, start, None, len(points))


def expected_special_rank(d: int) -> int:
    return (d - 1) * (d - 2) // 2


def check_special_rank(n: int, d: int, q, seed: int, name: str = "spinrs:special-rank") -> CheckReport:
    """Rank of ``z -> psi_z^loc`` at ``a_i^alpha = delta_{alpha 1}`` equals ``(d-1)(d-2)/2``."""
    start = time.perf_counter()
    p = special_point(n, d, q, random.Random(seed))
    r = pencil_rank_local(p)
    want = expected_special_rank(d)
    wit = None if r == want else point_witness(p.coords(), rank=r, expected=want)
    return _report(name, start, wit, 1, rank=r)
