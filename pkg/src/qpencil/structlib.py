"""Builders for quasi-Poisson bivectors, 2-forms, moment maps and pencils.

Every builder returns plain data: polynomial bivectors (:class:`MultiVector`),
trace forms and matrix expressions.  Nothing here asserts the identities those
objects satisfy; :mod:`qpencil.verifysuite` does that.

Moment-map factors ``F_a = gamma_a Id + X_a X_{a*}`` are taken to be the
identity outside the block of the tail ``t(a)``; with ``gamma_a = 0`` the
literal global ``gamma_a Id`` would make every factor singular.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .exactcore import identity, mat_add, mat_inverse, mat_mul, to_rat, zeros
from .mvcalc import D, MatExpr, MatVec, MultiVector, TraceForm
from .polyfield import Poly
from .quiverrep import (QuiverModel, SpecError, cyclic_action_field, partial_matrix, spin_quiver,
                        star_name)


class BadParams(ValueError):
    pass


def _original(a: str) -> str:
    return a[:-1] if a.endswith("*") else a


# ---------------------------------------------------------------- pencil parameters

@dataclass(frozen=True)
class PencilParams:
    """Antisymmetric table ``z_{ab}`` on original arrows (or loops), extended
    to the double by ``z_{a*b} = z_{ab*} = z_{a*b*} = z_{ab}``."""

    table: Mapping = field(default_factory=dict)  # (a, b) -> Rat, one entry per unordered pair

    @classmethod
    def from_pairs(cls, pairs: Mapping | Sequence) -> "PencilParams":
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        table: dict = {}
        for (a, b), v in items:
            a, b = str(a), str(b)
            if a.endswith("*") or b.endswith("*"):
                raise SpecError("z is indexed by original arrows only")
            if a == b:
                raise SpecError(f"z_{{{a},{a}}} must vanish")
            v = to_rat(v)
            if (b, a) in table:
                if table[(b, a)] != -v:
                    raise SpecError(f"conflicting entries for {{{a},{b}}}")
                continue
            table[(a, b)] = v
        return cls({k: v for k, v in table.items() if v})

    @classmethod
    def from_records(cls, records: Sequence[Mapping]) -> "PencilParams":
        pairs = []
        for r in records:
            extra = set(r) - {"a", "b", "value"}
            if extra or not {"a", "b", "value"} <= set(r):
                raise SpecError("z records need exactly the keys a, b, value")
            pairs.append(((r["a"], r["b"]), to_rat(r["value"])))
        return cls.from_pairs(pairs)

    @classmethod
    def load(cls, path: str) -> "PencilParams":
        with open(path) as fh:
            try:
                return cls.from_records(json.load(fh))
            except json.JSONDecodeError as exc:
                raise SpecError(f"invalid JSON in {path}: {exc}") from None

    def to_records(self) -> list:
        return [{"a": a, "b": b, "value": f"{v.numerator}/{v.denominator}"}
                for (a, b), v in sorted(self.table.items())]

    def value(self, a: str, b: str) -> Fraction:
        a, b = _original(a), _original(b)
        if (a, b) in self.table:
            return self.table[(a, b)]
        if (b, a) in self.table:
            return -self.table[(b, a)]
        return Fraction(0)

    def arrows(self) -> set:
        return {x for pair in self.table for x in pair}

    def is_zero(self) -> bool:
        return not self.table

    def scale(self, c) -> "PencilParams":
        c = to_rat(c)
        return PencilParams({k: v * c for k, v in self.table.items() if v * c})

    def validate(self, originals: Sequence[str]) -> None:
        unknown = self.arrows() - set(originals)
        if unknown:
            raise SpecError(f"z mentions unknown arrows {sorted(unknown)}")


def basis_params(originals: Sequence[str]) -> list:
    """One PencilParams per unordered pair, with value 1."""
    out = []
    for i, a in enumerate(originals):
        for b in originals[i + 1:]:
            out.append(PencilParams.from_pairs({(a, b): 1}))
    return out


# ---------------------------------------------------------------- bundles

@dataclass(frozen=True)
class StructureBundle:
    model: QuiverModel
    P: MultiVector
    omega: TraceForm | None
    Phi: MatExpr
    factors: tuple = ()  # (arrow, F_a, exponent) in product order
    avoid: tuple = ()  # matrices whose determinants must not vanish

    def determinant_guards(self) -> list:
        """Callables ``point -> det`` used as the sampling avoid-set."""
        from .exactcore import mat_det

        guards = []
        for M in self.avoid:
            guards.append(lambda pt, M=M: mat_det(M.evaluate(pt)))
        return guards


def _const(M) -> MatExpr:
    return MatExpr.const(M)


def moment_factor(model: QuiverModel, a: str) -> MatExpr:
    """``gamma_a Id + X_a X_{a*}`` on block ``t(a)``, identity elsewhere."""
    t = model.tail_of[a]
    base = mat_add(model.identity_except(t), model.block_identity(t, model.gamma[a]))
    return _const(base) + model.X(a) * model.X(star_name(a))


def _epsilon(a: str) -> int:
    return -1 if a.endswith("*") else 1


def _pair_term(model: QuiverModel, coeff_matrix: MatVec, u: str, v: str) -> MultiVector:
    """``tr[C d_u ^ d_v]``."""
    return (coeff_matrix * (partial_matrix(model, u) * partial_matrix(model, v))).trace()


def _cross_terms(model: QuiverModel, L: Sequence[MatVec]) -> MultiVector:
    """``sum_{u<v} tr[L_u ^ L_v]`` over the stored order."""
    acc = MultiVector.zero(2, model.n_vars)
    for i in range(len(L)):
        for j in range(i + 1, len(L)):
            acc = acc + (L[i] * L[j]).trace()
    return acc


def _L_field(model: QuiverModel, a: str) -> MatVec:
    """``d_{a*} X_{a*} - X_a d_a``."""
    s = star_name(a)
    return partial_matrix(model, s) * model.X_matvec(s) - model.X_matvec(a) * partial_matrix(model, a)


def vdb_bivector(model: QuiverModel) -> MultiVector:
    n = model.n_vars
    acc = MultiVector.zero(2, n)
    for a in model.blocks:
        s = star_name(a)
        C = MatVec.scalar_identity(model.size, n, model.gamma[a]) + model.X_matvec(s) * model.X_matvec(a)
        term = _pair_term(model, C, a, s)
        acc = acc + (term if _epsilon(a) > 0 else term.scale(-1))
    acc = acc.scale(Fraction(1, 2))
    cross = _cross_terms(model, [_L_field(model, a) for a in model.blocks])
    return acc - cross.scale(Fraction(1, 2))


def build_vdb(model: QuiverModel) -> StructureBundle:
    if model.quiver is None:
        raise BadParams("build_vdb needs a quiver model")
    P = vdb_bivector(model)
    factors = []
    prefix: list = []
    omega = TraceForm.zero(2)
    for a in model.blocks:
        F = moment_factor(model, a)
        eps = _epsilon(a)
        Fe = F if eps > 0 else F.inv()
        Fme = F.inv() if eps > 0 else F
        s = star_name(a)
        omega = omega + TraceForm.trace(F.inv(), D(model.X(a)), D(model.X(s)), coeff=Fraction(-eps, 2))
        if prefix:
            Phi_a = MatExpr.product(prefix, model.size)
            omega = omega + TraceForm.trace(Phi_a.inv(), D(Phi_a), D(Fe), Fme, coeff=Fraction(-1, 2))
        factors.append((a, F, eps))
        prefix.append(Fe)
    Phi = MatExpr.product(prefix, model.size)
    avoid = tuple(F for _, F, _ in factors)
    return StructureBundle(model, P, omega, Phi, tuple(factors), avoid)


def psi_bivector(model: QuiverModel, z: PencilParams) -> MultiVector:
    """``sum_{a<b} z_ab A_a(1) ^ A_b(1)`` over original arrows (or loops)."""
    acc = MultiVector.zero(2, model.n_vars)
    for (a, b), v in sorted(z.table.items()):
        acc = acc + cyclic_action_field(model, a).wedge(cyclic_action_field(model, b)).scale(v)
    return acc


def psi_explicit(model: QuiverModel, z: PencilParams) -> MultiVector:
    """Same bivector from its values on coordinates:
    ``psi((X_c)_ij, (X_d)_kl) = eps(c) eps(d) z_cd (X_c)_ij (X_d)_kl``."""
    comps: dict = {}
    entries = [(c, v) for c in model.blocks for _, _, v in model.block_entries(c)]
    for i, (c, u) in enumerate(entries):
        for d, w in entries[i + 1:]:
            coeff = _epsilon(c) * _epsilon(d) * z.value(c, d)
            if coeff:
                key = (u, w) if u < w else (w, u)
                sign = 1 if u < w else -1
                mono = tuple(sorted({u: 1, w: 1}.items())) if u != w else ((u, 2),)
                comps[key] = Poly({mono: sign * coeff})
    return MultiVector(2, model.n_vars, comps)


def varpi_form(model: QuiverModel, z: PencilParams) -> TraceForm:
    out = TraceForm.zero(2)
    for (a, b), v in sorted(z.table.items()):
        Fa, Fb = moment_factor(model, a), moment_factor(model, b)
        out = out + TraceForm.trace(Fa.inv(), D(Fa)).wedge(TraceForm.trace(Fb.inv(), D(Fb))).scale(v)
    return out


def build_pencil(model: QuiverModel, z: PencilParams):
    if model.quiver is not None:
        z.validate(model.quiver.originals)
    return psi_bivector(model, z), varpi_form(model, z)


# ---------------------------------------------------------------- additive case

@dataclass(frozen=True)
class AdditiveBundle:
    model: QuiverModel
    P: MultiVector
    omega: TraceForm
    mu: MatExpr
    omega_z: TraceForm
    psi: MultiVector


def build_additive(model: QuiverModel, z: PencilParams | None = None) -> AdditiveBundle:
    z = z or PencilParams()
    n = model.n_vars
    originals = model.quiver.originals
    P = MultiVector.zero(2, n)
    omega = TraceForm.zero(2)
    mu = _const(zeros(model.size, model.size))
    for a in originals:
        s = star_name(a)
        P = P + (partial_matrix(model, a) * partial_matrix(model, s)).trace()
        omega = omega + TraceForm.trace(D(model.X(a)), D(model.X(s)), coeff=-1)
        mu = mu + model.X(a) * model.X(s) - model.X(s) * model.X(a)
    omega_z = TraceForm.zero(2)
    for (a, b), v in sorted(z.table.items()):
        ta = TraceForm.trace(D(model.X(a) * model.X(star_name(a))))
        tb = TraceForm.trace(D(model.X(b) * model.X(star_name(b))))
        omega_z = omega_z + ta.wedge(tb).scale(v)
    return AdditiveBundle(model, P, omega, mu, omega_z, psi_bivector(model, z))


# ---------------------------------------------------------------- character varieties

def char_model(g: int, r: int, n: int) -> QuiverModel:
    if g < 0 or r < 0 or g + r == 0:
        raise BadParams("need g, r >= 0 with g + r > 0")
    if n < 1:
        raise BadParams("need n >= 1")
    blocks = []
    for i in range(1, g + 1):
        blocks += [(f"A{i}", "0", "0"), (f"A{i}*", "0", "0")]
    blocks += [(f"Z{j}", "0", "0") for j in range(1, r + 1)]
    return QuiverModel(None, {"0": n}, blocks=blocks, vertices=["0"])


def _char_L(model: QuiverModel, u: str) -> MatVec:
    if u.startswith("Z"):
        return partial_matrix(model, u) * model.X_matvec(u) - model.X_matvec(u) * partial_matrix(model, u)
    return _L_field(model, u)


def build_char(g: int, r: int, n: int, z: PencilParams | None = None):
    """Returns ``(bundle, psi)``; ``bundle.omega`` is None (no 2-form is built)."""
    model = char_model(g, r, n)
    z = z or PencilParams()
    z.validate([f"A{i}" for i in range(1, g + 1)])
    nv = model.n_vars
    P = MultiVector.zero(2, nv)
    for i in range(1, g + 1):
        A, As = f"A{i}", f"A{i}*"
        XA, XAs = model.X_matvec(A), model.X_matvec(As)
        P = P + _pair_term(model, XAs * XA, A, As) - _pair_term(model, XA * XAs, As, A)
    for j in range(1, r + 1):
        Zj = f"Z{j}"
        XZ = model.X_matvec(Zj)
        P = P + _pair_term(model, XZ * XZ, Zj, Zj)
    P = P.scale(Fraction(1, 2)) - _cross_terms(model, [_char_L(model, u) for u in model.blocks]).scale(Fraction(1, 2))
    factors = []
    for i in range(1, g + 1):
        A, As = model.X(f"A{i}"), model.X(f"A{i}*")
        factors += [A, As, A.inv(), As.inv()]
    factors += [model.X(f"Z{j}") for j in range(1, r + 1)]
    Phi = MatExpr.product(factors, model.size)
    avoid = tuple(model.X(u) for u in model.blocks)
    bundle = StructureBundle(model, P, None, Phi, (), avoid)
    return bundle, psi_bivector(model, z)


# ---------------------------------------------------------------- spin RS upstairs model

def local_block(model: QuiverModel, a: str, point: Sequence) -> list:
    nt, nh = model.block_shape(a)
    return [[point[model.var(a, i, j)] for j in range(nh)] for i in range(nt)]


def local_block_polys(model: QuiverModel, a: str) -> list:
    nt, nh = model.block_shape(a)
    return [[Poly.var(model.var(a, i, j)) for j in range(nh)] for i in range(nt)]


@dataclass(frozen=True)
class SpinModel:
    """The ``Q_d`` bundle together with the ``(V, W) <-> (A, B)`` charts.

    ``X = X_x``, ``Z = X_{x*}``, ``V_alpha = X_{v_alpha}`` (1 x n) and
    ``W_alpha = X_{v_alpha*}`` (n x 1).  The second chart uses
    ``A_alpha = W_alpha`` and
    ``B_alpha = V_alpha (Id + W_{alpha-1} V_{alpha-1}) ... (Id + W_1 V_1) Z``.
    """

    n: int
    d: int
    bundle: StructureBundle

    @property
    def model(self) -> QuiverModel:
        return self.bundle.model

    def blocks_vw(self, point, polys: bool = False) -> dict:
        get = (lambda a: local_block_polys(self.model, a)) if polys else (
            lambda a: local_block(self.model, a, point))
        return {"X": get("x"), "Z": get("x*"),
                "V": [get(f"v{k}") for k in range(1, self.d + 1)],
                "W": [get(f"v{k}*") for k in range(1, self.d + 1)]}

    def vw_to_ab(self, blocks: Mapping) -> dict:
        """Works on rational or polynomial matrices alike."""
        n = self.n
        acc = [list(r) for r in blocks["Z"]]
        A, B = [], []
        for V, W in zip(blocks["V"], blocks["W"]):
            A.append([list(r) for r in W])
            B.append(mat_mul(V, acc))
            acc = mat_mul(mat_add(identity(n), mat_mul(W, V)), acc)
        return {"X": blocks["X"], "Z": blocks["Z"], "A": A, "B": B}

    def ab_to_vw(self, blocks: Mapping) -> dict:
        n = self.n
        Zinv = mat_inverse(blocks["Z"])
        right = Zinv  # (Id + W_{alpha-1}V_{alpha-1} ... Id + W_1 V_1 Z)^{-1}, built up
        V, W = [], []
        for A, B in zip(blocks["A"], blocks["B"]):
            v = mat_mul(B, right)
            V.append(v)
            W.append([list(r) for r in A])
            step = mat_add(identity(n), mat_mul(A, v))
            right = mat_mul(right, mat_inverse(step))
        return {"X": blocks["X"], "Z": blocks["Z"], "V": V, "W": W}

    def point_from_vw(self, blocks: Mapping) -> list:
        pt = [Fraction(0)] * self.model.n_vars
        m = self.model

        def put(a, M):
            for i, row in enumerate(M):
                for j, x in enumerate(row):
                    pt[m.var(a, i, j)] = to_rat(x)

        put("x", blocks["X"])
        put("x*", blocks["Z"])
        for k in range(self.d):
            put(f"v{k + 1}", blocks["V"][k])
            put(f"v{k + 1}*", blocks["W"][k])
        return pt

    def script_z(self, ab: Mapping, alpha: int) -> list:
        """``Z + A_1 B_1 + ... + A_alpha B_alpha``."""
        acc = [list(r) for r in ab["Z"]]
        for k in range(alpha):
            acc = mat_add(acc, mat_mul(ab["A"][k], ab["B"][k]))
        return acc

    def moment_ab(self, ab: Mapping) -> list:
        """``X Z X^{-1} (Z + sum A B)^{-1}`` (vertex-0 block)."""
        X = ab["X"]
        return mat_mul(mat_mul(mat_mul(X, ab["Z"]), mat_inverse(X)),
                       mat_inverse(self.script_z(ab, self.d)))


def build_spin_rs(n: int, d: int) -> SpinModel:
    if d < 2:
        raise BadParams("spin RS needs d >= 2")
    if n < 1:
        raise BadParams("spin RS needs n >= 1")
    model = spin_quiver(d, n)
    bundle = build_vdb(model)
    # the factor of x is X Z; its determinant covers det X and det Z
    return SpinModel(n, d, bundle)


def spin_pencil_params(z: Mapping) -> PencilParams:
    """``z_{v_alpha, v_beta} = z_{alpha beta}``, ``z_{x, v_alpha} = 0``; keys are (alpha, beta)."""
    return PencilParams.from_pairs({(f"v{a}", f"v{b}"): v for (a, b), v in z.items()})


# ---------------------------------------------------------------- reordering

def reordered_model(model: QuiverModel, ordering: Sequence[str]) -> QuiverModel:
    q = model.quiver
    return QuiverModel(type(q).build(q.vertices, q.arrows, list(ordering)), model.dims,
                       {a: model.gamma[a] for a in q.originals})


def adjacent_swap_map(model: QuiverModel, i: int, j: int, k: int):
    """Swap the adjacent ordering segments ``[i:j]`` and ``[j:k]``.

    Returns ``(target, phi)``.  ``phi`` sends a point of ``model`` to a point
    of ``target`` by conjugating every block of the second segment with the
    partial moment map ``G`` of the first segment, ``X_c -> G X_c G^{-1}``;
    it pushes the bivector of ``model`` onto that of ``target``.  Both
    segments must be closed under ``a <-> a*``.
    """
    order = list(model.quiver.ordering)
    if not 0 <= i < j < k <= len(order):
        raise BadParams("need 0 <= i < j < k <= number of arrows")
    first, second = order[i:j], order[j:k]
    for seg in (first, second):
        if {star_name(a) for a in seg} != set(seg):
            raise BadParams("each segment must contain a together with a*")
    target = reordered_model(model, order[:i] + second + first + order[k:])
    factors = [moment_factor(model, a) for a in first]
    G_expr = MatExpr.product([F if _epsilon(a) > 0 else F.inv() for a, F in zip(first, factors)],
                             model.size)
    moved = set(second)

    def phi(point: Sequence) -> list:
        G = G_expr.evaluate(point)
        Gi = mat_inverse(G)
        out = [0] * len(point)
        for a in model.blocks:
            X = zeros(model.size, model.size)
            for r, c, v in model.block_entries(a):
                X[r][c] = point[v]
            if a in moved:
                X = mat_mul(mat_mul(G, X), Gi)
            ot, oh = model.offsets[model.tail_of[a]], model.offsets[model.head_of[a]]
            for r, c, _ in model.block_entries(a):
                out[target.var(a, r - ot, c - oh)] = X[r][c]
        return out

    return target, phi
