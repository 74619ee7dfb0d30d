"""Identity checkers returning :class:`CheckReport` records.

Polynomial identities (Schouten brackets) are checked exactly.  Identities
involving inverses are checked exactly at seeded random rational points; a
passing sampled check records the sample count and a Schwartz-Zippel bound
``D / |S|`` per point, where ``D`` bounds the degree of the cleared numerator
and ``S`` is the sampling set.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Sequence

from .exactcore import (Jet, PointStream, mat_inverse, mat_mul, mat_trace, rank,
                        rat_str, sample_set_size)
from .mvcalc import (MultiVector, bracket_of_functions, exterior_derivative_table, form_matrix, schouten,
                     sharp_at)
from .quiverrep import (QuiverModel, cartan_trivector, check_path,
                        lie_fields, trace_word)

DEFAULT_POINTS = 32
DEFAULT_SEED = 7


@dataclass
class CheckReport:
    name: str
    status: str  # "pass" | "fail" | "skipped"
    witness: object = None
    samples: int = 0
    elapsed_ms: float | None = None
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in ("pass", "fail", "skipped"):
            raise ValueError(f"bad status {self.status!r}")
        if self.status == "fail" and self.witness is None:
            raise ValueError("a failing check must carry a witness")

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self, timing: bool = False) -> dict:
        out = {"name": self.name, "status": self.status, "witness": self.witness,
               "samples": self.samples,
               "elapsed_ms": round(self.elapsed_ms, 3) if timing and self.elapsed_ms is not None else None}
        if self.detail:
            out["detail"] = self.detail
        return out


def _report(name: str, start: float, witness=None, samples=0, **detail) -> CheckReport:
    return CheckReport(name, "pass" if witness is None else "fail", witness, samples,
                       (time.perf_counter() - start) * 1000.0, detail)


def merge(*groups) -> list:
    out = []
    for g in groups:
        out.extend(g if isinstance(g, list) else [g])
    return out


# ---------------------------------------------------------------- witnesses

def _fmt(x) -> str:
    return rat_str(x) if isinstance(x, (int, Fraction)) else str(x)


def monomial_witness(mv: MultiVector, names: Sequence[str] | None = None) -> dict:
    I, m, c = mv.first_term()
    nm = (lambda v: names[v]) if names else str
    return {"basis": [nm(i) for i in I],
            "monomial": {nm(v): e for v, e in m},
            "coefficient": _fmt(c)}


def point_witness(point: Sequence, **extra) -> dict:
    out = {"point": [_fmt(x) for x in point]}
    out.update({k: (_fmt(v) if isinstance(v, Fraction) else v) for k, v in extra.items()})
    return out


def sz_bound(degree: int) -> str:
    return rat_str(Fraction(degree, sample_set_size()))


# ---------------------------------------------------------------- exact checks

def check_quasi_poisson(P: MultiVector, model: QuiverModel, name: str = "quasi-poisson") -> CheckReport:
    start = time.perf_counter()
    R = schouten(P, P) - cartan_trivector(model)
    return _report(name, start, None if R.is_zero() else monomial_witness(R, model.var_names))


def check_poisson(P: MultiVector, names=None, name: str = "poisson") -> CheckReport:
    start = time.perf_counter()
    R = schouten(P, P)
    return _report(name, start, None if R.is_zero() else monomial_witness(R, names))


def check_invariance(P: MultiVector, model: QuiverModel, name: str = "invariance") -> CheckReport:
    start = time.perf_counter()
    for k, f in enumerate(lie_fields(model)):
        R = schouten(f, P)
        if not R.is_zero():
            return _report(name, start, {"basis_element": list(model.lie.basis[k]),
                                         **monomial_witness(R, model.var_names)})
    return _report(name, start)


def check_pencil(P0: MultiVector, psis: Sequence[MultiVector], names=None, name: str = "pencil") -> CheckReport:
    """``[P0, psi_j] = 0`` and ``[psi_j, psi_k] = 0`` for all j <= k."""
    start = time.perf_counter()
    for j, psi in enumerate(psis):
        R = schouten(P0, psi)
        if not R.is_zero():
            return _report(name, start, {"pair": ["P0", f"psi{j}"], **monomial_witness(R, names)})
    for j in range(len(psis)):
        for k in range(j, len(psis)):
            R = schouten(psis[j], psis[k])
            if not R.is_zero():
                return _report(name, start, {"pair": [f"psi{j}", f"psi{k}"], **monomial_witness(R, names)})
    return _report(name, start)


# ---------------------------------------------------------------- point evaluation helpers

def _jet_point(point: Sequence) -> list:
    n = len(point)
    return [Jet.variable(point[k], k, n) for k in range(n)]


def value_and_partials(expr, point: Sequence):
    """``M`` and the list ``[d_k M]`` for a matrix expression at a point."""
    M = expr.evaluate(_jet_point(point))
    n = len(point)
    val = [[x.value if isinstance(x, Jet) else x for x in row] for row in M]
    ders = [[[x.deriv[k] if isinstance(x, Jet) else 0 for x in row] for row in M] for k in range(n)]
    return val, ders


def _field_vectors(model: QuiverModel, point: Sequence) -> list:
    return [f.vector_at(point) for f in lie_fields(model)]


def _points(model_nvars: int, n_points: int, seed: int, avoid: Sequence[Callable]) -> list:
    return PointStream(seed, model_nvars, avoid).take(n_points)


def _block_pairs(model: QuiverModel):
    for _, o, n in model.vertex_blocks():
        for u in range(o, o + n):
            for v in range(o, o + n):
                yield u, v


# ---------------------------------------------------------------- sampled checks

def check_moment_map(P: MultiVector, Phi, model: QuiverModel, n_points: int = DEFAULT_POINTS,
                     seed: int = DEFAULT_SEED, avoid: Sequence[Callable] = (),
                     name: str = "moment-map") -> CheckReport:
    """``P#(d Phi_uv) = 1/2 sum_a (E_a Phi + Phi E_a)_uv (E^a)_M`` entrywise."""
    start = time.perf_counter()
    lie = model.lie
    pts = _points(model.n_vars, n_points, seed, avoid)
    for point in pts:
        Pm = P.bivector_matrix(point)
        Phi_v, dPhi = value_and_partials(Phi, point)
        fields = _field_vectors(model, point)
        for u, v in _block_pairs(model):
            lhs = sharp_at(Pm, [dPhi[k][u][v] for k in range(model.n_vars)])
            rhs = [Fraction(0)] * model.n_vars
            for a, (vert, i, j) in enumerate(lie.basis):
                o = model.offsets[vert]
                c = (Phi_v[o + j][v] if u == o + i else 0) + (Phi_v[u][o + i] if v == o + j else 0)
                if c:
                    dual = fields[lie.dual_index(a)]
                    for t in range(model.n_vars):
                        if dual[t]:
                            rhs[t] += Fraction(1, 2) * c * dual[t]
            if any(x != y for x, y in zip(lhs, rhs)):
                return _report(name, start, point_witness(point, entry=[u, v]), len(pts))
    deg = P.max_coeff_degree() + 2 * Phi.degree_bound()
    return _report(name, start, None, len(pts), sz_bound_per_point=sz_bound(deg))


def _maurer_cartan(Phi_v, dPhi):
    Pinv = mat_inverse(Phi_v)
    left = [mat_mul(Pinv, D) for D in dPhi]
    right = [mat_mul(D, Pinv) for D in dPhi]
    return left, right


def check_correspondence(P: MultiVector, omega, Phi, model: QuiverModel, n_points: int = DEFAULT_POINTS,
                         seed: int = DEFAULT_SEED, avoid: Sequence[Callable] = (),
                         name: str = "correspondence") -> CheckReport:
    """``P# o omega_flat = Id - 1/4 sum_a (E_a)_M (x) Phi^*(E^a, theta^L - theta^R)`` on all of T."""
    start = time.perf_counter()
    lie = model.lie
    n = model.n_vars
    pts = _points(n, n_points, seed, avoid)
    for point in pts:
        Pm = P.bivector_matrix(point)
        Om = form_matrix(omega, point)
        Phi_v, dPhi = value_and_partials(Phi, point)
        left, right = _maurer_cartan(Phi_v, dPhi)
        fields = _field_vectors(model, point)
        for k in range(n):
            lhs = sharp_at(Pm, Om[k])
            rhs = [Fraction(int(k == l)) for l in range(n)]
            for a, (vert, i, j) in enumerate(lie.basis):
                o = model.offsets[vert]
                y = left[k][o + i][o + j] - right[k][o + i][o + j]
                if y:
                    for l in range(n):
                        if fields[a][l]:
                            rhs[l] -= Fraction(1, 4) * y * fields[a][l]
            if lhs != rhs:
                return _report(name, start, point_witness(point, tangent=model.var_names[k]), len(pts))
    deg = P.max_coeff_degree() + 2 * omega.degree_bound() + 2 * Phi.degree_bound()
    return _report(name, start, None, len(pts), sz_bound_per_point=sz_bound(deg))


def check_qham_axioms(omega, Phi, model: QuiverModel, n_points: int = DEFAULT_POINTS,
                      seed: int = DEFAULT_SEED, avoid: Sequence[Callable] = (),
                      name: str = "qham") -> list:
    """(B1) ``d omega = Phi^* eta`` on coordinate triples, (B2) on basis xi, (B3) rank."""
    start = time.perf_counter()
    lie = model.lie
    n = model.n_vars
    pts = _points(n, n_points, seed, avoid)
    fails = {}
    for point in pts:
        Phi_v, dPhi = value_and_partials(Phi, point)
        left, right = _maurer_cartan(Phi_v, dPhi)
        if "B1" not in fails:
            d_omega = exterior_derivative_table(omega, point)
            for u, v, w in combinations(range(n), 3):
                eta = Fraction(1, 2) * (mat_trace(mat_mul(mat_mul(right[u], right[v]), right[w]))
                                        - mat_trace(mat_mul(mat_mul(right[u], right[w]), right[v])))
                if d_omega(u, v, w) != eta:
                    fails["B1"] = point_witness(point, triple=[model.var_names[t] for t in (u, v, w)])
                    break
        Om = form_matrix(omega, point)
        if "B2" not in fails:
            fields = _field_vectors(model, point)
            for a, (vert, i, j) in enumerate(lie.basis):
                o = model.offsets[vert]
                lhs = [sum(fields[a][t] * Om[t][col] for t in range(n)) for col in range(n)]
                rhs = [Fraction(1, 2) * (left[col][o + j][o + i] + right[col][o + j][o + i]) for col in range(n)]
                if lhs != rhs:
                    fails["B2"] = point_witness(point, basis_element=[vert, i, j])
                    break
        if "B3" not in fails:
            rows = []
            for k in range(n):
                extra = [left[k][model.offsets[vert] + j][model.offsets[vert] + i] for vert, i, j in lie.basis]
                rows.append(list(Om[k]) + extra)
            r = rank(rows)
            if r != n:
                fails["B3"] = point_witness(point, rank=r, expected=n)
        if len(fails) == 3:
            break
    deg = 2 * omega.degree_bound() + 3 * Phi.degree_bound()
    out = []
    for axiom in ("B1", "B2", "B3"):
        out.append(CheckReport(f"{name}:{axiom}", "fail" if axiom in fails else "pass", fails.get(axiom),
                               len(pts), (time.perf_counter() - start) * 1000.0,
                               {} if axiom in fails else {"sz_bound_per_point": sz_bound(deg)}))
    return out


# ---------------------------------------------------------------- additive case

def check_additive(bundle, n_points: int = DEFAULT_POINTS, seed: int = DEFAULT_SEED,
                   name: str = "additive") -> list:
    """Poisson, ``P#(d(mu, xi)) = xi_M``, ``P# o omega_flat = Id`` and ``d omega = 0``
    for ``(P_qv + psi_z, omega_qv + omega_z)``."""
    model = bundle.model
    n = model.n_vars
    lie = model.lie
    P = bundle.P + bundle.psi
    omega = bundle.omega + bundle.omega_z
    out = [check_poisson(P, model.var_names, f"{name}:poisson"),
           check_invariance(P, model, f"{name}:invariance")]
    start = time.perf_counter()
    pts = _points(n, n_points, seed, ())
    witness_mu = witness_corr = witness_closed = None
    for point in pts:
        Pm = P.bivector_matrix(point)
        mu_v, dmu = value_and_partials(bundle.mu, point)
        fields = _field_vectors(model, point)
        if witness_mu is None:
            for a, (vert, i, j) in enumerate(lie.basis):
                o = model.offsets[vert]
                # (mu, E_ij) = tr(mu E_ij) = mu_ji
                lhs = sharp_at(Pm, [dmu[k][o + j][o + i] for k in range(n)])
                if lhs != fields[a]:
                    witness_mu = point_witness(point, basis_element=[vert, i, j])
                    break
        Om = form_matrix(omega, point)
        if witness_corr is None:
            for k in range(n):
                if sharp_at(Pm, Om[k]) != [Fraction(int(k == l)) for l in range(n)]:
                    witness_corr = point_witness(point, tangent=model.var_names[k])
                    break
        if witness_closed is None:
            d_omega = exterior_derivative_table(omega, point)
            for u, v, w in combinations(range(n), 3):
                if d_omega(u, v, w) != 0:
                    witness_closed = point_witness(point, triple=[u, v, w])
                    break
    for label, wit in (("moment-map", witness_mu), ("correspondence", witness_corr), ("closed", witness_closed)):
        out.append(_report(f"{name}:{label}", start, wit, len(pts)))
    return out


# ---------------------------------------------------------------- ranks

def pencil_order_at(bivectors: Sequence[MultiVector], point: Sequence) -> int:
    rows = []
    for B in bivectors:
        M = B.bivector_matrix(point)
        n = len(M)
        rows.append([M[j][k] for j in range(n) for k in range(j + 1, n)])
    return rank(rows)


def check_nondegenerate(P: MultiVector, model: QuiverModel, point: Sequence,
                        name: str = "nondegenerate") -> CheckReport:
    start = time.perf_counter()
    Pm = P.bivector_matrix(point)
    cols = [list(row) for row in Pm] + _field_vectors(model, point)
    r = rank(cols)
    wit = None if r == model.n_vars else point_witness(point, rank=r, expected=model.n_vars)
    return _report(name, start, wit, 1)


def check_star_triviality(model: QuiverModel, psi: MultiVector, path_pairs: Sequence,
                          name: str = "star-triviality") -> CheckReport:
    """``psi(tr w, tr w') = 0`` for every supplied pair of closed paths."""
    start = time.perf_counter()
    star = model.quiver is not None and model.quiver.is_star_shaped()
    cache: dict = {}

    def tr(w):
        w = tuple(w)
        if w not in cache:
            check_path(model, w)
            cache[w] = trace_word(model, w)
        return cache[w]

    for w1, w2 in path_pairs:
        val = bracket_of_functions(psi, tr(w1), tr(w2))
        if not val.is_zero():
            return _report(name, start, {"paths": [" ".join(w1), " ".join(w2)],
                                         "value": val.format(model.var_names)}, len(path_pairs),
                           star_shaped=star)
    return _report(name, start, None, len(path_pairs), star_shaped=star)
