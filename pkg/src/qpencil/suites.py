"""Named verification suites and the shipped negative controls.

A suite takes a :class:`SuiteConfig` and returns a list of
:class:`~qpencil.verifysuite.CheckReport`; checks run one after another in a
fixed order, so reports are reproducible for a given configuration.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from . import ncalg, spinrs
from .exactcore import PointStream
from .mvcalc import MultiVector
from .quiverrep import (Quiver, QuiverModel, closed_paths,
                        one_arrow, one_loop, spin_quiver)
from .structlib import (BadParams, PencilParams, basis_params, build_additive, build_char, build_pencil,
                        build_vdb, psi_bivector)
from .verifysuite import (DEFAULT_POINTS, DEFAULT_SEED, CheckReport, check_correspondence, check_invariance,
                          check_additive, check_moment_map, check_nondegenerate, check_pencil, check_qham_axioms,
                          check_quasi_poisson, check_star_triviality)

SUITES = ("mqv", "pencil", "qham", "additive", "char", "nc", "spinrs")
CHAR_CASES = ((0, 1, 2), (1, 0, 1), (1, 1, 2), (0, 2, 2))


@dataclass
class SuiteConfig:
    model: QuiverModel | None = None
    z: PencilParams | None = None
    points: int = DEFAULT_POINTS
    seed: int = DEFAULT_SEED
    words: Sequence = ()
    n: int = 3
    d: int = 3
    q: Fraction = Fraction(5, 2)
    spin_z: dict = field(default_factory=dict)  # (alpha, beta) -> value
    t_end: float = 1.0
    dt: float = 1e-3
    tol: float = 1e-8

    def quiver_model(self) -> QuiverModel:
        return self.model if self.model is not None else spin_quiver(2, 2)

    def pencil_z(self, model: QuiverModel) -> PencilParams:
        if self.z is not None:
            self.z.validate(model.quiver.originals)
            return self.z
        orig = model.quiver.originals
        pairs = {}
        k = 1
        for i, a in enumerate(orig):
            for b in orig[i + 1:]:
                pairs[(a, b)] = Fraction(k, k + 2) * (-1) ** k
                k += 1
        return PencilParams.from_pairs(pairs)


def _first_point(model: QuiverModel, seed: int, avoid) -> list:
    return PointStream(seed, model.n_vars, avoid).next()


# ---------------------------------------------------------------- quiver suites

def run_mqv(cfg: SuiteConfig) -> list:
    model = cfg.quiver_model()
    b = build_vdb(model)
    guards = b.determinant_guards()
    return [
        check_quasi_poisson(b.P, model, "mqv:quasi-poisson"),
        check_invariance(b.P, model, "mqv:invariance"),
        check_moment_map(b.P, b.Phi, model, cfg.points, cfg.seed, guards, "mqv:moment-map"),
        check_correspondence(b.P, b.omega, b.Phi, model, cfg.points, cfg.seed, guards, "mqv:correspondence"),
        check_nondegenerate(b.P, model, _first_point(model, cfg.seed, guards), "mqv:nondegenerate"),
    ]


def run_pencil(cfg: SuiteConfig) -> list:
    model = cfg.quiver_model()
    b = build_vdb(model)
    guards = b.determinant_guards()
    orig = model.quiver.originals
    basis = [psi_bivector(model, z) for z in basis_params(orig)]
    z = cfg.pencil_z(model)
    psi, varpi = build_pencil(model, z)
    out = [check_pencil(b.P, basis, model.var_names, "pencil:laws"),
           check_invariance(psi, model, "pencil:psi-invariance"),
           check_moment_map(b.P + psi, b.Phi, model, cfg.points, cfg.seed, guards, "pencil:moment-map"),
           check_correspondence(b.P + psi, b.omega + varpi, b.Phi, model, cfg.points, cfg.seed, guards,
                                "pencil:correspondence")]
    if model.quiver.is_star_shaped():
        words = closed_paths(model, 4)
        pairs = [(w1, w2) for i, w1 in enumerate(words) for w2 in words[i:]]
        out.append(check_star_triviality(model, psi, pairs, "pencil:star-triviality"))
    return out


def run_qham(cfg: SuiteConfig) -> list:
    model = cfg.quiver_model()
    b = build_vdb(model)
    return check_qham_axioms(b.omega, b.Phi, model, cfg.points, cfg.seed, b.determinant_guards(), "qham")


def run_additive(cfg: SuiteConfig) -> list:
    model = cfg.quiver_model()
    return check_additive(build_additive(model, cfg.pencil_z(model)), cfg.points, cfg.seed, "additive")


def run_char(cfg: SuiteConfig, cases=CHAR_CASES) -> list:
    out = []
    for g, r, n in cases:
        orig = [f"A{i}" for i in range(1, g + 1)]
        pairs = {(u, v): Fraction(i + 2 * j + 1, 3)
                 for i, u in enumerate(orig) for j, v in enumerate(orig[i + 1:])}
        b, psi = build_char(g, r, n, PencilParams.from_pairs(pairs))
        tag = f"char({g},{r},{n})"
        guards = b.determinant_guards()
        out += [check_quasi_poisson(b.P, b.model, f"{tag}:quasi-poisson"),
                check_invariance(b.P, b.model, f"{tag}:invariance"),
                check_pencil(b.P, [psi], b.model.var_names, f"{tag}:pencil"),
                check_moment_map(b.P + psi, b.Phi, b.model, min(cfg.points, 8), cfg.seed, guards,
                                 f"{tag}:moment-map")]
    return out


# ---------------------------------------------------------------- noncommutative suite

def _word_pairs(cfg: SuiteConfig, model: QuiverModel) -> list:
    words = [tuple(w.split()) if isinstance(w, str) else tuple(w) for w in cfg.words]
    if words:
        if len(words) == 1:
            return [(words[0], words[0])]
        return [(words[i], words[j]) for i in range(len(words)) for j in range(i + 1, len(words))]
    return [(("v1", "v1*"), ("v2", "v2*")), (("x",), ("x*",)), (("x", "x*"), ("v1", "x", "v1*")),
            (("x",), ("v1", "v2*")), (("v1", "v2*"), ("v2", "x*", "v1*")), (("x", "x"), ("v2", "x*", "v2*"))]


def run_nc(cfg: SuiteConfig) -> list:
    model = cfg.model if cfg.model is not None else spin_quiver(2, 2)
    alg = ncalg.PathAlgebra(model)
    rng = random.Random(cfg.seed)
    orig = model.quiver.originals
    out = []
    weak = [ncalg.check_weak_poisson(model, ncalg.random_params(orig, rng), f"nc:weak-poisson[{k}]")
            for k in range(5)]
    out.append(_merge_reports("nc:weak-poisson", weak))
    z = cfg.z if cfg.z is not None else ncalg.random_params(orig, rng)
    out.append(ncalg.check_c_formula(alg, closed_paths(model, 4), z))
    mixed = []
    for k in range(50):
        f, g, h = (ncalg.random_necklace(alg, rng, 5) for _ in range(3))
        mixed.append(ncalg.check_mixed_identity(alg, f, g, h, ncalg.random_params(orig, rng)))
    out.append(_merge_reports("nc:mixed-identity", mixed))
    jac = []
    for k in range(10):
        f, g, h = (ncalg.NecklacePoly.of(ncalg.random_necklace(alg, rng, 3)) for _ in range(3))
        jac.append(ncalg.check_mixed_jacobi(alg, f, g, h, ncalg.random_params(orig, rng), rng.choice((0, 1))))
    out.append(_merge_reports("nc:jacobi", jac))
    pairs = _word_pairs(cfg, model)
    for z0 in (0, 1):
        out.append(ncalg.check_rep_morphism(model, pairs, z, z0, min(cfg.points, 16), cfg.seed,
                                            name=f"nc:rep-morphism[z0={z0}]"))
    return out


def _merge_reports(name: str, reports: Sequence[CheckReport]) -> CheckReport:
    samples = sum(r.samples for r in reports)
    elapsed = sum(r.elapsed_ms or 0.0 for r in reports)
    bad = next((r for r in reports if r.status == "fail"), None)
    return CheckReport(name, "fail" if bad else "pass", bad.witness if bad else None, samples, elapsed,
                       {"first_failure": bad.name} if bad else {})


# ---------------------------------------------------------------- spin RS suite

def run_spinrs(cfg: SuiteConfig) -> list:
    n, d, q = cfg.n, cfg.d, spinrs.check_q(cfg.q, cfg.n)
    rng = random.Random(cfg.seed)
    k = min(cfg.points, 16)
    pts = [spinrs.random_point(n, d, q, rng) for _ in range(k)]
    zt = spinrs.z_table(d, cfg.spin_z) if cfg.spin_z else spinrs.z_table(
        d, {(a, b): Fraction(a + b, a + 2) for a in range(1, d + 1) for b in range(a + 1, d + 1)})
    table = spinrs.SpinBracketTable.build(d, 1, zt)
    out = []
    jac = []
    for j in range(5):
        z0 = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
        zz = [[Fraction(0)] * d for _ in range(d)]
        for a in range(d):
            for b in range(a + 1, d):
                zz[a][b] = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
                zz[b][a] = -zz[a][b]
        jac.append(spinrs.check_jacobi_local(spinrs.SpinBracketTable.build(d, z0, zz),
                                             pts, name=f"spinrs:jacobi[{j}]"))
    out.append(_merge_reports("spinrs:jacobi", jac))
    out.append(spinrs.check_tangency(lambda p: table.table(p.n, p.d, p.q, p.coords()), pts))
    zm = spinrs.z_minus(d)
    out.append(spinrs.check_table_equal(
        lambda p: spinrs.ao_table(p.n, p.d, p.q, p.coords(), -1),
        lambda p: spinrs.SpinBracketTable.build(d, 1, zm).table(p.n, p.d, p.q, p.coords()),
        pts, "spinrs:ao-decomposition"))
    out.append(spinrs.check_table_equal(
        lambda p: spinrs.ao_table(p.n, p.d, p.q, p.coords(), 1),
        lambda p: spinrs.ao_table(p.n, p.d, p.q, p.coords(), -1),
        pts, "spinrs:ao-relabel", relabel=spinrs.reverse_spins))
    out.append(spinrs.check_casimirs(zt, pts))
    out.append(spinrs.check_hamiltonian(table, pts))
    out.append(spinrs.check_moment_slice(pts))
    out.append(spinrs.check_special_rank(n, d, q, cfg.seed))
    out += spinrs.check_integrability_algebras(table, pts[:min(8, k)], 3)
    out.append(spinrs.check_flow(spinrs.flow_point(n, d, q, rng, cfg.t_end), cfg.t_end, cfg.dt, cfg.tol))
    return out


RUNNERS: dict[str, Callable] = {
    "mqv": run_mqv, "pencil": run_pencil, "qham": run_qham, "additive": run_additive,
    "char": run_char, "nc": run_nc, "spinrs": run_spinrs,
}


def run_suite(name: str, cfg: SuiteConfig) -> list:
    if name == "all":
        out = []
        for s in SUITES:
            out += RUNNERS[s](cfg)
        return out
    if name not in RUNNERS:
        raise BadParams(f"unknown suite {name!r}")
    return RUNNERS[name](cfg)


# ---------------------------------------------------------------- negative controls

def _two_loops() -> QuiverModel:
    return QuiverModel(Quiver.build(["0"], [("x", "0", "0"), ("y", "0", "0")]), {"0": 1}, {"x": 1, "y": 1})


def negative_controls(seed: int = DEFAULT_SEED) -> list:
    """Deliberately corrupted inputs; every report here is expected to fail."""
    out = []

    m = one_arrow(2, 1)
    b = build_vdb(m)
    guards = b.determinant_guards()
    bad_P = b.P + MultiVector.basis([0, 1], m.n_vars)
    out.append(check_quasi_poisson(bad_P, m, "control:quasi-poisson-broken-P"))

    m11 = one_arrow(1, 1)
    b11 = build_vdb(m11)
    out.append(check_moment_map(b11.P, b11.Phi * b11.Phi, m11, 4, seed, b11.determinant_guards(),
                                "control:moment-map-Phi-squared"))

    out.append(check_correspondence(b.P, b.omega.scale(2), b.Phi, m, 2, seed, guards,
                                    "control:correspondence-scaled-omega"))
    out += [r for r in check_qham_axioms(b.omega.scale(2), b.Phi, m, 2, seed, guards, "control:qham-scaled-omega")
            if r.name.endswith("B2")]

    two = _two_loops()
    psi2 = psi_bivector(two, PencilParams.from_pairs({("x", "y"): 1}))
    out.append(check_star_triviality(two, psi2, [(("x",), ("y",))], "control:non-star-triviality"))

    loop = one_loop(1)
    out.append(check_nondegenerate(MultiVector.zero(2, loop.n_vars), loop, [Fraction(2), Fraction(3)],
                                   "control:nondegenerate-P-zero"))

    q2 = spin_quiver(2, 1)
    bq = build_vdb(q2)
    stray = MultiVector.basis([0, 2], q2.n_vars)
    out.append(check_pencil(bq.P, [psi_bivector(q2, PencilParams.from_pairs({("v1", "v2"): 1})), stray],
                            q2.var_names, "control:pencil-noncommuting-psi"))

    zq = PencilParams.from_pairs({("x", "v1"): 1, ("v1", "v2"): 2})
    out.append(ncalg.check_rep_morphism(q2, [(("x",), ("v1", "v2*"))], zq, 1, 2, seed,
                                        bivector=bq.P + psi_bivector(q2, zq.scale(-1)),
                                        name="control:rep-morphism-flipped-psi"))

    rng = random.Random(seed)
    p = spinrs.random_point(3, 3, Fraction(5, 2), rng)
    zt = spinrs.SpinBracketTable.build(3, 1, {(1, 2): 1, (1, 3): Fraction(-1, 2), (2, 3): 2})
    out.append(spinrs.check_jacobi_local(zt, [p], quadratic=False, name="control:spin-jacobi-dropped-quadratic"))
    zp = [[-v for v in row] for row in spinrs.z_minus(3)]
    out.append(spinrs.check_table_equal(
        lambda p: spinrs.ao_table(p.n, p.d, p.q, p.coords(), -1),
        lambda p: spinrs.SpinBracketTable.build(3, 1, zp).table(p.n, p.d, p.q, p.coords()),
        [p], "control:ao-decomposition-wrong-z"))
    return out
