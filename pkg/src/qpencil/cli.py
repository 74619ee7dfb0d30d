"""Command-line front end.

    qpencil verify --spec q2.json --suite mqv --points 32 --seed 7 --out report.json
    qpencil verify --suite nc --words "v1 v1*" "v2 v2*"
    qpencil verify --suite spinrs --n 3 --d 3 --q 5/2
    qpencil flow --n 3 --d 3 --q 5/2 --t-end 1 --dt 1e-3 --out traj.csv

Exit codes: 0 when every check passes, 1 when a check fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction

from . import spinrs
from .exactcore import to_rat
from .quiverrep import DimensionMismatch, SpecError, UnknownArrow, model_from_spec
from .structlib import BadParams, PencilParams
from .suites import SUITES, SuiteConfig, negative_controls, run_suite
from .verifysuite import DEFAULT_POINTS, DEFAULT_SEED

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _rational(text: str) -> Fraction:
    try:
        return to_rat(text)
    except (ValueError, ZeroDivisionError, TypeError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qpencil", description="Verify quasi-Poisson pencils on quiver representation spaces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def spin_flags(p):
        p.add_argument("--n", type=_positive, default=3, help="number of particles")
        p.add_argument("--d", type=_positive, default=3, help="number of spin components")
        p.add_argument("--q", type=_rational, default=Fraction(5, 2), help='deformation parameter, e.g. "5/2"')
        p.add_argument("--z", help="z table: JSON file of {a, b, value} records")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--t-end", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=1e-3)
        p.add_argument("--tol", type=float, default=1e-8, help="allowed relative drift of tr(Z^k)")
        p.add_argument("--out", help="output path (stdout when omitted)")

    v = sub.add_parser("verify", help="run a verification suite and write a JSON report")
    v.add_argument("--spec", help="quiver spec JSON")
    v.add_argument("--suite", default="all", choices=SUITES + ("all", "controls"))
    v.add_argument("--points", type=_positive, default=DEFAULT_POINTS)
    v.add_argument("--words", nargs="+", default=[], help='arrow words such as "v1 v1* x"')
    v.add_argument("--timing", action="store_true", help="record elapsed_ms (reports are then not reproducible)")
    spin_flags(v)

    f = sub.add_parser("flow", help="integrate the spin RS equations and write a trajectory CSV")
    f.add_argument("--record-every", type=_positive, default=1)
    spin_flags(f)
    return parser


# ---------------------------------------------------------------- config assembly

def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None


def _spin_index(name, d: int) -> int:
    s = str(name)
    s = s[1:] if s.startswith("v") else s
    if not s.isdigit() or not 1 <= int(s) <= d:
        raise ConfigError(f"spin z table: {name!r} is not one of v1..v{d}")
    return int(s)


def spin_z_from_records(records, d: int) -> dict:
    """``{(alpha, beta): value}`` from records naming the framing arrows ``v1..vd`` (or just ``1..d``)."""
    if not isinstance(records, list):
        raise ConfigError("z table must be a JSON list of {a, b, value} records")
    out = {}
    for r in records:
        if not isinstance(r, dict) or set(r) != {"a", "b", "value"}:
            raise ConfigError("z records need exactly the keys a, b, value")
        al, be = _spin_index(r["a"], d), _spin_index(r["b"], d)
        if al == be:
            raise ConfigError("z is antisymmetric; diagonal entries are not allowed")
        try:
            val = to_rat(r["value"])
        except (ValueError, TypeError, ZeroDivisionError):
            raise ConfigError(f"bad z value {r['value']!r}") from None
        if al > be:
            al, be, val = be, al, -val
        if out.get((al, be), val) != val:
            raise ConfigError(f"conflicting entries for (v{al}, v{be})")
        out[(al, be)] = val
    return out


def _spin_echo(args, spin_z: dict) -> dict:
    return {"n": args.n, "d": args.d, "q": str(args.q),
            "z": [{"a": f"v{a}", "b": f"v{b}", "value": str(v)} for (a, b), v in sorted(spin_z.items())]}


def make_config(args) -> tuple[SuiteConfig, dict]:
    """Suite configuration plus the ``model`` echo for the report."""
    spinrs.check_q(args.q, args.n)
    if args.dt <= 0 or args.t_end < 0:
        raise ConfigError("need --dt > 0 and --t-end >= 0")
    cfg = SuiteConfig(seed=args.seed, n=args.n, d=args.d, q=args.q, t_end=args.t_end, dt=args.dt, tol=args.tol)
    suite = getattr(args, "suite", "spinrs")
    cfg.points = getattr(args, "points", DEFAULT_POINTS)
    cfg.words = getattr(args, "words", ())
    if suite == "spinrs" or args.command == "flow":
        if getattr(args, "spec", None):
            raise ConfigError("--spec does not apply to the spin RS suite")
        if args.z:
            cfg.spin_z = spin_z_from_records(_read_json(args.z), args.d)
        return cfg, _spin_echo(args, cfg.spin_z)
    echo = None
    if args.spec:
        echo = _read_json(args.spec)
        if not isinstance(echo, dict):
            raise ConfigError("quiver spec must be a JSON object")
        cfg.model = model_from_spec(echo)
    if args.z:
        cfg.z = PencilParams.from_records(_read_json(args.z))
    if echo is None:
        echo = {"default": "spin quiver with two framing arrows, n = (2, 1)"}
    if suite == "all":
        echo = {"quiver": echo, "spinrs": _spin_echo(args, cfg.spin_z)}
    return cfg, echo


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------- commands

def cmd_verify(args) -> int:
    cfg, echo = make_config(args)
    if args.suite == "controls":
        reports = negative_controls(cfg.seed)
        # every control is supposed to fail; the command fails if one slips through
        ok = all(r.status == "fail" for r in reports)
    else:
        reports = run_suite(args.suite, cfg)
        ok = all(r.status == "pass" for r in reports)
    report = {"checks": [r.to_dict(args.timing) for r in reports], "model": echo,
              "seed": cfg.seed, "points": cfg.points, "suite": args.suite}
    _write(_dump(report), args.out)
    for r in reports:
        print(f"{r.status:4}  {r.name}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_flow(args) -> int:
    cfg, echo = make_config(args)
    p = spinrs.flow_point(cfg.n, cfg.d, cfg.q, random.Random(cfg.seed), cfg.t_end)
    try:
        res = spinrs.flow(p, cfg.t_end, cfg.dt, record_every=args.record_every)
    except spinrs.StepRejected as exc:
        print(f"flow stopped: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _write(res.to_csv(), args.out)
    summary = {"model": echo, "seed": cfg.seed, "t_end": cfg.t_end, "dt": cfg.dt, "tol": cfg.tol,
               "drift": {k: repr(v) for k, v in sorted(res.drift.items())},
               "max_drift": repr(res.max_drift()), "constraint_error": repr(res.constraint_error)}
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK if res.max_drift() <= cfg.tol else EXIT_FAIL


COMMANDS = {"verify": cmd_verify, "flow": cmd_flow}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ConfigError, SpecError, BadParams, spinrs.DegeneratePoint, UnknownArrow, DimensionMismatch) as exc:
        print(f"qpencil: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
