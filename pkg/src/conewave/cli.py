"""Command-line entry point: ``conewave <command> --spec FILE [options]``.

Exit status is 0 when a command's checks pass, 2 when they run but fail,
and 1 on any error (bad arguments, unreadable spec, numerical failure).
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    spec: Path | None
    t_max: float | None
    nt: int | None
    nx: int | None
    cfl: float
    seed: int
    trials: int
    p: float
    out: Path
    exprs: tuple

    def validate(self):
        if self.command not in ("reproduce-example", "parse-check") and self.spec is None:
            raise UsageError(f"{self.command} needs --spec FILE")
        if self.t_max is not None and not self.t_max > 0:
            raise UsageError("--t-max must be positive")
        for name in ("nt", "nx"):
            v = getattr(self, name)
            if v is not None and v < 3:
                raise UsageError(f"--{name} must be at least 3")
        if not 0 < self.cfl <= 1:
            raise UsageError("--cfl must lie in (0, 1]")
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        if self.trials < 1:
            raise UsageError("--trials must be at least 1")
        if not self.p > 1:
            raise UsageError("--p must exceed 1")
        if self.command == "parse-check" and not self.exprs and self.spec is None:
            raise UsageError("parse-check needs expressions or --spec FILE")
        return self


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conewave", description="Hypothesis certificates, solver and audits for the mixed wave IBVP.")
    parser.add_argument("command", choices=["certify", "solve", "audit", "bounds", "reproduce-example", "parse-check"])
    parser.add_argument("exprs", nargs="*", help="expressions for parse-check")
    parser.add_argument("--spec", type=Path)
    parser.add_argument("--t-max", type=float)
    parser.add_argument("--nt", type=int)
    parser.add_argument("--nx", type=int)
    parser.add_argument("--cfl", type=float, default=0.9)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--p", type=float, default=2.0, help="exponent for reproduce-example")
    parser.add_argument("--out", type=Path, default=Path("conewave_out"))
    return parser


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    if ns.exprs and ns.command != "parse-check":
        raise UsageError(f"unexpected arguments: {' '.join(ns.exprs)}")
    return RunConfig(ns.command, ns.spec, ns.t_max, ns.nt, ns.nx, ns.cfl, ns.seed, ns.trials, ns.p, ns.out,
                     tuple(ns.exprs)).validate()


def _apply_threads():
    n = os.environ.get("CONEWAVE_THREADS")
    if n:
        if not n.isdigit() or int(n) < 1:
            raise UsageError("CONEWAVE_THREADS must be a positive integer")
        for var in _THREAD_VARS:
            os.environ[var] = n


def _spec(cfg: RunConfig):
    from .hypotheses import load_spec

    spec = load_spec(cfg.spec)
    changes = {k: v for k, v in (("t_max", cfg.t_max), ("nt", cfg.nt), ("nx", cfg.nx)) if v is not None}
    return spec.with_options(**changes) if changes else spec


def _write(cfg: RunConfig, name: str, text: str):
    from .report import atomic_write

    atomic_write(cfg.out / name, text)


def cmd_certify(cfg: RunConfig) -> int:
    from .hypotheses import certify

    spec = _spec(cfg)
    cert = certify(spec)
    _write(cfg, "certificate.json", cert.to_json())
    _write(cfg, "certificate.txt", cert.to_text())
    sys.stdout.write(cert.to_text())
    return EXIT_PASS if cert.passed else EXIT_FAIL


def cmd_solve(cfg: RunConfig) -> int:
    from . import solver
    from .report import canonical_json

    spec = _spec(cfg)
    rep = solver.solve_fd(spec, spec.grid(), cfg.cfl)
    _write(cfg, "solution.csv", rep.u.to_csv())
    _write(cfg, "pde_residual.csv", solver.pde_residual_field(rep.u, spec).to_csv())
    _write(cfg, "solve.json", canonical_json(rep))
    print(f"solved on {spec.nt} x {spec.nx}: min u = {rep.min_u:.9g}, eq2 residual = {rep.eq2_residual_sup:.3g}")
    return EXIT_PASS


def cmd_audit(cfg: RunConfig) -> int:
    from . import solver
    from .operators import OperatorContext
    from .report import canonical_json

    spec = _spec(cfg)
    rep = solver.solve_fd(spec, spec.grid(), cfg.cfl)
    ctx = OperatorContext.build(spec)
    out = {
        "solve": rep.to_dict(),
        "lemma1": solver.lemma1_audit(rep.u, ctx),
        "theorem": solver.audit_theorem(rep, spec),
    }
    _write(cfg, "solution.csv", rep.u.to_csv())
    _write(cfg, "audit.json", canonical_json(out))
    th = out["theorem"]
    print(f"min u = {th['min_u']:.9g} (oracle {th['oracle']['min_u']:.9g}); "
          f"nonnegative within rounding: {th['nonnegative_within_rounding']}")
    return EXIT_PASS


def cmd_bounds(cfg: RunConfig) -> int:
    from . import operators
    from .report import canonical_json

    spec = _spec(cfg)
    ctx = operators.OperatorContext.build(spec)
    c = spec.constants
    g = operators.bound_check_G(cfg.trials, ctx, c.r, c.A, seed=cfg.seed)
    f = operators.bound_check_F(cfg.trials, ctx, c.r, c.A, seed=cfg.seed)
    lip = operators.lipschitz_probe(cfg.trials, ctx, c.epsilon, c.R, c.A, seed=cfg.seed + 1)
    violations = sum(not res.passed for res in g + f)
    out = {"seed": cfg.seed, "trials": cfg.trials, "G": g, "F": f, "lipschitz": lip, "violations": violations}
    _write(cfg, "bounds.json", canonical_json(out))
    print(f"bound violations: {violations}; lipschitz band {'ok' if lip['pass'] else 'violated'}")
    return EXIT_PASS if violations == 0 and lip["pass"] else EXIT_FAIL


def cmd_reproduce_example(cfg: RunConfig) -> int:
    from . import example4
    from .report import canonical_json

    bundle = example4.reproduce(p=cfg.p, t_max=cfg.t_max or 2.0, nt=cfg.nt or 257, nx=cfg.nx or 257,
                                seed=cfg.seed, cfl=cfg.cfl, trials=cfg.trials)
    text = example4.narrative(bundle)
    _write(cfg, "reproduce.json", canonical_json(bundle))
    _write(cfg, "reproduce.txt", text)
    sys.stdout.write(text)
    ok = bundle["certificate"]["overall_pass"] and not bundle.get("errors")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_parse_check(cfg: RunConfig) -> int:
    from .expr import parse, unparse

    texts = list(cfg.exprs)
    if cfg.spec is not None:
        from .hypotheses import load_spec

        texts += list(load_spec(cfg.spec).sources.values())
    for text in texts:
        print(unparse(parse(text)))
    return EXIT_PASS


COMMANDS = {
    "certify": cmd_certify,
    "solve": cmd_solve,
    "audit": cmd_audit,
    "bounds": cmd_bounds,
    "reproduce-example": cmd_reproduce_example,
    "parse-check": cmd_parse_check,
}


def main(argv=None) -> int:
    try:
        _apply_threads()
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"conewave: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, ArithmeticError, KeyError, TypeError) as exc:
        print(f"conewave: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
