"""Command-line entry point: ``hopfkit {conditions,branch,verify,match}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
A JSON config file may supply any option; command-line flags override it.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError, ConvergenceError, HopfkitError, NoMatchError

log = logging.getLogger("hopfkit")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


@dataclass
class RunConfig:
    problem: str = "example2"
    example1: dict = field(default_factory=dict)
    example2: dict = field(default_factory=dict)
    nt: int = 8
    tolerances: dict = field(default_factory=dict)
    k_max: int = 16
    n_max: int = 64
    alpha_max: float = 0.5
    steps: int = 50
    suite: str = "fast"
    out: Optional[str] = None
    checkpoint: Optional[str] = None
    checkpoint_dir: Optional[str] = None

    TOLERANCE_KEYS = ("newton", "branch", "match")

    def validate(self):
        from .problems import Example1Config, Example2Config

        if self.problem not in ("example1", "example2"):
            raise ConfigError(f"unknown problem {self.problem!r}")
        for key, cls in (("example1", Example1Config), ("example2", Example2Config)):
            sub = getattr(self, key)
            if not isinstance(sub, dict):
                raise ConfigError(f"{key} must be an object")
            names = {f.name for f in dataclasses.fields(cls)}
            bad = set(sub) - names
            if bad:
                raise ConfigError(f"unknown {key} keys: {sorted(bad)}")
            try:
                cls(**sub).validate()
            except TypeError as exc:
                raise ConfigError(f"bad {key} values: {exc}") from exc
        bad = set(self.tolerances) - set(self.TOLERANCE_KEYS)
        if bad:
            raise ConfigError(f"unknown tolerance keys: {sorted(bad)}")
        for k, v in self.tolerances.items():
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"tolerance {k} must be a positive number")
        if not isinstance(self.nt, int) or self.nt < 2:
            raise ConfigError("nt must be an integer >= 2")
        if not isinstance(self.k_max, int) or self.k_max < 2:
            raise ConfigError("k_max must be an integer >= 2")
        if not isinstance(self.n_max, int) or self.n_max < 3:
            raise ConfigError("n_max must be an integer >= 3")
        if not isinstance(self.steps, int) or self.steps < 1:
            raise ConfigError("steps must be a positive integer")
        if not self.alpha_max > 0:
            raise ConfigError("alpha_max must be positive")
        if self.suite not in ("fast", "full"):
            raise ConfigError(f"unknown suite {self.suite!r} (expected fast or full)")
        return self

    def tol(self, key, default):
        return float(self.tolerances.get(key, default))

    def snapshot(self) -> dict:
        keys = ("problem", "example1", "example2", "nt", "tolerances", "k_max", "n_max")
        return {k: getattr(self, k) for k in keys}


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(RunConfig)}
    bad = set(data) - names
    if bad:
        raise ConfigError(f"unknown config keys: {sorted(bad)}")
    return data


FLAG_KEYS = ("problem", "out", "alpha_max", "steps", "suite", "k_max", "n_max", "nt",
             "checkpoint", "checkpoint_dir")


def make_config(args) -> RunConfig:
    data = load_config(args.config)
    for key in FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def build(cfg: RunConfig, name: Optional[str] = None):
    from .problems import build_problem

    name = name or cfg.problem
    return build_problem(name, **getattr(cfg, name))


def _write(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ----------------------------------------------------------------------
def cmd_conditions(cfg: RunConfig) -> int:
    from .conditions import run_conditions

    P = build(cfg)
    report = run_conditions(P, k_max=cfg.k_max, n_max=cfg.n_max)
    payload = report.to_json()
    payload["config"] = cfg.snapshot()
    _write(json.dumps(payload, indent=2, sort_keys=True) + "\n", cfg.out)
    for key, ok in report.passed.items():
        log.info("%s: %s", key, "pass" if ok else "FAIL")
    return EXIT_OK if report.all_pass else EXIT_NUMERIC


def cmd_branch(cfg: RunConfig) -> int:
    from .continuation import Branch, trace_branch

    P = build(cfg)
    tol = cfg.tol("branch", 1e-9)
    try:
        branch = trace_branch(P, cfg.alpha_max, cfg.steps + 1, nt=cfg.nt, tol=tol)
        trailer, code = None, EXIT_OK
    except ConvergenceError as exc:
        branch = exc.partial if isinstance(exc.partial, Branch) else Branch(P.name, [])
        trailer, code = f"PARTIAL: corrector failed: {exc}", EXIT_NUMERIC
    _write(branch.to_csv(trailer), cfg.out)
    if cfg.checkpoint_dir:
        d = Path(cfg.checkpoint_dir)
        d.mkdir(parents=True, exist_ok=True)
        for i, p in enumerate(branch.points):
            (d / f"point_{i:04d}.json").write_text(json.dumps(p.state().to_json(), sort_keys=True))
    return code


def print_result(r):
    print(r.line(), flush=True)


def cmd_verify(cfg: RunConfig, problems) -> int:
    from .verify import run_suite

    results = run_suite(cfg.suite, problems, report=print_result)
    if cfg.out:
        payload = {str(r.number): {"status": r.status, "details": r.details} for r in results}
        Path(cfg.out).write_text(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")
    return EXIT_OK if all(r.passed is not False for r in results) else EXIT_NUMERIC


def cmd_match(cfg: RunConfig) -> int:
    from .continuation import match_solution, trace_branch
    from .states import ExtendedState

    if not cfg.checkpoint:
        raise ConfigError("match needs --checkpoint <state.json>")
    try:
        state = ExtendedState.from_json(json.loads(Path(cfg.checkpoint).read_text()))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load checkpoint {cfg.checkpoint}: {exc}") from exc
    P = build(cfg)
    branch = trace_branch(P, cfg.alpha_max, cfg.steps + 1, nt=state.u.nt, tol=cfg.tol("branch", 1e-9))
    try:
        m = match_solution(P, branch, state.lam, state.sigma, state.u, tol=cfg.tol("match", 1e-6))
    except NoMatchError as exc:
        log.error("no match: %s", exc)
        return EXIT_NUMERIC
    _write(json.dumps({"alpha": m.alpha, "theta": m.theta, "distance": m.distance},
                      indent=2, sort_keys=True) + "\n", cfg.out)
    return EXIT_OK


# ----------------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hopfkit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--problem", choices=["example1", "example2"])
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--nt", type=int, help="temporal modes")

    p = sub.add_parser("conditions", help="check the Hopf hypotheses and write a JSON report")
    common(p)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)

    p = sub.add_parser("branch", help="trace the branch and write CSV")
    common(p)
    p.add_argument("--alpha-max", dest="alpha_max", type=float)
    p.add_argument("--steps", type=int, help="number of amplitude intervals")
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir", help="write one state JSON per point")

    p = sub.add_parser("verify", help="run the acceptance suite")
    common(p)
    p.add_argument("--suite")

    p = sub.add_parser("match", help="match a checkpointed state against the branch")
    common(p)
    p.add_argument("--checkpoint", help="state JSON with lambda, sigma and u")
    p.add_argument("--alpha-max", dest="alpha_max", type=float)
    p.add_argument("--steps", type=int)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = make_config(args)
        if args.command == "conditions":
            return cmd_conditions(cfg)
        if args.command == "branch":
            return cmd_branch(cfg)
        if args.command == "verify":
            problems = [args.problem] if args.problem else ["example1", "example2"]
            return cmd_verify(cfg, problems)
        return cmd_match(cfg)
    except ConfigError as exc:
        sys.stderr.write(f"hopfkit: config error: {exc}\n")
        return EXIT_USAGE
    except HopfkitError as exc:
        sys.stderr.write(f"hopfkit: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
