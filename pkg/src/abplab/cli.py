"""Command-line driver: ``abplab run <config>``, ``abplab ops list``, ``abplab solve``."""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from .abp import EquationSpec, parse_rhs
from .operators import OperatorSpecError, catalog, parse_operator
from .report import CheckReport, summary_csv
from .solver import solve_generic_2d, solve_ma_2d, solve_trace_2d
from .suites import SUITES

REPORT_SCHEMA = "abplab-report/1"


class ConfigError(ValueError):
    pass


def _split_lines(text: str) -> list[str]:
    return [part.strip() for line in text.splitlines() for part in line.split(";") if part.strip()]


def _numbers(cast):
    def parse(text: str):
        return [cast(v) for v in text.replace(",", " ").split()]

    return parse


def _operators(text: str) -> list[str]:
    specs = _split_lines(text)
    for s in specs:
        parse_operator(s)  # raises OperatorSpecError listing valid forms
    return specs


def _rhs_list(text: str) -> list[str]:
    specs = _split_lines(text)
    for s in specs:
        parse_rhs(s)
    return specs


def _boolean(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# suite -> key -> (parser, default)
SCHEMA = {
    "ops": {"max_n": (int, 4)},
    "hyperbolic": {"operators": (_operators, None), "samples": (int, 64)},
    "central": {"operators": (_operators, None), "tolerance": (float, 1e-6)},
    "dirichlet": {"operators": (_operators, None), "samples": (int, 64)},
    "ellipticity": {"operators": (_operators, None), "samples": (int, 64)},
    "tame": {"operators": (_operators, None), "samples": (int, 32), "eta": (_numbers(float), [0.1, 1.0])},
    "majorize": {"operators": (_operators, None), "samples": (int, 10_000), "hunt": (_boolean, False),
                 "num_tau": (int, 20)},
    "maclaurin": {"dims": (_numbers(int), [3]), "samples": (int, 1000)},
    "coeffcond": {"operators": (_operators, None), "num_tau": (int, 100)},
    "alexandrov": {"shapes": (_numbers(int), [33, 65]), "C": (float, 5.0)},
    "pipeline": {"shape": (int, 65), "eta": (float, 0.05), "C": (float, 5.0)},
    "oscillation": {"shape": (int, 65), "f": (_rhs_list, ["const:1"]), "C": (float, 5.0)},
    "solve": {"shape": (int, 65), "f": (_rhs_list, ["const:1"]), "tol": (float, 1e-8),
              "max_iter": (int, 200_000), "C": (float, 5.0)},
}
RUN_SCHEMA = {"seed": (int, 0), "output": (str, "abplab-out"), "suites": (_split_lines, None)}


def default_config_text() -> str:
    return resources.files("abplab").joinpath("default.ini").read_text()


def load_config(text: str, seed_override: str | None = None) -> dict:
    """Parse and validate; returns ``{"run": {...}, "suites": [(name, params), ...]}``.

    Sections are ``[run]`` and one per suite, optionally labelled
    (``[majorize:hunt]``).  Unknown sections or keys raise :class:`ConfigError`.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    run = {}
    raw_run = dict(parser["run"]) if parser.has_section("run") else {}
    for key in raw_run:
        if key not in RUN_SCHEMA:
            raise ConfigError(f"unknown key {key!r} in [run]; allowed: {', '.join(RUN_SCHEMA)}")
    for key, (cast, default) in RUN_SCHEMA.items():
        run[key] = _cast(cast, raw_run[key], "run", key) if key in raw_run else default
    if seed_override is not None:
        try:
            run["seed"] = int(seed_override)
        except ValueError:
            raise ConfigError(f"ABPLAB_SEED must be an integer, got {seed_override!r}") from None
    suites = []
    for section in parser.sections():
        if section == "run":
            continue
        name = section.split(":", 1)[0].strip()
        if name not in SCHEMA:
            raise ConfigError(f"unknown suite section [{section}]; suites: {', '.join(SCHEMA)}")
        schema = {**SCHEMA[name], "seed": (int, None)}
        raw = dict(parser[section])
        for key in raw:
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]; allowed: {', '.join(schema)}")
        params = {}
        for key, (cast, default) in schema.items():
            if key in raw:
                params[key] = _cast(cast, raw[key], section, key)
            elif default is None and key != "seed":
                raise ConfigError(f"[{section}] needs {key!r}")
            else:
                params[key] = default
        suites.append((section, params))
    if run["suites"] is not None:
        known = {s for s, _ in suites}
        missing = [s for s in run["suites"] if s not in known]
        if missing:
            raise ConfigError(f"[run] suites names sections that do not exist: {missing}")
        suites = [(s, p) for s, p in suites if s in run["suites"]]
    if not suites:
        raise ConfigError("no suites selected")
    return {"run": run, "suites": suites}


def _cast(cast, value, section, key):
    try:
        return cast(value)
    except (ValueError, OperatorSpecError) as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def _run_suite(job):
    section, params, seed = job
    name = section.split(":", 1)[0]
    start = time.perf_counter()
    reports = SUITES[name](params, seed if params.get("seed") is None else params["seed"])
    for r in reports:
        r.params.setdefault("section", section)
        r.elapsed = r.elapsed or (time.perf_counter() - start)
    return reports


def execute(config: dict, parallel: bool = False) -> list[CheckReport]:
    jobs = [(section, params, config["run"]["seed"]) for section, params in config["suites"]]
    if parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_run_suite, jobs))
    else:
        results = [_run_suite(job) for job in jobs]
    return [r for batch in results for r in batch]


def report_document(config: dict, reports: list[CheckReport]) -> str:
    """The ``report.json`` text.

    Timings and the output directory are left out, so identical runs are
    byte-identical wherever they are written.
    """
    run = {k: v for k, v in config["run"].items() if k != "output"}
    resolved = {"run": run, "suites": {section: params for section, params in config["suites"]}}
    doc = {
        "schema": REPORT_SCHEMA,
        "config": resolved,
        "passed": all(r.passed for r in reports),
        "reports": [r.to_dict(timing=False) for r in reports],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_run(args) -> int:
    try:
        text = default_config_text() if args.config == "default" else Path(args.config).read_text()
    except OSError as exc:
        print(f"abplab: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = load_config(text, os.environ.get("ABPLAB_SEED"))
    except ConfigError as exc:
        print(f"abplab: config error: {exc}", file=sys.stderr)
        print(USAGE, file=sys.stderr)
        return 2
    if args.output:
        config["run"]["output"] = args.output
    reports = execute(config, parallel=args.parallel)
    out = Path(config["run"]["output"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_document(config, reports))
    (out / "summary.csv").write_text(summary_csv(reports))
    for r in reports:
        status = "PASS" if r.passed else ("SKIP" if r.skipped else "FAIL")
        print(f"{status} {r.suite:<16} {r.operator:<44} min_slack={r.min_slack:.3e} tol={r.tolerance:.1e}"
              f" ({r.elapsed:.1f}s)")
    print(f"wrote {out / 'report.json'} and {out / 'summary.csv'}")
    return 0 if all(r.passed for r in reports) else 1


def cmd_ops_list(args) -> int:
    print(f"{'spec':<36} {'degree':>6} {'g(I)':>12} cone")
    for g in catalog(args.max_n):
        print(f"{g.spec:<36} {g.degree:>6} {g.value_at_identity:>12.6g} {g.cone}")
    return 0


def cmd_solve(args) -> int:
    try:
        g = parse_operator(args.op)
        if g.dim != 2:
            raise ValueError(f"{g.spec} is not an operator on S(2)")
        eq = EquationSpec.from_strings(args.op, args.f, args.box, args.shape)
        boundary = parse_rhs(args.boundary, nonnegative=False)
    except ValueError as exc:
        print(f"abplab: {exc}", file=sys.stderr)
        return 2
    common = dict(lower=eq.lower, upper=eq.upper, shape=args.shape, tol=args.tol)
    if g.spec == "det:n=2":
        res = solve_ma_2d(eq.f, boundary, max_iter=args.max_iter, **common)
    elif g.spec in ("trace:n=2", "sigma:k=1,n=2"):
        res = solve_trace_2d(eq.f, boundary, max_iter=args.max_iter, **common)
    elif args.experimental:
        res = solve_generic_2d(g, eq.f, boundary, max_iter=min(args.max_iter, 2000), experimental=True, **common)
    else:
        print(f"abplab: no monotone solver for {g.spec}; pass --experimental for the generic relaxation",
              file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text(res.grid.to_csv())
    print(json.dumps({"operator": g.spec, "f": args.f, "boundary": args.boundary, **res.to_dict()}, sort_keys=True))
    return 0 if res.converged else 1


USAGE = """usage:
  abplab run <config.ini | default> [--parallel] [--output DIR]
  abplab ops list [--max-n N]
  abplab solve --op det:n=2 --f const:1 --shape 65 --out grid.csv
  abplab default-config"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abplab", description="Garding operator and Alexandrov estimate checks.")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run the suites of a config file ('default' for the built-in one)")
    run.add_argument("config")
    run.add_argument("--parallel", action="store_true", help="run suites concurrently")
    run.add_argument("--output", help="output directory (overrides [run] output)")
    run.set_defaults(func=cmd_run)

    ops = sub.add_parser("ops", help="operator catalog")
    ops_sub = ops.add_subparsers(dest="ops_command")
    ls = ops_sub.add_parser("list")
    ls.add_argument("--max-n", type=int, default=4)
    ls.set_defaults(func=cmd_ops_list)

    solve = sub.add_parser("solve", help="solve g(D^2 u) = f on a 2D box with Dirichlet data")
    solve.add_argument("--op", default="det:n=2")
    solve.add_argument("--f", default="const:1")
    solve.add_argument("--boundary", default="poly:0,0.5", help="boundary data, e.g. poly:0,0.5 for |x|^2/2")
    solve.add_argument("--box", default="0,1")
    solve.add_argument("--shape", type=int, default=65)
    solve.add_argument("--tol", type=float, default=1e-8)
    solve.add_argument("--max-iter", type=int, default=200_000)
    solve.add_argument("--experimental", action="store_true")
    solve.add_argument("--out")
    solve.set_defaults(func=cmd_solve)

    cfg = sub.add_parser("default-config", help="print the built-in config")
    cfg.set_defaults(func=lambda args: print(default_config_text(), end="") or 0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        print(USAGE, file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
