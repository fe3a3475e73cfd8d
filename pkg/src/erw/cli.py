"""Command-line interface: ``erw <subcommand> [options]``.

Exit status is 0 on success, 1 when a computation is asked for outside its
domain (or a ``verify`` check fails) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
from dataclasses import dataclass
from typing import IO, Sequence

from . import bounds, branching, stationary, walker
from .environment import CookieEnvironment, classify
from .exceptions import DomainError, HittingTimeout
from .io import dumps, write_csv

SUBCOMMANDS = ("classify", "simulate", "hitting", "kernel", "stationary", "bounds", "gap", "verify")
DEFAULT_FORMAT = {"kernel": "csv"}


@dataclass
class RunConfig:
    subcommand: str
    p: CookieEnvironment | None = None
    steps: int = 10**5
    replicates: int = 100
    seed: int = 0
    target: int = 1000
    step_cap: int = 10**8
    rows: tuple[int, int] = (0, 10)
    columns: int = 50
    truncation: int = stationary.DEFAULT_TRUNCATION
    tolerance: float = stationary.DEFAULT_TOL
    scheme: str = "mean_preserving"
    region: str = "symmetric"
    grid_step: float = 1e-3
    refine_tol: float = 1e-7
    residual_tol: float = 1e-8
    corrupt_kernel: bool = False
    threads: int | None = None
    output_format: str = "json"
    output: str = "-"
    csv_path: str | None = None


# ---------------------------------------------------------------------------
# Argument parsing


def _env_arg(text: str) -> CookieEnvironment:
    try:
        return CookieEnvironment.from_string(text)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_int(text: str) -> int:
    try:
        value = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _seed_arg(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned integer, got {text!r}") from exc
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned integer, got {text!r}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from exc
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _row_range(text: str) -> tuple[int, int]:
    try:
        if ":" in text:
            a, b = text.split(":")
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
            hi += 1
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"row range must look like 0:10, got {text!r}") from exc
    if lo < 0 or hi <= lo:
        raise argparse.ArgumentTypeError(f"empty or negative row range {text!r}")
    return lo, hi


def _default_seed() -> int | None:
    raw = os.environ.get("ERW_SEED", "")
    if not raw:
        return 0
    try:
        return _seed_arg(raw)
    except argparse.ArgumentTypeError:
        return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="erw",
        description="Speed bounds, kernels and simulations for excited random walks.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", default="-", help="destination file (default: stdout)")
    common.add_argument("--format", dest="output_format", choices=("json", "csv"))
    common.add_argument("--threads", type=_positive_int, help="worker threads (default: all cores)")
    common.add_argument(
        "--seed", type=_seed_arg, default=_default_seed(),
        help="master seed (default: $ERW_SEED or 0)",
    )

    def env_flag(sp, required=True):
        sp.add_argument("--p", type=_env_arg, required=required, metavar="P1,P2,...",
                        help="comma-separated cookie strengths")

    def scheme_flag(sp):
        sp.add_argument("--scheme", choices=stationary.SCHEMES, default="mean_preserving",
                        help="how mass beyond the truncation is folded back")

    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    sp = sub.add_parser("classify", parents=[common], help="drift, transience and speed sign")
    env_flag(sp)

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo speed estimate")
    env_flag(sp)
    sp.add_argument("--steps", type=_positive_int, default=10**5)
    sp.add_argument("--replicates", type=_positive_int, default=100)
    sp.add_argument("--csv", dest="csv_path", help="also write per-replicate CSV here")

    sp = sub.add_parser("hitting", parents=[common], help="hitting time of a site")
    env_flag(sp)
    sp.add_argument("--target", type=_positive_int, default=1000)
    sp.add_argument("--step-cap", type=_positive_int, default=10**8)

    sp = sub.add_parser("kernel", parents=[common], help="dump transition probabilities")
    env_flag(sp)
    sp.add_argument("--rows", type=_row_range, default=(0, 10), help="row range i0:i1 (half open)")
    sp.add_argument("--columns", type=_positive_int, default=50, help="columns j < COLUMNS")

    sp = sub.add_parser("stationary", parents=[common], help="truncated stationary distribution")
    env_flag(sp)
    sp.add_argument("--truncation", type=_positive_int, default=stationary.DEFAULT_TRUNCATION)
    sp.add_argument("--tol", dest="tolerance", type=_positive_float, default=stationary.DEFAULT_TOL)
    scheme_flag(sp)
    sp.add_argument("--csv", dest="csv_path", help="also write k,pi_hat CSV here")

    sp = sub.add_parser("bounds", parents=[common], help="closed-form speed bracket (M=3)")
    env_flag(sp)

    sp = sub.add_parser("gap", parents=[common], help="maximise the bound gap")
    sp.add_argument("--region", choices=("symmetric", "general"), default="symmetric")
    sp.add_argument("--grid", dest="grid_step", type=_positive_float, default=1e-3)
    sp.add_argument("--refine-tol", type=_positive_float, default=1e-7)
    sp.add_argument("--csv", dest="csv_path", help="also write the coarse grid CSV here")

    sp = sub.add_parser("verify", parents=[common], help="bounds vs stationary vs Monte Carlo")
    env_flag(sp)
    sp.add_argument("--steps", type=_positive_int, default=10**6)
    sp.add_argument("--replicates", type=_positive_int, default=50)
    sp.add_argument("--truncation", type=_positive_int, default=stationary.DEFAULT_TRUNCATION)
    sp.add_argument("--tol", dest="tolerance", type=_positive_float, default=stationary.DEFAULT_TOL)
    scheme_flag(sp)
    sp.add_argument("--residual-tol", type=_positive_float, default=1e-8)
    sp.add_argument("--corrupt-kernel", action="store_true",
                    help="test hook: perturb the kernel to check that verification fails")
    return parser


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.seed is None:
        parser.error(f"ERW_SEED must be an unsigned integer, got {os.environ['ERW_SEED']!r}")
    values = {k: v for k, v in vars(ns).items() if v is not None}
    values.setdefault("output_format", DEFAULT_FORMAT.get(ns.subcommand, "json"))
    known = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in values.items() if k in known})


# ---------------------------------------------------------------------------
# Execution


@contextlib.contextmanager
def _open_out(path: str | None, stdout: IO[str]):
    if path is None or path == "-":
        yield stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit(cfg: RunConfig, stdout, record: dict, header=None, rows=None):
    """Write either the JSON record or the CSV table to the chosen output."""
    with _open_out(cfg.output, stdout) as out:
        if cfg.output_format == "csv" and header is not None:
            write_csv(out, header, rows)
        else:
            out.write(dumps(record) + "\n")


def _need_env(cfg: RunConfig) -> CookieEnvironment:
    if cfg.p is None:
        raise DomainError("--p is required")
    return cfg.p


def _classify(cfg, stdout):
    env = _need_env(cfg)
    c = classify(env)
    _emit(cfg, stdout, {"p": list(env.p), "delta": env.delta,
                        "transience": c.transience.value, "speed_sign": c.speed_sign.value})
    return 0


def _simulate(cfg, stdout):
    env = _need_env(cfg)
    est = walker.estimate_speed(env, cfg.steps, max(cfg.replicates, 2), cfg.seed, cfg.threads)
    header = ("replicate", "seed", "steps", "final_position", "speed_estimate")
    if cfg.csv_path:
        with _open_out(cfg.csv_path, stdout) as fh:
            write_csv(fh, header, est.rows())
    _emit(cfg, stdout, {"p": list(env.p), **est.as_dict()}, header, est.rows())
    return 0


def _hitting(cfg, stdout):
    env = _need_env(cfg)
    record = {"p": list(env.p), "target": cfg.target, "seed": cfg.seed, "step_cap": cfg.step_cap}
    try:
        t = walker.hitting_time(env, cfg.target, cfg.seed, cfg.step_cap)
    except HittingTimeout as exc:
        record.update(timeout=True, hitting_time=None, speed_estimate=None, position=exc.position)
    else:
        record.update(timeout=False, hitting_time=t, speed_estimate=cfg.target / t)
    _emit(cfg, stdout, record)
    return 0


def _kernel_rows(kernel, lo, hi, ncols):
    for i in range(lo, hi):
        row = kernel.row(i, ncols)
        for j in range(ncols):
            yield i, j, row[j]
        yield i, "TAIL", kernel.tail_mass(i, ncols - 1)


def _kernel(cfg, stdout):
    env = _need_env(cfg)
    kernel = branching.TransitionKernel(env)
    lo, hi = cfg.rows
    rows = list(_kernel_rows(kernel, lo, hi, cfg.columns))
    record = {"p": list(env.p), "rows": [lo, hi], "columns": cfg.columns,
              "entries": [[i, j, v] for i, j, v in rows]}
    _emit(cfg, stdout, record, ("i", "j", "prob"), rows)
    return 0


def _stationary(cfg, stdout):
    env = _need_env(cfg)
    sol = stationary.solve_stationary(
        branching.TransitionKernel(env), cfg.truncation, cfg.tolerance, scheme=cfg.scheme)
    rows = list(enumerate(sol.pi_hat))
    if cfg.csv_path:
        with _open_out(cfg.csv_path, stdout) as fh:
            write_csv(fh, ("k", "pi_hat"), rows)
    _emit(cfg, stdout, {"p": list(env.p), **sol.summary()}, ("k", "pi_hat"), rows)
    return 0


def _bounds(cfg, stdout):
    env = _need_env(cfg)
    _emit(cfg, stdout, bounds.speed_interval(env).as_dict())
    return 0


def _gap_rows(res):
    pts = res.grid_points
    for x, lo, hi in zip(pts, res.grid_lower, res.grid_upper):
        yield (*x, lo, hi, hi - lo)


def _gap(cfg, stdout):
    res = bounds.maximize_gap(cfg.region, cfg.grid_step, cfg.refine_tol)
    header = ("p", "v_lower", "v_upper", "gap") if cfg.region == "symmetric" else (
        "p1", "p2", "p3", "v_lower", "v_upper", "gap")
    if cfg.csv_path:
        with _open_out(cfg.csv_path, stdout) as fh:
            write_csv(fh, header, _gap_rows(res))
    _emit(cfg, stdout, res.as_dict(), header, _gap_rows(res))
    return 0


def corrupted(env: CookieEnvironment) -> CookieEnvironment:
    """Environment with the first cookie weakened by 10%, for mutation tests."""
    return CookieEnvironment((0.9 * env.p[0],) + env.p[1:])


def _verify(cfg, stdout):
    env = _need_env(cfg)
    b = bounds.speed_interval(env)
    kernel_env = corrupted(env) if cfg.corrupt_kernel else env
    sol = stationary.solve_stationary(
        branching.TransitionKernel(kernel_env), cfg.truncation, cfg.tolerance, scheme=cfg.scheme)
    residual = stationary.genabc_residual(env, sol.pi_hat)
    mc = walker.estimate_speed(env, cfg.steps, max(cfg.replicates, 2), cfg.seed, cfg.threads)
    checks = {
        "monte_carlo_in_bounds": b.v_lower - 4 * mc.std_error <= mc.mean <= b.v_upper + 4 * mc.std_error,
        "stationary_in_bounds": b.v_lower - 1e-4 <= sol.speed_estimate <= b.v_upper + 1e-4,
        "genabc_residual_small": residual < cfg.residual_tol,
    }
    ok = all(checks.values())
    record = {
        "p": list(env.p),
        "delta": env.delta,
        "bounds": b.as_dict(),
        "stationary": sol.summary(),
        "genabc_residual": residual,
        "residual_tol": cfg.residual_tol,
        "monte_carlo": mc.as_dict(),
        "corrupt_kernel": cfg.corrupt_kernel,
        "checks": checks,
        "passed": ok,
    }
    _emit(cfg, stdout, record)
    return 0 if ok else 1


_HANDLERS = {
    "classify": _classify,
    "simulate": _simulate,
    "hitting": _hitting,
    "kernel": _kernel,
    "stationary": _stationary,
    "bounds": _bounds,
    "gap": _gap,
    "verify": _verify,
}


def run(cfg: RunConfig, stdout: IO[str] | None = None, stderr: IO[str] | None = None) -> int:
    """Dispatch a parsed configuration; returns the process exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        return _HANDLERS[cfg.subcommand](cfg, stdout)
    except DomainError as exc:
        stderr.write(f"erw {cfg.subcommand}: error: {exc}\n")
        return 1


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
