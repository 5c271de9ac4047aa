"""Command-line front end: run a convergence experiment and write CSV tables.

    fracdpg --example 2 --lambda 0.6 --alpha 1.2 --theta 0.4 --p 1 --q 1 --m 3 --n 3

Output directory layout:
    convergence.csv   step,N,dofs,est,err_u,err_sigma,err_uhat,err_sigmahat,seconds
    mesh_<k>.csv      x_left,x_right,est_T  (one file per step)
    summary.txt       fitted EOC per quantity (last 4 steps; adaptive runs: last factor 4 in N)

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .experiments import SolverFailure, example1, example2, example3, fit_eoc, run_convergence

__all__ = ["RunConfig", "UsageError", "parse_config", "parse_config_text", "emit_config", "run", "main"]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("step", "N", "dofs", "est", "err_u", "err_sigma", "err_uhat", "err_sigmahat", "seconds")
DEFAULT_ALPHA = {1: 1.5, 2: 1.2, 3: 1.6}

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    example: int
    alpha: float
    lam: float | None = None
    p: int = 0
    q: int = 0
    m: int = 2
    n: int = 2
    theta: float = 1.0
    N0: int = 2
    max_steps: int = 8
    dof_budget: int = 30000
    out: str = "fracdpg_out"
    serial: bool = False

    def __post_init__(self):
        if self.example not in (1, 2, 3):
            raise UsageError(f"example must be 1, 2 or 3, got {self.example}")
        if not 1.0 < self.alpha < 2.0:
            raise UsageError(f"alpha must lie in (1, 2), got {self.alpha}")
        if self.lam is not None:
            if self.example != 2:
                raise UsageError("lambda only applies to example 2")
            if not 0.5 < self.lam < 1.5:
                raise UsageError(f"lambda must lie in (1/2, 3/2), got {self.lam}")
        if min(self.p, self.q, self.m, self.n) < 0:
            raise UsageError("polynomial degrees must be nonnegative")
        if not 0.0 < self.theta <= 1.0:
            raise UsageError(f"theta must lie in (0, 1], got {self.theta}")
        if self.N0 < 1 or self.max_steps < 1 or self.dof_budget < 1:
            raise UsageError("N0, max_steps and dof_budget must be positive")
        if self.m < self.p + 1 or self.n < self.q + 1:
            log.warning("m=%d, n=%d below the recommended p+1=%d, q+1=%d",
                        self.m, self.n, self.p + 1, self.q + 1)

    def problem(self):
        if self.example == 1:
            return example1(self.alpha)
        if self.example == 2:
            return example2(0.6 if self.lam is None else self.lam, self.alpha)
        return example3(self.alpha)


# config-file key -> (RunConfig field, converter)
_KEYS = {
    "example": ("example", int),
    "alpha": ("alpha", float),
    "lambda": ("lam", float),
    "p": ("p", int),
    "q": ("q", int),
    "m": ("m", int),
    "n": ("n", int),
    "theta": ("theta", float),
    "N0": ("N0", int),
    "max_steps": ("max_steps", int),
    "dof_budget": ("dof_budget", int),
    "out": ("out", str),
    "serial": ("serial", lambda s: _parse_bool(s)),
}
_FIELD_TO_KEY = {field: key for key, (field, _) in _KEYS.items()}


def _parse_bool(s):
    s = str(s).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {s!r}")


def _read_pairs(text: str, source: str = "config") -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise UsageError(f"{source}:{lineno}: unknown key {key!r}")
        field, conv = _KEYS[key]
        try:
            values[field] = conv(value)
        except ValueError as exc:
            raise UsageError(f"{source}:{lineno}: bad value for {key}: {value!r}") from exc
    return values


def _build(values: dict) -> RunConfig:
    if "example" not in values:
        raise UsageError("missing required example id")
    values = dict(values)
    values.setdefault("alpha", DEFAULT_ALPHA.get(values["example"], 1.5))
    return RunConfig(**values)


def parse_config_text(text: str) -> RunConfig:
    return _build(_read_pairs(text))


def emit_config(config: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if value is None:
            continue
        lines.append(f"{_FIELD_TO_KEY[f.name]} = {value!r}" if isinstance(value, float)
                     else f"{_FIELD_TO_KEY[f.name]} = {value}")
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fracdpg", description="Ultra-weak DPG convergence runs for 1D fractional "
                 "advection-diffusion.")
    ap.add_argument("--config", help="key = value file; flags override its entries")
    ap.add_argument("--example", type=int, choices=(1, 2, 3))
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--lambda", dest="lam", type=float, help="singularity exponent (example 2)")
    for name in ("p", "q", "m", "n"):
        ap.add_argument(f"--{name}", type=int)
    ap.add_argument("--theta", type=float, help="Doerfler parameter; 1 means uniform refinement")
    ap.add_argument("--N0", type=int, help="elements of the initial uniform mesh")
    ap.add_argument("--max-steps", dest="max_steps", type=int)
    ap.add_argument("--dof-budget", dest="dof_budget", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--serial", action="store_true", default=None,
                    help="single BLAS thread and no timings in the CSV (byte-identical reruns)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def parse_config(argv=None) -> RunConfig:
    args = _parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        values.update(_read_pairs(text, args.config))
    for key, (field, _) in _KEYS.items():
        v = getattr(args, field, None)
        if v is not None:
            values[field] = v
    return _build(values)


def _fmt(x) -> str:
    return "" if x is None else f"{x:.17g}"


def _thread_cap(config: RunConfig):
    if config.serial:
        return 1
    env = os.environ.get("FRACDPG_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"FRACDPG_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise UsageError("FRACDPG_THREADS must be positive")
        return n
    return None


def run(config: RunConfig) -> list:
    """Run the experiment of ``config`` and write its artifacts; returns the records."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    def dump_mesh(rec, mesh, sol):
        rows = np.column_stack([mesh.left, mesh.right, sol.est_local])
        with open(out / f"mesh_{rec.step}.csv", "w") as fh:
            fh.write("x_left,x_right,est_T\n")
            for a, b, e in rows:
                fh.write(f"{_fmt(a)},{_fmt(b)},{_fmt(e)}\n")

    with threadpool_limits(limits=_thread_cap(config)):
        records = run_convergence(config.problem(), config.p, config.q, config.m, config.n,
                                  theta=config.theta, n_steps=config.max_steps, N0=config.N0,
                                  dof_budget=config.dof_budget, on_step=dump_mesh)

    with open(out / "convergence.csv", "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in records:
            seconds = None if config.serial else r.seconds
            fh.write(",".join([str(r.step), str(r.N), str(r.dofs), _fmt(r.est), _fmt(r.err_u),
                               _fmt(r.err_sigma), _fmt(r.err_uhat), _fmt(r.err_sigmahat),
                               _fmt(seconds)]) + "\n")

    lines = [emit_config(config).rstrip("\n"), ""]
    # adaptive steps are small, so fit over a factor 4 in N rather than 4 records
    n_range = 4.0 if config.theta < 1.0 else None
    for quantity in ("est", "err_u", "err_sigma", "err_uhat", "err_sigmahat"):
        if getattr(records[0], quantity) is None:
            continue
        try:
            lines.append(f"eoc_{quantity} = {fit_eoc(records, quantity, n_range=n_range):.4f}")
        except ValueError:
            lines.append(f"eoc_{quantity} = nan")
    lines.append(f"total_seconds = {sum(r.seconds for r in records):.3f}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return records


def main(argv=None) -> int:
    try:
        config = parse_config(argv)
    except UsageError as exc:
        print(f"fracdpg: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args = sys.argv[1:] if argv is None else argv
    verbose = any(a in ("-v", "--verbose") for a in args)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        records = run(config)
    except UsageError as exc:
        print(f"fracdpg: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverFailure, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"fracdpg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"fracdpg: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    last = records[-1]
    print(f"{len(records)} steps, final N={last.N}, est={last.est:.4e}; results in {config.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
