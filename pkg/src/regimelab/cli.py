"""Command-line front end: ``regimelab {simulate,converge,price,report-all}``.

Exit status: 0 when every check passes, 1 when any check fails, 2 for a
configuration error, 3 for an invalid model, 4 for an output failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ModelConfig, load_config
from .convergence_lab import (cf_convergence, cf_rate_check, fdd_compare, kernel_check,
                              price_convergence, tightness_diagnostics)
from .ctmc_sim import jump_count_mgf_check, jump_law_convergence, sample_ctmc_path
from .discrete_scheme import ReturnFamily, sample_discrete_path, verify_conditions
from .errors import ConfigParse, IoFailure, ModelInvalid
from .limit_sim import CfSpec, sample_limit_fdd
from .markov_core import RegimeParams, Variant, discrete_transition_matrix, rate_asymptotics_check
from .reports import CSV_HEADER, ConvergenceReport, write_csv, write_json
from .rng import DEFAULT_SEED, SeedSpec

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_MODEL, EXIT_IO = 0, 1, 2, 3, 4

COMMANDS = ("simulate", "converge", "price", "report-all")
DEFAULT_TRIALS = 100_000
SIMULATE_PATHS = 10
DEFAULT_N_GRID = (64, 256, 1024)
DECADE_GRID = (10, 100, 1000, 10_000)
JUMP_LAW_GRID = (64, 256, 512)

DEFAULT_TOLERANCES = {
    "kernel": 1e-10,
    "rate_order": 0.2,
    "jump_law": 0.02,
    "fdd": 0.01,
    "cf": 0.03,
    "cf_rate_band": 4.0,
    "tightness_tail": 0.05,
    "price": 0.15,
}


@dataclass
class RunConfig:
    command: str
    model_path: str | None = None
    n_grid: tuple[int, ...] | None = None
    trials: int | None = None
    master_seed: int = DEFAULT_SEED
    output_dir: str = "out"
    threads: int = 1
    variant: Variant = Variant.ROW_STOCHASTIC
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    paths: int = SIMULATE_PATHS

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigParse(f"unknown command {self.command!r}")
        if self.n_grid is not None:
            if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])) \
                    or self.n_grid[0] < 1:
                raise ConfigParse("n_grid must be strictly increasing positive integers", "n-grid")
        if self.trials is not None and self.trials < 1:
            raise ConfigParse("trials must be at least 1", "trials")
        if self.paths < 1:
            raise ConfigParse("paths must be at least 1", "paths")
        if self.threads < 1:
            raise ConfigParse("threads must be at least 1", "threads")


class _Writer:
    """Writes artifacts into the output directory and records their checksums."""

    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, str] = {}
        try:
            root.mkdir(parents=True, exist_ok=True)
            probe = root / ".write-probe"
            probe.write_bytes(b"")
            probe.unlink()
        except OSError as exc:
            raise IoFailure(f"output directory {root} is not writable: {exc}") from None

    def _record(self, name: str) -> None:
        self.files[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()

    def json(self, name: str, obj) -> None:
        try:
            write_json(obj, self.root / name)
        except OSError as exc:
            raise IoFailure(f"cannot write {name}: {exc}") from None
        self._record(name)

    def csv(self, name: str, header, rows) -> None:
        try:
            write_csv(header, rows, self.root / name)
        except OSError as exc:
            raise IoFailure(f"cannot write {name}: {exc}") from None
        self._record(name)


@dataclass
class _Check:
    name: str
    reports: list
    summary: str

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


def _report_rows(reports) -> list[tuple]:
    rows = []
    for r in reports:
        rows.extend(r.csv_rows())
    return rows


def _emit(writer: _Writer, check: _Check) -> None:
    writer.json(f"{check.name}.json", {"check": check.name, "pass": check.passed,
                                       "reports": [r.to_dict() for r in check.reports]})
    writer.csv(f"{check.name}.csv", CSV_HEADER, _report_rows(check.reports))


# -- suites ------------------------------------------------------------------

def _seed(cfg: RunConfig, stream: int) -> SeedSpec:
    return SeedSpec(cfg.master_seed, stream)


def _converge_checks(cfg: RunConfig, model: ModelConfig) -> list[_Check]:
    G, params, fam, T = model.generator, model.params, model.family, model.grid.T
    conv = model.convention
    trials = cfg.trials or DEFAULT_TRIALS
    big = 10 * trials
    grid = cfg.n_grid or DEFAULT_N_GRID
    tol = cfg.tolerances
    th = cfg.threads
    checks: list[_Check] = []

    def add(name, summary, fn):
        checks.append(_Check(name, fn(), summary))

    add("kernel", "transition kernel exactness and semigroup law",
        lambda: [kernel_check(G, seed=_seed(cfg, 1), tol=tol["kernel"])])
    add("rate_asymptotics", "(N/T) p_ij(T/N) -> lambda_ij with order 1 and majorization",
        lambda: [rate_asymptotics_check(G, DECADE_GRID, T, order_tolerance=tol["rate_order"])])
    add("jump_mgf", "exponential moment of the jump count against its bound",
        lambda: [jump_count_mgf_check(G, T, (0.1, 0.5, 1.0), big, _seed(cfg, 3), th)])
    jl_grid = cfg.n_grid or JUMP_LAW_GRID
    add("jump_law", "scaled discrete jump-time law against its continuous density (m = 1)",
        lambda: [jump_law_convergence(G, T, jl_grid, 1, [0.4 * T], big, _seed(cfg, 4), th,
                                      tol["jump_law"])])
    fdd_times = (0.25 * T, 0.75 * T)
    add("fdd", "joint laws of the discrete chain against Chapman-Kolmogorov products",
        lambda: [fdd_compare(G, fdd_times, (x1, x2), grid, trials, T, _seed(cfg, 5), th, tol["fdd"])
                 for x1 in range(1, G.d + 1) for x2 in range(1, G.d + 1)])
    specs = (CfSpec((1.0,), (T,)), CfSpec((1.0, -1.0), (0.5 * T, T)))
    add("cf_convergence", "characteristic functions of log-price increments against the limit",
        lambda: [cf_convergence(G, fam, spec, grid, trials, _seed(cfg, 6).child("spec", i), th,
                                tol["cf"], conv) for i, spec in enumerate(specs)])
    add("conditions", "return-family bound, mean compounding and variance accumulation",
        lambda: [r for f in (fam, ReturnFamily("trinomial" if fam.kind.value == "binomial" else "binomial",
                                               params, fam.grid))
                 for r in _tag_family(verify_conditions(f, (0.29 * T, 0.5 * T, T), DECADE_GRID), f)])
    add("cf_rate", "single-regime CF distance relative to gamma_N",
        lambda: [cf_rate_check(params, fam, 0.0, T, [1.0], grid, tol["cf_rate_band"])])
    add("tightness", "supremum and modulus-of-continuity tails of the discrete log-price",
        lambda: [tightness_diagnostics(G, fam, grid, (0.1, 0.25, 0.5, 1.0, 2.0),
                                       (T / 1024, T / 64, 0.1 * T, T), 0.5, trials, _seed(cfg, 9), th,
                                       conv, (grid[-1], T / 64, tol["tightness_tail"]))])
    return checks


def _tag_family(reports: list[ConvergenceReport], fam: ReturnFamily) -> list[ConvergenceReport]:
    for r in reports:
        r.name = f"{fam.kind.value}:{r.name}"
    return reports


def _price_checks(cfg: RunConfig, model: ModelConfig) -> list[_Check]:
    trials = 10 * (cfg.trials or DEFAULT_TRIALS)
    grid = cfg.n_grid or DEFAULT_N_GRID
    th, tol = cfg.threads, cfg.tolerances["price"]
    params = model.params
    demo = RegimeParams([0.0] * params.d, [0.2] * params.d, 100.0)
    demo_family = ReturnFamily(model.family.kind, demo, model.grid)
    return [_Check("pricing", [
        price_convergence(model.generator, model.family, params.x0, grid, trials, _seed(cfg, 10), th,
                          tol, convention=model.convention),
        price_convergence(model.generator, demo_family, 100.0, grid, trials, _seed(cfg, 11), th, tol,
                          convention=model.convention),
    ], "call prices of the discrete market against the limit model")]


def _simulate(cfg: RunConfig, model: ModelConfig, writer: _Writer) -> None:
    n = cfg.paths
    G, params, T = model.generator, model.params, model.grid.T
    times = [T * i / 10 for i in range(11)]
    ctmc_rows, limit_rows, disc_rows = [], [], []
    for trial in range(n):
        seed = SeedSpec(cfg.master_seed, 100 + trial)
        path = sample_ctmc_path(G, T, seed=seed)
        ctmc_rows.extend(path.csv_rows(trial))
        limit_rows.extend(sample_limit_fdd(path, params, times, seed).csv_rows(trial))
        disc_rows.extend(sample_discrete_path(G, model.family, seed, model.convention).csv_rows(trial))
    writer.csv("paths.csv", ("trial", "jump_index", "tau", "state"), ctmc_rows)
    writer.csv("limit_samples.csv", ("trial", "time", "u", "x"), limit_rows)
    writer.csv("discrete_paths.csv", ("trial", "k", "state", "u"), disc_rows)


def _matrices(cfg: RunConfig, model: ModelConfig, writer: _Writer) -> None:
    G = model.generator
    writer.csv("generator.csv", ("i", "j", "value"),
               [(i + 1, j + 1, repr(float(v))) for (i, j), v in np.ndenumerate(G.q)])
    M, deficit = discrete_transition_matrix(G, model.grid, cfg.variant)
    writer.csv("transition_matrix.csv", ("i", "j", "value"),
               [(i + 1, j + 1, repr(float(v))) for (i, j), v in np.ndenumerate(M)])
    writer.csv("row_deficits.csv", ("i", "value"),
               [(i + 1, repr(float(v))) for i, v in enumerate(deficit)])


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the exit status (see module docstring)."""
    model = load_config(cfg.model_path)
    writer = _Writer(Path(cfg.output_dir))
    checks: list[_Check] = []
    if cfg.command in ("simulate", "report-all"):
        _simulate(cfg, model, writer)
    if cfg.command == "report-all":
        _matrices(cfg, model, writer)
    if cfg.command in ("converge", "report-all"):
        checks += _converge_checks(cfg, model)
    if cfg.command in ("price", "report-all"):
        checks += _price_checks(cfg, model)
    for check in checks:
        _emit(writer, check)
    if checks:
        writer.csv("summary.csv", ("check", "description", "reports", "pass"),
                   [(c.name, c.summary, len(c.reports), str(c.passed).lower()) for c in checks])
    manifest = {
        "tool": "regimelab", "version": __version__, "command": cfg.command,
        "config": {"source": Path(model.source).name, "sha256": model.digest},
        "seed": cfg.master_seed, "trials": cfg.trials, "paths": cfg.paths, "n_grid": list(cfg.n_grid) if cfg.n_grid else None,
        "variant": Variant(cfg.variant).value, "tolerances": cfg.tolerances,
        "pass": all(c.passed for c in checks),
        "files": dict(sorted(writer.files.items())),
    }
    writer.json("manifest.json", manifest)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


# -- argument parsing --------------------------------------------------------

def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed_arg(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _tolerance(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or name not in DEFAULT_TOLERANCES:
        raise argparse.ArgumentTypeError(
            f"expected NAME=VALUE with NAME in {', '.join(DEFAULT_TOLERANCES)}")
    return name, float(value)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="model file (default: shipped two-state fixture)")
    common.add_argument("--seed", type=_seed_arg, default=DEFAULT_SEED, metavar="U64")
    common.add_argument("--trials", type=int, metavar="INT",
                        help=f"Monte Carlo trials (default {DEFAULT_TRIALS}; jump-count, jump-law and "
                             f"pricing checks use 10x)")
    common.add_argument("--paths", type=int, default=SIMULATE_PATHS, metavar="INT",
                        help=f"sample paths written by simulate (default {SIMULATE_PATHS})")
    common.add_argument("--n-grid", type=_int_list, metavar="CSV-INTS",
                        help=f"N values for the simulation checks (default {','.join(map(str, DEFAULT_N_GRID))})")
    common.add_argument("--threads", type=int, default=1, metavar="INT")
    common.add_argument("--out", metavar="DIR", help="output directory (default $OUTPUT_DIR or ./out)")
    common.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.ROW_STOCHASTIC.value,
                        help="one-step matrix written to transition_matrix.csv")
    common.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="NAME=VALUE")
    parser = argparse.ArgumentParser(prog="regimelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out or os.environ.get("OUTPUT_DIR") or "out"
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(dict(args.tolerance))
    try:
        cfg = RunConfig(args.command, args.config, args.n_grid, args.trials, args.seed, out,
                        args.threads, Variant(args.variant), tolerances, args.paths)
        status = run(cfg)
    except ConfigParse as exc:
        print(f"regimelab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelInvalid as exc:
        print(f"regimelab: invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except IoFailure as exc:
        print(f"regimelab: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"regimelab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"regimelab {args.command}: {'all checks passed' if status == EXIT_OK else 'some checks failed'}"
          f" ({out})")
    return status


if __name__ == "__main__":
    sys.exit(main())
