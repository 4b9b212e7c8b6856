"""CLI for levyq."""

import json
import logging
import sys
from pathlib import Path
from typing import Annotated, Any, Optional

import typer
from pydantic import ValidationError

from levyq import __version__
from levyq.types import CheckResult, ConfigError, ExperimentConfig, LevyqError, LevySpec

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="levyq",
    help="Quasi-invariance toolkit for class-(L) subordinators: simulate, evaluate densities, verify.",
    no_args_is_help=True,
)

ConfigOpt = Annotated[Path, typer.Option("--config", "-c", help="Experiment config (JSON)")]
SeedOpt = Annotated[Optional[int], typer.Option("--seed", "-s", help="Override the master seed")]
NOpt = Annotated[Optional[int], typer.Option("--n", "-n", help="Override the replicate count")]
EpsOpt = Annotated[Optional[float], typer.Option("--eps", help="Override the truncation level")]
OutOpt = Annotated[Optional[str], typer.Option("--out", "-o", help="Override the output path prefix")]
ThreadsOpt = Annotated[
    Optional[int], typer.Option("--threads", "-j", envvar="LEVYQ_THREADS", help="Worker processes for replicates")
]


@app.callback()
def main(
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Log at DEBUG level")] = False,
) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def load_config(path: Path, **overrides: Any) -> ExperimentConfig:
    """Read a JSON config and apply CLI overrides, re-validating the result."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e
    try:
        config = ExperimentConfig.model_validate_json(text)
        updates = {k: v for k, v in overrides.items() if v is not None}
        if updates:
            config = ExperimentConfig.model_validate(config.model_copy(update=updates).model_dump())
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}:\n{e}") from e
    return config


def _fail(err: Exception) -> typer.Exit:
    typer.echo(f"error: {err}", err=True)
    return typer.Exit(2)


def _load_checked(config: Path, **overrides: Any) -> ExperimentConfig:
    from levyq.doctor import preflight

    cfg = load_config(config, **overrides)
    failed = [c for c in preflight(cfg) if not c.ok]
    if failed:
        raise ConfigError("; ".join(f"{c.name}: {c.detail}" for c in failed))
    return cfg


def _print_results(results: list[CheckResult]) -> None:
    for r in results:
        status = "ok" if r.passed else "FAIL"
        est = r.estimate
        z = "" if r.z is None else f" z={r.z:+.2f}"
        target = "" if r.target is None else f" target={r.target:.6g}"
        warn = " [low ESS]" if r.ess_warning else ""
        typer.echo(f"{status:4} {r.check:12} {r.label:32} {est.mean:.6g} +- {est.std_error:.2g}{target}{z}{warn}")


def _run_and_report(cfg: ExperimentConfig, checks: list[str]) -> None:
    from levyq.harness import run_check
    from levyq.report import write_report

    try:
        results: list[CheckResult] = []
        for name in checks:
            logger.info("Running %s check for %s (n=%d)", name, cfg.name, cfg.n)
            results.extend(run_check(name, cfg))
        csv_path, json_path = write_report(results, cfg.output, cfg.name)
    except (LevyqError, OSError) as e:
        raise _fail(e)
    _print_results(results)
    failed = sum(1 for r in results if not r.passed)
    typer.echo(f"{len(results) - failed}/{len(results)} passed; wrote {csv_path} and {json_path}")
    if failed:
        raise typer.Exit(1)


@app.command()
def version() -> None:
    """Show version information."""
    typer.echo(f"levyq {__version__}")


@app.command()
def verify(
    config: ConfigOpt,
    seed: SeedOpt = None,
    n: NOpt = None,
    eps: EpsOpt = None,
    out: OutOpt = None,
    threads: ThreadsOpt = None,
) -> None:
    """Run the checks listed in the config and write a CSV/JSON report."""
    try:
        cfg = _load_checked(config, seed=seed, n=n, eps=eps, output=out, threads=threads)
    except LevyqError as e:
        raise _fail(e)
    _run_and_report(cfg, list(cfg.checks))


@app.command()
def dirichlet(
    config: ConfigOpt,
    seed: SeedOpt = None,
    n: NOpt = None,
    eps: EpsOpt = None,
    out: OutOpt = None,
    threads: ThreadsOpt = None,
) -> None:
    """Run the Dirichlet bridge checks for a process='dirichlet' config."""
    try:
        cfg = _load_checked(config, seed=seed, n=n, eps=eps, output=out, threads=threads)
        if cfg.process != "dirichlet":
            raise ConfigError(f"{config} has process={cfg.process!r}; the dirichlet command needs 'dirichlet'")
    except LevyqError as e:
        raise _fail(e)
    _run_and_report(cfg, ["dirichlet"])


@app.command()
def sde(
    config: ConfigOpt,
    seed: SeedOpt = None,
    n: NOpt = None,
    eps: EpsOpt = None,
    out: OutOpt = None,
    threads: ThreadsOpt = None,
) -> None:
    """Compare the driven SDE with the reweighted transformed driver."""
    try:
        cfg = _load_checked(config, seed=seed, n=n, eps=eps, output=out, threads=threads)
        if cfg.coefficient is None:
            raise ConfigError(f"{config} has no coefficient; the sde command needs one")
    except LevyqError as e:
        raise _fail(e)
    _run_and_report(cfg, ["sde"])


@app.command()
def density(
    config: ConfigOpt,
    seed: SeedOpt = None,
    n: NOpt = None,
    eps: EpsOpt = None,
    out: OutOpt = None,
) -> None:
    """Evaluate the configured density on n paths; writes one JSON line per (path, checkpoint), path-major."""
    from levyq.density import write_log_densities
    from levyq.harness.base import context_of
    from levyq.harness.expectation import log_densities

    try:
        cfg = _load_checked(config, seed=seed, n=n, eps=eps, output=out)
        ctx = context_of(cfg)
        totals = [0.0] * len(cfg.checkpoints)

        def records():
            for i in range(cfg.n):
                for j, d in enumerate(log_densities(ctx, i)):
                    totals[j] += d.value
                    yield d

        out_path = Path(cfg.output + ".jsonl")
        write_log_densities(records(), out_path)
    except (LevyqError, OSError) as e:
        raise _fail(e)
    for t, total in zip(cfg.checkpoints, totals):
        typer.echo(f"t={t:g}: mean density {total / cfg.n:.6g} over {cfg.n} paths")
    typer.echo(f"wrote {out_path}")


@app.command()
def simulate(
    levy: Annotated[str, typer.Option("--levy", help="Levy family: gamma or tempered_log")] = "gamma",
    g0: Annotated[float, typer.Option("--g0", help="Singularity constant g0")] = 1.0,
    rate: Annotated[float, typer.Option("--rate", help="Tempering rate b")] = 1.0,
    horizon: Annotated[float, typer.Option("--horizon", help="Time horizon")] = 1.0,
    eps: Annotated[float, typer.Option("--eps", help="Truncation level")] = 1e-6,
    n: Annotated[int, typer.Option("--n", "-n", help="Number of paths")] = 1,
    seed: Annotated[int, typer.Option("--seed", "-s", help="Master seed")] = 0,
    out: Annotated[Path, typer.Option("--out", "-o", help="Output directory")] = Path("paths"),
) -> None:
    """Sample truncated paths and write each as a (time, size) CSV with a JSON header."""
    from levyq.harness.base import MAIN_STREAM, replicate_seed
    from levyq.levy_core import levy_from_spec
    from levyq.simulate import sample_jump_path, save_path

    try:
        spec = LevySpec(family=levy, g0=g0, rate=rate)
        density_ = levy_from_spec(spec)
        for i in range(n):
            path = sample_jump_path(density_, horizon, eps, replicate_seed(seed, MAIN_STREAM, i))
            target = out / f"path_{i:04d}.csv"
            save_path(path, target, spec)
            typer.echo(f"{target}: {path.count} jumps, xi_T = {path.value(horizon):.6g}")
    except (ValueError, OSError) as e:
        raise _fail(e)


@app.command()
def quadcheck(
    levy: Annotated[str, typer.Option("--levy", help="Levy family: gamma or tempered_log")] = "gamma",
    g0: Annotated[float, typer.Option("--g0", help="Singularity constant g0")] = 1.0,
    rate: Annotated[float, typer.Option("--rate", help="Tempering rate b")] = 1.0,
    kernel: Annotated[list[str], typer.Option("--kernel", "-k", help="Kernels to check (repeatable)")] = [],
    a: Annotated[list[float], typer.Option("--a", help="Tilt values a (repeatable)")] = [],
    json_out: Annotated[bool, typer.Option("--json", help="Emit machine-readable JSON")] = False,
) -> None:
    """Check int F g = -Psi(a) - g0 log phi'(0) by quadrature for each kernel and a."""
    from levyq.doctor import run_quadcheck

    kernels = kernel or ["identity", "linear", "damped_exp", "cosine_bump", "rational"]
    a_values = tuple(a) or (0.0, 0.5, 1.0, 2.0)
    try:
        rows = run_quadcheck(LevySpec(family=levy, g0=g0, rate=rate), kernels, a_values)
    except ValueError as e:
        raise _fail(e)

    if json_out:
        payload = [dict(r.__dict__, ok=r.ok) for r in rows]
        typer.echo(json.dumps(payload, indent=2))
    else:
        typer.echo(f"{'kernel':12} {'a':>5} {'signed':>14} {'target':>14} {'residual':>10} {'int|F|g':>10} {'bound':>10}")
        for r in rows:
            status = "ok" if r.ok else "FAIL"
            typer.echo(
                f"{r.kernel:12} {r.a:5g} {r.signed:14.9f} {r.target:14.9f} {r.residual:10.2e} "
                f"{r.absolute:10.4g} {r.bound:10.4g}  {status}"
            )
    if not all(r.ok for r in rows):
        raise typer.Exit(1)


if __name__ == "__main__":
    app()
