"""Command-line entry point.

Exit codes: 0 when every check in the run passes, 1 when a certificate or
assertion fails, 2 on configuration or precondition errors.
"""

from __future__ import annotations

import functools
import logging
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import reports
from .bands import assemble, write_coo
from .config import RunConfig
from .errors import ConfigError, LplocError, PreconditionError, SolverError
from .hull import evaluate
from .localization import (
    dynamical_decay,
    hull_ule_survey,
    interior_pairs,
    phase_stability,
    rate_vs_epsilon,
    uniform_fit,
)
from .potential import certify_distality, rational_dict, tail_bound
from .spectral import eig_sym, match_eigenvalues, write_eigenvalues_csv, write_eigenvectors

log = logging.getLogger("lploc")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _command(fn):
    """Load config, run ``fn(cfg, out)`` and translate its verdict into an exit code."""

    @click.pass_context
    @functools.wraps(fn)
    def wrapper(ctx, **kwargs):
        opts = ctx.obj
        try:
            cfg = RunConfig.load(opts["config"], opts["overrides"])
            out = Path(cfg["output"])
            out.mkdir(parents=True, exist_ok=True)
            passed = fn(cfg, out, **kwargs)
        except (ConfigError, PreconditionError) as exc:
            click.echo(f"configuration error: {exc}", err=True)
            ctx.exit(EXIT_CONFIG)
        except (LplocError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_CONFIG if not isinstance(exc, SolverError) else EXIT_FAIL)
        click.echo("PASS" if passed else "FAIL")
        ctx.exit(EXIT_PASS if passed else EXIT_FAIL)

    return wrapper


def _write(cfg: RunConfig, out: Path, name: str, passed: bool, result: dict) -> Path:
    doc = reports.envelope(name, cfg.to_dict(), cfg.seeds(), passed, result)
    path = reports.write_json(out / f"{name}.json", doc)
    log.info("wrote %s", path)
    return path


def _wants(cfg: RunConfig, fmt: str) -> bool:
    return fmt in cfg["formats"]


def _solve(cfg: RunConfig, epsilon: float | None = None):
    label, omega = cfg.hull_points()[0]
    H = assemble(omega, cfg.box(), cfg["epsilon"] if epsilon is None else epsilon, cfg["boundary"], level=cfg["level"])
    return label, omega, H, eig_sym(H)


@click.group()
@click.option("-c", "--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="YAML run configuration.")
@click.option("-s", "--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override a config value, e.g. box.side=64.")
@click.option("-o", "--output", help="Output directory (overrides config).")
@click.option("-e", "--epsilon", type=float, help="Coupling (overrides config).")
@click.option("-d", "--dimension", type=int, help="Lattice dimension (overrides config).")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, config_path, overrides, output, epsilon, dimension, verbose):
    """Distal limit-periodic potentials and finite-volume localization checks."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(name)s: %(message)s")
    extra = list(overrides)
    if output is not None:
        extra.append({"output": output})
    if epsilon is not None:
        extra.append({"epsilon": epsilon})
    if dimension is not None:
        extra.append({"dimension": dimension})
    ctx.obj = {"config": config_path, "overrides": extra}


@main.command()
@_command
def potential(cfg: RunConfig, out: Path) -> bool:
    """Certified potential values on the box."""
    hier, box, k = cfg.hierarchy(), cfg.box(), cfg["level"]
    label, omega = cfg.hull_points()[0]
    radius = tail_bound(hier, k) if k < hier.L else None
    rows = []
    for site in box.sites():
        value = evaluate(omega, site, k)
        rows.append(
            {
                "site": " ".join(map(str, site)),
                "center_exact": f"{value.numerator}/{value.denominator}",
                "center": repr(float(value)),
                "radius_exact": "" if radius is None else f"{radius.numerator}/{radius.denominator}",
                "radius": "" if radius is None else repr(float(radius)),
            }
        )
    if _wants(cfg, "csv"):
        reports.write_csv(out / "potential.csv", list(rows[0]), rows)
    result = {
        "hull_point": {"label": label, **omega.to_dict()},
        "level": k,
        "n_sites": box.size,
        "radius": None if radius is None else rational_dict(radius),
    }
    _write(cfg, out, "potential", True, result)
    return True


@main.command()
@_command
def distality(cfg: RunConfig, out: Path) -> bool:
    """Exact certificate |V(i) - V(i+s)| >= 1/Q(|s|) over all shifts up to k_max."""
    dcfg = cfg["distality"]
    cert = certify_distality(cfg.hierarchy(), int(dcfg["k_eval"]), int(dcfg["k_max"]))
    _write(cfg, out, "distality", cert.passed, cert.to_dict())
    for f in cert.failures[:5]:
        click.echo(f"shift {f.shift} at site {f.argmin}: margin {float(f.margin):.3e}", err=True)
    return cert.passed


@main.command()
@_command
def spectrum(cfg: RunConfig, out: Path) -> bool:
    """Eigenvalues on the box and their sorted match to the potential."""
    label, omega, H, E = _solve(cfg)
    match = match_eigenvalues(E)
    if _wants(cfg, "csv"):
        write_eigenvalues_csv(out / "eigenvalues.csv", E)
        reports.write_csv(
            out / "potential_sorted.csv", ["index", "value"], [[j, repr(float(v))] for j, v in enumerate(np.sort(H.potential))]
        )
    if _wants(cfg, "bin"):
        write_eigenvectors(out / "eigenvectors.bin", E)
    if _wants(cfg, "coo"):
        write_coo(out / "hamiltonian.coo", H.dense())
    passed = match.passed if cfg["boundary"] == "dirichlet" else True
    result = {
        "hull_point": {"label": label, **omega.to_dict()},
        "potential_radius": rational_dict(H.potential_radius),
        "match": match.to_dict(),
        "residual": E.residual,
        "gram_error": E.gram_error,
    }
    _write(cfg, out, "spectrum", passed, result)
    return passed


@main.command()
@_command
def ule(cfg: RunConfig, out: Path) -> bool:
    """Uniform localization pair (C, r), verified at every (vector, site)."""
    label, omega, H, E = _solve(cfg)
    rep = uniform_fit(E, cfg["boundary_margin"], cfg["floor"])
    if _wants(cfg, "csv"):
        rows = [v.to_row() for v in rep.per_vector]
        reports.write_csv(out / "ule_vectors.csv", list(rows[0]), rows)
    passed = rep.localized and rep.violations == 0
    _write(cfg, out, "ule", passed, {"hull_point": {"label": label, **omega.to_dict()}, **rep.to_dict()})
    return passed


@main.command()
@_command
def dynamics(cfg: RunConfig, out: Path) -> bool:
    """Time-uniform propagator decay on seeded interior pairs."""
    dcfg = cfg["dynamics"]
    label, omega, H, E = _solve(cfg)
    rep = uniform_fit(E, cfg["boundary_margin"], cfg["floor"])
    margin = rep.boundary_margin
    pairs = interior_pairs(E.box, int(dcfg["pairs"]), margin, int(dcfg["max_distance"]), int(dcfg["seed"]))
    fit = dynamical_decay(
        E, pairs, cfg["floor"], n_times=int(dcfg["times"]), t_max=float(dcfg["t_max"]), seed=int(dcfg["seed"])
    )
    if _wants(cfg, "plot"):
        with np.errstate(divide="ignore"):
            reports.write_plot_data(out / "dynamics_logK.dat", fit.distances, np.log(fit.kernel), "distance", "log_K")
    passed = (
        fit.bound_violations == 0
        and fit.amplitude_violations == 0
        and fit.diag_error <= 1e-10
        and fit.r_dyn >= rep.uniform_rate / 2
    )
    result = {"ule_rate": rep.uniform_rate, "ule_prefactor": rep.uniform_prefactor, **fit.to_dict()}
    _write(cfg, out, "dynamics", passed, result)
    return passed


@main.command()
@_command
def hull(cfg: RunConfig, out: Path) -> bool:
    """Localization constants across hull points, and exact phase stability on a period torus."""
    hier = cfg.hierarchy()
    points = cfg.hull_points()
    survey = hull_ule_survey(
        hier,
        [p for _, p in points],
        cfg.box(),
        cfg["epsilon"],
        cfg["level"],
        labels=[label for label, _ in points],
        boundary_margin=cfg["boundary_margin"],
        floor=cfg["floor"],
    )
    pk = int(cfg["phase"]["level"])
    period = hier.n(pk)
    translates = [tuple(int(x) for x in np.unravel_index(i, period)) for i in range(math.prod(period))]
    phase = phase_stability(hier, pk, translates, float(cfg["phase"]["epsilon"]), cfg["floor"])
    if _wants(cfg, "csv"):
        reports.write_csv(out / "hull_ule.csv", ["label", "C", "r"], [[r["label"], repr(r["C"]), repr(r["r"])] for r in survey.ule_table])
    passed = survey.pooled_violations == 0 and phase.spectra_deviation <= 1e-9 and phase.translation_exactness <= 1e-8
    _write(cfg, out, "hull", passed, {"survey": survey.to_dict(), "phase_stability": phase.to_dict()})
    return passed


@main.command()
@_command
def sweep(cfg: RunConfig, out: Path) -> bool:
    """Uniform decay rate against log(1/epsilon)."""
    label, omega = cfg.hull_points()[0]
    table = rate_vs_epsilon(
        omega,
        cfg.box(),
        cfg["epsilon_list"],
        boundary=cfg["boundary"],
        level=cfg["level"],
        boundary_margin=cfg["boundary_margin"],
        floor=cfg["floor"],
    )
    if _wants(cfg, "csv"):
        reports.write_csv(
            out / "sweep.csv",
            ["epsilon", "log_inv_epsilon", "r", "C"],
            [[repr(r[h]) for h in ("epsilon", "log_inv_epsilon", "r", "C")] for r in table.rows],
        )
    if _wants(cfg, "plot"):
        reports.write_plot_data(
            out / "sweep_r_vs_loginveps.dat",
            [r["log_inv_epsilon"] for r in table.rows],
            [r["r"] for r in table.rows],
            "log_inv_epsilon",
            "r",
        )
    lo, hi = cfg["sweep"]["slope_window"]
    passed = table.increasing and lo <= table.slope <= hi
    _write(cfg, out, "sweep", passed, {**table.to_dict(), "slope_window": [lo, hi]})
    return passed


@main.command()
@_command
def report(cfg: RunConfig, out: Path) -> bool:
    """Summarize every report in the output directory."""
    summary = {}
    for path in sorted(out.glob("*.json")):
        if path.name == "summary.json":
            continue
        doc = reports.read_json(path)
        if isinstance(doc, dict) and "command" in doc:
            summary[doc["command"]] = doc["passed"]
            click.echo(f"{doc['command']:<12} {'PASS' if doc['passed'] else 'FAIL'}")
    if not summary:
        raise ConfigError(f"no reports found in {out}")
    passed = all(summary.values())
    reports.write_json(out / "summary.json", reports.envelope("report", cfg.to_dict(), cfg.seeds(), passed, summary))
    return passed


if __name__ == "__main__":
    sys.exit(main())
