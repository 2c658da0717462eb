"""Command-line interface: sweeps, figure presets and convention adjudication.

Subcommands::

    udnbeam sweep --config run.yaml [--out sweep.csv]
    udnbeam fig2 | fig3 | fig4 [--out DIR]
    udnbeam adjudicate [--config run.yaml] [--out report.md]
    udnbeam validate-config --config run.yaml

Exit codes: 0 success, 2 configuration error, 3 quadrature non-convergence,
4 infeasible beam adaptation.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import json
import math
import os
from pathlib import Path
import sys
import tempfile

import numpy as np

from . import __version__, _accel
from .analytic import ase, ase_simplified, coverage_probability, coverage_simplified
from .asymptotics import (AdaptationSchedule, MuConvention, TailConvention, adapted_ase_slope,
                          adapted_coverage_exact, adapted_coverage_limit, dense_coverage_bound_terms)
from .config import DEFAULT_PARAMS, RunConfig, SWEEP_VARS
from .errors import (ConfigError, DomainError, InfeasibleAdaptationError, NonConvergenceError,
                     PreconditionError)
from .model import (PER_KM2, BeamPattern, DualSlopeModel, NetworkParams, default_params,
                    gamma_moment)
from .montecarlo import SimConfig, simulate
from . import svg

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_INFEASIBLE = 4

CSV_COLUMNS = ("sweep_var", "sweep_value", "coverage_analytic", "coverage_err", "ase_analytic",
               "coverage_mc", "coverage_mc_se", "ase_mc", "ase_mc_se")

ADJUDICATION_MIN_TRIALS = 100_000


@dataclass(frozen=True)
class Row:
    """One sweep point; ASE values are in bits/s/Hz/km^2."""

    sweep_value: float
    coverage: float
    coverage_err: float
    ase: float
    coverage_mc: float = math.nan
    coverage_mc_se: float = math.nan
    ase_mc: float = math.nan
    ase_mc_se: float = math.nan


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _sim_config(cfg):
    try:
        return cfg.sim_config()
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from None


def evaluate_point(cfg, value):
    """Analytic and (if enabled) Monte Carlo values at one grid value."""
    params = cfg.network_params(value)
    if cfg.scenario == "corollary":
        cov = coverage_simplified(params)
        cov_err = 0.0
        a = ase_simplified(params).value
    else:
        c = coverage_probability(params)
        cov, cov_err = c.value, c.est_abs_error
        a = ase(params).value
    row = Row(float(value), cov, cov_err, a / PER_KM2)
    if not cfg.sim["enabled"]:
        return row
    try:
        res = simulate(params, _sim_config(cfg))
    except ValueError as exc:
        raise ConfigError(f"sim at {cfg.sweep_var}={value:g}: {exc}") from None
    pc = res.coverage(params.threshold)
    pa = res.ase(params.threshold)
    return Row(row.sweep_value, cov, cov_err, row.ase, pc.mean, pc.std_error,
               pa.mean / PER_KM2, pa.std_error / PER_KM2)


def run_grid(cfg):
    """Rows in grid order; points go to a thread pool when ``sim.workers > 1``."""
    workers = int(cfg.sim["workers"])
    if workers > 1 and len(cfg.grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda v: evaluate_point(cfg, v), cfg.grid))
    return [evaluate_point(cfg, v) for v in cfg.grid]


def _g(v):
    return format(float(v), ".12g")


def _provenance(cfg):
    resolved = cfg.resolved()
    # the output path is not part of the result
    resolved.pop("output")
    lines = [
        f"udnbeam {__version__} sweep",
        f"backend: {_accel.backend()}",
        f"scenario: {cfg.scenario}",
        "units: sweep_value in " + (SWEEP_VARS[cfg.sweep_var] or "linear units")
        + "; ase in bits/s/Hz/km^2",
        "config: " + json.dumps(resolved, sort_keys=True),
    ]
    lines += _scenario_notes(cfg)
    return [f"# {line}" for line in lines]


def _scenario_notes(cfg):
    if cfg.scenario != "adapted" or cfg.params["beta1"] != 0:
        return []
    params = cfg.network_params(cfg.grid[-1])
    K = cfg.schedule().K
    conv = MuConvention(cfg.conventions["mu"])
    lim = adapted_coverage_limit(K, params, conv)
    notes = [f"dense coverage limit ({conv.value} fading convention): {_g(lim.value)}",
             f"dense coverage limit without small-threshold expansion: {_g(adapted_coverage_exact(K, params))}"]
    try:
        # the slope formula holds a random fade; use its mean
        h = 1.0 / params.mu
        slope = adapted_ase_slope(K, params, h, conv)
        notes.append(f"dense ASE slope per BS with h = 1/mu = {_g(h)}: {_g(slope.value)}")
    except DomainError as exc:
        notes.append(f"dense ASE slope per BS with h = 1/mu = {_g(h)}: undefined ({exc})")
    return notes


def format_csv(cfg, rows):
    lines = _provenance(cfg)
    lines.append(",".join(CSV_COLUMNS))
    for r in rows:
        lines.append(",".join([cfg.sweep_var, _g(r.sweep_value), _g(r.coverage), _g(r.coverage_err),
                               _g(r.ase), _g(r.coverage_mc), _g(r.coverage_mc_se), _g(r.ase_mc),
                               _g(r.ase_mc_se)]))
    return "\n".join(lines) + "\n"


def render_plot(cfg, rows, title):
    x = np.array([r.sweep_value for r in rows])
    cov = svg.Panel(f"Coverage: {title}", "coverage probability",
                    [svg.Series("analytic", x, np.array([r.coverage for r in rows]))])
    ase_panel = svg.Panel(f"ASE: {title}", "ASE (bits/s/Hz/km^2)",
                          [svg.Series("analytic", x, np.array([r.ase for r in rows]))])
    if cfg.sim["enabled"]:
        cov.series.append(svg.Series("Monte Carlo", x, np.array([r.coverage_mc for r in rows]),
                                     np.array([r.coverage_mc_se for r in rows]), markers=True))
        ase_panel.series.append(svg.Series("Monte Carlo", x, np.array([r.ase_mc for r in rows]),
                                           np.array([r.ase_mc_se for r in rows]), markers=True))
    log_x = cfg.sweep_var == "density_per_km2"
    unit = SWEEP_VARS[cfg.sweep_var]
    return svg.render([cov, ase_panel], cfg.sweep_var + (f" ({unit})" if unit else ""), log_x)


def write_atomic(files):
    """Write every ``{path: text}`` to a temporary file, then rename all of them."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
            staged.append((tmp, path))
            with os.fdopen(fd, "w", newline="\n") as fh:
                fh.write(text)
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def run_sweep(cfg, title=None):
    """Evaluate the grid and write the CSV (and SVG if enabled); returns the rows."""
    rows = run_grid(cfg)
    for r in rows:
        if not (0.0 <= r.coverage <= 1.0 and r.ase >= 0.0):
            raise NonConvergenceError(f"out-of-range result at {r.sweep_value:g}", r.coverage, r.coverage_err)
    csv_path = Path(cfg.output["csv"])
    files = {csv_path: format_csv(cfg, rows)}
    if cfg.output["plot"]:
        files[csv_path.with_suffix(".svg")] = render_plot(cfg, rows, title or cfg.scenario)
    write_atomic(files)
    return rows


# ---------------------------------------------------------------------------
# Figure presets
# ---------------------------------------------------------------------------

FIG2_DENSITIES = tuple(float(v) for v in np.logspace(0, 6, 13))
FIG3_ALIGNMENT = tuple(round(0.05 * k, 10) for k in range(1, 21))
FIG4_DENSITIES = tuple(float(v) for v in np.logspace(0, math.log10(9e6), 15))

_NOISE_FREE = {"snr_at_d0_db": None, "side_bs_db": None, "side_ue_db": None, "beta1": 0.0}


def preset_configs(name, out_dir, sim):
    """``[(title, RunConfig)]`` for a figure preset, writing into ``out_dir``."""
    out_dir = Path(out_dir)
    runs = []

    def make(stem, title, **kwargs):
        cfg = RunConfig(sim=dict(sim), output={"csv": str(out_dir / f"{stem}.csv"), "plot": True},
                        **kwargs)
        runs.append((title, cfg))

    if name == "fig2":
        for beta1 in (1, 2, 3):
            make(f"fig2_beta1_{beta1}", f"beta1 = {beta1}", scenario="general",
                 sweep_var="density_per_km2", grid=FIG2_DENSITIES,
                 params={**DEFAULT_PARAMS, "beta1": float(beta1)})
    elif name == "fig3":
        for t_db in (0, 7):
            for d0 in (5, 10):
                make(f"fig3_T{t_db}dB_d0_{d0}m", f"T = {t_db} dB, d0 = {d0} m", scenario="corollary",
                     sweep_var="alignment_probability", grid=FIG3_ALIGNMENT,
                     params={**DEFAULT_PARAMS, **_NOISE_FREE, "threshold_db": float(t_db),
                             "d0_m": float(d0), "density_per_km2": 1000.0})
    elif name == "fig4":
        base = {**DEFAULT_PARAMS, **_NOISE_FREE}
        make("fig4_fixed_beams", "fixed beams", scenario="corollary", sweep_var="density_per_km2",
             grid=FIG4_DENSITIES, params=base)
        make("fig4_adapted_beams", "adapted beams, K = 1", scenario="adapted",
             sweep_var="density_per_km2", grid=FIG4_DENSITIES, params=base,
             adaptation={"K_per_km2": 1.0, "front_back_ratio_db": None})
    else:
        raise ConfigError(f"unknown preset {name!r}")
    return runs


# ---------------------------------------------------------------------------
# Adjudication
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    toggle: str
    values: dict
    mc_mean: float
    mc_se: float
    inside: tuple
    verdict: str
    notes: tuple = ()


def _verdict(values, mean, se):
    inside = tuple(k for k, v in values.items() if abs(v - mean) <= 3.0 * se)
    if len(inside) == 1:
        return inside, inside[0]
    return inside, "inconclusive" if inside else "neither"


def mu_experiment(mu=2.0, threshold=0.005, exponent=0.7, density_ratio=10.0):
    """Adapted-beam setup where the two fading conventions predict different coverage.

    ``K`` is chosen so the convention that ignores ``mu`` predicts
    ``exp(-exponent)``.  A small threshold keeps the first-order limit close
    to the exact one.
    """
    model = DualSlopeModel(alpha0=1.0, beta1=0.0, beta2=4.0, d0=10.0)
    K = exponent / (2.0 * math.pi * threshold * gamma_moment(model) / model.alpha0)
    schedule = AdaptationSchedule(K)
    density = density_ratio * K
    beams = schedule.beams(density, 100.0, 10.0)
    params = NetworkParams(density=density, mu=float(mu), sigma2=0.0, threshold=threshold,
                           model=model, beams=beams)
    return K, params


def adjudicate_mu(mu, sim):
    """Compare the two fading conventions of the adapted dense limit against Monte Carlo."""
    K, params = mu_experiment(mu)
    values = {c.value: adapted_coverage_limit(K, params, c).value for c in MuConvention}
    est = simulate(params, sim).coverage(params.threshold)
    inside, verdict = _verdict(values, est.mean, est.std_error)
    notes = (f"K = {K / PER_KM2:.6g} BS/km^2, density = {params.density / PER_KM2:.6g} BS/km^2, "
             f"T = {params.threshold:g}, mu = {mu:g}, beta1 = 0, no side lobes, no noise",
             f"limit without small-threshold expansion: {adapted_coverage_exact(K, params):.6f}",
             f"analytic coverage at this density: {coverage_probability(params).value:.6f}")
    return Verdict("mu convention", values, est.mean, est.std_error, inside, verdict, notes)


def adjudicate_tail(sim, density_per_km2=1e4, beta1=2.0):
    """Check which far-serving term of the dense bound really bounds its piece.

    The far-serving term must bound ``P[SINR > T, r0 >= d0]``; Monte Carlo
    estimates that joint probability from the same snapshots as coverage.
    """
    params = default_params(beta1, density_per_km2)
    res = simulate(params, sim)
    hit = (res.sinr > params.threshold) & (res.serving_distance >= params.model.d0)
    cov = res.coverage(params.threshold)
    n = res.trials
    p_mean = float(np.mean(hit))
    p_se = math.sqrt(max(p_mean * (1 - p_mean), 0.0) / (n - 1)) if n > 1 else 0.0
    values = {}
    valid = []
    notes = [f"density = {density_per_km2:g} BS/km^2, beta1 = {beta1:g}, reference parameters",
             f"Monte Carlo coverage: {cov.mean:.6f} +/- {cov.std_error:.6f}",
             f"Monte Carlo P[SINR > T, r0 >= d0]: {p_mean:.6f} +/- {p_se:.6f}"]
    for c in TailConvention:
        terms = dense_coverage_bound_terms(params, c)
        values[c.value] = terms.tail
        tail_ok = terms.tail >= p_mean - 3.0 * p_se
        full_ok = terms.raw >= cov.mean - 3.0 * cov.std_error
        if tail_ok and full_ok:
            valid.append(c.value)
        notes.append(f"{c.value}: far term {terms.tail:.6g} ({'bounds' if tail_ok else 'does not bound'} "
                     f"its piece), full bound {terms.raw:.6g} (clamped {terms.value:.6g})")
    verdict = valid[0] if len(valid) == 1 else ("inconclusive" if valid else "neither")
    return Verdict("dense bound far term", values, p_mean, p_se, tuple(valid), verdict, tuple(notes))


def format_report(verdicts, sim):
    lines = ["# Convention adjudication", "",
             f"udnbeam {__version__}, backend {_accel.backend()}, {sim.trials} trials, seed {sim.seed}", ""]
    for v in verdicts:
        lines += [f"## {v.toggle}", "",
                  f"Monte Carlo: {v.mc_mean:.6f} +/- {3 * v.mc_se:.6f} (3 sigma)", ""]
        lines += ["| convention | analytic value | consistent |", "|---|---|---|"]
        for k, val in v.values.items():
            lines.append(f"| {k} | {val:.6g} | {'yes' if k in v.inside else 'no'} |")
        lines += ["", f"Verdict: **{v.verdict}**", ""]
        lines += [f"- {n}" for n in v.notes]
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="udnbeam", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"udnbeam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", type=Path, required=config_required, help="YAML run configuration")
        p.add_argument("--out", type=Path, help="output file (sweep, adjudicate) or directory (presets)")
        p.add_argument("--trials", type=_positive_int, help="Monte Carlo trials per point")
        p.add_argument("--seed", type=_u64, help="Monte Carlo seed")
        p.add_argument("--no-mc", action="store_true", help="skip Monte Carlo")
        p.add_argument("--workers", type=_positive_int, help="grid points evaluated in parallel")
        p.add_argument("--toggle-mu-convention", choices=[c.value for c in MuConvention])
        p.add_argument("--toggle-thm3-d0", choices=[c.value for c in TailConvention])

    common(sub.add_parser("sweep", help="run a configured sweep"), config_required=True)
    for name, text in (("fig2", "coverage and ASE versus density for beta1 = 1, 2, 3"),
                       ("fig3", "interference-limited case versus alignment probability"),
                       ("fig4", "fixed versus adapted beams in the dense regime")):
        common(sub.add_parser(name, help=text))
    common(sub.add_parser("adjudicate", help="check the ambiguous conventions against Monte Carlo"))
    v = sub.add_parser("validate-config", help="check a configuration file and print it resolved")
    v.add_argument("--config", type=Path, required=True)
    return parser


def _overrides(args):
    return dict(trials=args.trials, seed=args.seed, no_mc=args.no_mc,
                mu_convention=args.toggle_mu_convention, thm3_tail=args.toggle_thm3_d0,
                workers=args.workers)


def _cmd_sweep(args):
    cfg = RunConfig.load(args.config).with_overrides(out=args.out, **_overrides(args))
    rows = run_sweep(cfg)
    print(f"wrote {len(rows)} rows to {cfg.output['csv']}")


def _cmd_preset(args):
    sim = {"enabled": True, "trials": 10_000, "seed": 0, "window_radius_m": None, "workers": 1}
    if args.config is not None:
        sim = RunConfig.load(args.config).sim
    out_dir = args.out if args.out is not None else Path(".")
    for title, cfg in preset_configs(args.command, out_dir, sim):
        cfg = cfg.with_overrides(**_overrides(args))
        run_sweep(cfg, title)
        print(f"wrote {cfg.output['csv']}")


def _cmd_adjudicate(args):
    cfg = RunConfig.load(args.config) if args.config is not None else RunConfig()
    cfg = cfg.with_overrides(**_overrides(args))
    if args.no_mc or not cfg.sim["enabled"]:
        raise ConfigError("sim.enabled: adjudication needs Monte Carlo")
    if cfg.sim["trials"] < ADJUDICATION_MIN_TRIALS:
        raise ConfigError(f"sim.trials: adjudication needs at least {ADJUDICATION_MIN_TRIALS} trials")
    mu = 2.0 if args.config is None else cfg.params["mu"]
    s = cfg.sim
    sim = SimConfig(trials=s["trials"], seed=s["seed"], workers=s["workers"])
    verdicts = [adjudicate_mu(mu, sim), adjudicate_tail(sim)]
    report = format_report(verdicts, sim)
    out = args.out if args.out is not None else Path("adjudication.md")
    write_atomic({out: report})
    for v in verdicts:
        print(f"{v.toggle}: {v.verdict}")
    print(f"wrote {out}")


def _cmd_validate(args):
    cfg = RunConfig.load(args.config)
    for value in cfg.grid:
        cfg.network_params(value)
    print(json.dumps(cfg.resolved(), indent=2, sort_keys=True))


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"sweep": _cmd_sweep, "fig2": _cmd_preset, "fig3": _cmd_preset, "fig4": _cmd_preset,
                "adjudicate": _cmd_adjudicate, "validate-config": _cmd_validate}
    try:
        handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleAdaptationError as exc:
        print(f"infeasible adaptation: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NonConvergenceError as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (DomainError, PreconditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
