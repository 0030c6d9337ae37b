"""Command-line interface.

Every command resolves its configuration as defaults < ``--config`` JSON file
< explicit flags, and writes CSV whose first line echoes the effective
configuration as a ``#`` comment.

Exit codes: 0 success, 2 configuration error, 3 validation failure,
4 numerical/runtime error.
"""
from __future__ import annotations

import io
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import analytic, chain
from .chain import ChainSpec, NoiseRealization
from .errors import ConfigError, ParameterOutOfRange, PulseChainError
from .montecarlo import estimate
from .noise import (MAX_EPS_TAU, MAX_EPS_THETA, MODES, TARGETS, IndependentUniformModel,
                    ThreeValueCorrelatedModel, sample_realization)

EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

SAFE_RANGES = (f"Safe noise ranges: eps_theta < pi/2 (~{MAX_EPS_THETA:.4f}), "
               f"eps_tau < pi/(4 sqrt 2) (~{MAX_EPS_TAU:.4f}).")


# --- config ------------------------------------------------------------------


def _float_list(value, name):
    if isinstance(value, str):
        items = [v for v in value.split(",") if v.strip()]
    elif isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [value]
    try:
        out = [float(v) for v in items]
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number or comma-separated numbers, got {value!r}")
    if not out:
        raise ConfigError(f"{name}: empty list")
    if not all(math.isfinite(v) for v in out):
        raise ConfigError(f"{name}: values must be finite")
    return out


def _int(value, name, minimum=0):
    try:
        iv = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if iv != value and not isinstance(value, str):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if iv < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}, got {iv}")
    return iv


def resolve_config(ctx: click.Context, defaults: dict, flags: dict) -> dict:
    """Merge defaults, the ``--config`` file and explicitly given flags."""
    cfg = dict(defaults)
    path = flags.pop("config", None)
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a flat JSON object")
        unknown = sorted(set(data) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(data)
    for name, value in flags.items():
        source = ctx.get_parameter_source(name)
        if source is not None and source.name in ("COMMANDLINE", "ENVIRONMENT"):
            cfg[name] = value
    return cfg


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class CsvOut:
    """Buffered CSV writer; the target file is only written once the command succeeds."""

    def __init__(self, cfg: dict, header: list[str]):
        self.buf = io.StringIO(newline="")
        self.buf.write("# config: " + json.dumps(cfg, sort_keys=True) + "\n")
        self.header = header

    def comment(self, text: str):
        self.buf.write("# " + text + "\n")

    def start(self):
        self.buf.write(",".join(self.header) + "\n")

    def row(self, *values):
        self.buf.write(",".join(_fmt(v) for v in values) + "\n")

    def finish(self, out: str | None):
        data = self.buf.getvalue()
        if out in (None, "-"):
            sys.stdout.write(data)
            sys.stdout.flush()
            return
        path = Path(out)
        tmp = path.with_name(path.name + ".partial")
        try:
            tmp.write_bytes(data.encode("utf-8"))
            tmp.replace(path)
        finally:
            if tmp.exists():
                tmp.unlink()


def _run(fn):
    """Translate library errors into exit codes."""
    try:
        fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except ParameterOutOfRange as exc:
        click.echo(f"config error: {exc}. {SAFE_RANGES}", err=True)
        sys.exit(EXIT_CONFIG)
    except PulseChainError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)


def _mc_options(f):
    f = click.option("--mc/--no-mc", "mc", default=None, help="Add Monte Carlo columns.")(f)
    f = click.option("--samples", type=int, help="Monte Carlo samples per point.")(f)
    f = click.option("--seed", type=int, help="Master seed.")(f)
    return f


def _common_options(f):
    f = click.option("--out", type=click.Path(dir_okay=False), help="Output CSV file (default stdout).")(f)
    f = click.option("--config", "config", type=click.Path(exists=True, dir_okay=False),
                     help="Flat JSON config; keys are flag names with underscores.")(f)
    return f


@click.group(epilog=SAFE_RANGES)
def main():
    """Pulsed perfect state transfer under noisy control."""


# --- sweep-length ------------------------------------------------------------

SWEEP_LENGTH_DEFAULTS = {
    "eps": [0.01, 0.02, 0.04, 0.06], "k_min": 0, "k_max": 400, "k_step": 1,
    "mc": False, "samples": 10_000, "seed": 0, "out": None,
}


@main.command("sweep-length", epilog=SAFE_RANGES)
@click.option("--eps", help="Comma-separated noise widths (eps_theta = eps_tau = eps).")
@click.option("--k-min", type=int, help="Smallest K.")
@click.option("--k-max", type=int, help="Largest K (N = 3K + 4).")
@click.option("--k-step", type=int, help="K increment.")
@_mc_options
@_common_options
@click.pass_context
def sweep_length(ctx, **flags):
    """Averaged fidelity against chain length for uniform independent noise."""
    def go():
        cfg = resolve_config(ctx, SWEEP_LENGTH_DEFAULTS, flags)
        eps_list = _float_list(cfg["eps"], "eps")
        k_min = _int(cfg["k_min"], "k_min")
        k_max = _int(cfg["k_max"], "k_max")
        k_step = _int(cfg["k_step"], "k_step", 1)
        samples = _int(cfg["samples"], "samples", 1)
        seed = _int(cfg["seed"], "seed")
        if k_max < k_min:
            raise ConfigError("k_max must be >= k_min")
        models = [IndependentUniformModel(e, e) for e in eps_list]
        cfg["eps"] = eps_list
        out = CsvOut(cfg, ["epsilon", "K", "N", "F_analytic", "F_mc", "se_mc",
                           "F_mc_tau_exact", "se_tau_exact"])
        out.start()
        for eps, model in zip(eps_list, models):
            for K in range(k_min, k_max + 1, k_step):
                spec = ChainSpec(K)
                F = analytic.independent_fidelity(eps, eps, K)
                mc = [None] * 4
                if cfg["mc"]:
                    a = estimate(spec, model, samples, seed, mode="delta-independent")
                    b = estimate(spec, model, samples, seed, mode="tau-exact")
                    mc = [a.mean_F, a.se_F, b.mean_F, b.se_F]
                out.row(eps, K, spec.N, F, *mc)
        out.finish(cfg["out"])
    _run(go)


# --- sweep-correlation -------------------------------------------------------

SWEEP_CORRELATION_DEFAULTS = {
    "eps": 0.5, "k": 100, "q": [0.0, 0.9, 1.0],
    "p": [round(0.01 * i, 10) for i in range(51)],
    "target": "pulses", "mc": False, "samples": 10_000, "seed": 0,
    "paper_verbatim": False, "out": None,
}


def _closed_value(target, eps, p, q, K, verbatim):
    if target == "pulses":
        if q == 1:
            return analytic.closed_form_q1_pulse(eps, p, K)
        if q == 0:
            return analytic.closed_form_q0_pulse(eps, p, K, paper_verbatim=verbatim)
        return None
    if q == 1:
        return analytic.printed_q1_time(eps, p) if verbatim else analytic.closed_form_q1_time(eps, p)
    return None


@main.command("sweep-correlation", epilog=SAFE_RANGES)
@click.option("--eps", type=float, help="Noise magnitude of the three-value process.")
@click.option("--k", type=int, help="Number of three-site sub-chains.")
@click.option("--q", help="Comma-separated correlation parameters.")
@click.option("--p", help="Comma-separated error probabilities in [0, 1/2].")
@click.option("--target", type=click.Choice(TARGETS), help="Noisy process.")
@click.option("--paper-verbatim", "paper_verbatim", is_flag=True, default=None,
              help="Report the printed closed forms in the F_closed column.")
@_mc_options
@_common_options
@click.pass_context
def sweep_correlation(ctx, **flags):
    """Averaged fidelity against error probability for one-step correlated noise."""
    def go():
        cfg = resolve_config(ctx, SWEEP_CORRELATION_DEFAULTS, flags)
        eps = _float_list(cfg["eps"], "eps")[0]
        K = _int(cfg["k"], "k")
        qs = _float_list(cfg["q"], "q")
        ps = _float_list(cfg["p"], "p")
        target = cfg["target"]
        if target not in TARGETS:
            raise ConfigError(f"target must be one of {TARGETS}")
        samples = _int(cfg["samples"], "samples", 1)
        seed = _int(cfg["seed"], "seed")
        models = {(q, p): ThreeValueCorrelatedModel(eps, p, q, target) for q in qs for p in ps}
        cfg.update(eps=eps, q=qs, p=ps)
        out = CsvOut(cfg, ["q", "p", "F_matrix", "F_mc", "se_mc", "F_closed"])
        out.start()
        spec = ChainSpec(K)
        for q in qs:
            for p in ps:
                F = analytic.correlated_fidelity(target, eps, p, q, K)
                mc = [None, None]
                if cfg["mc"]:
                    est = estimate(spec, models[q, p], samples, seed)
                    mc = [est.mean_F, est.se_F]
                closed = _closed_value(target, eps, p, q, K, bool(cfg["paper_verbatim"]))
                out.row(q, p, F, *mc, closed)
        out.finish(cfg["out"])
    _run(go)


# --- propagate ---------------------------------------------------------------

PROPAGATE_DEFAULTS = {
    "k": 2, "tau": None, "theta": None, "eps_theta": 0.0, "eps_tau": 0.0,
    "mode": "delta-independent", "eps": None, "p": None, "q": None, "target": "pulses",
    "seed": 0, "index": 0, "out": None,
}


@main.command("propagate", epilog=SAFE_RANGES)
@click.option("--k", type=int, help="Number of three-site sub-chains.")
@click.option("--tau", help="Explicit timing offsets (K+2 comma-separated values).")
@click.option("--theta", help="Explicit pulse angles (K+1 comma-separated values).")
@click.option("--eps-theta", "eps_theta", type=float, help="Uniform pulse-angle noise width.")
@click.option("--eps-tau", "eps_tau", type=float, help="Uniform timing noise width.")
@click.option("--mode", type=click.Choice(MODES), help="Timing sampling mode.")
@click.option("--eps", type=float, help="Three-value noise magnitude (with --p/--q).")
@click.option("--p", type=float, help="Three-value error probability.")
@click.option("--q", type=float, help="Three-value correlation.")
@click.option("--target", type=click.Choice(TARGETS), help="Three-value noisy process.")
@click.option("--seed", type=int, help="Master seed.")
@click.option("--index", type=int, help="Sample index within the seeded stream.")
@_common_options
@click.pass_context
def propagate_cmd(ctx, **flags):
    """Final amplitudes of one noise realization, per virtual site."""
    def go():
        cfg = resolve_config(ctx, PROPAGATE_DEFAULTS, flags)
        K = _int(cfg["k"], "k")
        spec = ChainSpec(K)
        seed = _int(cfg["seed"], "seed")
        index = _int(cfg["index"], "index")
        if cfg["tau"] is not None or cfg["theta"] is not None:
            tau = _float_list(cfg["tau"], "tau") if cfg["tau"] is not None else [0.0] * (K + 2)
            theta = _float_list(cfg["theta"], "theta") if cfg["theta"] is not None else [0.0] * (K + 1)
            if len(tau) != K + 2 or len(theta) != K + 1:
                raise ConfigError(f"K={K} needs {K + 2} tau and {K + 1} theta values")
            noise = NoiseRealization(tau, theta)
        elif cfg["p"] is not None or cfg["q"] is not None:
            model = ThreeValueCorrelatedModel(float(cfg["eps"] or 0.0), float(cfg["p"] or 0.0),
                                              float(cfg["q"] or 0.0), cfg["target"])
            noise = sample_realization(model, K, seed, index)
        else:
            model = IndependentUniformModel(float(cfg["eps_theta"]), float(cfg["eps_tau"]),
                                            cfg["mode"])
            noise = sample_realization(model, K, seed, index)
        final = chain.propagate(spec, noise, chain.basis_state(spec, 1))
        raw = complex(final[-1])
        corrected = chain.protocol_sign(spec) * raw
        result = {
            "tau": noise.tau.tolist(), "theta": noise.theta.tolist(),
            "psi_N_raw_re": raw.real, "psi_N_raw_im": raw.imag,
            "psi_N_corrected": corrected.real,
            "F_averaged": chain.input_averaged_fidelity(corrected),
            "norm": float(np.linalg.norm(final)),
        }
        out = CsvOut(cfg, ["site", "re", "im", "mod2"])
        out.comment("result: " + json.dumps(result, sort_keys=True))
        out.start()
        for i, a in enumerate(final, start=1):
            out.row(i, float(a.real), float(a.imag), float(abs(a) ** 2))
        out.finish(cfg["out"])
    _run(go)


# --- validate ----------------------------------------------------------------

VALIDATE_DEFAULTS = {"samples": 50_000, "seed": 0}


@main.command("validate")
@click.option("--samples", type=int, help="Monte Carlo samples for the statistical checks.")
@click.option("--seed", type=int, help="Master seed.")
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def validate(ctx, **flags):
    """Run the cross-validation suite; exit 0 iff every check passes."""
    from .validation import run_checks

    failed = []

    def go():
        cfg = resolve_config(ctx, VALIDATE_DEFAULTS, flags)
        results = run_checks(_int(cfg["samples"], "samples", 2), _int(cfg["seed"], "seed"))
        for r in results:
            click.echo(r.line())
            if not (r.passed or r.informational):
                failed.append(r)
        click.echo(f"{len(results) - len(failed)} of {len(results)} checks passed"
                   if failed else "all checks passed")
    _run(go)
    if failed:
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    main()
