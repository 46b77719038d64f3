"""Batch command-line front end.

Subcommands evaluate bounds over parameter sweeps, run Monte Carlo
simulation trials, locate critical read lengths by bisection, tabulate
confusion exponents, benchmark block denoisers, and run the exact
bridging estimator. Output is CSV (schema tagged `#poolseq-limits v1`)
plus optional JSON summaries. Runs are deterministic for a fixed seed
regardless of worker count.

Exit codes: 0 success, 2 malformed configuration, 3 capacity refusal,
4 empty region (critical-l target unreachable).
"""

from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import click
import numpy as np

from ._util import bisect_decreasing, format_g, wilson_interval
from .core import (CapacityError, FixedBiallelic, FixedEta, ModelConfig,
                   RandomStream, ValidationError)
from .denoise import DenoiseBlock, ml_denoise, spectral_denoise
from .exact_bridging import estimate_bridging
from .noiseless_bounds import (VARIANT_ASYMPTOTIC, assembly_bounds,
                               bridging_bounds, coverage_bounds)
from .noisy_bounds import (SegmentationPlan, den_ml_upper, exponent_closed,
                           exponent_table, noisy_upper_ml,
                           noisy_upper_spectral)
from .pipeline import (estimate_trial_bytes, run_noiseless_trial,
                       run_noisy_trial)

SCHEMA_TAG = "#poolseq-limits v1"

EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_EMPTY_REGION = 4

_INT_KEYS = {"G", "M", "trials", "seed"}
_FLOAT_KEYS = {"p", "L", "lambda", "eta", "maf", "eps", "D", "d", "c_const"}
_STR_KEYS = {"nu_min_mode"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


class ConfigError(Exception):
    pass


def _parse_value(key: str, raw: str, where: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse value {raw!r} for key {key!r}")


def load_config_file(path: str) -> dict:
    params: dict = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ConfigError(f"{path}: {e}")
    for ln, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{ln}: expected KEY=VALUE, got {line.strip()!r}")
        key, raw = (t.strip() for t in stripped.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
        params[key] = _parse_value(key, raw, f"{path}:{ln}")
    return params


def apply_overrides(params: dict, overrides: tuple[str, ...]) -> dict:
    out = dict(params)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected KEY=VALUE")
        key, raw = (t.strip() for t in item.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"override {item!r}: unknown key {key!r}")
        out[key] = _parse_value(key, raw, f"override {item!r}")
    return out


def build_model(params: dict, need_L: bool = True) -> ModelConfig:
    for key in ("G", "M", "p", "lambda"):
        if key not in params:
            raise ConfigError(f"missing required key {key!r}")
    if need_L and "L" not in params:
        raise ConfigError("missing required key 'L'")
    if ("eta" in params) == ("maf" in params):
        raise ConfigError("exactly one of 'eta' or 'maf' must be given")
    law = FixedEta(params["eta"]) if "eta" in params \
        else FixedBiallelic(params["maf"])
    try:
        return ModelConfig(G=params["G"], M=params["M"], p=params["p"],
                           L=params.get("L", 1.0), lam=params["lambda"],
                           law=law, eps=params.get("eps", 0.0))
    except ValidationError as e:
        raise ConfigError(str(e))


def parse_sweeps(specs: tuple[str, ...]) -> list[tuple[str, np.ndarray]]:
    axes = []
    for spec in specs:
        try:
            name, rest = spec.split("=", 1)
            parts = rest.split(":")
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            scale = parts[3] if len(parts) > 3 else "linear"
        except (ValueError, IndexError):
            raise ConfigError(
                f"sweep {spec!r}: expected NAME=MIN:MAX:COUNT[:log]")
        name = name.strip()
        if name not in _ALL_KEYS:
            raise ConfigError(f"sweep {spec!r}: unknown parameter {name!r}")
        if count < 1:
            raise ConfigError(f"sweep {spec!r}: count must be >= 1")
        if scale == "log":
            vals = np.geomspace(lo, hi, count)
        elif scale == "linear":
            vals = np.linspace(lo, hi, count)
        else:
            raise ConfigError(f"sweep {spec!r}: scale must be linear or log")
        if name in _INT_KEYS:
            vals = np.unique(np.round(vals).astype(int))
        axes.append((name, vals))
    return axes


def _grid(axes: list[tuple[str, np.ndarray]]):
    if not axes:
        yield {}
        return
    name, vals = axes[0]
    for v in vals:
        for rest in _grid(axes[1:]):
            out = {name: v.item() if hasattr(v, "item") else v}
            out.update(rest)
            yield out


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def write_csv(path: str, fieldnames: list[str], rows: list[dict]) -> None:
    fh, close = _open_out(path)
    try:
        fh.write(SCHEMA_TAG + "\n")
        fh.write(",".join(fieldnames) + "\n")
        for row in rows:
            fh.write(",".join(format_g(row.get(f, "")) for f in fieldnames) + "\n")
    finally:
        if close:
            fh.close()


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Pooled-sequencing assembly bounds and Monte Carlo validation."""


_common = [
    click.option("--config", "-c", "config_path", type=click.Path(), default=None,
                 help="Flat KEY=VALUE config file."),
    click.option("--set", "-O", "overrides", multiple=True,
                 help="Override or supply a config key, KEY=VALUE."),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


def _load_params(config_path, overrides) -> dict:
    params = load_config_file(config_path) if config_path else {}
    return apply_overrides(params, overrides)


def _echo_params(params: dict) -> dict:
    row = {}
    for key in sorted(_ALL_KEYS):
        row[key] = params.get(key, "")
    return row


@main.command()
@common_options
@click.option("--sweep", "sweeps", multiple=True,
              help="Sweep axis NAME=MIN:MAX:COUNT[:log]; may repeat.")
@click.option("--out", default="-", help="CSV output path or - for stdout.")
def bounds(config_path, overrides, sweeps, out):
    """Evaluate analytic bounds at one point or over a sweep grid."""
    try:
        base = _load_params(config_path, overrides)
        axes = parse_sweeps(sweeps)
        rows = []
        for point in _grid(axes):
            params = dict(base)
            params.update(point)
            config = build_model(params)
            row = _echo_params(params)
            cov = coverage_bounds(config.G, config.p, config.lam, config.L,
                                  config.M)
            asm = assembly_bounds(config)
            asm_a = assembly_bounds(config, VARIANT_ASYMPTOTIC) \
                if config.lam > 0 else None
            row.update({
                "esc_lower": cov.lower, "esc_upper": cov.upper,
                "e_lower": asm.lower, "e_upper": asm.upper,
            })
            if config.M >= 2:
                br = bridging_bounds(config.M, config.G, config.p, config.eta,
                                     config.lam, config.L)
                row.update({"eb_lower": br.lower, "eb_upper": br.upper,
                            "eb_degenerate": int(br.degenerate)})
            if asm_a is not None:
                row.update({"e_lower_asym": asm_a.lower,
                            "e_upper_asym": asm_a.upper})
            if config.eps > 0.0:
                if "D" in params and "d" in params:
                    plan = SegmentationPlan(D=params["D"], d=params["d"])
                else:
                    plan = None
                ml_val, ml_plan = noisy_upper_ml(config, plan)
                sd_val, sd_plan = noisy_upper_spectral(
                    config, plan, mode=params.get("nu_min_mode", "average_case"),
                    c_const=params.get("c_const", 1.0))
                row.update({"en_ml_upper": ml_val, "en_ml_D": ml_plan.D,
                            "en_ml_d": ml_plan.d, "en_sd_upper": sd_val,
                            "en_sd_D": sd_plan.D, "en_sd_d": sd_plan.d})
            rows.append(row)
        fieldnames = sorted({k for r in rows for k in r},
                            key=lambda k: (k not in _ALL_KEYS, k))
        write_csv(out, fieldnames, rows)
    except (ConfigError, ValidationError) as e:
        _fail(EXIT_CONFIG, str(e))
    except CapacityError as e:
        _fail(EXIT_CAPACITY, str(e))


def _simulate_one(args) -> dict:
    params, seed, trial, denoiser = args
    config = build_model(params)
    stream = RandomStream(seed).child(trial, "trial")
    if config.eps > 0.0:
        plan = SegmentationPlan(D=params["D"], d=params["d"])
        res = run_noisy_trial(config, plan, stream, denoiser,
                              params.get("nu_min_mode", "average_case"))
    else:
        res = run_noiseless_trial(config, stream)
    row = {"trial": trial}
    for name in ("coverage_fail", "bridging_fail", "greedy_fail", "disc_fail",
                 "denoise_fail", "stitch_fail"):
        v = getattr(res, name)
        row[name] = "" if v is None else int(v)
    row["success"] = int(res.success)
    return row


@main.command()
@common_options
@click.option("--trials", type=int, default=None, help="Trial count.")
@click.option("--seed", type=int, default=None, help="Root seed.")
@click.option("--workers", type=int, default=1, help="Worker processes.")
@click.option("--denoiser", type=click.Choice(["ml", "spectral"]), default="ml")
@click.option("--mem-cap-mb", type=int, default=1024,
              help="Refuse trials whose estimated footprint exceeds this.")
@click.option("--out", default="-", help="Per-trial CSV path or - for stdout.")
@click.option("--json", "as_json", is_flag=True, help="JSON summary on stdout.")
def simulate(config_path, overrides, trials, seed, workers, denoiser,
             mem_cap_mb, out, as_json):
    """Run Monte Carlo assembly trials and summarize failure rates."""
    try:
        params = _load_params(config_path, overrides)
        if trials is None:
            trials = int(params.get("trials", 0))
        if seed is None:
            seed = int(params.get("seed", 0))
        config = build_model(params)
        if config.eps > 0.0 and not ("D" in params and "d" in params):
            raise ConfigError("noisy simulation needs D and d")
        est = estimate_trial_bytes(config)
        if est > mem_cap_mb * 1024 * 1024:
            _fail(EXIT_CAPACITY,
                  f"estimated {est / 1e6:.0f} MB per trial exceeds the cap; "
                  f"reduce G, lambda, or p, or raise --mem-cap-mb")
        jobs = [(params, seed, t, denoiser) for t in range(trials)]
        if workers > 1 and trials > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_simulate_one, jobs,
                                     chunksize=max(1, trials // (workers * 4))))
        else:
            rows = [_simulate_one(j) for j in jobs]
        rows.sort(key=lambda r: r["trial"])
        fieldnames = ["trial", "coverage_fail", "bridging_fail", "greedy_fail",
                      "disc_fail", "denoise_fail", "stitch_fail", "success"]
        echo = _echo_params(params)
        for row in rows:
            row.update(echo)
        fieldnames = sorted(_ALL_KEYS) + fieldnames
        write_csv(out, fieldnames, rows)
        summary = {"trials": trials, "seed": seed}
        for flag in ("coverage_fail", "bridging_fail", "greedy_fail",
                     "disc_fail", "denoise_fail", "stitch_fail", "success"):
            vals = [r[flag] for r in rows if r[flag] != ""]
            if vals:
                k = int(sum(vals))
                lo, hi = wilson_interval(k, len(vals))
                summary[flag] = {"count": k, "rate": k / len(vals),
                                 "ci95": [lo, hi]}
        if as_json:
            click.echo(json.dumps(summary, sort_keys=True))
        else:
            for key, val in summary.items():
                click.echo(f"{key}: {val}")
    except (ConfigError, ValidationError) as e:
        _fail(EXIT_CONFIG, str(e))
    except CapacityError as e:
        _fail(EXIT_CAPACITY, str(e))


_BOUND_CHOICES = ["assembly-upper", "assembly-lower", "assembly-upper-asym",
                  "coverage-upper", "bridging-upper", "ml-upper",
                  "spectral-upper"]


def _bound_at_length(name: str, params: dict):
    def f(L: float) -> float:
        p2 = dict(params)
        p2["L"] = L
        config = build_model(p2)
        if name == "assembly-upper":
            return assembly_bounds(config).upper
        if name == "assembly-lower":
            return assembly_bounds(config).lower
        if name == "assembly-upper-asym":
            return assembly_bounds(config, VARIANT_ASYMPTOTIC).upper
        if name == "coverage-upper":
            return coverage_bounds(config.G, config.p, config.lam, L,
                                   config.M).upper
        if name == "bridging-upper":
            return bridging_bounds(config.M, config.G, config.p, config.eta,
                                   config.lam, L).upper
        if name == "ml-upper":
            return noisy_upper_ml(config)[0]
        if name == "spectral-upper":
            return noisy_upper_spectral(
                config, mode=params.get("nu_min_mode", "average_case"),
                c_const=params.get("c_const", 1.0))[0]
        raise ConfigError(f"unknown bound {name!r}")
    return f


@main.command("critical-l")
@common_options
@click.option("--target", type=float, required=True, help="Target error rate.")
@click.option("--bound", type=click.Choice(_BOUND_CHOICES), required=True)
@click.option("--l-min", type=float, default=1.0)
@click.option("--l-max", type=float, default=1e7)
@click.option("--json", "as_json", is_flag=True)
def critical_l(config_path, overrides, target, bound, l_min, l_max, as_json):
    """Bisect for the smallest read length meeting a target error rate."""
    try:
        params = _load_params(config_path, overrides)
        f = _bound_at_length(bound, params)
        if f(l_min) < f(l_max):
            raise ConfigError("bound is not non-increasing on the bracket")
        value, iters = bisect_decreasing(f, target, l_min, l_max)
        if value is None:
            if as_json:
                click.echo(json.dumps({"region": "empty", "bound": bound,
                                       "target": target,
                                       "bracket": [l_min, l_max]}))
            else:
                click.echo(f"region empty: {bound} stays above {target} "
                           f"on [{l_min}, {l_max}]")
            sys.exit(EXIT_EMPTY_REGION)
        result = {"bound": bound, "target": target, "critical_L": value,
                  "bracket": [l_min, l_max], "iterations": iters}
        if as_json:
            click.echo(json.dumps(result, sort_keys=True))
        else:
            for key, val in result.items():
                click.echo(f"{key}: {val}")
    except (ConfigError, ValidationError) as e:
        _fail(EXIT_CONFIG, str(e))
    except CapacityError as e:
        _fail(EXIT_CAPACITY, str(e))


@main.command()
@click.option("--m", "m_individuals", type=int, required=True)
@click.option("--kappa", type=int, required=True)
@click.option("--eps", "eps_list", required=True,
              help="Comma-separated flip probabilities.")
@click.option("--out", default="-")
def exponent(m_individuals, kappa, eps_list, out):
    """Tabulate confusion exponents by hypothesis distance."""
    try:
        eps_values = [float(t) for t in eps_list.split(",") if t.strip()]
    except ValueError:
        _fail(EXIT_CONFIG, f"cannot parse eps list {eps_list!r}")
    rows = []
    try:
        for eps in eps_values:
            tbl = exponent_table(m_individuals, kappa, eps)
            closed = exponent_closed(m_individuals, eps)
            for i, d_i in enumerate(tbl.values, start=1):
                rows.append({"M": m_individuals, "kappa": kappa, "eps": eps,
                             "i": i, "exponent": d_i, "d1_closed": closed})
        write_csv(out, ["M", "kappa", "eps", "i", "exponent", "d1_closed"], rows)
    except CapacityError as e:
        _fail(EXIT_CAPACITY, str(e))
    except ValidationError as e:
        _fail(EXIT_CONFIG, str(e))


@main.command("denoise-bench")
@click.option("--m", "m_individuals", type=int, default=2)
@click.option("--kappa", type=int, required=True)
@click.option("--eps", type=float, required=True)
@click.option("--coverage", type=float, required=True,
              help="Mean number of covering reads per block.")
@click.option("--blocks", type=int, default=1000)
@click.option("--algo", type=click.Choice(["ml", "spectral", "both"]),
              default="both")
@click.option("--eta", type=float, default=0.5,
              help="Match probability used to plant block contents.")
@click.option("--seed", type=int, default=0)
@click.option("--out", default="-")
def denoise_bench(m_individuals, kappa, eps, coverage, blocks, algo, eta, seed,
                  out):
    """Benchmark block denoisers against planted truths."""
    try:
        stream = RandomStream(seed)
        minor = 0.5 * (1.0 - math.sqrt(max(2.0 * eta - 1.0, 0.0)))
        rows = []
        algos = ["ml", "spectral"] if algo == "both" else [algo]
        for name in algos:
            fails = 0
            used = 0
            for b in range(blocks):
                gen = stream.child("bench", b).gen
                truth = _plant_truth(gen, m_individuals, kappa, minor)
                n = int(gen.poisson(coverage))
                if n == 0 or (name == "spectral" and n < m_individuals):
                    fails += 1
                    used += 1
                    continue
                who = gen.integers(0, m_individuals, size=n)
                obs = truth[who]
                flips = gen.random(obs.shape) < eps
                obs = np.where(flips, -obs, obs).astype(np.int8)
                block = DenoiseBlock(kappa=kappa, observations=obs,
                                     window=(0.0, 1.0), M=m_individuals,
                                     eps=eps)
                if name == "ml":
                    decoded = ml_denoise(block).matrix
                else:
                    decoded = spectral_denoise(block, mode="average_case",
                                               eta=eta,
                                               stream=stream.child("sp", b)
                                               ).sequences
                same = {r.tobytes() for r in decoded} == \
                    {r.tobytes() for r in truth}
                fails += int(not same)
                used += 1
            lo, hi = wilson_interval(fails, used)
            row = {"algo": name, "M": m_individuals, "kappa": kappa,
                   "eps": eps, "coverage": coverage, "blocks": used,
                   "failure_rate": fails / used, "ci_low": lo, "ci_high": hi}
            if name == "ml":
                row["ml_bound"] = den_ml_upper(
                    m_individuals, 1.0, coverage / m_individuals + 1.0, 1.0,
                    eps, kappa=kappa)
            rows.append(row)
        write_csv(out, ["algo", "M", "kappa", "eps", "coverage", "blocks",
                        "failure_rate", "ci_low", "ci_high", "ml_bound"], rows)
    except CapacityError as e:
        _fail(EXIT_CAPACITY, str(e))
    except ValidationError as e:
        _fail(EXIT_CONFIG, str(e))


def _plant_truth(gen, M: int, kappa: int, minor: float) -> np.ndarray:
    for _ in range(1000):
        truth = np.where(gen.random((M, kappa)) < minor, 1, -1).astype(np.int8)
        if len({r.tobytes() for r in truth}) == M:
            return truth
    raise CapacityError("could not plant distinct truths; raise kappa or minor")


@main.command("exact-bridging")
@common_options
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default="-")
def exact_bridging_cmd(config_path, overrides, trials, seed, out):
    """Estimate the two-individual bridging failure rate via the chain."""
    try:
        params = _load_params(config_path, overrides)
        if trials is None:
            trials = int(params.get("trials", 10000))
        if seed is None:
            seed = int(params.get("seed", 0))
        config = build_model(params)
        res = estimate_bridging(config.G, config.L, config.lam, config.p,
                                config.eta, trials, RandomStream(seed))
        row = _echo_params(params)
        row.update({"estimate": res.estimate, "ci_low": res.ci_low,
                    "ci_high": res.ci_high, "prefactor": res.prefactor,
                    "trials": res.trials, "failures": res.failures,
                    "mean_steps": res.mean_steps,
                    "capped_trials": res.capped_trials})
        write_csv(out, list(row.keys()), [row])
    except ConfigError as e:
        _fail(EXIT_CONFIG, str(e))
    except ValidationError as e:
        _fail(EXIT_CONFIG, str(e))


if __name__ == "__main__":
    main()
