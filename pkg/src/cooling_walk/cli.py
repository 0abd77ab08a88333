"""The ``cooling-walk`` experiment runner.

Usage: ``cooling-walk <subcommand> --config FILE [--set key=value]... --out DIR``

Every artifact embeds the fully resolved configuration and its content hash.
Reruns with the same config and seed are byte-identical apart from the
timestamp header field, for any worker count.  Exit codes: 0 ok, 2 config
error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import fluctuations as fl
from . import kesten
from .alpha import Regime, classify, moment_report, recurrent_two_point, s_transient_two_point, speed
from .config import ConfigError, ExperimentConfig
from .environment import EnvironmentWindow, potential, smallest_valley, WindowExhausted
from .rng import derive_seed
from .stats import EmpiricalSample, ks_critical, ks_distance, moments_with_se
from .walk import (
    annealed_mean,
    expected_hit_time_reflected,
    hit_prob,
    mc_hit_frequencies,
    simulate_rwcre,
    simulate_rwre,
    write_positions,
)
from .cooling import build_recurrence_breaker


def _meta(command: str, cfg: ExperimentConfig) -> dict:
    return {
        "command": command,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config_hash": cfg.content_hash(),
        "config": cfg.canonical_text().splitlines(),
    }


def _write_json(outdir: Path, name: str, command: str, cfg: ExperimentConfig, result) -> None:
    payload = {"meta": _meta(command, cfg), "result": result}
    (outdir / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(outdir: Path, name: str, command: str, cfg: ExperimentConfig, header, rows) -> None:
    # RFC-4180 quoting, '.' decimal, UTF-8, LF line endings
    buf = io.StringIO()
    meta = _meta(command, cfg)
    buf.write(f"# cooling-walk {command}\n")
    buf.write(f"# timestamp = {meta['timestamp']}\n")
    buf.write(f"# config_hash = {meta['config_hash']}\n")
    for line in meta["config"]:
        buf.write(f"# config: {line}\n")
    writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    (outdir / name).write_bytes(buf.getvalue().encode("utf-8"))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_classify(cfg: ExperimentConfig, outdir: Path) -> None:
    alpha = cfg.alpha()
    report = moment_report(alpha).as_dict()
    report["alpha"] = alpha.serialize()
    report["ellipticity"] = alpha.ellipticity
    _write_json(outdir, "classify.json", "classify", cfg, report)


def _cmd_kesten_table(cfg: ExperimentConfig, outdir: Path) -> None:
    lo = cfg.get_float("grid_min", -8.0)
    hi = cfg.get_float("grid_max", 8.0)
    points = cfg.get_int("grid_points", 401)
    xs = np.linspace(lo, hi, points)
    dens = kesten.density(xs)
    cdfs = kesten.cdf(xs)
    rows = [(float(x), float(d), float(c)) for x, d, c in zip(xs, dens, cdfs)]
    _write_csv(outdir, "kesten_table.csv", "kesten-table", cfg, ["x", "density", "cdf"], rows)


def _cmd_simulate(cfg: ExperimentConfig, outdir: Path) -> None:
    mode = cfg.get_str("mode", "rwcre")
    n = cfg.get_int("n")
    replicas = cfg.get_int("replicas")
    seed = cfg.seed()
    workers = cfg.workers()
    if mode == "rwre":
        alpha = cfg.alpha()
        env_seed = cfg.get_int("env_seed", derive_seed(seed, 0, 0xE17))
        start = cfg.get_int("start", 0)
        env = EnvironmentWindow.sample(alpha, env_seed, start - n, start + n)
        batch = simulate_rwre(env, start, n, replicas, seed, workers)
    elif mode == "rwcre":
        batch = simulate_rwcre(cfg.alpha(), cfg.cooling(), n, replicas, seed, workers)
    else:
        raise ConfigError(f"mode must be rwre or rwcre, got {mode!r}")
    _write_json(outdir, "simulate.json", "simulate", cfg, batch.summary())
    write_positions(outdir / "positions.bin", batch.final_positions)


def _scaled_law_cdf(prediction: fl.RegimePrediction, alpha, n: int, cmap):
    """(scaling divisor, limit-law cdf callable) for a family prediction.

    The divisor uses the Kesten-correct normalization log^2(.)/sigma0^2 (see
    the sinai target note below).
    """
    sig0 = alpha.sigma0_sq
    if prediction.scaling.reference == "tau_ell":
        loc = cmap.locate(n)
        ref = loc.tau_prev if loc.boundary_time else n
    else:
        ref = n
    divisor = float(n) ** prediction.scaling.n_power * math.log(ref) ** prediction.scaling.log_power / sig0
    if prediction.regime == "gaussian":
        from scipy.special import ndtr

        pre = prediction.prefactor

        def cdf(x):
            return ndtr(np.asarray(x) / pre)

        return divisor, cdf
    if prediction.regime == "mixture":
        law = kesten.MixtureLaw(kesten.lambda_q(prediction.q), include_gaussian=False)
        pre = prediction.prefactor

        def cdf(x):
            return law.cdf(np.asarray(x) / pre)

        return divisor, cdf
    if prediction.regime == "pure_kesten":

        def cdf(x):
            return kesten.cdf(np.asarray(x))

        return divisor, cdf
    raise ConfigError(f"no scaled law for regime {prediction.regime}")


def _cmd_limit_check(cfg: ExperimentConfig, outdir: Path) -> None:
    alpha = cfg.alpha()
    n = cfg.get_int("n")
    replicas = cfg.get_int("replicas")
    seed = cfg.seed()
    workers = cfg.workers()
    target = cfg.get_str("target", "auto")
    slack = cfg.get_float("ks_slack", 1.5)
    cmap = cfg.cooling()
    batch = simulate_rwcre(alpha, cmap, n, replicas, seed, workers)
    x = batch.final_positions.astype(np.float64)
    mom = moments_with_se(x)
    if target == "auto":
        target = "family" if classify(alpha) is Regime.RECURRENT else "normal_empirical"
    if target == "family":
        pred = fl.predict_scaling(cmap, alpha)
        divisor, law_cdf = _scaled_law_cdf(pred, alpha, n, cmap)
        centered = x - x.mean() if pred.regime == "gaussian" else x
        scaled = centered / divisor
        law_name = f"{pred.regime} (prefactor {pred.prefactor:.6g})"
    elif target == "normal_empirical":
        from scipy.special import ndtr

        scaled = (x - x.mean()) / x.std(ddof=1)
        law_cdf = ndtr
        law_name = "standard normal (empirical standardization)"
    elif target == "speed_centered":
        from scipy.special import ndtr

        v = speed(alpha)
        scaled = (x - v * n) / x.std(ddof=1)
        law_cdf = ndtr
        law_name = "standard normal (speed centering)"
    elif target == "sinai":
        # Kesten-correct normalization: sigma0^2 Z_n / log^2 n -> V
        scaled = x * alpha.sigma0_sq / math.log(n) ** 2
        law_cdf = kesten.cdf
        law_name = "sinai-kesten"
    else:
        raise ConfigError(f"unknown target {target!r}")
    ks = ks_distance(EmpiricalSample.from_values(scaled), law_cdf)
    crit = ks_critical(replicas, slack)
    smom = moments_with_se(scaled)
    _write_json(
        outdir,
        "limit_check.json",
        "limit-check",
        cfg,
        {
            "n": n,
            "replicas": replicas,
            "target": target,
            "law": law_name,
            "ks": ks,
            "ks_critical": crit,
            "ks_pass": bool(ks <= crit),
            "raw_moments": mom.__dict__,
            "scaled_moments": smom.__dict__,
        },
    )


def _cmd_regime(cfg: ExperimentConfig, outdir: Path) -> None:
    alpha = cfg.alpha()
    cmap = cfg.cooling()
    horizon = cfg.get_int("horizon", 25)
    budgets = fl.Budgets(
        dp_cap=cfg.get_int("dp_cap", fl.Budgets.dp_cap),
        dp_envs=cfg.get_int("dp_envs", fl.Budgets.dp_envs),
        mc_replicas=cfg.get_int("mc_replicas", fl.Budgets.mc_replicas),
        mc_step_budget=cfg.get_int("mc_budget", fl.Budgets.mc_step_budget),
    )
    pred = fl.classify_regime(alpha, cmap, horizon, budgets, cfg.seed(), cfg.workers())
    diag = pred.diagnostics
    rows = [
        (k + 1, lam, se, m)
        for k, (lam, se, m) in enumerate(
            zip(diag["lambda_sequence"], diag["lambda_ses"], diag["methods"])
        )
    ]
    _write_csv(outdir, "lambda_sequence.csv", "regime", cfg, ["k", "lambda", "se", "method"], rows)
    _write_json(
        outdir,
        "regime.json",
        "regime",
        cfg,
        {
            "regime": pred.regime,
            "q": pred.q,
            "q_hat": diag["q_hat"],
            "q_se": diag["q_se"],
            "trend_p_down": diag["trend_p_down"],
            "trend_p_up": diag["trend_p_up"],
            "window": diag["window"],
            "horizon": horizon,
            "scaling": pred.scaling.describe(),
            "prefactor": pred.prefactor,
        },
    )


def _cmd_scan_mean(cfg: ExperimentConfig, outdir: Path) -> None:
    fam_value = cfg.values.get("family", "recurrent")
    if isinstance(fam_value, str) and fam_value == "recurrent":
        family = recurrent_two_point
    else:
        from .config import Call

        if not (isinstance(fam_value, Call) and fam_value.name == "s_transient"):
            raise ConfigError("family must be `recurrent` or `s_transient(s=...)`")
        s = float(fam_value.kwargs["s"])
        family = lambda x: s_transient_two_point(x, s)  # noqa: E731
    x_grid = cfg.get_float_list("x_grid")
    n_grid = cfg.get_int_list("n_grid")
    env_samples = cfg.get_int("env_samples", 2000)
    margin = cfg.get_float("margin", 5.0)
    report = fl.scan_mean_sign(
        family, x_grid, n_grid, env_samples, cfg.seed(), margin, cfg.workers()
    )
    rows = [
        (r.x, r.n, r.estimate, r.se, r.reference, r.verdict) for r in report.rows
    ]
    _write_csv(
        outdir,
        "scan_mean.csv",
        "scan-mean",
        cfg,
        ["x", "n", "estimate", "se", "reference", "verdict"],
        rows,
    )
    _write_json(
        outdir,
        "scan_mean.json",
        "scan-mean",
        cfg,
        {
            "positive_counts": {str(k): v for k, v in report.positive_counts.items()},
            "negative_counts": {str(k): v for k, v in report.negative_counts.items()},
        },
    )


def _cmd_mean_decay(cfg: ExperimentConfig, outdir: Path) -> None:
    alpha = cfg.alpha()
    n_grid = cfg.get_int_list("n_grid", [2**k for k in range(6, 13)])
    gamma = cfg.get_float("gamma", 0.6)
    env_samples = cfg.get_int("env_samples", 2000)
    report = fl.check_mean_decay(alpha, n_grid, gamma, env_samples, cfg.seed(), cfg.workers())
    rows = [(r.n, r.estimate, r.se, r.scaled_mean, r.ratio) for r in report.rows]
    _write_csv(
        outdir,
        "mean_decay.csv",
        "mean-decay",
        cfg,
        ["n", "estimate", "se", "scaled_mean", "ratio"],
        rows,
    )
    _write_json(
        outdir,
        "mean_decay.json",
        "mean-decay",
        cfg,
        {
            "gamma": gamma,
            "fitted_c": report.fitted_c,
            "trend_p_upward": report.trend.p_upward,
            "no_upward_trend": bool(report.trend.p_upward > 0.05),
            "envelope": report.envelope.tolist(),
        },
    )


def _cmd_break_recurrence(cfg: ExperimentConfig, outdir: Path) -> None:
    alpha = cfg.alpha()
    seed = cfg.seed()
    workers = cfg.workers()
    env_samples = cfg.get_int("env_samples", 20000)
    replicas = cfg.get_int("replicas", 400)

    def oracle(n: int, oracle_seed: int):
        return annealed_mean(alpha, n, env_samples, oracle_seed, workers)

    record = build_recurrence_breaker(
        alpha,
        oracle,
        cfg.get_int_list("n_grid", [1, 2, 4]),
        margin=cfg.get_float("margin", 5.0),
        max_blocks=cfg.get_int("max_blocks", 2),
        seed=seed,
        last_block_count=cfg.get_int("last_block_count", 500),
    )
    cmap = record.cooling_map
    block_rows = []
    tau_end = 0
    block_end_stats = []
    for j, blk in enumerate(record.blocks):
        tau_end += blk.length * blk.count
        batch = simulate_rwcre(alpha, cmap, tau_end, replicas, derive_seed(seed, 0, 0x51B), workers)
        x = batch.final_positions.astype(np.float64)
        mean = float(x.mean())
        se = float(x.std(ddof=1) / math.sqrt(replicas))
        block_end_stats.append(
            {
                "block": j + 1,
                "tau": tau_end,
                "mean": mean,
                "se": se,
                "ci99_low": mean - 2.576 * se,
                "ci99_high": mean + 2.576 * se,
            }
        )
        block_rows.append((j + 1, tau_end, mean, se))
    _write_csv(outdir, "block_ends.csv", "break-recurrence", cfg, ["block", "tau", "mean", "se"], block_rows)
    _write_json(
        outdir,
        "break_recurrence.json",
        "break-recurrence",
        cfg,
        {
            "blocks": [
                {
                    "length": b.length,
                    "count": b.count,
                    "mean_estimate": b.mean_estimate,
                    "mean_se": b.mean_se,
                }
                for b in record.blocks
            ],
            "margin": record.margin,
            "rejected_grid_points": [list(r) for r in record.rejected],
            "block_end_stats": block_end_stats,
            "serialized_map": cmap.family.serialize(),
        },
    )


def _cmd_valley(cfg: ExperimentConfig, outdir: Path) -> None:
    alpha = cfg.alpha()
    if classify(alpha) is not Regime.RECURRENT:
        raise ConfigError("valley diagnostic needs a recurrent alpha")
    n = cfg.get_int("n", 10**5)
    env_count = cfg.get_int("env_count", 500)
    seed = cfg.seed()
    workers = cfg.workers()
    sig0 = alpha.sigma0_sq
    log_n = math.log(n)
    scale = log_n * log_n / sig0
    # raw depth log n: barriers deeper than this cost more than n steps
    threshold = log_n
    rows = []
    zs = np.empty(env_count)
    bs = np.empty(env_count)
    for i in range(env_count):
        env_seed = derive_seed(seed, i, 0xE44)
        half = max(int(4 * scale), 64)
        while True:
            env = EnvironmentWindow.sample(alpha, env_seed, -half, half)
            try:
                valley = smallest_valley(potential(env), threshold)
                break
            except WindowExhausted:
                half *= 2
                if half > n:
                    half = n
                    valley = smallest_valley(potential(env), threshold)
                    break
        batch = simulate_rwre(
            env.covering(-n, n), 0, n, 1, derive_seed(seed, i, 0x3A1), workers=1
        )
        z = int(batch.final_positions[0])
        zs[i] = z / scale
        bs[i] = valley.b / scale
        rows.append((i, valley.a, valley.b, valley.c, z, zs[i], bs[i]))
    corr = float(np.corrcoef(zs, bs)[0, 1])
    _write_csv(
        outdir,
        "valley.csv",
        "valley",
        cfg,
        ["env", "a", "b", "c", "z_n", "z_scaled", "b_scaled"],
        rows,
    )
    _write_json(
        outdir,
        "valley.json",
        "valley",
        cfg,
        {"n": n, "env_count": env_count, "correlation": corr},
    )


def _hit_oracle(env: EnvironmentWindow, x: int, a: int, b: int) -> float:
    size = b - a + 1
    mat = np.zeros((size, size))
    rhs = np.zeros(size)
    mat[0, 0] = 1.0
    rhs[0] = 1.0
    mat[-1, -1] = 1.0
    for s in range(a + 1, b):
        i = s - a
        w = env.omega(s)
        mat[i, i] = 1.0
        mat[i, i + 1] = -w
        mat[i, i - 1] = -(1.0 - w)
    return float(np.linalg.solve(mat, rhs)[x - a])


def _reflected_oracle(env: EnvironmentWindow, a: int, b: int, start: int) -> float:
    size = b - a + 1
    mat = np.zeros((size, size))
    rhs = np.ones(size)
    mat[-1, -1] = 1.0
    rhs[-1] = 0.0
    mat[0, 0] = 1.0
    mat[0, 1] = -1.0
    for s in range(a + 1, b):
        i = s - a
        w = env.omega(s)
        mat[i, i] = 1.0
        mat[i, i + 1] = -w
        mat[i, i - 1] = -(1.0 - w)
    return float(np.linalg.solve(mat, rhs)[start - a])


def _cmd_hit_check(cfg: ExperimentConfig, outdir: Path) -> None:
    alpha = cfg.alpha()
    seed = cfg.seed()
    env_count = cfg.get_int("env_count", 200)
    width_cap = cfg.get_int("width_max", 20)
    mc_envs = cfg.get_int("mc_envs", 10)
    mc_replicas = cfg.get_int("mc_replicas", 20000)
    max_p_err = 0.0
    max_t_err = 0.0
    for i in range(env_count):
        env_seed = derive_seed(seed, i, 0x417)
        lo = -(2 + (derive_seed(seed, i, 1) % (width_cap // 2 - 1)))
        hi = 2 + (derive_seed(seed, i, 2) % (width_cap // 2 - 1))
        env = EnvironmentWindow.sample(alpha, env_seed, lo, hi)
        p = hit_prob(env, 0, lo, hi)
        max_p_err = max(max_p_err, abs(p - _hit_oracle(env, 0, lo, hi)))
        t = expected_hit_time_reflected(env, lo, hi, 0)
        max_t_err = max(
            max_t_err, abs(t - _reflected_oracle(env, lo, hi, 0)) / max(1.0, abs(t))
        )
    z_scores = []
    for i in range(mc_envs):
        env_seed = derive_seed(seed, i, 0x417)
        lo = -(2 + (derive_seed(seed, i, 1) % (width_cap // 2 - 1)))
        hi = 2 + (derive_seed(seed, i, 2) % (width_cap // 2 - 1))
        env = EnvironmentWindow.sample(alpha, env_seed, lo, hi)
        p = hit_prob(env, 0, lo, hi)
        freq = mc_hit_frequencies(env, 0, lo, hi, mc_replicas, derive_seed(seed, i, 3))
        se = math.sqrt(max(p * (1 - p), 1e-12) / mc_replicas)
        z_scores.append((freq - p) / se)
    _write_json(
        outdir,
        "hit_check.json",
        "hit-check",
        cfg,
        {
            "env_count": env_count,
            "max_hit_prob_error": max_p_err,
            "max_reflected_time_rel_error": max_t_err,
            "mc_z_scores": z_scores,
            "mc_all_within_3se": bool(all(abs(z) <= 3.0 for z in z_scores)),
        },
    )


_COMMANDS = {
    "classify": _cmd_classify,
    "kesten-table": _cmd_kesten_table,
    "simulate": _cmd_simulate,
    "limit-check": _cmd_limit_check,
    "regime": _cmd_regime,
    "scan-mean": _cmd_scan_mean,
    "mean-decay": _cmd_mean_decay,
    "break-recurrence": _cmd_break_recurrence,
    "valley": _cmd_valley,
    "hit-check": _cmd_hit_check,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cooling-walk", description=__doc__)
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="config file (flat key = value lines)")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config, args.set)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    try:
        _COMMANDS[args.command](cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures surface with module context
        print(f"runtime error [{type(exc).__module__}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
