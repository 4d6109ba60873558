"""Named experiment suites: each turns a config into a list of pass/fail criteria and data tables."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess
import time

import numpy as np

from . import __version__, _core, exact_laws as laws
from .experiments import (Criterion, ExperimentConfig, InsufficientTailMass, ReplicateError, _jsonable,
                          chi_square_gof, chi_square_independence, estimate_survival, fit_tail_exponent,
                          hill_estimate, ks_two_sample, run_chunks, stabilization)
from .ladder_walks import harris_check, lambda_of
from .samplers import RngStream, default_tables, sample_annealed_volumes

SUITES = ("laws_selfcheck", "samplers", "theta_tails", "volume_tails", "perimeter_tails",
          "identities", "ladder_laws", "annealed_volume", "harris")

# stream ids for suites that are not indexed by replicate
_STREAM_BASE = 1 << 40

PEEL_COLUMNS = ("replicate", "theta", "censored", "delta", "v_theta", "v_red_theta_minus1", "perim_lower")


# ---------------------------------------------------------------------------
# peeling batches


def _peel_chunk(lo, hi, seed, start, coloring, step_cap, vcap, extend, vstop, max_steps):
    cum = default_tables().cumulative
    out = np.zeros((hi - lo, 6), np.int64)
    for i in range(lo, hi):
        try:
            rng = RngStream(seed, i)
            r0, b0 = start
            if coloring == "random":
                r0, b0 = (2, 0) if rng.generator.random() < 0.5 else (1, 1)
            res = _core.run_peeling(rng.generator, cum, r0, b0, step_cap, vcap, extend, vstop, max_steps)
        except Exception as exc:  # surface the replicate that failed
            raise ReplicateError(i, repr(exc)) from exc
        out[i - lo, :5] = res[:5]
        out[i - lo, 5] = b0
    return out


_PEEL_MEMO: dict = {}


def peel_batch(config: ExperimentConfig, extend: bool = True) -> dict:
    """Run (or fetch from the in-process memo) the replicates described by ``config``.

    Columns: theta (steps run), flags, delta, v_theta, v_red (V_red at theta-1).
    """
    vstop = config.effective_volume_stop if extend else 0
    key = (config.master_seed, config.replicates, tuple(config.start), config.root_coloring,
           config.step_cap, config.volume_cap, extend, vstop, config.max_steps)
    if key in _PEEL_MEMO:
        return _PEEL_MEMO[key]
    parts = run_chunks(_peel_chunk, config.replicates, config.effective_workers,
                       args=(config.master_seed, tuple(config.start), config.root_coloring,
                             config.step_cap, config.volume_cap, extend, vstop, config.max_steps))
    arr = np.concatenate(parts)
    batch = {"theta": arr[:, 0], "flags": arr[:, 1], "delta": arr[:, 2],
             "v_theta": arr[:, 3], "v_red": arr[:, 4]}
    _PEEL_MEMO.clear()
    _PEEL_MEMO[key] = batch
    return batch


def peel_rows(batch: dict):
    theta, flags, delta = batch["theta"], batch["flags"], batch["delta"]
    for i in range(theta.shape[0]):
        perim = theta[i] - delta[i] + 1
        yield (i, int(theta[i]), int(flags[i]), int(delta[i]), int(batch["v_theta"][i]),
               int(batch["v_red"][i]), int(perim))


def _hill_or_none(values, threshold, censored):
    try:
        return hill_estimate(values, threshold, censored)
    except InsufficientTailMass:
        return None


def _slope_criterion(name, curve, fit_range, lo, hi, hill=None):
    # too little tail mass is a failed criterion, not a usage error
    try:
        fit = fit_tail_exponent(curve, fit_range)
    except InsufficientTailMass as exc:
        return Criterion(name, None, [lo, hi], "interval", False, {"error": str(exc), "counts": curve.counts})
    detail = {"fit": fit.to_dict(), "grid": curve.grid, "survival": curve.prob,
              "counts": curve.counts, "wilson_low": curve.lower, "wilson_high": curve.upper}
    if hill is not None:
        detail["hill"] = hill.to_dict()
    return Criterion(name, fit.slope, [lo, hi], "interval", lo <= fit.slope <= hi, detail)


def _theta_suite(config):
    batch = peel_batch(config, extend=False)
    cens = (batch["flags"] & _core.FLAG_THETA_CENSORED) > 0
    curve = estimate_survival(batch["theta"], config.grid.points(), cens)
    lo_x = config.grid.points()[config.fit_range[0]]
    hill = _hill_or_none(np.minimum(batch["theta"], config.step_cap), lo_x,
                         cens | (batch["theta"] >= config.step_cap))
    crit = [_slope_criterion("theta_tail_slope", curve, config.fit_range, -0.21, -0.13, hill)]
    return crit, {"survival_theta": curve}, batch


def _volume_suite(config):
    batch = peel_batch(config, extend=True)
    flags = batch["flags"]
    grid = config.volume_grid.points()
    crits, tables = [], {}
    for key, flag, name in (("v_red", _core.FLAG_VRED_CENSORED, "v_red_theta_minus1"),
                            ("v_theta", _core.FLAG_VTHETA_CENSORED, "v_theta")):
        cens = (flags & flag) > 0
        curve = estimate_survival(batch[key], grid, cens)
        lo_x = grid[config.volume_fit_range[0]]
        hill = _hill_or_none(batch[key], lo_x, cens)
        crits.append(_slope_criterion(f"{name}_tail_slope", curve, config.volume_fit_range, -0.18, -0.08, hill))
        tables[f"survival_{name}"] = curve
    exact = (flags & (_core.FLAG_VRED_CENSORED | _core.FLAG_VTHETA_CENSORED)) == 0
    bad = int((batch["v_red"][exact] > batch["v_theta"][exact]).sum())
    crits.append(Criterion("hull_sandwich_violations", bad, 0, 0, bad == 0,
                           {"uncensored_runs": int(exact.sum())}))
    return crits, tables, batch


def _perimeter_suite(config):
    batch = peel_batch(config, extend=True)
    theta, delta = batch["theta"], batch["delta"]
    unresolved = (batch["flags"] & _core.FLAG_THETA_CENSORED) > 0
    # unresolved runs: 1 + steps - (last fully red step so far), exact unless the
    # boundary turns fully red again before theta
    proxy = theta - delta + 1
    grid = config.grid.points()
    curve = estimate_survival(proxy, grid)
    low = estimate_survival(np.where(unresolved, 0, proxy), grid)
    crit = _slope_criterion("perimeter_proxy_slope", curve, config.fit_range, -0.22, -0.12)
    crit.detail["unresolved_fraction"] = float(unresolved.mean())
    crit.detail["survival_unresolved_as_zero"] = low.prob
    crit.detail["survival_unresolved_as_infinite"] = low.prob + unresolved.mean()
    return [crit], {"survival_perimeter": curve}, batch


# ---------------------------------------------------------------------------
# exact-law and sampler checks


def _laws_suite(config):
    crits = []
    worst = 0.0
    for n in range(2, 201):
        _, probs = laws.kernel_row(n)
        worst = max(worst, abs(math.fsum(probs) - 1.0))
    crits.append(Criterion("kernel_row_sums", worst, 0.0, 1e-10, worst <= 1e-10))

    worst = 0.0
    for x in range(1, 101):
        total = math.fsum(laws.step_pmf(k) * laws.harmonic_h(x + k) for k in range(-(x - 1), 2))
        worst = max(worst, abs(total - laws.harmonic_h(x)) / laws.harmonic_h(x))
    crits.append(Criterion("harmonicity", worst, 0.0, 1e-9, worst <= 1e-9))

    K = 10 ** 6
    ks = np.arange(1, K + 1, dtype=float)
    pm = np.array([laws.step_pmf(-k) for k in range(1, 1001)])
    # masses beyond 1000 from the exact tail differences
    tails = np.array([_core.step_tail(int(k)) for k in range(1001, K + 2)])
    pm = np.concatenate([pm, tails[:-1] - tails[1:]])
    partial = math.fsum(ks * pm)
    remainder = laws.step_first_moment_tail(K + 1)
    mean = laws.P_UP - partial - remainder
    crits.append(Criterion("zero_mean", abs(mean), 0.0, 1e-10, abs(mean) <= 1e-10,
                           {"truncation": K, "remainder": remainder}))

    forced = abs(laws.kernel_pmf(2, 3) - 1.0)
    crits.append(Criterion("forced_transition", forced, 0.0, 1e-12, forced <= 1e-12))

    worst = 0.0
    for d in range(2, 11):
        worst = max(worst, abs(boltzmann_mean_by_summation(d) / laws.boltzmann_volume_mean(d) - 1.0))
    crits.append(Criterion("boltzmann_mean", worst, 0.0, 1e-6, worst <= 1e-6))

    exact = [laws.lambda_pmf_exact(n) for n in range(1, 5)]
    from fractions import Fraction
    want = [Fraction(1, 2), Fraction(1, 8), Fraction(1, 16), Fraction(5, 128)]
    floats_ok = all(abs(laws.lambda_pmf(n) - float(w)) < 1e-15 for n, w in zip(range(1, 5), want))
    crits.append(Criterion("lambda_first_values", [str(x) for x in exact], [str(w) for w in want], 0,
                           exact == want and floats_ok))
    return crits, {}, None


def boltzmann_mean_by_summation(d: int, n_max: int = 10 ** 6) -> float:
    """sum n P(d, n) up to n_max plus an asymptotic remainder for the n^(-5/2) tail."""
    n = np.arange(n_max, dtype=float)
    a = 2.0 * d + 3.0 * n
    b = 2.0 * d + 2.0 * n
    log_ratio = (np.log(4.0 / 27.0) + np.log(a - 1) + np.log(a - 2) + np.log(a - 3)
                 - np.log(n + 1) - np.log(b) - np.log(b - 1))
    log_p0 = _core.log_boltzmann_pmf(d, 0)
    log_p = np.concatenate(([log_p0], log_p0 + np.cumsum(log_ratio)))
    p = np.exp(log_p)
    idx = np.arange(n_max + 1, dtype=float)
    partial = math.fsum(idx * p)
    # p(m) ~ p(N) (N/m)^(5/2) for m > N; sum of m^(-3/2) over m > N by Euler-Maclaurin
    N = float(n_max)
    tail_sum = 2.0 / math.sqrt(N) - 0.5 * N ** -1.5 + (1.5 / 12.0) * N ** -2.5
    return partial + p[-1] * N ** 2.5 * tail_sum


def _samplers_suite(config):
    cum = default_tables().cumulative
    draws = config.sampler_draws
    alpha = config.significance
    crits = []
    from .samplers import sample_boltzmann_volumes, sample_conditioned_steps, sample_steps

    rng = RngStream(config.master_seed, _STREAM_BASE + 1)
    x = sample_steps(rng, draws)
    kmax = 1000
    counts = [int((x == 1).sum())] + [int((x == -k).sum()) for k in range(1, kmax + 1)]
    counts.append(int((x < -kmax).sum()))
    probs = [laws.step_pmf(1)] + [laws.step_pmf(-k) for k in range(1, kmax + 1)] + [laws.step_tail(kmax + 1)]
    res = chi_square_gof(counts, probs)
    crits.append(Criterion("step_law_chi_square", res.pvalue, f"> {alpha}", alpha, res.pvalue > alpha,
                           {"statistic": res.statistic, "dof": res.dof}))

    for j, n in enumerate((2, 3, 5, 10, 50, 500)):
        rng = RngStream(config.master_seed, _STREAM_BASE + 10 + j)
        m = sample_conditioned_steps(rng, n, draws)
        if n == 2:
            ok = bool((m == 3).all())
            crits.append(Criterion("kernel_n2_forced", int((m != 3).sum()), 0, 0, ok))
            continue
        ms, probs = laws.kernel_row(n)
        counts = [int((m == t).sum()) for t in ms]
        probs = probs / probs.sum()
        res = chi_square_gof(counts, probs)
        crits.append(Criterion(f"kernel_n{n}_chi_square", res.pvalue, f"> {alpha}", alpha, res.pvalue > alpha,
                               {"statistic": res.statistic, "dof": res.dof}))

    for j, d in enumerate((2, 3, 5, 10)):
        rng = RngStream(config.master_seed, _STREAM_BASE + 20 + j)
        v = sample_boltzmann_volumes(rng, 1 - d, draws)
        law = laws.BoltzmannVolumeLaw(d)
        top = max(50, int(v.max()))
        top = min(top, 200_000)
        pm = law.pmf_array(top)
        counts = np.bincount(np.minimum(v, top + 1), minlength=top + 2)
        probs = np.concatenate([pm, [max(0.0, 1.0 - math.fsum(pm))]])
        probs = probs / probs.sum()
        res = chi_square_gof(counts, probs)
        crits.append(Criterion(f"boltzmann_d{d}_chi_square", res.pvalue, f"> {alpha}", alpha, res.pvalue > alpha,
                               {"statistic": res.statistic, "dof": res.dof}))
    return crits, {}, None


# ---------------------------------------------------------------------------
# ladder identities and appendices


def lambda_batch(config: ExperimentConfig, k_min: int = 5):
    rng = RngStream(config.master_seed, _STREAM_BASE + 100)
    runs = config.lambda_runs
    out = np.full((runs, config.lambda_cap, 7), np.nan)
    lengths = np.zeros(runs, np.int64)
    _core.lambda_runs(rng.generator, default_tables().cumulative, runs, config.lambda_cap,
                      k_min, float(config.time_cap), out, lengths)
    return out, lengths


def _identities_suite(config):
    alpha = config.significance
    quads, lengths = lambda_batch(config)
    runs = quads.shape[0]
    crits = []
    # the first five quadruples of every run are always drawn: an i.i.d. sample
    first = quads[:, :5, :].reshape(-1, 7)
    half = first.shape[0] // 2
    a, b = first[:half], first[half:]
    res = ks_two_sample(a[:, 0], b[:, 1])
    crits.append(Criterion("ks_T_vs_U", res.pvalue, f"> {alpha}", alpha, res.pvalue > alpha,
                           {"statistic": res.statistic, "samples": [half, first.shape[0] - half]}))
    res = ks_two_sample(a[:, 0] - a[:, 1], b[:, 1] - b[:, 0])
    crits.append(Criterion("ks_T_minus_U_symmetric", res.pvalue, f"> {alpha}", alpha, res.pvalue > alpha,
                           {"statistic": res.statistic}))
    ok = first[:, 6] == 0
    vol = first[:, 3] + first[:, 4]
    lt = ok & (first[:, 0] < first[:, 1])
    gt = ok & (first[:, 0] > first[:, 1])
    res = ks_two_sample(vol[lt], vol[gt])
    crits.append(Criterion("ks_volume_given_order", res.pvalue, f"> {alpha}", alpha, res.pvalue > alpha,
                           {"statistic": res.statistic, "sizes": [int(lt.sum()), int(gt.sum())]}))
    ties = int((first[:, 0] == first[:, 1]).sum())
    crits.append(Criterion("no_ties_T_U", ties, 0, 0, ties == 0))

    lam = lambda_of(np.nan_to_num(quads[:, :, 0], nan=0.0), np.nan_to_num(quads[:, :, 1], nan=0.0))
    cap = config.lambda_cap
    counts = [int((lam == n).sum()) for n in range(1, cap + 1)] + [int((lam == 0).sum())]
    probs = [laws.lambda_pmf(n) for n in range(1, cap + 1)] + [laws.lambda_survival(cap)]
    res = chi_square_gof(counts, probs)
    crits.append(Criterion("lambda_pmf_chi_square", res.pvalue, f"> {alpha}", alpha, res.pvalue > alpha,
                           {"statistic": res.statistic, "dof": res.dof, "counts": counts,
                            "expected": [p * runs for p in probs]}))

    bonf = alpha / 3
    for n in (1, 2, 5):
        s = quads[:, :n, 0].sum(axis=1) + quads[:, :n, 1].sum(axis=1)
        alive = (lam == 0) | (lam > n)
        edges = np.quantile(s, [0.2, 0.4, 0.6, 0.8])
        bins = np.searchsorted(edges, s, side="right")
        table = np.zeros((2, 5), np.int64)
        np.add.at(table, (alive.astype(int), bins), 1)
        res = chi_square_independence(table)
        crits.append(Criterion(f"independence_n{n}", res.pvalue, f"> {bonf}", bonf, res.pvalue > bonf,
                               {"statistic": res.statistic, "table": table}))
    return crits, {}, None


def _ladder_laws_suite(config):
    alpha = config.significance
    cum = default_tables().cumulative
    crits = []
    # H and L marginals: legs must be followed far enough that unfinished ones are rare
    legs = max(1, config.legs // 10)
    rng = RngStream(config.master_seed, _STREAM_BASE + 200)
    h = np.zeros(legs, np.int64)
    ln = np.zeros(legs, np.int64)
    unfinished = 0
    for i in range(legs):
        t, hh, ll, _, cens = _core.leg_down(rng.generator, cum, 1e7)
        h[i], ln[i] = hh, ll
        unfinished += cens
    done = h > 0
    kmax = 200
    for name, data, pmf in (("ladder_height", h[done], laws.ladder_height_pmf),
                            ("ladder_jump", ln[done], laws.ladder_jump_pmf)):
        counts = [int((data == k).sum()) for k in range(1, kmax + 1)] + [int((data > kmax).sum())]
        probs = [pmf(k) for k in range(1, kmax + 1)]
        probs.append(1.0 - math.fsum(probs))
        res = chi_square_gof(counts, probs)
        crits.append(Criterion(f"{name}_chi_square", res.pvalue, f"> {alpha}", alpha, res.pvalue > alpha,
                               {"statistic": res.statistic, "dof": res.dof, "legs": int(done.sum()),
                                "unfinished": int(unfinished)}))

    grid = config.grid.points()
    t_cap = 1.1 * grid.max()
    rng = RngStream(config.master_seed, _STREAM_BASE + 201)
    T = np.empty(config.legs)
    for i in range(config.legs):
        T[i] = _core.leg_down(rng.generator, cum, t_cap)[0]
    curve = estimate_survival(T, grid, T >= t_cap)
    st = stabilization(curve, 1.0 / 3.0)
    crits.append(Criterion("T_tail_stabilization", st["spread"], "< 0.25", 0.25, st["spread"] < 0.25,
                           {"scaled": st["scaled"], "grid": grid}))

    rng = RngStream(config.master_seed, _STREAM_BASE + 202)
    Tu = np.empty(config.up_legs)
    for i in range(config.up_legs):
        Tu[i] = _core.leg_up(rng.generator, cum, 1, t_cap)[0]
    curve = estimate_survival(Tu, grid, Tu >= t_cap)
    st = stabilization(curve, 2.0 / 3.0)
    crits.append(Criterion("T_up_tail_stabilization", st["spread"], "< 0.25", 0.25, st["spread"] < 0.25,
                           {"scaled": st["scaled"], "grid": grid}))
    return crits, {}, None


def _annealed_volume_suite(config):
    grid = config.volume_grid.points()
    limit = int(math.ceil(round(grid.max(), 6)))
    rng = RngStream(config.master_seed, _STREAM_BASE + 300)
    chunks = 10
    counts = np.zeros(grid.size, np.int64)
    per = config.annealed_draws // chunks
    total = 0
    for _ in range(chunks):
        y = sample_annealed_volumes(rng, per, limit)
        counts += estimate_survival(y, grid, y > limit).counts
        total += per
    scaled = counts / total * grid ** 0.75
    top = grid >= grid.max() / 10 * (1 - 1e-9)
    value = float(scaled[top].mean())
    target = laws.annealed_tail_constant()
    rel = value / target - 1.0
    crit = Criterion("annealed_tail_constant", value, target, 0.15, abs(rel) <= 0.15,
                     {"relative_error": rel, "scaled": scaled, "grid": grid, "draws": total})
    return [crit], {}, None


def _harris_suite(config):
    rng = RngStream(config.master_seed, _STREAM_BASE + 400)
    res = harris_check(rng, config.harris_walks)
    ok = res["diff"] >= -3 * res["se"]
    return [Criterion("harris_positive_correlation", res["diff"], ">= -3 se", 3 * res["se"], ok, res)], {}, None


_RUNNERS = {
    "laws_selfcheck": _laws_suite,
    "samplers": _samplers_suite,
    "theta_tails": _theta_suite,
    "volume_tails": _volume_suite,
    "perimeter_tails": _perimeter_suite,
    "identities": _identities_suite,
    "ladder_laws": _ladder_laws_suite,
    "annealed_volume": _annealed_volume_suite,
    "harris": _harris_suite,
}


# ---------------------------------------------------------------------------
# reports


def describe_version() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--tags"], cwd=here, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def report_json(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2, sort_keys=False) + "\n"


def curve_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid", "count", "survival", "wilson_low", "wilson_high"])
    for row in curve.rows():
        w.writerow([f"{row[0]:.17g}", row[1], f"{row[2]:.17g}", f"{row[3]:.17g}", f"{row[4]:.17g}"])
    return buf.getvalue()


def peel_csv(batch: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PEEL_COLUMNS)
    for row in peel_rows(batch):
        w.writerow(row)
    return buf.getvalue()


def run_suite(config: ExperimentConfig, suite_id: str, out_dir: str | None = None) -> dict:
    if suite_id not in _RUNNERS:
        raise ValueError(f"unknown suite {suite_id!r}; choose from {', '.join(SUITES)}")
    t0 = time.time()
    crits, tables, batch = _RUNNERS[suite_id](config)
    wall = time.time() - t0
    report = {
        "config": config.to_dict(),
        "suite": suite_id,
        "version": describe_version(),
        "criteria": [c.to_dict() for c in crits],
        "pass": all(c.passed for c in crits),
        "timing": {"wall_seconds": wall},
    }
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"{suite_id}.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report_json(report))
        for name, curve in tables.items():
            with open(os.path.join(out_dir, f"{suite_id}_{name}.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(curve_csv(curve))
        if batch is not None and "theta" in batch:
            with open(os.path.join(out_dir, f"{suite_id}_replicates.csv"), "w", encoding="utf-8",
                      newline="\n") as fh:
                fh.write(peel_csv(batch))
    return report
