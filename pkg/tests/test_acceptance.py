"""End-to-end acceptance criteria, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL ...`` line; the lines are also
collected and repeated in the pytest terminal summary.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import ks_2samp, poisson

from hashpop.cli import main as cli_main
from hashpop.fitting import gamma_kernel_values, initial_guess, lm_fit_gamma
from hashpop.model import (
    Constant,
    Degenerate,
    Discrete,
    EmpiricalSample,
    GammaKernel,
    NetworkParams,
    Tabulated,
    TimeSeries,
    degree_moments,
)
from hashpop.moments import asymptotic_moments, cumulative_intensity, mean_reads, variance_reads
from hashpop.pipeline import synthesize_dataset, validate
from hashpop.simulator import (
    ensemble_statistics,
    evolve_master_equation,
    replication_seed,
    simulate_events,
    simulate_micro,
)
from hashpop.special import lower_incomplete_gamma, stirling_gamma

RESULTS: dict[int, str] = {}


def record(number: int, ok: bool, detail: str):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def random_network(rng):
    mean = rng.uniform(1, 500)
    return NetworkParams(int(rng.integers(1, 10 ** 6)), mean, mean ** 2 * rng.uniform(1, 50))


def random_spec(rng, kind):
    if kind == 0:
        return Constant(rng.uniform(1e-4, 1))
    if kind == 1:
        return GammaKernel(rng.uniform(0.2, 30), rng.uniform(0.05, 20), rng.uniform(1e-4, 1))
    n = int(rng.integers(2, 12))
    times = np.concatenate(([0.0], np.sort(rng.uniform(0.1, 50, size=n - 1))))
    return Tabulated(tuple(times), tuple(rng.uniform(0, 1, size=n)))


def test_criterion_1_moment_ratio():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for i in range(100):
        params = random_network(rng)
        spec = random_spec(rng, i % 3)
        t = rng.uniform(0.01, spec.times[-1] if isinstance(spec, Tabulated) else 60)
        ratio = variance_reads(params, spec, t) / mean_reads(params, spec, t)
        target = params.mean_sq_followers / params.mean_followers
        worst = max(worst, abs(ratio / target - 1))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-12 and elapsed < 1, f"max rel err {worst:.2e} (tol 1e-12), {elapsed:.3f}s (< 1s)")


def quadrature_intensity(params, spec, t):
    a, b, c = spec.a, spec.b, spec.c
    peak = a * b
    pieces = [0.0] + [p for p in (0.5 * peak, peak, peak + b * math.sqrt(a)) if p < t] + [t]
    total = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        value, _ = quad(lambda s: float(gamma_kernel_values(np.array([s]), a, b, c)[0]), lo, hi,
                        epsabs=0.0, epsrel=1e-13, limit=400)
        total += value
    return params.n_users * total


def test_criterion_2_closed_form_vs_quadrature():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        params = random_network(rng)
        spec = random_spec(rng, 1)
        t = rng.uniform(0.05, 4) * spec.a * spec.b
        exact = quadrature_intensity(params, spec, t)
        worst = max(worst, abs(cumulative_intensity(params, spec, t) / exact - 1))
    elapsed = time.perf_counter() - start
    record(2, worst <= 1e-9 and elapsed < 5, f"max rel err {worst:.2e} (tol 1e-9), {elapsed:.2f}s (< 5s)")


def variance_standard_error(samples):
    """Large-sample SE of the unbiased variance, from the fourth central moment."""
    n = samples.shape[0]
    centered = samples - samples.mean(axis=0)
    m2 = (centered ** 2).mean(axis=0)
    m4 = (centered ** 4).mean(axis=0)
    return np.sqrt(np.maximum(m4 - (n - 3) / (n - 1) * m2 ** 2, 0.0) / n)


def test_criterion_3_three_way_consistency():
    dist = Discrete((1, 2, 3), (0.5, 0.3, 0.2))
    mom = degree_moments(dist)
    params = NetworkParams(50, mom.mean, mom.mean_sq)
    spec = GammaKernel(2.0, 1.0, 0.1)
    horizon, reps = 10.0, 10_000
    grid = np.linspace(1.0, horizon, 10)
    start = time.perf_counter()

    ens = ensemble_statistics(params, spec, dist, horizon, grid, reps, seed=7)
    mean, var = mean_reads(params, spec, grid), variance_reads(params, spec, grid)
    z_mean = np.abs(ens.sample_mean - mean) / ens.standard_error
    z_var = np.abs(ens.sample_var - var) / variance_standard_error(ens.samples)

    master = evolve_master_equation(params, spec, dist, 250, grid)
    master_err = float(np.max(np.abs(master.mean() / mean - 1)))

    dt = horizon / 1e4
    micro = np.array([simulate_micro(params, spec, dist, dt, horizon, replication_seed(1_000_000, r)).reads_at(horizon)
                      for r in range(reps)])
    ks = ks_2samp(micro, ens.samples[:, -1]).statistic
    elapsed = time.perf_counter() - start

    ok = z_mean.max() <= 3 and z_var.max() <= 3 and master_err <= 1e-6 and ks <= 0.02 and elapsed < 120
    record(3, ok, f"max |z| mean {z_mean.max():.2f}, var {z_var.max():.2f} (<= 3); "
                  f"master rel err {master_err:.1e} (<= 1e-6); KS {ks:.4f} (<= 0.02); {elapsed:.1f}s (< 120s)")


def test_criterion_4_poisson_special_case():
    rate = 0.7
    params = NetworkParams(3, 1.0, 1.0)
    start = time.perf_counter()
    times = np.array([1.0, 5.0, 10.0])
    grid = evolve_master_equation(params, Constant(rate), Degenerate(1), 80, times)
    tv = [0.5 * np.abs(grid.pmf[i] - poisson.pmf(grid.x_values, params.n_users * rate * t)).sum()
          + 0.5 * poisson.sf(grid.x_values[-1], params.n_users * rate * t)
          for i, t in enumerate(times)]
    elapsed = time.perf_counter() - start
    record(4, max(tv) <= 1e-6 and elapsed < 30,
           f"TV at t=1,5,10: {', '.join(f'{v:.1e}' for v in tv)} (<= 1e-6); {elapsed:.1f}s (< 30s)")


def quadrature_gamma(s, x):
    value, _ = quad(lambda u: math.exp(-u), 0.0, x, weight="alg", wvar=(s - 1.0, 0.0),
                    epsabs=0.0, epsrel=1e-13, limit=200)
    return value


# the oracle may warn about its own roundoff near 1e-13; its agreement is what is checked
@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_criterion_5_special_functions():
    rng = np.random.default_rng(505)
    worst = 0.0
    worst_rec = 0.0
    for _ in range(1000):
        s = rng.uniform(0.05, 40)
        x = rng.uniform(1e-3, 2.5 * s + 10)
        worst = max(worst, abs(lower_incomplete_gamma(s, x) / quadrature_gamma(s, x) - 1))
        lhs = lower_incomplete_gamma(s + 1, x)
        rhs = s * lower_incomplete_gamma(s, x) - x ** s * math.exp(-x)
        worst_rec = max(worst_rec, abs(lhs - rhs) / lhs)
    zs = [5, 10, 20, 50, 100]
    errs = [abs(stirling_gamma(z) / math.gamma(z) - 1) for z in zs]
    s10 = abs(stirling_gamma(10) / 362880 - 1)
    ok = worst <= 1e-10 and worst_rec <= 1e-10 and s10 <= 0.01 and all(np.diff(errs) < 0)
    record(5, ok, f"quadrature rel err {worst:.1e}, recurrence {worst_rec:.1e} (<= 1e-10); "
                  f"Stirling(10) off {s10:.2%} (<= 1%); errors decreasing: {all(np.diff(errs) < 0)}")


def test_criterion_6_fit_recovery():
    truth = np.array([2.0, 1.5, 0.3])
    t = np.linspace(0.05, 5 * truth[0] * truth[1], 100)
    clean = gamma_kernel_values(t, *truth)
    start = time.perf_counter()

    series = TimeSeries(t, clean)
    fit = lm_fit_gamma(series, initial_guess(series))
    noiseless = float(np.max(np.abs(np.array([fit.a, fit.b, fit.c]) / truth - 1)))
    monotone = fit.converged and all(np.diff(fit.objective_history) <= 0)

    errors = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        noisy = TimeSeries(t, clean * (1 + 0.01 * rng.standard_normal(len(t))))
        fit = lm_fit_gamma(noisy, initial_guess(noisy))
        monotone = monotone and fit.converged and all(np.diff(fit.objective_history) <= 0)
        errors.append(np.abs(np.array([fit.a, fit.b, fit.c]) / truth - 1))
    median = np.median(errors, axis=0)
    elapsed = time.perf_counter() - start
    ok = noiseless <= 1e-6 and np.all(median <= 0.05) and monotone and elapsed < 30
    record(6, ok, f"noiseless rel err {noiseless:.1e} (<= 1e-6); noisy median a,b,c "
                  f"{', '.join(f'{m:.2%}' for m in median)} (<= 5%); objective monotone: {monotone}; "
                  f"{elapsed:.1f}s (< 30s)")


def test_criterion_7_pipeline_round_trip():
    rng = np.random.default_rng(2024)
    dist = EmpiricalSample(tuple(np.rint(rng.lognormal(4.0, 1.0, size=1000)).astype(int)))
    mom = degree_moments(dist)
    params = NetworkParams(2000, mom.mean, mom.mean_sq)
    spec = GammaKernel(3.0, 0.5, 0.05)
    start = time.perf_counter()
    peak_err, c_err, coverage = [], [], []
    for seed in range(20):
        ds = synthesize_dataset(params, spec, dist, 6.0, seed)
        # c is identifiable only relative to the community size, so N is supplied
        report = validate(ds, n_users=params.n_users)
        peak_err.append(abs(report.fit.peak_time / (spec.a * spec.b) - 1))
        c_err.append(abs(report.fit.c / spec.c - 1))
        coverage.append(report.coverage_fraction)
    elapsed = time.perf_counter() - start
    med = float(np.median(peak_err)), float(np.median(c_err)), float(np.median(coverage))
    ok = med[0] <= 0.10 and med[1] <= 0.15 and med[2] >= 0.90 and elapsed < 300
    record(7, ok, f"median peak err {med[0]:.1%} (<= 10%), c err {med[1]:.1%} (<= 15%), "
                  f"coverage {med[2]:.3f} (>= 0.90); {elapsed:.1f}s (< 300s)")


def test_criterion_8_asymptotics():
    params = NetworkParams(1000, 3.0, 20.0)
    spec = GammaKernel(2.0, 1.0, 0.1)
    lim = asymptotic_moments(params, spec)
    ts = np.concatenate((np.linspace(0, 60, 601), [1e3, 1e6]))
    bounded = bool(np.all(mean_reads(params, spec, ts) <= lim.mean_limit_exact))
    late = spec.a * spec.b + 40 * spec.b
    late_err = abs(mean_reads(params, spec, late) / lim.mean_limit_exact - 1)
    big = asymptotic_moments(params, GammaKernel(50.0, 1.0, 0.1))
    ratio = big.mean_limit_stirling / big.mean_limit_exact
    ok = bounded and abs(ratio - 1) <= 0.02 and late_err <= 1e-3
    record(8, ok, f"limit bounds mean: {bounded}; Stirling/exact at a=50 {ratio:.4f} (within 2%); "
                  f"mean at t_max+40b off {late_err:.1e} (<= 1e-3)")


SEEDED_COMMANDS = [
    ["simulate", "--seed", "3"],
    ["simulate", "--seed", "3", "--method", "micro", "--dt", "0.001"],
    ["simulate", "--method", "master", "--times", "0:10:11", "--degree", "discrete:1,2,3:0.5,0.3,0.2",
     "--n-users", "50"],
    ["simulate", "--seed", "3", "--replications", "50", "--times", "0:10:11"],
    ["moments", "--degree", "lognormal:4,1"],
    ["synth", "--seed", "3", "--n-users", "2000", "--popularity", "gamma:3,0.5,0.05",
     "--degree", "lognormal:4,1", "--horizon", "6"],
    ["synth", "--seed", "3", "--format", "jsonl"],
]


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_criterion_9_determinism(tmp_path, capsys):
    differing = []
    for i, argv in enumerate(SEEDED_COMMANDS):
        snaps = []
        for run in ("a", "b"):
            out = tmp_path / f"{i}{run}"
            assert cli_main(argv + ["--out-dir", str(out)]) == 0
            snaps.append(_snapshot(out))
        if snaps[0] != snaps[1]:
            differing.append(argv[0])
    data = tmp_path / "5a" / "dataset.csv"
    for command in (["fit", "--n-users", "2000"], ["validate", "--n-users", "2000", "--svg"]):
        snaps = []
        for run in ("a", "b"):
            out = tmp_path / f"{command[0]}{run}"
            assert cli_main([command[0], str(data), *command[1:], "--out-dir", str(out)]) == 0
            snaps.append(_snapshot(out))
        if snaps[0] != snaps[1]:
            differing.append(command[0])
    capsys.readouterr()
    total = len(SEEDED_COMMANDS) + 2
    record(9, not differing, f"{total - len(differing)}/{total} commands byte-identical across two runs"
                             + (f"; differing: {differing}" if differing else ""))
