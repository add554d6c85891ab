"""Monte Carlo studies of the partial-effect test and the regression fit.

Every trial derives its data seed and its calibration seed from the study
root seed and the trial index alone, so trials are reproducible one by one,
the same trial sees the same data across effect sizes (a power curve at zero
effect reproduces the size study exactly), and, combined with the
generator's nested substreams, the same trial sees nested datasets across
sample sizes in the consistency study. Failed trials are recorded with the
error message rather than dropped.
"""

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import stats as _scipy_stats

from .errors import BwfrechetError, InvalidInputError
from .frechet import CovariateMoments, SolverOptions, frechet_regress
from .partial_test import (
    TestOptions,
    _mixture_draws,
    imputed_covariates,
    run_partial_test,
)
from .simgen import SimConfig, generate, population_qstar


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared configuration for the simulation studies."""

    example: int = 1
    n: int = 200
    p_y: int = 3
    p_z: int = 3
    d: int = 6
    delta_z: float = 0.0
    trials: int = 200
    alpha: float = 0.05
    mc_draws: int = 100_000
    seed: int = 0
    threads: int = 1
    processes: int = 1
    max_nonconverged: float = 0.05
    delta_grid: tuple = (0.0, 0.1, 0.2, 0.3)
    n_grid: tuple = (100, 200, 400, 800)
    consistency_trials: int = 20
    lattice: tuple = (-0.5, 0.0, 0.5)

    def __post_init__(self):
        if self.trials < 1 or self.consistency_trials < 1:
            raise InvalidInputError("trial counts must be positive")
        if self.processes < 1 or self.threads < 1:
            raise InvalidInputError("processes and threads must be positive")

    def sim_config(self, delta=None, n=None, seed=0):
        return SimConfig(
            example=self.example,
            n=self.n if n is None else int(n),
            p_y=self.p_y,
            p_z=self.p_z,
            d=self.d,
            delta_z=self.delta_z if delta is None else float(delta),
            seed=seed,
        )


def trial_seeds(root_seed, trial_index):
    """Derive (data_seed, mc_seed) for one trial from the study root seed.

    A pure function of (root_seed, trial_index): independent of the effect
    size, the sample size and the order in which trials run.
    """
    ss = np.random.SeedSequence(int(root_seed), spawn_key=(int(trial_index),))
    children = ss.spawn(2)
    data_seed = int(children[0].generate_state(1, np.uint64)[0])
    mc_seed = int(children[1].generate_state(1, np.uint64)[0])
    return data_seed, mc_seed


@dataclass(frozen=True)
class TrialRecord:
    """One test trial: outcome fields are None when the trial failed."""

    index: int
    data_seed: int
    mc_seed: int
    statistic: float | None
    p_value: float | None
    quantile: float | None
    reject: bool | None
    nonconverged: int
    n_fits: int
    eigenvalues: tuple | None
    error: str | None = None


def _run_test_trial(config, index, delta=None, n=None):
    data_seed, mc_seed = trial_seeds(config.seed, index)
    try:
        sim = config.sim_config(delta=delta, n=n, seed=data_seed)
        data, _ = generate(sim)
        options = TestOptions(
            alpha=config.alpha,
            mc_draws=config.mc_draws,
            seed=mc_seed,
            threads=config.threads,
            max_nonconverged=config.max_nonconverged,
        )
        result = run_partial_test(data, options)
        return TrialRecord(
            index=index,
            data_seed=data_seed,
            mc_seed=mc_seed,
            statistic=result.statistic,
            p_value=result.p_value,
            quantile=result.quantile,
            reject=result.reject,
            nonconverged=result.diagnostics.nonconverged,
            n_fits=result.diagnostics.n_fits,
            eigenvalues=tuple(float(v) for v in result.eigenvalues),
        )
    except BwfrechetError as exc:
        return TrialRecord(
            index=index,
            data_seed=data_seed,
            mc_seed=mc_seed,
            statistic=None,
            p_value=None,
            quantile=None,
            reject=None,
            nonconverged=0,
            n_fits=0,
            eigenvalues=None,
            error=f"{type(exc).__name__}: {exc}",
        )


def _test_trial_star(args):
    return _run_test_trial(*args)


def _map_trials(config, tasks, worker):
    """Run (index, delta, n) tasks, in order, inline or over processes."""
    if config.processes > 1:
        with ProcessPoolExecutor(max_workers=config.processes) as pool:
            return list(pool.map(worker, [(config, *task) for task in tasks]))
    return [worker((config, *task)) for task in tasks]


def clopper_pearson(successes, total, level=0.95):
    """Exact binomial confidence interval for a proportion."""
    if not 0 <= successes <= total or total < 1:
        raise InvalidInputError("need 0 <= successes <= total with total >= 1")
    tail = (1.0 - level) / 2.0
    if successes == 0:
        low = 0.0
    else:
        low = float(_scipy_stats.beta.ppf(tail, successes, total - successes + 1))
    if successes == total:
        high = 1.0
    else:
        high = float(_scipy_stats.beta.ppf(1.0 - tail, successes + 1, total - successes))
    return low, high


@dataclass(frozen=True)
class SizeStudyResult:
    """Null rejection rate with an exact binomial confidence interval."""

    config: ExperimentConfig
    records: tuple
    completed: int
    rejections: int
    rejection_rate: float
    ci_low: float
    ci_high: float


def run_size_study(config):
    """Rejection rate of the test over repeated draws at the configured effect.

    With ``delta_z`` zero (the default) this is the empirical size at level
    ``alpha``.
    """
    tasks = [(index, None, None) for index in range(config.trials)]
    records = _map_trials(config, tasks, _test_trial_star)
    completed = [r for r in records if r.error is None]
    rejections = sum(1 for r in completed if r.reject)
    rate = rejections / len(completed) if completed else float("nan")
    if completed:
        low, high = clopper_pearson(rejections, len(completed))
    else:
        low, high = float("nan"), float("nan")
    return SizeStudyResult(
        config=config,
        records=tuple(records),
        completed=len(completed),
        rejections=rejections,
        rejection_rate=rate,
        ci_low=low,
        ci_high=high,
    )


@dataclass(frozen=True)
class PowerPoint:
    delta: float
    completed: int
    rejections: int
    power: float
    ci_low: float
    ci_high: float
    records: tuple


@dataclass(frozen=True)
class PowerCurveResult:
    config: ExperimentConfig
    points: tuple


def run_power_curve(config):
    """Rejection rate against the trailing-block effect size.

    Trial seeds are shared across the grid, so the point at effect zero is
    the size study on the same data draws.
    """
    points = []
    for delta in config.delta_grid:
        tasks = [(index, float(delta), None) for index in range(config.trials)]
        records = _map_trials(config, tasks, _test_trial_star)
        completed = [r for r in records if r.error is None]
        rejections = sum(1 for r in completed if r.reject)
        rate = rejections / len(completed) if completed else float("nan")
        if completed:
            low, high = clopper_pearson(rejections, len(completed))
        else:
            low, high = float("nan"), float("nan")
        points.append(
            PowerPoint(
                delta=float(delta),
                completed=len(completed),
                rejections=rejections,
                power=rate,
                ci_low=low,
                ci_high=high,
                records=tuple(records),
            )
        )
    return PowerCurveResult(config=config, points=tuple(points))


# ---------------------------------------------------------------------------
# estimator consistency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyTrial:
    index: int
    data_seed: int
    n: int
    sup_error: float | None
    nonconverged: int
    error: str | None = None


@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    completed: int
    median_sup_error: float
    mean_sup_error: float


@dataclass(frozen=True)
class ConsistencyResult:
    config: ExperimentConfig
    rows: tuple
    trials: tuple


def _evaluation_lattice(config):
    """Retained-block lattice points inside the unit ball, as full rows.

    The covariates are centered and independent in the population, so the
    population imputation of the trailing block is identically zero; each
    lattice point y maps to the full row (y, 0, ..., 0).
    """
    points = [
        y for y in product(config.lattice, repeat=config.p_y)
        if float(np.linalg.norm(y)) <= 1.0
    ]
    if not points:
        raise InvalidInputError("evaluation lattice is empty inside the unit ball")
    y = np.asarray(points, dtype=float)
    return np.concatenate([y, np.zeros((y.shape[0], config.p_z))], axis=1)


def _run_consistency_trial(args):
    config, index, n = args
    data_seed, _ = trial_seeds(config.seed, index)
    try:
        sim = config.sim_config(delta=None, n=n, seed=data_seed)
        data, truth = generate(sim)
        lattice = _evaluation_lattice(config)
        n1 = (data.n + 1) // 2
        first_moments = CovariateMoments.from_covariates(data.covariates[:n1], data.p1)
        full_moments = CovariateMoments.from_covariates(data.covariates, data.p1)
        solver = SolverOptions()
        worst = 0.0
        nonconverged = 0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for row in lattice:
                xhat = imputed_covariates(row, first_moments)
                fit = frechet_regress(data, xhat, full_moments, solver)
                if not fit.converged:
                    nonconverged += 1
                target = population_qstar(truth, row)
                worst = max(worst, float(np.linalg.norm(fit.mean - target)))
        return ConsistencyTrial(
            index=index,
            data_seed=data_seed,
            n=n,
            sup_error=worst,
            nonconverged=nonconverged,
        )
    except BwfrechetError as exc:
        return ConsistencyTrial(
            index=index,
            data_seed=data_seed,
            n=n,
            sup_error=None,
            nonconverged=0,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_consistency_study(config):
    """Sup-norm fitting error over the evaluation lattice as n grows.

    For each sample size, each trial fits the regression at every lattice
    point with the trailing block imputed from first-half moments and
    measures the Frobenius distance to the population minimizer; the trial
    contributes the worst lattice error, and rows summarize the median and
    mean over trials. Trial seeds are shared across sample sizes, so the
    datasets are nested in n.
    """
    rows = []
    all_trials = []
    for n in config.n_grid:
        tasks = [(index, int(n)) for index in range(config.consistency_trials)]
        trials = _map_trials(config, tasks, _run_consistency_trial)
        all_trials.extend(trials)
        done = [t.sup_error for t in trials if t.error is None]
        if done:
            rows.append(
                ConsistencyRow(
                    n=int(n),
                    completed=len(done),
                    median_sup_error=float(np.median(done)),
                    mean_sup_error=float(np.mean(done)),
                )
            )
        else:
            rows.append(
                ConsistencyRow(
                    n=int(n),
                    completed=0,
                    median_sup_error=float("nan"),
                    mean_sup_error=float("nan"),
                )
            )
    return ConsistencyResult(config=config, rows=tuple(rows), trials=tuple(all_trials))


# ---------------------------------------------------------------------------
# distributional diagnostics
# ---------------------------------------------------------------------------

def pooled_eigenvalues(spectra):
    """Rank-wise mean of equally long eigenvalue tuples."""
    if not spectra:
        raise InvalidInputError("need at least one spectrum")
    lengths = {len(s) for s in spectra}
    if len(lengths) != 1:
        raise InvalidInputError(f"spectra have mixed lengths {sorted(lengths)}")
    return np.asarray(spectra, dtype=float).mean(axis=0)


def qq_data(statistics, lambdas, mc_draws=100_000, seed=0):
    """Quantile pairs (mixture reference, observed statistic), ascending.

    Reference quantiles are taken at levels (i - 1/2) / N from a seeded
    Monte Carlo sample of the weighted chi-squared mixture.
    """
    statistics = np.asarray(statistics, dtype=float).reshape(-1)
    if statistics.size < 1 or not np.all(np.isfinite(statistics)):
        raise InvalidInputError("statistics must be a nonempty finite array")
    draws = _mixture_draws(lambdas, mc_draws, seed)
    levels = (np.arange(1, statistics.size + 1) - 0.5) / statistics.size
    reference = np.quantile(draws, levels)
    observed = np.sort(statistics)
    return np.column_stack([reference, observed])


def mixture_ks_distance(statistics, lambdas, mc_draws=100_000, seed=0):
    """Two-sample Kolmogorov-Smirnov distance to the reference mixture."""
    statistics = np.asarray(statistics, dtype=float).reshape(-1)
    if statistics.size < 1 or not np.all(np.isfinite(statistics)):
        raise InvalidInputError("statistics must be a nonempty finite array")
    draws = _mixture_draws(lambdas, mc_draws, seed)
    return float(_scipy_stats.ks_2samp(statistics, draws).statistic)
