"""Experiment harness: resolution studies, Monte Carlo bands and comparisons."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import (
    FilterChain,
    LmConfig,
    TikhonovConfig,
    derivative_retrieval,
    lm_solve,
    parse_filter_chain,
    tikhonov_auto,
)
from .em import EmConfig, em_solve
from .errors import ConfigurationError, DimensionError, HarnessError, RamanEMError
from .grid import (
    AltitudeGrid,
    ExtinctionProfile,
    ForwardModelConfig,
    LidarSignal,
    build_grid,
    exact_signal,
    synthesize_signal,
    transform_signal,
)
from .report import SolveReport
from .stopping import StoppingRule, predict_signal

__all__ = [
    "SOLVERS",
    "SolverSettings",
    "MonteCarloConfig",
    "BenchmarkResult",
    "run_solver",
    "average_signals",
    "noisy_average",
    "monte_carlo",
    "integrate_window",
    "find_peaks",
    "three_peak_window",
    "resolution_study",
    "residual_diagnostics",
    "benchmark",
    "earlinet_standin",
    "standin_forward_config",
    "standin_benchmark",
]

SOLVERS = ("em", "tikhonov", "lm", "derivative")


@dataclass(frozen=True)
class SolverSettings:
    """Per-solver configuration plus the shared residual rule.

    ``two_sided`` defaults to True here: with the signed rule an early EM
    iterate whose cumulative residuals are negative (predicted signal too
    strong) is accepted immediately.
    """

    em: EmConfig = field(default_factory=lambda: EmConfig(max_iterations=200_000))
    tikhonov: TikhonovConfig = field(default_factory=TikhonovConfig)
    lm: LmConfig = field(default_factory=LmConfig)
    chain: FilterChain = field(default_factory=lambda: parse_filter_chain("avg:5"))
    K: float = 3.0
    two_sided: bool = True

    def rule(self, fwd: ForwardModelConfig) -> StoppingRule:
        return StoppingRule(self.K, fwd, self.two_sided)


def resample(profile: ExtinctionProfile, grid: AltitudeGrid) -> ExtinctionProfile:
    """Linear interpolation onto ``grid`` (identity when grids agree)."""
    if profile.grid.same_as(grid):
        return profile
    return ExtinctionProfile(grid, np.interp(grid.z, profile.grid.z, profile.alpha))


def run_solver(name: str, signal: LidarSignal, fwd: ForwardModelConfig, settings=None):
    """Invert ``signal`` with solver ``name``; profile is on ``signal.grid``."""
    settings = settings or SolverSettings()
    if name == "derivative":
        t0 = time.perf_counter()
        prof = derivative_retrieval(signal, fwd, settings.chain)
        report = SolveReport("derivative", objective="least_squares")
        report.extras["chain"] = str(settings.chain)
        report.extras["grid_dz"] = prof.grid.dz
        report.wall_time = time.perf_counter() - t0
        return resample(prof, signal.grid), report
    data = transform_signal(signal, fwd)
    stop = settings.rule(fwd)
    if name == "em":
        return em_solve(data, config=settings.em, stop=stop)
    if name == "tikhonov":
        return tikhonov_auto(data, config=settings.tikhonov, stop=stop)
    if name == "lm":
        return lm_solve(data, config=settings.lm, stop=stop)
    raise ConfigurationError(f"unknown solver {name!r}; expected one of {SOLVERS}")


def average_signals(signals) -> LidarSignal:
    """Point-wise mean power; ``sigma`` is that of the mean."""
    signals = list(signals)
    if not signals:
        raise HarnessError("nothing to average")
    grid = signals[0].grid
    P = np.mean([s.P for s in signals], axis=0)
    sigma = np.sqrt(np.sum([s.sigma**2 for s in signals], axis=0)) / len(signals)
    return LidarSignal(grid, P, sigma, signals[0].wavelength)


def noisy_average(
    truth: ExtinctionProfile,
    fwd: ForwardModelConfig,
    n: int,
    seed: int,
    repetition: int = 0,
    noise: str = "poisson",
):
    """Average of ``n`` realisations seeded by ``(seed, repetition, k)``.

    ``noise="none"`` returns the exact signal (the infinite count limit).
    """
    if noise == "none":
        return synthesize_signal(truth, fwd, "none")
    draws = (
        synthesize_signal(truth, fwd, noise, np.random.default_rng(np.random.SeedSequence([seed, repetition, k])))
        for k in range(n)
    )
    return average_signals(draws)


@dataclass(frozen=True)
class MonteCarloConfig:
    n_realizations: int = 30
    n_repetitions: int = 30
    seed: int = 0
    solver: str = "em"
    settings: SolverSettings = field(default_factory=SolverSettings)
    band_width: float = 2.0
    workers: int = 1
    noise: str = "poisson"

    def __post_init__(self):
        if self.noise not in ("poisson", "none"):
            raise ConfigurationError(f"noise must be 'poisson' or 'none', got {self.noise!r}")
        if self.n_realizations < 1 or self.n_repetitions < 1:
            raise ConfigurationError("realization and repetition counts must be >= 1")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        if not self.band_width > 0:
            raise ConfigurationError("band_width must be positive")


@dataclass
class BenchmarkResult:
    """Monte Carlo summary.

    ``mean_profile`` carries the band ``mean +- band_width * band``, where
    ``band`` is the per-altitude standard deviation over repetitions.
    """

    mean_profile: ExtinctionProfile
    band: np.ndarray
    rmse_vs_truth: float
    rmse_per_altitude: np.ndarray
    reports: list
    profiles: np.ndarray
    coverage: float
    failures: int
    wall_time: float


def monte_carlo(truth: ExtinctionProfile, fwd: ForwardModelConfig, config: MonteCarloConfig | None = None) -> BenchmarkResult:
    """Repeat (simulate ``n_realizations``, average, invert) ``n_repetitions`` times."""
    config = config or MonteCarloConfig()
    if np.any(truth.alpha < 0):
        raise ConfigurationError("truth profile must be non-negative")
    t0 = time.perf_counter()

    def one(r):
        signal = noisy_average(truth, fwd, config.n_realizations, config.seed, r, config.noise)
        try:
            return run_solver(config.solver, signal, fwd, config.settings)
        except RamanEMError as exc:
            return exc

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            outcomes = list(pool.map(one, range(config.n_repetitions)))
    else:
        outcomes = [one(r) for r in range(config.n_repetitions)]

    ok = [o for o in outcomes if not isinstance(o, Exception)]
    failures = len(outcomes) - len(ok)
    if failures * 2 > len(outcomes):
        first = next(o for o in outcomes if isinstance(o, Exception))
        raise HarnessError(f"{failures}/{len(outcomes)} repetitions failed; first: {first}") from first
    profiles = np.stack([p.alpha for p, _ in ok])
    mean = profiles.mean(axis=0)
    sd = profiles.std(axis=0, ddof=1) if len(ok) > 1 else np.zeros_like(mean)
    half = config.band_width * sd
    mean_profile = ExtinctionProfile(truth.grid, mean, mean - half, mean + half)
    err2 = (profiles - truth.alpha) ** 2
    inside = (truth.alpha >= mean - half) & (truth.alpha <= mean + half)
    return BenchmarkResult(
        mean_profile=mean_profile,
        band=sd,
        rmse_vs_truth=float(np.sqrt(err2.mean())),
        rmse_per_altitude=np.sqrt(err2.mean(axis=0)),
        reports=[rep for _, rep in ok],
        profiles=profiles,
        coverage=float(inside.mean()),
        failures=failures,
        wall_time=time.perf_counter() - t0,
    )


def _window_mask(grid: AltitudeGrid, a: float, b: float) -> np.ndarray:
    tol = 1e-9 * grid.dz
    if not (grid.z_min - tol <= a < b <= grid.z_max + tol):
        raise ConfigurationError(f"window [{a}, {b}] outside grid [{grid.z_min}, {grid.z_max}]")
    z = grid.z
    mask = (z >= a - tol) & (z <= b + tol)
    if not mask.any():
        raise ConfigurationError(f"window [{a}, {b}] contains no samples")
    return mask


def integrate_window(x: ExtinctionProfile, a: float, b: float) -> float:
    """``dz * sum(alpha)`` over samples with ``a <= z <= b``."""
    return float(x.grid.dz * np.sum(x.alpha[_window_mask(x.grid, a, b)]))


def find_peaks(values) -> np.ndarray:
    """Indices of local maxima.

    A maximum is strictly above both neighbours (the single neighbour at
    the ends). A flat top counts once, at its leftmost index.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return np.arange(v.size)
    starts = np.concatenate([[0], np.flatnonzero(np.diff(v) != 0) + 1])
    run = v[starts]
    left = np.concatenate([[-np.inf], run[:-1]])
    right = np.concatenate([run[1:], [-np.inf]])
    return starts[(run > left) & (run > right)]


def three_peak_window(truth: ExtinctionProfile) -> tuple[float, float]:
    """Altitude window holding the three central peaks of a comb.

    The edges sit half a period outside the outer peaks, so the window
    contains exactly three peaks and no part of a fourth.
    """
    peaks = np.flatnonzero(truth.alpha > 0)
    if peaks.size < 3:
        raise ConfigurationError("need at least 3 peaks")
    mid = peaks.size // 2
    lo_p, hi_p = peaks[mid - 1], peaks[mid + 1]
    period = int(peaks[mid] - peaks[mid - 1])
    lo = max(lo_p - period // 2, 0)
    hi = min(hi_p + period - period // 2 - 1, truth.grid.n - 1)
    z = truth.grid.z
    return float(z[lo]), float(z[hi])


@dataclass
class ResolutionRow:
    iterations: int
    l2_error: float
    resolved: int
    n_peaks: int
    positions: np.ndarray
    amplitude_ratios: np.ndarray
    window_integral: float
    window_truth: float

    @property
    def all_resolved(self) -> bool:
        return self.resolved == self.n_peaks

    def amplitude_by_thirds(self) -> tuple[float, float, float]:
        """Mean recovered/true amplitude for the lower, middle and upper third of peaks."""
        parts = np.array_split(self.amplitude_ratios, 3)
        return tuple(float(p.mean()) if p.size else float("nan") for p in parts)


@dataclass
class ResolutionReport:
    truth: ExtinctionProfile
    rows: list
    profiles: dict
    window: tuple | None

    def table(self):
        cols = ["iterations", "l2_error", "resolved", "n_peaks", "amp_low", "amp_mid", "amp_high", "window_integral", "window_truth"]
        rows = []
        for r in self.rows:
            lo, mid, hi = r.amplitude_by_thirds()
            rows.append([r.iterations, r.l2_error, r.resolved, r.n_peaks, lo, mid, hi, r.window_integral, r.window_truth])
        return cols, rows


def resolution_study(
    truth: ExtinctionProfile,
    iteration_counts,
    em_config: EmConfig | None = None,
    window: tuple | None = None,
) -> ResolutionReport:
    """Noise-free EM on ``H @ truth`` sampled at the requested iteration counts.

    A true peak counts as resolved when the reconstruction has a local
    maximum at exactly that index. ``window`` (altitudes) defaults to the
    central three peaks when the truth has at least three.
    """
    counts = sorted({int(c) for c in iteration_counts})
    if not counts or counts[0] < 1:
        raise ConfigurationError("iteration counts must be positive")
    grid = truth.grid
    data = transform_signal(
        LidarSignal(grid, exact_signal(grid, truth.alpha, _UNIT_FWD), np.ones(grid.n)), _UNIT_FWD
    )
    base = em_config or EmConfig()
    step = math.gcd(*counts)
    cfg = EmConfig(
        max_iterations=counts[-1],
        initial_value=base.initial_value,
        data_floor=base.data_floor,
        check_every=step,
        nonpositive=base.nonpositive,
    )
    wanted = set(counts)
    snaps = {}

    def grab(k, x):
        if k in wanted:
            snaps[k] = np.array(x)

    em_solve(data, config=cfg, callback=grab)
    peaks = np.flatnonzero(truth.alpha > 0)
    if window is None and peaks.size >= 3:
        window = three_peak_window(truth)
    rows, profiles = [], {}
    for c in counts:
        x = snaps[c]
        prof = ExtinctionProfile(grid, x)
        profiles[c] = prof
        maxima = find_peaks(x)
        is_max = np.zeros(grid.n, dtype=bool)
        is_max[maxima] = True
        positions = np.array([maxima[np.argmin(np.abs(maxima - p))] if maxima.size else -1 for p in peaks])
        rows.append(
            ResolutionRow(
                iterations=c,
                l2_error=float(np.linalg.norm(x - truth.alpha)),
                resolved=int(np.count_nonzero(is_max[peaks])),
                n_peaks=int(peaks.size),
                positions=positions,
                amplitude_ratios=x[peaks] / truth.alpha[peaks],
                window_integral=integrate_window(prof, *window) if window else float("nan"),
                window_truth=integrate_window(truth, *window) if window else float("nan"),
            )
        )
    return ResolutionReport(truth, rows, profiles, window)


# the transform cancels C and rho, so any positive forward model will do
_UNIT_FWD = ForwardModelConfig(C=1.0)


@dataclass
class ResidualDiagnostic:
    name: str
    residuals: np.ndarray
    rms: float
    lag1: float
    rms_normalized: float


def lag1_autocorrelation(r) -> float:
    r = np.asarray(r, dtype=float)
    d = r - r.mean()
    denom = float(d @ d)
    return float(d[:-1] @ d[1:] / denom) if denom > 0 else 0.0


def residual_diagnostics(signal: LidarSignal, solutions, fwd: ForwardModelConfig, valid=None):
    """Residuals ``P - Pbar`` per solution, sorted by RMS.

    ``solutions`` maps names to profiles (a list is numbered). Profiles on
    another grid are interpolated onto the signal grid first.
    """
    if not isinstance(solutions, dict):
        solutions = {str(i): s for i, s in enumerate(solutions)}
    if valid is None:
        valid = signal.sigma > 0
    out = []
    for name, prof in solutions.items():
        prof = resample(prof, signal.grid)
        pred = predict_signal(prof, fwd)
        res = signal.P - pred.P
        rv = res[valid]
        norm = rv / signal.sigma[valid]
        out.append(
            ResidualDiagnostic(
                name=name,
                residuals=res,
                rms=float(np.sqrt(np.mean(rv**2))),
                lag1=lag1_autocorrelation(rv),
                rms_normalized=float(np.sqrt(np.mean(norm**2))),
            )
        )
    out.sort(key=lambda d: d.rms)
    return out


@dataclass
class ComparisonTable:
    columns: list
    rows: list
    profiles: dict
    reports: dict
    diagnostics: list


def benchmark(
    signal: LidarSignal,
    fwd: ForwardModelConfig,
    truth: ExtinctionProfile | None = None,
    settings: SolverSettings | None = None,
    solvers=SOLVERS,
) -> ComparisonTable:
    """Run each solver on the same signal and tabulate the outcome.

    ``rmse_upper`` is the RMSE over the upper third of the altitudes.
    """
    settings = settings or SolverSettings()
    if truth is not None and not truth.grid.same_as(signal.grid):
        raise DimensionError("truth and signal grids differ")
    profiles, reports = {}, {}
    for name in solvers:
        profiles[name], reports[name] = run_solver(name, signal, fwd, settings)
    diags = {d.name: d for d in residual_diagnostics(signal, profiles, fwd)}
    upper = signal.grid.z >= signal.grid.z_min + 2.0 / 3.0 * (signal.grid.z_max - signal.grid.z_min)
    cols = ["solver", "iterations", "eta", "stopped_by", "rmse", "rmse_upper", "rms_residual", "lag1", "wall_time"]
    rows = []
    for name in solvers:
        rep = reports[name]
        if truth is not None:
            e = profiles[name].alpha - truth.alpha
            rmse, rmse_up = float(np.sqrt(np.mean(e**2))), float(np.sqrt(np.mean(e[upper] ** 2)))
        else:
            rmse = rmse_up = float("nan")
        rows.append([
            name,
            rep.iterations_used,
            float(rep.extras.get("eta", float("nan"))),
            rep.stopped_by if name != "derivative" else "n/a",
            rmse,
            rmse_up,
            diags[name].rms,
            diags[name].lag1,
            rep.wall_time,
        ])
    return ComparisonTable(cols, rows, profiles, reports, list(diags.values()))


def earlinet_standin(wavelength: float = 355, z_max: float = 9000.0, dz: float = 15.0) -> ExtinctionProfile:
    """Two-layer total extinction profile, 0 to ``z_max``.

    A well mixed boundary layer with its top near 1.5 km, an elevated
    aerosol layer centred at 3.5 km and a molecular background decaying
    with an 8 km scale height. Values at 532 nm are scaled down from the
    355 nm case (aerosol by 0.6, molecular by the Rayleigh ratio). This
    shape stands in for the EARLINET synthetic profiles; load a profile
    file to use real ones.
    """
    if wavelength not in (355, 532):
        raise ConfigurationError("stand-in profile exists for 355 and 532 nm only")
    grid = build_grid(dz, z_max, dz)
    z = grid.z
    aerosol = 1.0 if wavelength == 355 else 0.6
    molecular = 1.27e-4 if wavelength == 355 else 2.6e-5
    boundary = 1.5e-4 * aerosol * 0.5 * (1.0 - np.tanh((z - 1500.0) / 150.0))
    layer = 8e-5 * aerosol * np.exp(-0.5 * ((z - 3500.0) / 300.0) ** 2)
    background = molecular * np.exp(-z / 8000.0)
    return ExtinctionProfile(grid, boundary + layer + background)


def standin_forward_config(profile: ExtinctionProfile, wavelength: float = 355, top_counts: float = 1e5, C: float = 1e-20) -> ForwardModelConfig:
    """Forward model whose expected counts at the top altitude equal ``top_counts``."""
    probe = ForwardModelConfig(C=C, wavelength=wavelength)
    P = exact_signal(profile.grid, profile.alpha, probe)
    return ForwardModelConfig(C=C, wavelength=wavelength, counts_per_power=top_counts / P[-1])


def standin_benchmark(wavelength: float = 355, seed: int = 0, settings=None, n_realizations: int = 30) -> ComparisonTable:
    """Four-solver comparison on one averaged stand-in dataset."""
    truth = earlinet_standin(wavelength)
    fwd = standin_forward_config(truth, wavelength)
    signal = noisy_average(truth, fwd, n_realizations, seed)
    return benchmark(signal, fwd, truth, settings)
