"""Command line interface.

Usage::

    ramanem simulate|invert|benchmark|resolution|montecarlo
            [--config FILE] [--input FILE] [--output DIR]
            [--solver em|tikhonov|lm|derivative] [--k K]
            [--max-iter N] [--seed N]

Settings come from a flat ``key = value`` config file; flags override it.
Every run writes its effective configuration to ``config.txt`` in the
output directory.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis, io
from .baselines import LmConfig, TikhonovConfig, parse_filter_chain
from .em import EmConfig
from .errors import ConfigurationError, RamanEMError
from .grid import (
    ExtinctionProfile,
    ForwardModelConfig,
    MolecularModel,
    build_grid,
    exact_signal,
    make_comb_profile,
    synthesize_signal,
)

COMMANDS = ("simulate", "invert", "benchmark", "resolution", "montecarlo")

# key -> (type, default); None default means "unset"
KEYS = {
    # grid
    "z_min": (float, 15.0),
    "z_max": (float, 15000.0),
    "dz": (float, 15.0),
    "quadrature": (str, "rectangle"),
    # forward model
    "C": (float, 1e-20),
    "wavelength": (float, 355.0),
    "rho_0": (float, 2.5e25),
    "scale_height": (float, 8000.0),
    "z_ref": (float, 0.0),
    "counts_per_power": (float, None),
    "peak_counts": (float, 1e4),
    "sigma_floor": (float, 1e-3),
    # built-in profiles
    "profile": (str, "comb"),
    "period_points": (int, 10),
    "peak_value": (float, 1e-4),
    "offset": (int, 0),
    "n_peaks": (int, None),
    "top_counts": (float, 1e5),
    "truth": (str, None),
    # simulation
    "noise": (str, "none"),
    "n_realizations": (int, None),
    "seed": (int, 0),
    # solvers
    "solver": (str, "em"),
    "K": (float, 3.0),
    "two_sided": (bool, True),
    "max_iterations": (int, 200_000),
    "initial_value": (float, 1e-5),
    "data_floor": (float, 1e-12),
    "check_every": (int, 10),
    "nonpositive": (str, "floor"),
    "eta_initial": (float, 1.0),
    "eta_factor": (float, 0.5),
    "eta_min": (float, 1e-12),
    "non_negative": (bool, True),
    "relative": (bool, True),
    "damping_initial": (float, 1e-3),
    "damping_up": (float, 10.0),
    "damping_down": (float, 0.1),
    "lm_max_iterations": (int, 500),
    "filter_chain": (str, "avg:5"),
    # experiments
    "n_repetitions": (int, 30),
    "band_width": (float, 2.0),
    "iteration_counts": (str, "10000,500000"),
    "workers": (int, 1),
    "plots": (bool, False),
}


def _convert(key, raw):
    kind, _ = KEYS[key]
    if raw is None or (isinstance(raw, str) and raw.lower() in ("", "none")):
        return None
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        low = str(raw).lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if kind is int:
            return int(float(raw))
        return kind(raw)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


@dataclass
class RunConfig:
    command: str
    input: Path | None = None
    output: Path = Path("ramanem-out")
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_sources(cls, command, file_values=None, overrides=None, input=None, output=None):
        if command not in COMMANDS:
            raise ConfigurationError(f"unknown command {command!r}")
        values = {k: default for k, (_, default) in KEYS.items()}
        for source in (file_values or {}), (overrides or {}):
            for key, raw in source.items():
                if key not in KEYS:
                    raise ConfigurationError(f"unknown config key {key!r}")
                values[key] = _convert(key, raw)
        cfg = cls(command, Path(input) if input else None, Path(output or "ramanem-out"), values)
        if cfg.input is not None and not cfg.input.is_file():
            raise ConfigurationError(f"input file {cfg.input} is not readable")
        return cfg

    # builders -----------------------------------------------------------
    def grid(self):
        v = self.values
        return build_grid(v["z_min"], v["z_max"], v["dz"], v["quadrature"])

    def forward(self) -> ForwardModelConfig:
        v = self.values
        return ForwardModelConfig(
            C=v["C"],
            wavelength=v["wavelength"],
            molecular=MolecularModel(v["rho_0"], v["scale_height"], v["z_ref"]),
            counts_per_power=v["counts_per_power"],
            peak_counts=v["peak_counts"],
            sigma_floor=v["sigma_floor"],
        )

    def settings(self) -> analysis.SolverSettings:
        v = self.values
        return analysis.SolverSettings(
            em=EmConfig(v["max_iterations"], v["initial_value"], v["data_floor"], v["check_every"], v["nonpositive"]),
            tikhonov=TikhonovConfig(v["eta_initial"], v["eta_factor"], v["eta_min"], v["non_negative"], v["relative"]),
            lm=LmConfig(v["damping_initial"], v["damping_up"], v["damping_down"], v["lm_max_iterations"]),
            chain=parse_filter_chain(v["filter_chain"]),
            K=v["K"],
            two_sided=v["two_sided"],
        )

    def builtin_profile(self) -> ExtinctionProfile:
        v = self.values
        if v["profile"] == "comb":
            return make_comb_profile(self.grid(), v["period_points"], v["peak_value"], v["offset"], v["n_peaks"])
        if v["profile"] == "earlinet":
            return analysis.earlinet_standin(int(v["wavelength"]), v["z_max"], v["dz"])
        raise ConfigurationError(f"unknown built-in profile {v['profile']!r} (comb or earlinet)")

    def truth_and_forward(self):
        """Truth profile and a forward model with counts calibrated for it.

        The earlinet stand-in is calibrated by ``top_counts``, everything
        else by ``peak_counts``. The resolved value is echoed into the config.
        """
        v = self.values
        truth = io.parse_profile_file(self.input) if self.input else self.builtin_profile()
        fwd = self.forward()
        if fwd.counts_per_power is None:
            if self.input is None and v["profile"] == "earlinet":
                scale = v["top_counts"] / exact_signal(truth.grid, truth.alpha, fwd)[-1]
            else:
                scale = fwd.resolved_counts_per_power(synthesize_signal(truth, fwd).P)
            fwd = replace(fwd, counts_per_power=scale)
            v["counts_per_power"] = scale
        return truth, fwd


# commands -----------------------------------------------------------------


def _simulate(cfg: RunConfig, out: Path):
    truth, fwd = cfg.truth_and_forward()
    if cfg["noise"] == "poisson":
        signal = analysis.noisy_average(truth, fwd, cfg["n_realizations"] or 1, cfg["seed"])
    else:
        signal = synthesize_signal(truth, fwd)
    io.write_signal_file(out / "signal.csv", signal)
    io.write_profile_file(out / "truth.csv", truth)
    return 0


def _load_truth(cfg: RunConfig, grid):
    if not cfg["truth"]:
        return None
    truth = io.parse_profile_file(cfg["truth"])
    if not truth.grid.same_as(grid):
        raise ConfigurationError("truth profile grid differs from the signal grid")
    return truth


def _write_report(out: Path, name: str, report):
    cols, rows = report.trace_table()
    io.write_table(out / f"trace_{name}.csv", cols, rows)
    summary = {k: v for k, v in report.summary().items() if np.isscalar(v) or isinstance(v, str)}
    io.write_config(out / f"summary_{name}.txt", summary)


def _write_diagnostics(out: Path, signal, diags):
    io.write_table(
        out / "residual_diagnostics.csv",
        ["solver", "rms", "lag1", "rms_normalized"],
        [[d.name, d.rms, d.lag1, d.rms_normalized] for d in diags],
    )
    io.write_table(
        out / "residuals.csv",
        ["z_m"] + [d.name for d in diags],
        np.column_stack([signal.grid.z] + [d.residuals for d in diags]),
    )


def _invert(cfg: RunConfig, out: Path):
    if cfg.input is None:
        raise ConfigurationError("invert needs --input <signal file>")
    signal = io.parse_signal_file(cfg.input)
    fwd = cfg.forward()
    name = cfg["solver"]
    profile, report = analysis.run_solver(name, signal, fwd, cfg.settings())
    io.write_profile_file(out / "profile.csv", profile)
    _write_report(out, name, report)
    _write_diagnostics(out, signal, analysis.residual_diagnostics(signal, {name: profile}, fwd))
    truth = _load_truth(cfg, signal.grid)
    if truth is not None:
        io.write_config(out / "error.txt", {"l2_error": float(np.linalg.norm(profile.alpha - truth.alpha))})
    return 0


def _benchmark(cfg: RunConfig, out: Path):
    if cfg.input is not None:
        signal = io.parse_signal_file(cfg.input)
        fwd = cfg.forward()
        truth = _load_truth(cfg, signal.grid)
    else:
        truth, fwd = cfg.truth_and_forward()
        signal = analysis.noisy_average(truth, fwd, cfg["n_realizations"] or 30, cfg["seed"])
        io.write_signal_file(out / "signal.csv", signal)
    table = analysis.benchmark(signal, fwd, truth, cfg.settings())
    io.write_table(out / "comparison.csv", table.columns, table.rows)
    for name, prof in table.profiles.items():
        io.write_profile_file(out / f"profile_{name}.csv", prof)
        _write_report(out, name, table.reports[name])
    _write_diagnostics(out, signal, table.diagnostics)
    if cfg["plots"]:
        from .plotting import plot_profiles

        plot_profiles(out / "benchmark.svg", table.profiles, truth)
    return 0


def _resolution(cfg: RunConfig, out: Path):
    truth = io.parse_profile_file(cfg.input) if cfg.input else cfg.builtin_profile()
    counts = [int(float(c)) for c in cfg["iteration_counts"].split(",") if c.strip()]
    v = cfg.values
    em_cfg = EmConfig(max(counts), v["initial_value"], v["data_floor"], v["check_every"], v["nonpositive"])
    report = analysis.resolution_study(truth, counts, em_cfg)
    cols, rows = report.table()
    io.write_table(out / "resolution.csv", cols, rows)
    io.write_profile_file(out / "truth.csv", truth)
    for count, prof in report.profiles.items():
        io.write_profile_file(out / f"profile_{count}.csv", prof)
    return 0


def _montecarlo(cfg: RunConfig, out: Path):
    truth, fwd = cfg.truth_and_forward()
    mc = analysis.MonteCarloConfig(
        n_realizations=cfg["n_realizations"] or 30,
        n_repetitions=cfg["n_repetitions"],
        seed=cfg["seed"],
        solver=cfg["solver"],
        settings=cfg.settings(),
        band_width=cfg["band_width"],
        workers=cfg["workers"],
    )
    result = analysis.monte_carlo(truth, fwd, mc)
    io.write_profile_file(out / "mean_profile.csv", result.mean_profile)
    io.write_profile_file(out / "truth.csv", truth)
    io.write_table(
        out / "montecarlo.csv",
        ["z_m", "truth", "mean", "sd", "rmse"],
        np.column_stack([truth.grid.z, truth.alpha, result.mean_profile.alpha, result.band, result.rmse_per_altitude]),
    )
    iters = [r.iterations_used for r in result.reports]
    io.write_config(
        out / "summary.txt",
        {
            "coverage": result.coverage,
            "rmse": result.rmse_vs_truth,
            "failures": result.failures,
            "median_iterations": float(np.median(iters)),
            "wall_time": result.wall_time,
        },
    )
    if cfg["plots"]:
        from .plotting import plot_band

        plot_band(out / "montecarlo.svg", result.mean_profile, truth)
    return 0


HANDLERS = {
    "simulate": _simulate,
    "invert": _invert,
    "benchmark": _benchmark,
    "resolution": _resolution,
    "montecarlo": _montecarlo,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    stage = "setup"
    try:
        out = io.ensure_dir(cfg.output)
        stage = cfg.command
        status = HANDLERS[cfg.command](cfg, out)
        io.write_config(out / "config.txt", {k: v for k, v in cfg.values.items() if v is not None})
        return status
    except (RamanEMError, OSError) as exc:
        print(f"ramanem: {stage} failed: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ramanem", description="Raman lidar extinction retrieval")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path)
    p.add_argument("--input", type=Path)
    p.add_argument("--output", type=Path, default=Path("ramanem-out"))
    p.add_argument("--solver", choices=analysis.SOLVERS)
    p.add_argument("--k", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--seed", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for flag, keys in (
        ("solver", ("solver",)),
        ("k", ("K",)),
        ("max_iter", ("max_iterations", "lm_max_iterations")),
        ("seed", ("seed",)),
    ):
        if getattr(args, flag) is not None:
            overrides.update(dict.fromkeys(keys, getattr(args, flag)))
    try:
        file_values = io.read_config(args.config) if args.config else {}
        cfg = RunConfig.from_sources(args.command, file_values, overrides, args.input, args.output)
    except (RamanEMError, OSError) as exc:
        print(f"ramanem: configuration failed: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
