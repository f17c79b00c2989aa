"""
Experiment runner orchestrating solver, analysis and special-function runs.

Each experiment writes its CSV reports (and, for simulations, binary field
snapshots) into one output directory and finishes with ``manifest.json``.
"""

import json
import math
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .analysis import (ensemble_ratios, forced_sobolev_ratios, gns_ratio, gronwall_check,
                       maximal_regularity_ratio, power_inequality_check,
                       random_forcing_ensemble, single_mode_forcing,
                       single_mode_regularity_ratio, solver_difference_gronwall_input,
                       uniqueness_metric)
from .config import ExperimentConfig
from .exceptions import (ConfigError, ConvergenceError, DegenerateInputError, DomainError,
                         FieldFormatError, FracNSError, GridMismatchError)
from .field_io import read_field, write_snapshots
from .fracops import caputo_derivative, rl_integral
from .initial_data import perturbed_taylor_green, random_bandlimited
from .logging import get_logger
from .solver import (classical_reference, classical_reference_with_diagnostics, picard_pair,
                     solve_mild, solve_mild_with_diagnostics)
from .specfun import MLParams, mainardi, mainardi_moment, mittag_leffler
from .spectral import SpectralField, TorusGrid, l2_norm
from .utils import (NormSpec, RunResult, SampledSignal, TimeGrid, read_csv_columns,
                    report_rows, sha256_of_file, write_csv)

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

MANIFEST_NAME = "manifest.json"
REPORT_HEADER = ["context", "t", "lhs", "rhs", "ratio", "holds"]

# Errors caused by the run's inputs rather than by the numerics.
INPUT_ERRORS = (ConfigError, FieldFormatError)
NUMERICAL_ERRORS = (ConvergenceError, DomainError, DegenerateInputError, GridMismatchError)

Outcome = Tuple[List[Path], Dict[str, Any], List[str]]


class ExperimentRunner:
    """Runs one configured experiment and records its artifacts."""

    def __init__(self, config: ExperimentConfig, output_dir: Optional[Path] = None):
        """
        Args:
            config: Validated experiment configuration
            output_dir: Overrides config.output_dir
        """
        self.config = config
        self.output_dir = Path(output_dir if output_dir is not None else config.output_dir)
        self._experiments: Dict[str, Callable[[], Outcome]] = {
            "simulate": self.run_simulate,
            "limit-check": self.run_limit_check,
            "uniqueness": self.run_uniqueness,
            "estimates": self.run_estimates,
            "gronwall-check": self.run_gronwall_check,
            "specfun": self.run_specfun,
            "fracops": self.run_fracops,
        }

    def run(self, experiment: Optional[str] = None) -> RunResult:
        """
        Run an experiment and write its manifest.

        Args:
            experiment: Experiment name (defaults to config.experiment)

        Returns:
            RunResult; exit_code is 0 on success, 2 for configuration or input
            errors, 3 for numerical failures and 1 for anything unexpected
        """
        name = experiment or self.config.experiment
        start_time = time.time()
        artifacts: List[Path] = []
        statistics: Dict[str, Any] = {}
        warnings: List[str] = []
        errors: List[str] = []
        exit_code = EXIT_OK

        try:
            if name not in self._experiments:
                raise ConfigError(f"unknown experiment '{name}'", key="experiment")
            logger.info("running experiment %s into %s", name, self.output_dir)
            self.output_dir.mkdir(parents=True, exist_ok=True)
            artifacts, statistics, warnings = self._experiments[name]()
        except INPUT_ERRORS as exc:
            errors.append(f"{name}: {exc}")
            exit_code = EXIT_CONFIG
        except NUMERICAL_ERRORS as exc:
            errors.append(f"{name}: {type(exc).__name__}: {exc}")
            exit_code = EXIT_NUMERICAL
        except FracNSError as exc:
            errors.append(f"{name}: {exc}")
            exit_code = EXIT_FAILURE
        except Exception as exc:
            logger.exception("experiment %s failed unexpectedly", name)
            errors.append(f"{name}: unexpected {type(exc).__name__}: {exc}")
            exit_code = EXIT_FAILURE

        for message in warnings:
            logger.warning(message)
        processing_time = time.time() - start_time
        result = RunResult(success=not errors, experiment=name,
                           output_dir=self.output_dir, artifacts=artifacts,
                           statistics=statistics, warnings=warnings, errors=errors,
                           processing_time=processing_time, exit_code=exit_code)
        if self.output_dir.is_dir():
            result.artifacts.append(self.write_manifest(result))
        return result

    def write_manifest(self, result: RunResult) -> Path:
        """Write config echo, version, artifact digests and wall time."""
        manifest = {
            "experiment": result.experiment,
            "version": __version__,
            "config": self.config.echo(),
            "success": result.success,
            "exit_code": result.exit_code,
            "wall_time_seconds": result.processing_time,
            "statistics": _jsonable(result.statistics),
            "warnings": result.warnings,
            "errors": result.errors,
            "artifacts": {str(path.relative_to(self.output_dir)): sha256_of_file(path)
                          for path in result.artifacts},
        }
        path = self.output_dir / MANIFEST_NAME
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path

    # Shared inputs

    def grid(self) -> TorusGrid:
        return TorusGrid(self.config.dim, self.config.resolution)

    def initial_field(self, grid: TorusGrid) -> SpectralField:
        """Build the configured initial velocity on grid."""
        data = self.config.initial_data
        try:
            if data.kind == "taylor-green":
                return perturbed_taylor_green(grid, data.amplitude, data.perturbation,
                                              self.config.seed, data.band)
            if data.kind == "random-bandlimited":
                seed = self.config.seed if data.seed is None else data.seed
                return random_bandlimited(grid, seed, data.band, data.amplitude)
        except DomainError as exc:
            raise ConfigError(f"invalid initial data: {exc}", key="initial_data") from exc

        field, _ = read_field(data.path)
        if field.grid.dim != grid.dim:
            raise ConfigError(f"initial field has dim {field.grid.dim}, config asks for {grid.dim}",
                              key="initial_data.path")
        if field.grid != grid:
            logger.info("resampling initial field from M=%d to M=%d",
                        field.grid.points_per_axis, grid.points_per_axis)
            field = field.resample(grid)
        return field

    def _path(self, name: str) -> Path:
        return self.output_dir / name

    # Experiments

    def run_simulate(self) -> Outcome:
        cfg = self.config
        grid = self.grid()
        u0 = self.initial_field(grid)
        if cfg.simulate.classical:
            if cfg.alpha != 1.0:
                raise ConfigError("the classical integrator needs alpha = 1",
                                  key="simulate.classical")
            solution = classical_reference_with_diagnostics(
                u0, cfg.time_grid(), cfg.tolerances.picard_tol, cfg.tolerances.picard_max_iters)
        else:
            solution = solve_mild_with_diagnostics(u0, cfg.solver_config())

        rows = [[d.step, d.time, d.energy, d.max_divergence, d.picard_iterations]
                for d in solution.diagnostics]
        artifacts = [write_csv(self._path("diagnostics.csv"),
                               ["step", "t", "energy", "max_divergence", "picard_iterations"], rows)]
        artifacts += write_snapshots(self._path("snapshots"), solution.trajectory,
                                     cfg.simulate.snapshot_every)

        final = solution.trajectory.final
        statistics = {
            "final_energy": solution.diagnostics[-1].energy,
            "final_l2_norm": l2_norm(final),
            "max_divergence": max(d.max_divergence for d in solution.diagnostics),
            "picard_iterations": solution.picard_iterations,
        }
        warnings = []
        if statistics["max_divergence"] > 1.0e-10:
            warnings.append(f"divergence reached {statistics['max_divergence']:.3e}")
        return artifacts, statistics, warnings

    def run_limit_check(self) -> Outcome:
        """Final-time L2 gap between fractional runs and the classical reference."""
        cfg = self.config
        grid = self.grid()
        u0 = self.initial_field(grid)
        reference = classical_reference(u0, cfg.time_grid(), cfg.tolerances.picard_tol,
                                        cfg.tolerances.picard_max_iters).final
        rows = []
        for alpha in cfg.limit_check.alphas:
            final = solve_mild(u0, cfg.solver_config(alpha)).final
            gap = l2_norm(final - reference)
            logger.info("limit-check alpha=%g gap=%.3e", alpha, gap)
            rows.append([alpha, gap])

        warnings = []
        ordered = sorted(rows, key=lambda row: row[0])
        gaps = [row[1] for row in ordered]
        if any(later > earlier for earlier, later in zip(gaps, gaps[1:])):
            warnings.append("limit-check gaps do not decrease monotonically as alpha -> 1")
        if ordered[-1][0] == 1.0 and ordered[-1][1] > 1.0e-10:
            warnings.append(f"alpha = 1 gap {ordered[-1][1]:.3e} exceeds 1e-10")
        path = write_csv(self._path("limit_check.csv"), ["alpha", "gap_l2"], rows)
        return [path], {"gaps": {f"{a:g}": g for a, g in rows}}, warnings

    def run_uniqueness(self) -> Outcome:
        cfg = self.config
        grid = self.grid()
        u0 = self.initial_field(grid)
        section = cfg.uniqueness
        bound = (10.0 * cfg.tolerances.picard_tol) ** 4 * cfg.t_end * grid.volume
        rows, statistics, warnings = [], {}, []
        for alpha in section.alphas or [cfg.alpha]:
            first, second = picard_pair(u0, cfg.solver_config(alpha), section.init_a, section.init_b)
            metric = uniqueness_metric(first, second)
            holds = metric <= bound
            rows.append([alpha, section.init_a, section.init_b, metric, bound, holds])
            statistics[f"{alpha:g}"] = metric
            if not holds:
                warnings.append(f"uniqueness metric {metric:.3e} above {bound:.3e} at alpha={alpha:g}")
        path = write_csv(self._path("uniqueness.csv"),
                         ["alpha", "init_a", "init_b", "metric", "bound", "holds"], rows)
        return [path], {"uniqueness_metric": statistics}, warnings

    def run_estimates(self) -> Outcome:
        """Maximal-regularity, Sobolev, GNS and power-inequality reports."""
        cfg = self.config
        section = cfg.estimates
        grid = self.grid()
        time_grid = cfg.time_grid()
        solver_cfg = cfg.solver_config()
        spec = NormSpec(section.p, section.q, cfg.t_end)
        reports = []

        forcings = random_forcing_ensemble(grid, time_grid, section.ensemble_size, cfg.seed,
                                           section.band, section.forcing_amplitude)
        reports += ensemble_ratios(forcings, solver_cfg, spec)

        single = maximal_regularity_ratio(single_mode_forcing(grid, time_grid), solver_cfg,
                                          NormSpec(section.p, math.inf, cfg.t_end))
        reports.append(single)
        expected = single_mode_regularity_ratio(cfg.alpha, 1.0, cfg.t_end)

        if 1.0 < section.sobolev_p < grid.dim:
            for forcing in forcings:
                reports += forced_sobolev_ratios(forcing, solver_cfg, section.sobolev_p, section.q)
        else:
            logger.info("skipping Sobolev estimates: p=%g is not in (1, %d)",
                        section.sobolev_p, grid.dim)
        removed_mean = None
        try:
            gns = gns_ratio(self.initial_field(grid), section.sobolev_p, grid)
            reports.append(gns)
            removed_mean = max(abs(value) for _, value in gns.extra)
        except DegenerateInputError as exc:
            logger.info("skipping GNS estimate: %s", exc)

        for beta in section.power_betas:
            for a, b in ((1.0, 1.0), (1.0, 0.0), (2.0, 0.5)):
                reports.append(power_inequality_check(a, b, beta))

        rows = [row for report in reports for row in report_rows(report)]
        path = write_csv(self._path("estimates.csv"), REPORT_HEADER, rows)
        failing = [report.context for report in reports if not report.holds]
        warnings = [f"estimate exceeds unit constant: {context}" for context in failing]
        statistics = {
            "reports": len(reports),
            "failing": len(failing),
            "max_ratio": max(report.ratio for report in reports),
            "single_mode_ratio": single.ratio,
            "single_mode_expected": expected,
            "gns_removed_mean": removed_mean,
        }
        return [path], statistics, warnings

    def run_gronwall_check(self) -> Outcome:
        """Gronwall check on the distance between two nearby solutions."""
        cfg = self.config
        grid = self.grid()
        solver_cfg = cfg.solver_config()
        u0 = self.initial_field(grid)
        band = max(1, min(4, math.ceil(grid.points_per_axis / 3.0) - 1))
        v0 = u0 + random_bandlimited(grid, cfg.seed + 1, band, cfg.gronwall.perturbation)

        first = solve_mild(u0, solver_cfg)
        second = solve_mild(v0, solver_cfg)
        data = solver_difference_gronwall_input(first, second, solver_cfg)
        report = gronwall_check(data, integrand=cfg.gronwall.integrand)

        header = ["t", "lhs", "rhs", "ratio", "holds",
                  "hypothesis_rhs", "hypothesis_holds", "envelope_t"]
        rows = []
        for row in report.rows:
            extra = dict(row.extra)
            rows.append([row.t, row.lhs, row.rhs, row.ratio, row.holds,
                         extra["hypothesis_rhs"], extra["hypothesis_holds"] == 1.0,
                         extra["envelope_t"]])
        path = write_csv(self._path("gronwall.csv"), header, rows)
        warnings = [] if report.holds else [f"Gronwall conclusion violated: {report.context}"]
        statistics = {"holds": report.holds, "max_ratio": report.ratio,
                      "lipschitz_g": float(data.g.values[0])}
        return [path], statistics, warnings

    def run_specfun(self) -> Outcome:
        section = self.config.specfun
        policy = self.config.eval_policy()
        if section.function == "mainardi-moment":
            rows = []
            for alpha in section.alphas:
                for r in section.arguments:
                    numeric, closed = mainardi_moment(alpha, r, policy)
                    rows.append([alpha, r, numeric, closed])
            path = write_csv(self._path("specfun.csv"), ["alpha", "r", "numeric", "closed_form"], rows)
            worst = max(abs(n - c) / abs(c) for _, _, n, c in rows)
            return [path], {"max_relative_error": worst}, []

        rows = []
        for alpha in section.alphas:
            if section.function == "mainardi":
                rows += [[alpha, math.nan, theta, mainardi(alpha, theta, policy)]
                         for theta in section.arguments]
                continue
            for beta in section.betas:
                params = MLParams(alpha, beta)
                rows += [[alpha, beta, z, mittag_leffler(params, z, policy)]
                         for z in section.arguments]
        path = write_csv(self._path("specfun.csv"), ["alpha", "beta", "z", "value"], rows)
        return [path], {"evaluations": len(rows)}, []

    def run_fracops(self) -> Outcome:
        """Apply a Caputo derivative or RL integral to a sampled signal."""
        cfg = self.config
        section = cfg.fracops
        signal = self._fracops_signal()
        if section.operator == "caputo":
            if section.order >= 1.0:
                raise ConfigError("the Caputo order must be below 1", key="fracops.order")
            result = caputo_derivative(signal, section.order)
        else:
            result = rl_integral(signal, section.order)
        rows = np.column_stack([signal.times, signal.values, result.values]).tolist()
        path = write_csv(self._path("fracops.csv"), ["t", "h", "value"], rows)
        return [path], {"samples": len(rows)}, []

    def _fracops_signal(self) -> SampledSignal:
        section = self.config.fracops
        if section.input is None:
            grid = self.config.time_grid()
            shapes = {"t": lambda t: t, "t2": lambda t: t ** 2, "sin": np.sin}
            return SampledSignal.from_function(grid, shapes[section.signal])

        try:
            columns = read_csv_columns(section.input)
        except (OSError, ValueError, StopIteration) as exc:
            raise ConfigError(f"cannot read signal {section.input}: {exc}",
                              key="fracops.input") from exc
        if "t" not in columns or "h" not in columns:
            raise ConfigError("signal CSV needs columns t and h", key="fracops.input")
        t, h = columns["t"], columns["h"]
        if t.size < 2 or t[0] != 0.0:
            raise ConfigError("signal times must start at 0 with at least two samples",
                              key="fracops.input")
        grid = TimeGrid(float(t[-1]), t.size - 1)
        if not np.allclose(t, grid.nodes, rtol=1.0e-9, atol=1.0e-12):
            raise ConfigError("signal times must be uniformly spaced", key="fracops.input")
        return SampledSignal(grid, h)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value

