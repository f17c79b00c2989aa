"""
Experiment configuration: pydantic schema, JSON loading and environment overrides.

A configuration file is a single JSON object validated against
:class:`ExperimentConfig`. Before validation, environment variables named
``FRACNS_<KEY>`` replace top-level keys and ``FRACNS_<SECTION>__<KEY>``
replace nested ones; their values are parsed as JSON when possible.
"""

import json
import os
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Mapping, Optional, Union

from pydantic import (BaseModel, ConfigDict, Field, ValidationError, ValidationInfo,
                      field_validator)

from .exceptions import ConfigError
from .logging import get_logger
from .specfun import EvalPolicy
from .solver import SolverConfig
from .utils import TimeGrid

logger = get_logger(__name__)

ENV_PREFIX = "FRACNS_"
ENV_SEPARATOR = "__"

EXPERIMENTS = ("simulate", "limit-check", "uniqueness", "estimates",
               "gronwall-check", "specfun", "fracops")

ExperimentName = Literal["simulate", "limit-check", "uniqueness", "estimates",
                         "gronwall-check", "specfun", "fracops"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TaylorGreenData(_Section):
    """Taylor-Green vortex, optionally perturbed by random band-limited modes."""
    kind: Literal["taylor-green"] = "taylor-green"
    amplitude: float = Field(1.0, gt=0, description="Velocity amplitude")
    perturbation: float = Field(0.0, ge=0, description="RMS size of the random perturbation")
    band: Optional[int] = Field(None, ge=1, description="Perturbation band (default from M)")


class RandomData(_Section):
    """Random divergence-free field with modes |k_j| <= band."""
    kind: Literal["random-bandlimited"] = "random-bandlimited"
    seed: Optional[int] = Field(None, ge=0, description="Defaults to the top-level seed")
    band: int = Field(4, ge=1)
    amplitude: float = Field(0.1, gt=0)


class FileData(_Section):
    """Initial field read from a binary snapshot file."""
    kind: Literal["file"] = "file"
    path: Path


InitialData = Annotated[Union[TaylorGreenData, RandomData, FileData],
                        Field(discriminator="kind")]


class Tolerances(_Section):
    picard_tol: float = Field(1.0e-12, gt=0)
    picard_max_iters: int = Field(100, ge=1)
    ml_abs_tol: float = Field(1.0e-14, gt=0)
    ml_max_terms: int = Field(2000, ge=1)
    series_cutoff_radius: float = Field(10.0, gt=0)
    ml_z_max: float = Field(10.0, gt=0)


class SimulateSection(_Section):
    snapshot_every: int = Field(0, ge=0, description="0 writes only the first and last nodes")
    classical: bool = Field(False, description="Use the classical integrator (requires alpha = 1)")


class LimitCheckSection(_Section):
    alphas: List[float] = Field(default_factory=lambda: [0.9, 0.99, 0.999, 1.0], min_length=1)

    @field_validator("alphas")
    @classmethod
    def _alphas_in_range(cls, value: List[float]) -> List[float]:
        for alpha in value:
            if not 0.0 < alpha <= 1.0:
                raise ValueError(f"alpha {alpha} outside (0, 1]")
        return value


class UniquenessSection(_Section):
    alphas: Optional[List[float]] = Field(None, description="Orders to test (default: top-level alpha)")
    init_a: Literal["linear", "zero"] = "linear"
    init_b: Literal["linear", "zero"] = "zero"


class EstimatesSection(_Section):
    p: float = Field(2.0, ge=1)
    q: float = Field(2.0, ge=1)
    ensemble_size: int = Field(20, ge=1)
    band: int = Field(4, ge=1)
    forcing_amplitude: float = Field(1.0, gt=0)
    sobolev_p: float = Field(1.5, gt=1, description="p of the gradient/Sobolev and GNS checks")
    power_betas: List[float] = Field(default_factory=lambda: [1.0, 1.5, 2.0, 4.0])


class GronwallSection(_Section):
    perturbation: float = Field(1.0e-3, gt=0, description="RMS size of the second initial field")
    integrand: Literal["u", "v"] = "u"


class SpecfunSection(_Section):
    function: Literal["mittag-leffler", "mainardi", "mainardi-moment"] = "mittag-leffler"
    alphas: List[float] = Field(default_factory=lambda: [0.5], min_length=1)
    betas: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    arguments: List[float] = Field(default_factory=lambda: [-1.0, 0.0, 1.0], min_length=1)

    @field_validator("alphas")
    @classmethod
    def _alphas_in_range(cls, value: List[float], info: ValidationInfo) -> List[float]:
        # Mainardi functions and their moments need alpha < 1.
        closed = info.data.get("function") == "mittag-leffler"
        for alpha in value:
            if not (0.0 < alpha <= 1.0 if closed else 0.0 < alpha < 1.0):
                interval = "(0, 1]" if closed else "(0, 1)"
                raise ValueError(f"alpha {alpha} outside {interval}")
        return value

    @field_validator("betas")
    @classmethod
    def _betas_in_range(cls, value: List[float]) -> List[float]:
        for beta in value:
            if not 0.0 < beta <= 2.0:
                raise ValueError(f"beta {beta} outside (0, 2]")
        return value


class FracopsSection(_Section):
    operator: Literal["caputo", "rl"] = "caputo"
    order: float = Field(0.5, gt=0, le=1)
    signal: Literal["t", "t2", "sin"] = "t2"
    input: Optional[Path] = Field(None, description="CSV with columns t,h; overrides signal")


class ExperimentConfig(_Section):
    """Complete configuration of one run."""
    experiment: ExperimentName = "simulate"
    alpha: float = Field(0.8, gt=0, le=1)
    dim: Literal[2, 3] = 2
    resolution: int = Field(32, ge=4, description="Grid points per axis (even)")
    t_end: float = Field(1.0, gt=0)
    steps: int = Field(64, ge=1)
    seed: int = Field(0, ge=0)
    threads: Optional[int] = Field(None, ge=1)
    initial_data: InitialData = Field(default_factory=TaylorGreenData)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    output_dir: Path = Path("runs")
    simulate: SimulateSection = Field(default_factory=SimulateSection)
    limit_check: LimitCheckSection = Field(default_factory=LimitCheckSection)
    uniqueness: UniquenessSection = Field(default_factory=UniquenessSection)
    estimates: EstimatesSection = Field(default_factory=EstimatesSection)
    gronwall: GronwallSection = Field(default_factory=GronwallSection)
    specfun: SpecfunSection = Field(default_factory=SpecfunSection)
    fracops: FracopsSection = Field(default_factory=FracopsSection)

    @field_validator("resolution")
    @classmethod
    def _resolution_even(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"resolution must be even, got {value}")
        return value

    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.t_end, self.steps)

    def eval_policy(self) -> EvalPolicy:
        tol = self.tolerances
        return EvalPolicy(series_cutoff_radius=tol.series_cutoff_radius,
                          target_abs_tol=tol.ml_abs_tol,
                          max_terms=tol.ml_max_terms, z_max=tol.ml_z_max)

    def solver_config(self, alpha: Optional[float] = None) -> SolverConfig:
        return SolverConfig(alpha=self.alpha if alpha is None else alpha,
                            time=self.time_grid(),
                            picard_tol=self.tolerances.picard_tol,
                            picard_max_iters=self.tolerances.picard_max_iters,
                            ml_policy=self.eval_policy())

    def echo(self) -> Dict[str, Any]:
        """JSON-compatible dump used in run manifests."""
        return self.model_dump(mode="json")


def _parse_env_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def _set_nested(target: Dict[str, Any], keys: List[str], value: Any) -> None:
    node = target
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value


def apply_env_overrides(data: Dict[str, Any],
                        environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """
    Merge FRACNS_* variables into a raw configuration mapping.

    Args:
        data: Parsed configuration (modified copy is returned)
        environ: Variables to read (defaults to os.environ)

    Returns:
        New mapping with overrides applied
    """
    environ = os.environ if environ is None else environ
    merged = json.loads(json.dumps(data))
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        keys = [part.lower() for part in name[len(ENV_PREFIX):].split(ENV_SEPARATOR)]
        if not all(keys):
            raise ConfigError(f"malformed override variable {name}", key=name)
        _set_nested(merged, keys, _parse_env_value(environ[name]))
        logger.debug("override %s from %s", ".".join(keys), name)
    return merged


def apply_overrides(data: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Merge dotted-key overrides (command-line flags) into a raw mapping."""
    merged = json.loads(json.dumps(data))
    for dotted, value in overrides.items():
        if value is not None:
            _set_nested(merged, dotted.split("."), value)
    return merged


def _error_key(error: Mapping[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ()) if not isinstance(part, int)
                    and part not in ("taylor-green", "random-bandlimited", "file"))


def validate_config(data: Mapping[str, Any]) -> ExperimentConfig:
    """
    Validate a raw mapping.

    Raises:
        ConfigError: Naming the first offending key
    """
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = _error_key(first) or "<root>"
        raise ConfigError(f"invalid configuration key '{key}': {first['msg']}", key=key) from exc


def load_config(path: Optional[Path] = None,
                environ: Optional[Mapping[str, str]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Read, override and validate an experiment configuration.

    Args:
        path: JSON file; None starts from the defaults
        environ: Environment for FRACNS_* overrides (defaults to os.environ)
        overrides: Dotted-key overrides applied last

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: For unreadable files, invalid JSON or schema violations
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}", key="--config") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}", key="<root>") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object", key="<root>")
    data = apply_env_overrides(data, environ)
    if overrides:
        data = apply_overrides(data, overrides)
    return validate_config(data)
