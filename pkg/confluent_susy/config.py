"""
Confluent SUSY Toolkit - Configuration
RunConfig models loaded from TOML with command-line and environment overrides
"""

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .schrodinger_core import Grid, PoschlTeller, PotentialSpec, Tabulated
from .wronskian import AUTO, CONVENTIONS

logger = logging.getLogger(__name__)

OUT_ENV_VAR = "CONFLUENT_SUSY_OUT"

Constant = Union[float, Literal["auto"]]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialConfig(_Section):
    kind: Literal["poschl_teller", "tabulated"] = "poschl_teller"
    path: Optional[str] = None


class TransformConfig(_Section):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    order: int = Field(4, ge=1)
    lambda_: float = Field(-0.5, alias="lambda")
    constants: List[Constant] = Field(default_factory=list)
    constant_convention: Literal["asymptotic", "anchor"] = "asymptotic"


class SeedConfig(_Section):
    mode: Literal["closed_form", "ivp"] = "closed_form"
    y0: float = 1e-6
    dy0: float = 1e-6
    method: Optional[Literal["integral", "ivp"]] = None


class PsiConfig(_Section):
    energy: float = -1.0
    mode: Literal["closed_form", "ivp", "none"] = "closed_form"
    y0: float = 1e-6
    dy0: float = 1e-6


class GridConfig(_Section):
    x_min: float = -15.0
    x_max: float = 15.0
    n_points: int = Field(6001, ge=9)

    def build(self) -> Grid:
        return Grid(self.x_min, self.x_max, self.n_points)


class ToleranceConfig(_Section):
    residual_tol: float = Field(1e-5, gt=0)
    unity: float = Field(1e-4, gt=0)
    orthogonality: float = Field(1e-4, gt=0)
    reconciliation: float = Field(1e-5, gt=0)
    parametric: float = Field(1e-4, gt=0)
    reduction_of_order: float = Field(1e-5, gt=0)


class OutputConfig(_Section):
    dir: str = "output"
    force: bool = False


class SpectrumConfig(_Section):
    count: int = Field(2, ge=1)


class RunConfig(_Section):
    """Complete description of one transformation run"""

    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    transform: TransformConfig = Field(default_factory=TransformConfig)
    seed: SeedConfig = Field(default_factory=SeedConfig)
    psi: PsiConfig = Field(default_factory=PsiConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)
    outputs: OutputConfig = Field(default_factory=OutputConfig)
    spectrum: SpectrumConfig = Field(default_factory=SpectrumConfig)

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        constants = self.transform.constants
        if constants and len(constants) != self.transform.order:
            raise ValueError(
                f"constants has {len(constants)} entries but order is {self.transform.order}"
            )
        if self.potential.kind == "tabulated" and not self.potential.path:
            raise ValueError("a tabulated potential needs [potential].path")
        if self.potential.kind != "poschl_teller":
            if self.seed.mode == "closed_form":
                raise ValueError("the closed-form seed only applies to the Pöschl-Teller potential")
            if self.psi.mode == "closed_form":
                raise ValueError("the closed-form psi only applies to the Pöschl-Teller potential")
        if self.seed.mode == "closed_form" and self.transform.lambda_ >= 0:
            raise ValueError(f"the closed-form seed needs lambda < 0, got {self.transform.lambda_}")
        if self.grid.x_min >= self.grid.x_max:
            raise ValueError("grid x_min must be below x_max")
        return self

    @property
    def tower_constants(self) -> List[Constant]:
        return list(self.transform.constants) or [AUTO] * self.transform.order

    def build_potential(self) -> PotentialSpec:
        if self.potential.kind == "tabulated":
            return Tabulated(self.potential.path)
        return PoschlTeller()


def _parse_constants(text: str) -> List[Constant]:
    values: List[Constant] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        values.append(AUTO if item.lower() == AUTO else float(item))
    return values


def _parse_grid(text: str) -> Dict[str, Any]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"--grid expects x_min,x_max,n_points, got '{text}'")
    return {"x_min": float(parts[0]), "x_max": float(parts[1]), "n_points": int(parts[2])}


def apply_overrides(raw: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Merge command-line overrides (None means 'not given') into the raw TOML mapping"""
    if not overrides:
        return raw
    merged = {key: dict(value) if isinstance(value, dict) else value for key, value in raw.items()}
    transform = merged.setdefault("transform", {})
    try:
        if overrides.get("lambda") is not None:
            transform["lambda"] = float(overrides["lambda"])
        if overrides.get("order") is not None:
            transform["order"] = int(overrides["order"])
            if overrides.get("constants") is None and len(transform.get("constants", [])) != transform["order"]:
                transform.pop("constants", None)
        if overrides.get("constants") is not None:
            transform["constants"] = _parse_constants(overrides["constants"])
        if overrides.get("grid") is not None:
            merged["grid"] = _parse_grid(overrides["grid"])
    except ValueError as e:
        raise ConfigError(f"Invalid override: {e}") from e
    if overrides.get("out") is not None:
        merged.setdefault("outputs", {})["dir"] = overrides["out"]
    if overrides.get("force"):
        merged.setdefault("outputs", {})["force"] = True
    if overrides.get("count") is not None:
        merged.setdefault("spectrum", {})["count"] = int(overrides["count"])
    if overrides.get("residual_tol") is not None:
        tolerances = merged.setdefault("tolerances", {})
        for key in ToleranceConfig.model_fields:
            tolerances[key] = float(overrides["residual_tol"])
    return merged


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Load a RunConfig from TOML and apply overrides

    Output directory precedence is --out, then CONFLUENT_SUSY_OUT, then [outputs].dir.

    Args:
        path: TOML file (None for defaults)
        overrides: Flag values keyed by lambda, order, constants, grid, out, force, count, residual_tol

    Returns:
        Validated RunConfig
    """
    load_dotenv()
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as handle:
                raw = tomllib.load(handle)
        except (OSError, tomllib.TOMLDecodeError) as e:
            logger.error(f"Reading config {path} failed: {e}")
            raise ConfigError(f"Cannot read config {path}: {e}") from e

    env_out = os.getenv(OUT_ENV_VAR)
    if env_out and not (overrides or {}).get("out"):
        raw.setdefault("outputs", {})["dir"] = env_out

    raw = apply_overrides(raw, overrides)
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
    if config.transform.constant_convention not in CONVENTIONS:
        raise ConfigError(f"Unknown constant convention {config.transform.constant_convention}")
    logger.info(
        f"Loaded config: order {config.transform.order}, lambda {config.transform.lambda_}, "
        f"constants {config.tower_constants}"
    )
    return config
