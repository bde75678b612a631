"""Flat key=value experiment configuration.

One `key = value` pair per line, '#' comments. Command-line flags override
file values. Components are declared under `component.<id>.<field>`, engine
settings under `cost.*`, `quality.*`, `weights.*`, `redline.*`, and
`stopping.*`, scripted rounds under `round.<n>.<field>`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .baseline import ConstantDetection
from .engine import (
    CostModel,
    EngineConfig,
    LossWeights,
    NarrativeQuality,
    PsiShape,
    RedLineConfig,
    RoundBenefits,
    UnderwritingResult,
)
from .errors import ConfigError
from .process import LevyComponent, RiskCategory
from .severity import (
    Degenerate,
    Exponential,
    LogNormal,
    Pareto,
    SeverityDistribution,
)

_EXPERIMENT_KINDS = (
    "simulate", "estimate", "gap-study", "narrative-check", "run-process", "stopping",
)

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def load_config_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{path}:{line_no}: empty key")
        if key in values:
            raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
        values[key] = value
    return values


def _as_float(values: Mapping[str, str], key: str, default: float | None = None) -> float:
    if key not in values:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(values[key])
    except ValueError:
        raise ConfigError(f"key {key!r} must be a number, got {values[key]!r}")


def _as_int(values: Mapping[str, str], key: str, default: int | None = None) -> int:
    if key not in values:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(values[key])
    except ValueError:
        raise ConfigError(f"key {key!r} must be an integer, got {values[key]!r}")


def _as_bool(values: Mapping[str, str], key: str, default: bool = False) -> bool:
    if key not in values:
        return default
    text = values[key].lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ConfigError(f"key {key!r} must be a boolean, got {values[key]!r}")


@dataclass(frozen=True)
class ComponentSpec:
    """A component plus the counterfactual extras a gap study needs."""

    component: LevyComponent
    pi: float | None = None
    sigma_eps: float = 0.0


def _severity_from(values: Mapping[str, str], prefix: str) -> SeverityDistribution:
    family = values.get(f"{prefix}.severity")
    if family is None:
        raise ConfigError(f"missing required key '{prefix}.severity'")
    family = family.lower()
    if family == "exponential":
        if f"{prefix}.severity_mean" in values:
            return Exponential.from_mean(_as_float(values, f"{prefix}.severity_mean"))
        return Exponential(rate=_as_float(values, f"{prefix}.severity_rate"))
    if family == "lognormal":
        return LogNormal(
            mu=_as_float(values, f"{prefix}.severity_mu"),
            sigma=_as_float(values, f"{prefix}.severity_sigma"),
        )
    if family == "pareto":
        return Pareto(
            scale=_as_float(values, f"{prefix}.severity_scale"),
            shape=_as_float(values, f"{prefix}.severity_shape"),
        )
    if family == "degenerate":
        return Degenerate(value=_as_float(values, f"{prefix}.severity_value"))
    raise ConfigError(f"unknown severity family {family!r} for {prefix}")


def parse_components(values: Mapping[str, str]) -> list[ComponentSpec]:
    ids = sorted(
        {
            key.split(".", 2)[1]
            for key in values
            if key.startswith("component.") and key.count(".") >= 2
        }
    )
    if not ids:
        raise ConfigError("no components declared (component.<id>.<field> keys)")
    specs = []
    for cid in ids:
        prefix = f"component.{cid}"
        category_text = values.get(f"{prefix}.category", "observed").lower()
        try:
            category = RiskCategory(category_text)
        except ValueError:
            raise ConfigError(f"unknown category {category_text!r} for component {cid}")
        component = LevyComponent(
            component_id=cid,
            drift=_as_float(values, f"{prefix}.drift", 0.0),
            diffusion=_as_float(values, f"{prefix}.diffusion", 0.0),
            jump_rate=_as_float(values, f"{prefix}.jump_rate"),
            severity=_severity_from(values, prefix),
            category=category,
            commencement=_as_float(values, f"{prefix}.commencement", 0.0),
        )
        pi = None
        if f"{prefix}.pi" in values:
            pi = _as_float(values, f"{prefix}.pi")
        specs.append(
            ComponentSpec(
                component=component,
                pi=pi,
                sigma_eps=_as_float(values, f"{prefix}.sigma_eps", 0.0),
            )
        )
    return specs


def detection_profile(specs: list[ComponentSpec]) -> ConstantDetection:
    pis = []
    for spec in specs:
        if spec.pi is None:
            raise ConfigError(
                f"component {spec.component.component_id!r} needs a 'pi' for a gap study"
            )
        pis.append(spec.pi)
    try:
        return ConstantDetection(tuple(pis))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def engine_config(values: Mapping[str, str]) -> EngineConfig:
    if _as_bool(values, "cost.variable", False):
        costs = CostModel.variable_cost(
            c_write=_as_float(values, "cost.c_write"),
            c_obs=_as_float(values, "cost.c_obs", 0.0),
        )
    else:
        costs = CostModel.constant(
            c_write=_as_float(values, "cost.c_write"),
            c_spec=_as_float(values, "cost.c_spec"),
            c_obs=_as_float(values, "cost.c_obs", 0.0),
        )
    shape_text = values.get("weights.psi_shape", "quadratic").lower()
    try:
        shape = PsiShape(shape_text)
    except ValueError:
        raise ConfigError(f"unknown psi_shape {shape_text!r}")
    weights = LossWeights(
        d1=_as_float(values, "weights.D1", 1.0),
        d2=_as_float(values, "weights.D2", 1.0),
        psi_shape=shape,
        phi=_as_float(values, "weights.phi", 1.0),
    )
    quality = None
    if any(key.startswith("quality.") for key in values):
        quality = NarrativeQuality(
            sigma2_max=_as_float(values, "quality.sigma2_max"),
            sigma2_min=_as_float(values, "quality.sigma2_min"),
            eta=_as_float(values, "quality.eta"),
        )
    redline = None
    if "redline.nu_star" in values:
        redline = RedLineConfig(nu_star=_as_float(values, "redline.nu_star"))
    try:
        return EngineConfig(costs=costs, weights=weights, quality=quality, redline=redline)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class ScriptedRound:
    underwriting: UnderwritingResult
    benefits: RoundBenefits
    sponsored: bool


def scripted_rounds(values: Mapping[str, str]) -> list[ScriptedRound]:
    indices = sorted(
        {
            int(key.split(".", 2)[1])
            for key in values
            if key.startswith("round.") and key.count(".") >= 2
        }
    )
    if not indices:
        raise ConfigError("no scripted rounds declared (round.<n>.<field> keys)")
    if indices != list(range(1, len(indices) + 1)):
        raise ConfigError(f"round indices must run 1..{len(indices)}, got {indices}")
    rounds = []
    for n in indices:
        prefix = f"round.{n}"
        rounds.append(
            ScriptedRound(
                underwriting=UnderwritingResult(
                    lambda_hat=_as_float(values, f"{prefix}.lambda_hat"),
                    xi_hat=_as_float(values, f"{prefix}.xi_hat"),
                    severity_variance=_as_float(values, f"{prefix}.severity_var", 0.0),
                    window=_as_float(values, f"{prefix}.window", 1.0),
                ),
                benefits=RoundBenefits(
                    mitigation=_as_float(values, f"{prefix}.mitigation", 0.0),
                    option=_as_float(values, f"{prefix}.option", 0.0),
                ),
                sponsored=_as_bool(values, f"{prefix}.sponsored", False),
            )
        )
    return rounds


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment settings after file and flag merging."""

    kind: str
    seed: int
    reps: int
    out: Path
    tolerance: float
    long_format: bool
    values: dict[str, str] = field(default_factory=dict)
    files: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in _EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if self.tolerance <= 0.0:
            raise ConfigError(f"tolerance must be > 0, got {self.tolerance}")
        referenced = list(self.files)
        if self.values.get("observed_csv"):
            referenced.append(self.values["observed_csv"])
        for name in referenced:
            if not Path(name).exists():
                raise ConfigError(f"referenced file not found: {name}")


def resolve_config(
    kind: str,
    config_path: str | None,
    files: tuple[str, ...],
    seed: int | None,
    reps: int | None,
    out: str | None,
    tolerance: float | None,
    long_format: bool,
) -> ExperimentConfig:
    values = load_config_file(config_path) if config_path else {}
    return ExperimentConfig(
        kind=kind,
        seed=seed if seed is not None else _as_int(values, "seed", 0),
        reps=reps if reps is not None else _as_int(values, "reps", 10_000),
        out=Path(out if out is not None else values.get("out", ".")),
        tolerance=(
            tolerance if tolerance is not None else _as_float(values, "tolerance", 0.05)
        ),
        long_format=long_format,
        values=dict(values),
        files=files,
    )
