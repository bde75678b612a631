"""Spectrally negative Levy loss components and their simulation.

A component's loss path is drift plus Brownian noise minus a compound Poisson
sum of nonnegative jump magnitudes. Only the terminal Brownian value is ever
simulated: no estimator in this package looks inside the window.

Simulation is pure in (component, horizon, seed), so paths can be generated
in any order or in parallel. Per-path seeds should come from
:func:`derive_seed`, which folds (root seed, component id, path index) into
one integer so that path sets are order-independent.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DomainError, ParameterError
from .severity import Mixture, SeverityDistribution


class RiskCategory(Enum):
    OBSERVED = "observed"
    IMAGINED = "imagined"
    SDS = "sds"


# reclassification may only move forward: sds -> imagined -> observed
_CATEGORY_ORDER = {RiskCategory.SDS: 0, RiskCategory.IMAGINED: 1, RiskCategory.OBSERVED: 2}


@dataclass(frozen=True)
class LevyComponent:
    """One catastrophic risk process.

    ``drift`` is the per-unit-time trend, ``diffusion`` the Brownian
    coefficient, ``jump_rate`` the Poisson arrival rate of losses, and
    ``commencement`` the time the process starts existing.
    """

    component_id: str
    drift: float
    diffusion: float
    jump_rate: float
    severity: SeverityDistribution
    category: RiskCategory = RiskCategory.OBSERVED
    commencement: float = 0.0

    def __post_init__(self):
        if self.diffusion < 0.0:
            raise ParameterError(f"diffusion must be >= 0, got {self.diffusion}")
        if self.jump_rate < 0.0:
            raise ParameterError(f"jump_rate must be >= 0, got {self.jump_rate}")
        if self.commencement < 0.0:
            raise ParameterError(f"commencement must be >= 0, got {self.commencement}")

    def reclassify(self, category: RiskCategory) -> "LevyComponent":
        """Move the component forward along sds -> imagined -> observed."""
        if _CATEGORY_ORDER[category] < _CATEGORY_ORDER[self.category]:
            raise DomainError(
                f"cannot reclassify {self.category.value} as {category.value}: "
                "category transitions are irreversible"
            )
        return LevyComponent(
            self.component_id,
            self.drift,
            self.diffusion,
            self.jump_rate,
            self.severity,
            category,
            self.commencement,
        )


@dataclass(frozen=True)
class PathSample:
    """One simulated trajectory, reduced to its sufficient statistics."""

    component_id: str
    horizon: float
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    brownian_terminal: float
    terminal_value: float
    seed: int

    def __post_init__(self):
        if len(self.jump_times) != len(self.jump_sizes):
            raise ParameterError("jump_times and jump_sizes must have equal length")
        if len(self.jump_times) and np.any(np.diff(self.jump_times) < 0.0):
            raise ParameterError("jump_times must be sorted")

    @property
    def jump_count(self) -> int:
        return len(self.jump_times)

    def reconstruct_terminal(self, component: LevyComponent) -> float:
        """Recompute the terminal value from stored fields; must equal
        ``terminal_value`` bit for bit."""
        elapsed = self.horizon - component.commencement
        return _terminal_value(
            component.drift,
            component.diffusion,
            elapsed,
            self.brownian_terminal,
            self.jump_sizes,
        )


def _terminal_value(
    drift: float,
    diffusion: float,
    elapsed: float,
    brownian: float,
    jump_sizes: np.ndarray,
) -> float:
    # single expression shared by simulation and reconstruction so the
    # "exact reconstruction" invariant holds bitwise
    return drift * elapsed + diffusion * brownian - float(np.sum(jump_sizes))


def derive_seed(root_seed: int, component_id: str, path_index: int) -> int:
    """Deterministic per-(component, path) seed from one experiment root seed."""
    if root_seed < 0 or path_index < 0:
        raise DomainError("root_seed and path_index must be nonnegative")
    digest = hashlib.sha256(component_id.encode("utf-8")).digest()
    tag = int.from_bytes(digest[:8], "little")
    ss = np.random.SeedSequence([root_seed, tag, path_index])
    return int(ss.generate_state(1, np.uint64)[0])


def sample_path(component: LevyComponent, horizon: float, seed: int) -> PathSample:
    """Simulate one trajectory of ``component`` up to ``horizon``.

    Jump count is Poisson(jump_rate * elapsed); jump times are the sorted
    order statistics of uniforms on the window; jump sizes are i.i.d. from
    the severity distribution. Equal seeds give bit-identical paths.
    """
    if horizon < component.commencement:
        raise DomainError(
            f"horizon {horizon} precedes commencement {component.commencement}"
        )
    elapsed = horizon - component.commencement
    rng = np.random.default_rng(seed)
    # draw order is part of the determinism contract: count, times, sizes, noise
    count = int(rng.poisson(component.jump_rate * elapsed))
    times = np.sort(rng.uniform(component.commencement, horizon, count))
    sizes = component.severity.sample(rng, count)
    brownian = float(rng.normal(0.0, math.sqrt(elapsed)))
    terminal = _terminal_value(
        component.drift, component.diffusion, elapsed, brownian, sizes
    )
    return PathSample(
        component_id=component.component_id,
        horizon=horizon,
        jump_times=times,
        jump_sizes=sizes,
        brownian_terminal=brownian,
        terminal_value=terminal,
        seed=seed,
    )


def sample_paths(
    component: LevyComponent, horizon: float, root_seed: int, n_paths: int
) -> list[PathSample]:
    """Simulate ``n_paths`` independent trajectories under one root seed."""
    if n_paths < 0:
        raise DomainError("n_paths must be nonnegative")
    return [
        sample_path(component, horizon, derive_seed(root_seed, component.component_id, i))
        for i in range(n_paths)
    ]


def aggregate(components: Sequence[LevyComponent]) -> LevyComponent:
    """Sum independent components with a common commencement into one.

    Drifts and jump rates add, diffusions add in quadrature, and the summed
    severity is the rate-weighted mixture of the component severities.
    """
    if not components:
        raise DomainError("aggregate needs at least one component")
    if len(components) == 1:
        return components[0]
    start = components[0].commencement
    if any(c.commencement != start for c in components):
        raise DomainError(
            "aggregate requires equal commencements; simulate staggered "
            "components separately"
        )
    total_rate = math.fsum(c.jump_rate for c in components)
    if total_rate > 0.0:
        weighted = [(c.jump_rate, c.severity) for c in components if c.jump_rate > 0.0]
        if len(weighted) == 1:
            severity = weighted[0][1]
        else:
            severity = Mixture(
                components=tuple(s for _, s in weighted),
                weights=tuple(w for w, _ in weighted),
            )
    else:
        severity = components[0].severity  # never sampled at rate zero
    if all(c.category is RiskCategory.OBSERVED for c in components):
        category = RiskCategory.OBSERVED
    else:
        category = RiskCategory.IMAGINED
    return LevyComponent(
        component_id="+".join(c.component_id for c in components),
        drift=math.fsum(c.drift for c in components),
        diffusion=math.sqrt(math.fsum(c.diffusion**2 for c in components)),
        jump_rate=total_rate,
        severity=severity,
        category=category,
        commencement=start,
    )


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    horizon: float

    def __post_init__(self):
        if self.variance < 0.0:
            raise ParameterError(f"variance must be >= 0, got {self.variance}")


def theoretical_moments(component: LevyComponent, horizon: float) -> MomentSummary:
    """Closed-form mean and variance of the terminal value.

    mean = drift * dt - rate * dt * E[Z]; variance = diffusion^2 * dt +
    rate * dt * E[Z^2]. Raises if the severity variance is undefined.
    """
    if horizon < component.commencement:
        raise DomainError(
            f"horizon {horizon} precedes commencement {component.commencement}"
        )
    dt = horizon - component.commencement
    xi = component.severity.mean()
    second = component.severity.second_moment()
    mean = component.drift * dt - component.jump_rate * dt * xi
    variance = component.diffusion**2 * dt + component.jump_rate * dt * second
    return MomentSummary(mean=mean, variance=variance, horizon=horizon)


_PATH_CSV_HEADER = ["component_id", "path_index", "jump_time", "jump_size", "terminal_value"]


def write_paths_csv(paths: Iterable[PathSample], out: IO[str]) -> None:
    """One row per jump plus a terminal row carrying the terminal value."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_PATH_CSV_HEADER)
    for index, path in enumerate(paths):
        for t, z in zip(path.jump_times, path.jump_sizes):
            writer.writerow([path.component_id, index, repr(float(t)), repr(float(z)), ""])
        writer.writerow(
            [path.component_id, index, repr(float(path.horizon)), repr(0.0),
             repr(float(path.terminal_value))]
        )
