"""Frequency/severity estimators and the process-knowable risk estimate (PKRE).

Observed-history estimates come straight from event counts and jump sizes;
underwritten estimates arrive from a speculation round. Either way the
expected jump loss per unit time is rate times mean severity, and the PKRE
is the additive total over observed plus imagined components. Risks still in
the SDS set have no estimates and contribute nothing.

Everything here is a pure function over immutable inputs and safe to
evaluate in parallel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DomainError, NoEventsError, ParameterError


class EstimateSource(Enum):
    OBSERVED_HISTORY = "observed"
    UNDERWRITING = "underwriting"


@dataclass(frozen=True)
class RiskEstimate:
    """(rate, mean severity) for one component, with sampling provenance.

    ``xi_hat`` is None exactly when an observed window contained no events;
    the component then contributes zero to any loss total. ``total_loss``
    is the raw sum of observed jump sizes and is what makes the Wald
    identity (loss rate == total / window) exact for observed histories.
    """

    component_id: str
    lambda_hat: float
    xi_hat: float | None
    severity_variance: float
    window: float
    n_events: int
    source: EstimateSource
    round: int | None = None
    total_loss: float | None = None

    def __post_init__(self):
        if self.window <= 0.0:
            raise DomainError(f"window must be > 0, got {self.window}")
        if self.lambda_hat < 0.0:
            raise ParameterError(f"lambda_hat must be >= 0, got {self.lambda_hat}")
        if self.severity_variance < 0.0:
            raise ParameterError(
                f"severity_variance must be >= 0, got {self.severity_variance}"
            )
        if self.n_events < 0:
            raise ParameterError(f"n_events must be >= 0, got {self.n_events}")
        if self.xi_hat is not None and self.xi_hat < 0.0:
            raise ParameterError(f"xi_hat must be >= 0, got {self.xi_hat}")
        if self.source is EstimateSource.OBSERVED_HISTORY:
            if self.lambda_hat != self.n_events / self.window:
                raise ParameterError(
                    "observed-history estimates must satisfy lambda_hat == "
                    f"n_events / window; got {self.lambda_hat} != "
                    f"{self.n_events / self.window}"
                )
            if self.n_events == 0 and self.xi_hat is not None:
                raise ParameterError("xi_hat is undefined for a zero-event window")
            if self.n_events > 0 and self.xi_hat is None:
                raise ParameterError("xi_hat is required once events were observed")
        else:
            if self.xi_hat is None:
                raise ParameterError("underwriting must supply xi_hat")
            if self.round is None:
                raise ParameterError("underwriting estimates carry a round index")


def estimate_from_observation(
    component_id: str, jump_sizes: Sequence[float], window: float
) -> RiskEstimate:
    """Build an observed-history estimate from one window of jump data."""
    if window <= 0.0:
        raise DomainError(f"window must be > 0, got {window}")
    sizes = np.asarray(jump_sizes, dtype=float)
    n = len(sizes)
    if n == 0:
        return RiskEstimate(
            component_id=component_id,
            lambda_hat=0.0,
            xi_hat=None,
            severity_variance=0.0,
            window=window,
            n_events=0,
            source=EstimateSource.OBSERVED_HISTORY,
            total_loss=0.0,
        )
    total = float(np.sum(sizes))
    sample_var = float(np.var(sizes, ddof=1)) if n > 1 else 0.0
    return RiskEstimate(
        component_id=component_id,
        lambda_hat=n / window,
        xi_hat=total / n,
        severity_variance=sample_var,
        window=window,
        n_events=n,
        source=EstimateSource.OBSERVED_HISTORY,
        total_loss=total,
    )


@dataclass(frozen=True)
class FrequencyEstimate:
    rate: float
    variance: float


def estimate_frequency(event_count: int, window: float) -> FrequencyEstimate:
    """rate = N / T with sampling variance rate / T."""
    if window <= 0.0:
        raise DomainError(f"window must be > 0, got {window}")
    if event_count < 0:
        raise DomainError(f"event_count must be >= 0, got {event_count}")
    rate = event_count / window
    return FrequencyEstimate(rate=rate, variance=rate / window)


@dataclass(frozen=True)
class SeverityEstimate:
    mean: float
    variance: float          # sampling variance of the mean: s^2 / n
    sample_variance: float   # unbiased s^2 of the jump sizes themselves
    n: int


def estimate_severity(jump_sizes: Sequence[float]) -> SeverityEstimate:
    """Sample mean of jump sizes; undefined (not zero) on an empty sample."""
    sizes = np.asarray(jump_sizes, dtype=float)
    n = len(sizes)
    if n == 0:
        raise NoEventsError("mean severity is undefined with no observed events")
    mean = float(np.mean(sizes))
    sample_var = float(np.var(sizes, ddof=1)) if n > 1 else 0.0
    return SeverityEstimate(mean=mean, variance=sample_var / n, sample_variance=sample_var, n=n)


def expected_jump_loss(estimate: RiskEstimate) -> float:
    """Expected loss per unit time: rate times mean severity.

    For observed histories this equals total_loss / window exactly, not just
    up to rounding, which is the identity the whole estimate rests on.
    """
    if estimate.total_loss is not None:
        return estimate.total_loss / estimate.window
    if estimate.xi_hat is None:
        return 0.0
    return estimate.lambda_hat * estimate.xi_hat


def jump_loss_variance(
    lambda_hat: float,
    xi_hat: float,
    severity_variance: float,
    window: float,
    *,
    form: str = "mgf",
) -> float:
    """Sampling variance of the per-unit-time loss estimate.

    The default ``mgf`` form is rate * (mean^2 + variance) / window, the
    compound-process second moment. ``form="literal"`` switches to
    rate * (mean + variance) / window, an alternative first-power form kept
    selectable for comparison; the two are deliberately not reconciled.
    """
    if window <= 0.0:
        raise DomainError(f"window must be > 0, got {window}")
    if form == "mgf":
        return lambda_hat * (xi_hat * xi_hat + severity_variance) / window
    if form == "literal":
        return (lambda_hat * xi_hat + lambda_hat * severity_variance) / window
    raise DomainError(f"unknown variance form {form!r}; expected 'mgf' or 'literal'")


def estimate_loss_variance(estimate: RiskEstimate, *, form: str = "mgf") -> float:
    """Loss variance of one estimate; zero-event windows contribute zero."""
    if estimate.xi_hat is None:
        return 0.0
    return jump_loss_variance(
        estimate.lambda_hat,
        estimate.xi_hat,
        estimate.severity_variance,
        estimate.window,
        form=form,
    )


@dataclass(frozen=True)
class PKREComponent:
    component_id: str
    source: EstimateSource
    loss_rate: float
    loss_variance: float


@dataclass(frozen=True)
class PKREResult:
    """Additive loss totals over the observed and imagined estimate sets."""

    round: int
    observed_total: float
    imagined_total: float
    total: float
    variance: float
    components: tuple[PKREComponent, ...]


def _check_unique(estimates: Sequence[RiskEstimate], label: str) -> None:
    seen = set()
    for est in estimates:
        if est.component_id in seen:
            raise DomainError(f"duplicate component id {est.component_id!r} in {label} set")
        seen.add(est.component_id)


def compute_pkre(
    observed: Sequence[RiskEstimate],
    imagined: Sequence[RiskEstimate],
    round_index: int,
) -> PKREResult:
    """Total expected jump loss and its variance over both estimate sets."""
    _check_unique(observed, "observed")
    _check_unique(imagined, "imagined")
    rows = []
    for est in list(observed) + list(imagined):
        rows.append(
            PKREComponent(
                component_id=est.component_id,
                source=est.source,
                loss_rate=expected_jump_loss(est),
                loss_variance=estimate_loss_variance(est),
            )
        )
    n_obs = len(observed)
    observed_total = math.fsum(r.loss_rate for r in rows[:n_obs])
    imagined_total = math.fsum(r.loss_rate for r in rows[n_obs:])
    return PKREResult(
        round=round_index,
        observed_total=observed_total,
        imagined_total=imagined_total,
        total=math.fsum(r.loss_rate for r in rows),
        variance=math.fsum(r.loss_variance for r in rows),
        components=tuple(rows),
    )


_ESTIMATE_CSV_HEADER = [
    "component_id", "source", "round", "lambda_hat", "xi_hat",
    "severity_var", "window", "n_events",
]


def write_estimates_csv(estimates: Iterable[RiskEstimate], out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_ESTIMATE_CSV_HEADER)
    for est in estimates:
        writer.writerow(
            [
                est.component_id,
                est.source.value,
                "" if est.round is None else est.round,
                repr(est.lambda_hat),
                "" if est.xi_hat is None else repr(est.xi_hat),
                repr(est.severity_variance),
                repr(est.window),
                est.n_events,
            ]
        )


def read_estimates_csv(source: IO[str]) -> list[RiskEstimate]:
    reader = csv.DictReader(source)
    estimates = []
    for row in reader:
        estimates.append(
            RiskEstimate(
                component_id=row["component_id"],
                lambda_hat=float(row["lambda_hat"]),
                xi_hat=float(row["xi_hat"]) if row["xi_hat"] else None,
                severity_variance=float(row["severity_var"]),
                window=float(row["window"]),
                n_events=int(row["n_events"]),
                source=EstimateSource(row["source"]),
                round=int(row["round"]) if row["round"] else None,
                total_loss=None,
            )
        )
    return estimates
