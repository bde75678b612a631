"""Command-line front end.

Subcommands: simulate, estimate, gap-study, narrative-check, run-process,
stopping. Every command is deterministic given (config, seed); reports embed
the seed. Exit status: 0 all checks passed, 1 a tolerance check failed,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from . import oracles
from .config import (
    ComponentSpec,
    ExperimentConfig,
    detection_profile,
    engine_config,
    parse_components,
    resolve_config,
    scripted_rounds,
    _as_float,
)
from .engine import (
    CostModel,
    RoundDeltas,
    RoundLedger,
    continuation_constant,
    optimal_stopping_brute,
    run_round,
    write_ledger,
)
from .errors import ConfigError, DarkspecError, NarrativeSyntaxError
from .estimation import (
    estimate_from_observation,
    read_estimates_csv,
    write_estimates_csv,
)
from .narrative import parse_narrative, validate
from .process import derive_seed, sample_path, theoretical_moments, write_paths_csv


@dataclass(frozen=True)
class ReportRow:
    name: str
    formula_value: float
    oracle_value: float
    tolerance: float

    @property
    def abs_error(self) -> float:
        return abs(self.oracle_value - self.formula_value)

    @property
    def rel_error(self) -> float:
        scale = abs(self.formula_value)
        return self.abs_error / scale if scale > 0.0 else self.abs_error

    @property
    def passed(self) -> bool:
        return self.abs_error <= self.tolerance


@dataclass
class Report:
    rows: list[ReportRow]
    seed: int
    duration: float

    @property
    def all_pass(self) -> bool:
        return all(row.passed for row in self.rows)

    def write_csv(self, out: IO[str], long_format: bool = False) -> None:
        writer = csv.writer(out, lineterminator="\n")
        if long_format:
            writer.writerow(["name", "field", "value"])
            for row in self.rows:
                for field_name in (
                    "formula_value", "oracle_value", "abs_error", "rel_error", "tolerance",
                ):
                    writer.writerow([row.name, field_name, repr(getattr(row, field_name))])
                writer.writerow([row.name, "pass", str(row.passed).lower()])
        else:
            writer.writerow(
                ["name", "formula_value", "oracle_value", "abs_error",
                 "rel_error", "tolerance", "pass"]
            )
            for row in self.rows:
                writer.writerow(
                    [row.name, repr(row.formula_value), repr(row.oracle_value),
                     repr(row.abs_error), repr(row.rel_error), repr(row.tolerance),
                     str(row.passed).lower()]
                )

    def print_summary(self, title: str) -> None:
        print(f"{title} (seed={self.seed}, duration={self.duration:.2f}s)")
        for row in self.rows:
            status = "PASS" if row.passed else "FAIL"
            print(
                f"  [{status}] {row.name}: formula={row.formula_value:.6g} "
                f"oracle={row.oracle_value:.6g} abs_err={row.abs_error:.3g} "
                f"tol={row.tolerance:.3g}"
            )
        print("  overall:", "PASS" if self.all_pass else "FAIL")


def _write_report(report: Report, cfg: ExperimentConfig, filename: str, title: str) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / filename, "w", encoding="utf-8") as out:
        report.write_csv(out, long_format=cfg.long_format)
    report.print_summary(title)
    return 0 if report.all_pass else 1


# ---------------------------------------------------------------------------
# simulate


def _simulate_terminals(spec: ComponentSpec, horizon: float, reps: int, seed: int):
    component = spec.component
    terminals = np.empty(reps)
    paths = []
    for i in range(reps):
        path = sample_path(
            component, horizon, derive_seed(seed, component.component_id, i)
        )
        terminals[i] = path.terminal_value
        paths.append(path)
    return paths, terminals


def cmd_simulate(cfg: ExperimentConfig) -> int:
    start = time.perf_counter()
    specs = parse_components(cfg.values)
    horizon = _as_float(cfg.values, "horizon")
    rows = []
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "paths.csv", "w", encoding="utf-8") as out:
        all_paths = []
        per_component = {}
        for spec in specs:
            paths, terminals = _simulate_terminals(spec, horizon, cfg.reps, cfg.seed)
            all_paths.extend(paths)
            per_component[spec.component.component_id] = terminals
        write_paths_csv(all_paths, out)
    for spec in specs:
        component = spec.component
        terminals = per_component[component.component_id]
        moments = theoretical_moments(component, horizon)
        emp_mean = float(np.mean(terminals))
        se = (
            float(np.std(terminals, ddof=1) / math.sqrt(cfg.reps))
            if cfg.reps > 1
            else 0.0
        )
        rows.append(
            ReportRow(
                name=f"{component.component_id}.mean",
                formula_value=moments.mean,
                oracle_value=emp_mean,
                tolerance=3.0 * se,
            )
        )
        if cfg.reps > 1:
            emp_var = float(np.var(terminals, ddof=1))
            rows.append(
                ReportRow(
                    name=f"{component.component_id}.variance",
                    formula_value=moments.variance,
                    oracle_value=emp_var,
                    tolerance=cfg.tolerance * abs(moments.variance),
                )
            )
    report = Report(rows=rows, seed=cfg.seed, duration=time.perf_counter() - start)
    return _write_report(report, cfg, "moment_report.csv", "simulate")


# ---------------------------------------------------------------------------
# estimate


def cmd_estimate(cfg: ExperimentConfig) -> int:
    start = time.perf_counter()
    specs = parse_components(cfg.values)
    horizon = _as_float(cfg.values, "horizon")
    rows = []
    estimates = []
    for spec in specs:
        component = spec.component
        pooled = []
        for i in range(cfg.reps):
            path = sample_path(
                component, horizon, derive_seed(cfg.seed, component.component_id, i)
            )
            pooled.extend(path.jump_sizes.tolist())
        window = cfg.reps * (horizon - component.commencement)
        estimate = estimate_from_observation(component.component_id, pooled, window)
        estimates.append(estimate)
        rate_se = math.sqrt(component.jump_rate / window) if window > 0 else 0.0
        rows.append(
            ReportRow(
                name=f"{component.component_id}.lambda_hat",
                formula_value=component.jump_rate,
                oracle_value=estimate.lambda_hat,
                tolerance=3.0 * rate_se,
            )
        )
        if estimate.xi_hat is not None and estimate.n_events > 1:
            mean_se = math.sqrt(estimate.severity_variance / estimate.n_events)
            rows.append(
                ReportRow(
                    name=f"{component.component_id}.xi_hat",
                    formula_value=component.severity.mean(),
                    oracle_value=estimate.xi_hat,
                    tolerance=3.0 * mean_se,
                )
            )
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "estimates.csv", "w", encoding="utf-8") as out:
        write_estimates_csv(estimates, out)
    report = Report(rows=rows, seed=cfg.seed, duration=time.perf_counter() - start)
    return _write_report(report, cfg, "estimate_report.csv", "estimate")


# ---------------------------------------------------------------------------
# gap study


def cmd_gap_study(cfg: ExperimentConfig) -> int:
    start = time.perf_counter()
    specs = parse_components(cfg.values)
    profile = detection_profile(specs)  # validates pi before any simulation
    sigma_eps = tuple(spec.sigma_eps for spec in specs)
    with_error = any(s > 0.0 for s in sigma_eps)
    study = oracles.gap_study_rows(
        components=[spec.component for spec in specs],
        pis=profile.pis,
        window=_as_float(cfg.values, "window", 1.0),
        bias_reps=cfg.reps,
        var_reps=cfg.reps,
        seed=cfg.seed,
        sigma_eps=sigma_eps if with_error else None,
    )
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "gap_report.csv", "w", encoding="utf-8") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(
            ["component_id", "pi", "bias_formula", "bias_mc",
             "var_gap_formula", "var_gap_mc", "abs_error", "rel_error"]
        )
        for row in study:
            writer.writerow(
                [row.component_id, repr(row.pi), repr(row.bias_formula),
                 repr(row.bias_mc), repr(row.var_gap_formula), repr(row.var_gap_mc),
                 repr(row.abs_error), repr(row.rel_error)]
            )
    rows = []
    for row in study:
        rows.append(
            ReportRow(
                name=f"{row.component_id}.bias",
                formula_value=row.bias_formula,
                oracle_value=row.bias_mc,
                tolerance=max(cfg.tolerance * abs(row.bias_formula), 1e-9),
            )
        )
        rows.append(
            ReportRow(
                name=f"{row.component_id}.var_gap",
                formula_value=row.var_gap_formula,
                oracle_value=row.var_gap_mc,
                tolerance=max(cfg.tolerance * abs(row.var_gap_formula), 1e-9),
            )
        )
    report = Report(rows=rows, seed=cfg.seed, duration=time.perf_counter() - start)
    return _write_report(report, cfg, "gap_summary.csv", "gap-study")


# ---------------------------------------------------------------------------
# narrative check


def cmd_narrative_check(cfg: ExperimentConfig) -> int:
    if not cfg.files:
        raise ConfigError("narrative-check needs at least one narrative file")
    any_violations = False
    for name in cfg.files:
        text = Path(name).read_text(encoding="utf-8")
        narrative = parse_narrative(text)
        report = validate(narrative)
        if report.ok:
            print(
                f"{name}: ok (risk={narrative.risk_id}, "
                f"happenings={narrative.happening_count})"
            )
        else:
            any_violations = True
            print(f"{name}: {len(report.violations)} violation(s)")
            for violation in report.violations:
                print(f"  [{violation.code}] {violation.message}")
    return 1 if any_violations else 0


# ---------------------------------------------------------------------------
# run process


def cmd_run_process(cfg: ExperimentConfig) -> int:
    if not cfg.files:
        raise ConfigError("run-process needs at least one narrative file")
    narratives = []
    for name in cfg.files:
        narrative = parse_narrative(Path(name).read_text(encoding="utf-8"))
        report = validate(narrative)
        if not report.ok:
            # abort before round 1, listing every violation
            lines = "; ".join(f"[{v.code}] {v.message}" for v in report.violations)
            raise ConfigError(f"narrative {name} failed validation: {lines}")
        narratives.append(narrative)
    engine = engine_config(cfg.values)
    rounds = scripted_rounds(cfg.values)
    observed = []
    if "observed_csv" in cfg.values:
        with open(cfg.values["observed_csv"], "r", encoding="utf-8") as source:
            observed = read_estimates_csv(source)
    ledger = RoundLedger()
    for index, script in enumerate(rounds):
        narrative = narratives[index % len(narratives)]
        if narrative.round != ledger.next_round:
            # scripted reuse of one narrative file across rounds is allowed;
            # renumber so the ledger's strict round ordering holds
            narrative = _renumber(narrative, ledger.next_round, index)
        ledger = run_round(
            ledger,
            narrative,
            lambda _n, u=script.underwriting: u,
            observed,
            engine,
            script.benefits,
            sponsored=script.sponsored,
        )
        record = ledger.records[-1]
        red = "-" if record.red_line is None else ("RED-LINE" if record.red_line else "ok")
        print(
            f"round {record.round}: risk={record.risk_id} PKRE={record.pkre_total!r} "
            f"decision={record.decision} red_line={red}"
        )
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_ledger(ledger, cfg.out / "ledger.jsonl")
    print(f"ledger: {cfg.out / 'ledger.jsonl'} ({len(ledger.records)} rounds)")
    return 0


def _renumber(narrative, round_index: int, file_index: int):
    risk = narrative.risk_id if file_index == 0 else f"{narrative.risk_id}-{file_index}"
    return replace(narrative, round=round_index, risk_id=risk)


# ---------------------------------------------------------------------------
# stopping


def cmd_stopping(cfg: ExperimentConfig) -> int:
    start = time.perf_counter()
    rho = _as_float(cfg.values, "stopping.rho", 1.0)
    if "stopping.utilities" in cfg.values:
        utilities = [float(u) for u in cfg.values["stopping.utilities"].split(",")]
        gate_utilities = None
    else:
        horizon = int(_as_float(cfg.values, "stopping.R_max", 20))
        initial = _as_float(cfg.values, "stopping.delta_initial")
        decay = _as_float(cfg.values, "stopping.delta_decay")
        cost = _as_float(cfg.values, "cost.c_write") + _as_float(cfg.values, "cost.c_spec")
        deltas = [initial * decay**r for r in range(1, horizon + 1)]
        utilities = [d - cost for d in deltas]
        gate_utilities = (deltas, cost)
    result = optimal_stopping_brute(utilities, rho)
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "stopping.csv", "w", encoding="utf-8") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["round", "utility", "value_if_stop_here"])
        for r, u in enumerate(utilities, start=1):
            writer.writerow([r, repr(u), repr(result.values[r])])
    print(f"tau_star = {result.tau_star} (horizon {len(utilities)}, rho={rho})")
    rows = []
    if gate_utilities is not None and rho == 1.0:
        deltas, cost = gate_utilities
        gate_costs = CostModel.constant(
            c_write=_as_float(cfg.values, "cost.c_write"),
            c_spec=_as_float(cfg.values, "cost.c_spec"),
        )
        completed = 0
        for r, delta in enumerate(deltas, start=1):
            gate = continuation_constant(
                gate_costs, RoundDeltas(statistical=delta, mitigation=0.0, option=0.0)
            )
            if not gate.continue_:
                break
            completed = r
        rows.append(
            ReportRow(
                name="gate_vs_brute",
                formula_value=float(result.tau_star),
                oracle_value=float(completed),
                tolerance=0.0,
            )
        )
    report = Report(rows=rows, seed=cfg.seed, duration=time.perf_counter() - start)
    return _write_report(report, cfg, "stopping_report.csv", "stopping")


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "gap-study": cmd_gap_study,
    "narrative-check": cmd_narrative_check,
    "run-process": cmd_run_process,
    "stopping": cmd_stopping,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="flat key=value config file")
    shared.add_argument("--seed", type=int, help="root random seed")
    shared.add_argument("--reps", type=int, help="replication count")
    shared.add_argument("--out", help="output directory")
    shared.add_argument("--tolerance", type=float, help="relative tolerance for checks")
    shared.add_argument(
        "--long", action="store_true", help="emit plot-ready long-format report CSV"
    )
    parser = argparse.ArgumentParser(
        prog="darkspec",
        description="Catastrophic-risk simulation, estimation, and speculation rounds",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub = subparsers.add_parser(name, parents=[shared])
        sub.add_argument("files", nargs="*", help="narrative files (where relevant)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(
            kind=args.command,
            config_path=args.config,
            files=tuple(args.files),
            seed=args.seed,
            reps=args.reps,
            out=args.out,
            tolerance=args.tolerance,
            long_format=args.long,
        )
        return _COMMANDS[args.command](cfg)
    except NarrativeSyntaxError as exc:
        print(f"error: narrative parse failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, DarkspecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
