"""Experiment orchestration and result persistence (CSV / JSON)."""

import csv
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from .config import NetworkConfig
from .detectors import detector_state
from .detequiv import det_equiv_se, det_equiv_sinr
from .estimation import estimator_coefficients
from .geometry import build_layout, drop_users
from .performance import prepare_scenario, simulate_schemes
from .pilots import allocate_pilots, channel_inversion_power, dft_pilot_book

CSV_COLUMNS = (
    "scheme", "M", "K", "beta", "drop", "sum_se", "sum_se_stderr",
    "detequiv_sum_se", "trials", "seed",
)

# Sub-stream tags keep the drop stream independent of the (M, beta) sweep
# cell, so one drop id denotes the same user placement across a whole sweep.
_DROP_STREAM = 1
_TRIAL_STREAM = 2


@dataclass
class ResultRow:
    """One (scheme, sweep-cell, drop) measurement."""

    scheme: str
    M: int
    K: int
    beta: int
    drop: int
    sum_se: Optional[float]
    sum_se_stderr: Optional[float]
    detequiv_sum_se: Optional[float]
    trials: int
    seed: int
    per_cell_sum_se: Optional[list] = None  # emitted in JSON only
    error: Optional[str] = None


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def _sig9(x) -> Optional[float]:
    if x is None:
        return None
    return float(f"{float(x):.9g}")


def drop_rng(seed: int, drop_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, _DROP_STREAM, drop_id)))


def trial_rng(seed: int, drop_id: int, M: int, beta: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((seed, _TRIAL_STREAM, drop_id, M, beta))
    )


def run_experiment(config: NetworkConfig, workers: int = 1,
                   monte_carlo: bool = True) -> ResultTable:
    """Drops x (M, beta) sweep x schemes, with a deterministic-equivalent
    companion value on every M-MMSE row.

    Per-cell random substreams are derived from the seed and the cell
    coordinates, so any sweep cell reproduces identically when run alone.
    Scheme failures (e.g. multi-cell ZF at M <= B) become per-row error
    records instead of aborting the sweep.
    """
    layout = build_layout(config.radius_m)
    table = ResultTable(metadata={
        "seed": config.seed,
        "version": _package_version(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "trials": config.trials,
        "drops": config.drops,
        "schemes": list(config.schemes),
        "z_mode": config.z_mode,
        "tau_subscript_mode": config.tau_subscript_mode,
        "monte_carlo": monte_carlo,
    })
    drops = {}
    for drop_id in range(config.drops):
        drops[drop_id] = drop_users(
            layout, config.K, drop_rng(config.seed, drop_id),
            kappa=config.kappa, sigma_sf_sq=config.sigma_sf_sq,
            min_dist_frac=config.min_dist_frac,
        )
    for M in config.M:
        for beta in config.beta:
            alloc = allocate_pilots(layout, beta, config.K)
            book = dft_pilot_book(alloc.B)
            prelog = config.prelog(beta)
            for drop_id in range(config.drops):
                drop = drops[drop_id]
                powers = channel_inversion_power(drop, config.rho)
                est_state = estimator_coefficients(alloc, powers, drop, config.sigma2)
                det_state = detector_state(alloc, powers, drop, est_state)
                de_report = det_equiv_sinr(
                    drop, alloc, powers, est_state, det_state, config.sigma2, M
                )
                det_equiv_se(de_report, config.S)
                de_sum = de_report.sum_se_per_cell()
                reports = {}
                if monte_carlo:
                    runnable = [
                        s for s in config.schemes
                        if not (s == "M-ZF" and M <= alloc.B)
                    ]
                    if runnable:
                        scn = prepare_scenario(
                            drop, alloc, powers, book, config.sigma2, M,
                            z_mode=config.z_mode,
                            tau_subscript_mode=config.tau_subscript_mode,
                        )
                        reports = simulate_schemes(
                            scn, runnable, config.trials,
                            trial_rng(config.seed, drop_id, M, beta),
                            prelog, workers=workers,
                        )
                for scheme in config.schemes:
                    row = ResultRow(
                        scheme=scheme, M=M, K=config.K, beta=beta, drop=drop_id,
                        sum_se=None, sum_se_stderr=None, detequiv_sum_se=None,
                        trials=config.trials if monte_carlo else 0,
                        seed=config.seed,
                    )
                    if scheme == "M-MMSE":
                        row.detequiv_sum_se = de_sum
                    if monte_carlo:
                        if scheme in reports:
                            rep = reports[scheme]
                            row.sum_se = rep.sum_se_per_cell
                            row.sum_se_stderr = rep.sum_se_stderr
                            row.per_cell_sum_se = [
                                float(v) for v in rep.per_user_se.sum(axis=1)
                            ]
                        else:
                            row.error = (
                                f"M-ZF infeasible: M={M} <= B={alloc.B}"
                            )
                    table.rows.append(row)
    return table


def _package_version() -> str:
    from . import __version__

    return __version__


def emit_results(table: ResultTable, format: str, path: str) -> None:
    """Write the table; CSV uses the fixed column schema, JSON mirrors it
    (plus per-cell values and error notes).  Floats carry 9 significant
    digits in both formats."""
    if format == "csv":
        _emit_csv(table, path)
    elif format == "json":
        _emit_json(table, path)
    else:
        raise ValueError(f"unknown format {format!r}; use csv or json")


def _emit_csv(table: ResultTable, path: str) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in table.rows:
                writer.writerow([
                    row.scheme, row.M, row.K, row.beta, row.drop,
                    _fmt(row.sum_se), _fmt(row.sum_se_stderr),
                    _fmt(row.detequiv_sum_se), row.trials, row.seed,
                ])
    except OSError as exc:
        raise OSError(f"cannot write CSV results to {path}: {exc}") from exc


def _fmt(x) -> str:
    return "" if x is None else f"{float(x):.9g}"


def _emit_json(table: ResultTable, path: str) -> None:
    rows = []
    for row in table.rows:
        d = asdict(row)
        for key in ("sum_se", "sum_se_stderr", "detequiv_sum_se"):
            d[key] = _sig9(d[key])
        if d["per_cell_sum_se"] is not None:
            d["per_cell_sum_se"] = [_sig9(v) for v in d["per_cell_sum_se"]]
        rows.append(d)
    payload = {"metadata": table.metadata, "rows": rows}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write JSON results to {path}: {exc}") from exc


def read_results(path: str, format: str) -> ResultTable:
    """Parse a previously emitted results file back into a table."""
    if format == "csv":
        return _read_csv(path)
    if format == "json":
        return _read_json(path)
    raise ValueError(f"unknown format {format!r}; use csv or json")


def _read_csv(path: str) -> ResultTable:
    table = ResultTable()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is not None and tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns in {path}: {reader.fieldnames}")
        for rec in reader:
            table.rows.append(ResultRow(
                scheme=rec["scheme"], M=int(rec["M"]), K=int(rec["K"]),
                beta=int(rec["beta"]), drop=int(rec["drop"]),
                sum_se=float(rec["sum_se"]) if rec["sum_se"] else None,
                sum_se_stderr=(
                    float(rec["sum_se_stderr"]) if rec["sum_se_stderr"] else None
                ),
                detequiv_sum_se=(
                    float(rec["detequiv_sum_se"]) if rec["detequiv_sum_se"] else None
                ),
                trials=int(rec["trials"]), seed=int(rec["seed"]),
            ))
    return table


def _read_json(path: str) -> ResultTable:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    rows = [ResultRow(**rec) for rec in payload["rows"]]
    return ResultTable(rows=rows, metadata=payload.get("metadata", {}))
