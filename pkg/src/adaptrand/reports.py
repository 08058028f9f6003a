"""Report builders: simulation tables, the ECMO reanalysis, and analytic grids.

A :class:`Report` is a kind tag, a parameter dict, and a list of rows
(one per parameter setting, columns named ``<design>_<stat>``).  Every
simulated cell is accompanied by a ``_se`` Monte Carlo standard-error
column.  Analytic cells are rounded to six significant digits at build
time; CSV and JSON serialization round-trip the report exactly.

Seeding: each simulated cell derives its own master seed from the
report's master seed and the cell's label via SHA-256, so cells are
reproducible in isolation and independent of each other.  Cells that
are compared under common random numbers (the same row's designs) share
the row seed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from .asymptotics import crlb, dbcd_variance, sigma_closed, sigma_general, wald_power
from .designs import DesignConfig, parse_design
from .simulate import SimulationSummary, monte_carlo
from .targets import (
    BinaryParams,
    TargetAllocation,
    TargetDomainError,
    TargetParams,
    evaluate,
)
from .trial import Bernoulli, ResponseModel

SCHEMA = "adaptrand-report-v1"
DEFAULT_SEED = 20090543
DEFAULT_REPS = 10_000

# The binary success-probability settings of the two simulation tables.
TABLE_ROWS: tuple[tuple[float, float], ...] = (
    (0.9, 0.7), (0.9, 0.6), (0.9, 0.5), (0.9, 0.3),
    (0.8, 0.8), (0.8, 0.7), (0.8, 0.6), (0.7, 0.5),
    (0.7, 0.3), (0.6, 0.4), (0.5, 0.5), (0.5, 0.2),
    (0.4, 0.3), (0.2, 0.2),
)

ECMO_P1 = 65.0 / 93.0
ECMO_P2 = 38.0 / 92.0
ECMO_N = 185
ECMO_ACTUAL_DEATHS = 82

__all__ = [
    "SCHEMA",
    "DEFAULT_SEED",
    "DEFAULT_REPS",
    "TABLE_ROWS",
    "ECMO_P1",
    "ECMO_P2",
    "ECMO_N",
    "ECMO_ACTUAL_DEATHS",
    "Report",
    "derive_seed",
    "sig6",
    "report_table1",
    "report_table2",
    "report_ecmo",
    "report_asymptotics",
    "report_simulate",
]


def derive_seed(master_seed: int, label: str) -> int:
    """Stable 64-bit sub-seed for a labeled cell of a report."""
    digest = hashlib.sha256(f"{master_seed}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def sig6(x: float) -> float:
    """Round to six significant digits (the precision of analytic cells)."""
    return float(f"{x:.6g}")


@dataclass
class Report:
    kind: str
    params: dict[str, Any]
    columns: list[str]
    rows: list[dict[str, Any]]
    schema: str = SCHEMA

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": self.schema,
                "kind": self.kind,
                "params": self.params,
                "columns": self.columns,
                "rows": self.rows,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Report":
        obj = json.loads(text)
        return cls(
            kind=obj["kind"],
            params=obj["params"],
            columns=list(obj["columns"]),
            rows=[dict(r) for r in obj["rows"]],
            schema=obj["schema"],
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema={self.schema}\n")
        buf.write(f"# kind={self.kind}\n")
        buf.write(f"# params={json.dumps(self.params, sort_keys=True)}\n")
        writer = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _cell_to_text(row.get(k)) for k in self.columns})
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Report":
        meta: dict[str, str] = {}
        lines = text.splitlines()
        body_start = 0
        for i, line in enumerate(lines):
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                meta[key] = value
                body_start = i + 1
            else:
                break
        reader = csv.DictReader(io.StringIO("\n".join(lines[body_start:])))
        rows = [{k: _cell_from_text(v) for k, v in raw.items()} for raw in reader]
        return cls(
            kind=meta["kind"],
            params=json.loads(meta["params"]),
            columns=list(reader.fieldnames or []),
            rows=rows,
            schema=meta["schema"],
        )

    def write(self, path: str, fmt: str) -> None:
        text = self.to_csv() if fmt == "csv" else self.to_json()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()


def _cell_to_text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _cell_from_text(text: str | None) -> Any:
    if text is None or text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


# ---------------------------------------------------------------------------
# Simulation-summary cells
# ---------------------------------------------------------------------------


def _summary_cells(prefix: str, s: SimulationSummary) -> dict[str, Any]:
    cells = {
        f"{prefix}_mean": s.mean_prop,
        f"{prefix}_mean_se": s.mean_prop_se,
        f"{prefix}_nvar": s.n_var,
        f"{prefix}_nvar_se": s.n_var_se,
    }
    return cells


def _mc(design: DesignConfig, model: ResponseModel, n: int, reps: int, seed: int,
        parallelism: int) -> SimulationSummary:
    return monte_carlo(design, model, n=n, reps=reps, master_seed=seed, parallelism=parallelism)


# ---------------------------------------------------------------------------
# Table reports
# ---------------------------------------------------------------------------

_TABLE1_DESIGNS = (
    ("erade_half", "erade:0.5", "urn"),
    ("erade_two_thirds", "erade:0.6666666666666666", "urn"),
    ("dl", "dl:5,5,1", None),
    ("dbcd", "dbcd:2.0", "urn"),
)

_TABLE2_DESIGNS = (
    ("erade_half", "erade:0.5", "rsihr"),
    ("erade_two_thirds", "erade:0.6666666666666666", "rsihr"),
    ("dbcd", "dbcd:2.0", "rsihr"),
)


def _table_report(kind: str, designs, target_kind: str, reps: int, n: int, seed: int,
                  parallelism: int) -> Report:
    target = TargetAllocation(target_kind)
    rows = []
    for p1, p2 in TABLE_ROWS:
        model = Bernoulli(p1, p2)
        params = BinaryParams(p1, p2)
        row: dict[str, Any] = {
            "p1": p1,
            "p2": p2,
            "target": sig6(evaluate(target, params)),
            "sigma_sq": sig6(sigma_closed(target, params)),
            "dbcd_sigma_sq": sig6(dbcd_variance(2.0, target, params)),
        }
        # One seed per row: the designs of a row run under common random numbers.
        row_seed = derive_seed(seed, f"{kind}/p1={p1!r}/p2={p2!r}")
        for prefix, rule_text, tgt in designs:
            design = parse_design(rule_text, target=tgt)
            row.update(_summary_cells(prefix, _mc(design, model, n, reps, row_seed, parallelism)))
        rows.append(row)
    columns = list(rows[0].keys())
    return Report(
        kind=kind,
        params={"reps": reps, "n": n, "master_seed": seed},
        columns=columns,
        rows=rows,
    )


def report_table1(reps: int = DEFAULT_REPS, n: int = 100, seed: int = DEFAULT_SEED,
                  parallelism: int = 1) -> Report:
    """Urn-target comparison: discrete coin (two alphas), drop-the-loser, DBCD."""
    return _table_report("table1", _TABLE1_DESIGNS, "urn", reps, n, seed, parallelism)


def report_table2(reps: int = DEFAULT_REPS, n: int = 100, seed: int = DEFAULT_SEED,
                  parallelism: int = 1) -> Report:
    """Failure-minimizing binary target: discrete coin (two alphas) versus DBCD."""
    return _table_report("table2", _TABLE2_DESIGNS, "rsihr", reps, n, seed, parallelism)


# ---------------------------------------------------------------------------
# ECMO reanalysis
# ---------------------------------------------------------------------------


def _ecmo_design_row(name: str, design: DesignConfig, model: Bernoulli, reps: int,
                     seed: int, parallelism: int) -> dict[str, Any]:
    s = _mc(design, model, ECMO_N, reps, seed, parallelism)
    box = s.boxplot_n1()
    n1 = s.n1.astype(np.float64)
    n2 = ECMO_N - n1
    cond_power = np.array(
        [wald_power(model.p1, model.p2, a, b) if a >= 1 and b >= 1 else 0.0
         for a, b in zip(n1, n2)]
    )
    return {
        "design": name,
        "mean_n1": s.mean_n1,
        "mean_n1_se": float(n1.std(ddof=1) / np.sqrt(s.reps)),
        "mean_deaths": s.mean_failures,
        "mean_deaths_se": s.mean_failures_se,
        "nvar": s.n_var,
        "nvar_se": s.n_var_se,
        "power": s.power,
        "power_se": s.power_se,
        "mean_conditional_power": float(cond_power.mean()),
        "p_n2_gt_52": s.count_n2_greater(52) / s.reps,
        "p_n2_le_39": s.count_n2_at_most(39) / s.reps,
        "count_n2_ge_n1": s.count_n2_ge_n1(),
        "box_low": box.whisker_low,
        "box_q1": box.q1,
        "box_median": box.median,
        "box_q3": box.q3,
        "box_high": box.whisker_high,
        "outliers": json.dumps(list(box.outliers)),
    }


def report_ecmo(reps: int = DEFAULT_REPS, seed: int = DEFAULT_SEED,
                parallelism: int = 1) -> Report:
    """Reanalysis of the 185-patient two-arm trial under adaptive designs.

    Success probabilities are the observed rates of the equal-allocation
    trial; the report compares the discrete efficient coin against the
    play-the-winner urn, including death counts against the actual
    trial's 82.
    """
    model = Bernoulli(ECMO_P1, ECMO_P2)
    rows = [
        _ecmo_design_row(
            "erade_half_urn",
            parse_design("erade:0.5", target="urn"),
            model, reps, derive_seed(seed, "ecmo/erade"), parallelism,
        ),
        _ecmo_design_row(
            "rpw_1_1",
            parse_design("rpw:1,1"),
            model, reps, derive_seed(seed, "ecmo/rpw"), parallelism,
        ),
    ]
    return Report(
        kind="ecmo",
        params={
            "reps": reps,
            "n": ECMO_N,
            "master_seed": seed,
            "p1": ECMO_P1,
            "p2": ECMO_P2,
            "actual_trial_deaths": ECMO_ACTUAL_DEATHS,
            "analytic_target": sig6(evaluate(TargetAllocation("urn"), BinaryParams(ECMO_P1, ECMO_P2))),
            "analytic_sigma_sq": sig6(sigma_general(TargetAllocation("urn"), BinaryParams(ECMO_P1, ECMO_P2))),
        },
        columns=list(rows[0].keys()),
        rows=rows,
    )


# ---------------------------------------------------------------------------
# Analytic grid
# ---------------------------------------------------------------------------


def report_asymptotics(target: TargetAllocation, grid: list[TargetParams],
                       gamma: float = 2.0) -> Report:
    """Target proportion, variance, efficiency bound, and DBCD variance per point."""
    rows = []
    for point in grid:
        if isinstance(point, BinaryParams):
            row: dict[str, Any] = {"p1": point.p1, "p2": point.p2}
        else:
            row = {"mu1": point.mu1, "mu2": point.mu2, "tau1": point.tau1, "tau2": point.tau2}
        try:
            row.update(
                {
                    "target": sig6(evaluate(target, point)),
                    "sigma_sq": sig6(sigma_general(target, point)),
                    "crlb": sig6(crlb(target, point)),
                    "dbcd_sigma_sq": sig6(dbcd_variance(gamma, target, point)),
                    "status": "ok",
                }
            )
        except TargetDomainError as exc:
            row.update({"target": None, "sigma_sq": None, "crlb": None,
                        "dbcd_sigma_sq": None, "status": str(exc)})
        rows.append(row)
    first = rows[0] if rows else {"status": "ok"}
    return Report(
        kind="asymptotics",
        params={"target": target.kind if target.kind != "fixed" else f"fixed:{target.rho0!r}",
                "gamma": gamma},
        columns=list(first.keys()),
        rows=rows,
    )


# ---------------------------------------------------------------------------
# Ad hoc simulation
# ---------------------------------------------------------------------------


def report_simulate(design: DesignConfig, model: ResponseModel, n: int, reps: int,
                    seed: int = DEFAULT_SEED, parallelism: int = 1) -> Report:
    """One-row report for a custom design/model setting."""
    s = monte_carlo(design, model, n=n, reps=reps, master_seed=seed, parallelism=parallelism)
    box = s.boxplot_n1()
    row: dict[str, Any] = {
        "design": s.design,
        "target": s.target,
        "mean_prop": s.mean_prop,
        "mean_prop_se": s.mean_prop_se,
        "nvar": s.n_var,
        "nvar_se": s.n_var_se,
        "power": s.power,
        "power_se": s.power_se,
        "mean_failures": s.mean_failures,
        "box_low": box.whisker_low,
        "box_q1": box.q1,
        "box_median": box.median,
        "box_q3": box.q3,
        "box_high": box.whisker_high,
    }
    if isinstance(model, Bernoulli):
        model_params: dict[str, Any] = {"family": "bernoulli", "p1": model.p1, "p2": model.p2}
    else:
        model_params = {
            "family": "gaussian",
            "mu1": model.mu1, "mu2": model.mu2, "tau1": model.tau1, "tau2": model.tau2,
        }
    return Report(
        kind="simulate",
        params={"reps": reps, "n": n, "master_seed": seed, **model_params},
        columns=list(row.keys()),
        rows=[row],
    )
