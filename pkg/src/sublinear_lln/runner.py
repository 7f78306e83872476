"""Experiment orchestration: conditions, convergence, proof chain, reports."""

from __future__ import annotations

import hashlib
import json
import logging
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import ValidationError
from .proof_chain import ProofChainReport, proof_chain_check, write_proof_csv
from .scenario import ConvergenceReport, convergence_experiment, write_convergence_csv
from .truncation import (
    check_psi_vanishes,
    check_uniform_integrability,
    cesaro_condition,
    kolmogorov_condition,
    mu_bounds,
    psi_profile,
    write_means_csv,
    write_psi_csv,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONDITION_FAIL = 3
EXIT_EXECUTION_ERROR = 4

PSI_CSV = "psi_profiles.csv"
MEANS_CSV = "truncated_means.csv"
CONVERGENCE_CSV = "convergence.csv"
PROOF_CSV = "proof_chain.csv"
SUMMARY = "summary.json"
MANIFEST = "manifest.json"
ARTIFACTS = (PSI_CSV, MEANS_CSV, CONVERGENCE_CSV, PROOF_CSV, SUMMARY, MANIFEST)


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    files: list[dict[str, Any]] = field(default_factory=list)
    total_seconds: float = 0.0
    stage_seconds: dict[str, float] = field(default_factory=dict)
    status: str = "ok"
    failed_stage: str | None = None
    error: str | None = None
    output_dir: Path | None = None

    @property
    def exit_code(self) -> int:
        return {"ok": EXIT_OK, "condition_fail": EXIT_CONDITION_FAIL}.get(self.status, EXIT_EXECUTION_ERROR)

    def to_record(self) -> dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "status": self.status,
            "exit_code": self.exit_code,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "files": self.files,
            "stage_seconds": self.stage_seconds,
            "total_seconds": self.total_seconds,
        }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n")


def _prepare_dir(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    foreign = sorted(p.name for p in out.iterdir() if p.name not in ARTIFACTS)
    if foreign:
        # every file in the output directory must be one the manifest lists
        raise ValidationError("output_dir", f"contains files this run does not produce: {foreign[:5]}")
    for name in ARTIFACTS:
        (out / name).unlink(missing_ok=True)


class _Stages:
    """Times each stage and remembers which one was running when an error hit."""

    def __init__(self, manifest: RunManifest):
        self.manifest = manifest
        self.current: str | None = None

    def __call__(self, name: str):
        self.current = name
        return self

    def __enter__(self):
        self.t0 = time.perf_counter()
        log.info("stage %s", self.current)
        return self

    def __exit__(self, *exc):
        self.manifest.stage_seconds[self.current] = time.perf_counter() - self.t0
        return False


def _conditions(cfg: ExperimentConfig, summary: dict) -> tuple[bool, Any, Any]:
    model, tol = cfg.model, cfg.tolerances
    profiles = [psi_profile(model, n, cfg.y_grid) for n in cfg.n_schedule]
    write_psi_csv(profiles, cfg.output_dir / PSI_CSV)
    write_means_csv((mu_bounds(model, n) for n in cfg.n_schedule), cfg.output_dir / MEANS_CSV)

    vanish = check_psi_vanishes(model, cfg.n_schedule, cfg.vanish_grid, tol["psi"])
    ui = check_uniform_integrability(profiles, cfg.m_schedule, tol["ui"])

    members = []
    for amb, _ in model.groups(cfg.n_schedule[-1]):
        for m in amb.members:
            if m not in members:
                members.append(m)
    kolmogorov = [kolmogorov_condition(m, cfg.t_schedule, tol["kolmogorov"]) for m in members]
    cesaro = [cesaro_condition(model, n, tol["cesaro"]) for n in cfg.n_schedule]

    summary["conditions"] = {
        "psi_vanishes": {
            "passed": vanish.passed,
            "worst_n": vanish.worst_n,
            "worst_y": vanish.worst_y,
            "worst_value": vanish.worst_value,
            "trend_ok": vanish.trend_ok,
            "tol": tol["psi"],
        },
        "uniform_integrability": {
            "passed": ui.passed,
            "M": list(ui.m_schedule),
            "sup_tail_integral": list(ui.sup_tail_integrals),
            "tol": tol["ui"],
        },
        "kolmogorov": [
            {"member": m.to_record(), "passed": k.passed, "t": list(k.t_schedule), "value": list(k.values)}
            for m, k in zip(members, kolmogorov)
        ],
        "cesaro": [
            {"n": n, "value": c.value, "raw_sum": c.raw_sum, "passed": c.passed}
            for n, c in zip(cfg.n_schedule, cesaro)
        ],
    }
    ok = vanish.passed and ui.passed and all(k.passed for k in kolmogorov) and all(c.passed for c in cesaro)
    summary["conditions"]["all_passed"] = ok
    return ok, vanish, ui


def _convergence(cfg: ExperimentConfig, summary: dict, vanish, ui) -> None:
    reports: list[ConvergenceReport] = []
    if cfg.model.is_product:
        for eps in cfg.epsilons:
            reports.append(convergence_experiment(cfg.model, eps, cfg.n_schedule, cfg.budget, vanish, ui))
        summary["convergence"] = [
            {
                "epsilon": r.epsilon,
                "n": r.n,
                "v_upper_hat": r.upper.value,
                "v_lower_hat": r.lower.value,
                "v_band_hat": r.band.value,
                "search_converged": r.converged,
            }
            for rep in reports
            for r in rep.rows
        ]
    else:
        summary["convergence"] = "skipped: path capacities need product dependence"
    write_convergence_csv(reports, cfg.output_dir / CONVERGENCE_CSV)


def _proof(cfg: ExperimentConfig, summary: dict) -> None:
    report = ProofChainReport(())
    if cfg.model.is_product and cfg.proof_n:
        report = proof_chain_check(cfg.model, cfg.proof_n, cfg.proof_epsilon, cfg.budget)
        summary["proof_chain"] = {"all_hold": report.all_hold, "n": list(cfg.proof_n), "epsilon": cfg.proof_epsilon}
    else:
        summary["proof_chain"] = "skipped: needs product dependence and at least one n"
    write_proof_csv(report, cfg.output_dir / PROOF_CSV)


def run(cfg: ExperimentConfig) -> RunManifest:
    """Execute every stage, write all artifacts and return the manifest.

    Condition failures are results, not errors: the run continues and the
    manifest status becomes ``condition_fail``.  Any exception stops the run
    and is recorded with the stage it happened in.
    """
    t_start = time.perf_counter()
    out = cfg.output_dir
    manifest = RunManifest(cfg.config_hash(), __version__, output_dir=out)
    summary: dict[str, Any] = {
        "name": cfg.name,
        "config_hash": manifest.config_hash,
        "model": {"product": cfg.model.is_product, "iid": cfg.model.is_iid},
        "n_schedule": list(cfg.n_schedule),
        "epsilon": list(cfg.epsilons),
        "budget": {
            "mc_reps": cfg.budget.mc_reps,
            "restarts": cfg.budget.restarts,
            "max_passes": cfg.budget.max_passes,
            "seed": cfg.budget.seed,
        },
    }
    stage = _Stages(manifest)
    conditions_ok = True
    try:
        stage("setup")
        _prepare_dir(out)
        with stage("conditions"):
            conditions_ok, vanish, ui = _conditions(cfg, summary)
        with stage("convergence"):
            _convergence(cfg, summary, vanish, ui)
        with stage("proof_chain"):
            _proof(cfg, summary)
        manifest.status = "ok" if conditions_ok else "condition_fail"
    except Exception as exc:  # recorded, then reported through the exit code
        manifest.status = "error"
        manifest.failed_stage = stage.current
        manifest.error = f"{type(exc).__name__}: {exc}"
        log.debug("run failed\n%s", traceback.format_exc())

    summary["status"] = manifest.status
    if manifest.failed_stage is not None:
        summary["failed_stage"] = manifest.failed_stage
        summary["error"] = manifest.error
    if manifest.failed_stage == "setup":
        # never write into a directory we refused to take over
        manifest.total_seconds = time.perf_counter() - t_start
        return manifest
    try:
        _dump(summary, out / SUMMARY)
    except (OSError, TypeError, ValueError) as exc:
        manifest.status, manifest.failed_stage = "error", manifest.failed_stage or "report"
        manifest.error = manifest.error or f"{type(exc).__name__}: {exc}"

    if out.is_dir():
        for name in ARTIFACTS[:-1]:
            p = out / name
            if p.exists():
                manifest.files.append({"path": name, "bytes": p.stat().st_size, "sha256": _sha256(p)})
        # the manifest cannot hash itself
        manifest.files.append({"path": MANIFEST, "bytes": None, "sha256": None})
        manifest.total_seconds = time.perf_counter() - t_start
        _dump(manifest.to_record(), out / MANIFEST)
    return manifest
