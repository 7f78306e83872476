"""Experiment configuration: a single JSON document.

Top-level fields (all but ``model``, ``n_schedule``, ``epsilon`` and
``budget.seed`` have defaults)::

    {
      "name": "bounded_twopoint",
      "model": {
        "rule": [<distribution>, ...]            # one ambiguity set for every k
        # or "coordinates": [[<distribution>, ...], ...]
        "dependence": "product"                   # default
        # or {"pair_rule": [{"atoms": [[a, b, p], ...]}, ...]}
        # or {"joint_pairs": [{"pair": [i, k], "laws": [{"atoms": [...]}]}]}
      },
      "epsilon": [0.1],
      "n_schedule": [10, 100, 1000],
      "y_grid": {"kind": "default"} | {"kind": "uniform", "points": 20}
                | {"kind": "explicit", "points": [...]},
      "vanish_grid": same forms as y_grid; default uniform with 20 points,
      "M_schedule": [1, 2, 4, 8, 16],
      "t_schedule": [10, 100, 1000, 10000, 100000, 1000000],
      "tolerances": {"psi": 0.1, "ui": 0.05, "kolmogorov": 0.25, "cesaro": 0.05},
      "proof_chain": {"n": [1, 2, 5, 10, 100], "epsilon": 0.1},
      "budget": {"mc_reps": 1000, "restarts": 1, "max_passes": 5, "seed": 7},
      "output_dir": "out",
      "jobs": 1
    }

A distribution is ``{"kind": <tag>, <named parameters>}`` with tags
Normal(mean, stddev), Uniform(lo, hi), TwoPoint(low, high, p_high),
DiscreteAtoms(atoms: [[x, p], ...]), Pareto(alpha, scale),
Cauchy(location, scale) and SymmetricLogTail (no parameters).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .core import AmbiguitySet
from .distributions import from_record
from .errors import ParseError, SublinearError, ValidationError
from .scenario import EstimateBudget
from .truncation import JointLaw, SequenceModel, default_y_grid, vanishing_grid

DEFAULTS: dict[str, Any] = {
    "name": "experiment",
    "y_grid": {"kind": "default"},
    "vanish_grid": {"kind": "uniform", "points": 20},
    "M_schedule": [1, 2, 4, 8, 16],
    "t_schedule": [10, 100, 1000, 10000, 100000, 1000000],
    "tolerances": {"psi": 0.1, "ui": 0.05, "kolmogorov": 0.25, "cesaro": 0.05},
    "proof_chain": {"n": [1, 2, 5, 10, 100]},
    "output_dir": "out",
    "jobs": 1,
}
BUDGET_DEFAULTS = {"mc_reps": 1000, "restarts": 1, "max_passes": 5}
QUICK_FACTOR = 10
MIN_REPORTED_REPS = 100


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: SequenceModel
    epsilons: tuple[float, ...]
    n_schedule: tuple[int, ...]
    y_grid: np.ndarray = field(repr=False)
    vanish_grid: np.ndarray = field(repr=False)
    m_schedule: tuple[float, ...]
    t_schedule: tuple[float, ...]
    tolerances: dict[str, float]
    proof_n: tuple[int, ...]
    proof_epsilon: float
    budget: EstimateBudget
    output_dir: Path
    raw: dict[str, Any] = field(repr=False)

    @property
    def jobs(self) -> int:
        return self.budget.jobs

    def canonical_bytes(self) -> bytes:
        """Canonical JSON of everything that affects results (not paths or job count)."""
        content = {k: v for k, v in self.raw.items() if k not in ("output_dir", "jobs")}
        return json.dumps(content, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()


# ---------------------------------------------------------------- loading


def fixture_names() -> list[str]:
    root = resources.files("sublinear_lln") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def fixture_text(name: str) -> str:
    path = resources.files("sublinear_lln") / "fixtures" / f"{name}.json"
    if not path.is_file():
        raise ParseError(f"unknown fixture {name!r}; available: {fixture_names()}")
    return path.read_text()


def load_config(
    path: str | Path,
    *,
    seed: int | None = None,
    out_dir: str | Path | None = None,
    jobs: int | None = None,
    quick: bool = False,
) -> ExperimentConfig:
    """Read and validate a config file; a bare shipped fixture name also works."""
    p = Path(path)
    if p.is_file():
        text = p.read_text()
    elif p.suffix == "" and str(path) in fixture_names():
        text = fixture_text(str(path))
    else:
        raise ParseError(f"config file {str(path)!r} not found")
    return parse_config(text, seed=seed, out_dir=out_dir, jobs=jobs, quick=quick)


def parse_config(
    text: str,
    *,
    seed: int | None = None,
    out_dir: str | Path | None = None,
    jobs: int | None = None,
    quick: bool = False,
) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", line=1)
    raw = copy.deepcopy(doc)
    if seed is not None:
        raw.setdefault("budget", {})["seed"] = seed
    if out_dir is not None:
        raw["output_dir"] = str(out_dir)
    if jobs is not None:
        raw["jobs"] = jobs
    if quick:
        b = raw.setdefault("budget", {})
        reps = int(b.get("mc_reps", BUDGET_DEFAULTS["mc_reps"]))
        b["mc_reps"] = max(MIN_REPORTED_REPS, reps // QUICK_FACTOR)
        raw["quick"] = True
    return _validate(raw)


def _require(doc: dict, key: str) -> Any:
    if key not in doc:
        raise ValidationError(key, "required field is missing")
    return doc[key]


def _schedule(values, fld: str, integer: bool) -> tuple:
    if not isinstance(values, list) or not values:
        raise ValidationError(fld, "must be a nonempty list")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(fld, f"entry {v!r} is not a number")
        if integer and (float(v) != int(v)):
            raise ValidationError(fld, f"entry {v!r} is not an integer")
        out.append(int(v) if integer else float(v))
    if any(x <= 0 for x in out):
        raise ValidationError(fld, "entries must be positive")
    if any(b <= a for a, b in zip(out[:-1], out[1:])):
        raise ValidationError(fld, "must be strictly increasing")
    return tuple(out)


def _grid(spec, fld: str, default: np.ndarray) -> np.ndarray:
    kind = spec.get("kind", "default") if isinstance(spec, dict) else None
    if kind is None:
        raise ValidationError(fld, "must be an object with a 'kind'")
    if kind == "default":
        return default
    if kind == "uniform":
        pts = spec.get("points", 20)
        if not isinstance(pts, int) or pts < 1:
            raise ValidationError(f"{fld}.points", "must be a positive integer")
        return vanishing_grid(pts)
    if kind == "explicit":
        pts = np.asarray(_schedule(spec.get("points"), f"{fld}.points", False))
        if pts[-1] > 1:
            raise ValidationError(f"{fld}.points", "must lie in (0, 1]")
        return pts
    raise ValidationError(f"{fld}.kind", f"unknown grid kind {kind!r}")


def _ambiguity(members, fld: str) -> AmbiguitySet:
    if not isinstance(members, list) or not members:
        raise ValidationError(fld, "ambiguity set must be a nonempty list of distributions")
    return AmbiguitySet(tuple(from_record(m, f"{fld}[{i}]") for i, m in enumerate(members)))


def _joint(law, fld: str) -> JointLaw:
    try:
        return JointLaw(tuple((a, b, p) for a, b, p in law["atoms"]))
    except (KeyError, TypeError, ValueError):
        raise ParseError("joint law needs 'atoms': [[a, b, p], ...]", field=fld) from None


def parse_model(spec: dict) -> SequenceModel:
    if not isinstance(spec, dict):
        raise ValidationError("model", "must be an object")
    if ("rule" in spec) == ("coordinates" in spec):
        raise ValidationError("model", "give exactly one of 'rule' or 'coordinates'")
    dep = spec.get("dependence", "product")
    pair_rule = joint_pairs = None
    if dep != "product":
        if not isinstance(dep, dict) or len(dep) != 1 or next(iter(dep)) not in ("pair_rule", "joint_pairs"):
            raise ValidationError("model.dependence", "expected 'product', {'pair_rule': ...} or {'joint_pairs': ...}")
        if "pair_rule" in dep:
            pair_rule = tuple(_joint(j, f"model.dependence.pair_rule[{i}]") for i, j in enumerate(dep["pair_rule"]))
        else:
            joint_pairs = {}
            for i, entry in enumerate(dep["joint_pairs"]):
                fld = f"model.dependence.joint_pairs[{i}]"
                pair = entry.get("pair") if isinstance(entry, dict) else None
                if not (isinstance(pair, list) and len(pair) == 2 and pair[0] != pair[1]):
                    raise ValidationError(f"{fld}.pair", "must be two distinct coordinates")
                joint_pairs[tuple(sorted(pair))] = tuple(
                    _joint(j, f"{fld}.laws[{m}]") for m, j in enumerate(entry.get("laws", []))
                )
    if "rule" in spec:
        if joint_pairs is not None:
            raise ValidationError("model.dependence", "joint_pairs needs explicit coordinates")
        return SequenceModel.iid(_ambiguity(spec["rule"], "model.rule"), pair_rule)
    coords = spec["coordinates"]
    if not isinstance(coords, list) or not coords:
        raise ValidationError("model.coordinates", "must be a nonempty list")
    if pair_rule is not None:
        raise ValidationError("model.dependence", "pair_rule needs an i.i.d. rule")
    sets = [_ambiguity(c, f"model.coordinates[{i}]") for i, c in enumerate(coords)]
    return SequenceModel.explicit(sets, joint_pairs)


def _validate(raw: dict) -> ExperimentConfig:
    doc = {**DEFAULTS, **raw}
    try:
        model = parse_model(_require(doc, "model"))

        eps = _require(doc, "epsilon")
        eps = eps if isinstance(eps, list) else [eps]
        for e in eps:
            if isinstance(e, bool) or not isinstance(e, (int, float)) or not e > 0:
                raise ValidationError("epsilon", "must be positive")
        epsilons = tuple(float(e) for e in eps)

        n_schedule = _schedule(_require(doc, "n_schedule"), "n_schedule", True)
        if n_schedule[-1] > model.n_max:
            raise ValidationError("n_schedule", f"exceeds the {model.n_max} modelled coordinates")

        budget_doc = doc.get("budget")
        if not isinstance(budget_doc, dict) or "seed" not in budget_doc:
            raise ValidationError("budget.seed", "a seed is required")
        seed = budget_doc["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ValidationError("budget.seed", "must be an unsigned 64-bit integer")
        b = {**BUDGET_DEFAULTS, **budget_doc}
        for key in ("mc_reps", "restarts", "max_passes"):
            if isinstance(b[key], bool) or not isinstance(b[key], int):
                raise ValidationError(f"budget.{key}", "must be an integer")
        if b["mc_reps"] < MIN_REPORTED_REPS:
            raise ValidationError("budget.mc_reps", f"must be at least {MIN_REPORTED_REPS}")
        jobs = doc["jobs"]
        if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
            raise ValidationError("jobs", "must be a positive integer")
        budget = EstimateBudget(b["mc_reps"], b["restarts"], b["max_passes"], seed, jobs)

        tolerances = {**DEFAULTS["tolerances"], **doc.get("tolerances", {})}
        for key, v in tolerances.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ValidationError(f"tolerances.{key}", "must be positive")

        proof = doc.get("proof_chain", {})
        proof_n = _schedule(proof.get("n", DEFAULTS["proof_chain"]["n"]), "proof_chain.n", True)
        proof_n = tuple(n for n in proof_n if n <= model.n_max)
        proof_eps = proof.get("epsilon", epsilons[0])
        if isinstance(proof_eps, bool) or not isinstance(proof_eps, (int, float)) or not proof_eps > 0:
            raise ValidationError("proof_chain.epsilon", "must be positive")

        return ExperimentConfig(
            name=str(doc["name"]),
            model=model,
            epsilons=epsilons,
            n_schedule=n_schedule,
            y_grid=_grid(doc["y_grid"], "y_grid", default_y_grid()),
            vanish_grid=_grid(doc["vanish_grid"], "vanish_grid", vanishing_grid()),
            m_schedule=_schedule(doc["M_schedule"], "M_schedule", False),
            t_schedule=_schedule(doc["t_schedule"], "t_schedule", False),
            tolerances={k: float(v) for k, v in tolerances.items()},
            proof_n=proof_n,
            proof_epsilon=float(proof_eps),
            budget=budget,
            output_dir=Path(doc["output_dir"]),
            raw=raw,
        )
    except (ValidationError, ParseError):
        raise
    except SublinearError as exc:
        raise ValidationError("model", str(exc)) from None


def model_record(model: SequenceModel) -> dict:
    """Inverse of :func:`parse_model` for product and pair-rule models."""
    if model.is_iid:
        rec: dict[str, Any] = {"rule": model.rule.to_record()}
    else:
        rec = {"coordinates": [a.to_record() for a in model.coordinates]}
    if model.pair_rule is not None:
        rec["dependence"] = {"pair_rule": [{"atoms": [list(a) for a in j.atoms]} for j in model.pair_rule]}
    elif model.joint_pairs is not None:
        rec["dependence"] = {
            "joint_pairs": [
                {"pair": list(pair), "laws": [{"atoms": [list(a) for a in j.atoms]} for j in laws]}
                for pair, laws in model.joint_pairs
            ]
        }
    return rec

