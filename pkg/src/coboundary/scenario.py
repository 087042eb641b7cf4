"""Scenario configuration and the end-to-end solve pipeline used by the CLI.

A scenario is a JSON document; every key is optional::

    {
      "spec":     {"d": 1, "rho0": 0.5, "K": 8, "M": 33, "Lmax": 16, "eps_radius": 1.0},
      "dim":      2,
      "family":   {"kind": "coboundary",
                   "phi": {"kind": "random", "amplitude": 0.05, "orders": 3, "k0": 1, "decay": 0.5}},
      "schedule": {"delta0": null, "L0": null, "max_steps": 12},
      "tol": 1e-8, "mode": "algebra", "seed": 0, "nmax": 12,
      "checks":   {"poc_tol": 1e-6, "fc_tol": 1e-8, "resonance_tol": 1e-6, "solver_tol": 1e-8,
                   "smallness": true, "track_poc": true, "rescale": "auto"},
      "outputs":  {"dir": "out"}
    }

``family.kind`` is ``identity``, ``coboundary`` or ``perturbed`` (a
coboundary plus ``eps^order C`` with ``"C"`` and ``"order"`` keys).  The
conjugacy descriptor ``phi`` is ``random`` or ``trig`` with ``terms`` of the
form ``{"order": 1, "k": [1], "kind": "sin", "matrix": [[..]]}`` and an
optional ``"exp": true`` to exponentiate the sum.  ``checks.rescale`` is
``"auto"`` or a fixed positive number.
"""
from __future__ import annotations

import copy
import json
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Any, Mapping

from . import field as fieldmod
from .conditions import enumerate_periodic_actions, poc_report
from .errors import DomainError, NoConvergence, PreconditionViolation
from .families import family_from_descriptor
from .field import DomainSpec, EpsSeriesField
from .nashmoser import MODES, DEFAULT_POC_TOL, IterationReport, Schedule, choose_rescaling, rescale_eps, run

EXIT_OK, EXIT_CONFIG, EXIT_CONDITION, EXIT_NO_CONVERGENCE = 0, 1, 2, 3

DEFAULTS: dict = {
    "spec": {"d": 1, "rho0": 0.5, "K": 8, "M": 33, "Lmax": 16, "eps_radius": 1.0},
    "dim": 2,
    "family": {"kind": "coboundary", "phi": {"kind": "random", "amplitude": 0.05}},
    "schedule": {},
    "tol": 1e-8,
    "mode": "algebra",
    "seed": 0,
    "nmax": 12,
    "checks": {"poc_tol": DEFAULT_POC_TOL, "fc_tol": 1e-8, "resonance_tol": 1e-6, "solver_tol": 1e-8,
               "smallness": True, "track_poc": True, "rescale": "auto"},
    "outputs": {"dir": "out"},
}


def _merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict) and key not in ("family",):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ScenarioConfig:
    spec: DomainSpec
    family: dict
    schedule: dict = dc_field(default_factory=dict)
    tol: float = 1e-8
    mode: str = "algebra"
    seed: int = 0
    dim: int = 2
    nmax: int = 12
    checks: dict = dc_field(default_factory=lambda: dict(DEFAULTS["checks"]))
    outputs: dict = dc_field(default_factory=lambda: dict(DEFAULTS["outputs"]))

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if self.nmax < 1 or self.dim < 1:
            raise DomainError("nmax and dim must be positive")
        rescale = self.checks.get("rescale", "auto")
        if rescale != "auto" and not (isinstance(rescale, (int, float)) and rescale > 0):
            raise DomainError("checks.rescale must be 'auto' or a positive number")

    @classmethod
    def from_dict(cls, data: Mapping | None = None, **overrides) -> "ScenarioConfig":
        merged = _merge(DEFAULTS, data or {})
        merged = _merge(merged, {k: v for k, v in overrides.items() if v is not None})
        unknown = set(merged) - set(DEFAULTS)
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(spec=DomainSpec.from_dict(merged["spec"]), family=dict(merged["family"]),
                       schedule=dict(merged["schedule"]), tol=float(merged["tol"]), mode=str(merged["mode"]),
                       seed=int(merged["seed"]), dim=int(merged["dim"]), nmax=int(merged["nmax"]),
                       checks=dict(merged["checks"]), outputs=dict(merged["outputs"]))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path, **overrides) -> "ScenarioConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data, **overrides)

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "dim": self.dim, "family": self.family, "schedule": self.schedule,
                "tol": self.tol, "mode": self.mode, "seed": self.seed, "nmax": self.nmax,
                "checks": self.checks, "outputs": self.outputs}

    def make_schedule(self) -> Schedule:
        return Schedule.for_dimension(self.spec.d, self.spec.rho0, **self.schedule)

    def build_family(self) -> tuple:
        return family_from_descriptor(self.spec, self.family, seed=self.seed, dim=self.dim)


@dataclass
class ScenarioResult:
    exit_code: int
    report: dict
    eta: EpsSeriesField | None = None
    phi: EpsSeriesField | None = None
    iteration: IterationReport | None = None


def _status(code: int) -> str:
    return {EXIT_OK: "ok", EXIT_CONDITION: "condition_failure",
            EXIT_NO_CONVERGENCE: "no_convergence", EXIT_CONFIG: "config_error"}[code]


def write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_scenario(config: ScenarioConfig, out_dir=None) -> ScenarioResult:
    """Generate the family, check the orbit condition, rescale, iterate, write artifacts."""
    t_start = time.perf_counter()
    timing: dict = {}
    out = Path(out_dir if out_dir is not None else config.outputs.get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    checks = config.checks
    report: dict = {"scenario": config.to_dict()}

    eta, _ = config.build_family()
    fieldmod.save(eta, out / "family.json")
    orbits = enumerate_periodic_actions(config.spec.d, config.nmax)

    t0 = time.perf_counter()
    poc = poc_report(eta, orbits)
    timing["poc_check"] = time.perf_counter() - t0
    report["poc"] = poc.to_dict()
    poc_tol = float(checks.get("poc_tol", DEFAULT_POC_TOL))

    Phi = None
    rep = IterationReport(mode=config.mode, tol=config.tol)
    if poc.defect > poc_tol:
        code = EXIT_CONDITION
        report["message"] = f"orbit condition fails: defect {poc.defect:.6g} > {poc_tol:g}"
    else:
        sched = config.make_schedule()
        r_ref = config.spec.eps_radius
        rescale = checks.get("rescale", "auto")
        if rescale == "auto":
            lam, sigma0, gamma0 = choose_rescaling(eta, sched, r_ref, check_smallness=checks.get("smallness", True))
            rep.gamma0 = gamma0
        else:
            lam = float(rescale)
        rep.lam = lam
        scaled = rescale_eps(eta, lam)
        t0 = time.perf_counter()
        try:
            Phi_hat, rep = run(scaled, sched, config.tol, config.mode, work_radius=r_ref, orbits=orbits,
                               check_poc=True, initial_poc=False, check_smallness=checks.get("smallness", True),
                               track_poc=checks.get("track_poc", True), poc_tol=poc_tol,
                               resonance_tol=float(checks.get("resonance_tol", 1e-6)),
                               solver_tol=float(checks.get("solver_tol", 1e-8)), report=rep)
            Phi = rescale_eps(Phi_hat, 1.0 / lam)
            Phi = Phi.with_spec(Phi.spec.replace(eps_radius=lam * r_ref))
            fieldmod.save(Phi, out / "phi.json")
            # radius of the disk, in the original epsilon, on which final_defect is measured
            report["final_radius"] = lam * rep.final_radius
            code = EXIT_OK if rep.final_defect is not None and rep.final_defect <= config.tol else EXIT_NO_CONVERGENCE
        except NoConvergence as exc:
            code = EXIT_NO_CONVERGENCE
            report["message"] = str(exc)
        except PreconditionViolation as exc:
            code = EXIT_CONDITION if exc.reason == "poc" else EXIT_NO_CONVERGENCE
            report["message"] = str(exc)
        timing["iteration"] = time.perf_counter() - t0

    report["iteration"] = rep.to_dict()
    report["final_defect"] = rep.final_defect
    report["exit_code"] = code
    report["status"] = _status(code)
    timing["total"] = time.perf_counter() - t_start
    write_json(out / "report.json", report)
    (out / "report.csv").write_text(rep.to_csv(), encoding="utf-8")
    write_json(out / "timing.json", timing)
    return ScenarioResult(code, report, eta, Phi, rep)
