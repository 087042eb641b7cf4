"""Nash-Moser iteration for ``(phi o f)^{-1} eta phi = Id``.

Each step takes ``eta = Id + O(eps^L)``, solves the additive equation for
the epsilon window ``[L, 2L-1]`` and conjugates, leaving
``Id + O(eps^{2L})``.  Domains shrink by ``delta_n = delta_0 (3/4)^n`` while
the truncation order doubles, ``L_n = L_0 2^n``.

Norms of epsilon families are measured as ``sum_j r^j |v^j|`` on the real
grid, with the working radius ``r`` shrinking in proportion to ``rho``.

In ``"lie"`` mode the step works on ``log eta`` and produces
``phi = exp(psi)``; logarithms and exponentials of epsilon families are
formed pointwise at collocation points on a circle in the epsilon plane.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .algebra import mat_expm1, mat_log1p
from .cohomology import DEFAULT_RESONANCE_TOL, DEFAULT_SOLVER_TOL, solve_commutative_series
from .conditions import (DEFAULT_ORDER_TOL, check_low_orders, default_eps_samples, enumerate_periodic_actions,
                         poc_per_order_defect, poc_report)
from .errors import DomainError, NoConvergence, PreconditionViolation
from .field import (AngleActionField, EpsSeriesField, compose_f, conjugate, field_mul,
                    map_pointwise_eps, order_norms, tail_bound, truncate_eps)

MODES = ("algebra", "lie")
SMALLNESS = 1.0 / 100.0
DEFAULT_POC_TOL = 1e-6
CSV_COLUMNS = ("n", "L_n", "delta_n", "rho_n", "sigma_n", "phi_norm", "predicted_bound", "poc_defect")


@dataclass(frozen=True)
class Schedule:
    rho0: float
    delta0: float | None = None
    L0: int | None = None
    s: int = 2
    max_steps: int = 12
    c: float = 1.0
    c_prime: float = 1.0
    shrink: float = 0.75
    growth: int = 2

    def __post_init__(self):
        if not self.rho0 > 0:
            raise DomainError("rho0 must be positive")
        delta0 = self.rho0 / 8 if self.delta0 is None else float(self.delta0)
        object.__setattr__(self, "delta0", delta0)
        if not 0 < delta0 <= self.rho0 / 8 * (1 + 1e-12):
            raise DomainError(f"delta0 must lie in (0, rho0/8], got {delta0}")
        L0 = math.ceil(self.rho0 / delta0 - 1e-12) if self.L0 is None else int(self.L0)
        object.__setattr__(self, "L0", L0)
        if L0 < 1 or delta0 * L0 / self.rho0 < 1 - 1e-12:
            raise DomainError(f"need delta0 * L0 / rho0 >= 1, got {delta0 * L0 / self.rho0:.3g}")
        if self.s < 1 or self.max_steps < 0:
            raise DomainError("s must be positive and max_steps non-negative")

    @classmethod
    def for_dimension(cls, d: int, rho0: float, **overrides) -> "Schedule":
        overrides.setdefault("s", d + 1)
        return cls(rho0=rho0, **overrides)

    def delta(self, n: int) -> float:
        return self.delta0 * self.shrink ** n

    def L(self, n: int) -> int:
        return self.L0 * self.growth ** n

    def rho(self, n: int) -> float:
        return self.rho0 - sum(self.delta(j) for j in range(n))

    @property
    def rho_inf(self) -> float:
        return self.rho0 - self.delta0 / (1 - self.shrink)

    def to_dict(self) -> dict:
        return {"rho0": self.rho0, "delta0": self.delta0, "L0": self.L0, "s": self.s,
                "max_steps": self.max_steps, "c": self.c, "c_prime": self.c_prime}


@dataclass
class StepRecord:
    n: int
    phase: str
    L_n: int
    window: tuple
    delta_n: float
    rho_n: float
    radius: float
    sigma_n: float
    phi_norm: float
    phi_f_norm: float
    predicted_bound: float
    resid_after: float
    window_residual: float
    tail: float
    gate: float
    poc_defect_before: float | None = None
    poc_defect_after: float | None = None

    def bound_ratio(self) -> float | None:
        """``sigma_{n+1}`` divided by the bound without its constant."""
        base = self.predicted_bound
        return None if base <= 0 else self.resid_after / base


@dataclass
class IterationReport:
    mode: str = "algebra"
    steps: list = dc_field(default_factory=list)
    lam: float = 1.0
    sigma0: float | None = None
    gamma0: float | None = None
    stop_reason: str | None = None
    final_defect: float | None = None
    final_radius: float | None = None
    tol: float | None = None

    @property
    def c_obs(self) -> float:
        ratios = [r.bound_ratio() for r in self.steps if r.bound_ratio() is not None]
        return max(ratios, default=0.0)

    @property
    def sigmas(self) -> list:
        return [r.sigma_n for r in self.steps]

    def to_dict(self) -> dict:
        return _plain({"mode": self.mode, "lambda": self.lam, "sigma0": self.sigma0, "gamma0": self.gamma0,
                       "tol": self.tol, "stop_reason": self.stop_reason, "final_defect": self.final_defect,
                       "final_radius": self.final_radius,
                       "c_obs": self.c_obs, "steps": [asdict(r) for r in self.steps]})

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.steps:
            poc = "" if r.poc_defect_after is None else repr(r.poc_defect_after)
            writer.writerow([r.n, r.L_n, repr(r.delta_n), repr(r.rho_n), repr(r.sigma_n),
                             repr(r.phi_norm), repr(r.predicted_bound), poc])
        return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)  # strict JSON has no inf/nan literals
    return obj


# --- rescaling and norms ---------------------------------------------------

def rescale_eps(eta: EpsSeriesField, lam: float) -> EpsSeriesField:
    """``eta_{lam eps}``: order ``j`` times ``lam^j``, disk radius divided by ``lam``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    spec = eta.spec.replace(eps_radius=eta.spec.eps_radius / lam)
    scale = float(lam) ** np.arange(spec.n_orders)
    return EpsSeriesField(spec, eta.coeffs * scale.reshape((-1,) + (1,) * (eta.coeffs.ndim - 1)))


def deviation_norm(v: EpsSeriesField, radius: float) -> float:
    """``sum_j radius^j |v^j - Id delta_{j0}|`` on the real grid."""
    dev = v - EpsSeriesField.identity(v.spec, v.dim)
    return float(np.sum(order_norms(dev) * radius ** np.arange(v.spec.n_orders)))


def _gate_tail(eta: EpsSeriesField, target_radius: float, rho0: float) -> float:
    """Tail estimate for orders beyond ``Lmax`` at ``target_radius``.

    Uses the Cauchy tail bound with the family's own disk as the reference
    domain; infinite when the target disk is not strictly inside it.
    """
    R = eta.spec.eps_radius
    q = target_radius / R
    delta_eff = rho0 * (1.0 - q)
    if not 0 < delta_eff < rho0:
        return math.inf
    return tail_bound(deviation_norm(eta, R), eta.spec.Lmax + 1, delta_eff, rho0)


def leading_order(eta: EpsSeriesField, order_tol: float = DEFAULT_ORDER_TOL) -> int | None:
    norms = order_norms(eta - EpsSeriesField.identity(eta.spec, eta.dim))
    for j in range(1, eta.spec.n_orders):
        if norms[j] > order_tol:
            return j
    return None


# --- one step ----------------------------------------------------------------

@dataclass
class StepDiagnostics:
    sigma: float
    phi_norm: float
    phi_f_norm: float
    predicted_bound: float
    sigma_next: float
    window: tuple
    window_residual: float
    tail: float
    gate: float
    radius: float
    radius_after: float
    poc_defect_before: float | None


def _lie_log(eta: EpsSeriesField, radius: float) -> EpsSeriesField:
    eye = np.eye(eta.dim)
    return map_pointwise_eps(eta, lambda m: mat_log1p(m - eye), radius)


def _lie_exp(psi: EpsSeriesField, radius: float) -> EpsSeriesField:
    return EpsSeriesField.identity(psi.spec, psi.dim) + map_pointwise_eps(psi, mat_expm1, radius)


def iterate_step(eta: EpsSeriesField, L: int, delta: float, rho: float, mode: str = "algebra", *,
                 work_radius: float | None = None, shrink: bool = True, schedule: Schedule | None = None,
                 orbits=None, check_poc: bool = True, check_smallness: bool = True,
                 poc_tol: float = DEFAULT_POC_TOL, order_tol: float = DEFAULT_ORDER_TOL,
                 resonance_tol: float = DEFAULT_RESONANCE_TOL, solver_tol: float = DEFAULT_SOLVER_TOL):
    """One conjugation step; returns ``(phi, eta_next, diagnostics)``."""
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    spec = eta.spec
    rho0 = spec.rho0
    sched = schedule or Schedule.for_dimension(spec.d, rho0)
    if not (0 < delta < rho <= rho0 * (1 + 1e-12)):
        raise DomainError(f"need 0 < delta < rho <= rho0, got delta={delta}, rho={rho}")
    if L < 1 or L > spec.Lmax:
        raise DomainError(f"L must lie in 1..{spec.Lmax}, got {L}")
    r_ref = spec.eps_radius if work_radius is None else float(work_radius)
    r = r_ref * rho / rho0
    r_after = r_ref * (rho - delta) / rho0 if shrink else r

    check_low_orders(eta, L, order_tol)
    poc_before = None
    if check_poc:
        poc_before = poc_per_order_defect(eta, L, orbits, order_tol=order_tol)
        if poc_before > poc_tol:
            raise PreconditionViolation(
                f"orders {L}..{min(2 * L - 1, spec.Lmax)} violate the orbit condition "
                f"(defect {poc_before:.3g} > {poc_tol:g})", reason="poc")

    sigma = deviation_norm(eta, r)
    tail = _gate_tail(eta, r_ref * (rho - delta) / rho0, rho0)
    gate = sched.c_prime * delta ** (-sched.s) * (sigma + tail)
    if check_smallness and not gate <= SMALLNESS:
        raise PreconditionViolation(
            f"smallness condition fails: c' delta^-s (sigma + tail) = {gate:.3g} > {SMALLNESS:g}",
            reason="smallness")

    hi = min(2 * L - 1, spec.Lmax)
    eye = EpsSeriesField.identity(spec, eta.dim)
    if mode == "algebra":
        window = truncate_eps(eta - eye, L, hi)
        psi = solve_commutative_series(window, L, hi, resonance_tol, solver_tol, check_fc=False)
        phi = eye + psi
    else:
        log_eta = _lie_log(eta, r)
        window = truncate_eps(log_eta, L, hi)
        psi = solve_commutative_series(window, L, hi, resonance_tol, solver_tol, check_fc=False)
        phi = _lie_exp(psi, r)

    eta_next = conjugate(eta, phi)
    norms_next = order_norms(eta_next - eye)
    window_resid = float(np.max(norms_next[L:hi + 1]))
    sigma_next = float(np.sum(norms_next * r_after ** np.arange(spec.n_orders)))
    predicted = sched.c * (delta ** (-2 * sched.s) * sigma ** 2
                           + sigma / delta * math.exp(-L * delta / rho0))
    diag = StepDiagnostics(
        sigma=sigma, phi_norm=deviation_norm(phi, r), phi_f_norm=deviation_norm(compose_f(phi), r),
        predicted_bound=predicted, sigma_next=sigma_next, window=(L, hi), window_residual=window_resid,
        tail=tail, gate=gate, radius=r, radius_after=r_after, poc_defect_before=poc_before)
    return phi, eta_next, diag


# --- driver ------------------------------------------------------------------

def run(eta: EpsSeriesField, schedule: Schedule | None = None, tol: float = 1e-8, mode: str = "algebra", *,
        work_radius: float | None = None, orbits=None, check_poc: bool = True, initial_poc: bool = True,
        check_smallness: bool = True, track_poc: bool = True, poc_tol: float = DEFAULT_POC_TOL,
        order_tol: float = DEFAULT_ORDER_TOL, resonance_tol: float = DEFAULT_RESONANCE_TOL,
        solver_tol: float = DEFAULT_SOLVER_TOL, report: IterationReport | None = None, callback=None):
    """Iterate until the deviation is below ``tol`` or the truncation is used up.

    Steps with ``L`` below ``schedule.L0`` are formal warm-up steps that keep
    ``(delta_0, rho_0)``; the scheduled steps follow.  ``check_poc`` gates
    every step on the orbit condition of its window; ``initial_poc`` adds a
    full check of ``eta`` before the first step.  ``callback(record, Phi, eta_next)``
    is called after every step.  Returns ``(Phi, report)``.
    """
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    spec = eta.spec
    sched = schedule or Schedule.for_dimension(spec.d, spec.rho0)
    if abs(sched.rho0 - spec.rho0) > 1e-12 * spec.rho0:
        raise DomainError("schedule rho0 differs from the domain rho0")
    rep = report or IterationReport()
    rep.mode, rep.tol = mode, tol
    r_ref = spec.eps_radius if work_radius is None else float(work_radius)
    eye = EpsSeriesField.identity(spec, eta.dim)

    check_low_orders(eta, 1, order_tol)
    if orbits is None:
        orbits = enumerate_periodic_actions(spec.d, 12)
    # orbit products are sampled on the working disk, not the (rescaled) storage disk
    eps_samples = default_eps_samples(r_ref)
    if check_poc and initial_poc:
        pre = poc_report(eta, orbits, eps_samples=eps_samples)
        if pre.defect > poc_tol:
            raise PreconditionViolation(
                f"orbit condition fails with defect {pre.defect:.3g} at {pre.argmax_witness}",
                reason="poc", report=pre)

    Phi = eye
    current = eta
    rep.sigma0 = sigma = deviation_norm(current, r_ref)
    L = leading_order(current, order_tol)
    n_main = 0
    stalls = 0
    rep.stop_reason = "converged"
    rho = sched.rho0
    while True:
        if sigma <= tol or L is None:
            rep.stop_reason = "converged"
            break
        if L > spec.Lmax:
            rep.stop_reason = "truncation_exhausted"
            break
        if len(rep.steps) >= sched.max_steps:
            rep.stop_reason = "max_steps"
            break
        warm = L < sched.L0
        delta = sched.delta0 if warm else sched.delta(n_main)
        rho = sched.rho0 if warm else sched.rho(n_main)
        phi, nxt, diag = iterate_step(
            current, L, delta, rho, mode, work_radius=r_ref, shrink=not warm, schedule=sched,
            orbits=orbits, check_poc=check_poc, check_smallness=check_smallness, poc_tol=poc_tol,
            order_tol=order_tol, resonance_tol=resonance_tol, solver_tol=solver_tol)
        Phi = field_mul(Phi, phi)
        poc_after = poc_report(nxt, orbits, eps_samples=eps_samples).defect if track_poc else None
        rep.steps.append(StepRecord(
            n=len(rep.steps), phase="warmup" if warm else "main", L_n=L, window=diag.window,
            delta_n=delta, rho_n=rho, radius=diag.radius, sigma_n=diag.sigma, phi_norm=diag.phi_norm,
            phi_f_norm=diag.phi_f_norm, predicted_bound=diag.predicted_bound, resid_after=diag.sigma_next,
            window_residual=diag.window_residual, tail=diag.tail, gate=diag.gate,
            poc_defect_before=diag.poc_defect_before, poc_defect_after=poc_after))
        if callback is not None:
            callback(rep.steps[-1], Phi, nxt)
        stalls = stalls + 1 if diag.sigma_next >= diag.sigma else 0
        current = nxt
        sigma = diag.sigma_next
        if stalls >= 2 and sigma > tol:
            rep.stop_reason = "no_convergence"
            rep.final_defect = sigma
            raise NoConvergence(f"deviation failed to decrease for 2 consecutive steps (sigma={sigma:.3g})",
                                report=rep)
        if warm:
            L = 2 * L if 2 * L < sched.L0 else sched.L0
        else:
            n_main += 1
            L = sched.L(n_main)
        if not warm:
            rho = sched.rho(n_main)

    rep.final_radius = r_ref * rho / sched.rho0
    rep.final_defect = deviation_norm(conjugate(eta, Phi), rep.final_radius)
    return Phi, rep


def conjugacy_defect(eta: EpsSeriesField, Phi: EpsSeriesField, radius: float) -> float:
    """``sum_j radius^j |((Phi o f)^{-1} eta Phi - Id)^j|``."""
    return deviation_norm(conjugate(eta, Phi), radius)


# --- gamma lemma -------------------------------------------------------------

def _check_gamma_params(a, b, c, p, lam, nmax):
    if not (a >= 0 and b > 1 and c > 0 and 1 < p <= b and p < 2 and lam > 0 and nmax >= 0):
        raise DomainError("need a >= 0, b > 1, c > 0, 1 < p <= b, p < 2, lambda > 0, nmax >= 0")


def _gamma_logs(gamma0, a, b, c, nmax):
    logs = [math.log(gamma0) if gamma0 > 0 else -math.inf]
    lc = math.log(c)
    for n in range(nmax):
        lg = logs[-1]
        if lg == -math.inf:
            logs.append(-math.inf)
            continue
        quad = lc + 2 * lg + a * n
        lin = lc + lg - b ** n
        logs.append(float(np.logaddexp(quad, lin)))
    return logs


def gamma_schedule(gamma0: float, a: float, b: float, c: float, p: float, lam: float, nmax: int):
    """``gamma_{n+1} = c gamma_n^2 e^{a n} + c gamma_n e^{-b^n}``.

    Returns ``(values, verdict)`` where ``verdict`` says whether
    ``gamma_n <= lam exp(-p^n - a n)`` for every ``n <= nmax``.  The
    recursion runs in log space, so values may underflow to 0 or overflow
    to ``inf`` without affecting the verdict.
    """
    _check_gamma_params(a, b, c, p, lam, nmax)
    if gamma0 < 0:
        raise DomainError("gamma0 must be non-negative")
    logs = _gamma_logs(gamma0, a, b, c, nmax)
    llam = math.log(lam)
    verdict = all(lg <= llam - p ** n - a * n for n, lg in enumerate(logs))
    values = [math.exp(lg) if lg < 709 else math.inf for lg in logs]
    return values, verdict


def find_gamma0(a: float, b: float, c: float, p: float, lam: float, nmax: int, return_flag: bool = False):
    """Largest ``gamma_0`` in ``(0, 1]`` passing the bound, to relative resolution 1e-3.

    Returns 0 (and ``found = False`` with ``return_flag``) when no value passes.
    """
    _check_gamma_params(a, b, c, p, lam, nmax)

    def ok(log_g):
        return gamma_schedule(math.exp(log_g), a, b, c, p, lam, nmax)[1]

    hi = 0.0
    if ok(hi):
        return (1.0, True) if return_flag else 1.0
    lo = -700.0
    if not ok(lo):
        return (0.0, False) if return_flag else 0.0
    step = math.log1p(1e-3)
    while hi - lo > step:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    value = math.exp(lo)
    return (value, True) if return_flag else value


def gamma_parameters(d: int) -> dict:
    """Constants of the gamma lemma for the default schedule in dimension ``d``."""
    s = d + 1
    return {"a": 2 * s * math.log(4 / 3), "b": 1.5, "c": 1.0, "p": 1.5, "lam": 1 / 100, "nmax": 30}


def choose_rescaling(eta: EpsSeriesField, schedule: Schedule | None = None, work_radius: float | None = None,
                     max_power: int = 60, check_smallness: bool = True):
    """Smallest ``m >= 0`` such that ``lam = 2^-m`` makes the rescaled family admissible.

    Admissible means ``sigma_0 <= Gamma_0`` at the working radius and, when
    ``check_smallness`` is set, the smallness gate of the first step.
    Returns ``(lam, sigma0, Gamma0)``.
    """
    spec = eta.spec
    sched = schedule or Schedule.for_dimension(spec.d, spec.rho0)
    gp = gamma_parameters(spec.d)
    gp["a"] = 2 * sched.s * math.log(4 / 3)
    gamma0 = find_gamma0(**gp)
    r_ref = spec.eps_radius if work_radius is None else float(work_radius)
    for m in range(max_power + 1):
        lam = 2.0 ** -m
        scaled = rescale_eps(eta, lam)
        sigma0 = deviation_norm(scaled, r_ref)
        if sigma0 > gamma0:
            continue
        if check_smallness and sigma0 > 0:
            tail = _gate_tail(scaled, r_ref * (sched.rho0 - sched.delta0) / sched.rho0, sched.rho0)
            if sched.c_prime * sched.delta0 ** (-sched.s) * (sigma0 + tail) > SMALLNESS:
                continue
        return lam, sigma0, gamma0
    raise DomainError(f"no rescaling 2^-m with m <= {max_power} makes the family admissible")
