"""Solver for the additive cohomology equation ``alpha o f - alpha = beta``.

In Fourier variables the equation decouples into
``alpha_k(I) (exp(2 pi i <k, I>) - 1) = beta_k(I)``.  Away from resonances
this is a division.  At nodes where the divisor is below ``resonance_tol``
the removable singularity is resolved by differentiating along ``k``::

    alpha_k(I) = <grad beta_k(I), k> exp(-2 pi i <k, I>) / (2 pi i |k|^2)

The ``k = 0`` block of ``alpha`` is set to zero.  The solver checks, but
never modifies, the solvability conditions on ``beta``.
"""
from __future__ import annotations

import numpy as np

from .algebra import op_norm
from .conditions import fc_report
from .errors import FCViolation, NonSolvable
from .field import (AngleActionField, EpsSeriesField, cheb_directional_derivative, compose_f,
                    norm_sup_real, shift_phase)

DEFAULT_RESONANCE_TOL = 1e-6
DEFAULT_SOLVER_TOL = 1e-8


def solve_commutative(beta: AngleActionField, resonance_tol: float = DEFAULT_RESONANCE_TOL,
                      tol: float = DEFAULT_SOLVER_TOL, check_fc: bool = True) -> AngleActionField:
    spec = beta.spec
    d = spec.d
    zero = spec.mode_index((0,) * d)
    mean = float(np.max(op_norm(beta.coeffs[zero])))
    if mean > tol:
        raise NonSolvable(f"k = 0 block has norm {mean:.3g} > {tol:g}; the equation has no solution")
    if check_fc:
        rep = fc_report(beta)
        if rep.defect > tol:
            raise FCViolation(f"beta does not vanish on a resonant plane (defect {rep.defect:.3g})",
                              defect=rep.defect, witness=rep.argmax_witness)

    phase = shift_phase(spec)
    divisor = phase - 1.0
    near = np.abs(divisor) <= resonance_tol
    safe = np.where(near, 1.0, divisor)
    alpha = beta.coeffs / safe[..., None, None]
    alpha[zero] = 0.0

    kgrid = spec.mode_grid()
    for mode in zip(*np.nonzero(np.any(near.reshape(spec.mode_shape + (-1,)), axis=-1))):
        if mode == zero:
            continue
        k = kgrid[mode].astype(float)
        idx = np.argwhere(near[mode])
        deriv = cheb_directional_derivative(beta.coeffs[mode], k, nodes=idx)
        scale = np.conj(phase[mode][tuple(idx.T)]) / (2j * np.pi * float(k @ k))
        alpha[mode][tuple(idx.T)] = deriv * scale[:, None, None]
    return AngleActionField(spec, alpha)


def solve_commutative_series(beta: EpsSeriesField, m: int, M: int,
                             resonance_tol: float = DEFAULT_RESONANCE_TOL,
                             tol: float = DEFAULT_SOLVER_TOL, check_fc: bool = True) -> EpsSeriesField:
    """Solve order by order on ``[m, M]``; the result is supported there."""
    spec = beta.spec
    out = np.zeros_like(beta.coeffs)
    for j in range(max(m, 0), min(M, spec.Lmax) + 1):
        bj = beta.order(j)
        if not np.any(bj.coeffs):
            continue
        try:
            out[j] = solve_commutative(bj, resonance_tol, tol, check_fc).coeffs
        except FCViolation as exc:
            raise FCViolation(f"order {j}: {exc}", defect=exc.defect, order=j, witness=exc.witness) from exc
        except NonSolvable as exc:
            err = NonSolvable(f"order {j}: {exc}")
            err.order = j
            raise err from exc
    return EpsSeriesField(spec, out)


def residual_commutative(alpha: AngleActionField, beta: AngleActionField,
                         theta_samples: int | None = None) -> float:
    """``norm_sup_real(alpha o f - alpha - beta)``."""
    return norm_sup_real(compose_f(alpha) - alpha - beta, theta_samples)
