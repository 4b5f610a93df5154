"""Tracy-Widom first-order system in the moving endpoint of an anchored gap.

State vector layout is ``[logE, q, p, u, v, w, sigma]`` where ``sigma`` is
``m(s) R(s, s)`` (R for Gaussian, sR for Laguerre, (1-s^2)R for Jacobi).

Gaussian, gap (s, inf), s is the *left* endpoint, c = sqrt(2N)::

    q' = -s q + (c - 2u) p          u' = -q^2
    p' = -(c + 2w) q + s p          v' = -qp
    R' = -2qp                       w' = -p^2
    (ln E)' = +R
    R = (c + 2w) q^2 + (c - 2u) p^2 - 2s qp

Laguerre, gap (0, s), c = sqrt(N(N+a)), A = -a/2 - N + s/2::

    s q' = A q + (c + u) p          u' = q^2
    s p' = -(c - w) q - A p         v' = qp
    (sR)' = qp                      w' = p^2
    (ln E)' = -R
    sR = (c - w) q^2 + (c + u) p^2 + 2A qp

Jacobi, gap (-1, s): the system with alpha0, alpha1, beta0, gamma0 from
:func:`gapflow.ensembles.recurrence_data`, see :func:`jacobi_tw_rhs`.

The Gaussian and Laguerre systems follow from the same operator identities
that produce the Jacobi one, specialised to the Hermite/Laguerre
recurrence data and to the orientation of the moving endpoint; the
cross-check against the Nystrom oracle is what the tests rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import asymptotics
from .curves import GapCurve
from .ensembles import EnsembleSpec, Kind, RecurrenceData, kernel_diagonal, phi_psi, recurrence_data
from .errors import NumericalError, ParameterDomainError, SingularityError
from .fredholm import DEFAULT_ORDER, anchored_interval, moving_index, nystrom_solve, quadrature_for

FIELDS = ("logE", "q", "p", "u", "v", "w", "sigma")


@dataclass
class TWState:
    s: float
    q: float
    p: float
    u: float
    v: float
    w: float
    sigma: float
    logE: float

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FIELDS])

    @classmethod
    def from_vector(cls, s: float, y) -> "TWState":
        return cls(s=float(s), **{f: float(val) for f, val in zip(FIELDS, y)})


@dataclass
class IntegralResiduals:
    """Integral-of-motion residuals along a trajectory.

    ``first``/``second``: Jacobi: ``sigma + (2N+a+b) v`` and the quadratic
    sigma' relation. Gaussian/Laguerre: the tabulated integral and the linear
    relation between sigma and v (``R = 2v``, ``sR = v`` respectively).
    ``algebraic`` compares the carried sigma with its closed expression in
    (q, p, u, v, w).
    """

    s: np.ndarray
    first: np.ndarray
    second: np.ndarray
    algebraic: np.ndarray

    def max_abs(self) -> float:
        return float(
            max(np.max(np.abs(self.first)), np.max(np.abs(self.second)), np.max(np.abs(self.algebraic)))
        )


# ---------------------------------------------------------------------------
# right-hand sides


def jacobi_tw_rhs(s: float, y, data: RecurrenceData) -> np.ndarray:
    logE, q, p, u, v, w, sigma = y
    m = 1.0 - s * s
    if m <= 0.0:
        raise SingularityError(f"Jacobi system is singular at s={s}")
    a0, a1, b0, g0 = data.alpha0, data.alpha1, data.beta0, data.gamma0
    coef_a = a0 + a1 * s + v
    coef_b = b0 + u * (2 * a1 - 1)
    coef_c = g0 - w * (2 * a1 + 1)
    return np.array(
        [
            -sigma / m,
            (coef_a * q + coef_b * p) / m,
            -(coef_c * q + coef_a * p) / m,
            q * q,
            q * p,
            p * p,
            2 * a1 * q * p,
        ]
    )


def gaussian_tw_rhs(s: float, y, data: RecurrenceData) -> np.ndarray:
    logE, q, p, u, v, w, sigma = y
    c = data.beta0
    return np.array(
        [
            sigma,
            -s * q + (c - 2 * u) * p,
            -(c + 2 * w) * q + s * p,
            -q * q,
            -q * p,
            -p * p,
            -2 * q * p,
        ]
    )


def laguerre_tw_rhs(s: float, y, data: RecurrenceData) -> np.ndarray:
    logE, q, p, u, v, w, sigma = y
    if s <= 0.0:
        raise SingularityError(f"Laguerre system is singular at s={s}")
    c = data.beta0
    big_a = data.alpha0 + data.alpha1 * s
    return np.array(
        [
            -sigma / s,
            (big_a * q + (c + u) * p) / s,
            -((c - w) * q + big_a * p) / s,
            q * q,
            q * p,
            p * p,
            q * p,
        ]
    )


_RHS = {Kind.GAUSSIAN: gaussian_tw_rhs, Kind.LAGUERRE: laguerre_tw_rhs, Kind.JACOBI: jacobi_tw_rhs}


def tw_rhs(spec: EnsembleSpec):
    """``f(s, y)`` for the ensemble's system, bound to its recurrence data."""
    data = recurrence_data(spec)
    fn = _RHS[spec.kind]
    return lambda s, y: fn(s, y, data)


def sigma_algebraic(spec: EnsembleSpec, s, q, p, u, v, w):
    """sigma = m(s) R expressed through (q, p, u, v, w)."""
    d = recurrence_data(spec)
    if spec.kind is Kind.GAUSSIAN:
        c = d.beta0
        return (c + 2 * w) * q * q + (c - 2 * u) * p * p - 2 * s * q * p
    if spec.kind is Kind.LAGUERRE:
        c = d.beta0
        big_a = d.alpha0 + d.alpha1 * s
        return (c - w) * q * q + (c + u) * p * p + 2 * big_a * q * p
    coef_a = d.alpha0 + d.alpha1 * s + v
    coef_b = d.beta0 + u * (2 * d.alpha1 - 1)
    coef_c = d.gamma0 - w * (2 * d.alpha1 + 1)
    return coef_c * q * q + coef_b * p * p + 2 * coef_a * q * p


# ---------------------------------------------------------------------------
# initial data


def default_start(spec: EnsembleSpec, delta: float = 1e-3) -> float:
    if spec.kind is Kind.GAUSSIAN:
        return math.sqrt(2 * spec.n) + 4.0
    if spec.kind is Kind.LAGUERRE:
        return delta
    return -1.0 + delta


def init_state(
    spec: EnsembleSpec,
    delta: float = 1e-3,
    source: str = "nystrom",
    s0: float | None = None,
    order: int = DEFAULT_ORDER,
    check: bool = True,
) -> TWState:
    """State at the offset point next to the anchored endpoint.

    ``source='nystrom'`` reads every field off the oracle on the tiny gap.
    ``source='asymptotic'`` uses phi, psi for q, p, quadratures of
    phi^2, phi psi, psi^2 for u, v, w, minus the trace for ln E and the
    tabulated leading terms for sigma; with ``check`` it is compared to the
    oracle and rejected on a >1% sigma mismatch.
    """
    s = default_start(spec, delta) if s0 is None else float(s0)
    if source == "nystrom":
        return _nystrom_state(spec, s, order)
    if source != "asymptotic":
        raise ParameterDomainError(f"unknown init source {source!r}")
    lo, hi = anchored_interval(spec, s)
    grid = quadrature_for(spec, lo, hi, order)
    f = phi_psi(spec, grid.nodes)
    wts = grid.weights
    fs = phi_psi(spec, s)
    state = TWState(
        s=s,
        q=fs.phi,
        p=fs.psi,
        u=float(np.dot(wts, f.phi**2)),
        v=float(np.dot(wts, f.phi * f.psi)),
        w=float(np.dot(wts, f.psi**2)),
        sigma=asymptotics.sigma_leading(spec, s),
        logE=-float(np.dot(wts, kernel_diagonal(spec, grid.nodes))),
    )
    if check:
        ref = _nystrom_state(spec, s, order)
        if abs(state.sigma - ref.sigma) > 0.01 * abs(ref.sigma):
            raise NumericalError(
                f"offset {delta} too large for the asymptotic series: sigma {state.sigma:.6g} "
                f"vs oracle {ref.sigma:.6g}"
            )
    return state


def _nystrom_state(spec: EnsembleSpec, s: float, order: int) -> TWState:
    sol = nystrom_solve(spec, anchored_interval(spec, s), order)
    i = moving_index(spec)
    m = recurrence_data(spec).m(s)
    return TWState(
        s=s,
        q=float(sol.q_endpoints[i]),
        p=float(sol.p_endpoints[i]),
        u=sol.u,
        v=sol.v,
        w=sol.w,
        sigma=float(m * sol.r_diag[i]),
        logE=sol.log_det,
    )


# ---------------------------------------------------------------------------
# integration


def _first_step(a: float, b: float) -> float:
    # scipy's initial-step heuristic divides by zero on states with exact zeros
    return 1e-5 * abs(b - a)


def integrate(
    spec: EnsembleSpec,
    s_from: float,
    s_to: float,
    init: TWState | None = None,
    tol: float = 1e-10,
    s_eval: Sequence[float] | None = None,
    atol: float | None = None,
) -> GapCurve:
    """Adaptive DOP853 integration of the system from ``s_from`` to ``s_to``.

    Samples are taken at ``s_eval`` (via dense output) or, by default, at
    every accepted step. Integral-of-motion residuals at the accepted steps
    are stored in ``meta['max_residual']``.
    """
    init = init_state(spec, s0=s_from) if init is None else init
    if abs(init.s - s_from) > 1e-15 * (1 + abs(s_from)):
        raise ParameterDomainError("initial state does not sit at s_from")
    y0 = init.vector()
    if atol is None:
        # per-component floor so exponentially small starting values keep relative accuracy
        atol = tol * 1e-3 * np.clip(np.abs(y0), 1e-280, 1.0)
    rhs = tw_rhs(spec)
    sol = solve_ivp(
        rhs, (s_from, s_to), y0, method="DOP853", rtol=tol, atol=atol, dense_output=True,
        first_step=_first_step(s_from, s_to),
    )
    if sol.status != 0:
        last = float(sol.t[-1]) if sol.t.size else s_from
        raise NumericalError(f"integration stopped: {sol.message}", last_good=last)
    if s_eval is None:
        ss, ys = sol.t, sol.y
    else:
        ss = np.asarray(s_eval, dtype=float)
        lo, hi = sorted((s_from, s_to))
        if np.any((ss < lo - 1e-12) | (ss > hi + 1e-12)):
            raise ParameterDomainError("s_eval outside the integration range")
        ys = sol.sol(ss)
    steps = check_integrals(spec, sol.t, sol.y)
    cols = {"s": ss, "E2": np.exp(ys[0])}
    for k, name in enumerate(FIELDS[1:], start=1):
        cols[name] = ys[k]
    cols["R"] = ys[6] / recurrence_data(spec).m(ss)
    if np.all(np.diff(ss) < 0):
        cols = {k: v[::-1] for k, v in cols.items()}
    curve = GapCurve(
        "tw-ode",
        spec,
        cols,
        meta={
            "tol": tol,
            "atol": float(np.min(atol)),
            "s_from": s_from,
            "s_to": s_to,
            "steps": int(sol.t.size),
            "nfev": int(sol.nfev),
            "max_residual": steps.max_abs(),
        },
    )
    return curve


def check_integrals(spec: EnsembleSpec, s, y) -> IntegralResiduals:
    """Residuals of the integrals of motion at each column of ``y``.

    sigma' in the Jacobi quadratic integral is taken from the right-hand side.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    y = np.asarray(y, dtype=float).reshape(len(FIELDS), -1)
    _, q, p, u, v, w, sigma = y
    d = recurrence_data(spec)
    alg = sigma - sigma_algebraic(spec, s, q, p, u, v, w)
    if spec.kind is Kind.GAUSSIAN:
        c = d.beta0
        first = c * (u - w) + 2 * u * w - q * p
        # left moving endpoint: v' = -qp while sigma' = 2 alpha1 qp
        second = sigma + 2 * d.alpha1 * v
    elif spec.kind is Kind.LAGUERRE:
        c = d.beta0
        first = c * (w - u) + u * w - s * q * p + sigma
        second = sigma - 2 * d.alpha1 * v
    else:
        a0, a1, b0, g0 = d.alpha0, d.alpha1, d.beta0, d.gamma0
        first = sigma - 2 * a1 * v
        dsigma = 2 * a1 * q * p
        lhs = (b0 + u * (2 * a1 - 1)) * (g0 - w * (2 * a1 + 1))
        rhs = (
            b0 * g0
            - (1 - s * s) * dsigma
            - s * sigma
            + (a0 / a1) * sigma
            + sigma * sigma / (4 * a1 * a1)
        )
        second = lhs - rhs
    return IntegralResiduals(s, first, second, alg)


def state_from_curve(curve: GapCurve, index: int) -> TWState:
    return TWState(
        s=float(curve.s[index]),
        logE=float(np.log(curve.E2[index])),
        **{f: float(curve[f][index]) for f in FIELDS[1:]},
    )


def gap_curve_tw(
    spec: EnsembleSpec,
    s_values: Sequence[float],
    tol: float = 1e-10,
    delta: float = 1e-3,
    source: str = "nystrom",
    order: int = DEFAULT_ORDER,
) -> GapCurve:
    """E_2 on ``s_values`` by integrating from the anchored endpoint."""
    s_values = np.asarray(s_values, dtype=float)
    if spec.kind is Kind.GAUSSIAN:
        s0 = max(default_start(spec), float(s_values.max()) + 0.5)
        s_end = float(s_values.min())
    else:
        anchor = spec.support[0]
        first = float(s_values.min())
        if first <= anchor:
            raise ParameterDomainError("s-values must lie inside the support")
        s0 = anchor + min(delta, 0.5 * (first - anchor))
        s_end = float(s_values.max())
    init = init_state(spec, delta, source=source, s0=s0, order=order)
    curve = integrate(spec, s0, s_end, init, tol=tol, s_eval=np.sort(s_values)[:: (-1 if spec.kind is Kind.GAUSSIAN else 1)])
    curve.meta.update({"init_source": source, "s0": s0, "order": order})
    return curve
