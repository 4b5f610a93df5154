"""Nystrom discretisation of det(I - K) and of the resolvent quantities.

The integral operator with kernel ``K(x, y)`` on an interval ``(lo, hi)`` is
replaced by the matrix ``sqrt(w_i) K(x_i, x_j) sqrt(w_j)`` on a quadrature
rule. Everything downstream (Q, P, u, v, w, R) is read off the same
factorisation of ``I - D K D``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, linalg
from scipy.special import roots_jacobi

from .ensembles import (
    EnsembleSpec,
    Kind,
    cd_kernel,
    kernel_diagonal,
    kernel_matrix,
    phi_psi,
    rho_n,
)
from .errors import NumericalError, ParameterDomainError

DEFAULT_ORDER = 64
TAIL_TOL = 1e-14


@dataclass(frozen=True)
class QuadGrid:
    """Quadrature rule on ``interval``; ``sum(weights * f(nodes))`` ~ integral of f."""

    interval: tuple[float, float]
    nodes: np.ndarray
    weights: np.ndarray
    order: int


def build_grid(lo: float, hi: float, order: int) -> QuadGrid:
    """Gauss-Legendre rule mapped affinely to ``(lo, hi)``."""
    if not hi > lo:
        raise ParameterDomainError(f"degenerate interval ({lo}, {hi})")
    if order < 2:
        raise ParameterDomainError("quadrature order must be at least 2")
    t, wt = leggauss(order)
    half = 0.5 * (hi - lo)
    return QuadGrid((lo, hi), lo + half * (t + 1.0), half * wt, order)


def _endpoint_exponents(spec: EnsembleSpec, lo: float, hi: float) -> tuple[float, float]:
    """Powers (at hi, at lo) of the diagonal K(x,x) at support endpoints."""
    if spec.kind is Kind.LAGUERRE:
        return 0.0, (spec.a if lo == 0.0 else 0.0)
    if spec.kind is Kind.JACOBI:
        return (spec.a if hi == 1.0 else 0.0), (spec.b if lo == -1.0 else 0.0)
    return 0.0, 0.0


def quadrature_for(spec: EnsembleSpec, lo: float, hi: float, order: int) -> QuadGrid:
    """Rule adapted to the kernel on ``(lo, hi)``.

    If the interval touches a support endpoint whose weight exponent is not an
    integer, the kernel carries a non-analytic power there; a Gauss-Jacobi
    rule absorbs that power so convergence stays geometric. The returned
    weights already include the division by the absorbed factor, so the
    rule integrates plain functions.
    """
    alpha, beta = _endpoint_exponents(spec, lo, hi)
    alpha = 0.0 if float(alpha).is_integer() else alpha
    beta = 0.0 if float(beta).is_integer() else beta
    if alpha == 0.0 and beta == 0.0:
        return build_grid(lo, hi, order)
    if not hi > lo:
        raise ParameterDomainError(f"degenerate interval ({lo}, {hi})")
    t, wt = roots_jacobi(order, alpha, beta)
    half = 0.5 * (hi - lo)
    x = lo + half * (t + 1.0)
    w = wt * half ** (alpha + beta + 1.0)
    w = w / ((hi - x) ** alpha * (x - lo) ** beta)
    return QuadGrid((lo, hi), x, w, order)


def _check_interval(spec: EnsembleSpec, interval) -> tuple[float, float]:
    lo, hi = map(float, interval)
    slo, shi = spec.support
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ParameterDomainError("interval must be finite; truncate semi-infinite gaps first")
    if lo < slo or hi > shi:
        raise ParameterDomainError(f"interval ({lo}, {hi}) leaves the support {spec.support}")
    if not hi > lo:
        raise ParameterDomainError(f"degenerate interval ({lo}, {hi})")
    return lo, hi


class _Discretisation:
    """Factorised ``I - D K D`` on a quadrature rule."""

    def __init__(self, spec: EnsembleSpec, interval, order: int):
        lo, hi = _check_interval(spec, interval)
        self.spec = spec
        self.grid = quadrature_for(spec, lo, hi, order)
        self.sqw = np.sqrt(self.grid.weights)
        self.kmat = kernel_matrix(spec, self.grid.nodes)
        m = np.eye(order) - self.sqw[:, None] * self.kmat * self.sqw[None, :]
        m = 0.5 * (m + m.T)
        try:
            self.chol = linalg.cho_factor(m, lower=True, check_finite=True)
            diag = np.diag(self.chol[0])
            self.logdet = 2.0 * float(np.sum(np.log(diag)))
        except (linalg.LinAlgError, ValueError) as exc:
            sign, logdet = np.linalg.slogdet(m)
            if sign > 0 and np.isfinite(logdet):
                # barely indefinite from rounding only; LU still gives a sane value
                self.chol = None
                self.lu = linalg.lu_factor(m)
                self.logdet = float(logdet)
            else:
                raise NumericalError(
                    "I - K is not positive definite on the grid "
                    f"(order {order} too low or interval invalid): {exc}"
                ) from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.chol is not None:
            return linalg.cho_solve(self.chol, rhs)
        return linalg.lu_solve(self.lu, rhs)


def fredholm_logdet(spec: EnsembleSpec, interval, order: int = DEFAULT_ORDER) -> float:
    return _Discretisation(spec, interval, order).logdet


def fredholm_det(spec: EnsembleSpec, interval, order: int = DEFAULT_ORDER) -> float:
    """Gap probability ``E_2(0; interval)`` as a Nystrom determinant."""
    return math.exp(fredholm_logdet(spec, interval, order))


@dataclass
class NystromSolution:
    """Resolvent data on an interval ``(a_1, a_2)``.

    Endpoint arrays are ordered ``[a_1, a_2]``. An endpoint where the weight is
    singular carries ``nan``.
    """

    interval: tuple[float, float]
    det_value: float
    log_det: float
    q_endpoints: np.ndarray
    p_endpoints: np.ndarray
    u: float
    v: float
    w: float
    v_dual: float
    r_diag: np.ndarray
    r_offdiag: float
    nodes: np.ndarray
    q_nodes: np.ndarray
    p_nodes: np.ndarray
    order: int = field(default=DEFAULT_ORDER)


def _regular_endpoint(spec: EnsembleSpec, x: float) -> bool:
    if spec.kind is Kind.LAGUERRE and x == 0.0:
        return spec.a >= 0
    if spec.kind is Kind.JACOBI:
        if x == 1.0:
            return spec.a >= 0
        if x == -1.0:
            return spec.b >= 0
    return True


def nystrom_solve(spec: EnsembleSpec, interval, order: int = DEFAULT_ORDER) -> NystromSolution:
    """Solve ``(I - K) Q = phi`` and ``(I - K) P = psi`` and collect the scalars."""
    disc = _Discretisation(spec, interval, order)
    x, sqw = disc.grid.nodes, disc.sqw
    f = phi_psi(spec, x)
    zq = disc.solve(sqw * f.phi)
    zp = disc.solve(sqw * f.psi)
    u = float(np.dot(sqw * f.phi, zq))
    v = float(np.dot(sqw * f.psi, zq))
    v_dual = float(np.dot(sqw * f.phi, zp))
    w = float(np.dot(sqw * f.psi, zp))

    lo, hi = disc.grid.interval
    q_end = np.full(2, np.nan)
    p_end = np.full(2, np.nan)
    r_diag = np.full(2, np.nan)
    rows = {}
    for i, e in enumerate((lo, hi)):
        if not _regular_endpoint(spec, e):
            continue
        ke = sqw * np.asarray(cd_kernel(spec, np.full_like(x, e), x))
        rows[i] = ke
        fe = phi_psi(spec, e)
        q_end[i] = fe.phi + np.dot(ke, zq)
        p_end[i] = fe.psi + np.dot(ke, zp)
        r_diag[i] = kernel_diagonal(spec, e) + np.dot(ke, disc.solve(ke))
    r_off = np.nan
    if len(rows) == 2:
        r_off = float(cd_kernel(spec, lo, hi)) + float(np.dot(rows[0], disc.solve(rows[1])))
    return NystromSolution(
        interval=(lo, hi),
        det_value=math.exp(disc.logdet),
        log_det=disc.logdet,
        q_endpoints=q_end,
        p_endpoints=p_end,
        u=u,
        v=v,
        w=w,
        v_dual=v_dual,
        r_diag=r_diag,
        r_offdiag=r_off,
        nodes=x,
        q_nodes=zq / sqw,
        p_nodes=zp / sqw,
        order=order,
    )


def _tail_mass(spec: EnsembleSpec, t: float) -> float:
    val, _ = integrate.quad(lambda x: kernel_diagonal(spec, x), t, np.inf, epsabs=1e-17, limit=200)
    return val


def truncate_interval(spec: EnsembleSpec, s: float, tol: float = TAIL_TOL) -> tuple[float, float]:
    """Replace a right-unbounded gap ``(s, inf)`` by ``(s, T)``.

    ``T`` is the first point on a 0.25-spaced ladder, starting from the
    spectrum-edge scale, beyond which the one-point density carries less than
    ``tol`` of mass.
    """
    if spec.kind is Kind.JACOBI:
        raise ParameterDomainError("the Jacobi support is bounded; no truncation needed")
    t = _tail_point(spec, tol)
    return float(s), float(max(t, s + 1.0))


@functools.lru_cache(maxsize=128)
def _tail_point(spec: EnsembleSpec, tol: float) -> float:
    if spec.kind is Kind.GAUSSIAN:
        t = math.sqrt(2 * spec.n) + 1.0
    else:
        t = 4 * spec.n + 2 * spec.a + 2.0 * math.sqrt(spec.n)
    while _tail_mass(spec, t) >= tol:
        t += 0.25
    return t


def gap_series(spec: EnsembleSpec, interval, nmax: int | None = None, order: int = 20) -> float:
    """Truncated correlation-function expansion of ``E_2(0; interval)``.

    Each n-fold integral of ``det[K(x_i, x_j)]`` is done by a tensor-product
    rule with ``order`` nodes per axis, so the cost grows like ``order**nmax``.
    """
    nmax = spec.n if nmax is None else nmax
    if nmax > spec.n:
        raise ParameterDomainError(f"rho_n vanishes for n > N={spec.n}; got nmax={nmax}")
    lo, hi = map(float, interval)
    if hi <= lo:
        return 1.0
    grid = quadrature_for(spec, *_check_interval(spec, (lo, hi)), order)
    kmat = kernel_matrix(spec, grid.nodes)
    total = 1.0
    for n in range(1, nmax + 1):
        idx = np.stack(np.meshgrid(*([np.arange(order)] * n), indexing="ij"), -1).reshape(-1, n)
        blocks = kmat[idx[:, :, None], idx[:, None, :]]
        dets = np.linalg.det(blocks)
        wprod = np.prod(grid.weights[idx], axis=1)
        total += (-1) ** n / math.factorial(n) * float(np.dot(wprod, dets))
    return total


def one_point_density(spec: EnsembleSpec, x) -> float:
    return rho_n(spec, [x])


def spacing_pdf(
    spec: EnsembleSpec, a1: float, a2: float, h: float | None = None, order: int = DEFAULT_ORDER
) -> float:
    """Nearest-right-neighbour density ``p(0; (a1, a2))`` by central differences.

    ``-(1/rho_1(a1)) d^2 E / da1 da2`` with the four-point cross stencil.
    """
    if not a2 > a1:
        raise ParameterDomainError("need a1 < a2")
    rho = one_point_density(spec, a1)
    if rho < 1e-12:
        raise NumericalError(f"one-point density at a1={a1} is {rho:.3g}; conditioning undefined")
    h = min(1e-3, 0.05 * (a2 - a1)) if h is None else h
    e = lambda x1, x2: fredholm_det(spec, (x1, x2), order)  # noqa: E731
    cross = e(a1 + h, a2 + h) - e(a1 + h, a2 - h) - e(a1 - h, a2 + h) + e(a1 - h, a2 - h)
    return -cross / (4 * h * h) / rho


def spacing_pdf_resolvent(spec: EnsembleSpec, a1: float, a2: float, order: int = DEFAULT_ORDER) -> float:
    """Same density from resolvent values: ``E (R11 R22 - R12^2) / rho_1(a1)``."""
    sol = nystrom_solve(spec, (a1, a2), order)
    r11, r22 = sol.r_diag
    return sol.det_value * (r11 * r22 - sol.r_offdiag**2) / one_point_density(spec, a1)


def gap_curve_fredholm(
    spec: EnsembleSpec, s_values: Sequence[float], order: int = DEFAULT_ORDER, workers: int = 1
):
    """E_2 and the resolvent scalars along the one-endpoint family of the ensemble.

    Gaussian: ``(s, inf)``; Laguerre: ``(0, s)``; Jacobi: ``(-1, s)``.
    Returns a list of :class:`NystromSolution`, in input order.
    """
    from concurrent.futures import ThreadPoolExecutor

    intervals = [anchored_interval(spec, s) for s in s_values]
    if workers <= 1:
        return [nystrom_solve(spec, iv, order) for iv in intervals]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda iv: nystrom_solve(spec, iv, order), intervals))


def anchored_interval(spec: EnsembleSpec, s: float) -> tuple[float, float]:
    """The gap interval anchored at the ensemble's natural endpoint."""
    if spec.kind is Kind.GAUSSIAN:
        return truncate_interval(spec, s)
    if spec.kind is Kind.LAGUERRE:
        return (0.0, float(s))
    return (-1.0, float(s))


def moving_index(spec: EnsembleSpec) -> int:
    """Index of the moving endpoint in ``NystromSolution`` endpoint arrays."""
    return 0 if spec.kind is Kind.GAUSSIAN else 1


def default_s_grid(spec: EnsembleSpec, points: int = 20, floor: float = 1e-8) -> np.ndarray:
    """Evenly spaced s-values over the range where ``E_2 >= floor``.

    The far end is found by bisection on the oracle; deep-tail values are
    excluded because the auxiliary quantities grow like 1/E_2 there.
    """
    target = math.log(floor)

    def logdet(s):
        try:
            return fredholm_logdet(spec, anchored_interval(spec, s))
        except NumericalError:
            return -math.inf

    if spec.kind is Kind.GAUSSIAN:
        hi = math.sqrt(2 * spec.n) + 1.5
        lo_bound = -math.sqrt(2 * spec.n) - 2.0
        if logdet(lo_bound) >= target:
            return np.linspace(lo_bound, hi, points)
        a, b = lo_bound, hi  # logdet(a) < target <= logdet(b)
    else:
        lo = 0.05 if spec.kind is Kind.LAGUERRE else -0.9
        hi_bound = 4.0 * spec.n + 2 * spec.a + 4 if spec.kind is Kind.LAGUERRE else 0.9
        if logdet(hi_bound) >= target:
            return np.linspace(lo, hi_bound, points)
        a, b = hi_bound, lo
    for _ in range(60):
        mid = 0.5 * (a + b)
        if logdet(mid) < target:
            a = mid
        else:
            b = mid
    if spec.kind is Kind.GAUSSIAN:
        return np.linspace(b, hi, points)
    return np.linspace(lo, b, points)
