"""Verification suite: structural identities and cross-route agreement.

Every check returns a :class:`Check` with the largest residual seen and the
tolerance it is held to.  ``default_suite`` is what ``gapflow verify`` runs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .ensembles import EnsembleSpec, Kind, cd_kernel, kernel_diagonal, orthonormal_poly, sum_kernel
from .errors import GapflowError
from .fredholm import DEFAULT_ORDER, anchored_interval, default_s_grid, gap_curve_fredholm, nystrom_solve
from .twode import check_integrals, gap_curve_tw, init_state, integrate as tw_integrate


@dataclass
class Check:
    name: str
    max_residual: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        if not math.isfinite(d["max_residual"]):
            d["max_residual"] = None  # JSON has no infinity
        return d

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<28} max_residual={self.max_residual:.3e}  tol={self.tolerance:.1e} {self.detail}".rstrip()


def _check(name: str, residual: float, tol: float, detail: str = "") -> Check:
    residual = float(residual)
    return Check(name, residual, tol, bool(np.isfinite(residual) and residual <= tol), detail)


def _sample_box(spec: EnsembleSpec) -> tuple[float, float]:
    if spec.kind is Kind.GAUSSIAN:
        r = math.sqrt(2 * spec.n) + 2
        return -r, r
    if spec.kind is Kind.LAGUERRE:
        return 0.0, 4.0 * spec.n + 2 * spec.a + 4
    return -1.0, 1.0


def check_cd_identity(spec: EnsembleSpec, pairs: int = 200, seed: int = 0) -> Check:
    lo, hi = _sample_box(spec)
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, pairs)
    y = rng.uniform(lo, hi, pairs)
    if spec.kind is not Kind.GAUSSIAN:
        # keep off the endpoints, where sqrt(w) may vanish or blow up
        x = np.clip(x, lo + 1e-6, hi - 1e-6)
        y = np.clip(y, lo + 1e-6, hi - 1e-6)
    direct = np.array([sum_kernel(spec, [a], [b])[0, 0] for a, b in zip(x, y)])
    cd = cd_kernel(spec, x, y)
    return _check("cd_identity", np.max(np.abs(direct - cd) / (1 + np.abs(direct))), 1e-10)


def _weighted_integral(spec: EnsembleSpec, f: Callable[[float], float]) -> float:
    """Integral of f(x) w(x) over the support, with the endpoint singularities given to QUADPACK."""
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=400)
    if spec.kind is Kind.GAUSSIAN:
        return integrate.quad(lambda x: f(x) * math.exp(-x * x), -math.inf, math.inf, **opts)[0]
    if spec.kind is Kind.LAGUERRE:
        head = integrate.quad(lambda x: f(x) * math.exp(-x), 0.0, 1.0, weight="alg", wvar=(spec.a, 0.0), **opts)[0]
        tail = integrate.quad(lambda x: f(x) * x**spec.a * math.exp(-x), 1.0, math.inf, **opts)[0]
        return head + tail
    return integrate.quad(f, -1.0, 1.0, weight="alg", wvar=(spec.b, spec.a), **opts)[0]


def check_orthonormality(spec: EnsembleSpec) -> Check:
    n = spec.n
    worst = 0.0
    for j in range(n + 1):
        for k in range(j, n + 1):
            val = _weighted_integral(
                spec, lambda x: float(orthonormal_poly(spec, j, x)) * float(orthonormal_poly(spec, k, x))
            )
            worst = max(worst, abs(val - (1.0 if j == k else 0.0)))
    return _check("orthonormality", worst, 1e-9)


def check_trace(spec: EnsembleSpec) -> Check:
    lo, hi = spec.support
    f = lambda x: float(kernel_diagonal(spec, x))  # noqa: E731
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=400)
    if spec.kind is Kind.GAUSSIAN:
        total = integrate.quad(f, -math.inf, math.inf, **opts)[0]
    elif spec.kind is Kind.LAGUERRE:
        total = integrate.quad(f, 0.0, 1.0, **opts)[0] + integrate.quad(f, 1.0, math.inf, **opts)[0]
    else:
        total = integrate.quad(f, -1.0, 1.0, **opts)[0]
    return _check("trace", abs(total - spec.n), 1e-8, f"integral={total:.15g}")


def _probe_points(spec: EnsembleSpec, count: int = 5) -> np.ndarray:
    grid = default_s_grid(spec, count + 2)
    return grid[1:-1]


def check_dual_v(spec: EnsembleSpec, order: int = DEFAULT_ORDER) -> Check:
    worst = 0.0
    for s in _probe_points(spec):
        sol = nystrom_solve(spec, anchored_interval(spec, s), order)
        worst = max(worst, abs(sol.v - sol.v_dual))
    return _check("dual_v", worst, 1e-9)


def _endpoint_sign(spec: EnsembleSpec) -> float:
    # Gaussian gaps (s, inf) lose mass as s grows; the others grow
    return 1.0 if spec.kind is Kind.GAUSSIAN else -1.0


def _richardson(f: Callable[[float], np.ndarray], s: float, h: float) -> np.ndarray:
    """Central difference with one Richardson step, error O(h^4)."""
    d1 = (f(s + h) - f(s - h)) / (2 * h)
    d2 = (f(s + 2 * h) - f(s - 2 * h)) / (4 * h)
    return (4 * d1 - d2) / 3


def check_log_derivative(spec: EnsembleSpec, order: int = DEFAULT_ORDER) -> Check:
    """Differences of ln E_2 against the resolvent diagonal at the moving endpoint."""
    worst = 0.0
    sgn = _endpoint_sign(spec)
    i = 0 if spec.kind is Kind.GAUSSIAN else 1
    for s in _probe_points(spec):
        h = 1e-4 * max(1.0, abs(s))
        fd = _richardson(lambda x: np.array(nystrom_solve(spec, anchored_interval(spec, x), order).log_det), s, h)
        r = nystrom_solve(spec, anchored_interval(spec, s), order).r_diag[i]
        worst = max(worst, abs(float(fd) - sgn * r))
    return _check("dlogE_ds_equals_R", worst, 1e-6)


def check_uvw_derivatives(spec: EnsembleSpec, order: int = DEFAULT_ORDER) -> Check:
    """u' = q^2, v' = qp, w' = p^2 up to the endpoint orientation."""
    worst = 0.0
    sgn = -_endpoint_sign(spec)
    i = 0 if spec.kind is Kind.GAUSSIAN else 1

    def uvw(x):
        sol = nystrom_solve(spec, anchored_interval(spec, x), order)
        return np.array([sol.u, sol.v, sol.w])

    for s in _probe_points(spec):
        h = 1e-4 * max(1.0, abs(s))
        fd = _richardson(uvw, s, h)
        mid = nystrom_solve(spec, anchored_interval(spec, s), order)
        q, p = mid.q_endpoints[i], mid.p_endpoints[i]
        target = sgn * np.array([q * q, q * p, p * p])
        # u, v, w grow like 1/E_2 in the tail, where differencing loses digits in proportion
        scale = 1 + np.abs(target) + np.abs(uvw(s))
        worst = max(worst, float(np.max(np.abs(fd - target) / scale)))
    return _check("uvw_derivatives", worst, 1e-5, "relative to 1 + |value| + |derivative|")


def check_integrals_of_motion(spec: EnsembleSpec, tol: float = 1e-10, perturb_sigma: float = 0.0) -> Check:
    s_grid = default_s_grid(spec, 20)
    st = init_state(spec, s0=_start(spec, s_grid))
    st.sigma += perturb_sigma
    end = s_grid[0] if spec.kind is Kind.GAUSSIAN else s_grid[-1]
    curve = tw_integrate(spec, st.s, end, st, tol=tol)
    y = np.vstack([np.log(curve.E2)] + [curve[f] for f in ("q", "p", "u", "v", "w", "sigma")])
    res = check_integrals(spec, curve.s, y)
    return _check("integrals_of_motion", res.max_abs(), 1e-7)


def _start(spec: EnsembleSpec, s_grid) -> float:
    if spec.kind is Kind.GAUSSIAN:
        from .twode import default_start

        return max(default_start(spec), float(np.max(s_grid)) + 0.5)
    return spec.support[0] + min(1e-3, float(np.min(s_grid)) - spec.support[0])


def _fredholm_e2(spec: EnsembleSpec, s, order: int = DEFAULT_ORDER) -> np.ndarray:
    return np.exp([sol.log_det for sol in gap_curve_fredholm(spec, s, order)])


def check_route_tw(spec: EnsembleSpec, tol: float = 1e-10, perturb_sigma: float = 0.0, points: int = 20) -> Check:
    s = default_s_grid(spec, points)
    try:
        if perturb_sigma:
            st = init_state(spec, s0=_start(spec, s))
            st.sigma += perturb_sigma
            end = s[0] if spec.kind is Kind.GAUSSIAN else s[-1]
            e2 = tw_integrate(spec, st.s, end, st, tol=tol, s_eval=s).E2
        else:
            e2 = gap_curve_tw(spec, s, tol=tol).E2
    except (GapflowError, ValueError) as err:
        return Check("route_tw_vs_fredholm", math.inf, 1e-5, False, f"error: {err}")
    return _check("route_tw_vs_fredholm", np.max(np.abs(e2 - _fredholm_e2(spec, s))), 1e-5)


def check_route_painleve(spec: EnsembleSpec, tol: float = 1e-10, points: int = 20) -> Check:
    from .painleve import gap_curve_painleve

    s = default_s_grid(spec, points)
    try:
        e2 = gap_curve_painleve(spec, s, tol=tol).E2
    except (GapflowError, ValueError) as err:
        return Check("route_painleve_vs_fredholm", math.inf, 1e-5, False, f"error: {err}")
    return _check("route_painleve_vs_fredholm", np.max(np.abs(e2 - _fredholm_e2(spec, s))), 1e-5)


def check_jacobi_sigma(spec: EnsembleSpec, order: int = DEFAULT_ORDER) -> Check:
    m = 2 * spec.n + spec.a + spec.b
    worst = 0.0
    for s in _probe_points(spec):
        sol = nystrom_solve(spec, anchored_interval(spec, s), order)
        worst = max(worst, abs((1 - s * s) * sol.r_diag[1] + m * sol.v))
    return _check("jacobi_sigma_first_integral", worst, 1e-6)


def default_suite(spec: EnsembleSpec, tol: float = 1e-10, perturb_sigma: float = 0.0, painleve: bool = True) -> list[Check]:
    checks = [
        check_cd_identity(spec),
        check_orthonormality(spec),
        check_trace(spec),
        check_dual_v(spec),
        check_log_derivative(spec),
        check_uvw_derivatives(spec),
        check_integrals_of_motion(spec, tol, perturb_sigma),
        check_route_tw(spec, tol, perturb_sigma),
    ]
    if spec.kind is Kind.JACOBI:
        checks.append(check_jacobi_sigma(spec))
    if painleve:
        checks.append(check_route_painleve(spec, tol))
    return checks
