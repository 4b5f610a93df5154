"""Classical weights, orthonormal polynomials and the Christoffel-Darboux kernel.

Three unitary ensembles are supported:

========  ======================  ===========
kind      weight w(x)             support
========  ======================  ===========
gaussian  exp(-x^2)               (-inf, inf)
laguerre  x^a exp(-x)             (0, inf)
jacobi    (1-x)^a (1+x)^b         (-1, 1)
========  ======================  ===========

Everything is evaluated through the *orthonormal functions*
``h_k(x) = sqrt(w(x)) p_k(x)``, generated by the three-term recurrence in
orthonormal form, so nothing overflows for N in the low hundreds.

The kernel is written as ``K(x, y) = (phi(x) psi(y) - phi(y) psi(x)) / (x - y)``.
Only the product of the normalisations of ``phi`` and ``psi`` is fixed by the
kernel; the individual factors and signs chosen here are the ones for which

    m(x) phi'(x) =  A(x) phi(x) + B(x) psi(x)
    m(x) psi'(x) = -C(x) phi(x) - A(x) psi(x)

holds with the coefficients returned by :func:`recurrence_data`:

* gaussian:  phi = c h_N,      psi = c h_{N-1},    c = (N/2)^(1/4)
* laguerre:  phi = c h_{N-1},  psi = -c h_N,       c = (N(N+a))^(1/4)
* jacobi:    phi = c h_N,      psi = c h_{N-1},    c = beta_N^(1/4)

where beta_N is the squared off-diagonal Jacobi-matrix entry. For the
Gaussian case the recurrence needs ``A(x) = -x``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import ParameterDomainError, SingularityError

# Relative gap below which cd_kernel switches to the confluent formula.
CONFLUENT_SWITCH = 1e-6


class Kind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAGUERRE = "laguerre"
    JACOBI = "jacobi"


@dataclass(frozen=True)
class EnsembleSpec:
    """A classical unitary ensemble of size ``n``.

    ``a`` is the Laguerre/Jacobi exponent, ``b`` the second Jacobi exponent;
    both are ignored where the weight does not use them.
    """

    kind: Kind
    n: int
    a: float = 0.0
    b: float = 0.0

    @property
    def support(self) -> tuple[float, float]:
        if self.kind is Kind.GAUSSIAN:
            return (-math.inf, math.inf)
        if self.kind is Kind.LAGUERRE:
            return (0.0, math.inf)
        return (-1.0, 1.0)

    @property
    def label(self) -> str:
        if self.kind is Kind.GAUSSIAN:
            return f"gaussian(N={self.n})"
        if self.kind is Kind.LAGUERRE:
            return f"laguerre(N={self.n}, a={self.a:g})"
        return f"jacobi(N={self.n}, a={self.a:g}, b={self.b:g})"

    def as_dict(self) -> dict:
        return {"kind": self.kind.value, "n": self.n, "a": self.a, "b": self.b}


def make_ensemble(kind, n, a=0.0, b=0.0) -> EnsembleSpec:
    """Validate parameters and build an :class:`EnsembleSpec`."""
    try:
        kind = Kind(kind.lower() if isinstance(kind, str) else kind)
    except ValueError:
        raise ParameterDomainError(f"unknown ensemble kind {kind!r}") from None
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ParameterDomainError(f"matrix size must be a positive integer, got {n!r}")
    a = 0.0 if a is None else float(a)
    b = 0.0 if b is None else float(b)
    if kind is not Kind.GAUSSIAN and not a > -1:
        raise ParameterDomainError(f"exponent a must exceed -1, got {a}")
    if kind is Kind.JACOBI and not b > -1:
        raise ParameterDomainError(f"exponent b must exceed -1, got {b}")
    if kind is Kind.GAUSSIAN:
        a = b = 0.0
    elif kind is Kind.LAGUERRE:
        b = 0.0
    return EnsembleSpec(kind, int(n), a, b)


# ---------------------------------------------------------------------------
# recurrence coefficients


def jacobi_matrix(spec: EnsembleSpec, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal ``alpha[0..kmax]`` and off-diagonal ``b[0..kmax+1]`` entries.

    The orthonormal polynomials satisfy
    ``x p_k = b[k+1] p_{k+1} + alpha[k] p_k + b[k] p_{k-1}``; ``b[0]`` is 0.
    """
    k = np.arange(kmax + 2, dtype=float)
    a, bb = spec.a, spec.b
    if spec.kind is Kind.GAUSSIAN:
        diag = np.zeros(kmax + 1)
        off = np.sqrt(k / 2.0)
    elif spec.kind is Kind.LAGUERRE:
        diag = 2.0 * k[: kmax + 1] + a + 1.0
        off = np.sqrt(k * (k + a))
    else:
        diag = np.empty(kmax + 1)
        diag[0] = (bb - a) / (a + bb + 2.0)
        kk = k[1 : kmax + 1]
        diag[1:] = (bb * bb - a * a) / ((2 * kk + a + bb) * (2 * kk + a + bb + 2))
        beta = np.zeros(kmax + 2)
        if kmax + 2 > 1:
            beta[1] = 4 * (1 + a) * (1 + bb) / ((2 + a + bb) ** 2 * (3 + a + bb))
        kk = k[2:]
        s = 2 * kk + a + bb
        beta[2:] = 4 * kk * (kk + a) * (kk + bb) * (kk + a + bb) / (s * s * (s + 1) * (s - 1))
        off = np.sqrt(beta)
    off[0] = 0.0
    return diag, off


def _log_mu0(spec: EnsembleSpec) -> float:
    # log of the total mass of the weight
    if spec.kind is Kind.GAUSSIAN:
        return 0.5 * math.log(math.pi)
    if spec.kind is Kind.LAGUERRE:
        return float(gammaln(spec.a + 1))
    a, b = spec.a, spec.b
    return (a + b + 1) * math.log(2.0) + float(gammaln(a + 1) + gammaln(b + 1) - gammaln(a + b + 2))


def weight(spec: EnsembleSpec, x):
    """The classical weight, zero outside the support."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if spec.kind is Kind.GAUSSIAN:
            return np.exp(-x * x)
        if spec.kind is Kind.LAGUERRE:
            return np.where(x > 0, np.power(np.abs(x), spec.a) * np.exp(-x), 0.0)
        inside = np.abs(x) < 1
        return np.where(
            inside, np.power(np.abs(1 - x), spec.a) * np.power(np.abs(1 + x), spec.b), 0.0
        )


def _sqrt_weight(spec: EnsembleSpec, x: np.ndarray) -> np.ndarray:
    lo, hi = spec.support
    if np.any((x < lo) | (x > hi)):
        raise SingularityError("evaluation point outside the support")
    if spec.kind is Kind.LAGUERRE and spec.a < 0 and np.any(x == 0):
        raise SingularityError("sqrt(w) is singular at x = 0 for a < 0")
    if spec.kind is Kind.JACOBI:
        if spec.a < 0 and np.any(x == 1):
            raise SingularityError("sqrt(w) is singular at x = 1 for a < 0")
        if spec.b < 0 and np.any(x == -1):
            raise SingularityError("sqrt(w) is singular at x = -1 for b < 0")
    with np.errstate(divide="ignore"):
        logw = _log_weight(spec, x)
    return np.exp(0.5 * logw)


def _log_weight(spec: EnsembleSpec, x: np.ndarray) -> np.ndarray:
    if spec.kind is Kind.GAUSSIAN:
        return -x * x
    if spec.kind is Kind.LAGUERRE:
        return spec.a * np.log(x) - x if spec.a != 0 else -x
    out = np.zeros_like(x)
    if spec.a != 0:
        out = out + spec.a * np.log1p(-x)
    if spec.b != 0:
        out = out + spec.b * np.log1p(x)
    return out


def orthonormal_functions(spec: EnsembleSpec, x, kmax: int | None = None, derivative=False):
    """Rows ``h_0(x) .. h_kmax(x)`` with ``h_k = sqrt(w) p_k``.

    With ``derivative=True`` also returns ``g_k = sqrt(w) p_k'``, the
    polynomial derivative times the square-rooted weight.
    """
    kmax = spec.n if kmax is None else kmax
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diag, off = jacobi_matrix(spec, kmax)
    h = np.empty((kmax + 1,) + x.shape)
    h[0] = _sqrt_weight(spec, x) * math.exp(-0.5 * _log_mu0(spec))
    if kmax >= 1:
        h[1] = (x - diag[0]) * h[0] / off[1]
    for k in range(1, kmax):
        h[k + 1] = ((x - diag[k]) * h[k] - off[k] * h[k - 1]) / off[k + 1]
    if not derivative:
        return h
    g = np.zeros_like(h)
    if kmax >= 1:
        g[1] = h[0] / off[1]
    for k in range(1, kmax):
        g[k + 1] = ((x - diag[k]) * g[k] + h[k] - off[k] * g[k - 1]) / off[k + 1]
    return h, g


def orthonormal_poly(spec: EnsembleSpec, k: int, x):
    """Orthonormal polynomial ``p_k(x)`` (positive leading coefficient)."""
    if k < 0 or k > spec.n:
        raise ParameterDomainError(f"degree must lie in [0, N={spec.n}], got {k}")
    x = np.asarray(x, dtype=float)
    xs = np.atleast_1d(x)
    diag, off = jacobi_matrix(spec, k)
    p_prev = np.zeros_like(xs)
    p = np.full_like(xs, math.exp(-0.5 * _log_mu0(spec)))
    for j in range(k):
        p, p_prev = ((xs - diag[j]) * p - off[j] * p_prev) / off[j + 1], p
    return p.reshape(x.shape) if x.ndim else float(p[0])


# ---------------------------------------------------------------------------
# phi, psi and the kernel


@dataclass(frozen=True)
class PhiPsi:
    phi: np.ndarray | float
    psi: np.ndarray | float


def _phi_psi_layout(spec: EnsembleSpec) -> tuple[int, int, float, float]:
    """(index for phi, index for psi, scale of phi, scale of psi)."""
    n = spec.n
    _, off = jacobi_matrix(spec, n)
    c = math.sqrt(off[n])  # off[n] = a_{N-1}/a_N
    if spec.kind is Kind.LAGUERRE:
        return n - 1, n, c, -c
    return n, n - 1, c, c


def phi_psi(spec: EnsembleSpec, x, derivative=False):
    """Evaluate ``phi`` and ``psi`` (and optionally their derivatives).

    Returns a :class:`PhiPsi`; with ``derivative=True`` returns
    ``(PhiPsi, PhiPsi_of_derivatives)``. Derivatives are only available
    strictly inside the support.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    i, j, ci, cj = _phi_psi_layout(spec)
    if not derivative:
        h = orthonormal_functions(spec, x)
        phi, psi = ci * h[i], cj * h[j]
        if scalar:
            return PhiPsi(float(phi[0]), float(psi[0]))
        return PhiPsi(phi.reshape(x.shape), psi.reshape(x.shape))
    h, g = orthonormal_functions(spec, x, derivative=True)
    xs = np.atleast_1d(x)
    half_dlogw = 0.5 * _dlog_weight(spec, xs)
    dh = half_dlogw * h + g
    vals = (ci * h[i], cj * h[j], ci * dh[i], cj * dh[j])
    if scalar:
        vals = tuple(float(v[0]) for v in vals)
    else:
        vals = tuple(v.reshape(x.shape) for v in vals)
    return PhiPsi(vals[0], vals[1]), PhiPsi(vals[2], vals[3])


def _dlog_weight(spec: EnsembleSpec, x: np.ndarray) -> np.ndarray:
    if spec.kind is Kind.GAUSSIAN:
        return -2.0 * x
    if spec.kind is Kind.LAGUERRE:
        return spec.a / x - 1.0
    return -spec.a / (1.0 - x) + spec.b / (1.0 + x)


def kernel_diagonal(spec: EnsembleSpec, x):
    """Confluent form ``K(x, x) = phi'(x) psi(x) - phi(x) psi'(x)``.

    The weight's logarithmic derivative cancels, so this is evaluated as
    ``c_phi c_psi [g_i h_j - h_i g_j]`` and stays finite at regular endpoints.
    """
    x = np.asarray(x, dtype=float)
    h, g = orthonormal_functions(spec, x, derivative=True)
    i, j, ci, cj = _phi_psi_layout(spec)
    out = ci * cj * (g[i] * h[j] - h[i] * g[j])
    return out.reshape(x.shape) if x.ndim else float(out[0])


def kernel_matrix(spec: EnsembleSpec, x, y=None) -> np.ndarray:
    """``K(x_i, y_j)`` through the two-term Christoffel-Darboux formula.

    Pairs closer than ``CONFLUENT_SWITCH * (1 + |x| + |y|)`` use the
    confluent form at the midpoint.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    same = y is None
    y = x if same else np.atleast_1d(np.asarray(y, dtype=float))
    fx = phi_psi(spec, x)
    fy = fx if same else phi_psi(spec, y)
    dx = x[:, None] - y[None, :]
    num = np.outer(fx.phi, fy.psi) - np.outer(fx.psi, fy.phi)
    close = np.abs(dx) < CONFLUENT_SWITCH * (1 + np.abs(x)[:, None] + np.abs(y)[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / dx
    if np.any(close):
        mid = 0.5 * (x[:, None] + y[None, :])[close]
        out[close] = kernel_diagonal(spec, mid)
    return out


def cd_kernel(spec: EnsembleSpec, x, y):
    """Christoffel-Darboux kernel ``K(x, y)``; broadcasts over ``x`` and ``y``."""
    xa, ya = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    flat_x, flat_y = xa.ravel(), ya.ravel()
    if flat_x.size == 0:
        return np.empty(xa.shape)
    f_x = phi_psi(spec, flat_x)
    f_y = phi_psi(spec, flat_y)
    dx = flat_x - flat_y
    close = np.abs(dx) < CONFLUENT_SWITCH * (1 + np.abs(flat_x) + np.abs(flat_y))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (f_x.phi * f_y.psi - f_y.phi * f_x.psi) / dx
    if np.any(close):
        out[close] = kernel_diagonal(spec, 0.5 * (flat_x + flat_y)[close])
    out = out.reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


def sum_kernel(spec: EnsembleSpec, x, y) -> np.ndarray:
    """Direct N-term sum ``sum_k h_k(x) h_k(y)``, used as an independent check."""
    hx = orthonormal_functions(spec, x, spec.n - 1)
    hy = orthonormal_functions(spec, y, spec.n - 1)
    return hx.T @ hy


def rho_n(spec: EnsembleSpec, points: Sequence[float]) -> float:
    """n-point correlation ``det[K(x_i, x_j)]``."""
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    if not 1 <= pts.size <= spec.n:
        raise ParameterDomainError(f"need between 1 and N={spec.n} points, got {pts.size}")
    return float(np.linalg.det(kernel_matrix(spec, pts)))


# ---------------------------------------------------------------------------
# differential-recurrence data


@dataclass(frozen=True)
class RecurrenceData:
    """Coefficients of ``m = mu0 + mu1 x + mu2 x^2`` and of the linear A, B, C."""

    mu0: float
    mu1: float
    mu2: float
    alpha0: float
    alpha1: float
    beta0: float
    beta1: float
    gamma0: float
    gamma1: float

    def m(self, x):
        return self.mu0 + self.mu1 * x + self.mu2 * x * x

    def A(self, x):
        return self.alpha0 + self.alpha1 * x

    def B(self, x):
        return self.beta0 + self.beta1 * x

    def C(self, x):
        return self.gamma0 + self.gamma1 * x


def recurrence_data(spec: EnsembleSpec) -> RecurrenceData:
    n, a, b = spec.n, spec.a, spec.b
    if spec.kind is Kind.GAUSSIAN:
        r = math.sqrt(2 * n)
        return RecurrenceData(1.0, 0.0, 0.0, 0.0, -1.0, r, 0.0, r, 0.0)
    if spec.kind is Kind.LAGUERRE:
        r = math.sqrt(n * (n + a))
        return RecurrenceData(0.0, 1.0, 0.0, -0.5 * a - n, 0.5, r, 0.0, r, 0.0)
    s = 2 * n + a + b
    _, off = jacobi_matrix(spec, n)
    # beta0 = 2 sqrt(N(N+a)(N+b)(N+a+b))/s * sqrt((s+1)/(s-1)), written through
    # the recurrence entry so that the N = 1, a + b = -1 limit stays finite.
    beta0 = off[n] * (s + 1)
    gamma0 = off[n] * (s - 1)
    return RecurrenceData(1.0, 0.0, -1.0, (b * b - a * a) / (2 * s), -s / 2, beta0, 0.0, gamma0, 0.0)


def diff_recurrence_residual(spec: EnsembleSpec, x, data: RecurrenceData | None = None, h=None):
    """Residuals of the phi/psi differential-recurrence with finite-difference derivatives.

    Returns ``(r_phi, r_psi)`` arrays. Using an explicit ``data`` lets
    callers test alternative coefficient sets.
    """
    data = recurrence_data(spec) if data is None else data
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if h is None:
        lo, hi = spec.support
        room = np.minimum(x - lo, hi - x)
        h = np.minimum(1e-4 * (1 + np.abs(x)), 0.2 * room)
    f0 = phi_psi(spec, x)
    # five-point central stencil
    f = [phi_psi(spec, x + k * h) for k in (-2, -1, 1, 2)]
    dphi = (f[0].phi - 8 * f[1].phi + 8 * f[2].phi - f[3].phi) / (12 * h)
    dpsi = (f[0].psi - 8 * f[1].psi + 8 * f[2].psi - f[3].psi) / (12 * h)
    m, A, B, C = data.m(x), data.A(x), data.B(x), data.C(x)
    r_phi = m * dphi - A * f0.phi - B * f0.psi
    r_psi = m * dpsi + C * f0.phi + A * f0.psi
    return r_phi, r_psi
