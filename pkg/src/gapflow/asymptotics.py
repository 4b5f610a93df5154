"""Leading-order behaviour of sigma, q'/q and p'/p at the anchored endpoint.

Gaussian rows are for s -> +inf with the gap (s, inf); Laguerre rows for
s -> 0+ with (0, s); Jacobi rows for s -> -1+ with (-1, s).

The q'/q and p'/p rows are the logarithmic derivatives of phi and psi near
the endpoint. They describe q and p themselves only to the extent that the
resolvent correction is of higher order, which needs a > 0 (Laguerre) or
b > 0 (Jacobi) for the constant term.
"""

from __future__ import annotations

import math

from scipy.special import gammaln

from .ensembles import EnsembleSpec, Kind


def sigma_leading(spec: EnsembleSpec, s: float) -> float:
    """sigma (R for Gaussian, sR for Laguerre, (1-s^2)R for Jacobi), leading terms."""
    n, a, b = spec.n, spec.a, spec.b
    if spec.kind is Kind.GAUSSIAN:
        logc = (n - 1) * math.log(2.0) - 0.5 * math.log(math.pi) - gammaln(n)
        return math.exp(logc + (2 * n - 2) * math.log(s) - s * s)
    if spec.kind is Kind.LAGUERRE:
        logc = gammaln(n + a + 1) - gammaln(n) - gammaln(a + 1) - gammaln(a + 2)
        corr = 1.0 - (2 * n - 2) / (a + 2) * s
        return math.exp(logc + (a + 1) * math.log(s) - s) * corr
    t = s + 1.0
    logc = (
        gammaln(n + a + b + 1)
        + gammaln(n + b + 1)
        - b * math.log(2.0)
        - gammaln(n)
        - gammaln(n + a)
        - gammaln(b + 1)
        - gammaln(b + 2)
    )
    corr = 1.0 - (2 * n * n + 2 * n * (a + b) + a * b - b) / (2 * (b + 2)) * t
    return math.exp(logc + (b + 1) * math.log(t)) * corr


def log_derivs_leading(spec: EnsembleSpec, s: float) -> tuple[float, float]:
    """(q'/q, p'/p) leading terms."""
    n, a, b = spec.n, spec.a, spec.b
    if spec.kind is Kind.GAUSSIAN:
        return -s + n / s, -s + (n - 1) / s
    if spec.kind is Kind.LAGUERRE:
        return (
            a / (2 * s) - (2 * n - 1 + a) / (2 * (a + 1)),
            a / (2 * s) - (2 * n + 1 + a) / (2 * (a + 1)),
        )
    t = s + 1.0
    return (
        b / (2 * t) - (2 * n * n + 2 * n * (a + b + 1) + a * (b + 1)) / (4 * (b + 1)),
        b / (2 * t) - (2 * n * n + 2 * n * (a + b - 1) + a * (b - 1) - 2 * b) / (4 * (b + 1)),
    )
