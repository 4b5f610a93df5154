import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import erf

from gapflow.checks import check_dual_v, check_log_derivative, check_uvw_derivatives
from gapflow.ensembles import make_ensemble, phi_psi
from gapflow.errors import ParameterDomainError
from gapflow.fredholm import (
    anchored_interval,
    build_grid,
    default_s_grid,
    fredholm_det,
    gap_curve_fredholm,
    gap_series,
    nystrom_solve,
    one_point_density,
    spacing_pdf,
    spacing_pdf_resolvent,
    truncate_interval,
)


def test_build_grid():
    g = build_grid(-1, 1, 2)
    assert np.allclose(np.sort(g.nodes), [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    assert np.allclose(g.weights, [1, 1], atol=1e-15)
    assert build_grid(0, 3, 40).weights.sum() == pytest.approx(3, rel=1e-14)
    with pytest.raises(ParameterDomainError):
        build_grid(2, 2, 10)


def test_gaussian_n1_closed_form():
    g = make_ensemble("gaussian", 1)
    assert fredholm_det(g, truncate_interval(g, 0.0)) == pytest.approx(0.5, abs=1e-12)
    for s in (-1.0, 0.0, 1.0):
        assert fredholm_det(g, truncate_interval(g, s)) == pytest.approx((1 + erf(s)) / 2, abs=1e-12)


def test_laguerre_and_jacobi_n1_closed_forms():
    lag = make_ensemble("laguerre", 1, 0)
    for s in (0.5, 1.0, 2.0):
        assert fredholm_det(lag, (0, s)) == pytest.approx(math.exp(-s), abs=1e-12)
    jac = make_ensemble("jacobi", 1, 0, 0)
    for s in (-0.5, 0.0, 0.7):
        assert fredholm_det(jac, (-1, s)) == pytest.approx((1 - s) / 2, abs=1e-12)


@pytest.mark.parametrize("a", [-0.5, 0.5, 2.0])
def test_laguerre_n1_general_a(a):
    spec = make_ensemble("laguerre", 1, a)
    for s in (0.3, 1.5):
        exact = integrate.quad(lambda x: x**a * math.exp(-x), s, math.inf)[0] / math.gamma(a + 1)
        assert fredholm_det(spec, (0, s)) == pytest.approx(exact, abs=1e-10)


def test_order_convergence():
    spec = make_ensemble("jacobi", 3, 1, 0.5)
    d64 = fredholm_det(spec, (-1, 0.2), 64)
    d128 = fredholm_det(spec, (-1, 0.2), 128)
    assert abs(d128 - d64) < 1e-10


def test_tiny_interval_limit():
    spec = make_ensemble("gaussian", 3)
    sol = nystrom_solve(spec, (0.3, 0.3 + 1e-8), 16)
    f = phi_psi(spec, np.array(sol.interval))
    assert max(abs(sol.u), abs(sol.v), abs(sol.w)) < 1e-7
    assert np.allclose(sol.q_endpoints, f.phi, atol=1e-7)
    assert np.allclose(sol.p_endpoints, f.psi, atol=1e-7)


def test_jacobi_sigma_first_integral():
    spec = make_ensemble("jacobi", 2, 0, 0)
    for s in (-0.5, 0.0, 0.5):
        sol = nystrom_solve(spec, (-1, s))
        assert abs((1 - s * s) * sol.r_diag[1] + 4 * sol.v) < 1e-6


def test_gaussian_first_integral_at_oracle():
    spec = make_ensemble("gaussian", 3)
    sol = nystrom_solve(spec, truncate_interval(spec, 1.0))
    q, p = sol.q_endpoints[0], sol.p_endpoints[0]
    assert abs(math.sqrt(6) * (sol.u - sol.w) + 2 * sol.u * sol.w - q * p) < 1e-6


def test_truncate_interval():
    g1 = make_ensemble("gaussian", 1)
    lo, t = truncate_interval(g1, 0.0)
    assert lo == 0.0 and 5.0 < t < 6.5
    assert (1 - erf(t)) / 2 < 1e-14
    g4 = make_ensemble("gaussian", 4)
    assert truncate_interval(g4, -2.0)[1] > math.sqrt(8)
    d1 = fredholm_det(g4, truncate_interval(g4, -0.5))
    d2 = fredholm_det(g4, (-0.5, 2 * truncate_interval(g4, -0.5)[1]), 128)
    assert abs(d1 - d2) < 1e-12
    with pytest.raises(ParameterDomainError):
        truncate_interval(make_ensemble("jacobi", 2), 0.0)


def test_rejects_bad_intervals():
    spec = make_ensemble("jacobi", 2)
    with pytest.raises(ParameterDomainError):
        fredholm_det(spec, (-1.5, 0))
    with pytest.raises(ParameterDomainError):
        fredholm_det(spec, (0.2, 0.2))
    with pytest.raises(ParameterDomainError):
        fredholm_det(make_ensemble("gaussian", 2), (0, math.inf))


@pytest.mark.parametrize(
    "spec,interval",
    [
        (make_ensemble("gaussian", 2), (-0.3, 0.2)),
        (make_ensemble("gaussian", 3), (0.1, 0.5)),
        (make_ensemble("laguerre", 2, 1), (0.5, 1.0)),
        (make_ensemble("jacobi", 3, 0.5, 1), (-0.2, 0.3)),
    ],
    ids=["gue2", "gue3", "lue2", "jue3"],
)
def test_gap_series_matches_det(spec, interval):
    assert gap_series(spec, interval) == pytest.approx(fredholm_det(spec, interval), abs=1e-8)


def test_gap_series_edge_cases():
    spec = make_ensemble("gaussian", 2)
    assert gap_series(spec, (0.4, 0.4)) == 1.0
    eps = 1e-3
    one = gap_series(spec, (0.2, 0.2 + eps), nmax=1)
    assert one == pytest.approx(1 - eps * one_point_density(spec, 0.2 + eps / 2), abs=1e-9)
    with pytest.raises(ParameterDomainError):
        gap_series(spec, (0, 1), nmax=3)


def test_monotone_in_nested_intervals():
    spec = make_ensemble("laguerre", 3, 0.5)
    vals = [fredholm_det(spec, (0.5 - d, 0.5 + d)) for d in (0.1, 0.2, 0.4)]
    assert vals[0] >= vals[1] >= vals[2]


@pytest.mark.parametrize(
    "spec",
    [make_ensemble("gaussian", 3), make_ensemble("laguerre", 2, 1), make_ensemble("jacobi", 2, 0, 0)],
    ids=["gaussian", "laguerre", "jacobi"],
)
def test_resolvent_identities(spec):
    for chk in (check_dual_v(spec), check_log_derivative(spec), check_uvw_derivatives(spec)):
        assert chk.passed, chk.line()


def test_spacing_pdf_properties():
    spec = make_ensemble("gaussian", 2)
    a1 = -0.5
    vals = [spacing_pdf(spec, a1, a1 + d) for d in (0.05, 0.5, 1.0, 2.0)]
    assert min(vals) > -1e-8
    # resolvent form agrees with the finite-difference form
    for d in (0.3, 1.0):
        assert spacing_pdf(spec, a1, a1 + d) == pytest.approx(spacing_pdf_resolvent(spec, a1, a1 + d), rel=1e-5)
    top = truncate_interval(spec, a1)[1]
    mass = integrate.quad(lambda a2: spacing_pdf_resolvent(spec, a1, a2), a1 + 1e-9, top, limit=200)[0]
    assert mass <= 1 + 1e-6
    with pytest.raises(ParameterDomainError):
        spacing_pdf(spec, 0.3, 0.1)


def test_gap_curve_and_default_grid():
    spec = make_ensemble("laguerre", 2, 0)
    s = default_s_grid(spec, 10)
    assert s.size == 10 and s[0] > 0
    sols = gap_curve_fredholm(spec, s, workers=2)
    e = np.array([x.det_value for x in sols])
    assert np.all(np.diff(e) < 0) and e[-1] >= 1e-8 * 0.999
    assert anchored_interval(spec, 1.5) == (0.0, 1.5)
