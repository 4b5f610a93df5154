import math

import numpy as np
import pytest

from conftest import fredholm_e2
from gapflow.ensembles import make_ensemble
from gapflow.errors import NumericalError, ParameterDomainError, SingularityError
from gapflow.fredholm import anchored_interval, default_s_grid, nystrom_solve
from gapflow.painleve import (
    GUARD,
    PainleveState,
    PKind,
    PoleError,
    aux_from_omega,
    gap_curve_painleve,
    integrate_painleve,
    omega_init,
    oracle_targets,
    painleve_rhs,
    params_for,
    to_s,
    to_t,
)
from gapflow.twode import gap_curve_tw, init_state, tw_rhs


def test_params_examples():
    assert params_for(make_ensemble("gaussian", 3), 1).params[:2] == (5.0, 0.0)
    assert params_for(make_ensemble("laguerre", 2, 1), 2).params == (0.5, -0.5, 5.0, -0.5)
    assert params_for(make_ensemble("jacobi", 1, 0, 0), 1).params == (0.5, 0.0, 0.0, -1.5)
    g2 = make_ensemble("gaussian", 2)
    assert params_for(g2, 2, 1).params[:2] == (-1.0, -8.0)
    assert params_for(g2, 2, -1).params[:2] == (-3.0, -8.0)


def test_equation_per_ensemble():
    assert params_for(make_ensemble("gaussian", 1), 1).kind is PKind.PIV
    assert params_for(make_ensemble("laguerre", 1), 4).kind is PKind.PV
    assert params_for(make_ensemble("jacobi", 1), 8).kind is PKind.PVI


@pytest.mark.parametrize("args,row", [(("gaussian", 2), 3), (("laguerre", 2), 5), (("jacobi", 2), 0), (("jacobi", 2), 9)])
def test_row_out_of_range(args, row):
    with pytest.raises(ParameterDomainError):
        params_for(make_ensemble(*args), row)


def test_rows_without_map_are_flagged():
    ps = params_for(make_ensemble("laguerre", 2, 1), 3)
    assert not ps.has_map and not ps.validated
    with pytest.raises(ParameterDomainError):
        gap_curve_painleve(make_ensemble("laguerre", 2, 1), [0.5, 1.0], row=3)
    with pytest.raises(ParameterDomainError):
        aux_from_omega(ps, PainleveState(0.5, 0.3, 0.1))


def test_jacobi_variable_map():
    ps = params_for(make_ensemble("jacobi", 2), 1)
    assert to_t(ps, 0.0) == 0.5 and to_s(ps, 0.25) == -0.5
    ps = params_for(make_ensemble("laguerre", 2), 1)
    assert to_t(ps, 1.5) == 1.5


def test_rhs_guard_band():
    ps = params_for(make_ensemble("laguerre", 2, 0.5), 1)
    with pytest.raises(SingularityError):
        painleve_rhs(ps, PainleveState(1.0, 1.0 + GUARD / 2, 0.3))
    with pytest.raises(SingularityError):
        painleve_rhs(ps, PainleveState(0.0, 0.5, 0.3))
    pj = params_for(make_ensemble("jacobi", 2, 1, 1), 1)
    with pytest.raises(SingularityError):
        painleve_rhs(pj, PainleveState(0.3, 0.3, 0.1))


def test_rhs_continuous_off_guard():
    ps = params_for(make_ensemble("jacobi", 2, 1, 0.5), 1)
    for t in (0.2, 0.6):
        for w in (-0.7, 0.45, 2.3):
            a = painleve_rhs(ps, PainleveState(t, w, 0.4))
            b = painleve_rhs(ps, PainleveState(t + 1e-9, w + 1e-9, 0.4 + 1e-9))
            assert abs(a - b) < 1e-5 * (1 + abs(a))


def test_rhs_finite_difference_along_trajectory():
    spec = make_ensemble("gaussian", 2)
    ps = params_for(spec, 1)
    init = omega_init(ps)
    t, h = 1.0, 1e-3
    c = integrate_painleve(ps, init.t, t - h, init, tol=1e-12, t_eval=[t + h, t, t - h])
    w, wp = c["omega"], c["omega_prime"]  # ascending s: t - h, t, t + h
    fd = (wp[2] - wp[0]) / (2 * h)
    exact = painleve_rhs(ps, PainleveState(t, w[1], wp[1]))
    assert abs(fd - exact) < 1e-4 * (1 + abs(exact))


@pytest.mark.parametrize(
    "args",
    [("gaussian", 2), ("laguerre", 2, 0.5), ("laguerre", 3, 2.5), ("jacobi", 2, 1, 0.5), ("jacobi", 3, 0.5, 1)],
    ids=str,
)
def test_omega_init_round_trip(args):
    spec = make_ensemble(*args)
    ps = params_for(spec, 1)
    # at the Gaussian start w ~ e^{-s^2} puts the q'/q denominator inside the absolute
    # guard band, so the map is checked at an interior point there
    st = omega_init(ps, t0=2.5 if spec.kind.value == "gaussian" else None)
    aux = aux_from_omega(ps, st)
    tg = oracle_targets(ps, st.t)
    assert abs(aux.q_log_deriv - tg.ql) < 1e-9 * max(1.0, abs(tg.ql))
    assert abs(aux.sigma - tg.sigma) < 1e-9 * max(abs(tg.sigma), 1e-300)


def test_omega_init_delta_stability():
    spec = make_ensemble("laguerre", 2, 0.5)
    s = [1.0, 2.0]
    a = gap_curve_painleve(spec, s, delta=1e-3)
    b = gap_curve_painleve(spec, s, delta=5e-4)
    assert np.max(np.abs(a.E2 - b.E2)) < 1e-6
    assert np.max(np.abs(a["sigma"] - b["sigma"])) < 1e-6


def test_laguerre_n1_a0_closed_form():
    spec = make_ensemble("laguerre", 1, 0)
    s = np.linspace(1e-3, 3, 25)
    curve = gap_curve_painleve(spec, s, delta=1e-3)
    assert np.max(np.abs(curve.E2 - np.exp(-curve.s))) < 1e-6


def test_gaussian_n1_r_at_one():
    spec = make_ensemble("gaussian", 1)
    curve = gap_curve_painleve(spec, [1.0])
    r = nystrom_solve(spec, anchored_interval(spec, 1.0)).r_diag[0]
    assert abs(curve["R"][0] - r) < 1e-6


def test_gaussian_n2_matches_oracle():
    spec = make_ensemble("gaussian", 2)
    s = np.linspace(0, 2.5, 10)
    curve = gap_curve_painleve(spec, s)
    assert np.max(np.abs(curve.E2 - fredholm_e2(spec, s))) < 1e-6
    # larger excluded interval for smaller s
    assert np.all(np.diff(curve.E2) > 0)


def test_jacobi_sigma_at_half():
    spec = make_ensemble("jacobi", 1, 0, 0)
    curve = gap_curve_painleve(spec, [0.0])
    v = nystrom_solve(spec, (-1, 0.0)).v
    assert abs(curve["sigma"][0] + 2 * v) < 1e-6


def test_jacobi_matches_tw_route():
    spec = make_ensemble("jacobi", 2, 1, 0)
    s = np.linspace(-0.9, 0.5, 15)
    pv = gap_curve_painleve(spec, s)
    tw = gap_curve_tw(spec, s)
    assert np.max(np.abs(pv.E2 - tw.E2)) < 1e-6
    assert np.all(np.diff(pv.E2) < 0)


@pytest.mark.parametrize("sign", [1, -1])
def test_gaussian_rows_agree(sign):
    spec = make_ensemble("gaussian", 2)
    s = np.linspace(0.5, 2, 7)
    r1 = gap_curve_painleve(spec, s, row=1)["R"]
    r2 = gap_curve_painleve(spec, s, row=2, sign=sign)["R"]
    assert np.max(np.abs(r1 - r2)) < 1e-6


def test_jacobi_mapping_derivative():
    spec = make_ensemble("jacobi", 2, 1, 0.5)
    rhs = tw_rhs(spec)
    h = 1e-4
    for s in (-0.6, 0.0, 0.4):
        c = gap_curve_painleve(spec, [s - h, s, s + h], tol=1e-12)
        fd = (c["sigma"][2] - c["sigma"][0]) / (2 * h)
        exact = rhs(s, init_state(spec, s0=s).vector())[6]
        assert abs(fd - exact) < 1e-5 * max(1.0, abs(exact))


@pytest.mark.parametrize(
    "args", [("gaussian", 3), ("laguerre", 2, 0), ("laguerre", 3, 1), ("laguerre", 2, 0.5), ("jacobi", 3, 1, 0.5)], ids=str
)
def test_triple_agreement(args):
    spec = make_ensemble(*args)
    s = default_s_grid(spec, 20)
    pv = gap_curve_painleve(spec, s).E2
    assert np.max(np.abs(pv - fredholm_e2(spec, s))) < 1e-5
    assert np.max(np.abs(pv - gap_curve_tw(spec, s).E2)) < 1e-5


def test_pole_stops_without_vaulting():
    spec = make_ensemble("laguerre", 2, 0)
    s = default_s_grid(spec, 20)
    assert gap_curve_painleve(spec, s).meta["vaults"] > 0
    with pytest.raises(PoleError) as info:
        gap_curve_painleve(spec, s, vault=False)
    err = info.value
    assert err.last_good is not None and err.last_good < s[-1]
    if err.partial is not None:
        assert np.max(np.abs(err.partial.E2 - fredholm_e2(spec, err.partial.s))) < 1e-6


def test_bad_s_values():
    with pytest.raises(ParameterDomainError):
        gap_curve_painleve(make_ensemble("laguerre", 2, 1), [0.0, 1.0])
    with pytest.raises(ParameterDomainError):
        integrate_painleve(params_for(make_ensemble("gaussian", 2), 1), 3.0, 1.0, PainleveState(2.0, 0.1, 0.1))


def test_infinity_branch_laguerre_a1():
    spec = make_ensemble("laguerre", 2, 1)
    ps = params_for(spec, 1)
    assert ps.branch == "infinity"
    st = omega_init(ps)
    assert math.isinf(st.omega) and st.lam is not None
