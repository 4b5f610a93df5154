import math

import numpy as np
import pytest
from scipy import integrate, stats

from gapflow.ensembles import make_ensemble, rho_n
from gapflow.errors import NumericalError, ParameterDomainError
from gapflow.fredholm import fredholm_det, spacing_pdf_resolvent, truncate_interval
from gapflow.montecarlo import (
    CHUNK,
    empirical_density,
    estimate_gap,
    estimate_spacing,
    sample_batch,
    sample_gue,
    worker_count,
)

GUE2 = make_ensemble("gaussian", 2)


@pytest.fixture(scope="module")
def gue2_batch():
    return sample_batch(GUE2, 100_000, seed=42)


def test_gue_n1_second_moment():
    b = sample_batch(make_ensemble("gaussian", 1), 100_000, seed=3)
    x2 = b.eigenvalues[:, 0] ** 2
    se = x2.std(ddof=1) / math.sqrt(x2.size)
    assert abs(x2.mean() - 0.5) < 3 * se


def test_gue_n2_half_line(gue2_batch):
    p, se = estimate_gap(gue2_batch, (0.0, math.inf))
    assert abs(p - fredholm_det(GUE2, truncate_interval(GUE2, 0.0))) < 3 * se


def test_batch_invariants(gue2_batch):
    ev = gue2_batch.eigenvalues
    assert ev.shape == (100_000, 2) and np.all(np.diff(ev, axis=1) >= 0)
    lue = sample_batch(make_ensemble("laguerre", 3, 2), 2000, seed=1).eigenvalues
    assert np.all(lue > 0)
    jue = sample_batch(make_ensemble("jacobi", 3, 1, 2), 2000, seed=1).eigenvalues
    assert np.all((jue > -1) & (jue < 1))
    assert len(sample_batch(GUE2, 5, seed=0).eigenvalue_sets) == 5


def test_seeded_determinism():
    a = sample_batch(GUE2, 3 * CHUNK + 17, seed=11, workers=1).eigenvalues
    b = sample_batch(GUE2, 3 * CHUNK + 17, seed=11, workers=4).eigenvalues
    c = sample_batch(GUE2, 3 * CHUNK + 17, seed=12, workers=1).eigenvalues
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("GAPFLOW_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.setenv("GAPFLOW_THREADS", "many")
    with pytest.raises(ParameterDomainError):
        worker_count()


def test_lue_n1_exponential():
    b = sample_batch(make_ensemble("laguerre", 1, 0), 100_000, seed=5)
    for s in (0.5, 1.0, 2.0):
        p, se = estimate_gap(b, (0.0, s))
        assert abs(p - math.exp(-s)) < 3 * se


def test_jue_n1_uniform_ks():
    # p-values are uniform under the null, so a single seed fails 1% of the time;
    # across 20 seeds at most two rejections at the 1% level are expected
    spec = make_ensemble("jacobi", 1, 0, 0)
    pvals = [
        stats.kstest(sample_batch(spec, 10_000, seed=s).eigenvalues[:, 0], "uniform", args=(-1, 2)).pvalue
        for s in range(20)
    ]
    assert sum(p < 0.01 for p in pvals) <= 2
    assert stats.kstest(pvals, "uniform").pvalue > 0.01


def test_lue_n1_a2_ks():
    spec = make_ensemble("laguerre", 1, 2)
    pvals = [stats.kstest(sample_batch(spec, 10_000, seed=s).eigenvalues[:, 0], "gamma", args=(3,)).pvalue for s in range(20)]
    assert sum(p < 0.01 for p in pvals) <= 2


def test_lue_n3_a2_gap():
    spec = make_ensemble("laguerre", 3, 2)
    b = sample_batch(spec, 100_000, seed=42)
    for s in (0.5, 1.0, 2.0):
        p, se = estimate_gap(b, (0.0, s))
        assert abs(p - fredholm_det(spec, (0.0, s))) < 3 * se


def test_jue_gap():
    spec = make_ensemble("jacobi", 2, 1, 2)
    b = sample_batch(spec, 100_000, seed=42)
    for s in (-0.5, 0.0, 0.5):
        p, se = estimate_gap(b, (-1.0, s))
        assert abs(p - fredholm_det(spec, (-1.0, s))) < 3 * se


def test_estimate_gap_edges(gue2_batch):
    assert estimate_gap(gue2_batch, (0.3, 0.3)) == (1.0, 0.0)
    assert estimate_gap(gue2_batch, (-math.inf, math.inf))[0] == 0.0


def test_non_integer_rejected():
    with pytest.raises(ParameterDomainError):
        sample_batch(make_ensemble("laguerre", 2, 0.5), 10)
    with pytest.raises(ParameterDomainError):
        sample_batch(make_ensemble("jacobi", 2, 1, 1.5), 10)
    with pytest.raises(ParameterDomainError):
        sample_gue(0, np.random.default_rng(0))


def _bin_oracle(spec, a1, edges):
    return np.array(
        [
            integrate.quad(lambda x: spacing_pdf_resolvent(spec, a1, x), lo, hi)[0] / (hi - lo)
            for lo, hi in zip(edges[:-1], edges[1:])
        ]
    )


def test_spacing_matches_oracle(gue2_batch):
    a1 = -0.5
    edges = np.linspace(a1 + 0.05, a1 + 3.05, 31)
    h = estimate_spacing(gue2_batch, a1, edges)
    assert h.mass() <= 1.0
    oracle = _bin_oracle(GUE2, a1, edges)
    # SE under the oracle's bin probability, so empty bins are not compared to zero
    pbin = oracle * h.widths
    se = np.sqrt(pbin * (1 - pbin) / h.samples) / h.widths
    assert np.all(np.abs(h.density - oracle) < 3 * se + 1e-12)


def test_spacing_window_refinement():
    batch = sample_batch(GUE2, 1_000_000, seed=1)
    a1 = -0.5
    edges = np.linspace(a1 + 0.05, a1 + 3.05, 16)
    oracle = _bin_oracle(GUE2, a1, edges)
    dev = []
    for window in (0.4, 0.2, 0.1):
        h = estimate_spacing(batch, a1, edges, window=window)
        dev.append(np.sum(np.abs(h.density - oracle) * h.widths))
    assert dev[0] > dev[1] > dev[2]


def test_spacing_needs_events():
    b = sample_batch(GUE2, 200, seed=0)
    with pytest.raises(NumericalError):
        estimate_spacing(b, 5.0, np.linspace(5.1, 6, 5))
    with pytest.raises(ParameterDomainError):
        estimate_spacing(b, 0.0, [0.5, 0.2])


def test_one_point_density(gue2_batch):
    edges = np.linspace(-3, 3, 25)
    h = empirical_density(gue2_batch, edges)
    assert h.mass() == pytest.approx(2.0, abs=1e-3)
    oracle = np.array(
        [integrate.quad(lambda x: rho_n(GUE2, [x]), lo, hi)[0] / (hi - lo) for lo, hi in zip(edges[:-1], edges[1:])]
    )
    assert np.all(np.abs(h.density - oracle) < 3 * h.std_error + 1e-12)
