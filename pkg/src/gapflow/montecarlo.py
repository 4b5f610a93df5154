"""Direct eigenvalue sampling of GUE, LUE and JUE at beta = 2.

* GUE: Hermitian H with diagonal N(0, 1/2) and off-diagonal entries whose
  real and imaginary parts are N(0, 1/4), so the density is exp(-tr H^2).
* LUE: complex Wishart G G^H with G of shape N x (N + a); weight x^a e^-x.
* JUE: MANOVA pair A = G1 G1^H (N x (N + b)), B = G2 G2^H (N x (N + a));
  eigenvalues y of (A + B)^-1 A have weight y^b (1 - y)^a on (0, 1) and are
  mapped to x = 2y - 1, giving (1 - x)^a (1 + x)^b.

Batches are cut into fixed chunks of ``CHUNK`` matrices.  Chunk k draws from
``default_rng(SeedSequence(seed).spawn(nchunks)[k])``, so a batch depends
only on (spec, count, seed) and not on how many threads produced it.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ensembles import EnsembleSpec, Kind
from .errors import NumericalError, ParameterDomainError

CHUNK = 4096
DEFAULT_WINDOW = 0.05
MIN_CONDITIONED = 100


def worker_count(requested: int | None = None) -> int:
    """Threads to use: ``requested``, else $GAPFLOW_THREADS, else the CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("GAPFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterDomainError(f"GAPFLOW_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _complex_gauss(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    sd = math.sqrt(var / 2)
    return rng.normal(0.0, sd, shape) + 1j * rng.normal(0.0, sd, shape)


def _integer_param(x, name: str) -> int:
    if x < 0 or float(x) != int(x):
        raise ParameterDomainError(f"matrix sampling needs a non-negative integer {name}, got {x}")
    return int(x)


def sample_gue(n: int, rng: np.random.Generator, count: int = 1) -> np.ndarray:
    """Sorted eigenvalues, shape (count, n)."""
    if n < 1:
        raise ParameterDomainError("n must be >= 1")
    z = _complex_gauss(rng, (count, n, n), 0.5)
    h = np.triu(z, 1)
    h = h + np.conj(np.swapaxes(h, -1, -2))
    idx = np.arange(n)
    h[:, idx, idx] = rng.normal(0.0, math.sqrt(0.5), (count, n))
    return np.linalg.eigvalsh(h)


def sample_lue(n: int, a: int, rng: np.random.Generator, count: int = 1) -> np.ndarray:
    if n < 1:
        raise ParameterDomainError("n must be >= 1")
    a = _integer_param(a, "a")
    g = _complex_gauss(rng, (count, n, n + a), 1.0)
    w = g @ np.conj(np.swapaxes(g, -1, -2))
    return np.clip(np.linalg.eigvalsh(w), np.finfo(float).tiny, None)


def sample_jue(n: int, a: int, b: int, rng: np.random.Generator, count: int = 1) -> np.ndarray:
    if n < 1:
        raise ParameterDomainError("n must be >= 1")
    a = _integer_param(a, "a")
    b = _integer_param(b, "b")
    g1 = _complex_gauss(rng, (count, n, n + b), 1.0)
    g2 = _complex_gauss(rng, (count, n, n + a), 1.0)
    wa = g1 @ np.conj(np.swapaxes(g1, -1, -2))
    wb = g2 @ np.conj(np.swapaxes(g2, -1, -2))
    # eigenvalues of L^-1 A L^-H with A + B = L L^H
    chol = np.linalg.cholesky(wa + wb)
    y = np.linalg.solve(chol, wa)
    m = np.linalg.solve(chol, np.conj(np.swapaxes(y, -1, -2)))
    m = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
    lam = np.clip(np.linalg.eigvalsh(m), 0.0, 1.0)
    x = 2 * lam - 1
    edge = np.nextafter(1.0, 0.0)
    return np.clip(x, -edge, edge)


def _draw(spec: EnsembleSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    if spec.kind is Kind.GAUSSIAN:
        return sample_gue(spec.n, rng, count)
    if spec.kind is Kind.LAGUERRE:
        return sample_lue(spec.n, spec.a, rng, count)
    return sample_jue(spec.n, spec.a, spec.b, rng, count)


@dataclass
class SampleBatch:
    spec: EnsembleSpec
    count: int
    eigenvalues: np.ndarray  # (count, n), rows sorted ascending
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def eigenvalue_sets(self) -> list[np.ndarray]:
        return list(self.eigenvalues)


def sample_batch(spec: EnsembleSpec, count: int, seed: int = 42, workers: int | None = None) -> SampleBatch:
    if count < 1:
        raise ParameterDomainError("count must be >= 1")
    if spec.kind is Kind.LAGUERRE:
        _integer_param(spec.a, "a")
    elif spec.kind is Kind.JACOBI:
        _integer_param(spec.a, "a")
        _integer_param(spec.b, "b")
    nchunks = -(-count // CHUNK)
    children = np.random.SeedSequence(seed).spawn(nchunks)
    sizes = [min(CHUNK, count - k * CHUNK) for k in range(nchunks)]

    def job(k):
        return _draw(spec, np.random.default_rng(children[k]), sizes[k])

    nw = min(worker_count(workers), nchunks)
    if nw > 1:
        with ThreadPoolExecutor(nw) as pool:
            parts = list(pool.map(job, range(nchunks)))
    else:
        parts = [job(k) for k in range(nchunks)]
    eig = np.concatenate(parts, axis=0)
    return SampleBatch(spec, count, eig, seed, meta={"chunk": CHUNK, "workers": nw})


def estimate_gap(batch: SampleBatch, interval) -> tuple[float, float]:
    """Fraction of samples with no eigenvalue in the open interval, and its binomial SE."""
    if batch.count < 1:
        raise ParameterDomainError("empty batch")
    lo, hi = interval
    if not hi > lo:
        return 1.0, 0.0
    ev = batch.eigenvalues
    empty = ~np.any((ev > lo) & (ev < hi), axis=1)
    p = float(np.mean(empty))
    return p, math.sqrt(p * (1 - p) / batch.count)


@dataclass
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    std_error: np.ndarray
    samples: int
    meta: dict = field(default_factory=dict)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def mass(self) -> float:
        return float(np.sum(self.density * self.widths))


def estimate_spacing(
    batch: SampleBatch,
    a1: float,
    bins,
    window: float = DEFAULT_WINDOW,
    min_conditioned: int = MIN_CONDITIONED,
) -> Histogram:
    """Density in a2 of the nearest eigenvalue to the right of one at a1.

    Every eigenvalue within ``window`` of ``a1`` is a conditioning event and
    its right neighbour is recorded at ``a1 + (neighbour - eigenvalue)``, so
    the offset inside the window shifts the gap rather than blurring it.
    Events without a right neighbour count towards the normalisation only,
    which keeps the total mass at most 1.
    """
    if window <= 0:
        raise ParameterDomainError("window must be positive")
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ParameterDomainError("bins must be increasing edges")
    ev = batch.eigenvalues
    near = np.abs(ev - a1) < window
    n_events = int(near.sum())
    if n_events < min_conditioned:
        raise NumericalError(
            f"only {n_events} eigenvalues within {window} of a1 = {a1}; need {min_conditioned}"
        )
    has_right = near[:, :-1]
    gaps = (ev[:, 1:] - ev[:, :-1])[has_right]
    counts, _ = np.histogram(a1 + gaps, edges)
    widths = np.diff(edges)
    frac = counts / n_events
    se = np.sqrt(frac * (1 - frac) / n_events) / widths
    return Histogram(edges, frac / widths, se, n_events, meta={"a1": a1, "window": window})


def empirical_density(batch: SampleBatch, bins) -> Histogram:
    """Histogram estimate of the one-point density (integrates to N over the support)."""
    edges = np.asarray(bins, dtype=float)
    ev = batch.eigenvalues
    k = np.digitize(ev, edges) - 1
    inside = (k >= 0) & (k < edges.size - 1)
    nb = edges.size - 1
    per_sample = np.zeros((batch.count, nb))
    rows = np.broadcast_to(np.arange(batch.count)[:, None], ev.shape)
    np.add.at(per_sample, (rows[inside], k[inside]), 1.0)
    widths = np.diff(edges)
    mean = per_sample.mean(axis=0)
    se = per_sample.std(axis=0, ddof=1) / math.sqrt(batch.count) if batch.count > 1 else np.zeros(nb)
    return Histogram(edges, mean / widths, se / widths, batch.count)
