"""Exploratory landscape analysis: the 21-feature vector.

Four feature groups are computed on a Latin hypercube design over the fixed
search box [-5, 5]^d:

* meta-model fits (linear / quadratic, with and without interactions),
* convexity probes on random point pairs,
* information content of fitness sequences along a nearest-neighbour tour,
* moments and modality of the objective-value distribution.

Any object with a ``dim`` attribute that maps an ``(n, d)`` array to ``n``
values can be analysed.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from .errors import (
    DegenerateDistributionError,
    DegenerateFitError,
    InvalidDesignError,
    LSREError,
    ParameterError,
)
from .seeding import derive_seed

LOWER, UPPER = -5.0, 5.0

META_FEATURES = [
    "ela_meta.lin_simple.adj_r2",
    "ela_meta.lin_simple.intercept",
    "ela_meta.lin_simple.coef.min",
    "ela_meta.lin_simple.coef.max",
    "ela_meta.lin_simple.coef.max_by_min",
    "ela_meta.lin_w_interact.adj_r2",
    "ela_meta.quad_simple.adj_r2",
    "ela_meta.quad_w_interact.adj_r2",
    "ela_meta.quad_simple.cond",
]
CONV_FEATURES = [
    "ela_conv.conv_prob",
    "ela_conv.lin_prob",
    "ela_conv.lin_dev_orig",
    "ela_conv.lin_dev_abs",
]
IC_FEATURES = ["ic.h_max", "ic.eps_s", "ic.eps_max", "ic.eps_ratio", "ic.m0"]
DISTR_FEATURES = [
    "ela_distr.skewness",
    "ela_distr.kurtosis",
    "ela_distr.number_of_peaks",
]
FEATURE_NAMES = META_FEATURES + CONV_FEATURES + IC_FEATURES + DISTR_FEATURES
N_FEATURES = len(FEATURE_NAMES)

CONV_TOL = 1e-10
IC_EPS_MIN = 1e-8
IC_GRID_SIZE = 200
IC_SETTLING = 0.05
KDE_GRID = 512


@dataclass(frozen=True)
class ELAConfig:
    """Sampling budgets. ``n_samples=None`` means samples_per_dim·d clipped to [min, max]."""

    n_samples: int | None = None
    n_pairs: int = 1000
    seed: int = 0
    max_samples: int = 2500
    samples_per_dim: int = 250
    min_samples: int = 100

    def samples_for(self, d: int) -> int:
        if self.n_samples is not None:
            return self.n_samples
        return max(self.min_samples, min(self.samples_per_dim * d, self.max_samples))


@dataclass(frozen=True)
class SampleDesign:
    points: np.ndarray
    values: np.ndarray
    dim: int
    seed: int


@dataclass(frozen=True, eq=False)
class ELAVector:
    values: np.ndarray
    valid: bool = True
    error: str | None = None

    def __post_init__(self):
        if self.values.shape != (N_FEATURES,):
            raise ParameterError(f"ELA vector must have {N_FEATURES} entries")

    def as_dict(self):
        return dict(zip(FEATURE_NAMES, self.values.tolist()))

    def __getitem__(self, name):
        return self.values[FEATURE_NAMES.index(name)]

    @classmethod
    def invalid(cls, error: str):
        return cls(np.full(N_FEATURES, np.nan), False, error)


def _evaluate(problem, X):
    with np.errstate(all="ignore"):
        y = np.asarray(problem(X), dtype=float).reshape(-1)
    bad = ~np.isfinite(y)
    if bad.any():
        i = int(np.argmax(bad))
        raise InvalidDesignError(f"non-finite objective value {y[i]} at {X[i].tolist()}", X[i])
    return y


def sample_design(problem, n_samples: int, seed: int) -> SampleDesign:
    if n_samples < 50:
        raise ParameterError("n_samples must be >= 50")
    d = problem.dim
    lhs = qmc.LatinHypercube(d=d, seed=np.random.default_rng(seed))
    X = qmc.scale(lhs.random(n_samples), np.full(d, LOWER), np.full(d, UPPER))
    return SampleDesign(X, _evaluate(problem, X), d, seed)


# -- meta-model ---------------------------------------------------------------


def _interactions(X):
    d = X.shape[1]
    pairs = list(itertools.combinations(range(d), 2))
    if not pairs:
        return np.empty((X.shape[0], 0))
    i, j = np.array(pairs).T
    return X[:, i] * X[:, j]


def _fit(A, y):
    n, p = A.shape
    if n <= p:
        raise DegenerateFitError(f"{n} samples cannot fit {p} coefficients")
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < p:
        raise DegenerateFitError("singular design matrix")
    resid = y - A @ coef
    ss_res = resid @ resid
    yc = y - y.mean()
    ss_tot = yc @ yc
    if not ss_tot > 0:
        raise DegenerateFitError("objective values have zero variance")
    r2 = 1.0 - ss_res / ss_tot
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p)
    return coef, adj


def ela_meta(design: SampleDesign) -> np.ndarray:
    X, y = design.points, design.values
    n, d = X.shape
    # fit on a unit-scale copy so huge objective values cannot overflow
    scale = np.max(np.abs(y))
    if not scale > 0:
        raise DegenerateFitError("objective values have zero variance")
    ys = y / scale
    ones = np.ones((n, 1))
    inter = _interactions(X)

    lin, lin_adj = _fit(np.hstack([ones, X]), ys)
    _, lin_i_adj = _fit(np.hstack([ones, X, inter]), ys)
    quad, quad_adj = _fit(np.hstack([ones, X, X * X]), ys)
    _, quad_i_adj = _fit(np.hstack([ones, X, X * X, inter]), ys)

    slopes = np.abs(lin[1:]) * scale
    sq = np.abs(quad[1 + d :])
    with np.errstate(divide="ignore", invalid="ignore"):
        max_by_min = slopes.max() / slopes.min()
        cond = sq.max() / sq.min()
    return np.array(
        [
            lin_adj,
            lin[0] * scale,
            slopes.min(),
            slopes.max(),
            max_by_min,
            lin_i_adj,
            quad_adj,
            quad_i_adj,
            cond,
        ]
    )


# -- convexity ----------------------------------------------------------------


def convexity_deltas(problem, n_pairs: int, seed: int) -> np.ndarray:
    """f(λa + (1-λ)b) - (λf(a) + (1-λ)f(b)) for ``n_pairs`` random pairs."""
    rng = np.random.default_rng(seed)
    d = problem.dim
    a = rng.uniform(LOWER, UPPER, size=(n_pairs, d))
    b = rng.uniform(LOWER, UPPER, size=(n_pairs, d))
    lam = rng.random(n_pairs)
    mid = lam[:, None] * a + (1.0 - lam[:, None]) * b
    y = _evaluate(problem, np.vstack([a, b, mid]))
    fa, fb, fm = y[:n_pairs], y[n_pairs : 2 * n_pairs], y[2 * n_pairs :]
    with np.errstate(over="ignore", invalid="ignore"):
        delta = fm - (lam * fa + (1.0 - lam) * fb)
    if not np.all(np.isfinite(delta)):
        raise InvalidDesignError("convexity probe overflowed")
    return delta


def ela_convexity(problem, n_pairs: int, seed: int) -> np.ndarray:
    if n_pairs < 100:
        raise ParameterError("n_pairs must be >= 100")
    delta = convexity_deltas(problem, n_pairs, seed)
    return np.array(
        [
            np.mean(delta < -CONV_TOL),
            np.mean(np.abs(delta) <= CONV_TOL),
            np.mean(-delta),
            np.mean(np.abs(delta)),
        ]
    )


# -- information content ------------------------------------------------------


def nearest_neighbour_tour(X: np.ndarray, start: int) -> np.ndarray:
    """Greedy tour: repeatedly step to the closest unvisited point."""
    n = X.shape[0]
    dist = cdist(X, X, "sqeuclidean")
    dist[np.arange(n), np.arange(n)] = np.inf
    order = np.empty(n, dtype=int)
    visited = np.zeros(n, dtype=bool)
    cur = start
    for k in range(n):
        order[k] = cur
        visited[cur] = True
        if k == n - 1:
            break
        row = np.where(visited, np.inf, dist[cur])
        cur = int(np.argmin(row))
    return order


def _symbols(diffs, eps):
    """Rows of -1/0/1 symbols, one row per epsilon."""
    eps = np.asarray(eps)[:, None]
    return np.where(diffs[None, :] > eps, 1, np.where(diffs[None, :] < -eps, -1, 0))


def _entropy(sym):
    """Entropy (base 6) over the six unequal two-symbol blocks, per row."""
    rows, m = sym.shape[0], sym.shape[1] - 1
    code = (sym[:, :-1] + 1) * 3 + (sym[:, 1:] + 1)
    counts = np.bincount((code + 9 * np.arange(rows)[:, None]).ravel(), minlength=9 * rows)
    p = counts.reshape(rows, 9)[:, [1, 2, 3, 5, 6, 7]] / m
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p) / np.log(6.0), 0.0)
    return terms.sum(axis=1)


def _partial_information(sym):
    """Share of sign alternations in the non-zero symbol sequence, per row."""
    rows, m = sym.shape
    idx = np.where(sym != 0, np.arange(m)[None, :], -1)
    last = np.maximum.accumulate(idx, axis=1)
    prev = np.hstack([np.full((rows, 1), -1), last[:, :-1]])
    prev_val = np.take_along_axis(sym, np.maximum(prev, 0), axis=1)
    alternations = np.sum((sym != 0) & (prev >= 0) & (sym != prev_val), axis=1)
    return alternations / (m - 1)


def information_content_curve(design: SampleDesign, seed: int):
    """Return ``(eps_grid, H, M, m0)`` for the tour through ``design``."""
    n = design.points.shape[0]
    start = int(np.random.default_rng(seed).integers(n))
    order = nearest_neighbour_tour(design.points, start)
    diffs = np.diff(design.values[order])
    top = np.max(np.abs(diffs))
    if not top > IC_EPS_MIN:
        return None
    grid = np.logspace(np.log10(IC_EPS_MIN), np.log10(top), IC_GRID_SIZE)
    sym = _symbols(diffs, grid)
    m0 = _partial_information(_symbols(diffs, [0.0]))[0]
    return grid, _entropy(sym), _partial_information(sym), m0


def ela_information_content(design: SampleDesign, seed: int) -> np.ndarray:
    """h_max, eps_s, eps_max, eps_ratio, m0; sensitivities are log10(eps)."""
    if design.points.shape[0] < 100:
        raise ParameterError("information content needs n >= 100")
    lo = np.log10(IC_EPS_MIN)
    curve = information_content_curve(design, seed)
    if curve is None:
        return np.array([0.0, lo, lo, lo, 0.0])
    grid, H, M, m0 = curve
    log_grid = np.log10(grid)
    above = np.nonzero(H > IC_SETTLING)[0]
    eps_s = log_grid[above[-1]] if above.size else lo
    eps_max = log_grid[int(np.argmax(H))]
    half = np.nonzero(M > 0.5 * m0)[0] if m0 > 0 else np.array([], dtype=int)
    eps_ratio = log_grid[half[-1]] if half.size else lo
    return np.array([H.max(), eps_s, eps_max, eps_ratio, m0])


# -- y-distribution -----------------------------------------------------------


def count_kde_peaks(y: np.ndarray) -> int:
    n = y.size
    sd = np.std(y, ddof=1)
    bw = sd * (4.0 / (3.0 * n)) ** 0.2
    grid = np.linspace(y.min() - 3 * bw, y.max() + 3 * bw, KDE_GRID)
    # standardise so the kernel sum is scale-free
    u = (grid[:, None] - y[None, :]) / bw
    dens = np.exp(-0.5 * u * u).sum(axis=1)
    inner = dens[1:-1]
    peaks = (inner > dens[:-2]) & (inner > dens[2:])
    return max(int(np.count_nonzero(peaks)), 1)


def ela_distribution(design: SampleDesign) -> np.ndarray:
    y = design.values
    n = y.size
    if n < 4:
        raise ParameterError("distribution features need n >= 4")
    # work on a unit-scale copy: moments of huge values overflow otherwise
    scale = np.max(np.abs(y))
    ys = y / scale if scale > 0 else y
    c = ys - ys.mean()
    m2 = np.mean(c**2)
    if not m2 > 0 or np.ptp(y) == 0:
        raise DegenerateDistributionError("objective values have zero variance")
    m3 = np.mean(c**3)
    m4 = np.mean(c**4)
    g1 = m3 / m2**1.5
    skew = g1 * np.sqrt(n * (n - 1)) / (n - 2)
    kurt = m4 / m2**2
    return np.array([skew, kurt, float(count_kde_peaks(ys))])


# -- composition --------------------------------------------------------------


def compute_ela(problem, config: ELAConfig = ELAConfig()) -> ELAVector:
    """Full 21-feature vector; any group failure yields an invalid vector."""
    try:
        n = config.samples_for(problem.dim)
        design = sample_design(problem, n, derive_seed(config.seed, "design"))
        with np.errstate(all="ignore"):
            values = np.concatenate(
                [
                    ela_meta(design),
                    ela_convexity(problem, config.n_pairs, derive_seed(config.seed, "conv")),
                    ela_information_content(design, derive_seed(config.seed, "ic")),
                    ela_distribution(design),
                ]
            )
    except (LSREError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return ELAVector.invalid(f"{type(exc).__name__}: {exc}")
    if not np.all(np.isfinite(values)):
        bad = [FEATURE_NAMES[i] for i in np.nonzero(~np.isfinite(values))[0]]
        return ELAVector(values, False, f"non-finite features: {', '.join(bad)}")
    return ELAVector(values)


def write_csv(path, rows):
    """Write ``(instance_id, ELAVector)`` pairs; invalid vectors are skipped."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_id"] + FEATURE_NAMES)
        for iid, vec in rows:
            if vec.valid:
                w.writerow([iid] + [repr(float(v)) for v in vec.values])


def read_csv(path):
    """Return ``(ids, matrix, bad_rows)``; bad rows are 1-based data row numbers."""
    ids, rows, bad = [], [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or header[1:] != FEATURE_NAMES:
            raise ParameterError(f"{path}: unexpected ELA CSV header")
        for k, row in enumerate(r, start=1):
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError:
                vals = []
            if len(vals) != N_FEATURES or not np.all(np.isfinite(vals)):
                bad.append(k)
                continue
            ids.append(row[0])
            rows.append(vals)
    return ids, np.array(rows, dtype=float).reshape(-1, N_FEATURES), bad
