"""The 24 noiseless BBOB base functions and the rotate/shift instance transform.

Base functions are written in their raw mathematical form: the oscillation
and asymmetry transformations and the suite's internal rotations are left
out, because every instance receives its own random rotation and shift
from the outside::

    f'(x) = f(R^T (x - s))

Functions that need fixed random structure (sign patterns, Gallagher peak
positions and conditionings) draw it from a stream keyed by the function id
and the dimension, so a base function is the same object in every run.

All evaluators take a 2-D array ``(n, d)`` and return ``n`` values.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError
from .seeding import derive_seed, make_rng

LOWER, UPPER = -5.0, 5.0
SHIFT_BOUND = 4.0
N_FUNCTIONS = 24
FULL_DIMS = (2, 5, 10, 30, 50)

FUNCTION_NAMES = {
    1: "sphere",
    2: "ellipsoidal",
    3: "rastrigin",
    4: "bueche_rastrigin",
    5: "linear_slope",
    6: "attractive_sector",
    7: "step_ellipsoidal",
    8: "rosenbrock",
    9: "rosenbrock_offset",
    10: "ellipsoidal_high_cond",
    11: "discus",
    12: "bent_cigar",
    13: "sharp_ridge",
    14: "different_powers",
    15: "rastrigin_conditioned",
    16: "weierstrass",
    17: "schaffers_f7",
    18: "schaffers_f7_ill_cond",
    19: "griewank_rosenbrock",
    20: "schwefel",
    21: "gallagher_101",
    22: "gallagher_21",
    23: "katsuura",
    24: "lunacek",
}


def _ramp(d):
    """i / (d - 1) for i = 0..d-1."""
    return np.arange(d) / (d - 1)


def _lam(alpha, d):
    return alpha ** (0.5 * _ramp(d))


def _pen(z):
    return np.sum(np.maximum(0.0, np.abs(z) - 5.0) ** 2, axis=1)


@dataclass(frozen=True)
class _Structure:
    signs: np.ndarray
    peaks: np.ndarray | None = None
    peak_weights: np.ndarray | None = None
    peak_conds: np.ndarray | None = None


def _gallagher_structure(rng, d, n_peaks, alpha_top, y_bound, y1_bound):
    w = np.empty(n_peaks)
    w[0] = 10.0
    w[1:] = 1.1 + 8.0 * np.arange(n_peaks - 1) / (n_peaks - 2)
    alphas = np.empty(n_peaks)
    alphas[0] = alpha_top
    alphas[1:] = rng.permutation(1000.0 ** (2.0 * np.arange(n_peaks - 1) / (n_peaks - 2)))
    conds = np.empty((n_peaks, d))
    for i, a in enumerate(alphas):
        conds[i] = rng.permutation(_lam(a, d)) / a**0.25
    y = rng.uniform(-y_bound, y_bound, size=(n_peaks, d))
    y[0] = rng.uniform(-y1_bound, y1_bound, size=d)
    return y, w, conds


@functools.lru_cache(maxsize=None)
def base_structure(fid: int, d: int) -> _Structure:
    rng = make_rng("base-structure", fid, d)
    signs = np.where(rng.random(d) < 0.5, -1.0, 1.0)
    if fid == 21:
        y, w, c = _gallagher_structure(rng, d, 101, 1000.0, 5.0, 4.0)
        return _Structure(signs, y, w, c)
    if fid == 22:
        y, w, c = _gallagher_structure(rng, d, 21, 1000.0**2, 4.9, 3.92)
        return _Structure(signs, y, w, c)
    return _Structure(signs)


def _rastrigin(z):
    d = z.shape[1]
    return 10.0 * (d - np.sum(np.cos(2 * np.pi * z), axis=1)) + np.sum(z * z, axis=1)


def _rosen(z):
    a, b = z[:, :-1], z[:, 1:]
    return np.sum(100.0 * (a * a - b) ** 2 + (a - 1.0) ** 2, axis=1)


def _ellipsoid(z):
    return np.sum(10.0 ** (6.0 * _ramp(z.shape[1])) * z * z, axis=1)


def f1(z, st):
    return np.sum(z * z, axis=1)


def f2(z, st):
    return _ellipsoid(z)


def f3(z, st):
    return _rastrigin(z)


def f4(z, st):
    d = z.shape[1]
    s = 10.0 ** (0.5 * _ramp(d))
    boost = (z > 0) & (np.arange(d) % 2 == 0)
    u = np.where(boost, 10.0 * s, s) * z
    return _rastrigin(u) + 100.0 * _pen(z)


def f5(z, st):
    d = z.shape[1]
    xopt = 5.0 * st.signs
    zz = np.where(z * xopt < 25.0, z, xopt)
    s = st.signs * 10.0 ** _ramp(d)
    return np.sum(5.0 * np.abs(s) - s * zz, axis=1)


def f6(z, st):
    u = _lam(10.0, z.shape[1]) * z
    s = np.where(u * st.signs > 0, 100.0, 1.0)
    return np.sum((s * u) ** 2, axis=1) ** 0.9


def f7(z, st):
    d = z.shape[1]
    zh = _lam(10.0, d) * z
    zt = np.where(np.abs(zh) > 0.5, np.floor(0.5 + zh), np.floor(0.5 + 10.0 * zh) / 10.0)
    core = np.sum(10.0 ** (2.0 * _ramp(d)) * zt * zt, axis=1)
    return 0.1 * np.maximum(np.abs(zh[:, 0]) / 1e4, core) + _pen(z)


def f8(z, st):
    return _rosen(z)


def _rosen_scale(d):
    return max(1.0, np.sqrt(d) / 8.0)


def f9(z, st):
    return _rosen(_rosen_scale(z.shape[1]) * z + 0.5)


def f10(z, st):
    return _ellipsoid(z)


def f11(z, st):
    return 1e6 * z[:, 0] ** 2 + np.sum(z[:, 1:] ** 2, axis=1)


def f12(z, st):
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=1)


def f13(z, st):
    u = _lam(10.0, z.shape[1]) * z
    return u[:, 0] ** 2 + 100.0 * np.sqrt(np.sum(u[:, 1:] ** 2, axis=1))


def f14(z, st):
    p = 2.0 + 4.0 * _ramp(z.shape[1])
    return np.sqrt(np.sum(np.abs(z) ** p, axis=1))


def f15(z, st):
    return _rastrigin(_lam(10.0, z.shape[1]) * z)


_K = np.arange(12)
_W_F0 = np.sum(0.5**_K * np.cos(np.pi * 3.0**_K))


def f16(z, st):
    d = z.shape[1]
    u = _lam(0.01, d) * z
    terms = 0.5**_K * np.cos(2 * np.pi * 3.0**_K * (u[..., None] + 0.5))
    inner = np.sum(terms, axis=(1, 2)) / d - _W_F0
    return 10.0 * inner**3 + 10.0 / d * _pen(z)


def _schaffer(z, alpha):
    u = _lam(alpha, z.shape[1]) * z
    s = np.sqrt(u[:, :-1] ** 2 + u[:, 1:] ** 2)
    rs = np.sqrt(s)
    inner = np.mean(rs + rs * np.sin(50.0 * s**0.2) ** 2, axis=1)
    return inner**2 + 10.0 * _pen(z)


def f17(z, st):
    return _schaffer(z, 10.0)


def f18(z, st):
    return _schaffer(z, 1000.0)


def f19(z, st):
    u = _rosen_scale(z.shape[1]) * z + 0.5
    a, b = u[:, :-1], u[:, 1:]
    s = 100.0 * (a * a - b) ** 2 + (a - 1.0) ** 2
    return 10.0 * np.mean(s / 4000.0 - np.cos(s), axis=1) + 10.0


_SCHWEFEL_OPT = 4.2096874633 / 2.0


def f20(z, st):
    d = z.shape[1]
    xopt_abs = 2.0 * _SCHWEFEL_OPT
    xh = 2.0 * st.signs * z
    zh = xh.copy()
    zh[:, 1:] += 0.25 * (xh[:, :-1] - xopt_abs)
    w = 100.0 * (_lam(10.0, d) * (zh - xopt_abs) + xopt_abs)
    core = -np.sum(w * np.sin(np.sqrt(np.abs(w))), axis=1) / (100.0 * d)
    return core + 4.189828872724339 + 100.0 * _pen(w / 100.0)


def _gallagher(z, st):
    d = z.shape[1]
    g = np.empty(z.shape[0])
    # chunked: the (rows, peaks, d) block gets large for d = 50
    for lo in range(0, z.shape[0], 256):
        diff = z[lo : lo + 256, None, :] - st.peaks[None, :, :]
        q = np.sum(st.peak_conds[None] * diff * diff, axis=2)
        g[lo : lo + 256] = np.max(st.peak_weights[None] * np.exp(-q / (2.0 * d)), axis=1)
    return (10.0 - g) ** 2 + _pen(z)


f21 = _gallagher
f22 = _gallagher


def f23(z, st):
    d = z.shape[1]
    u = _lam(100.0, d) * z
    two = 2.0 ** np.arange(1, 33)
    t = two * u[..., None]
    inner = np.sum(np.abs(t - np.round(t)) / two, axis=2)
    prod = np.prod((1.0 + np.arange(1, d + 1) * inner) ** (10.0 / d**1.2), axis=1)
    return 10.0 / d**2 * prod - 10.0 / d**2 + _pen(z)


_LUN_MU0 = 2.5


def f24(z, st):
    d = z.shape[1]
    s = 1.0 - 1.0 / (2.0 * np.sqrt(d + 20.0) - 8.2)
    mu1 = -np.sqrt((_LUN_MU0**2 - 1.0) / s)
    xh = 2.0 * st.signs * z
    u = _lam(100.0, d) * (xh - _LUN_MU0)
    a = np.sum((xh - _LUN_MU0) ** 2, axis=1)
    b = d + s * np.sum((xh - mu1) ** 2, axis=1)
    return np.minimum(a, b) + 10.0 * (d - np.sum(np.cos(2 * np.pi * u), axis=1)) + 1e4 * _pen(z)


_FUNCS = {i: globals()[f"f{i}"] for i in range(1, N_FUNCTIONS + 1)}


def _check_id(fid):
    if not (isinstance(fid, (int, np.integer)) and 1 <= fid <= N_FUNCTIONS):
        raise ParameterError(f"function id must be in 1..24, got {fid!r}")
    return int(fid)


def evaluate_base_batch(fid: int, z) -> np.ndarray:
    fid = _check_id(fid)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] < 2:
        raise ParameterError("base functions need d >= 2")
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite input")
    return _FUNCS[fid](z, base_structure(fid, z.shape[1]))


def evaluate_base(fid: int, x) -> float:
    """Value of base function ``fid`` at a single point ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ParameterError("x must be a vector")
    return float(evaluate_base_batch(fid, x[None, :])[0])


def base_optimum(fid: int, d: int) -> np.ndarray:
    """Location of the global optimum of the raw base function."""
    fid = _check_id(fid)
    st = base_structure(fid, d)
    if fid == 5:
        return 5.0 * st.signs
    if fid == 8:
        return np.ones(d)
    if fid in (9, 19):
        return np.full(d, 0.5 / _rosen_scale(d))
    if fid == 20:
        return _SCHWEFEL_OPT * st.signs
    if fid in (21, 22):
        return st.peaks[0].copy()
    if fid == 24:
        return 0.5 * _LUN_MU0 * st.signs
    return np.zeros(d)


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class TransformedInstance:
    """A base function composed with a rotation and a shift.

    ``seed=None`` marks the identity instance (R = I, s = 0).
    """

    base: int
    dim: int
    seed: int | None
    rotation: np.ndarray = field(repr=False)
    shift: np.ndarray = field(repr=False)

    lower = LOWER
    upper = UPPER

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ParameterError(f"expected {self.dim}-D points, got {x.shape[1]}-D")
        # row-wise R^T (x - s)
        return evaluate_base_batch(self.base, (x - self.shift) @ self.rotation)

    @property
    def name(self):
        return f"f{self.base}_d{self.dim}_{'id' if self.seed is None else self.seed}"

    def optimum(self):
        """``(x*, f*)`` if the optimum lies inside the search box, else None."""
        xb = base_optimum(self.base, self.dim)
        x = self.rotation @ xb + self.shift
        if np.any(x < LOWER) or np.any(x > UPPER):
            return None
        return x, evaluate_base(self.base, xb)

    def to_json(self):
        return {"base_id": self.base, "dim": self.dim, "seed": self.seed}

    @classmethod
    def from_json(cls, record):
        if record.get("seed") is None:
            return identity_instance(record["base_id"], record["dim"])
        return make_instance(record["base_id"], record["dim"], record["seed"])


def make_instance(base: int, dim: int, seed: int) -> TransformedInstance:
    base = _check_id(base)
    if dim < 2:
        raise ParameterError(f"dim must be >= 2, got {dim}")
    rng = np.random.default_rng(seed)
    rot = random_rotation(rng, dim)
    shift = rng.uniform(-SHIFT_BOUND, SHIFT_BOUND, size=dim)
    return TransformedInstance(base, int(dim), int(seed), rot, shift)


def identity_instance(base: int, dim: int) -> TransformedInstance:
    base = _check_id(base)
    if dim < 2:
        raise ParameterError(f"dim must be >= 2, got {dim}")
    return TransformedInstance(base, int(dim), None, np.eye(dim), np.zeros(dim))


def evaluate(instance: TransformedInstance, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != instance.dim:
        raise ParameterError(f"expected a {instance.dim}-vector, got shape {x.shape}")
    return float(instance(x[None, :])[0])


@dataclass(frozen=True)
class DistributionSpec:
    dims: tuple = FULL_DIMS
    instances_per_function: int = 270
    master_seed: int = 0

    def __post_init__(self):
        if self.instances_per_function < 1:
            raise ParameterError("instances_per_function must be >= 1")
        if not self.dims or any(d < 2 for d in self.dims):
            raise ParameterError("dims must be a non-empty list of integers >= 2")

    @property
    def size(self):
        return N_FUNCTIONS * len(self.dims) * self.instances_per_function


def instance_seeds(spec: DistributionSpec):
    """Yield ``(base, dim, seed)`` in manifest order."""
    for fid in range(1, N_FUNCTIONS + 1):
        for d in spec.dims:
            for idx in range(spec.instances_per_function):
                yield fid, int(d), derive_seed(spec.master_seed, fid, d, idx)


def build_distribution(spec: DistributionSpec) -> list[TransformedInstance]:
    return [make_instance(f, d, s) for f, d, s in instance_seeds(spec)]
