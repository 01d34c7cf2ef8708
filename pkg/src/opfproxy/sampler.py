"""Hit-and-run sampling of load vectors from the scaled-nominal load box."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .seeding import RNG_ALGORITHM, make_rng

__all__ = [
    "DegenerateChordError",
    "Polytope",
    "SamplerConfig",
    "box_polytope",
    "chord_bounds",
    "hit_and_run",
]

ALPHA_MIN = 0.2
ALPHA_MAX = 2.0
_MIN_CHORD = 1e-12


class DegenerateChordError(ArithmeticError):
    """The chord through the current point has (numerically) zero length."""


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    burn_in: int = 1000
    thinning: int = 5
    alpha_min: float = ALPHA_MIN
    alpha_max: float = ALPHA_MAX

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not (0 <= self.alpha_min < self.alpha_max):
            raise ValueError(f"need 0 <= alpha_min < alpha_max, got {self.alpha_min}, {self.alpha_max}")

    def to_dict(self) -> dict:
        return {**asdict(self), "rng": RNG_ALGORITHM}


@dataclass(frozen=True)
class Polytope:
    """``{l : A l <= b}`` over the ``free`` coordinates of an ``n_b`` load vector.

    Coordinates outside ``free`` are pinned to zero. ``interior`` is a strictly
    interior starting point in the reduced space.
    """

    A: np.ndarray
    b: np.ndarray
    free: np.ndarray
    n_b: int
    interior: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.free)

    def contains(self, reduced_point, tol: float = 1e-12) -> bool:
        return bool(np.all(self.A @ np.asarray(reduced_point, dtype=float) <= self.b + tol))

    def embed(self, reduced_points: np.ndarray) -> np.ndarray:
        """Map reduced points (k, dim) to full load vectors (k, n_b)."""
        reduced_points = np.atleast_2d(reduced_points)
        full = np.zeros((reduced_points.shape[0], self.n_b))
        full[:, self.free] = reduced_points
        return full


def box_polytope(nominal, alpha_min: float = ALPHA_MIN, alpha_max: float = ALPHA_MAX) -> Polytope:
    """Box ``alpha_min * L_i <= l_i <= alpha_max * L_i`` over buses with ``L_i > 0``."""
    nominal = np.asarray(nominal, dtype=float)
    if np.any(nominal < 0) or not np.all(np.isfinite(nominal)):
        raise ValueError("nominal loads must be finite and >= 0")
    if not (0 <= alpha_min < alpha_max):
        raise ValueError(f"empty interior: need 0 <= alpha_min < alpha_max, got {alpha_min}, {alpha_max}")
    free = np.flatnonzero(nominal > 0)
    if len(free) == 0:
        raise ValueError("nominal load vector is all zero; nothing to sample")
    d = len(free)
    lo = alpha_min * nominal[free]
    hi = alpha_max * nominal[free]
    if np.any(hi - lo < _MIN_CHORD):
        k = int(np.argmax(hi - lo < _MIN_CHORD))
        raise ValueError(f"bus index {int(free[k])}: box width {hi[k] - lo[k]:.3g} too small to sample")
    A = np.vstack([np.eye(d), -np.eye(d)])
    b = np.concatenate([hi, -lo])
    return Polytope(A=A, b=b, free=free, n_b=len(nominal), interior=0.5 * (lo + hi))


def chord_bounds(poly: Polytope, point, direction) -> tuple[float, float]:
    """Largest ``[t_lo, t_hi]`` with ``point + t * direction`` inside ``poly``."""
    point = np.asarray(point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    slack = poly.b - poly.A @ point
    rate = poly.A @ direction
    with np.errstate(divide="ignore"):
        ratio = slack / rate
    t_hi = ratio[rate > 0].min(initial=np.inf)
    t_lo = ratio[rate < 0].max(initial=-np.inf)
    if not (np.isfinite(t_lo) and np.isfinite(t_hi)):
        raise ValueError("polytope is unbounded along the sampled direction")
    if t_hi - t_lo < _MIN_CHORD:
        raise DegenerateChordError(f"chord width {t_hi - t_lo:.3g} below {_MIN_CHORD}")
    return float(t_lo), float(t_hi)


def hit_and_run(poly: Polytope, config: SamplerConfig, n: int, start=None) -> np.ndarray:
    """Draw ``n`` full-length load vectors, shape ``(n, n_b)``.

    Each step picks a direction uniformly on the unit sphere, intersects the
    line with the polytope and moves to a uniform point on that chord. The
    first ``burn_in`` states are discarded and every ``thinning``-th state
    after that is kept.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.zeros((0, poly.n_b))
    rng = make_rng(config.seed)
    x = np.array(poly.interior if start is None else start, dtype=float)
    if not np.all(poly.A @ x < poly.b):
        raise ValueError("start point is not strictly interior")

    A, b = poly.A, poly.b
    dim = poly.dim
    total = config.burn_in + n * config.thinning
    # Pre-draw all randomness in fixed blocks so the stream layout is explicit.
    directions = rng.standard_normal((total, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    uniforms = rng.random(total)
    rates = directions @ A.T

    kept = np.empty((n, dim))
    k = 0
    for step in range(total):
        rate = rates[step]
        slack = b - A @ x
        pos = rate > 0
        neg = rate < 0
        t_hi = np.min(slack[pos] / rate[pos])
        t_lo = np.max(slack[neg] / rate[neg])
        if t_hi - t_lo < _MIN_CHORD:
            raise DegenerateChordError(f"step {step}: chord width {t_hi - t_lo:.3g}")
        x = x + (t_lo + uniforms[step] * (t_hi - t_lo)) * directions[step]
        if step >= config.burn_in and (step - config.burn_in + 1) % config.thinning == 0:
            kept[k] = x
            k += 1
    return poly.embed(kept)
