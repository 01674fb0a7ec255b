"""Vector arithmetic on R^n, unit-ball membership and uniform samplers.

Points are plain 1-D float64 numpy arrays.  Samplers take an explicit
``numpy.random.Generator``; use :func:`substream` to derive independent,
reproducible streams from a master seed and a tuple of integer keys.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

TOL_BALL = 1e-12


class _ClampCounter:
    """Thread-safe count of inputs renormalised back onto the unit ball."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def bump(self, k: int = 1) -> None:
        with self._lock:
            self._count += k

    @property
    def count(self) -> int:
        return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


clamp_counter = _ClampCounter()


def as_point(x) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array of dimension >= 1."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 1:
        raise ValueError(f"a point must be a non-empty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite coordinates")
    return p


def inner(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def norm(a) -> float:
    return float(np.sqrt(inner(a, a)))


def in_unit_ball(x, tol: float = TOL_BALL) -> bool:
    return norm(x) <= 1.0 + tol


def clamp_to_unit_ball(x, tol: float = TOL_BALL) -> np.ndarray:
    """Return ``x`` itself if ``||x|| <= 1``; renormalise rounding spill-over.

    Raises ``ValueError`` when ``x`` lies outside the ball by more than ``tol``.
    """
    p = as_point(x)
    r = norm(p)
    if r <= 1.0:
        return p
    if r > 1.0 + tol:
        raise ValueError(f"point lies outside the unit ball (norm {r!r})")
    clamp_counter.bump()
    return p / r


@dataclass(frozen=True, eq=False)
class BallSpec:
    """Closed ball of ``radius`` around ``center``."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def n(self) -> int:
        return self.center.shape[0]

    def contains(self, x, tol: float = 0.0) -> bool:
        return norm(np.asarray(x, dtype=np.float64) - self.center) <= self.radius + tol

    def inside_unit_ball(self, tol: float = TOL_BALL) -> bool:
        return norm(self.center) + self.radius <= 1.0 + tol


def _check_sampler_args(n: int, radius: float, center) -> np.ndarray:
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if center is None:
        return np.zeros(int(n))
    c = as_point(center)
    if c.shape[0] != n:
        raise ValueError(f"center has dimension {c.shape[0]}, expected {n}")
    return c


def _directions(n: int, rng: np.random.Generator, count: int) -> np.ndarray:
    g = rng.standard_normal((count, n))
    r = np.sqrt(np.einsum("ij,ij->i", g, g))
    # A zero Gaussian vector has probability 0 but is not impossible in floats.
    while np.any(r == 0.0):
        bad = r == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), n))
        r = np.sqrt(np.einsum("ij,ij->i", g, g))
    return g / r[:, None]


def sample_uniform_ball(
    n: int,
    radius: float = 1.0,
    center=None,
    *,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Draw points uniformly (Lebesgue) from the ball ``B_n(radius, center)``.

    Gaussian direction scaled by ``radius * U**(1/n)``.  Returns shape ``(n,)``
    when ``size`` is None, otherwise ``(size, n)``.
    """
    c = _check_sampler_args(n, radius, center)
    count = 1 if size is None else int(size)
    d = _directions(int(n), rng, count)
    u = rng.random(count)
    pts = c + (radius * u ** (1.0 / n))[:, None] * d
    return pts[0] if size is None else pts


def sample_uniform_sphere(
    n: int,
    radius: float = 1.0,
    center=None,
    *,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Draw points from the rotation-invariant law on the sphere ``S_{n-1}(radius, center)``."""
    c = _check_sampler_args(n, radius, center)
    count = 1 if size is None else int(size)
    pts = c + radius * _directions(int(n), rng, count)
    return pts[0] if size is None else pts


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``; identical inputs give identical streams."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit integer seed derived from ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])
