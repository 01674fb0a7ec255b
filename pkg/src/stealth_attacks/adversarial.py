"""Adversarial examples under a smeared-absolute-continuity (SmAC) data model.

A :class:`SmacRegion` describes the class-A ball ``B_n(r_A, x_A)``, the
density cap ``C``, the in-ball mass ``nu``, the class prior ``P_A`` and the
reach ``Delta`` within which a boundary point can be flipped.  The closed-form
lower bounds work for any (C, nu); sampling is provided for the uniform
instantiation (C = nu = 1), for which the shell bound is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from stealth_attacks.backbone import BallClassifier, ClassifierMap, Label
from stealth_attacks.geometry import (
    TOL_BALL,
    BallSpec,
    as_point,
    norm,
    sample_uniform_ball,
)


@dataclass(frozen=True)
class SmacRegion:
    region: BallSpec
    C: float = 1.0
    nu: float = 1.0
    P_A: float = 1.0
    Delta: float = 0.1
    label_A: Label = "A"
    label_other: Label = "B"

    def __post_init__(self) -> None:
        bad = []
        if not 0.0 < self.region.radius < 1.0:
            bad.append(f"r_A must lie in (0, 1), got {self.region.radius}")
        if not self.C > 0:
            bad.append(f"C must be positive, got {self.C}")
        if not 0.0 < self.nu <= 1.0:
            bad.append(f"nu must lie in (0, 1], got {self.nu}")
        if not 0.0 < self.P_A <= 1.0:
            bad.append(f"P_A must lie in (0, 1], got {self.P_A}")
        if not self.Delta > 0:
            bad.append(f"Delta must be positive, got {self.Delta}")
        elif norm(self.region.center) + self.region.radius + self.Delta / 2.0 > 1.0 + TOL_BALL:
            # the witness steps Delta/2 past the boundary and must stay in the domain
            bad.append("||x_A|| + r_A + Delta/2 must not exceed 1")
        if bad:
            raise ValueError("; ".join(bad))

    @property
    def r_A(self) -> float:
        return self.region.radius

    @property
    def x_A(self) -> np.ndarray:
        return self.region.center

    @property
    def n(self) -> int:
        return self.region.n

    def classifier(self) -> BallClassifier:
        return BallClassifier(self.region, self.label_A, self.label_other)

    def to_dict(self) -> dict:
        return {
            "center": self.x_A.tolist(),
            "r_A": self.r_A,
            "C": self.C,
            "nu": self.nu,
            "P_A": self.P_A,
            "Delta": self.Delta,
        }

    @classmethod
    def from_dict(cls, d: dict, n: int | None = None) -> "SmacRegion":
        """Build from the JSON config; a missing ``center`` means the origin of R^n."""
        center = d.get("center")
        if center is None:
            if n is None:
                raise ValueError("region without 'center' needs an explicit dimension")
            center = np.zeros(n)
        elif n is not None and len(center) != n:
            raise ValueError(f"region center has dimension {len(center)}, expected {n}")
        return cls(
            BallSpec(center, d["r_A"]),
            C=float(d.get("C", 1.0)),
            nu=float(d.get("nu", 1.0)),
            P_A=float(d.get("P_A", 1.0)),
            Delta=float(d["Delta"]),
        )


def load_region(path, n: int | None = None) -> SmacRegion:
    with open(path, encoding="utf-8") as fh:
        return SmacRegion.from_dict(json.load(fh), n)


@dataclass(frozen=True)
class AdversarialQuery:
    epsilon: float
    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension n must be a positive integer, got {self.n}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def _check_ratio(epsilon: float, r_A: float) -> float:
    if not 0 < epsilon < r_A:
        raise ValueError(f"epsilon must lie in (0, r_A) = (0, {r_A}), got {epsilon}")
    return epsilon / r_A


def shell_bound(P_A: float, nu: float, C: float, ratio: float, n: int) -> float:
    """``P_A * max(nu - C (1 - ratio)**n, 0)`` with ``ratio = epsilon / r_A``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return P_A * max(nu - C * math.pow(1.0 - ratio, n), 0.0)


def shell_bound_exponential(P_A: float, nu: float, C: float, ratio: float, n: int) -> float:
    """``P_A * max(nu - C exp(-n ratio), 0)``; never above :func:`shell_bound`."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return P_A * max(nu - C * math.exp(-n * ratio), 0.0)


def theorem1_bound(region: SmacRegion, q: AdversarialQuery) -> float:
    """Lower bound on P(x admits an (epsilon + Delta)-adversarial example)."""
    ratio = _check_ratio(q.epsilon, region.r_A)
    return shell_bound(region.P_A, region.nu, region.C, ratio, q.n)


def theorem1_bound_exponential(region: SmacRegion, q: AdversarialQuery) -> float:
    ratio = _check_ratio(q.epsilon, region.r_A)
    return shell_bound_exponential(region.P_A, region.nu, region.C, ratio, q.n)


def critical_dimension_for(nu: float, C: float, ratio: float) -> int:
    """Smallest n >= 1 with ``nu - C (1 - ratio)**n > 0``.

    The log-ratio threshold only seeds the search; the answer is settled by
    evaluating the bound itself at neighbouring integers.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"epsilon / r_A must lie in (0, 1), got {ratio}")
    if not (nu > 0 and C > 0):
        raise ValueError("nu and C must be positive")

    def positive(k: int) -> bool:
        return nu - C * math.pow(1.0 - ratio, k) > 0.0

    t = (math.log(nu) - math.log(C)) / math.log1p(-ratio)
    k = max(1, int(math.floor(t)) if math.isfinite(t) else 1)
    while k > 1 and positive(k - 1):
        k -= 1
    while not positive(k):
        k += 1
    return k


def critical_dimension(region: SmacRegion, q: AdversarialQuery) -> int:
    return critical_dimension_for(region.nu, region.C, _check_ratio(q.epsilon, region.r_A))


def sample_bound_over_N(per_sample_bound: float, N: int) -> float:
    """Probability that at least one of ``N`` i.i.d. draws hits an event of probability >= p."""
    if not 0.0 <= per_sample_bound <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {per_sample_bound}")
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    return 1.0 - (1.0 - per_sample_bound) ** int(N)


def sample_smac(region: SmacRegion, rng: np.random.Generator, size: int | None = None):
    """Draw ``(x, label)`` pairs from the uniform SmAC instantiation.

    With probability ``P_A`` the point is uniform on the class-A ball and
    labelled ``label_A``; otherwise it is uniform on the rest of the unit ball
    (by rejection) and labelled ``label_other``.  For ``size`` given, returns
    an ``(size, n)`` array and a boolean array (True for class A).
    """
    count = 1 if size is None else int(size)
    n = region.n
    is_A = rng.random(count) < region.P_A
    X = np.empty((count, n))
    k_A = int(is_A.sum())
    X[is_A] = sample_uniform_ball(n, region.r_A, region.x_A, rng=rng, size=k_A)
    need = count - k_A
    others = []
    attempts = 0
    while need > 0:
        cand = sample_uniform_ball(n, 1.0, rng=rng, size=max(need, 16))
        D = cand - region.x_A
        keep = cand[np.einsum("ij,ij->i", D, D) > region.r_A**2]
        others.append(keep[:need])
        need -= len(others[-1])
        attempts += 1
        if attempts > 10_000:
            raise RuntimeError("rejection sampler for the non-A region is not making progress")
    if others:
        X[~is_A] = np.concatenate(others)
    if size is None:
        return X[0], (region.label_A if is_A[0] else region.label_other)
    return X, is_A


def _check_classifier(F: ClassifierMap, region: SmacRegion) -> None:
    if not isinstance(F, BallClassifier):
        raise TypeError("admissibility is decided analytically only for a BallClassifier")
    if F.region.radius != region.r_A or not np.array_equal(F.region.center, region.x_A):
        raise ValueError("classifier region does not match the SmAC region")


def witness(region: SmacRegion, x) -> np.ndarray:
    """Push ``x`` radially to distance ``r_A + Delta/2`` from ``x_A``."""
    d = as_point(x) - region.x_A
    r = norm(d)
    y = region.x_A + (region.r_A + region.Delta / 2.0) * d / r
    ny = norm(y)
    return y / ny if ny > 1.0 else y


def admits_adversarial(
    F: ClassifierMap, region: SmacRegion, x, label: Label, q: AdversarialQuery
) -> tuple[bool, np.ndarray | None]:
    """Decide whether ``x`` (of class A) lies in the epsilon-shell of the class ball.

    Shell points admit an ``(epsilon + Delta)``-adversarial example; the
    returned witness is that example.  Points deeper inside return
    ``(False, None)``.
    """
    _check_classifier(F, region)
    _check_ratio(q.epsilon, region.r_A)
    if label != region.label_A:
        raise ValueError(f"only class-A points are covered, got label {label!r}")
    x = as_point(x)
    r = norm(x - region.x_A)
    if not (region.r_A - q.epsilon < r <= region.r_A + TOL_BALL):
        return False, None
    return True, witness(region, x)


def admits_adversarial_many(F: ClassifierMap, region: SmacRegion, X: np.ndarray, q: AdversarialQuery):
    """Vectorised shell test for class-A points; returns ``(mask, witnesses)``.

    Witness rows for points outside the shell are NaN.
    """
    _check_classifier(F, region)
    _check_ratio(q.epsilon, region.r_A)
    D = X - region.x_A
    r = np.sqrt(np.einsum("ij,ij->i", D, D))
    mask = (r > region.r_A - q.epsilon) & (r <= region.r_A + TOL_BALL)
    Y = np.full_like(X, np.nan)
    if np.any(mask):
        Ym = region.x_A + (region.r_A + region.Delta / 2.0) * D[mask] / r[mask, None]
        ny = np.sqrt(np.einsum("ij,ij->i", Ym, Ym))
        Y[mask] = np.where((ny > 1.0)[:, None], Ym / ny[:, None], Ym)
    return mask, Y
