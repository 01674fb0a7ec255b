"""Nonlinearities for the attack neuron and the level solvers they need.

Four kinds are supported: ``relu``, ``sigmoid``, ``gauss_bell``
(``exp(-s**2/2)``) and ``sigmoid_diff_bell``
(``(sigma(s) - sigma(s+a)) / (sigma(0) - sigma(a))``).  All functions accept
scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RELU = "relu"
SIGMOID = "sigmoid"
GAUSS_BELL = "gauss_bell"
SIGMOID_DIFF_BELL = "sigmoid_diff_bell"

TAGS = (RELU, SIGMOID, GAUSS_BELL, SIGMOID_DIFF_BELL)


@dataclass(frozen=True)
class ActivationKind:
    tag: str
    shift_a: float = 0.0

    def __post_init__(self) -> None:
        if self.tag not in TAGS:
            raise ValueError(f"unknown activation tag {self.tag!r}; expected one of {TAGS}")
        object.__setattr__(self, "shift_a", float(self.shift_a))
        if self.tag == SIGMOID_DIFF_BELL and self.shift_a == 0.0:
            raise ValueError("sigmoid_diff_bell needs a nonzero shift a")

    @property
    def is_bell(self) -> bool:
        return self.tag in (GAUSS_BELL, SIGMOID_DIFF_BELL)

    def __call__(self, s):
        return evaluate(self, s)

    def to_dict(self) -> dict:
        d = {"activation": self.tag}
        if self.tag == SIGMOID_DIFF_BELL:
            d["a"] = self.shift_a
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActivationKind":
        tag = d.get("activation")
        if tag == SIGMOID_DIFF_BELL:
            if "a" not in d:
                raise ValueError("sigmoid_diff_bell requires field 'a'")
            return cls(tag, d["a"])
        return cls(tag)

    def __str__(self) -> str:
        if self.tag == SIGMOID_DIFF_BELL:
            return f"{self.tag}(a={self.shift_a!r})"
        return self.tag


def sigmoid(s):
    """Logistic function, branch-split so ``exp`` never overflows."""
    s = np.asarray(s, dtype=np.float64)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def _sigmoid_diff_bell(s, a: float):
    # sigma(s) - sigma(s+a) == expm1(-a) * sigma(-s) * sigma(s+a); the common
    # factor cancels against the same identity at s = 0.
    s = np.asarray(s, dtype=np.float64)
    return 2.0 * sigmoid(-s) * sigmoid(s + a) / sigmoid(a)


def evaluate(kind: ActivationKind, s):
    if kind.tag == RELU:
        out = np.maximum(np.asarray(s, dtype=np.float64), 0.0)
    elif kind.tag == SIGMOID:
        return sigmoid(s)
    elif kind.tag == GAUSS_BELL:
        s = np.asarray(s, dtype=np.float64)
        out = np.exp(-0.5 * s * s)
    else:
        out = _sigmoid_diff_bell(s, kind.shift_a)
    return out if np.ndim(out) else float(out)


def peak_location(kind: ActivationKind) -> float | None:
    """Argmax of a bell-shaped ``g``; None for the monotone kinds."""
    if kind.tag == GAUSS_BELL:
        return 0.0
    if kind.tag == SIGMOID_DIFF_BELL:
        return -kind.shift_a / 2.0
    return None


def is_monotone_safe_on_negatives(kind: ActivationKind) -> bool:
    """True iff ``sup_{s <= s0} g(s) == g(s0)`` for every ``s0 <= 0``."""
    peak = peak_location(kind)
    return peak is None or peak >= 0.0


def sup_on_halfline(kind: ActivationKind, s0: float) -> float:
    """``sup_{s <= s0} g(s)`` in closed form."""
    peak = peak_location(kind)
    if peak is not None and s0 > peak:
        return evaluate(kind, peak)
    return evaluate(kind, s0)


def halfline_level_point(kind: ActivationKind, level: float) -> float | None:
    """Largest ``s0 < 0`` with ``sup_{s <= s0} g(s) <= level``.

    Returns None when every ``s0 < 0`` already satisfies the bound (the level
    is at or above the supremum of ``g`` over the negative half-line).  Raises
    for ReLU, where any ``s0 <= 0`` gives exactly 0, and for ``level <= 0``
    with a kind that never reaches 0.
    """
    if kind.tag == RELU:
        raise ValueError("ReLU is identically 0 on the negative half-line")
    if not level > 0:
        raise ValueError(f"{kind.tag} is strictly positive; level must be > 0, got {level}")
    peak = peak_location(kind)
    top = sup_on_halfline(kind, 0.0)
    if level >= top:
        return None
    if kind.tag == SIGMOID:
        # sigma(s0) = level  <=>  s0 = -log((1 - level) / level)
        return -math.log((1.0 - level) / level)
    if kind.tag == GAUSS_BELL:
        return -math.sqrt(-2.0 * math.log(level))
    # sigmoid_diff_bell: with u = e^s, sigma(-s) sigma(s+a) = c is the quadratic
    #   c e^a u^2 + (c (1 + e^a) - e^a) u + c = 0;
    # the smaller root is the crossing on the rising flank left of the peak.
    a = kind.shift_a
    c = level * float(sigmoid(a)) / 2.0
    if a >= 0:
        qa, qb, qc = c, c * (1.0 + math.exp(-a)) - 1.0, c * math.exp(-a)
    else:
        qa, qb, qc = c * math.exp(a), c * (1.0 + math.exp(a)) - math.exp(a), c
    disc = qb * qb - 4.0 * qa * qc
    u = 2.0 * qc / (-qb + math.sqrt(max(disc, 0.0)))
    s0 = math.log(u)
    return min(s0, min(peak, 0.0))
