"""Backbone maps F from the unit ball to a real score.

Two concrete maps are provided: :class:`DenseNetwork`, a plain feedforward
stack evaluated with numpy, and :class:`BallClassifier`, which scores +1 inside
a ball and -1 outside.  Labels are derived from the score by thresholding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np

from stealth_attacks import activations as act
from stealth_attacks.geometry import TOL_BALL, BallSpec, as_point, clamp_counter, norm

Label = Hashable

IDENTITY = "identity"
LAYER_ACTIVATIONS = (act.RELU, act.SIGMOID, IDENTITY)


class ModelFormatError(ValueError):
    """A model file does not match the schema; ``path`` names the offending field."""

    def __init__(self, path: str, message: str) -> None:
        self.path = path
        super().__init__(f"{path}: {message}")


def _check_domain(X: np.ndarray, n: int) -> np.ndarray:
    if X.shape[-1] != n:
        raise ValueError(f"dimension mismatch: map expects n={n}, got {X.shape[-1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("input has non-finite coordinates")
    r = np.sqrt(np.einsum("...i,...i->...", X, X))
    if np.any(r > 1.0 + TOL_BALL):
        raise ValueError(f"input outside the unit ball (norm {float(np.max(r))!r})")
    spill = r > 1.0
    if np.any(spill):
        clamp_counter.bump(int(np.count_nonzero(spill)))
        X = np.where(spill[..., None], X / np.where(spill, r, 1.0)[..., None], X)
    return X


class ClassifierMap:
    """Base class: subclasses implement ``_scores`` on an ``(m, n)`` array."""

    n: int
    label_inside: Label = "A"
    label_outside: Label = "B"

    def _scores(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        X = _check_domain(X, self.n)
        out = self._scores(X)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("classifier produced a non-finite score")
        return out

    def evaluate(self, x) -> float:
        return float(self.evaluate_many(as_point(x)[None, :])[0])

    def classify(self, x, threshold: float = 0.0) -> Label:
        # ties go to label_inside
        return self.label_inside if self.evaluate(x) >= threshold else self.label_outside

    def classify_many(self, X, threshold: float = 0.0) -> np.ndarray:
        """Boolean array: True where the label is ``label_inside``."""
        return self.evaluate_many(X) >= threshold

    def __call__(self, x) -> float:
        return self.evaluate(x)


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = IDENTITY

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", np.atleast_2d(np.asarray(self.weights, dtype=np.float64)))
        object.__setattr__(self, "bias", np.atleast_1d(np.asarray(self.bias, dtype=np.float64)))
        if self.activation not in LAYER_ACTIVATIONS:
            raise ValueError(f"unknown activation tag {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"bias of length {self.bias.shape} does not match {self.weights.shape[0]} output rows"
            )

    def apply(self, H: np.ndarray) -> np.ndarray:
        Z = H @ self.weights.T + self.bias
        if self.activation == IDENTITY:
            return Z
        return act.evaluate(act.ActivationKind(self.activation), Z)


class DenseNetwork(ClassifierMap):
    """Feedforward stack of affine layers with one scalar output."""

    def __init__(self, layers: Sequence[Layer], label_inside: Label = "A", label_outside: Label = "B"):
        layers = list(layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].weights.shape[1] != layers[i - 1].weights.shape[0]:
                raise ValueError(
                    f"layer {i}: expects {layers[i].weights.shape[1]} inputs, "
                    f"previous layer has {layers[i - 1].weights.shape[0]} outputs"
                )
        if layers[-1].weights.shape[0] != 1:
            raise ValueError("last layer must have a single output")
        self.layers = tuple(layers)
        self.n = layers[0].weights.shape[1]
        self.label_inside = label_inside
        self.label_outside = label_outside

    def _scores(self, X: np.ndarray) -> np.ndarray:
        H = X
        for layer in self.layers:
            H = layer.apply(H)
        return H[:, 0]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "layers": [
                {"weights": L.weights.tolist(), "bias": L.bias.tolist(), "activation": L.activation}
                for L in self.layers
            ],
        }

    @classmethod
    def random(
        cls, n: int, hidden: Sequence[int], rng: np.random.Generator, activation: str = act.RELU
    ) -> "DenseNetwork":
        """Seeded random network with Glorot-scaled Gaussian weights."""
        sizes = [n, *hidden, 1]
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            W = rng.standard_normal((fan_out, fan_in)) * math.sqrt(2.0 / (fan_in + fan_out))
            b = 0.1 * rng.standard_normal(fan_out)
            layers.append(Layer(W, b, IDENTITY if i == len(sizes) - 2 else activation))
        return cls(layers)


class BallClassifier(ClassifierMap):
    """+1 on the closed ball ``region``, -1 elsewhere."""

    def __init__(self, region: BallSpec, label_inside: Label = "A", label_outside: Label = "B"):
        if not region.inside_unit_ball():
            raise ValueError("classifier region must lie inside the unit ball")
        self.region = region
        self.n = region.n
        self.label_inside = label_inside
        self.label_outside = label_outside

    def _scores(self, X: np.ndarray) -> np.ndarray:
        D = X - self.region.center
        r = np.sqrt(np.einsum("ij,ij->i", D, D))
        return np.where(r <= self.region.radius, 1.0, -1.0)

    def to_dict(self) -> dict:
        return {"center": self.region.center.tolist(), "radius": self.region.radius}


@dataclass
class ConstantMap(ClassifierMap):
    """F(x) = value; handy as a neutral backbone."""

    n: int
    value: float = 0.0
    label_inside: Label = field(default="A")
    label_outside: Label = field(default="B")

    def _scores(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], float(self.value))


def _real_matrix(obj, path: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ModelFormatError(path, "expected a non-empty list of rows")
    width = len(obj[0])
    for i, row in enumerate(obj):
        if len(row) != width or width == 0:
            raise ModelFormatError(f"{path}[{i}]", f"ragged row: expected {width} entries, got {len(row)}")
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ModelFormatError(f"{path}[{i}][{j}]", f"expected a real number, got {v!r}")
    return np.asarray(obj, dtype=np.float64)


def _real_vector(obj, path: str) -> np.ndarray:
    if not isinstance(obj, list):
        raise ModelFormatError(path, "expected a list of reals")
    for j, v in enumerate(obj):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ModelFormatError(f"{path}[{j}]", f"expected a real number, got {v!r}")
    return np.asarray(obj, dtype=np.float64)


def model_from_dict(data) -> ClassifierMap:
    if not isinstance(data, dict):
        raise ModelFormatError("$", "model file must hold a JSON object")
    if "layers" in data:
        n = data.get("n")
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ModelFormatError("n", f"expected a positive integer, got {n!r}")
        raw = data["layers"]
        if not isinstance(raw, list) or not raw:
            raise ModelFormatError("layers", "expected a non-empty list of layers")
        layers = []
        fan_in = n
        for i, spec in enumerate(raw):
            where = f"layers[{i}]"
            if not isinstance(spec, dict):
                raise ModelFormatError(where, "expected an object")
            for key in ("weights", "bias", "activation"):
                if key not in spec:
                    raise ModelFormatError(f"{where}.{key}", "missing field")
            W = _real_matrix(spec["weights"], f"{where}.weights")
            b = _real_vector(spec["bias"], f"{where}.bias")
            if W.shape[1] != fan_in:
                raise ModelFormatError(
                    f"{where}.weights", f"layer {i} expects {W.shape[1]} inputs but receives {fan_in}"
                )
            if b.shape[0] != W.shape[0]:
                raise ModelFormatError(
                    f"{where}.bias", f"layer {i} has {W.shape[0]} outputs but {b.shape[0]} biases"
                )
            if spec["activation"] not in LAYER_ACTIVATIONS:
                raise ModelFormatError(f"{where}.activation", f"unknown activation tag {spec['activation']!r}")
            layers.append(Layer(W, b, spec["activation"]))
            fan_in = W.shape[0]
        if fan_in != 1:
            raise ModelFormatError(f"layers[{len(raw) - 1}].weights", f"last layer has {fan_in} outputs, expected 1")
        return DenseNetwork(layers)
    if "center" in data or "radius" in data:
        center = _real_vector(data.get("center"), "center")
        if center.size == 0:
            raise ModelFormatError("center", "empty center")
        radius = data.get("radius")
        if isinstance(radius, bool) or not isinstance(radius, (int, float)) or not radius > 0:
            raise ModelFormatError("radius", f"expected a positive real, got {radius!r}")
        region = BallSpec(center, radius)
        if not region.inside_unit_ball():
            raise ModelFormatError("radius", "ball does not fit inside the unit ball")
        return BallClassifier(region)
    raise ModelFormatError("$", "expected a 'layers' network or a 'center'/'radius' ball classifier")


def load_model(path) -> ClassifierMap:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError("$", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return model_from_dict(data)


def save_model(F: ClassifierMap, path) -> None:
    if not hasattr(F, "to_dict"):
        raise TypeError(f"{type(F).__name__} has no file representation")
    Path(path).write_text(json.dumps(F.to_dict(), indent=2) + "\n", encoding="utf-8")


def empirical_lipschitz(F: ClassifierMap, pairs: Iterable[tuple]) -> float:
    """Largest ``|F(x) - F(y)| / ||x - y||`` over the sample; coincident pairs are skipped."""
    best = None
    for x, y in pairs:
        x, y = as_point(x), as_point(y)
        d = norm(x - y)
        if d == 0.0:
            continue
        q = abs(F.evaluate(x) - F.evaluate(y)) / d
        best = q if best is None else max(best, q)
    if best is None:
        raise ValueError("no pair of distinct points in the sample")
    return best
