"""One-neuron stealth attacks: F_a(x) = F(x) + D g((x, kappa x') - b).

The neuron fires at the trigger ``x'`` and is (nearly) silent on every point
``x`` with ``(x', x) < gamma ||x'||^2``.  When the secret validation set lies
in that half-space the attack changes the output at ``x'`` by exactly
``delta`` while moving every validation output by at most ``epsilon``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from stealth_attacks import activations as act
from stealth_attacks.activations import ActivationKind
from stealth_attacks.backbone import ClassifierMap
from stealth_attacks.geometry import as_point, inner, sample_uniform_ball, sample_uniform_sphere

# relative slack for the floating-point checks of both stealth constraints
REL_TOL = 1e-10


class GuaranteeViolation(AssertionError):
    """A separated trigger whose constructed attack failed a stealth constraint."""

    def __init__(self, message: str, data: dict | None = None) -> None:
        self.data = data or {}
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class AttackSpec:
    x_prime: np.ndarray
    gamma: float
    epsilon: float
    delta: float
    activation: ActivationKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_prime", as_point(self.x_prime))
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.epsilon == 0 and self.activation.tag != act.RELU:
            raise ValueError(f"epsilon must be positive for {self.activation.tag}")
        if inner(self.x_prime, self.x_prime) == 0.0:
            raise ValueError("trigger x' must be nonzero")


@dataclass(frozen=True, eq=False)
class AttackParams:
    w: np.ndarray
    b: float
    D: float
    kappa: float
    activation: ActivationKind
    z: float
    gamma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "w", as_point(self.w))
        if not (self.D > 0 and self.kappa > 0):
            raise ValueError("gain D and scale kappa must be positive")

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def trigger(self) -> np.ndarray:
        return self.w / self.kappa

    def to_dict(self) -> dict:
        d = {
            "w": self.w.tolist(),
            "b": self.b,
            "D": self.D,
            "kappa": self.kappa,
            "gamma": self.gamma,
            "z": self.z,
        }
        d.update(self.activation.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AttackParams":
        missing = [k for k in ("w", "b", "D", "kappa", "gamma", "activation") if k not in d]
        if missing:
            raise ValueError(f"attack file is missing fields: {', '.join(missing)}")
        kind = ActivationKind.from_dict(d)
        z = d.get("z")
        if z is None:
            w = np.asarray(d["w"], dtype=np.float64)
            n2 = float(np.dot(w, w)) / d["kappa"] ** 2
            z = (1.0 - d["gamma"]) * n2 * (1.0 if kind.is_bell else 0.5)
        return cls(d["w"], float(d["b"]), float(d["D"]), float(d["kappa"]), kind, float(z), float(d["gamma"]))


def solve_parameters(norm2, gamma: float, epsilon: float, delta: float, kind: ActivationKind):
    """Closed-form ``(kappa, D, b, z)`` for trigger squared norms ``norm2`` (array).

    Monotone kinds put the bias halfway between ``gamma ||x'||^2`` and
    ``||x'||^2``; bell kinds centre it at ``||x'||^2``.  The gain is fixed so
    the trigger output shifts by exactly ``delta``.
    """
    norm2 = np.asarray(norm2, dtype=np.float64)
    if kind.is_bell:
        z = (1.0 - gamma) * norm2
        D = np.full_like(norm2, delta)
        s0 = act.halfline_level_point(kind, epsilon / delta)
        # s0 is None when g <= epsilon/delta on all negatives: any kappa works
        kappa = 1.0 / z if s0 is None else -s0 / z
        b = kappa * norm2
        return kappa, D, b, z
    z = 0.5 * (1.0 - gamma) * norm2
    if kind.tag == act.RELU:
        kappa = 1.0 / z
        D = np.full_like(norm2, delta)
    elif delta > epsilon:
        # (1 - sigma(u)) / sigma(u) = e^-u gives D sigma(-kz) = eps, D sigma(kz) = delta
        kappa = math.log(delta / epsilon) / z
        D = np.full_like(norm2, delta + epsilon)
    else:
        kappa = 1.0 / z
        D = np.full_like(norm2, delta / float(act.sigmoid(1.0)))
    b = kappa * (0.5 * (1.0 + gamma)) * norm2
    return kappa, D, b, z


def construct_attack(spec: AttackSpec) -> AttackParams:
    norm2 = inner(spec.x_prime, spec.x_prime)
    kappa, D, b, z = (float(v) for v in solve_parameters(norm2, spec.gamma, spec.epsilon, spec.delta, spec.activation))
    return AttackParams(kappa * spec.x_prime, b, D, kappa, spec.activation, z, spec.gamma)


def attack_term(params: AttackParams, x):
    """``D g((x, w) - b)`` for one point or an ``(m, n)`` stack of points."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.n:
        raise ValueError(f"dimension mismatch: attack has n={params.n}, got {x.shape[-1]}")
    out = params.D * np.asarray(act.evaluate(params.activation, x @ params.w - params.b))
    return float(out) if out.ndim == 0 else out


class AttackedMap(ClassifierMap):
    """The backbone with the attack neuron added to its score."""

    def __init__(self, base: ClassifierMap, params: AttackParams):
        if base.n != params.n:
            raise ValueError(f"dimension mismatch: backbone n={base.n}, attack n={params.n}")
        self.base = base
        self.params = params
        self.n = base.n
        self.label_inside = base.label_inside
        self.label_outside = base.label_outside

    def _scores(self, X: np.ndarray) -> np.ndarray:
        return self.base._scores(X) + attack_term(self.params, X)


def attacked_map(F: ClassifierMap, params: AttackParams) -> AttackedMap:
    return AttackedMap(F, params)


@dataclass(frozen=True, eq=False)
class ValidationSet:
    points: np.ndarray
    max_size: int | None = None

    def __post_init__(self) -> None:
        P = np.asarray(self.points, dtype=np.float64)
        if P.size == 0:
            P = P.reshape(0, P.shape[-1] if P.ndim == 2 else 0)
        if P.ndim != 2:
            raise ValueError(f"validation points must form an (M, n) array, got shape {P.shape}")
        r = np.sqrt(np.einsum("ij,ij->i", P, P))
        if np.any(r > 1.0 + 1e-12):
            raise ValueError("validation points must lie in the unit ball")
        if self.max_size is not None and P.shape[0] > self.max_size:
            raise ValueError(f"{P.shape[0]} validation points exceed the bound M={self.max_size}")
        object.__setattr__(self, "points", P)

    def __len__(self) -> int:
        return self.points.shape[0]


def make_validation_set(M: int, n: int, mode: str, rng: np.random.Generator) -> ValidationSet:
    """``uniform``: M points uniform in the unit ball; ``boundary``: M points on the unit sphere."""
    if mode == "uniform":
        P = sample_uniform_ball(n, 1.0, rng=rng, size=M)
    elif mode == "boundary":
        P = sample_uniform_sphere(n, 1.0, rng=rng, size=M)
        P /= np.maximum(np.sqrt(np.einsum("ij,ij->i", P, P)), 1.0)[:, None]
    else:
        raise ValueError(f"unknown validation mode {mode!r}; expected 'uniform' or 'boundary'")
    return ValidationSet(P, M)


def is_separated(x_prime, V: ValidationSet, gamma: float) -> bool:
    """``gamma ||x'||^2 > (x', x_i)`` for every validation point."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    x_prime = as_point(x_prime)
    if len(V) == 0:
        return True
    if V.points.shape[1] != x_prime.shape[0]:
        raise ValueError("dimension mismatch between trigger and validation set")
    return bool(np.all(V.points @ x_prime < gamma * inner(x_prime, x_prime)))


@dataclass(frozen=True)
class StealthReport:
    max_validation_deviation: float
    trigger_shift: float
    eps_ok: bool
    delta_ok: bool
    separated: bool
    eps_slack: float

    @property
    def solved(self) -> bool:
        return self.eps_ok and self.delta_ok

    def to_dict(self) -> dict:
        return asdict(self)


def eps_within(deviation, epsilon: float):
    return deviation <= epsilon * (1.0 + REL_TOL)


def delta_within(shift, delta: float):
    return np.abs(shift - delta) <= REL_TOL * delta


def verify_stealth(F: ClassifierMap, params: AttackParams, spec: AttackSpec, V: ValidationSet) -> StealthReport:
    """Measure both stealth constraints on ``V`` and at the trigger.

    Raises :class:`GuaranteeViolation` if the trigger is separated from ``V``
    and a constraint still fails; otherwise violations are only reported.
    """
    Fa = attacked_map(F, params)
    if len(V):
        dev = np.abs(Fa.evaluate_many(V.points) - F.evaluate_many(V.points))
        max_dev = float(dev.max())
    else:
        max_dev = 0.0
    shift = Fa.evaluate(spec.x_prime) - F.evaluate(spec.x_prime)
    sep = is_separated(spec.x_prime, V, spec.gamma)
    report = StealthReport(
        max_validation_deviation=max_dev,
        trigger_shift=shift,
        eps_ok=bool(eps_within(max_dev, spec.epsilon)),
        delta_ok=bool(delta_within(shift, spec.delta)),
        separated=sep,
        eps_slack=spec.epsilon - max_dev,
    )
    if sep and not report.solved:
        raise GuaranteeViolation(
            "separated trigger but the stealth constraints failed",
            {"report": report.to_dict(), "attack": params.to_dict(), "x_prime": spec.x_prime.tolist()},
        )
    return report


def verify_stealth_many(X_prime: np.ndarray, V: np.ndarray, gamma: float, epsilon: float, delta: float,
                        kind: ActivationKind, V_per_trial: bool = False) -> dict:
    """Build and check one attack per trigger row of ``X_prime`` (backbone-free).

    ``V`` is ``(M, n)`` shared by every trial, or ``(T, M, n)`` with
    ``V_per_trial``.  F_a - F equals the attack term identically, so the
    constraints are measured on the attack term directly.  Returns per-trial
    arrays ``separated``, ``max_dev``, ``shift``, ``eps_ok``, ``delta_ok``.
    """
    norm2 = np.einsum("ij,ij->i", X_prime, X_prime)
    kappa, D, b, _ = solve_parameters(norm2, gamma, epsilon, delta, kind)
    kappa = np.broadcast_to(kappa, norm2.shape)
    W = kappa[:, None] * X_prime
    shift = D * act.evaluate(kind, np.asarray(np.einsum("ij,ij->i", X_prime, W) - b))
    T = X_prime.shape[0]
    M = V.shape[-2]
    if M == 0:
        separated = np.ones(T, dtype=bool)
        max_dev = np.zeros(T)
    else:
        if V_per_trial:
            G = np.einsum("tmn,tn->tm", V, X_prime)
            A = np.einsum("tmn,tn->tm", V, W)
        else:
            G = X_prime @ V.T
            A = W @ V.T
        separated = np.all(G < (gamma * norm2)[:, None], axis=1)
        dev = np.abs(D[:, None] * act.evaluate(kind, A - b[:, None]))
        max_dev = dev.max(axis=1)
    return {
        "separated": separated,
        "max_dev": max_dev,
        "shift": shift,
        "eps_ok": eps_within(max_dev, epsilon),
        "delta_ok": delta_within(shift, delta),
    }


def success_probability_bound(M: int, gamma: float, n: int) -> float:
    """``max(1 - M (2 gamma)^-n, 0)``: P(a uniform trigger is separated from any fixed M points)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if isinstance(M, bool) or int(M) != M or M < 0:
        raise ValueError(f"M must be a nonnegative integer, got {M}")
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if M == 0:
        return 1.0
    return max(1.0 - M * math.exp(-n * math.log(2.0 * gamma)), 0.0)


def save_attack(params: AttackParams, path, extra: dict | None = None) -> None:
    d = params.to_dict()
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d, indent=2) + "\n", encoding="utf-8")


def load_attack(path) -> tuple[AttackParams, dict]:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return AttackParams.from_dict(d), d
