"""Seeded Monte Carlo experiments that check every closed-form bound.

Trials run in fixed-size blocks.  Block ``k`` of an experiment with seed
``s`` draws from ``substream(s, 0, k)`` so the statistics do not depend on how
many workers execute the blocks; aggregation only sums counts and takes
maxima, in block order.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from statistics import NormalDist
from typing import Any, Callable

import numpy as np

from stealth_attacks import activations as act
from stealth_attacks.activations import ActivationKind
from stealth_attacks.adversarial import (
    AdversarialQuery,
    SmacRegion,
    admits_adversarial_many,
    sample_smac,
    theorem1_bound,
)
from stealth_attacks.geometry import BallSpec, derive_seed, sample_uniform_ball, substream
from stealth_attacks.stealth import (
    GuaranteeViolation,
    make_validation_set,
    success_probability_bound,
    verify_stealth_many,
)

BLOCK = 1024
MIN_TRIALS = 100
DEFAULT_TRIALS = 100_000
KINDS = ("stealth_success", "shell_mass", "theorem1_check", "sweep")
SWEEP_AXES = ("n", "M", "gamma", "epsilon", "delta")
CSV_HEADER = "experiment,n,M,gamma,epsilon,delta,activation,trials,seed,empirical,ci_low,ci_high,bound,verdict"

# spawn-key prefixes for the streams of one experiment
_KEY_BLOCK = 0
_KEY_VALIDATION = 1


class ConfigError(ValueError):
    def __init__(self, problems: dict[str, str]) -> None:
        self.problems = problems
        super().__init__("invalid config: " + "; ".join(f"{k}: {v}" for k, v in problems.items()))


# -- statistics ---------------------------------------------------------------

def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


def binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def lower_bound_verdict(empirical: float, bound: float, trials: int) -> str:
    """``pass`` iff the rate is not below the bound by more than 3 standard errors."""
    if bound <= 0.0:
        return "vacuous"
    return "pass" if empirical >= bound - 3.0 * binomial_se(bound, trials) else "fail"


# -- config -------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str
    n: Any = 10
    M: Any = 100
    gamma: Any = 0.9
    epsilon: Any = 0.0
    delta: Any = 1.0
    activation: ActivationKind = field(default_factory=lambda: ActivationKind(act.RELU))
    trials: int = DEFAULT_TRIALS
    seed: int | None = None
    validation_mode: str = "uniform"
    redraw_validation: bool = False
    region: dict | None = None
    base_experiment: str = "stealth_success"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError({"$": "config must be a JSON object"})
        known = {f.name for f in fields(cls)} | {"a"}
        problems = {k: "unknown field" for k in d if k not in known}
        if "experiment" not in d:
            problems["experiment"] = "missing field"
        if problems:
            raise ConfigError(problems)
        d = dict(d)
        tag = d.pop("activation", act.RELU)
        a = d.pop("a", None)
        try:
            if isinstance(tag, ActivationKind):
                kind = tag
            elif tag == act.SIGMOID_DIFF_BELL:
                kind = ActivationKind(tag, 0.0 if a is None else a)
            else:
                kind = ActivationKind(tag)
        except (ValueError, TypeError) as exc:
            raise ConfigError({"activation": str(exc)}) from None
        cfg = cls(activation=kind, **d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("activation")
        d.update(self.activation.to_dict())
        return d

    def is_stealth(self) -> bool:
        kind = self.base_experiment if self.experiment == "sweep" else self.experiment
        return kind == "stealth_success"

    def grid_axes(self) -> list[str]:
        return [a for a in SWEEP_AXES if isinstance(getattr(self, a), (list, tuple))]

    def validate(self) -> None:
        p: dict[str, str] = {}
        if self.experiment not in KINDS:
            p["experiment"] = f"expected one of {KINDS}, got {self.experiment!r}"
        if self.experiment == "sweep":
            if self.base_experiment not in KINDS[:3]:
                p["base_experiment"] = f"expected one of {KINDS[:3]}"
            axes = self.grid_axes()
            if not axes:
                p["n"] = "a sweep needs at least one list-valued parameter"
            for a in axes:
                if len(getattr(self, a)) == 0:
                    p[a] = "empty grid"
        else:
            for a in SWEEP_AXES:
                if isinstance(getattr(self, a), (list, tuple)):
                    p[a] = "lists are only allowed in a sweep"
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < MIN_TRIALS:
            p["trials"] = f"must be an integer >= {MIN_TRIALS}"
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            p["seed"] = "an explicit unsigned 64-bit seed is required"
        if self.validation_mode not in ("uniform", "boundary"):
            p["validation_mode"] = "expected 'uniform' or 'boundary'"

        def each(name):
            v = getattr(self, name)
            return v if isinstance(v, (list, tuple)) else [v]

        for n in each("n"):
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                p["n"] = f"dimension must be a positive integer, got {n!r}"
        if self.is_stealth():
            for M in each("M"):
                if isinstance(M, bool) or not isinstance(M, int) or M < 0:
                    p["M"] = f"must be a nonnegative integer, got {M!r}"
            for g in each("gamma"):
                if not isinstance(g, (int, float)) or not 0 < g < 1:
                    p["gamma"] = f"must lie in (0, 1), got {g!r}"
            for e in each("epsilon"):
                if not isinstance(e, (int, float)) or e < 0:
                    p["epsilon"] = f"must be nonnegative, got {e!r}"
                elif e == 0 and self.activation.tag != act.RELU:
                    p["epsilon"] = f"epsilon must be positive for {self.activation.tag}"
            for dl in each("delta"):
                if not isinstance(dl, (int, float)) or not dl > 0:
                    p["delta"] = f"must be positive, got {dl!r}"
        else:
            if not isinstance(self.region, dict):
                p["region"] = "an object {r_A, Delta, [center, C, nu, P_A]} is required"
            else:
                for key in ("r_A", "Delta"):
                    if key not in self.region:
                        p[f"region.{key}"] = "missing field"
                if "r_A" in self.region:
                    for e in each("epsilon"):
                        if not isinstance(e, (int, float)) or not 0 < e < self.region["r_A"]:
                            p["epsilon"] = f"must lie in (0, r_A), got {e!r}"
                if not any(k.startswith("region.") for k in p):
                    for n in each("n"):
                        if isinstance(n, int) and n >= 1:
                            try:
                                SmacRegion.from_dict(self.region, n)
                            except (ValueError, TypeError, KeyError) as exc:
                                p["region"] = str(exc)
        if p:
            raise ConfigError(p)

    def cells(self) -> list["ExperimentConfig"]:
        """Scalar configs for every grid cell in deterministic order, with derived seeds."""
        axes = self.grid_axes()
        grids = [list(getattr(self, a)) for a in axes]
        out = []
        for idx, values in enumerate(itertools.product(*grids)):
            cell = replace(self, experiment=self.base_experiment, seed=derive_seed(self.seed, idx))
            for a, v in zip(axes, values):
                setattr(cell, a, v)
            out.append(cell)
        return out


# -- reports ------------------------------------------------------------------

@dataclass
class ExperimentReport:
    experiment: str
    n: int
    trials: int
    seed: int
    empirical: float
    ci_low: float
    ci_high: float
    bound: float
    verdict: str
    successes: int
    M: int | None = None
    gamma: float | None = None
    epsilon: float | None = None
    delta: float | None = None
    activation: str | None = None
    reference: float | None = None
    details: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list:
        vals = [self.experiment, self.n, self.M, self.gamma, self.epsilon, self.delta, self.activation,
                self.trials, self.seed, self.empirical, self.ci_low, self.ci_high, self.bound, self.verdict]
        return ["" if v is None else (repr(v) if isinstance(v, float) else v) for v in vals]


def reports_to_json(reports: list[ExperimentReport]) -> str:
    payload = reports[0].to_dict() if len(reports) == 1 else [r.to_dict() for r in reports]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def reports_to_csv(reports: list[ExperimentReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def _make_report(cfg: ExperimentConfig, successes: int, bound: float, verdict: str, **extra) -> ExperimentReport:
    lo, hi = wilson_interval(successes, cfg.trials)
    return ExperimentReport(
        experiment=cfg.experiment,
        n=cfg.n,
        trials=cfg.trials,
        seed=cfg.seed,
        empirical=successes / cfg.trials,
        ci_low=lo,
        ci_high=hi,
        bound=bound,
        verdict=verdict,
        successes=successes,
        config=cfg.to_dict(),
        **extra,
    )


# -- block runner -------------------------------------------------------------

def _run_blocks(seed: int, trials: int, work: Callable[[int, np.random.Generator, int], dict],
                workers: int | None) -> list[dict]:
    sizes = [min(BLOCK, trials - start) for start in range(0, trials, BLOCK)]
    jobs = [(k, size) for k, size in enumerate(sizes)]

    def run(job):
        k, size = job
        return work(k, substream(seed, _KEY_BLOCK, k), size)

    if workers is None:
        workers = 1
    elif workers <= 0:
        workers = os.cpu_count() or 1
    if workers == 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))


def _region(cfg: ExperimentConfig) -> SmacRegion:
    return SmacRegion.from_dict(cfg.region, cfg.n)


# -- experiments --------------------------------------------------------------

def run_stealth_success(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """Draw uniform triggers, build the attack, and check it on a validation set of size M.

    The validation set is drawn once per experiment unless
    ``redraw_validation`` is set.  Raises :class:`GuaranteeViolation` if any
    separated trial fails a stealth constraint.
    """
    if cfg.experiment != "stealth_success":
        raise ConfigError({"experiment": "expected stealth_success"})
    cfg.validate()
    n, M, gamma, eps, delta, kind = cfg.n, cfg.M, float(cfg.gamma), float(cfg.epsilon), float(cfg.delta), cfg.activation
    V_fixed = None
    if not cfg.redraw_validation:
        V_fixed = make_validation_set(M, n, cfg.validation_mode, substream(cfg.seed, _KEY_VALIDATION)).points

    def work(k: int, rng: np.random.Generator, size: int) -> dict:
        X = sample_uniform_ball(n, 1.0, rng=rng, size=size)
        if V_fixed is None:
            flat = make_validation_set(size * M, n, cfg.validation_mode, rng).points
            V = flat.reshape(size, M, n)
        else:
            V = V_fixed
        r = verify_stealth_many(X, V, gamma, eps, delta, kind, V_per_trial=V_fixed is None)
        solved = r["eps_ok"] & r["delta_ok"]
        sep = r["separated"]
        bad = np.flatnonzero(sep & ~solved)
        out = {
            "solved": int(solved.sum()),
            "separated": int(sep.sum()),
            "max_sep_dev": float(r["max_dev"][sep].max()) if sep.any() else 0.0,
            "max_trigger_err": float(np.max(np.abs(r["shift"] - delta))) / delta,
            "counterexample": None,
        }
        if bad.size:
            i = int(bad[0])
            out["counterexample"] = {
                "block": k,
                "index_in_block": i,
                "x_prime": X[i].tolist(),
                "max_validation_deviation": float(r["max_dev"][i]),
                "trigger_shift": float(r["shift"][i]),
            }
        return out

    parts = _run_blocks(cfg.seed, cfg.trials, work, workers)
    bad = [p["counterexample"] for p in parts if p["counterexample"] is not None]
    if bad:
        raise GuaranteeViolation(
            f"{len(bad)} block(s) contain separated triggers that fail the stealth constraints",
            {"config": cfg.to_dict(), "counterexamples": bad},
        )
    solved = sum(p["solved"] for p in parts)
    separated = sum(p["separated"] for p in parts)
    bound = success_probability_bound(M, gamma, n)
    verdict = lower_bound_verdict(solved / cfg.trials, bound, cfg.trials)
    return _make_report(
        cfg, solved, bound, verdict,
        M=M, gamma=gamma, epsilon=eps, delta=delta, activation=str(kind),
        details={
            "separated": separated,
            "counterexamples": 0,
            "max_separated_deviation": max(p["max_sep_dev"] for p in parts),
            "max_relative_trigger_error": max(p["max_trigger_err"] for p in parts),
            "validation_redraw": cfg.redraw_validation,
            "validation_mode": cfg.validation_mode,
        },
    )


def run_shell_mass(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """Fraction of uniform class-ball draws in the epsilon-shell, against ``1 - (1 - eps/r_A)^n``."""
    if cfg.experiment != "shell_mass":
        raise ConfigError({"experiment": "expected shell_mass"})
    cfg.validate()
    region = _region(cfg)
    eps = float(cfg.epsilon)
    inner_r2 = (region.r_A - eps) ** 2

    def work(k, rng, size):
        X = sample_uniform_ball(cfg.n, region.r_A, region.x_A, rng=rng, size=size)
        D = X - region.x_A
        return {"hits": int(np.count_nonzero(np.einsum("ij,ij->i", D, D) > inner_r2))}

    hits = sum(p["hits"] for p in _run_blocks(cfg.seed, cfg.trials, work, workers))
    closed = 1.0 - math.pow(1.0 - eps / region.r_A, cfg.n)
    emp = hits / cfg.trials
    se = binomial_se(closed, cfg.trials)
    verdict = "pass" if abs(emp - closed) <= 3.0 * se else "fail"
    return _make_report(cfg, hits, closed, verdict, epsilon=eps, reference=closed,
                        details={"r_A": region.r_A, "se": se})


def run_theorem1_check(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """SmAC draws through the ball classifier; counts class-A points with a verified witness."""
    if cfg.experiment != "theorem1_check":
        raise ConfigError({"experiment": "expected theorem1_check"})
    cfg.validate()
    region = _region(cfg)
    F = region.classifier()
    q = AdversarialQuery(float(cfg.epsilon), cfg.n)
    reach = q.epsilon + region.Delta

    def work(k, rng, size):
        X, is_A = sample_smac(region, rng, size)
        XA = X[is_A]
        mask, Y = admits_adversarial_many(F, region, XA, q)
        Xm, Ym = XA[mask], Y[mask]
        dist = np.sqrt(np.einsum("ij,ij->i", Ym - Xm, Ym - Xm))
        flips = F.classify_many(Xm) != F.classify_many(Ym) if len(Xm) else np.zeros(0, dtype=bool)
        ok = (dist <= reach) & flips
        # class-A points outside the region would contradict the sampler
        return {
            "admits": int(mask.sum()),
            "class_A": int(is_A.sum()),
            "witness_failures": int((~ok).sum()),
            "max_witness_distance": float(dist.max()) if len(dist) else 0.0,
        }

    parts = _run_blocks(cfg.seed, cfg.trials, work, workers)
    admits = sum(p["admits"] for p in parts)
    failures = sum(p["witness_failures"] for p in parts)
    if failures:
        raise GuaranteeViolation(
            f"{failures} witnesses failed the distance or label-flip check", {"config": cfg.to_dict()}
        )
    bound = theorem1_bound(region, q)
    reference = region.P_A * (1.0 - math.pow(1.0 - q.epsilon / region.r_A, cfg.n))
    verdict = lower_bound_verdict(admits / cfg.trials, bound, cfg.trials)
    return _make_report(
        cfg, admits, bound, verdict, epsilon=q.epsilon, reference=reference,
        details={
            "class_A": sum(p["class_A"] for p in parts),
            "witness_failures": 0,
            "max_witness_distance": max(p["max_witness_distance"] for p in parts),
            "reach": reach,
            "se_reference": binomial_se(reference, cfg.trials),
        },
    )


RUNNERS = {
    "stealth_success": run_stealth_success,
    "shell_mass": run_shell_mass,
    "theorem1_check": run_theorem1_check,
}


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[ExperimentReport]:
    if cfg.experiment != "sweep":
        raise ConfigError({"experiment": "expected sweep"})
    cfg.validate()
    runner = RUNNERS[cfg.base_experiment]
    return [runner(cell, workers) for cell in cfg.cells()]


def run(cfg: ExperimentConfig, workers: int | None = None) -> list[ExperimentReport]:
    if cfg.experiment == "sweep":
        return run_sweep(cfg, workers)
    return [RUNNERS[cfg.experiment](cfg, workers)]
