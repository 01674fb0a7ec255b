"""Command-line front end: ``stealth-attacks {attack,verify,bounds,experiment,sweep}``.

Exit codes: 0 success, 1 a verdict failed, 2 usage or config error, 3 a guarantee was
violated (a counterexample dump is written next to the output).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from stealth_attacks import activations as act
from stealth_attacks import harness
from stealth_attacks.activations import ActivationKind
from stealth_attacks.adversarial import (
    critical_dimension_for,
    sample_bound_over_N,
    shell_bound,
    shell_bound_exponential,
)
from stealth_attacks.backbone import ConstantMap, ModelFormatError, load_model
from stealth_attacks.geometry import sample_uniform_ball, substream
from stealth_attacks.stealth import (
    AttackSpec,
    GuaranteeViolation,
    ValidationSet,
    construct_attack,
    load_attack,
    save_attack,
    success_probability_bound,
    verify_stealth,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VIOLATION = 3


class UsageError(Exception):
    pass


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None


def _emit(text: str, out: str | None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _activation(tag: str, a: float | None) -> ActivationKind:
    if tag == act.SIGMOID_DIFF_BELL:
        if a is None:
            raise UsageError("--a is required for sigmoid_diff_bell")
        return ActivationKind(tag, a)
    return ActivationKind(tag)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


# -- attack / verify ----------------------------------------------------------

def cmd_attack(args) -> int:
    if args.trigger == "random":
        if args.n is None or args.seed is None:
            raise UsageError("--trigger random needs --n and --seed")
        x_prime = sample_uniform_ball(args.n, 1.0, rng=substream(args.seed))
    else:
        data = _read_json(args.trigger)
        x_prime = np.asarray(data["x_prime"] if isinstance(data, dict) else data, dtype=np.float64)
        if args.n is not None and x_prime.shape[0] != args.n:
            raise UsageError(f"trigger has dimension {x_prime.shape[0]}, --n says {args.n}")
    kind = _activation(args.activation, args.a)
    try:
        spec = AttackSpec(x_prime, args.gamma, args.epsilon, args.delta, kind)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    params = construct_attack(spec)
    extra = {"x_prime": spec.x_prime.tolist(), "epsilon": spec.epsilon, "delta": spec.delta}
    if args.out:
        save_attack(params, args.out, extra)
    else:
        d = params.to_dict()
        d.update(extra)
        sys.stdout.write(json.dumps(d, indent=2) + "\n")
    sys.stderr.write(
        f"kappa={params.kappa!r} D={params.D!r} b={params.b!r}\n"
        f"note: the attacked map's empirical Lipschitz constant over x' and any separated "
        f"point is at least (delta - epsilon)/2 = {(spec.delta - spec.epsilon) / 2.0!r}\n"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    params, raw = load_attack(args.attack)
    for key in ("epsilon", "delta"):
        if key not in raw:
            raise UsageError(f"{args.attack}: attack file lacks '{key}' (write it with the attack command)")
    x_prime = np.asarray(raw.get("x_prime", params.trigger.tolist()), dtype=np.float64)
    spec = AttackSpec(x_prime, params.gamma, raw["epsilon"], raw["delta"], params.activation)
    pts = _read_json(args.validation)
    pts = pts["points"] if isinstance(pts, dict) else pts
    V = ValidationSet(np.asarray(pts, dtype=np.float64).reshape(-1, params.n))
    F = load_model(args.model) if args.model else ConstantMap(params.n)
    report = verify_stealth(F, params, spec, V)
    _emit(json.dumps(report.to_dict(), indent=2, sort_keys=True), args.out)
    return EXIT_OK


# -- bounds -------------------------------------------------------------------

def cmd_bounds(args) -> int:
    rows = []
    which = args.which or ["theorem1", "theorem1_exp", "critical", "theorem2"]
    for name in which:
        if name in ("theorem1", "theorem1_exp", "sample"):
            if not 0 < args.eps_ratio < 1:
                raise UsageError("--eps-ratio must lie in (0, 1)")
            if not (0 < args.nu <= 1 and args.C > 0 and 0 < args.P_A <= 1):
                raise UsageError("need 0 < nu <= 1, C > 0, 0 < P_A <= 1")
            for n in args.n:
                if n < 1:
                    raise UsageError("--n must be positive")
                if name == "theorem1":
                    v = shell_bound(args.P_A, args.nu, args.C, args.eps_ratio, n)
                elif name == "theorem1_exp":
                    v = shell_bound_exponential(args.P_A, args.nu, args.C, args.eps_ratio, n)
                else:
                    v = sample_bound_over_N(shell_bound(args.P_A, args.nu, args.C, args.eps_ratio, n), args.N)
                rows.append({"bound": name, "n": n, "value": v})
        elif name == "critical":
            if not 0 < args.eps_ratio < 1 or not 0 < args.nu <= 1 or not args.C > 0:
                raise UsageError("need 0 < eps-ratio < 1, 0 < nu <= 1, C > 0")
            rows.append({"bound": name, "n": "", "value": critical_dimension_for(args.nu, args.C, args.eps_ratio)})
        elif name == "theorem2":
            for n in args.n:
                for M in args.M:
                    for g in args.gamma:
                        try:
                            v = success_probability_bound(M, g, n)
                        except ValueError as exc:
                            raise UsageError(str(exc)) from None
                        rows.append({"bound": name, "n": n, "M": M, "gamma": g, "value": v})
    if args.format == "json":
        _emit(json.dumps(rows, indent=2), args.out)
        return EXIT_OK
    lines = ["bound,n,M,gamma,nu,C,P_A,eps_ratio,value"]
    for r in rows:
        t1 = r["bound"] != "theorem2"
        v = r["value"]
        lines.append(",".join(str(x) for x in (
            r["bound"], r["n"], r.get("M", ""), r.get("gamma", ""),
            args.nu if t1 else "", args.C if t1 else "", args.P_A if r["bound"] != "critical" and t1 else "",
            args.eps_ratio if t1 else "",
            v if isinstance(v, int) else f"{v:.6g}",
        )))
    _emit("\n".join(lines), args.out)
    return EXIT_OK


# -- experiment / sweep -------------------------------------------------------

_FLAG_FIELDS = ("n", "M", "gamma", "epsilon", "delta", "trials", "seed", "validation_mode", "base_experiment")


def _config_from_args(args, sweep: bool) -> harness.ExperimentConfig:
    if args.config:
        data = _read_json(args.config)
        if not isinstance(data, dict):
            raise UsageError(f"{args.config}: config must be a JSON object")
    else:
        data = {"experiment": "sweep" if sweep else args.experiment}
    for name in _FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            data[name] = v
    if args.activation is not None:
        data["activation"] = args.activation
    if args.a is not None:
        data["a"] = args.a
    if args.redraw_validation:
        data["redraw_validation"] = True
    if args.region is not None:
        data["region"] = _read_json(args.region)
    if sweep and data.get("experiment") in harness.RUNNERS:
        data.setdefault("base_experiment", data["experiment"])
        data["experiment"] = "sweep"
    try:
        return harness.ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise UsageError(f"invalid config: {exc}") from None


def _run_experiment(args, sweep: bool) -> int:
    cfg = _config_from_args(args, sweep)
    try:
        reports = harness.run(cfg, workers=args.workers)
    except GuaranteeViolation as exc:
        dump = Path(args.out + ".counterexample.json") if args.out else Path("counterexample.json")
        dump.write_text(json.dumps({"message": str(exc), **exc.data}, indent=2, default=str) + "\n")
        sys.stderr.write(f"GUARANTEE VIOLATION: {exc}; reproduction data in {dump}\n")
        return EXIT_VIOLATION
    text = harness.reports_to_csv(reports) if args.format == "csv" else harness.reports_to_json(reports)
    _emit(text, args.out)
    for r in reports:
        sys.stderr.write(f"{r.experiment} n={r.n} empirical={r.empirical:.6g} bound={r.bound:.6g} verdict={r.verdict}\n")
    return EXIT_OK if all(r.verdict in ("pass", "vacuous") for r in reports) else 1


def cmd_experiment(args) -> int:
    return _run_experiment(args, sweep=False)


def cmd_sweep(args) -> int:
    return _run_experiment(args, sweep=True)


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stealth-attacks",
        description="Construct one-neuron stealth attacks, evaluate bounds, run Monte Carlo checks.",
        epilog="exit codes: 0 ok, 1 a verdict failed, 2 usage/config error, 3 guarantee violated",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=False):
        sp.add_argument("--seed", type=int, required=seed_required, help="unsigned 64-bit seed")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    a = sub.add_parser("attack", help="solve the one-neuron attack parameters for a trigger")
    a.add_argument("--trigger", required=True, help="JSON file with the trigger coordinates, or 'random'")
    a.add_argument("--n", type=int)
    a.add_argument("--gamma", type=float, default=0.9)
    a.add_argument("--epsilon", type=float, default=0.0)
    a.add_argument("--delta", type=float, default=1.0)
    a.add_argument("--activation", choices=act.TAGS, default=act.RELU)
    a.add_argument("--a", type=float, help="shift for sigmoid_diff_bell")
    common(a)
    a.set_defaults(func=cmd_attack)

    v = sub.add_parser("verify", help="check an attack against a validation set")
    v.add_argument("--attack", required=True, help="attack file written by the attack command")
    v.add_argument("--validation", required=True, help="JSON list of validation points")
    v.add_argument("--model", help="backbone model file (default: the zero map)")
    common(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bounds", help="evaluate the closed-form bounds")
    b.add_argument("--which", action="append",
                   choices=("theorem1", "theorem1_exp", "critical", "sample", "theorem2"))
    b.add_argument("--n", type=_int_list, default=[10])
    b.add_argument("--nu", type=float, default=1.0)
    b.add_argument("--C", type=float, default=1.0)
    b.add_argument("--P-A", dest="P_A", type=float, default=1.0)
    b.add_argument("--eps-ratio", type=float, default=0.1, help="epsilon / r_A")
    b.add_argument("--N", type=int, default=1, help="sample size for the 'sample' bound")
    b.add_argument("--M", type=_int_list, default=[100])
    b.add_argument("--gamma", type=_float_list, default=[0.9])
    common(b)
    b.set_defaults(func=cmd_bounds)

    for name, is_sweep in (("experiment", False), ("sweep", True)):
        e = sub.add_parser(name, help=f"run a Monte Carlo {name}")
        e.add_argument("--config", help="JSON experiment config; flags override its fields")
        if not is_sweep:
            e.add_argument("--experiment", choices=harness.KINDS[:3], default="stealth_success")
        else:
            e.add_argument("--base-experiment", dest="base_experiment", choices=harness.KINDS[:3])
        conv_i = _int_list if is_sweep else int
        conv_f = _float_list if is_sweep else float
        e.add_argument("--n", type=conv_i)
        e.add_argument("--M", type=conv_i)
        e.add_argument("--gamma", type=conv_f)
        e.add_argument("--epsilon", type=conv_f)
        e.add_argument("--delta", type=conv_f)
        e.add_argument("--activation", choices=act.TAGS)
        e.add_argument("--a", type=float)
        e.add_argument("--trials", type=int)
        e.add_argument("--validation-mode", dest="validation_mode", choices=("uniform", "boundary"))
        e.add_argument("--redraw-validation", action="store_true")
        e.add_argument("--region", help="SmAC region JSON file")
        e.add_argument("--workers", type=int, default=1, help="threads; 0 = all cores")
        common(e)
        e.set_defaults(func=cmd_sweep if is_sweep else cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, harness.ConfigError, ModelFormatError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
