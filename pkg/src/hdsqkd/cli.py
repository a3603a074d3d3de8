"""Command-line entry point: ``hdsqkd {sweep,tolerance,simulate,verify}``.

Exit codes: 0 success, 1 bad arguments, 2 numerical or capacity failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import attacks, keyrate_analysis as ka, protocol_sim as sim

SCHEMA = 1
CSV_HEADER = "n,Q,QF,delta,h_ab_z,h_af,penalty,keyrate"


class ArgumentError(Exception):
    pass


class NumericalError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_n_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid n list {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"n values must be positive integers, got {text!r}")
    return values


def parse_q_range(text: str) -> list[float]:
    """``start:stop:step``; stop is included when it lands on the grid within 1e-12."""
    try:
        start, stop, step = (float(tok) for tok in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
    if step <= 0:
        raise argparse.ArgumentTypeError("q step must be positive")
    if not (0 <= start < 0.5 and 0 <= stop < 0.5) or stop < start:
        raise argparse.ArgumentTypeError(f"q range must satisfy 0 <= start <= stop < 0.5, got {text!r}")
    m = (stop - start) / step
    k_max = round(m) if abs(start + round(m) * step - stop) <= 1e-12 else math.floor(m)
    return [round(start + k * step, 12) for k in range(k_max + 1)]


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else f"{v:.9g}"


def sweep_csv(points: list[ka.KeyRatePoint]) -> str:
    lines = [CSV_HEADER]
    for p in points:
        vals = (p.n, p.Q, p.Q_F, p.delta, p.h_ab_z, p.h_af, p.continuity_penalty, p.keyrate)
        lines.append(",".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with io.open(fd, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_n(ns, limit: int, what: str) -> None:
    for n in ns:
        if n > limit:
            raise ArgumentError(f"{what} supports n <= {limit}, got {n}")


def cmd_sweep(args) -> int:
    _check_n(args.n, ka.MAX_N, "sweep")
    points = ka.sweep(args.n, args.scenario, args.q)
    if any(not math.isfinite(v) for p in points for v in p.as_dict().values()):
        raise NumericalError("non-finite value in sweep")
    if args.format == "csv":
        text = sweep_csv(points)
    else:
        rows = [{**p.as_dict()} for p in points]
        text = _dumps({"schema": SCHEMA, "scenario": args.scenario, "rows": rows})
    _emit(text, args.output)
    return 0


def cmd_tolerance(args) -> int:
    _check_n(args.n, ka.MAX_N, "tolerance")
    out, ok = [], False
    for n in sorted(set(args.n)):
        try:
            res = ka.noise_tolerance(n, args.scenario)
        except ka.ToleranceError as exc:
            out.append({"schema": SCHEMA, "n": n, "scenario": args.scenario, "error": str(exc)})
            continue
        ok = True
        out.append({"schema": SCHEMA, **res.as_dict()})
    _emit(_dumps(out), args.output)
    return 0 if ok else 2


def _make_attack(kind: str, n: int, q: float, rng=None) -> attacks.CollectiveAttack:
    if kind == "identity":
        return attacks.identity_attack(n)
    if kind == "weyl":
        return attacks.weyl_dilation_attack(n, q)
    if kind == "measure-resend":
        return attacks.measure_resend_attack(n, q)
    if kind == "random":
        return attacks.random_attack(n, rng)
    raise ArgumentError(f"unknown attack {kind!r}")


def cmd_simulate(args) -> int:
    if args.n > sim.MAX_MC_N:
        raise sim.CapacityError(f"simulate supports n <= {sim.MAX_MC_N}")
    if args.attack == "random":
        raise ArgumentError("simulate takes identity, weyl or measure-resend")
    attack = _make_attack(args.attack, args.n, args.q)
    config = sim.ProtocolConfig(args.n, args.p_m, args.p_z, args.seed, args.iters)
    if args.protocol == "sqkd":
        res = sim.run_sqkd(config, attack)
    elif args.protocol == "ent":
        res = sim.run_ent(config, attack)
    else:
        res = sim.run_ow(config, attacks.reduce_attack(attack))
    stats = res.stats
    try:
        q_hat, qf_hat = sim.estimate_noise(stats)
    except ValueError:
        q_hat = qf_hat = None
    payload = {
        "schema": SCHEMA,
        "protocol": args.protocol,
        "n": args.n,
        "attack": attack.describe(),
        "seed": args.seed,
        "iterations": args.iters,
        "p_m": args.p_m,
        "p_z": args.p_z,
        "key_iterations": int(stats.key_counts.sum()),
        "p_abc": stats.p_abc.tolist(),
        "p_b": stats.p_b.tolist(),
        "p_f": stats.p_f.tolist(),
        "q_hat": q_hat,
        "q_f_hat": qf_hat,
        "raw_key_length": res.raw_key_bits,
        "raw_key_error_rate": res.raw_key_error_rate,
    }
    _emit(_dumps(payload), args.output)
    return 0


def cmd_verify(args) -> int:
    if args.n > 2:
        raise sim.CapacityError("verify supports n <= 2")
    if args.attack == "random":
        rng = np.random.default_rng(args.seed)
        reports = [sim.verify_reduction(_make_attack("random", args.n, 0.0, rng)) for _ in range(args.count)]
        passed = sum(r.passed for r in reports)
        payload = {
            "schema": SCHEMA,
            "attack_descriptor": {"kind": "random", "n": args.n, "count": args.count, "seed": args.seed},
            "max_trace_distance": max(r.max_trace_distance for r in reports),
            "threshold": sim.REDUCTION_TOL,
            "passed_count": passed,
            "pass": passed == len(reports),
            "reports": [r.as_dict() for r in reports],
        }
    else:
        payload = {"schema": SCHEMA, **sim.verify_reduction(_make_attack(args.attack, args.n, args.q)).as_dict()}
    _emit(_dumps(payload), args.output)
    return 0 if payload["pass"] else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hdsqkd", description="High-dimensional semi-quantum key distribution toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, formats=False):
        p.add_argument("--output", "-o", help="write here instead of stdout")
        if formats:
            p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("sweep", help="key-rate table over n and Q")
    p.add_argument("--n", type=parse_n_list, required=True, help="comma-separated qubit counts")
    p.add_argument("--scenario", choices=[s.value for s in ka.Scenario], default="dependent")
    p.add_argument("--q", type=parse_q_range, default=parse_q_range("0:0.35:0.005"), help="start:stop:step")
    common(p, formats=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tolerance", help="noise threshold per n")
    p.add_argument("--n", type=parse_n_list, required=True)
    p.add_argument("--scenario", choices=[s.value for s in ka.Scenario], default="dependent")
    common(p)
    p.set_defaults(func=cmd_tolerance)

    attack_choices = ["identity", "weyl", "measure-resend", "random"]

    p = sub.add_parser("simulate", help="Monte Carlo run of a protocol under an attack")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--protocol", choices=["sqkd", "ent", "ow"], default="sqkd")
    p.add_argument("--attack", choices=attack_choices, default="weyl")
    p.add_argument("--q", type=float, default=0.0, help="attack noise parameter")
    p.add_argument("--iters", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-m", type=float, default=0.5)
    p.add_argument("--p-z", type=float, default=0.5)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check the one-way reduction on concrete attacks")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--attack", choices=attack_choices, default="identity")
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ArgumentError, ValueError) as exc:
        print(f"hdsqkd: error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, sim.CapacityError, attacks.ReductionError, np.linalg.LinAlgError) as exc:
        print(f"hdsqkd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
