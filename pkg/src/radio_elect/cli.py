"""radio-elect: simulate, analyze, sweep and verify from the command line.

Exit status: 0 success, 1 usage error, 2 runtime error, 3 failed verification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import acceptance, analysis, harness
from .protocols import Protocol, ProtocolParams

DEFAULT_ALPHA = {Protocol.ALG1: 1.3361, Protocol.ALG2: 1.3295}
DEFAULT_TRIALS = 1000
COST_POINTS = 50

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    command: str
    protocol: Protocol = Protocol.ALG1
    n: tuple = ()
    alpha: tuple = ()
    k_start: int = 1
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    output_format: str = "csv"
    output_path: Optional[str] = None
    max_rounds: int = 64
    target: Optional[str] = None  # analyze: "constants" or "cost"
    q: Optional[float] = None
    points: int = COST_POINTS
    summary: bool = False
    quick: bool = False
    only: Optional[tuple] = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> tuple:
    out = []
    for part in text.split(","):
        part = part.strip()
        try:
            if "^" in part:
                base, exp = part.split("^")
                out.append(int(base) ** int(exp))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer or base^exp: {part!r}") from None
    return tuple(out)


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def _criteria(text: str) -> tuple:
    picked = set()
    for part in text.split(","):
        try:
            lo, _, hi = part.partition("-")
            picked.update(range(int(lo), int(hi or lo) + 1))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad criterion list: {text!r}") from None
    unknown = picked - set(acceptance.CRITERIA)
    if unknown:
        raise argparse.ArgumentTypeError(f"no such criteria: {sorted(unknown)}")
    return tuple(sorted(picked))


def _add_run_options(p: argparse.ArgumentParser, many: bool) -> None:
    p.add_argument("--protocol", choices=[x.value for x in Protocol], default="alg1")
    p.add_argument("--n", type=_int_list, required=True,
                   help="station count" + ("s, comma separated (2^k allowed)" if many else " (2^k allowed)"))
    p.add_argument("--alpha", type=_float_list, default=None,
                   help="round growth factor" + ("s, comma separated" if many else "")
                   + "; default 1.3361 for alg1, 1.3295 for alg2")
    p.add_argument("--k-start", type=int, default=1)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-rounds", type=int, default=64)


def _add_output_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", dest="output_format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", dest="output_path", default=None, help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radio-elect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run independent elections, one row per trial")
    _add_run_options(sim, many=False)
    _add_output_options(sim)
    sim.add_argument("--summary", action="store_true", help="emit one aggregated row instead")

    ana = sub.add_parser("analyze", help="analytic constants and the cost function")
    ana.add_argument("target", choices=("constants", "cost"))
    ana.add_argument("--q", type=float, default=None, help="success bound q for 'cost'")
    ana.add_argument("--points", type=int, default=COST_POINTS, help="curve samples for 'cost'")
    _add_output_options(ana)

    swp = sub.add_parser("sweep", help="measured means against predictions over n x alpha")
    _add_run_options(swp, many=True)
    _add_output_options(swp)

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--quick", action="store_true", help="small trial counts (smoke test only)")
    ver.add_argument("--only", type=_criteria, default=None, help="criteria to run, e.g. 1-4,7")
    ver.add_argument("--output", dest="output_path", default=None)
    return parser


def parse_args(argv: Sequence[str]) -> CliConfig:
    ns = build_parser().parse_args(list(argv))
    fields = {k: v for k, v in vars(ns).items() if k in CliConfig.__dataclass_fields__}
    if ns.command == "analyze":
        fields["target"] = ns.target
    if "protocol" in fields:
        fields["protocol"] = Protocol(fields["protocol"])
    config = CliConfig(**fields)
    _validate(config)
    if config.command in ("simulate", "sweep") and not config.alpha:
        config = CliConfig(**{**asdict(config), "alpha": (DEFAULT_ALPHA[config.protocol],)})
    return config


def _validate(c: CliConfig) -> None:
    if c.command in ("simulate", "sweep"):
        if c.command == "simulate" and (len(c.n) != 1 or (c.alpha and len(c.alpha) != 1)):
            raise UsageError("simulate takes a single --n and --alpha; use sweep for lists")
        if any(n < 2 for n in c.n):
            raise UsageError(f"--n must be >= 2, got {min(c.n)}")
        if any(not (math.isfinite(a) and a > 1) for a in c.alpha or ()):
            raise UsageError("--alpha must be a finite number > 1")
        if c.trials < 1:
            raise UsageError(f"--trials must be >= 1, got {c.trials}")
        if c.k_start < 1:
            raise UsageError(f"--k-start must be >= 1, got {c.k_start}")
        if c.max_rounds < 1:
            raise UsageError(f"--max-rounds must be >= 1, got {c.max_rounds}")
        if not 0 <= c.seed < 2 ** 64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
    if c.command == "analyze" and c.target == "cost":
        if c.q is None:
            raise UsageError("analyze cost needs --q")
        if not 0 < c.q <= 1:
            raise UsageError(f"--q must lie in (0, 1], got {c.q}")
        if c.points < 1:
            raise UsageError("--points must be >= 1")


def _value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.6g}") if math.isfinite(x) else None
    return x


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    return str(x)


def render(rows: list[dict], output_format: str) -> str:
    if output_format == "json":
        body = ",\n".join(json.dumps({k: _value(v) for k, v in r.items()}) for r in rows)
        return f"[\n{body}\n]\n" if rows else "[]\n"
    buf = io.StringIO()
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(rows[0].keys())
        for r in rows:
            writer.writerow(_cell(v) for v in r.values())
    return buf.getvalue()


def _params(c: CliConfig, alpha: float) -> ProtocolParams:
    return ProtocolParams(alpha=alpha, protocol=c.protocol, k_start=c.k_start, max_rounds=c.max_rounds)


def simulate_rows(c: CliConfig) -> list[dict]:
    n, alpha = c.n[0], c.alpha[0]
    stats = harness.run_trials(harness.TrialConfig(_params(c, alpha), n, c.trials, c.seed))
    head = {"protocol": c.protocol.value, "alpha": alpha}
    if c.summary:
        return [{**head, **stats.summary()}]
    return [{**head, "n": n, "trial": i, **{f: r[f].item() for f in harness.TRIAL_FIELDS}}
            for i, r in enumerate(stats.records)]


def constants_rows() -> list[dict]:
    return [asdict(analysis.series_constants())]


def cost_rows(q: float, points: int) -> list[dict]:
    alpha_star, c_star = analysis.optimal_alpha(q)
    top = analysis.alpha_max(q)
    hi = top if math.isfinite(top) else 10.0
    alphas = np.linspace(1, hi, points + 2)[1:-1]
    return [{"q": q, "alpha": a, "c": analysis.c_of_alpha(q, a), "alpha_star": alpha_star,
             "c_star": c_star, "alpha_max": top} for a in alphas]


def sweep_rows(c: CliConfig) -> list[dict]:
    return harness.sweep(c.n, c.alpha, c.protocol, c.trials, c.seed, c.k_start, c.max_rounds)


def execute(c: CliConfig, out=None) -> int:
    """Run a parsed command, writing its output; returns the exit status."""
    out = out or sys.stdout
    if c.command == "verify":
        lines = []
        results = acceptance.run(c.only, c.quick, emit=lines.append)
        failed = [r.number for r in results if not r.passed]
        lines.append(f"{len(results) - len(failed)}/{len(results)} criteria passed"
                     + (f"; failed: {', '.join(map(str, failed))}" if failed else ""))
        _emit("\n".join(lines) + "\n", c.output_path, out)
        return EXIT_VERIFY if failed else EXIT_OK

    if c.command == "simulate":
        rows = simulate_rows(c)
    elif c.command == "sweep":
        rows = sweep_rows(c)
    elif c.target == "constants":
        rows = constants_rows()
    else:
        rows = cost_rows(c.q, c.points)
    _emit(render(rows, c.output_format), c.output_path, out)
    return EXIT_OK


def _emit(text: str, path: Optional[str], out) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)
        out.flush()


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    try:
        return execute(config)
    except Exception as err:  # noqa: BLE001 - every runtime failure maps to one exit code
        print(f"radio-elect: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
