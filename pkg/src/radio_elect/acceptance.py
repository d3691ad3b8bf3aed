"""The acceptance suite behind ``radio-elect verify``.

Each criterion returns a ``CriterionResult`` made of individual checks. The
rendered report contains numbers only (no timings, no paths), so two runs
with the same code produce identical text.

``quick=True`` shrinks the Monte Carlo trial counts; it exists for smoke
tests and the determinism criterion, never for judging the other criteria.
"""

from __future__ import annotations

import math
import os
import subprocess
import sys
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import analysis
from .errors import IllegalAction, ProtocolViolation
from .harness import TrialConfig, dominance_check, lower_bound_sequence, run_trials
from .protocols import Protocol, ProtocolParams


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6g}"


@dataclass(frozen=True)
class Check:
    name: str
    value: object
    expect: str
    ok: bool

    def render(self) -> str:
        return f"    {'ok  ' if self.ok else 'FAIL'} {self.name} = {fmt(self.value)}  [{self.expect}]"


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.ok for c in self.checks)

    def near(self, name: str, value: float, target: float, tol: float) -> None:
        self.checks.append(Check(name, value, f"{fmt(target)} +- {fmt(tol)}", abs(value - target) <= tol))

    def at_most(self, name: str, value: float, bound: float) -> None:
        self.checks.append(Check(name, value, f"<= {fmt(bound)}", value <= bound))

    def within(self, name: str, value: float, lo: float, hi: float) -> None:
        self.checks.append(Check(name, value, f"in [{fmt(lo)}, {fmt(hi)}]", lo <= value <= hi))

    def equals(self, name: str, value, target) -> None:
        self.checks.append(Check(name, value, f"== {fmt(target)}", value == target))

    def headline(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number}. {self.title}"

    def render(self) -> str:
        return "\n".join([self.headline()] + [c.render() for c in self.checks])


def _mc_band(name: str, res: CriterionResult, freq: float, p: float, trials: int) -> None:
    sigma = math.sqrt(p * (1 - p) / trials)
    res.checks.append(Check(name, freq, f"{fmt(p)} +- 3 sigma ({fmt(3 * sigma)})",
                            abs(freq - p) <= 3 * sigma))


def constants(quick: bool = False) -> CriterionResult:
    res = CriterionResult(1, "series constants")
    c = analysis.series_constants()
    res.near("s_inf_alg1", c.s_inf_alg1, 0.188209, 1e-5)
    res.near("s_inf_alg2", c.s_inf_alg2, 0.462, 1e-3)
    res.near("sum_S4", c.sum_S4, 0.8274, 5e-4)
    res.near("q1", c.q1, 0.6305, 1e-3)
    res.near("q2", c.q2, 0.6176, 1e-3)
    return res


def cost_function(quick: bool = False) -> CriterionResult:
    res = CriterionResult(2, "cost function c_q(alpha)")
    res.near("c(0.6305, 1.3361)", analysis.c_of_alpha(0.6305, 1.3361), 8.837, 0.01)
    a, c = analysis.optimal_alpha(0.6305)
    res.near("alpha_opt(0.6305)", a, 1.3361, 1e-3)
    res.near("c_opt(0.6305)", c, 8.837, 1e-2)
    res.near("c(0.6176, 1.3295)", analysis.c_of_alpha(0.6176, 1.3295), 8.96, 0.01)
    res.near("alpha_max(0.6305)", analysis.alpha_max(0.6305), 2.707, 1e-2)
    res.near("alpha_max(0.6176)", analysis.alpha_max(0.6176), 2.61, 1e-2)
    return res


def harmonic_sums(quick: bool = False) -> CriterionResult:
    res = CriterionResult(3, "harmonic sums at n = 2^20")
    res.near("lemma1_sum(2^20, 60)", analysis.lemma1_sum(2 ** 20, 60), 1 / analysis.LN2, 1e-4)
    for m in range(1, 6):
        res.near(f"lemma2_sum(2^20, {m}, 1, 60)", analysis.lemma2_sum(2 ** 20, m, 1, 60),
                 analysis.lemma2_constant(m), 1e-3)
    return res


def finite_n_bounds(quick: bool = False) -> CriterionResult:
    res = CriterionResult(4, "finite-n round bounds at j = j* + 1, alpha = 1.3361")
    alpha = 1.3361
    for e in range(10, 21, 2):
        j = analysis.j_star(2 ** e, alpha) + 1
        p, s = analysis.p_round_alg1_formula(2 ** e, j, alpha)
        res.at_most(f"s_{j}(2^{e})", s, 0.19)
        res.at_most(f"p_{j}(2^{e})", p, 0.37)
    return res


def oracle_agreement(quick: bool = False) -> CriterionResult:
    res = CriterionResult(5, "exact oracles against formula and simulation")
    res.equals("exact_alg1(2, 1, 2)", analysis.exact_round_success_alg1(2, 1, 2.0, 1), 0.59375)
    worst = math.inf
    for n in (2, 4, 8, 16):
        for j in range(1, 6):
            for alpha in (1.3361, 2.0):
                gap = (analysis.exact_round_success_alg1(n, j, alpha)
                       - analysis.p_round_alg1_formula(n, j, alpha)[0])
                worst = min(worst, gap)
    res.checks.append(Check("min(exact - formula p_j)", worst, ">= 0", worst >= 0))

    trials = 2_000 if quick else 100_000
    for protocol, exact in ((Protocol.ALG1, analysis.exact_round_success_alg1),
                            (Protocol.ALG2, analysis.exact_round_success_alg2)):
        stats = run_trials(TrialConfig(ProtocolParams(2.0, protocol), 2, trials, master_seed=1))
        _mc_band(f"{protocol.value} round-1 freq (n=2, alpha=2)", res,
                 stats.round1_success_freq, exact(2, 1, 2.0, 1), trials)
    return res


SAFETY_SIZES = (2, 3, 8, 64, 1024)
SAFETY_ALPHAS = (1.3361, 1.5, 2.0)


def safety(quick: bool = False) -> CriterionResult:
    res = CriterionResult(6, "safety over mixed configurations")
    cells = [(p, n, a) for p in Protocol for n in SAFETY_SIZES for a in SAFETY_ALPHAS]
    total = 300 if quick else 100_000
    per_cell = -(-total // len(cells))
    runs = bad_leaders = uninformed = illegal = violations = unfinished = 0
    for i, (protocol, n, alpha) in enumerate(cells):
        params = ProtocolParams(alpha, protocol, max_rounds=64)
        try:
            stats = run_trials(TrialConfig(params, n, per_cell, master_seed=1000 + i))
        except IllegalAction:
            illegal += 1
            continue
        except ProtocolViolation:
            violations += 1
            continue
        rec = stats.records
        done = rec["terminated"]
        runs += len(rec)
        unfinished += int((~done).sum())
        bad_leaders += int((rec["leaders"][done] != 1).sum())
        uninformed += int((rec["informed"][done] != n).sum())
    res.checks.append(Check("trials", runs, f">= {total}", runs >= total))
    res.equals("runs without exactly one leader", bad_leaders, 0)
    res.equals("runs with uninformed stations", uninformed, 0)
    res.equals("weak-model legality violations", illegal, 0)
    res.equals("engine safety violations", violations, 0)
    res.equals("unterminated runs (max_rounds = 64)", unfinished, 0)
    return res


def scaling(quick: bool = False) -> CriterionResult:
    res = CriterionResult(7, "scaling ratios at desk scale")
    exponents = (8, 12) if quick else (8, 12, 16, 20)
    trials = 20 if quick else 1_000
    for protocol, alpha in ((Protocol.ALG1, 1.3361), (Protocol.ALG2, 1.3295)):
        c = analysis.c_of_alpha(analysis.protocol_q(protocol), alpha)
        ratios = []
        for i, e in enumerate(exponents):
            n = 2 ** e
            stats = run_trials(TrialConfig(ProtocolParams(alpha, protocol), n, trials, master_seed=7 + i))
            res.at_most(f"{protocol.value} mean slots / (c log2 n), n=2^{e}",
                        stats.mean_probabilistic_slots / (c * e), 1.0)
            ratio = stats.mean_awake_max / analysis.awake_reference(protocol, n, alpha)
            res.within(f"{protocol.value} awake_max / reference, n=2^{e}", ratio, 0.5, 1.5)
            ratios.append(ratio)
        drift = np.abs(np.diff(ratios))
        shrinking = bool(np.all(np.diff(drift) <= 0))
        res.checks.append(Check(f"{protocol.value} ratio drifts shrink",
                                shrinking, " ".join(fmt(d) for d in drift), shrinking))
    return res


DOMINANCE_ROUNDS = 30


def dominance(quick: bool = False) -> CriterionResult:
    res = CriterionResult(8, "first-success coupling, n = 2^10, alpha = 1.3361")
    n, alpha = 2 ** 10, 1.3361
    upper = [1 - analysis.p_round_alg1_formula(n, j, alpha)[1] for j in range(1, DOMINANCE_ROUNDS + 1)]
    lower = lower_bound_sequence(analysis.Q1, n, alpha, DOMINANCE_ROUNDS)
    samples = 20_000 if quick else 1_000_000
    report = dominance_check(lower, upper, samples, seed=8)
    res.equals("samples", report.samples, samples)
    res.equals("coupling violations (K > H)", report.violations, 0)
    res.checks.append(Check("min_k cdf_K - cdf_H + 3 sigma", report.cdf_slack, ">= 0", report.cdf_dominates))
    res.checks.append(Check("mean H", report.mean_h, "reported", True))
    res.checks.append(Check("mean K", report.mean_k, "reported", True))
    return res


def _quick_verify_output(workers: str) -> bytes:
    env = dict(os.environ, RADIO_ELECT_WORKERS=workers)
    return subprocess.run(
        [sys.executable, "-m", "radio_elect", "verify", "--quick", "--only", "1-8"],
        env=env, capture_output=True, timeout=600).stdout


def determinism(quick: bool = False) -> CriterionResult:
    res = CriterionResult(9, "byte-identical verify output")
    first = _quick_verify_output("1")
    second = _quick_verify_output("2")
    res.checks.append(Check("quick verify output bytes", len(first), "non-empty", len(first) > 0))
    res.equals("identical across two runs (1 and 2 workers)", first == second, True)
    return res


CRITERIA: dict[int, Callable[[bool], CriterionResult]] = {
    1: constants,
    2: cost_function,
    3: harmonic_sums,
    4: finite_n_bounds,
    5: oracle_agreement,
    6: safety,
    7: scaling,
    8: dominance,
    9: determinism,
}


def run(selected: Optional[Iterable[int]] = None, quick: bool = False,
        emit: Optional[Callable[[str], None]] = None) -> list[CriterionResult]:
    results = []
    for number in sorted(set(selected) if selected is not None else CRITERIA):
        result = CRITERIA[number](quick)
        if emit is not None:
            emit(result.render())
        results.append(result)
    return results
