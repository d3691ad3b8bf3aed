"""Monte Carlo runner, parameter sweeps and the first-success coupling check.

Seeds
-----
Trial i of a run with master seed m uses ``trial_seed(m, i)``, the (i+1)-th
output of a splitmix64 generator started at m::

    z = (m + (i + 1) * 0x9E3779B97F4A7C15) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    seed = z ^ (z >> 31)

so every trial's randomness depends only on (m, i). Workers compute
disjoint blocks of trial indices; the per-trial results are reassembled in
index order before any reduction, which makes the statistics bit-identical
for every worker count.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import analysis
from .errors import ConfigInvalid, PreconditionError, RoundCapExceeded
from .protocols import Protocol, ProtocolParams, run_election

WORKERS_ENV = "RADIO_ELECT_WORKERS"
Z95 = 1.96

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, index: int) -> int:
    return splitmix64(master_seed + (index + 1) * _GAMMA)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigInvalid(f"{WORKERS_ENV} must be a positive integer, got {env!r}") from None
        if workers < 1:
            raise ConfigInvalid(f"{WORKERS_ENV} must be a positive integer, got {env!r}")
        return workers
    return os.cpu_count() or 1


@dataclass(frozen=True)
class TrialConfig:
    params: ProtocolParams
    n: int
    trials: int
    master_seed: int = 0
    workers: Optional[int] = None  # None: RADIO_ELECT_WORKERS or the CPU count

    def __post_init__(self):
        if not isinstance(self.params, ProtocolParams):
            raise ConfigInvalid("params must be a ProtocolParams")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigInvalid(f"n must be an integer >= 2, got {self.n}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigInvalid(f"trials must be a positive integer, got {self.trials}")
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed <= _MASK64:
            raise ConfigInvalid(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.workers is not None and (int(self.workers) != self.workers or self.workers < 1):
            raise ConfigInvalid(f"workers must be a positive integer, got {self.workers}")


@dataclass(frozen=True)
class Estimate:
    mean: float
    sd: float
    half_width: float

    @classmethod
    def of(cls, values: np.ndarray) -> Estimate:
        values = np.asarray(values, dtype=float)
        mean = float(values.mean())
        sd = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        return cls(mean, sd, Z95 * sd / math.sqrt(len(values)))


# one row per trial, in trial-index order; slot totals are float64 because a
# long run at large alpha exceeds 2**64 slots (exact up to 2**53)
TRIAL_FIELDS = ("seed", "rounds_used", "probabilistic_slots", "total_slots",
                "awake_mean", "awake_max", "leaders", "informed", "terminated")
TRIAL_DTYPE = np.dtype([
    ("seed", np.uint64), ("rounds_used", np.int64), ("probabilistic_slots", np.float64),
    ("total_slots", np.float64), ("awake_mean", np.float64), ("awake_max", np.int64),
    ("leaders", np.int64), ("informed", np.int64), ("terminated", np.bool_),
])


@dataclass(frozen=True)
class TrialStats:
    n: int
    trials: int
    rounds: Estimate
    probabilistic_slots: Estimate
    total_slots: Estimate
    awake_mean: Estimate
    awake_max: Estimate
    round1_success_freq: float
    per_round_success_freq: tuple  # hazard: elected in round j among trials that reached it
    per_round_at_risk: tuple
    termination_rate: float
    records: np.ndarray = field(repr=False, compare=False)

    @property
    def mean_rounds(self) -> float:
        return self.rounds.mean

    @property
    def mean_probabilistic_slots(self) -> float:
        return self.probabilistic_slots.mean

    @property
    def mean_total_slots(self) -> float:
        return self.total_slots.mean

    @property
    def mean_awake_mean(self) -> float:
        return self.awake_mean.mean

    @property
    def mean_awake_max(self) -> float:
        return self.awake_max.mean

    def hazard_sd(self, j: int) -> float:
        """Binomial standard error of per_round_success_freq for round j (1-based)."""
        h, at_risk = self.per_round_success_freq[j - 1], self.per_round_at_risk[j - 1]
        return math.sqrt(h * (1 - h) / at_risk) if at_risk else math.inf

    def summary(self) -> dict:
        row = {"n": self.n, "trials": self.trials}
        for name in ("rounds", "probabilistic_slots", "total_slots", "awake_mean", "awake_max"):
            est = getattr(self, name)
            row[f"mean_{name}"] = est.mean
            row[f"sd_{name}"] = est.sd
            row[f"hw_{name}"] = est.half_width
        row["round1_success_freq"] = self.round1_success_freq
        row["termination_rate"] = self.termination_rate
        return row


def _run_block(params: ProtocolParams, n: int, seeds: Sequence[int]) -> np.ndarray:
    out = np.zeros(len(seeds), dtype=TRIAL_DTYPE)
    for i, seed in enumerate(seeds):
        try:
            m = run_election(params, n, seed=seed)
        except RoundCapExceeded as cap:
            m = cap.metrics
        out[i] = (seed, m.rounds_used, float(m.probabilistic_slots), float(m.total_slots), m.awake_mean,
                  m.awake_max, m.leaders, m.informed, m.terminated)
    return out


def _pool_context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else methods[0])


def run_trials(config: TrialConfig) -> TrialStats:
    """Run ``config.trials`` independent elections and aggregate them."""
    seeds = [trial_seed(config.master_seed, i) for i in range(config.trials)]
    workers = min(config.workers or default_workers(), config.trials)
    if workers == 1:
        records = _run_block(config.params, config.n, seeds)
    else:
        blocks = np.array_split(np.arange(config.trials), workers * 4)
        with ProcessPoolExecutor(workers, mp_context=_pool_context()) as pool:
            parts = pool.map(_run_block, [config.params] * len(blocks), [config.n] * len(blocks),
                             [[seeds[i] for i in b] for b in blocks])
            records = np.concatenate(list(parts))
    return summarize(records, config.n)


def summarize(records: np.ndarray, n: int) -> TrialStats:
    trials = len(records)
    rounds = records["rounds_used"]
    done = records["terminated"]
    horizon = int(rounds.max())
    at_risk = np.array([(rounds >= j).sum() for j in range(1, horizon + 1)])
    won = np.bincount(rounds[done], minlength=horizon + 1)[1:]
    hazard = tuple(float(w / r) if r else 0.0 for w, r in zip(won, at_risk))
    return TrialStats(
        n=n,
        trials=trials,
        rounds=Estimate.of(rounds),
        probabilistic_slots=Estimate.of(records["probabilistic_slots"]),
        total_slots=Estimate.of(records["total_slots"]),
        awake_mean=Estimate.of(records["awake_mean"]),
        awake_max=Estimate.of(records["awake_max"]),
        round1_success_freq=float(np.mean(done & (rounds == 1))),
        per_round_success_freq=hazard,
        per_round_at_risk=tuple(int(r) for r in at_risk),
        termination_rate=float(done.mean()),
        records=records,
    )


@dataclass(frozen=True)
class DominanceReport:
    """First-success indices H (from p_seq) and K (from q_seq) under one coupling.

    ``cdf_h[k-1]`` and ``cdf_k[k-1]`` are the empirical P(H <= k), P(K <= k).
    Index len(p_seq) + 1 is the appended sure success.
    """

    samples: int
    cdf_h: np.ndarray
    cdf_k: np.ndarray
    violations: int  # samples with K > H
    cdf_slack: float  # min over k of cdf_k - cdf_h + 3 sigma

    @property
    def mean_h(self) -> float:
        return float(np.sum(1 - self.cdf_h[:-1]) + 1)

    @property
    def mean_k(self) -> float:
        return float(np.sum(1 - self.cdf_k[:-1]) + 1)

    @property
    def cdf_dominates(self) -> bool:
        return self.cdf_slack >= 0


def dominance_check(p_seq, q_seq, samples: int, seed: int = 0, chunk: int = 100_000) -> DominanceReport:
    """Sample H and K from the same uniforms and compare them.

    X_j = 1 iff U_j < p_j and Y_j = 1 iff U_j < q_j, so p_j <= q_j makes
    Y_j >= X_j in every sample and K <= H surely.
    """
    p = np.asarray(p_seq, dtype=float)
    q = np.asarray(q_seq, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise PreconditionError("p_seq and q_seq must be 1-d sequences of equal length")
    if np.any((p < 0) | (p > 1) | (q < 0) | (q > 1)):
        raise PreconditionError("probabilities must lie in [0, 1]")
    bad = np.flatnonzero(p > q)
    if len(bad):
        i = int(bad[0])
        raise PreconditionError(f"p_seq[{i}] = {p[i]:.6g} exceeds q_seq[{i}] = {q[i]:.6g}")
    if samples < 1:
        raise PreconditionError("samples must be positive")

    p = np.append(p, 1.0)
    q = np.append(q, 1.0)
    m = len(p)
    rng = np.random.default_rng(seed)
    h_counts = np.zeros(m, dtype=np.int64)
    k_counts = np.zeros(m, dtype=np.int64)
    violations = 0
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        u = rng.random((size, m))
        h = np.argmax(u < p, axis=1)
        k = np.argmax(u < q, axis=1)
        violations += int(np.count_nonzero(k > h))
        h_counts += np.bincount(h, minlength=m)
        k_counts += np.bincount(k, minlength=m)
        done += size

    cdf_h = np.cumsum(h_counts) / samples
    cdf_k = np.cumsum(k_counts) / samples
    sigma = np.sqrt((cdf_h * (1 - cdf_h) + cdf_k * (1 - cdf_k)) / samples)
    slack = float(np.min(cdf_k - cdf_h + 3 * sigma))
    return DominanceReport(samples, cdf_h, cdf_k, violations, slack)


def lower_bound_sequence(q: float, n: int, alpha: float, length: int) -> np.ndarray:
    """q * 1{j >= j* + 1} for j = 1..length."""
    js = np.arange(1, length + 1)
    return np.where(js >= analysis.j_star(n, alpha) + 1, q, 0.0)


def sweep(n_values: Sequence[int], alpha_values: Sequence[float], protocol, trials: int,
          seed: int = 0, k_start: int = 1, max_rounds: int = 64,
          workers: Optional[int] = None) -> list[dict]:
    """Measured means against the analytic references for every (n, alpha) pair.

    Every alpha is checked against the cost function's domain before any
    trial runs. Cell c (in row-major order) uses master seed
    ``trial_seed(seed, c)``.
    """
    protocol = Protocol(protocol)
    q = analysis.protocol_q(protocol)
    costs = {alpha: analysis.c_of_alpha(q, alpha) for alpha in alpha_values}
    for n in n_values:
        if int(n) != n or n < 2:
            raise ConfigInvalid(f"n must be an integer >= 2, got {n}")

    rows = []
    for cell, (n, alpha) in enumerate((n, a) for n in n_values for a in alpha_values):
        params = ProtocolParams(alpha=alpha, protocol=protocol, k_start=k_start, max_rounds=max_rounds)
        stats = run_trials(TrialConfig(params, n, trials, trial_seed(seed, cell), workers))
        c = costs[alpha]
        exact = analysis.expected_run(protocol, n, alpha, k_start, max_rounds)
        rows.append({
            "protocol": protocol.value,
            "n": n,
            "alpha": alpha,
            "j_star": analysis.j_star(n, alpha),
            **stats.summary(),
            "c_alpha": c,
            "slots_bound": c * math.log2(n),
            "awake_reference": analysis.awake_reference(protocol, n, alpha),
            "rounds_soft_bound": analysis.rounds_soft_bound(protocol, n, alpha),
            "exact_rounds": exact.rounds,
            "exact_probabilistic_slots": exact.probabilistic_slots,
            "exact_awake_mean": exact.awake_mean,
        })
    return rows
