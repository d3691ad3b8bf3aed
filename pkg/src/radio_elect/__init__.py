"""Energy-efficient randomized leader election on single-hop radio channels without collision detection."""

from .analysis import (
    AnalysisConstants, CostProfile, c_of_alpha, cost_profile, exact_round_success_alg1,
    exact_round_success_alg2, expected_run, j_star, lemma1_sum, lemma2_sum, optimal_alpha,
    p_round_alg1_formula, p_round_alg2_formula, round_success_alg1, round_success_alg2,
    series_constants, unique_broadcast_prob,
)
from .channel import (
    ChannelModel, Message, MessageKind, Observation, ObservationKind, SlotAction, resolve_slot,
)
from .errors import (
    ConfigInvalid, DomainError, IllegalAction, PreconditionError, ProtocolViolation,
    RoundCapExceeded, SizeError, SlotBudgetExceeded,
)
from .harness import TrialConfig, TrialStats, dominance_check, run_trials, sweep
from .protocols import Protocol, ProtocolParams, RunMetrics, round_length, run_election

__version__ = "0.1.0"
