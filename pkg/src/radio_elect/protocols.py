"""Round-based leader election for anonymous stations on a no-CD channel.

Both protocols run rounds j = 1, 2, ... . Round j has ``round_length(j)``
probabilistic slots, in the i-th of which every station wakes independently
with probability 2**-(k_start + i - 1), followed by deterministic slots where
the outcome of the round is settled.

* Alg1 (strong model): awake stations broadcast and listen at once, so a
  lone sender notices it was alone and becomes a candidate. In the closing
  slot every station listens and the candidates broadcast; a unique
  candidate becomes the leader.
* Alg2 (weak model): an awake station either sends or listens, each with
  probability 1/2. A listener that hears a lone sender becomes a witness for
  that slot. In the first closing slot the witnesses send a report naming
  the slot they witnessed while the stations that broadcast this round
  listen; if there is a single witness, the station that sent in the named
  slot becomes the leader. In the second closing slot the leader announces
  itself to everyone.

Candidate, witness and broadcast bookkeeping is cleared at every round
boundary so that rounds are independent trials.

Engine layout
-------------
Station state is kept as arrays (one entry per station) in ``Stations``.
The leading slots of a round, where a sizeable fraction of stations wake,
are sampled together from one 16-bit random word per station (see
``_kernels``). In the remaining slots the number of stations that wake is
drawn as Binomial(n, p) and the awake set as a uniform subset of that size,
which is the same law as n independent coin flips at O(awake) cost.

With ``labels`` the i-th random word and the i-th drawn position belong to
station ``labels[i]``; running the same seed with a permutation therefore
hands every station the random stream of its preimage, which is how the
anonymity property is tested. Station indices are bookkeeping only and no
decision depends on them.
"""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._kernels import (close_weak_round, dense_exponents, pattern_table, tally_patterns,
                       tally_weak_patterns)
from .channel import ChannelModel, Message, deliver, unique_signal
from .errors import ConfigInvalid, ProtocolViolation, RoundCapExceeded, SlotBudgetExceeded
from .numeric import ceil_near

# past 2**53 a round length is the float value of alpha ** j, still an exact int
MAX_ROUND_SLOTS = sys.float_info.max
# 2 ** -1075 rounds to 0.0: no station can wake in a slot with a larger exponent
_LAST_WAKE_EXPONENT = 1074


class Protocol(enum.Enum):
    ALG1 = "alg1"
    ALG2 = "alg2"

    @property
    def model(self) -> ChannelModel:
        return ChannelModel.STRONG_NO_CD if self is Protocol.ALG1 else ChannelModel.WEAK_NO_CD

    @property
    def overhead(self) -> int:
        """Deterministic slots appended to every round."""
        return 1 if self is Protocol.ALG1 else 2


@dataclass(frozen=True)
class ProtocolParams:
    alpha: float
    protocol: Protocol = Protocol.ALG1
    k_start: int = 1
    max_rounds: int = 64
    model: Optional[ChannelModel] = None

    def __post_init__(self):
        if not isinstance(self.protocol, Protocol):
            object.__setattr__(self, "protocol", Protocol(self.protocol))
        if self.model is None:
            object.__setattr__(self, "model", self.protocol.model)
        if not (math.isfinite(self.alpha) and self.alpha > 1):
            raise ConfigInvalid(f"alpha must be a finite number > 1, got {self.alpha}")
        if int(self.k_start) != self.k_start or self.k_start < 1:
            raise ConfigInvalid(f"k_start must be a positive integer, got {self.k_start}")
        if int(self.max_rounds) != self.max_rounds or self.max_rounds < 1:
            raise ConfigInvalid(f"max_rounds must be a positive integer, got {self.max_rounds}")
        if self.model is not self.protocol.model:
            raise ConfigInvalid(
                f"{self.protocol.value} runs on the {self.protocol.model.value} no-CD model, "
                f"not {self.model.value}")


def round_length(j: int, alpha: float) -> int:
    """Number of probabilistic slots in round j, i.e. ceil(alpha ** j)."""
    if j < 1 or not alpha > 1:
        raise ValueError(f"round_length needs j >= 1 and alpha > 1, got j={j}, alpha={alpha}")
    try:
        x = alpha ** j
    except OverflowError:
        x = math.inf
    if x > MAX_ROUND_SLOTS:
        raise SlotBudgetExceeded(f"round {j} at alpha={alpha} overflows the slot count")
    return ceil_near(x)


def slot_probability(i: int, k_start: int = 1) -> float:
    """Wake-up probability in the i-th probabilistic slot of a round."""
    if i < 1 or k_start < 1:
        raise ValueError("slot index and k_start are 1-based")
    return math.ldexp(1.0, -(k_start + i - 1))


@dataclass
class Stations:
    """Per-station protocol state for one execution, stored column-wise.

    ``witness_for`` is 0 for a non-witness. ``sent_in`` maps a slot of the
    current round to the stations that broadcast in it, so station s has
    slot k among its broadcast slots iff s is in ``sent_in[k]``.
    """

    n: int
    awake: np.ndarray
    candidate: np.ndarray
    witness_for: np.ndarray
    broadcaster: np.ndarray
    leader: np.ndarray
    knows_terminated: np.ndarray
    codes: np.ndarray
    sent_in: dict = field(default_factory=dict)
    elected: Optional[int] = None
    _scratch: np.ndarray = None
    _listening: np.ndarray = None
    _everyone: np.ndarray = None

    @classmethod
    def create(cls, n: int) -> Stations:
        return cls(
            n=n,
            awake=np.zeros(n, dtype=np.int64),
            candidate=np.zeros(n, dtype=bool),
            witness_for=np.zeros(n, dtype=np.int64),
            broadcaster=np.zeros(n, dtype=bool),
            leader=np.zeros(n, dtype=bool),
            knows_terminated=np.zeros(n, dtype=bool),
            codes=np.zeros(n, dtype=np.uint8),
            _scratch=np.zeros(n, dtype=bool),
            _listening=np.zeros(n, dtype=bool),
            _everyone=np.arange(n),
        )

    def _crown(self, station: int) -> None:
        if self.elected is not None:
            raise ProtocolViolation("a second leader was elected")
        self.leader[station] = True
        self.elected = station


@dataclass(frozen=True)
class RoundOutcome:
    elected: Optional[int]
    probabilistic_slots: int
    deterministic_slots: int


@dataclass
class RunMetrics:
    rounds_used: int
    probabilistic_slots: int
    total_slots: int
    awake_per_station: np.ndarray
    leader_index: Optional[int]
    terminated: bool
    leaders: int
    informed: int  # stations with knows_terminated set

    @property
    def n(self) -> int:
        return len(self.awake_per_station)

    @property
    def awake_mean(self) -> float:
        return float(self.awake_per_station.mean())

    @property
    def awake_max(self) -> int:
        return int(self.awake_per_station.max())


def _opening_slots(st: Stations, rng: np.random.Generator, exps: tuple, coin: bool,
                   labels: Optional[np.ndarray]) -> np.ndarray:
    """Sample the leading slots of a round at once; returns the code histogram."""
    hist = np.zeros(256, dtype=np.int64)
    if not exps:
        return hist
    words = rng.bit_generator.random_raw((st.n + 3) // 4).view(np.uint16)[:st.n]
    if labels is not None:
        mine = np.empty_like(words)
        mine[labels] = words
        words = mine
    table, wakes_in = pattern_table(exps, coin)
    if coin:
        tally_weak_patterns(words, table, wakes_in, st.awake, st.codes, hist, st.broadcaster)
    else:
        tally_patterns(words, table, wakes_in, st.awake, st.codes, hist)
    return hist


def _slot_counts(rng: np.random.Generator, n: int, first: int, last: int) -> np.ndarray:
    """Binomial wake counts for slots with exponents first..last (inclusive)."""
    last = min(last, _LAST_WAKE_EXPONENT)
    if last < first:
        return np.zeros(0, dtype=np.int64)
    return rng.binomial(n, np.ldexp(1.0, -np.arange(first, last + 1)))


def _draw(rng: np.random.Generator, n: int, count: int, labels: Optional[np.ndarray]) -> np.ndarray:
    picked = rng.choice(n, size=count, replace=False, shuffle=False)
    return picked if labels is None else labels[picked]


def _bit_set(hist: np.ndarray, bit: int) -> int:
    """Number of stations whose pattern code has ``bit`` set."""
    return int(hist[(np.arange(256) >> bit) & 1 == 1].sum())


def alg1_run_round(st: Stations, j: int, params: ProtocolParams, rng: np.random.Generator,
                   labels: Optional[np.ndarray] = None) -> RoundOutcome:
    length = round_length(j, params.alpha)
    model = params.model
    candidates = []

    # every awake station uses BroadcastAndListen(CandidateClaim), so it is
    # both the sender set and the listener set of its slot
    exps = dense_exponents(params.k_start, length, coin=False)
    hist = _opening_slots(st, rng, exps, False, labels)
    for s in range(len(exps)):
        if unique_signal(_bit_set(hist, s)):
            lone = int(np.flatnonzero(st.codes & (1 << s))[0])
            st.candidate[lone] = True
            candidates.append(lone)

    first = params.k_start + len(exps)
    counts = _slot_counts(rng, st.n, first, params.k_start + length - 1)
    for k in np.flatnonzero(counts):
        awake = _draw(rng, st.n, int(counts[k]), labels)
        st.awake[awake] += 1
        if deliver(awake, awake, model, st._scratch):
            st.candidate[awake[0]] = True
            candidates.append(int(awake[0]))

    # closing slot: candidates BroadcastAndListen, everyone else Listen
    st.awake += 1
    claimants = np.unique(np.asarray(candidates, dtype=np.int64))
    elected = None
    if deliver(claimants, st._everyone, model, st._scratch):
        elected = int(claimants[0])
        st._crown(elected)
        st.knows_terminated[:] = True

    st.candidate[claimants] = False
    return RoundOutcome(elected, length, 1)


def alg2_run_round(st: Stations, j: int, params: ProtocolParams, rng: np.random.Generator,
                   labels: Optional[np.ndarray] = None) -> RoundOutcome:
    length = round_length(j, params.alpha)
    model = params.model
    witnesses = []

    def witness(listeners, slot):
        # a station keeps the first slot it witnessed
        fresh = listeners[st.witness_for[listeners] == 0]
        st.witness_for[fresh] = slot
        witnesses.extend(fresh.tolist())

    # opening slots: a pattern code holds one action per station and slot, so
    # no station can both send and listen there by construction
    exps = dense_exponents(params.k_start, length, coin=True)
    hist = _opening_slots(st, rng, exps, True, labels)
    for s in range(len(exps)):
        woke, sent = _bit_set(hist, s), _bit_set(hist, s + 4)
        if unique_signal(sent) and woke > sent:
            listening = (st.codes & ((1 << s) | (1 << (s + 4)))) == (1 << s)
            witness(np.flatnonzero(listening), s + 1)

    first = params.k_start + len(exps)
    counts = _slot_counts(rng, st.n, first, params.k_start + length - 1)
    for k in np.flatnonzero(counts):
        slot = len(exps) + int(k) + 1
        awake = _draw(rng, st.n, int(counts[k]), labels)
        st.awake[awake] += 1
        sends = rng.random(len(awake)) < 0.5
        senders, listeners = awake[sends], awake[~sends]
        if len(senders):
            st.broadcaster[senders] = True
            st.sent_in[slot] = senders
        if deliver(senders, listeners, model, st._scratch) and len(listeners):
            witness(listeners, slot)

    # closing slot 1: witnesses Broadcast(WitnessReport), other broadcasters Listen
    reporters = np.asarray(witnesses, dtype=np.int64)
    audience = st._listening
    close_weak_round(st.broadcaster, st.witness_for, st.awake, audience)
    if deliver(reporters, audience, model):
        report = Message.witness_report(int(st.witness_for[reporters[0]]))
        if report.slot <= len(exps):
            sent = np.flatnonzero((st.codes >> (report.slot + 3)) & 1)
        else:
            sent = st.sent_in.get(report.slot, np.zeros(0, dtype=np.int64))
        named = sent[audience[sent]]
        if len(named) != 1:
            raise ProtocolViolation(f"witness report for slot {report.slot} matched {len(named)} listeners")
        st._crown(int(named[0]))

    # closing slot 2 (awake already counted): the leader Broadcasts, all others Listen
    elected = st.elected
    if elected is not None:
        audience[:] = True
        audience[elected] = False
        if deliver(np.array([elected]), audience, model):
            st.knows_terminated[:] = True

    st.witness_for[reporters] = 0
    st.sent_in.clear()
    return RoundOutcome(elected, length, 2)


_ROUND_RUNNERS: dict[Protocol, Callable] = {
    Protocol.ALG1: alg1_run_round,
    Protocol.ALG2: alg2_run_round,
}


def run_election(params: ProtocolParams, n: int, seed=0, labels: Optional[np.ndarray] = None) -> RunMetrics:
    """Run one election to completion.

    The result is a deterministic function of ``(params, n, seed, labels)``.
    Raises RoundCapExceeded (carrying the metrics) if no leader is elected
    within ``params.max_rounds`` rounds.
    """
    if int(n) != n or n < 2:
        raise ConfigInvalid(f"an election needs n >= 2 stations, got {n}")
    n = int(n)
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if sorted(labels.tolist()) != list(range(n)):
            raise ConfigInvalid("labels must be a permutation of range(n)")

    rng = np.random.default_rng(seed)
    st = Stations.create(n)
    run_round = _ROUND_RUNNERS[params.protocol]
    overhead = params.protocol.overhead

    rounds = probabilistic = 0
    elected = None
    for j in range(1, params.max_rounds + 1):
        outcome = run_round(st, j, params, rng, labels)
        rounds = j
        probabilistic += outcome.probabilistic_slots
        if outcome.elected is not None:
            elected = outcome.elected
            break

    if elected is not None and elected != st.elected:
        raise ProtocolViolation("round outcome and station state disagree on the leader")
    leaders = int(st.leader.sum())
    informed = int(st.knows_terminated.sum())
    terminated = elected is not None and informed == n
    if elected is not None and not terminated:
        raise ProtocolViolation(f"leader elected but only {informed}/{n} stations know it")
    metrics = RunMetrics(
        rounds_used=rounds,
        probabilistic_slots=probabilistic,
        total_slots=probabilistic + overhead * rounds,
        awake_per_station=st.awake,
        leader_index=elected,
        terminated=terminated,
        leaders=leaders,
        informed=informed,
    )
    if not terminated:
        raise RoundCapExceeded(metrics)
    return metrics
