"""Synchronous single-hop radio channel without collision detection.

Two models are supported. Under the strong model a station may broadcast and
listen in the same slot, so a lone sender hears its own message. Under the
weak model the two are mutually exclusive. In both models a listener only
learns whether exactly one station transmitted; silence and collision look
the same.

``resolve_slot`` works on one action per station and is the reference
semantics. ``deliver`` is the same rule on index arrays of senders and
listeners, which is what the simulation engine uses for large n.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import IllegalAction


class ChannelModel(enum.Enum):
    STRONG_NO_CD = "strong"
    WEAK_NO_CD = "weak"


class MessageKind(enum.Enum):
    OK = "ok"
    WITNESS_REPORT = "witness_report"
    CANDIDATE_CLAIM = "candidate_claim"
    LEADER_ANNOUNCE = "leader_announce"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    slot: Optional[int] = None  # only for WITNESS_REPORT, 1-based within the round

    def __post_init__(self):
        if self.kind is MessageKind.WITNESS_REPORT:
            if self.slot is None or self.slot < 1:
                raise ValueError("a witness report names a slot index >= 1")
        elif self.slot is not None:
            raise ValueError(f"{self.kind.value} carries no slot index")

    @classmethod
    def ok(cls) -> Message:
        return cls(MessageKind.OK)

    @classmethod
    def witness_report(cls, slot: int) -> Message:
        return cls(MessageKind.WITNESS_REPORT, slot)

    @classmethod
    def candidate_claim(cls) -> Message:
        return cls(MessageKind.CANDIDATE_CLAIM)

    @classmethod
    def leader_announce(cls) -> Message:
        return cls(MessageKind.LEADER_ANNOUNCE)


class ActionKind(enum.Enum):
    SLEEP = "sleep"
    LISTEN = "listen"
    BROADCAST = "broadcast"
    BROADCAST_AND_LISTEN = "broadcast_and_listen"


@dataclass(frozen=True)
class SlotAction:
    kind: ActionKind
    message: Optional[Message] = None

    def __post_init__(self):
        sends = self.kind in (ActionKind.BROADCAST, ActionKind.BROADCAST_AND_LISTEN)
        if sends != (self.message is not None):
            raise ValueError(f"{self.kind.value} with message={self.message!r}")

    @property
    def sends(self) -> bool:
        return self.message is not None

    @property
    def listens(self) -> bool:
        return self.kind in (ActionKind.LISTEN, ActionKind.BROADCAST_AND_LISTEN)

    @property
    def awake(self) -> bool:
        return self.kind is not ActionKind.SLEEP

    @classmethod
    def sleep(cls) -> SlotAction:
        return cls(ActionKind.SLEEP)

    @classmethod
    def listen(cls) -> SlotAction:
        return cls(ActionKind.LISTEN)

    @classmethod
    def broadcast(cls, message: Message) -> SlotAction:
        return cls(ActionKind.BROADCAST, message)

    @classmethod
    def broadcast_and_listen(cls, message: Message) -> SlotAction:
        return cls(ActionKind.BROADCAST_AND_LISTEN, message)


class ObservationKind(enum.Enum):
    RECEIVED = "received"
    NO_UNIQUE_SIGNAL = "no_unique_signal"
    NOT_LISTENING = "not_listening"


@dataclass(frozen=True)
class Observation:
    kind: ObservationKind
    message: Optional[Message] = None

    @property
    def received(self) -> bool:
        return self.kind is ObservationKind.RECEIVED


NOT_LISTENING = Observation(ObservationKind.NOT_LISTENING)
NO_UNIQUE_SIGNAL = Observation(ObservationKind.NO_UNIQUE_SIGNAL)


def check_action(action: SlotAction, model: ChannelModel) -> None:
    if model is ChannelModel.WEAK_NO_CD and action.kind is ActionKind.BROADCAST_AND_LISTEN:
        raise IllegalAction("broadcast-and-listen is not available in the weak no-CD model")


def resolve_slot(actions: Sequence[SlotAction], model: ChannelModel) -> list[Observation]:
    """Observations of every station for one slot, in station order."""
    if not actions:
        raise ValueError("a slot needs at least one station")
    for action in actions:
        check_action(action, model)

    messages = [a.message for a in actions if a.sends]
    heard = Observation(ObservationKind.RECEIVED, messages[0]) if unique_signal(len(messages)) else NO_UNIQUE_SIGNAL
    return [heard if a.listens else NOT_LISTENING for a in actions]


def unique_signal(senders: int) -> bool:
    """The no-CD rule: listeners get a message iff exactly one station sent."""
    return senders == 1


def deliver(senders: np.ndarray, listeners: np.ndarray, model: ChannelModel,
            scratch: Optional[np.ndarray] = None) -> bool:
    """Whether the slot's listeners receive the message.

    ``senders`` is an array of station indices. ``listeners`` is either an
    index array or a boolean mask over all stations. Under the weak model the
    two sets must be disjoint; for index arrays the check uses ``scratch`` (a
    zeroed boolean array of length n, restored before returning) when given,
    so it costs O(senders + listeners) instead of a sort.
    """
    if model is ChannelModel.WEAK_NO_CD and len(senders) and len(listeners):
        if listeners.dtype == bool:
            overlap = bool(listeners[senders].any())
        elif scratch is None:
            overlap = np.intersect1d(senders, listeners).size > 0
        else:
            scratch[senders] = True
            overlap = bool(scratch[listeners].any())
            scratch[senders] = False
        if overlap:
            raise IllegalAction("a station broadcast and listened in the same slot under the weak model")
    return unique_signal(len(senders))
