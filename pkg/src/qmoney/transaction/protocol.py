"""Bank and vendor roles of a card transaction.

The bank issues cards from uniformly random secrets and later checks the
vendor's challenge answers against them.  The vendor measures every pulse of
the card in the challenge basis; a pair counts as valid only if both of its
pulses clicked.  A double click on a pulse is reported and scored as wrong.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..card import SimulatedCard, expected_valid_pair_rate, measure_card, relevant_qubit
from ..detection import NoiseModel, analytic_c
from ..errors import DomainError, InsecureParametersError, ProtocolError
from ..quantum import Basis
from ..security import PAIR_GAME_EPSILON, SecurityMode, delta as slack
from ..seeding import generator
from .store import BankStore, IssuedCard


class Reason(enum.Enum):
    OK = "Ok"
    BELOW_THRESHOLD = "BelowThreshold"
    CLICK_RATE_ANOMALY = "ClickRateAnomaly"
    UNKNOWN_SERIAL = "UnknownSerial"
    CARD_EXHAUSTED = "CardExhausted"


@dataclass(frozen=True)
class Answer:
    pair_index: int
    c0_guess: int
    c1_guess: int
    valid: bool
    double_click: tuple[bool, bool] = (False, False)


@dataclass(frozen=True)
class VerifyRequest:
    """Vendor report.  Arrays hold one row per reported pair.

    Pairs with no click at all are omitted; ``total_pairs`` is the card size.
    """

    serial: str
    challenge: Basis
    total_pairs: int
    pair_index: np.ndarray
    guesses: np.ndarray
    valid: np.ndarray
    double_click: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.pair_index, dtype=np.int64)
        object.__setattr__(self, "pair_index", idx)
        object.__setattr__(self, "guesses", np.asarray(self.guesses, dtype=np.uint8).reshape(-1, 2))
        object.__setattr__(self, "valid", np.asarray(self.valid, dtype=bool))
        object.__setattr__(self, "double_click", np.asarray(self.double_click, dtype=bool).reshape(-1, 2))
        if len(np.unique(idx)) != len(idx):
            raise ProtocolError("pair indices must be unique")
        if len(idx) and (idx.min() < 0 or idx.max() >= self.total_pairs):
            raise ProtocolError("pair index out of range")

    @property
    def answers(self) -> list[Answer]:
        return [
            Answer(int(i), int(g[0]), int(g[1]), bool(v), (bool(d[0]), bool(d[1])))
            for i, g, v, d in zip(self.pair_index, self.guesses, self.valid, self.double_click)
        ]

    @classmethod
    def from_answers(cls, serial: str, challenge: Basis, total_pairs: int, answers) -> "VerifyRequest":
        answers = list(answers)
        return cls(
            serial,
            challenge,
            total_pairs,
            np.array([a.pair_index for a in answers], dtype=np.int64),
            np.array([(a.c0_guess, a.c1_guess) for a in answers], dtype=np.uint8),
            np.array([a.valid for a in answers], dtype=bool),
            np.array([a.double_click for a in answers], dtype=bool),
        )


@dataclass(frozen=True)
class VerifyVerdict:
    accept: bool
    fraction_correct: float
    valid_pair_rate: float
    reason: Reason
    n_valid: int = 0


@dataclass(frozen=True)
class Policy:
    """Bank acceptance rule.

    Accept when the fraction of correct valid pairs is at least
    ``c_accept - delta``, the valid-pair rate is within ``rate_tolerance`` of
    ``expected_valid_rate`` and the card has uses left.  A ``None`` tolerance
    is set per request to ``rate_sigmas`` binomial standard deviations.
    """

    c_accept: float
    delta: float
    expected_valid_rate: float
    rate_tolerance: float | None = None
    max_uses: int = 1
    rate_sigmas: float = 5.0

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise InsecureParametersError(f"policy delta must be > 0, got {self.delta}")

    @property
    def min_fraction(self) -> float:
        return self.c_accept - self.delta

    def tolerance_for(self, total_pairs: int) -> float:
        if self.rate_tolerance is not None:
            return self.rate_tolerance
        r = self.expected_valid_rate
        return self.rate_sigmas * math.sqrt(r * (1.0 - r) / max(total_pairs, 1))


def make_policy(
    model: NoiseModel,
    c_accept: float | None = None,
    mode: SecurityMode = SecurityMode.SINGLE_PHOTON,
    epsilon: float = PAIR_GAME_EPSILON,
    eta: float = 0.0,
    max_uses: int = 1,
    rate_sigmas: float = 5.0,
) -> Policy:
    """Policy for cards read under ``model``; ``c_accept`` defaults to its analytic c."""
    c = analytic_c(model).c if c_accept is None else c_accept
    d = slack(mode, c, epsilon, eta, model.mu)
    return Policy(c, d, expected_valid_pair_rate(model), None, max_uses, rate_sigmas)


def new_serial(rng: np.random.Generator, taken=()) -> str:
    while True:
        serial = rng.bytes(16).hex()
        if serial not in taken:
            return serial


def issue_card(
    n: int, rng, store: BankStore, clock: Callable[[], float] = time.time
) -> tuple[IssuedCard, SimulatedCard]:
    """Draw ``n`` uniform pair secrets, persist them, then release the card."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    gen = generator(rng)
    serial = new_serial(gen, store)
    secrets = gen.integers(0, 2, size=(n, 3), dtype=np.uint8)
    record = IssuedCard(serial, secrets, float(clock()))
    store.add(record)
    return record, SimulatedCard(secrets.copy(), None, serial)


def vendor_measure(card: SimulatedCard, model: NoiseModel, challenge: Basis, rng) -> VerifyRequest:
    if card.serial is None:
        raise DomainError("card has no serial number")
    m = measure_card(card, model, challenge, generator(rng))
    reported = np.flatnonzero(m.clicked.any(axis=1))
    return VerifyRequest(
        card.serial,
        challenge,
        len(card),
        reported,
        m.guesses[reported],
        m.valid[reported],
        m.double[reported],
    )


def score(request: VerifyRequest, secrets: np.ndarray) -> tuple[int, int]:
    """``(correct, valid)`` counts of challenge-basis answers on valid pairs."""
    if request.total_pairs != len(secrets):
        raise ProtocolError(f"card has {len(secrets)} pairs, request reports {request.total_pairs}")
    idx = request.pair_index[request.valid]
    sub = secrets[idx]
    q = relevant_qubit(sub, request.challenge)
    rows = np.arange(len(idx))
    bits = sub[rows, 1 + q]
    guesses = request.guesses[request.valid][rows, q]
    doubles = request.double_click[request.valid][rows, q]
    correct = (guesses == bits) & ~doubles
    return int(correct.sum()), len(idx)


def bank_verify(request: VerifyRequest, store: BankStore, policy: Policy) -> VerifyVerdict:
    card = store.get(request.serial)
    if card is None:
        return VerifyVerdict(False, 0.0, 0.0, Reason.UNKNOWN_SERIAL)
    correct, n_valid = score(request, card.secrets)
    fraction = correct / n_valid if n_valid else 0.0
    rate = n_valid / request.total_pairs
    if store.record_use(request.serial, policy.max_uses) is None:
        return VerifyVerdict(False, fraction, rate, Reason.CARD_EXHAUSTED, n_valid)
    if abs(rate - policy.expected_valid_rate) > policy.tolerance_for(request.total_pairs):
        reason = Reason.CLICK_RATE_ANOMALY
    elif n_valid == 0 or fraction < policy.min_fraction:
        reason = Reason.BELOW_THRESHOLD
    else:
        reason = Reason.OK
    return VerifyVerdict(reason is Reason.OK, fraction, rate, reason, n_valid)
