"""Simulated quantum cards and how a reader measures them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detection import BASES, NoiseModel, click_table, sample_detections
from .quantum import ALL_SECRETS, Basis, pulse_labels, secrets_to_array


@dataclass(frozen=True)
class SimulatedCard:
    """Pulses as they reach the reader: secrets plus a per-pair intensity.

    ``mu=None`` means every pair carries the reader model's own intensity.
    """

    secrets: np.ndarray
    mu: np.ndarray | None = None
    serial: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "secrets", secrets_to_array(self.secrets))
        if self.mu is not None:
            mu = np.broadcast_to(np.asarray(self.mu, dtype=float), (len(self.secrets),))
            object.__setattr__(self, "mu", mu)

    def __len__(self) -> int:
        return len(self.secrets)


@dataclass(frozen=True)
class CardMeasurement:
    """Raw click record, arrays of shape ``(n, 2)`` indexed by pair and pulse."""

    basis: Basis
    d0: np.ndarray
    d1: np.ndarray

    @property
    def clicked(self) -> np.ndarray:
        return self.d0 | self.d1

    @property
    def double(self) -> np.ndarray:
        return self.d0 & self.d1

    @property
    def valid(self) -> np.ndarray:
        """Pairs where both pulses gave at least one click."""
        return self.clicked.all(axis=1)

    @property
    def guesses(self) -> np.ndarray:
        # D1 alone -> 1; D0 alone or double click -> 0 (doubles are flagged separately)
        return (self.d1 & ~self.d0).astype(np.uint8)

    def relevant_correct(self, secrets: np.ndarray, basis: Basis | None = None) -> np.ndarray:
        """Per pair: did the challenge-basis qubit give a single, correct click?"""
        basis = self.basis if basis is None else basis
        secrets = secrets_to_array(secrets)
        q = relevant_qubit(secrets, basis)
        rows = np.arange(len(secrets))
        bit = secrets[rows, 1 + q]
        return (self.guesses[rows, q] == bit) & ~self.double[rows, q]


def relevant_qubit(secrets: np.ndarray, basis: Basis) -> np.ndarray:
    """Index of the qubit encoded in ``basis`` for every pair."""
    b = secrets_to_array(secrets)[:, 0].astype(np.int64)
    return b if basis is Basis.Z else 1 - b


def measure_card(
    card: SimulatedCard, model: NoiseModel, basis: Basis, rng: np.random.Generator
) -> CardMeasurement:
    labels = pulse_labels(card.secrets)
    mu = None if card.mu is None else np.repeat(card.mu[:, None], 2, axis=1)
    d0, d1 = sample_detections(labels, basis, model, rng, mu=mu)
    return CardMeasurement(basis, d0, d1)


def expected_valid_pair_rate(model: NoiseModel, basis: Basis | None = None, mu=None) -> float:
    """Probability that both pulses of a uniformly random pair click."""
    table = click_table(model, mu)
    detect = 1.0 - (1.0 - table[..., 0]) * (1.0 - table[..., 1])
    bases = BASES if basis is None else (basis,)
    total = 0.0
    for b in bases:
        bi = BASES.index(b)
        for s in ALL_SECRETS:
            l0, l1 = pulse_labels(np.array([s.as_tuple()]))[0]
            total += detect[l0, bi] * detect[l1, bi]
    return float(total / (8 * len(bases)))
