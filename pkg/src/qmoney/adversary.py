"""Counterfeiting strategies against a single card pair and against whole cards.

Pair game.  A counterfeiter holding one pair wins if it can answer *both*
challenges: its answer to Q_zz must be right on the Z-encoded qubit and its
answer to Q_xx must be right on the X-encoded qubit.  A measurement is a
POVM on the 4-dim pair space whose outcomes are labelled by the answer pair
``(zz_guess, xx_guess)``, each a 2-bit guess ``(c0, c1)``, i.e. 16 outcomes.
A 4-outcome POVM labelled by a single guess ``(c0, c1)`` is the special case
that gives the same answer to both challenges.

Card forgery.  Against weak coherent pulses without phase randomization the
counterfeiter can unambiguously identify some pulses; identifying one pulse
of a pair reveals the whole pair because the partner is in the conjugate
basis.  Identified pairs are re-sent (possibly brighter), the rest as vacuum.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .card import SimulatedCard, measure_card
from .detection import NoiseModel
from .errors import DomainError, InsufficientStatisticsError
from .quantum import (
    ALL_SECRETS,
    Basis,
    PairSecret,
    array_to_secrets,
    pair_state_from_secret,
    projector,
    secrets_to_array,
    validate_povm,
)
from .security import usd_probability
from .seeding import generator, seed_sequence

GUESSES: tuple[tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))
ANSWER_PAIRS: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = tuple(
    itertools.product(GUESSES, GUESSES)
)


def wins(secret: PairSecret, zz_guess: Sequence[int], xx_guess: Sequence[int]) -> bool:
    """True if both challenge answers are right for ``secret``."""
    zq = secret.qubit_in(Basis.Z)
    xq = secret.qubit_in(Basis.X)
    bits = (secret.c0, secret.c1)
    return zz_guess[zq] == bits[zq] and xx_guess[xq] == bits[xq]


def _pair_rhos() -> list[np.ndarray]:
    return [projector(pair_state_from_secret(s)) for s in ALL_SECRETS]


def outcome_operators(labels: Sequence[tuple[tuple[int, int], tuple[int, int]]]) -> list[np.ndarray]:
    """``sigma_k = sum_s (1/8) [s wins under label k] |psi_s><psi_s|``."""
    rhos = _pair_rhos()
    ops = []
    for zz, xx in labels:
        op = np.zeros((4, 4), dtype=complex)
        for s, rho in zip(ALL_SECRETS, rhos):
            if wins(s, zz, xx):
                op += rho / 8.0
        ops.append(op)
    return ops


# Strategies ---------------------------------------------------------------


@dataclass(frozen=True)
class NaiveBases:
    """Measure qubit 1 in Z and qubit 2 in X; answer both challenges alike."""


@dataclass(frozen=True)
class BreidbartProduct:
    """Measure both qubits in the eigenbasis of (Z + X)/sqrt(2)."""


@dataclass(frozen=True)
class CollectivePovm:
    """Arbitrary joint measurement on the pair.

    ``labels[k]`` is the ``(zz_guess, xx_guess)`` answered on outcome ``k``.
    With 4 elements and no labels the outcomes are the single guesses
    ``GUESSES`` used for both challenges.
    """

    elements: tuple[np.ndarray, ...]
    labels: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()

    def __post_init__(self) -> None:
        if not self.labels:
            if len(self.elements) == 4:
                object.__setattr__(self, "labels", tuple((g, g) for g in GUESSES))
            elif len(self.elements) == 16:
                object.__setattr__(self, "labels", ANSWER_PAIRS)
        if len(self.labels) != len(self.elements):
            raise DomainError("need one (zz_guess, xx_guess) label per POVM element")


@dataclass(frozen=True)
class UsdForger:
    mu_bright: float

    def __post_init__(self) -> None:
        if self.mu_bright < 0:
            raise DomainError("mu_bright must be >= 0")


CheatStrategy = Union[NaiveBases, BreidbartProduct, CollectivePovm, UsdForger]


def breidbart_basis() -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors of (Z + X)/sqrt(2) for eigenvalues +1 (guess 0) and -1."""
    t = math.pi / 8
    return np.array([math.cos(t), math.sin(t)]), np.array([-math.sin(t), math.cos(t)])


def _product_povm(first: Sequence[np.ndarray], second: Sequence[np.ndarray]) -> CollectivePovm:
    elements = tuple(np.kron(projector(first[a]), projector(second[b])) for a, b in GUESSES)
    return CollectivePovm(elements)


def as_povm(strategy: CheatStrategy) -> CollectivePovm:
    if isinstance(strategy, CollectivePovm):
        return strategy
    if isinstance(strategy, NaiveBases):
        z = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        x = (np.array([1.0, 1.0]) / math.sqrt(2), np.array([1.0, -1.0]) / math.sqrt(2))
        return _product_povm(z, x)
    if isinstance(strategy, BreidbartProduct):
        bb = breidbart_basis()
        return _product_povm(bb, bb)
    raise DomainError(f"{type(strategy).__name__} is not a measurement strategy")


def cheat_probability(strategy: CheatStrategy, tol: float = 1e-8) -> float:
    """Exact winning probability over the 8 equiprobable pair states."""
    povm = as_povm(strategy)
    diag = validate_povm(povm.elements, tol)
    if not diag.valid:
        raise DomainError(f"invalid POVM: {diag}")
    ops = outcome_operators(povm.labels)
    return float(sum(np.real(np.trace(e @ op)) for e, op in zip(povm.elements, ops)))


def guess_both_bits_probability(strategy: CheatStrategy) -> float:
    """Probability that a single 2-bit guess matches (c0, c1) exactly.

    Only defined for strategies that output one guess per outcome.
    """
    povm = as_povm(strategy)
    total = 0.0
    for elem, (zz, xx) in zip(povm.elements, povm.labels):
        if zz != xx:
            raise DomainError("outcome labels give different answers per challenge")
        for s in ALL_SECRETS:
            if (s.c0, s.c1) == tuple(zz):
                total += float(np.real(pair_state_from_secret(s).conj() @ elem @ pair_state_from_secret(s))) / 8
    return total


# Optimizer ----------------------------------------------------------------


@dataclass
class PovmOptimization:
    povm: CollectivePovm
    value: float
    converged: bool
    iterations: int
    restart_values: list[float] = field(default_factory=list)


def _inv_sqrt_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.clip(w, 1e-300, None)
    return (v / np.sqrt(w)) @ v.conj().T


def _random_povm(k: int, d: int, rng: np.random.Generator) -> list[np.ndarray]:
    raw = []
    for _ in range(k):
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        raw.append(a @ a.conj().T)
    s = _inv_sqrt_psd(sum(raw))
    return [s @ r @ s for r in raw]


def _project_feasible(elements: list[np.ndarray]) -> list[np.ndarray]:
    """Clip negative eigenvalues and renormalize so the elements sum to I."""
    fixed = []
    for e in elements:
        w, v = np.linalg.eigh((e + e.conj().T) / 2)
        fixed.append((v * np.clip(w, 0, None)) @ v.conj().T)
    s = _inv_sqrt_psd(sum(fixed))
    return [(s @ f @ s + (s @ f @ s).conj().T) / 2 for f in fixed]


def _value(elements: Sequence[np.ndarray], ops: Sequence[np.ndarray]) -> float:
    return float(sum(np.real(np.trace(e @ o)) for e, o in zip(elements, ops)))


def optimize_collective_povm(
    tolerance: float = 1e-9,
    max_iters: int = 5000,
    rng=None,
    restarts: int = 10,
    labels: Sequence[tuple[tuple[int, int], tuple[int, int]]] = ANSWER_PAIRS,
    workers: int = 1,
) -> PovmOptimization:
    """Maximize the pair-game winning probability over collective POVMs.

    Fixed-point iteration ``P_k <- R^-1 s_k P_k s_k R^-1`` with
    ``R = (sum_k s_k P_k s_k)^1/2``, the standard see-saw for minimum-error
    discrimination of the weighted operators ``s_k``, from ``restarts``
    random starting POVMs,
    each on its own child seed.  Iteration stops when the value gains less
    than ``tolerance`` over 10 steps.
    """
    if tolerance <= 0:
        raise DomainError("tolerance must be > 0")
    if restarts < 1:
        raise DomainError("restarts must be >= 1")
    labels = tuple(labels)
    ops = outcome_operators(labels)
    children = seed_sequence(rng).spawn(restarts)

    def run(child):
        return _see_saw(ops, np.random.default_rng(child), tolerance, max_iters)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, children))
    else:
        results = [run(c) for c in children]

    values = [r[1] for r in results]
    k = int(np.argmax(values))
    povm, value, converged, it = results[k]
    return PovmOptimization(CollectivePovm(tuple(povm), labels), value, converged, it, values)


def _see_saw(ops, gen: np.random.Generator, tolerance: float, max_iters: int):
    povm = _random_povm(len(ops), 4, gen)
    value = _value(povm, ops)
    history = [value]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        grown = [o @ p @ o for p, o in zip(povm, ops)]
        s = _inv_sqrt_psd(sum(grown))
        povm = _project_feasible([s @ g @ s for g in grown])
        value = _value(povm, ops)
        history.append(value)
        if it >= 10 and history[-1] - history[-11] < tolerance:
            converged = True
            break
    return povm, value, converged, it


# Card forgery -------------------------------------------------------------


@dataclass(frozen=True)
class ForgedCard:
    """Counterfeit card: ``known[i]`` pairs were identified, others are vacuum."""

    secrets: np.ndarray
    known: np.ndarray
    serial: str | None = None

    def __len__(self) -> int:
        return len(self.known)

    @property
    def entries(self) -> list[PairSecret | None]:
        secrets = array_to_secrets(self.secrets)
        return [s if k else None for s, k in zip(secrets, self.known)]

    @property
    def known_fraction(self) -> float:
        return float(np.mean(self.known)) if len(self.known) else 0.0

    def as_card(self, mu_bright: float) -> SimulatedCard:
        mu = np.where(self.known, float(mu_bright), 0.0)
        return SimulatedCard(self.secrets, mu, self.serial)


def forge_card_usd(card, mu: float, rng=None) -> ForgedCard:
    """Apply per-pulse USD to every pair of ``card``.

    A pair is identified when at least one of its two pulses is, which
    happens with probability ``1 - (1 - P_D)**2``.
    """
    p = usd_probability(mu)
    serial = getattr(card, "serial", None)
    secrets = secrets_to_array(getattr(card, "secrets", card))
    gen = generator(rng)
    hits = gen.random((len(secrets), 2)) < p
    known = hits.any(axis=1)
    # unidentified pairs carry no information; their secret slots are zeroed
    return ForgedCard(np.where(known[:, None], secrets, 0).astype(np.uint8), known, serial)


def forged_card_verification_rate(
    forged: ForgedCard,
    model: NoiseModel,
    mu_bright: float,
    challenge: Basis,
    rng=None,
) -> tuple[float, float]:
    """Vendor-side statistics of a forged card.

    Returns ``(accept_fraction, click_rate)``: the share of correct
    challenge-basis answers among pairs where both pulses clicked, and the
    share of pulses with at least one click.  Answers on vacuum pairs come
    from dark counts alone and are independent of any secret.
    """
    m = measure_card(forged.as_card(mu_bright), model, challenge, generator(rng))
    valid = m.valid
    if not valid.any():
        raise InsufficientStatisticsError("no pair of the forged card was post-selected")
    truth = secrets_to_array(forged.secrets)
    correct = m.relevant_correct(truth, challenge)
    return float(correct[valid].mean()), float(m.clicked.mean())
