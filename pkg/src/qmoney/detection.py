"""Card-reader model: threshold detectors with finite efficiency and dark counts.

Each pulse is measured in Z or X by a polarizing beam splitter followed by
two threshold detectors, ``D0`` (outputs 0 / +) and ``D1`` (outputs 1 / -).
The click probability of detector ``d`` for a prepared state ``rho`` is

    P(d) = p_dc + f(mu, eta_det) * Tr[Pi_d rho]

with ``f = 1 - exp(-mu eta_det)`` for weak coherent pulses and
``f = mu eta_det`` for single photons emitted with efficiency ``mu``.
Pulses with no click are discarded (post-selection).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import DomainError, InsufficientStatisticsError, UndefinedPostSelectionError
from .quantum import (
    Basis,
    PairSecret,
    StateLabel,
    basis_projectors,
    born_probability,
    pulse_labels,
    secrets_to_array,
    single_qubit_density,
)
from .seeding import map_chunks

BASES = (Basis.Z, Basis.X)


class Source(enum.Enum):
    WEAK_COHERENT = "weak-coherent"
    SINGLE_PHOTON = "single-photon"


@dataclass(frozen=True)
class NoiseModel:
    """Source and detector parameters of the card reader.

    ``mu`` is the mean photon number per detector gate for weak coherent
    pulses, or the emission efficiency for a single-photon source.
    """

    source: Source = Source.WEAK_COHERENT
    mu: float = 0.1
    eta_det: float = 0.25
    p_dc: float = 7e-5
    purity: float = 0.93

    def __post_init__(self) -> None:
        if not self.mu >= 0:
            raise DomainError(f"mu must be >= 0, got {self.mu}")
        if not 0.0 <= self.eta_det <= 1.0:
            raise DomainError(f"eta_det must lie in [0, 1], got {self.eta_det}")
        if not 0.0 <= self.p_dc <= 1.0:
            raise DomainError(f"p_dc must lie in [0, 1], got {self.p_dc}")
        if not 0.0 <= self.purity <= 1.0:
            raise DomainError(f"purity must lie in [0, 1], got {self.purity}")
        if self.source is Source.SINGLE_PHOTON and self.mu * self.eta_det > 1.0:
            raise DomainError("single-photon source needs mu * eta_det <= 1")

    def with_mu(self, mu: float) -> "NoiseModel":
        return replace(self, mu=mu)

    def detection_factor(self, mu=None):
        """Probability that the light triggers a unit-efficiency-weighted click."""
        mu = self.mu if mu is None else mu
        x = np.asarray(mu, dtype=float) * self.eta_det
        if self.source is Source.SINGLE_PHOTON:
            return x if x.ndim else float(x)
        f = -np.expm1(-x)
        return f if f.ndim else float(f)


@lru_cache(maxsize=64)
def _trace_table(purity: float) -> np.ndarray:
    """``Tr[Pi_d rho_s]`` indexed ``[label, basis, detector]``."""
    table = np.empty((4, 2, 2))
    for s in StateLabel:
        rho = single_qubit_density(s, purity)
        for bi, basis in enumerate(BASES):
            for d, proj in enumerate(basis_projectors(basis)):
                table[s, bi, d] = born_probability(rho, proj)
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class ClickOutcome:
    d0: bool
    d1: bool

    @property
    def detected(self) -> bool:
        return self.d0 or self.d1

    @property
    def double(self) -> bool:
        return self.d0 and self.d1


def click_probabilities(
    model: NoiseModel, prepared: StateLabel | str, basis: Basis
) -> tuple[float, float]:
    if isinstance(prepared, str):
        prepared = StateLabel.parse(prepared)
    rho = single_qubit_density(prepared, model.purity)
    f = model.detection_factor()
    probs = [
        min(1.0, max(0.0, model.p_dc + f * born_probability(rho, proj)))
        for proj in basis_projectors(basis)
    ]
    return probs[0], probs[1]


def click_table(model: NoiseModel, mu=None) -> np.ndarray:
    """Click probabilities indexed ``[..., label, basis, detector]``.

    ``mu`` may be an array of per-pulse intensities; a leading axis is then
    added for it.
    """
    f = np.asarray(model.detection_factor(mu), dtype=float)
    tr = _trace_table(model.purity)
    return np.clip(model.p_dc + f[..., None, None, None] * tr, 0.0, 1.0)


def sample_clicks(
    model: NoiseModel, prepared: StateLabel | str, basis: Basis, rng: np.random.Generator
) -> ClickOutcome:
    p0, p1 = click_probabilities(model, prepared, basis)
    u = rng.random(2)
    return ClickOutcome(bool(u[0] < p0), bool(u[1] < p1))


def sample_detections(
    labels: np.ndarray,
    basis: Basis,
    model: NoiseModel,
    rng: np.random.Generator,
    mu=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized click sampling for an array of prepared-state labels.

    ``mu`` overrides the model intensity, either as a scalar or as an array
    broadcastable to ``labels``.
    """
    labels = np.asarray(labels)
    bi = BASES.index(basis)
    if mu is None or np.ndim(mu) == 0:
        probs = click_table(model, mu)[labels, bi]
    else:
        f = np.broadcast_to(np.asarray(model.detection_factor(mu), dtype=float), labels.shape)
        tr = _trace_table(model.purity)[labels, bi]
        probs = np.clip(model.p_dc + f[..., None] * tr, 0.0, 1.0)
    u = rng.random(probs.shape)
    hits = u < probs
    return hits[..., 0], hits[..., 1]


def postselected_correctness(prob_correct: float, prob_wrong: float) -> float:
    """Probability that only the correct detector clicks, given any click."""
    # same as 1 - (1 - a)(1 - b), without cancellation for tiny rates
    detected = prob_correct + prob_wrong - prob_correct * prob_wrong
    if detected <= 0.0:
        raise UndefinedPostSelectionError("no click is possible: post-selection undefined")
    return prob_correct * (1.0 - prob_wrong) / detected


@dataclass(frozen=True)
class CorrectnessEstimate:
    """Correctness for the two challenges and their average.

    When only one basis was measured the other component is ``None`` and
    ``c`` equals the measured one.  Counts are summed over measured blocks
    and count pulses (two per pair).
    """

    c_zz: float | None
    c_xx: float | None
    c: float
    sigma_c: float = 0.0
    n_postselected: int | None = None
    n_total: int | None = None
    state_correctness: tuple[float, float, float, float] | None = None

    @property
    def postselected_fraction(self) -> float:
        if not self.n_total:
            return float("nan")
        return self.n_postselected / self.n_total


def state_correctness(model: NoiseModel, prepared: StateLabel) -> float:
    p0, p1 = click_probabilities(model, prepared, prepared.basis)
    if prepared.bit == 0:
        return postselected_correctness(p0, p1)
    return postselected_correctness(p1, p0)


def analytic_c(model: NoiseModel) -> CorrectnessEstimate:
    cs = tuple(state_correctness(model, s) for s in StateLabel)
    c_zz = (cs[0] + cs[1]) / 2
    c_xx = (cs[2] + cs[3]) / 2
    return CorrectnessEstimate(c_zz, c_xx, (c_zz + c_xx) / 2, state_correctness=cs)


def _count_block(labels: np.ndarray, basis: Basis, model: NoiseModel, rng) -> np.ndarray:
    """Counts ``[label, (correct-only, any-click)]`` plus total clicked pulses."""
    d0, d1 = sample_detections(labels, basis, model, rng)
    any_click = d0 | d1
    bits = labels & 1
    correct_only = np.where(bits == 0, d0 & ~d1, d1 & ~d0)
    counts = np.zeros((5, 2), dtype=np.int64)
    matched = (labels >> 1) == BASES.index(basis)
    for s in StateLabel:
        if StateLabel(s).basis is not basis:
            continue
        mask = matched & (labels == s)
        counts[s, 0] = np.count_nonzero(correct_only & mask)
        counts[s, 1] = np.count_nonzero(any_click & mask)
    counts[4, 0] = np.count_nonzero(any_click)
    counts[4, 1] = labels.size
    return counts


def estimate_correctness_mc(
    block: Iterable[PairSecret] | np.ndarray,
    model: NoiseModel,
    rng=None,
    challenge: Basis | None = None,
    workers: int = 1,
    chunk_pairs: int = 1 << 17,
) -> CorrectnessEstimate:
    """Monte Carlo correctness of a block of pairs measured pulse by pulse.

    With ``challenge=None`` the whole block is measured once in Z and once in
    X, mirroring separate c_zz and c_xx runs.  Errors follow Poisson
    propagation of the click counts: for ``A`` correct-only and ``B`` other
    post-selected events, ``var(A / (A + B)) = A B / (A + B)**3``.
    """
    labels = pulse_labels(secrets_to_array(block))
    n = labels.shape[0]
    if n == 0:
        raise DomainError("block must contain at least one pair")
    bases = BASES if challenge is None else (challenge,)

    def work(lo: int, hi: int, gen: np.random.Generator) -> np.ndarray:
        return np.stack([_count_block(labels[lo:hi], b, model, gen) for b in bases])

    parts = map_chunks(work, n, rng, chunk=chunk_pairs, workers=workers)
    counts = np.sum(parts, axis=0)

    per_state: dict[int, tuple[float, float]] = {}
    for bi, basis in enumerate(bases):
        for s in StateLabel:
            if s.basis is not basis:
                continue
            a, tot = counts[bi, s]
            if tot == 0:
                raise InsufficientStatisticsError(f"no post-selected pulses for state {s.name}")
            b = tot - a
            per_state[s] = (a / tot, a * b / tot**3)

    def pair_mean(s0: StateLabel, s1: StateLabel) -> float | None:
        if s0 not in per_state:
            return None
        return (per_state[s0][0] + per_state[s1][0]) / 2

    c_zz = pair_mean(StateLabel.ZERO, StateLabel.ONE)
    c_xx = pair_mean(StateLabel.PLUS, StateLabel.MINUS)
    measured = [c for c in (c_zz, c_xx) if c is not None]
    c = sum(measured) / len(measured)
    sigma = math.sqrt(sum(v for _, v in per_state.values())) / len(per_state)
    cs = tuple(per_state[s][0] if s in per_state else float("nan") for s in StateLabel)
    return CorrectnessEstimate(
        c_zz,
        c_xx,
        c,
        sigma_c=sigma,
        n_postselected=int(counts[:, 4, 0].sum()),
        n_total=int(counts[:, 4, 1].sum()),
        state_correctness=cs,
    )
