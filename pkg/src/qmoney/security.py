"""Security calculus for the n-pair card game.

Three operating modes share one structure: an honest correctness ``c`` must
beat a threshold ``(epsilon + penalty + 1) / 2`` where the penalty is zero
for true single photons, ``(1 + eta) P_D(mu)`` against unambiguous state
discrimination on weak coherent pulses, and ``(1 + eta) lambda(mu)`` for
arbitrary attacks on phase-randomized pulses.  The slack
``delta = (2c - epsilon - penalty - 1) / 3`` then drives Chernoff-type
amplification to the parameters (c', epsilon') of the n-pair game.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError, InsecureParametersError, OutOfValidityError

PAIR_GAME_EPSILON = 0.75
USD_MU_MAX = 2.0


class SecurityMode(enum.Enum):
    SINGLE_PHOTON = "single-photon"
    WCS_USD = "wcs-usd"
    PHASE_RANDOMIZED = "phase-randomized"


@dataclass(frozen=True)
class GameParams:
    c: float
    epsilon: float = PAIR_GAME_EPSILON
    n: int = 1
    eta: float = 0.0
    mu: float = 0.0
    per_pair: bool = False

    def __post_init__(self) -> None:
        for name in ("c", "epsilon"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be a probability, got {v}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if self.eta < 0 or self.mu < 0:
            raise DomainError("eta and mu must be non-negative")


@dataclass(frozen=True)
class AmplifiedParams:
    c_prime: float
    epsilon_prime: float
    delta: float
    log_epsilon_prime: float = float("nan")


def usd_probability(mu: float) -> float:
    """Per-pulse success probability of unambiguous discrimination.

    ``2 exp(-mu/2) (sinh(mu/2) - sin(mu/2))``, valid for ``0 <= mu <= 2``.
    The bracket is summed as its odd power series
    ``2 sum_k x^(4k+3) / (4k+3)!`` to avoid cancellation at small ``mu``.
    """
    if mu < 0:
        raise DomainError(f"mu must be >= 0, got {mu}")
    if mu > USD_MU_MAX:
        raise OutOfValidityError(f"USD formula only holds for mu <= {USD_MU_MAX}, got {mu}")
    x = mu / 2.0
    term = x**3 / 6.0
    total = 0.0
    k = 3
    while term > 1e-18 * max(total, 1e-300):
        total += term
        term *= x**4 / ((k + 1) * (k + 2) * (k + 3) * (k + 4))
        k += 4
    return 2.0 * math.exp(-x) * 2.0 * total


def multiphoton_fraction(mu: float) -> float:
    """Share of non-vacuum Poisson pulses carrying two or more photons."""
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    # 1 - (1 + mu) e^-mu = -expm1(-mu) - mu e^-mu, stable for small mu
    nonvac = -math.expm1(-mu)
    return (nonvac - mu * math.exp(-mu)) / nonvac


def attack_rate(mode: SecurityMode, mu: float, per_pair: bool = False) -> float:
    """Per-pulse probability handed to the adversary (P_D or lambda).

    ``per_pair=True`` uses ``1 - (1 - P_D)**2``, the chance that at least
    one pulse of a pair is identified.
    """
    if mode is SecurityMode.SINGLE_PHOTON:
        return 0.0
    if mode is SecurityMode.WCS_USD:
        p = usd_probability(mu)
        return 1.0 - (1.0 - p) ** 2 if per_pair else p
    return multiphoton_fraction(mu)


def security_threshold(
    mode: SecurityMode,
    epsilon: float = PAIR_GAME_EPSILON,
    eta: float = 0.0,
    mu: float = 0.0,
    per_pair: bool = False,
) -> float:
    """Minimum honest correctness; values >= 1 mean no secure operating point."""
    penalty = (1.0 + eta) * attack_rate(mode, mu, per_pair)
    return (epsilon + penalty + 1.0) / 2.0


def delta(
    mode: SecurityMode,
    c: float,
    epsilon: float = PAIR_GAME_EPSILON,
    eta: float = 0.0,
    mu: float = 0.0,
    per_pair: bool = False,
) -> float:
    # 2(c - thr)/3 == (2c - eps - penalty - 1)/3; shares rounding with the threshold
    return 2.0 * (c - security_threshold(mode, epsilon, eta, mu, per_pair)) / 3.0


def chernoff_tail(n: int, eta: float, rate: float) -> float:
    """Bound on Pr[L >= (1 + eta) rate n] for a sum L of n Bernoulli(rate)."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if eta < 0 or not 0.0 <= rate <= 1.0:
        raise DomainError("need eta >= 0 and rate in [0, 1]")
    return math.exp(-rate * n * eta * eta / 3.0)


def _log_epsilon_prime(mode, c, epsilon, n, eta, rate) -> tuple[float, float]:
    thr = (epsilon + (1.0 + eta) * rate + 1.0) / 2.0
    d = 2.0 * (c - thr) / 3.0
    game = -epsilon * n * d * d / 3.0
    if mode is SecurityMode.SINGLE_PHOTON:
        return game, d
    tail = -rate * n * eta * eta / 3.0
    return float(np.logaddexp(game, tail)), d


def amplified_params(mode: SecurityMode, params: GameParams) -> AmplifiedParams:
    rate = attack_rate(mode, params.mu, params.per_pair)
    eta = 0.0 if mode is SecurityMode.SINGLE_PHOTON else params.eta
    log_eps, d = _log_epsilon_prime(mode, params.c, params.epsilon, params.n, eta, rate)
    if not d > 0:
        raise InsecureParametersError(
            f"delta = {d:.6g} <= 0: c = {params.c} does not beat the {mode.value} threshold"
        )
    c_prime = -math.expm1(-params.c * params.n * d * d / 2.0)
    return AmplifiedParams(c_prime, min(1.0, math.exp(log_eps)), d, min(0.0, log_eps))


def loss_security_margin(mu: float, eta_total: float) -> float:
    """``eta_total + ln(1 - P_D) / mu``; positive when the loss attack shows up."""
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    if not 0.0 <= eta_total <= 1.0:
        raise DomainError(f"eta_total must lie in [0, 1], got {eta_total}")
    return eta_total + math.log1p(-usd_probability(mu)) / mu


def max_feasible_eta(mode: SecurityMode, c: float, epsilon: float, mu: float, per_pair=False) -> float:
    """Largest eta that still leaves delta > 0 (``inf`` if the rate vanishes)."""
    rate = attack_rate(mode, mu, per_pair)
    if 2.0 * c - epsilon - rate - 1.0 <= 0:
        raise InsecureParametersError("delta <= 0 for every eta > 0")
    if rate == 0.0:
        return math.inf
    return (2.0 * c - epsilon - 1.0) / rate - 1.0


@dataclass(frozen=True)
class EtaOptimum:
    eta: float
    epsilon_prime: float
    log_epsilon_prime: float


def optimize_eta(
    mode: SecurityMode,
    c: float,
    epsilon: float,
    mu: float,
    n: int,
    eta_max: float | None = None,
    grid: int = 2000,
    per_pair: bool = False,
) -> EtaOptimum:
    """Choose the finite-size slack eta that minimizes epsilon'.

    The two terms of epsilon' pull eta in opposite directions.  A log-spaced
    grid over ``(0, eta_max]`` brackets the minimum of ``log epsilon'``, then
    bounded Brent refines it.  ``eta_max`` defaults to the feasibility edge
    where delta reaches zero.
    """
    if mode is SecurityMode.SINGLE_PHOTON:
        raise DomainError("eta only enters the weak coherent modes")
    rate = attack_rate(mode, mu, per_pair)
    edge = max_feasible_eta(mode, c, epsilon, mu, per_pair)
    hi = edge if eta_max is None else min(eta_max, edge)
    if not math.isfinite(hi):
        hi = 1e6

    def objective(eta: float) -> float:
        return _log_epsilon_prime(mode, c, epsilon, n, eta, rate)[0]

    etas = np.geomspace(hi * 1e-8, hi, grid)
    # stay strictly inside the feasible region at the edge
    etas[-1] = hi * (1 - 1e-12)
    vals = np.array([objective(e) for e in etas])
    i = int(np.argmin(vals))
    lo_b = etas[max(i - 1, 0)]
    hi_b = etas[min(i + 1, grid - 1)]
    best_eta, best = float(etas[i]), float(vals[i])
    if hi_b > lo_b:
        res = optimize.minimize_scalar(
            objective, bounds=(lo_b, hi_b), method="bounded", options={"xatol": lo_b * 1e-10}
        )
        if res.fun <= best:
            best_eta, best = float(res.x), float(res.fun)
    return EtaOptimum(best_eta, min(1.0, math.exp(best)), best)


def required_n(
    mode: SecurityMode,
    c: float,
    epsilon: float,
    mu: float,
    eta: float,
    target_epsilon_prime: float,
    per_pair: bool = False,
) -> int:
    """Smallest n whose amplified epsilon' is at most the target."""
    if not 0.0 < target_epsilon_prime < 1.0:
        raise DomainError("target must lie in (0, 1)")
    rate = attack_rate(mode, mu, per_pair)
    eta = 0.0 if mode is SecurityMode.SINGLE_PHOTON else eta
    _, d = _log_epsilon_prime(mode, c, epsilon, 1, eta, rate)
    if not d > 0:
        raise InsecureParametersError(f"delta = {d:.6g} <= 0")
    if mode is not SecurityMode.SINGLE_PHOTON and rate > 0 and eta == 0.0:
        raise InsecureParametersError("eta = 0 leaves the Chernoff tail at 1")
    log_t = math.log(target_epsilon_prime)

    def ok(n: int) -> bool:
        return _log_epsilon_prime(mode, c, epsilon, n, eta, rate)[0] <= log_t

    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > 1 << 62:
            raise InsecureParametersError("target unreachable")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
