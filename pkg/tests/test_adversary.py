import math

import numpy as np
import pytest

from qmoney.adversary import (
    ANSWER_PAIRS,
    GUESSES,
    BreidbartProduct,
    CollectivePovm,
    NaiveBases,
    as_povm,
    cheat_probability,
    forge_card_usd,
    forged_card_verification_rate,
    guess_both_bits_probability,
    optimize_collective_povm,
    outcome_operators,
    wins,
)
from qmoney.card import SimulatedCard, expected_valid_pair_rate, measure_card
from qmoney.detection import NoiseModel
from qmoney.errors import DomainError
from qmoney.quantum import ALL_SECRETS, Basis, PairSecret, validate_povm
from qmoney.security import usd_probability

cp = pytest.importorskip("cvxpy")


def sdp_optimum(labels) -> float:
    """Independent oracle: maximize sum_k Tr[sigma_k P_k] as a semidefinite program."""
    ops = outcome_operators(labels)
    povm = [cp.Variable((4, 4), hermitian=True) for _ in ops]
    objective = cp.Maximize(cp.real(sum(cp.trace(op @ p) for op, p in zip(ops, povm))))
    constraints = [p >> 0 for p in povm] + [sum(povm) == np.eye(4)]
    prob = cp.Problem(objective, constraints)
    prob.solve()
    return float(prob.value)


class TestGame:
    def test_wins_requires_both_answers(self):
        s = PairSecret(0, 1, 0)  # Z bit on qubit 0 is 1, X bit on qubit 1 is 0
        assert wins(s, (1, 0), (0, 0))
        assert not wins(s, (0, 0), (0, 0))
        assert not wins(s, (1, 1), (1, 1))

    def test_operators_sum_to_weighted_identity(self):
        # each secret wins under 4 of the 16 answer pairs and the 8 states average to I/4
        total = sum(outcome_operators(ANSWER_PAIRS))
        assert np.allclose(total, np.eye(4))


class TestHierarchy:
    def test_naive(self):
        assert cheat_probability(NaiveBases()) == pytest.approx(5 / 8, abs=1e-12)

    def test_breidbart(self):
        assert cheat_probability(BreidbartProduct()) == pytest.approx(math.cos(math.pi / 8) ** 4, abs=1e-12)

    def test_product_povms_are_valid(self):
        for s in (NaiveBases(), BreidbartProduct()):
            assert validate_povm(as_povm(s).elements)

    def test_guess_both_bits_equals_game_for_single_guess(self):
        b = BreidbartProduct()
        assert guess_both_bits_probability(b) == pytest.approx(cheat_probability(b), abs=1e-12)

    def test_optimizer_reaches_three_quarters(self):
        res = optimize_collective_povm(rng=0, restarts=10)
        assert res.converged
        assert abs(res.value - 0.75) < 5e-3
        assert max(res.restart_values) <= 0.75 + 1e-3
        assert validate_povm(res.povm.elements, 1e-8)
        assert cheat_probability(res.povm) == pytest.approx(res.value, abs=1e-10)

    def test_optimizer_agrees_with_sdp(self):
        sdp = sdp_optimum(ANSWER_PAIRS)
        assert sdp == pytest.approx(0.75, abs=1e-4)
        res = optimize_collective_povm(rng=1, restarts=4)
        assert res.value == pytest.approx(sdp, abs=1e-4)

    def test_single_guess_game_peaks_at_breidbart(self):
        labels = tuple((g, g) for g in GUESSES)
        sdp = sdp_optimum(labels)
        res = optimize_collective_povm(rng=2, restarts=4, labels=labels)
        assert sdp == pytest.approx(math.cos(math.pi / 8) ** 4, abs=1e-4)
        assert res.value == pytest.approx(sdp, abs=1e-4)

    def test_parallel_restarts_are_reproducible(self):
        a = optimize_collective_povm(rng=5, restarts=6, workers=1)
        b = optimize_collective_povm(rng=5, restarts=6, workers=3)
        assert a.restart_values == b.restart_values

    def test_invalid_povm_rejected(self):
        bad = CollectivePovm(tuple(np.eye(4) for _ in range(4)))
        with pytest.raises(DomainError):
            cheat_probability(bad)

    def test_label_count_checked(self):
        with pytest.raises(DomainError):
            CollectivePovm((np.eye(4),) * 3)


class TestUsdForgery:
    secrets = np.repeat(np.array([s.as_tuple() for s in ALL_SECRETS], dtype=np.uint8), 25_000, axis=0)

    def test_identification_rate(self):
        forged = forge_card_usd(self.secrets, 1.0, rng=0)
        p = usd_probability(1.0)
        expect = 1 - (1 - p) ** 2
        sigma = math.sqrt(expect * (1 - expect) / len(forged))
        assert abs(forged.known_fraction - expect) < 5 * sigma

    def test_known_pairs_keep_secrets(self):
        forged = forge_card_usd(self.secrets, 2.0, rng=1)
        assert (forged.secrets[forged.known] == self.secrets[forged.known]).all()
        assert (forged.secrets[~forged.known] == 0).all()
        assert all((e is None) == (not k) for e, k in zip(forged.entries[:50], forged.known[:50]))

    def test_forged_card_is_caught_by_click_rate(self):
        model = NoiseModel(mu=1.0)
        forged = forge_card_usd(self.secrets, 1.0, rng=2)
        accept, click_rate = forged_card_verification_rate(forged, model, 1.0, Basis.Z, rng=3)
        honest = measure_card(SimulatedCard(self.secrets), model, Basis.Z, np.random.default_rng(3))
        assert click_rate < honest.clicked.mean() / 5
        # the pairs it did identify are answered like honest ones
        assert accept > 0.9

    def test_bright_reemission_cannot_restore_pair_rate_at_low_mu(self):
        model = NoiseModel(mu=0.1)
        p = usd_probability(0.1)
        known = 1 - (1 - p) ** 2
        # even with every identified pair detected for sure the rate stays far below
        assert known < expected_valid_pair_rate(model) / 3
