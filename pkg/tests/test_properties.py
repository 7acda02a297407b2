import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from qmoney.adversary import CollectivePovm, _random_povm, cheat_probability
from qmoney.detection import NoiseModel, Source, analytic_c, click_table
from qmoney.errors import InsecureParametersError
from qmoney.quantum import Basis
from qmoney.security import GameParams, SecurityMode, amplified_params, delta, security_threshold
from qmoney.transaction import Answer, BankStore, VerifyRequest, issue_card
from qmoney.transaction.store import pack_secrets, unpack_secrets
from qmoney.transaction.wire import decode, encode, msg_to_verify_request, verify_request_to_msg

probs = st.floats(0.0, 1.0, allow_nan=False)
mus = st.floats(1e-4, 2.0, allow_nan=False)
etas = st.floats(0.0, 2.0, allow_nan=False)
modes = st.sampled_from(list(SecurityMode))


@given(modes, probs, probs, etas, mus)
def test_delta_sign_matches_threshold(mode, c, eps, eta, mu):
    d = delta(mode, c, eps, eta, mu)
    thr = security_threshold(mode, eps, eta, mu)
    assert (d > 0) == (c > thr)


@given(modes, st.floats(0.88, 1.0), st.integers(1, 10**7), st.floats(0.001, 1.0), st.floats(1e-3, 0.5))
def test_amplified_params_are_probabilities(mode, c, n, eta, mu):
    try:
        amp = amplified_params(mode, GameParams(c, n=n, eta=eta, mu=mu))
    except InsecureParametersError:
        assert delta(mode, c, 0.75, eta, mu) <= 0
        return
    assert 0.0 <= amp.c_prime <= 1.0
    assert 0.0 <= amp.epsilon_prime <= 1.0
    assert amp.log_epsilon_prime <= 0.0


@given(st.floats(0.9, 1.0), st.integers(1, 10**6), st.integers(1, 10**6))
def test_epsilon_prime_decreases_with_n(c, n1, n2):
    lo, hi = sorted((n1, n2))
    a = amplified_params(SecurityMode.SINGLE_PHOTON, GameParams(c, n=lo))
    b = amplified_params(SecurityMode.SINGLE_PHOTON, GameParams(c, n=hi))
    assert b.log_epsilon_prime <= a.log_epsilon_prime
    assert b.c_prime >= a.c_prime


@given(st.sampled_from(list(Source)), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 0.01), probs)
def test_click_probabilities_in_unit_interval(source, mu, eta_det, p_dc, purity):
    m = NoiseModel(source, mu, eta_det, p_dc, purity)
    t = click_table(m)
    assert ((t >= 0) & (t <= 1)).all()
    if mu * eta_det > 1e-300 or p_dc > 0:
        c = analytic_c(m).c
        assert 0.0 <= c <= 1.0
        # polarization can only help relative to unpolarized light
        assert c >= analytic_c(NoiseModel(source, mu, eta_det, p_dc, 0.0)).c - 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(1, 16))
@settings(max_examples=25, deadline=None)
def test_any_povm_is_bounded_by_three_quarters(seed, k):
    povm = _random_povm(k if k in (4, 16) else 16, 4, np.random.default_rng(seed))
    value = cheat_probability(CollectivePovm(tuple(povm)))
    assert value <= 0.75 + 1e-9


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=300))
def test_secret_packing_roundtrip(rows):
    arr = np.array(rows, dtype=np.uint8)
    assert (unpack_secrets(pack_secrets(arr), len(arr)) == arr).all()


answer = st.tuples(st.integers(0, 1), st.integers(0, 1), st.booleans(), st.booleans(), st.booleans())


@given(st.sampled_from([Basis.Z, Basis.X]), st.dictionaries(st.integers(0, 499), answer, max_size=60))
def test_verify_request_wire_roundtrip(challenge, table):
    answers = [Answer(i, g0, g1, v, (d0, d1)) for i, (g0, g1, v, d0, d1) in sorted(table.items())]
    req = VerifyRequest.from_answers("0f" * 16, challenge, 500, answers)
    back = msg_to_verify_request(decode(encode(verify_request_to_msg(req))))
    assert back.answers == req.answers
    assert back.challenge is challenge


@given(st.lists(st.tuples(st.integers(1, 50), st.integers(0, 3)), min_size=1, max_size=6))
@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_store_replay_matches_memory(tmp_path_factory, plan):
    path = tmp_path_factory.mktemp("store") / "bank.qms"
    store = BankStore(path)
    rng = np.random.default_rng(0)
    for n, uses in plan:
        rec, _ = issue_card(n, rng, store)
        for _ in range(uses):
            store.record_use(rec.serial, max_uses=2)
    again = BankStore(path)
    assert len(again) == len(store)
    for card in store.cards():
        other = again.get(card.serial)
        assert other.verifications_used == card.verifications_used <= 2
        assert (other.secrets == card.secrets).all()
        assert math.isclose(other.issued_at, card.issued_at)
