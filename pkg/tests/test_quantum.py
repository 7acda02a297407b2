import numpy as np
import pytest

from qmoney.errors import DomainError
from qmoney.quantum import (
    ALL_SECRETS,
    Basis,
    PairSecret,
    StateLabel,
    array_to_secrets,
    basis_projectors,
    born_probability,
    is_density_matrix,
    ket,
    pair_state_from_secret,
    projector,
    pulse_labels,
    secrets_to_array,
    single_qubit_density,
    validate_povm,
)


class TestStates:
    def test_kets_are_normalized_bb84(self):
        for s in StateLabel:
            assert np.isclose(np.vdot(ket(s), ket(s)).real, 1.0)
        assert abs(np.vdot(ket("0"), ket("1"))) < 1e-15
        assert abs(np.vdot(ket("+"), ket("-"))) < 1e-15
        assert np.isclose(abs(np.vdot(ket("0"), ket("+"))) ** 2, 0.5)

    def test_parse_accepts_unicode_minus(self):
        assert StateLabel.parse("−") is StateLabel.MINUS
        with pytest.raises(ValueError):
            StateLabel.parse("x")

    def test_pair_state_for_secret_011(self):
        # b=0: first qubit in Z carrying c0=1, second in X carrying c1=1
        psi = pair_state_from_secret(PairSecret(0, 1, 1))
        assert np.allclose(psi, np.kron([0, 1], [1, -1]) / np.sqrt(2))

    def test_secret_layout(self):
        s = PairSecret(1, 0, 1)
        assert s.labels == (StateLabel.PLUS, StateLabel.ONE)
        assert s.qubit_in(Basis.Z) == 1 and s.bit_in(Basis.Z) == 1
        assert s.qubit_in(Basis.X) == 0 and s.bit_in(Basis.X) == 0

    def test_bad_secret_bit(self):
        with pytest.raises(DomainError):
            PairSecret(2, 0, 0)

    def test_all_eight_pair_states_distinct(self):
        states = np.array([pair_state_from_secret(s) for s in ALL_SECRETS])
        gram = np.abs(states.conj() @ states.T)
        assert np.allclose(np.diag(gram), 1)
        assert (gram[~np.eye(8, dtype=bool)] < 1 - 1e-9).all()


class TestDensity:
    @pytest.mark.parametrize("p", [0.0, 0.5, 0.93, 1.0])
    def test_depolarized_state_is_density(self, p):
        for s in StateLabel:
            rho = single_qubit_density(s, p)
            assert is_density_matrix(rho)
            assert np.isclose(np.trace(rho @ rho).real, (1 + p * p) / 2)

    def test_purity_out_of_range(self):
        with pytest.raises(DomainError):
            single_qubit_density("0", 1.2)

    def test_born_dimension_mismatch(self):
        with pytest.raises(DomainError):
            born_probability(np.eye(2) / 2, np.eye(4))

    def test_born_matches_hand_value(self):
        rho = single_qubit_density("+", 0.93)
        p0, p1 = basis_projectors(Basis.X)
        assert np.isclose(born_probability(rho, p0), (1 + 0.93) / 2)
        assert np.isclose(born_probability(rho, p1), (1 - 0.93) / 2)


class TestPovm:
    def test_basis_measurement_is_valid(self):
        assert validate_povm(basis_projectors(Basis.Z))

    def test_incomplete_povm_reports_error(self):
        diag = validate_povm([projector(ket("0"))])
        assert not diag
        assert np.isclose(diag.completeness_error, 1.0)

    def test_negative_element_reported(self):
        diag = validate_povm([np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])])
        assert not diag.valid
        assert diag.min_eigenvalue == pytest.approx(-0.5)


class TestArrays:
    def test_roundtrip(self):
        arr = secrets_to_array(ALL_SECRETS)
        assert arr.shape == (8, 3)
        assert array_to_secrets(arr) == list(ALL_SECRETS)

    def test_pulse_labels_agree_with_secret_labels(self):
        labels = pulse_labels(secrets_to_array(ALL_SECRETS))
        for s, row in zip(ALL_SECRETS, labels):
            assert tuple(StateLabel(int(x)) for x in row) == s.labels

    def test_rejects_non_bits(self):
        with pytest.raises(DomainError):
            secrets_to_array(np.array([[0, 2, 0]]))
