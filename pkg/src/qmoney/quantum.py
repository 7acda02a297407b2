"""Small dense linear algebra for BB84 qubits and qubit pairs.

States are numpy arrays: kets are complex vectors of length 2 or 4, density
matrices and POVM effects are complex ``d x d`` arrays with ``d`` in {2, 4}.
The phase convention is |+-> = (|0> +- |1>)/sqrt(2) with real amplitudes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

ATOL = 1e-12
AGG_TOL = 1e-10

_SQRT_HALF = 1.0 / np.sqrt(2.0)


class Basis(enum.Enum):
    Z = "Z"
    X = "X"

    @property
    def conjugate(self) -> "Basis":
        return Basis.X if self is Basis.Z else Basis.Z


class StateLabel(enum.IntEnum):
    """The four BB84 states. Integer values index lookup tables."""

    ZERO = 0
    ONE = 1
    PLUS = 2
    MINUS = 3

    @property
    def basis(self) -> Basis:
        return Basis.Z if self < 2 else Basis.X

    @property
    def bit(self) -> int:
        return int(self) & 1

    @classmethod
    def from_basis_bit(cls, basis: Basis, bit: int) -> "StateLabel":
        return cls((0 if basis is Basis.Z else 2) + int(bit))

    @classmethod
    def parse(cls, text: str) -> "StateLabel":
        table = {"0": cls.ZERO, "1": cls.ONE, "+": cls.PLUS, "-": cls.MINUS, "−": cls.MINUS}
        try:
            return table[text]
        except KeyError:
            raise DomainError(f"unknown BB84 state label {text!r}") from None


KETS = np.array(
    [
        [1.0, 0.0],
        [0.0, 1.0],
        [_SQRT_HALF, _SQRT_HALF],
        [_SQRT_HALF, -_SQRT_HALF],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class PairSecret:
    """Bank secret for one card pair.

    ``b = 0`` puts the first qubit in Z and the second in X; ``b = 1`` the
    reverse. ``c0`` and ``c1`` are the bits carried by the first and second
    qubit.
    """

    b: int
    c0: int
    c1: int

    def __post_init__(self) -> None:
        for name in ("b", "c0", "c1"):
            if getattr(self, name) not in (0, 1):
                raise DomainError(f"{name} must be 0 or 1, got {getattr(self, name)!r}")

    @property
    def labels(self) -> tuple[StateLabel, StateLabel]:
        first = Basis.Z if self.b == 0 else Basis.X
        return (
            StateLabel.from_basis_bit(first, self.c0),
            StateLabel.from_basis_bit(first.conjugate, self.c1),
        )

    def qubit_in(self, basis: Basis) -> int:
        """Index (0 or 1) of the qubit encoded in ``basis``."""
        return self.b if basis is Basis.Z else 1 - self.b

    def bit_in(self, basis: Basis) -> int:
        return (self.c0, self.c1)[self.qubit_in(basis)]

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.b, self.c0, self.c1)


ALL_SECRETS: tuple[PairSecret, ...] = tuple(
    PairSecret(b, c0, c1) for b in (0, 1) for c0 in (0, 1) for c1 in (0, 1)
)


def ket(label: StateLabel | str) -> np.ndarray:
    if isinstance(label, str):
        label = StateLabel.parse(label)
    return KETS[int(label)].copy()


def projector(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def basis_projectors(basis: Basis) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the bit-0 and bit-1 states of ``basis``."""
    offset = 0 if basis is Basis.Z else 2
    return projector(KETS[offset]), projector(KETS[offset + 1])


def pair_state_from_secret(secret: PairSecret) -> np.ndarray:
    first, second = secret.labels
    return np.kron(KETS[int(first)], KETS[int(second)])


def single_qubit_density(label: StateLabel | str, p: float) -> np.ndarray:
    """Depolarized BB84 state ``p |s><s| + (1 - p) I/2``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"purity must lie in [0, 1], got {p}")
    return p * projector(ket(label)) + (1.0 - p) * np.eye(2) / 2.0


def born_probability(rho: np.ndarray, effect: np.ndarray) -> float:
    rho = np.asarray(rho)
    effect = np.asarray(effect)
    if rho.ndim != 2 or rho.shape != effect.shape or rho.shape[0] != rho.shape[1]:
        raise DomainError(f"dimension mismatch: rho {rho.shape}, effect {effect.shape}")
    return float(np.real(np.trace(effect @ rho)))


def is_density_matrix(rho: np.ndarray) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.allclose(rho, rho.conj().T, atol=ATOL, rtol=0):
        return False
    if abs(np.trace(rho) - 1.0) > ATOL:
        return False
    return bool(np.linalg.eigvalsh(rho).min() >= -AGG_TOL)


@dataclass(frozen=True)
class PovmDiagnostics:
    valid: bool
    min_eigenvalue: float
    completeness_error: float
    hermiticity_error: float

    def __bool__(self) -> bool:
        return self.valid


def validate_povm(elements: Sequence[np.ndarray], tol: float = AGG_TOL) -> PovmDiagnostics:
    """Check PSD-ness and completeness; report the worst violation of each."""
    mats = [np.asarray(e, dtype=complex) for e in elements]
    if not mats:
        return PovmDiagnostics(False, float("nan"), float("inf"), 0.0)
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        return PovmDiagnostics(False, float("nan"), float("inf"), float("inf"))
    herm = max(float(np.abs(m - m.conj().T).max()) for m in mats)
    min_eig = min(float(np.linalg.eigvalsh((m + m.conj().T) / 2).min()) for m in mats)
    completeness = float(np.abs(sum(mats) - np.eye(d)).max())
    valid = herm <= tol and min_eig >= -tol and completeness <= tol
    return PovmDiagnostics(valid, min_eig, completeness, herm)


def povm_probabilities(rho: np.ndarray, elements: Iterable[np.ndarray]) -> np.ndarray:
    return np.array([born_probability(rho, e) for e in elements])


def secrets_to_array(secrets: Iterable[PairSecret] | np.ndarray) -> np.ndarray:
    """Pack secrets into an ``(n, 3)`` uint8 array with columns b, c0, c1."""
    if isinstance(secrets, np.ndarray):
        arr = np.asarray(secrets, dtype=np.uint8)
        if arr.ndim != 2 or arr.shape[1] != 3 or (arr > 1).any():
            raise DomainError("secret array must have shape (n, 3) with 0/1 entries")
        return arr
    arr = np.array([s.as_tuple() for s in secrets], dtype=np.uint8)
    return arr.reshape(-1, 3)


def array_to_secrets(arr: np.ndarray) -> list[PairSecret]:
    return [PairSecret(int(b), int(c0), int(c1)) for b, c0, c1 in np.asarray(arr)]


def pulse_labels(secrets: np.ndarray) -> np.ndarray:
    """``(n, 2)`` array of StateLabel values for the two pulses of each pair."""
    secrets = secrets_to_array(secrets).astype(np.int64)
    b, c0, c1 = secrets[:, 0], secrets[:, 1], secrets[:, 2]
    return np.stack([2 * b + c0, 2 * (1 - b) + c1], axis=1)
