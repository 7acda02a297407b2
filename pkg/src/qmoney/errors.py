"""Exception hierarchy shared across the package."""


class QMoneyError(Exception):
    """Base class for all package errors."""


class DomainError(QMoneyError, ValueError):
    """An argument lies outside the domain of the operation."""


class OutOfValidityError(DomainError):
    """A formula was evaluated outside its stated range of validity."""


class UndefinedPostSelectionError(QMoneyError, ArithmeticError):
    """Post-selected correctness requested with zero click probability."""


class InsufficientStatisticsError(QMoneyError):
    """A sample contains no post-selected events for some prepared state."""


class InsecureParametersError(QMoneyError):
    """The parameters give a non-positive security slack (delta <= 0)."""


class StoreError(QMoneyError, OSError):
    """Reading or writing the bank key store failed."""


class TransportError(QMoneyError, ConnectionError):
    """The vendor could not exchange messages with the bank."""


class ProtocolError(QMoneyError):
    """A wire message was malformed or had an unexpected type."""
