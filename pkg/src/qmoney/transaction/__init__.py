"""Card issuance, vendor measurement and bank verification."""

from .protocol import (
    Answer,
    Policy,
    Reason,
    VerifyRequest,
    VerifyVerdict,
    bank_verify,
    issue_card,
    make_policy,
    vendor_measure,
)
from .store import BankStore, IssuedCard
from .wire import (
    BankServer,
    BankService,
    InProcessChannel,
    SocketChannel,
    request_card,
    run_transaction,
)

__all__ = [
    "Answer",
    "BankServer",
    "BankService",
    "BankStore",
    "InProcessChannel",
    "IssuedCard",
    "Policy",
    "Reason",
    "SocketChannel",
    "VerifyRequest",
    "VerifyVerdict",
    "bank_verify",
    "issue_card",
    "make_policy",
    "request_card",
    "run_transaction",
    "vendor_measure",
]
