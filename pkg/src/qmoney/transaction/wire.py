"""Newline-delimited JSON messages between vendor and bank.

Every message is one UTF-8 line holding a JSON object with a ``type`` field:
``issue_request``, ``issue_response``, ``verify_request``, ``verify_response``
or ``error``.  Bits are 0/1 integers and serials 32-character hex strings.
The same encoder is used by the in-process channel and the TCP transport, so
both carry byte-identical messages.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
import time
from typing import Any, Callable

import numpy as np

from ..card import SimulatedCard
from ..detection import NoiseModel
from ..errors import ProtocolError, QMoneyError, TransportError
from ..quantum import Basis
from ..seeding import generator
from .protocol import Policy, Reason, VerifyRequest, VerifyVerdict, bank_verify, issue_card, vendor_measure
from .store import BankStore, check_serial, pack_secrets, unpack_secrets

logger = logging.getLogger(__name__)

MESSAGE_TYPES = frozenset(
    {"issue_request", "issue_response", "verify_request", "verify_response", "error"}
)
MAX_LINE = 64 * 1024 * 1024


def encode(msg: dict[str, Any]) -> bytes:
    if msg.get("type") not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {msg.get('type')!r}")
    return (json.dumps(msg, separators=(",", ":"), sort_keys=True) + "\n").encode("utf-8")


def decode(line: bytes | str) -> dict[str, Any]:
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed message: {exc}") from exc
    if not isinstance(msg, dict) or msg.get("type") not in MESSAGE_TYPES:
        raise ProtocolError("message must be an object with a known 'type'")
    return msg


# request / response bodies ------------------------------------------------


def verify_request_to_msg(req: VerifyRequest) -> dict[str, Any]:
    answers = [
        {
            "pair_index": int(i),
            "c0_guess": int(g[0]),
            "c1_guess": int(g[1]),
            "valid": int(v),
            "double_click": [int(d[0]), int(d[1])],
        }
        for i, g, v, d in zip(req.pair_index, req.guesses, req.valid, req.double_click)
    ]
    return {
        "type": "verify_request",
        "serial": req.serial,
        "challenge": req.challenge.value,
        "total_pairs": int(req.total_pairs),
        "answers": answers,
    }


def msg_to_verify_request(msg: dict[str, Any]) -> VerifyRequest:
    try:
        answers = msg["answers"]
        return VerifyRequest(
            check_serial(msg["serial"]),
            Basis(msg["challenge"]),
            int(msg["total_pairs"]),
            np.array([a["pair_index"] for a in answers], dtype=np.int64),
            np.array([(a["c0_guess"], a["c1_guess"]) for a in answers], dtype=np.uint8),
            np.array([a["valid"] for a in answers], dtype=bool),
            np.array([a.get("double_click", (0, 0)) for a in answers], dtype=bool),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad verify_request: {exc}") from exc


def verdict_to_msg(v: VerifyVerdict) -> dict[str, Any]:
    return {
        "type": "verify_response",
        "accept": v.accept,
        "fraction_correct": v.fraction_correct,
        "valid_pair_rate": v.valid_pair_rate,
        "reason": v.reason.value,
        "n_valid": v.n_valid,
    }


def msg_to_verdict(msg: dict[str, Any]) -> VerifyVerdict:
    if msg["type"] == "error":
        raise ProtocolError(f"bank error: {msg.get('message')}")
    if msg["type"] != "verify_response":
        raise ProtocolError(f"expected verify_response, got {msg['type']}")
    return VerifyVerdict(
        bool(msg["accept"]),
        float(msg["fraction_correct"]),
        float(msg["valid_pair_rate"]),
        Reason(msg["reason"]),
        int(msg.get("n_valid", 0)),
    )


def card_from_issue_response(msg: dict[str, Any]) -> SimulatedCard:
    """Rebuild the simulated quantum card carried by an issue_response."""
    if msg["type"] == "error":
        raise ProtocolError(f"bank error: {msg.get('message')}")
    n = int(msg["n"])
    return SimulatedCard(unpack_secrets(bytes.fromhex(msg["card"]), n), None, msg["serial"])


# bank service ---------------------------------------------------------------


class BankService:
    """Message handler around a store and an acceptance policy.

    ``policy_for(n)`` may return a size-dependent policy; a plain Policy is
    used for every card.
    """

    def __init__(
        self,
        store: BankStore,
        policy: Policy | Callable[[int], Policy],
        rng=None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.store = store
        self._policy = policy
        self._rng = generator(rng)
        self._issue_lock = threading.Lock()
        self._clock = clock

    def policy_for(self, n: int) -> Policy:
        return self._policy(n) if callable(self._policy) else self._policy

    def handle(self, msg: dict[str, Any]) -> dict[str, Any]:
        try:
            kind = msg.get("type")
            if kind == "issue_request":
                n = int(msg["n"])
                with self._issue_lock:
                    record, card = issue_card(n, self._rng, self.store, self._clock)
                return {
                    "type": "issue_response",
                    "serial": record.serial,
                    "n": record.n,
                    "card": pack_secrets(card.secrets).hex(),
                }
            if kind == "verify_request":
                req = msg_to_verify_request(msg)
                card = self.store.get(req.serial)
                policy = self.policy_for(card.n if card is not None else req.total_pairs)
                return verdict_to_msg(bank_verify(req, self.store, policy))
            raise ProtocolError(f"bank cannot handle {kind!r}")
        except (QMoneyError, KeyError, TypeError, ValueError) as exc:
            logger.warning("rejected %s message: %s", msg.get("type"), exc)
            return {"type": "error", "message": f"{type(exc).__name__}: {exc}"}

    def handle_line(self, line: bytes) -> bytes:
        try:
            msg = decode(line)
        except ProtocolError as exc:
            return encode({"type": "error", "message": str(exc)})
        return encode(self.handle(msg))


# channels -----------------------------------------------------------------


class InProcessChannel:
    """Vendor-side channel that calls the bank directly, still via the wire encoding."""

    def __init__(self, service: BankService) -> None:
        self.service = service

    def request(self, msg: dict[str, Any]) -> dict[str, Any]:
        return decode(self.service.handle_line(encode(msg)))

    def close(self) -> None:
        pass


class SocketChannel:
    """One TCP connection to a bank server; requests are answered in order."""

    def __init__(self, host: str, port: int, timeout: float = 60.0) -> None:
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot reach bank at {host}:{port}: {exc}") from exc
        self._file = self._sock.makefile("rwb")

    def request(self, msg: dict[str, Any]) -> dict[str, Any]:
        try:
            self._file.write(encode(msg))
            self._file.flush()
            line = self._file.readline(MAX_LINE)
        except OSError as exc:
            raise TransportError(f"bank connection failed: {exc}") from exc
        if not line:
            raise TransportError("bank closed the connection")
        return decode(line)

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "SocketChannel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def parse_address(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {address!r}")
    return host, int(port)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        service: BankService = self.server.service  # type: ignore[attr-defined]
        while True:
            line = self.rfile.readline(MAX_LINE)
            if not line:
                return
            self.wfile.write(service.handle_line(line))
            self.wfile.flush()


class BankServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service: BankService) -> None:
        super().__init__(address, _Handler)
        self.service = service

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t


# vendor side ----------------------------------------------------------------


def request_card(channel, n: int) -> SimulatedCard:
    return card_from_issue_response(channel.request({"type": "issue_request", "n": int(n)}))


def choose_challenge(gen: np.random.Generator) -> Basis:
    return Basis.Z if gen.integers(0, 2) == 0 else Basis.X


def run_transaction(channel, card: SimulatedCard, model: NoiseModel, rng=None) -> VerifyVerdict:
    """Vendor side: pick a challenge, measure, send one request, return the verdict."""
    gen = generator(rng)
    challenge = choose_challenge(gen)
    request = vendor_measure(card, model, challenge, gen)
    return msg_to_verdict(channel.request(verify_request_to_msg(request)))
