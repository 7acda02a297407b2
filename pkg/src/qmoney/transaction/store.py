"""Append-only bank key store.

File layout (little endian)::

    header   b"QMNY" | u16 version
    record   u8 kind | u32 payload length | payload | u32 crc32(kind + payload)

    kind 'C' (card):  16-byte serial | u32 n | f64 issued_at | packed secrets
    kind 'U' (use):   16-byte serial

Secrets are packed 3 bits per pair (b, c0, c1) with ``numpy.packbits``.
Use counts are rebuilt by replaying 'U' records on load.
"""

from __future__ import annotations

import os
import struct
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import DomainError, StoreError

MAGIC = b"QMNY"
VERSION = 1
_HEADER = struct.Struct("<4sH")
_RECORD = struct.Struct("<cI")
_CARD = struct.Struct("<16sId")
_CRC = struct.Struct("<I")


def pack_secrets(secrets: np.ndarray) -> bytes:
    return np.packbits(np.asarray(secrets, dtype=np.uint8).reshape(-1)).tobytes()


def unpack_secrets(data: bytes, n: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=3 * n)
    return bits.reshape(n, 3).astype(np.uint8)


def check_serial(serial: str) -> str:
    if len(serial) != 32:
        raise DomainError(f"serial must be 32 hex characters, got {serial!r}")
    try:
        bytes.fromhex(serial)
    except ValueError:
        raise DomainError(f"serial must be 32 hex characters, got {serial!r}") from None
    return serial.lower()


@dataclass
class IssuedCard:
    serial: str
    secrets: np.ndarray
    issued_at: float
    verifications_used: int = 0

    @property
    def n(self) -> int:
        return len(self.secrets)


class BankStore:
    """Card secrets keyed by serial, optionally persisted to ``path``.

    All mutation goes through one lock, so issuance and use-counter updates
    are atomic across threads.
    """

    def __init__(self, path: str | os.PathLike | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._cards: dict[str, IssuedCard] = {}
        self._lock = threading.Lock()
        if self.path is not None:
            if self.path.exists() and self.path.stat().st_size > 0:
                self._load()
            else:
                self._write(_HEADER.pack(MAGIC, VERSION), mode="wb")

    # persistence ------------------------------------------------------

    def _write(self, data: bytes, mode: str = "ab") -> None:
        assert self.path is not None
        try:
            with open(self.path, mode) as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StoreError(f"cannot write key store {self.path}: {exc}") from exc

    @staticmethod
    def _frame(kind: bytes, payload: bytes) -> bytes:
        crc = zlib.crc32(kind + payload)
        return _RECORD.pack(kind, len(payload)) + payload + _CRC.pack(crc)

    def _load(self) -> None:
        assert self.path is not None
        try:
            raw = self.path.read_bytes()
        except OSError as exc:
            raise StoreError(f"cannot read key store {self.path}: {exc}") from exc
        if len(raw) < _HEADER.size:
            raise StoreError("truncated key store header")
        magic, version = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise StoreError("not a key store file")
        if version != VERSION:
            raise StoreError(f"unsupported key store version {version}")
        for kind, payload in _iter_records(raw, _HEADER.size):
            if kind == b"C":
                serial_b, n, issued_at = _CARD.unpack_from(payload)
                secrets = unpack_secrets(payload[_CARD.size :], n)
                self._cards[serial_b.hex()] = IssuedCard(serial_b.hex(), secrets, issued_at)
            elif kind == b"U":
                card = self._cards.get(payload[:16].hex())
                if card is None:
                    raise StoreError("use record for unknown serial")
                card.verifications_used += 1
            else:
                raise StoreError(f"unknown record kind {kind!r}")

    # public API -------------------------------------------------------

    def __contains__(self, serial: str) -> bool:
        return serial in self._cards

    def __len__(self) -> int:
        return len(self._cards)

    def get(self, serial: str) -> IssuedCard | None:
        return self._cards.get(serial)

    def cards(self) -> list[IssuedCard]:
        return list(self._cards.values())

    def add(self, card: IssuedCard) -> None:
        """Persist a new card; nothing is kept in memory if the write fails."""
        serial = check_serial(card.serial)
        with self._lock:
            if serial in self._cards:
                raise DomainError(f"duplicate serial {serial}")
            if self.path is not None:
                payload = _CARD.pack(bytes.fromhex(serial), card.n, card.issued_at)
                self._write(self._frame(b"C", payload + pack_secrets(card.secrets)))
            self._cards[serial] = card

    def record_use(self, serial: str, max_uses: int | None = None) -> int | None:
        """Atomically bump the use counter unless it already reached ``max_uses``.

        Returns the new count, or ``None`` when the card is exhausted.
        """
        with self._lock:
            card = self._cards[serial]
            if max_uses is not None and card.verifications_used >= max_uses:
                return None
            if self.path is not None:
                self._write(self._frame(b"U", bytes.fromhex(serial)))
            card.verifications_used += 1
            return card.verifications_used

    def dump(self) -> str:
        lines = [f"# key store {self.path or '<memory>'} version {VERSION}, {len(self)} cards"]
        lines.append("serial,n,issued_at,verifications_used,secrets_hex")
        for card in self._cards.values():
            lines.append(
                f"{card.serial},{card.n},{card.issued_at!r},{card.verifications_used},"
                f"{pack_secrets(card.secrets).hex()}"
            )
        return "\n".join(lines) + "\n"


def _iter_records(raw: bytes, offset: int) -> Iterator[tuple[bytes, bytes]]:
    while offset < len(raw):
        if offset + _RECORD.size > len(raw):
            raise StoreError("truncated record header")
        kind, length = _RECORD.unpack_from(raw, offset)
        start = offset + _RECORD.size
        end = start + length
        if end + _CRC.size > len(raw):
            raise StoreError("truncated record")
        payload = raw[start:end]
        (crc,) = _CRC.unpack_from(raw, end)
        if crc != zlib.crc32(kind + payload):
            raise StoreError(f"checksum mismatch in record at byte {offset}")
        yield kind, payload
        offset = end + _CRC.size
