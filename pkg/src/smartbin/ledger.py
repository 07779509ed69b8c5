"""In-process token ledger: wallets, atomic transfers, QR payloads, donations.

Balances are fixed-point with six decimal places (integer micro-tokens
internally), so no floating point ever touches an account. The transfer
log is append-only and replaying it from the bootstrap snapshot must
reproduce every balance exactly.

A remote-network adapter can substitute :class:`Ledger` behind the same
operations; only this deterministic in-process implementation ships.
"""

from __future__ import annotations

import logging
import re
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation

logger = logging.getLogger(__name__)

MICRO = 10**6  # smallest token unit, 1e-6 of a token

QR_SCHEME = "itrash://wallet/"
_ADDRESS_RE = re.compile(r"^[A-Za-z0-9]{3,64}$")

_ADDRESS_NAMESPACE = uuid.UUID("9a1c2f34-55d6-4e78-9abc-0123456789ab")


class LedgerError(Exception):
    pass


class UnknownAddressError(LedgerError):
    pass


class InsufficientFundsError(LedgerError):
    pass


class NonPositiveAmountError(LedgerError):
    pass


class DuplicateMemoError(LedgerError):
    """A reward for this session was already issued."""


class MalformedPayloadError(ValueError):
    """QR payload does not carry a syntactically valid wallet address."""


def to_micro(amount) -> int:
    """Convert a token quantity to integer micro-tokens; rejects >6 decimals."""
    try:
        quantized = Decimal(str(amount)).scaleb(6)
    except InvalidOperation as exc:
        raise ValueError(f"not a token quantity: {amount!r}") from exc
    if quantized != quantized.to_integral_value():
        raise ValueError(f"token quantity {amount!r} has more than 6 decimal places")
    return int(quantized)


def from_micro(micro: int) -> Decimal:
    return Decimal(micro).scaleb(-6).normalize() if micro else Decimal(0)


def make_qr_payload(address: str) -> str:
    return f"{QR_SCHEME}{address}"


def parse_qr(payload: str) -> str:
    """Extract the wallet address from a scheme-tagged QR payload."""
    if not payload.startswith(QR_SCHEME):
        raise MalformedPayloadError(f"payload does not start with {QR_SCHEME!r}")
    address = payload[len(QR_SCHEME):]
    if not _ADDRESS_RE.match(address):
        raise MalformedPayloadError(f"invalid wallet address {address!r}")
    return address


@dataclass(frozen=True)
class Wallet:
    """Point-in-time view of one account."""

    address: str
    label: str
    balance: Decimal


@dataclass(frozen=True)
class Transfer:
    tx_id: str
    src: str
    dst: str
    amount: Decimal
    time: datetime
    memo: str

    def to_dict(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "from": self.src,
            "to": self.dst,
            "amount": str(self.amount),
            "time": self.time.isoformat(),
            "memo": self.memo,
        }


# Reward destinations, as the controller names them in its effects.

@dataclass(frozen=True)
class UserWallet:
    address: str


@dataclass(frozen=True)
class NgoWallet:
    ngo_id: int


RewardDestination = UserWallet | NgoWallet


class Ledger:
    """Serialized single-writer ledger with an immutable transfer log."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._micro: dict[str, int] = {}
        self._labels: dict[str, str] = {}
        self._bootstrap: dict[str, int] = {}
        self._log: list[Transfer] = []
        self._memos: set[str] = set()
        self._seq = 0

    def create_wallet(self, label: str, initial_balance=0) -> Wallet:
        if not label:
            raise ValueError("wallet label must be non-empty")
        micro = to_micro(initial_balance)
        if micro < 0:
            raise ValueError("initial balance must be >= 0")
        with self._lock:
            self._seq += 1
            address = "r" + uuid.uuid5(_ADDRESS_NAMESPACE, f"{self._seq}:{label}").hex[:24]
            self._micro[address] = micro
            self._labels[address] = label
            self._bootstrap[address] = micro
            return Wallet(address, label, from_micro(micro))

    def balance(self, address: str) -> Decimal:
        try:
            return from_micro(self._micro[address])
        except KeyError:
            raise UnknownAddressError(address) from None

    def wallets(self) -> list[Wallet]:
        with self._lock:
            return [
                Wallet(addr, self._labels[addr], from_micro(micro))
                for addr, micro in self._micro.items()
            ]

    def address_of(self, label: str) -> str:
        for addr, lbl in self._labels.items():
            if lbl == label:
                return addr
        raise UnknownAddressError(f"no wallet labelled {label!r}")

    def total_supply(self) -> Decimal:
        return from_micro(sum(self._micro.values()))

    def transfer(self, src: str, dst: str, amount, memo: str = "",
                 at: datetime | None = None) -> Transfer:
        """Atomically move tokens; appends to the audit log.

        A non-empty memo (the session record id) may be spent only once,
        which caps rewards at one per session.
        """
        micro = to_micro(amount)
        with self._lock:
            if micro <= 0:
                raise NonPositiveAmountError(f"amount must be > 0, got {amount!r}")
            if src not in self._micro:
                raise UnknownAddressError(src)
            if dst not in self._micro:
                raise UnknownAddressError(dst)
            if src == dst:
                raise ValueError("transfer requires distinct wallets")
            if memo and memo in self._memos:
                raise DuplicateMemoError(memo)
            if self._micro[src] < micro:
                raise InsufficientFundsError(
                    f"{src} holds {from_micro(self._micro[src])}, needs {from_micro(micro)}"
                )
            self._micro[src] -= micro
            self._micro[dst] += micro
            if memo:
                self._memos.add(memo)
            self._seq += 1
            tx = Transfer(
                tx_id=f"tx-{self._seq:06d}",
                src=src,
                dst=dst,
                amount=from_micro(micro),
                time=at if at is not None else datetime.now(timezone.utc),
                memo=memo,
            )
            self._log.append(tx)
            return tx

    def transfers(self) -> tuple[Transfer, ...]:
        with self._lock:
            return tuple(self._log)

    def replay_balances(self) -> dict[str, Decimal]:
        """Recompute balances from the bootstrap snapshot plus the log."""
        micro = dict(self._bootstrap)
        for tx in self._log:
            units = to_micro(tx.amount)
            micro[tx.src] -= units
            micro[tx.dst] += units
        return {addr: from_micro(m) for addr, m in micro.items()}


NGO_IDS = (1, 2, 3, 4)
DEFAULT_SYSTEM_FUNDS = Decimal("100.0")


def bootstrap_ledger(system_funds=DEFAULT_SYSTEM_FUNDS) -> tuple[Ledger, str, dict[int, str]]:
    """Create the five standard wallets: the system treasury plus four NGOs."""
    ledger = Ledger()
    system = ledger.create_wallet("itrash", system_funds)
    ngos = {n: ledger.create_wallet(f"ngo_{n}", 0).address for n in NGO_IDS}
    return ledger, system.address, ngos


class RewardService:
    """Executes controller reward effects against a ledger."""

    def __init__(self, ledger: Ledger, system_address: str, ngo_addresses: dict[int, str],
                 amount=Decimal("0.01")):
        self.ledger = ledger
        self.system_address = system_address
        self.ngo_addresses = dict(ngo_addresses)
        self.amount = Decimal(str(amount))

    def issue(self, destination: RewardDestination, memo: str,
              at: datetime | None = None) -> Transfer | None:
        """Send one reward; failures are logged, never raised.

        The controller has already committed the session outcome, so a
        failed transfer (unknown wallet, empty treasury) must not unwind it.
        """
        if isinstance(destination, NgoWallet):
            address = self.ngo_addresses.get(destination.ngo_id)
            if address is None:
                logger.warning("reward dropped: unknown NGO %s", destination.ngo_id)
                return None
        else:
            address = destination.address
        try:
            return self.ledger.transfer(self.system_address, address, self.amount, memo, at=at)
        except LedgerError as exc:
            logger.warning("reward dropped for session %s: %s", memo, exc)
            return None
