"""
AODV 라우팅 에이전트 (정직한 노드의 동작).

경로 탐색(RREQ/RREP), 경로 유지(RERR), DATA 전달과 노드별 라우팅 테이블을
구현한다. 카운터 갱신은 모두 Simulator.log 를 거친다.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import ClassVar, Deque, Dict, FrozenSet, List, Optional, Set, Tuple

from sim_engine import DATA_SIZE_MAX, DATA_SIZE_MIN, Counter, EventKind

logger = logging.getLogger(__name__)

RREQ_SIZE = 24
RREP_SIZE = 20
RERR_BASE_SIZE = 12
RERR_PER_DEST = 8

ACTIVE_ROUTE_TIMEOUT = 10.0
QUEUE_CAPACITY = 64
DISCOVERY_TIMEOUT = 2.0
RREQ_RETRIES = 2


class PacketKind(str, Enum):
    RREQ = "RREQ"
    RREP = "RREP"
    RERR = "RERR"
    DATA = "DATA"


@dataclass(frozen=True)
class Packet:
    origin: int
    sender: int
    size: int

    kind: ClassVar[PacketKind]


@dataclass(frozen=True)
class RreqPacket(Packet):
    rreq_id: int
    source: int
    source_seq: int
    destination: int
    dest_seq_known: Optional[int]
    hop_count: int

    kind: ClassVar[PacketKind] = PacketKind.RREQ

    def __post_init__(self):
        if self.hop_count < 0:
            raise ValueError(f"hop_count 는 0 이상이어야 합니다: {self.hop_count}")

    @property
    def flood_key(self) -> Tuple[int, int]:
        return (self.source, self.rreq_id)


@dataclass(frozen=True)
class RrepPacket(Packet):
    source: int
    destination: int
    dest_seq: int
    hop_count: int

    kind: ClassVar[PacketKind] = PacketKind.RREP

    def __post_init__(self):
        if self.hop_count < 0:
            raise ValueError(f"hop_count 는 0 이상이어야 합니다: {self.hop_count}")


@dataclass(frozen=True)
class RerrPacket(Packet):
    unreachable: Tuple[Tuple[int, int], ...]

    kind: ClassVar[PacketKind] = PacketKind.RERR

    def __post_init__(self):
        if not self.unreachable:
            raise ValueError("RERR 의 도달 불가 목록이 비어 있습니다")


@dataclass(frozen=True)
class DataPacket(Packet):
    source: int
    destination: int
    uid: int
    visited: Tuple[int, ...] = ()

    kind: ClassVar[PacketKind] = PacketKind.DATA

    def __post_init__(self):
        if not DATA_SIZE_MIN <= self.size <= DATA_SIZE_MAX:
            raise ValueError(f"DATA 크기 범위 밖: {self.size}")


def rerr_size(destination_count: int) -> int:
    return RERR_BASE_SIZE + RERR_PER_DEST * destination_count


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_seq: int
    expiry: float
    valid: bool = True
    last_forwarded: float = float("-inf")

    def usable(self, now: float) -> bool:
        return self.valid and self.expiry > now


class RoutingTable:
    """
    목적지별 경로 한 개. 무효화된 경로도 sequence number 보존을 위해 남겨 둔다.

    갱신 규칙: 더 높은 dest_seq, 같으면 더 짧은 hop_count, 동률이면 기존 유지.
    """

    def __init__(self):
        self.entries: Dict[int, RouteEntry] = {}
        self.rreq_seen: Set[Tuple[int, int]] = set()

    def lookup(self, destination: int, now: float) -> Optional[RouteEntry]:
        entry = self.entries.get(destination)
        if entry is not None and entry.usable(now):
            return entry
        return None

    def offer(self, destination: int, next_hop: int, hop_count: int, dest_seq: int, now: float) -> bool:
        """경로 후보를 제시한다. 테이블이 바뀌면 True."""
        current = self.entries.get(destination)
        if current is None:
            self.entries[destination] = RouteEntry(
                destination, next_hop, hop_count, dest_seq, now + ACTIVE_ROUTE_TIMEOUT
            )
            return True

        if current.usable(now):
            better = (dest_seq, -hop_count) > (current.dest_seq, -current.hop_count)
        else:
            better = dest_seq >= current.dest_seq
        if not better:
            if (
                current.usable(now)
                and current.next_hop == next_hop
                and current.hop_count == hop_count
                and current.dest_seq == dest_seq
            ):
                current.expiry = now + ACTIVE_ROUTE_TIMEOUT
            return False

        current.next_hop = next_hop
        current.hop_count = hop_count
        current.dest_seq = dest_seq
        current.expiry = now + ACTIVE_ROUTE_TIMEOUT
        current.valid = True
        return True

    def invalidate(self, destination: int, via: int, dest_seq: int) -> Optional[RouteEntry]:
        """via 를 거치는 유효 경로를 무효화. sequence number 는 줄어들지 않는다."""
        entry = self.entries.get(destination)
        if entry is None or not entry.valid or entry.next_hop != via:
            return None
        entry.valid = False
        entry.dest_seq = max(entry.dest_seq, dest_seq)
        return entry

    def invalidate_via(self, next_hop: int) -> List[RouteEntry]:
        """링크 단절: next_hop 을 거치는 모든 유효 경로를 무효화하고 seq 를 1 올린다."""
        broken = []
        for entry in self.entries.values():
            if entry.valid and entry.next_hop == next_hop:
                entry.valid = False
                entry.dest_seq += 1
                broken.append(entry)
        return broken


def route_snapshot(table: RoutingTable, now: float) -> Tuple[FrozenSet[int], int]:
    """현재 유효 경로의 목적지 집합과 hop 수 합."""
    usable = [e for e in table.entries.values() if e.usable(now)]
    return frozenset(e.destination for e in usable), sum(e.hop_count for e in usable)


@dataclass
class PendingDiscovery:
    destination: int
    rreq_id: int = 0
    attempts: int = 0
    queue: Deque[DataPacket] = field(default_factory=lambda: deque())


class AodvAgent:
    """정직한 노드. 악성 노드는 adversary 모듈에서 이 클래스를 상속한다."""

    malicious: ClassVar[bool] = False

    def __init__(self, node_id: int, sim):
        self.node_id = node_id
        self.sim = sim
        self.table = RoutingTable()
        self.seq = 0
        self.rreq_id = 0
        self.data_uid = 0
        self.pending: Dict[int, PendingDiscovery] = {}

    # ------------------------------------------------------------------ #
    # 공통
    # ------------------------------------------------------------------ #
    def _count(self, counter: Counter, now: float) -> None:
        self.sim.log.bump(self.node_id, counter, now)

    def _stat(self, name: str, amount: int = 1) -> None:
        self.sim.log.stat(self.node_id, name, amount)

    def on_start(self, now: float) -> None:
        pass

    def on_attack_tick(self, now: float) -> None:
        pass

    def has_seen(self, flood_key: Tuple[int, int]) -> bool:
        return flood_key in self.table.rreq_seen

    def receive(self, packet: Packet, now: float) -> None:
        if isinstance(packet, RreqPacket):
            self.handle_rreq(packet, now)
        elif isinstance(packet, RrepPacket):
            self.handle_rrep(packet, now)
        elif isinstance(packet, RerrPacket):
            self.handle_rerr(packet, now)
        elif isinstance(packet, DataPacket):
            self.forward_data(packet, now)
        else:
            raise TypeError(f"알 수 없는 패킷: {packet!r}")

    # ------------------------------------------------------------------ #
    # DATA
    # ------------------------------------------------------------------ #
    def originate_data(self, destination: int, size: int, now: float) -> DataPacket:
        self.data_uid += 1
        data = DataPacket(
            origin=self.node_id,
            sender=self.node_id,
            size=size,
            source=self.node_id,
            destination=destination,
            uid=self.data_uid,
            visited=(self.node_id,),
        )
        self._stat("data_originated")
        self.forward_data(data, now)
        return data

    def forward_data(self, data: DataPacket, now: float) -> None:
        if data.destination == self.node_id:
            self._stat("data_delivered")
            return

        route = self.table.lookup(data.destination, now)
        if route is None:
            self._enqueue(data)
            self.originate_rreq(data.destination, now)
            return

        if not self.sim.reachable(self.node_id, route.next_hop, now):
            self._stat("data_dropped")
            self._send_rerr(self.table.invalidate_via(route.next_hop), now)
            return

        route.expiry = now + ACTIVE_ROUTE_TIMEOUT
        if data.source != self.node_id:
            route.last_forwarded = now
            self._stat("data_forwarded")
        forwarded = replace(data, sender=self.node_id, visited=data.visited + (route.next_hop,))
        self.sim.unicast(self.node_id, route.next_hop, forwarded, now)

    def _enqueue(self, data: DataPacket) -> None:
        pending = self.pending.setdefault(data.destination, PendingDiscovery(data.destination))
        if len(pending.queue) >= QUEUE_CAPACITY:
            self._stat("data_dropped")
            logger.debug("노드 %d: %d 행 대기열 가득 참, DATA 폐기", self.node_id, data.destination)
            return
        pending.queue.append(data)

    def _flush(self, destination: int, now: float) -> None:
        pending = self.pending.pop(destination, None)
        if pending is None:
            return
        while pending.queue:
            self.forward_data(pending.queue.popleft(), now)

    # ------------------------------------------------------------------ #
    # 경로 탐색
    # ------------------------------------------------------------------ #
    def originate_rreq(self, destination: int, now: float) -> Optional[RreqPacket]:
        """목적지 경로 탐색 시작. 이미 경로가 있거나 탐색 중이면 None."""
        if self.table.lookup(destination, now) is not None:
            return None
        pending = self.pending.setdefault(destination, PendingDiscovery(destination))
        if pending.attempts:
            return None
        return self._broadcast_rreq(pending, now)

    def _broadcast_rreq(self, pending: PendingDiscovery, now: float) -> RreqPacket:
        self.rreq_id += 1
        self.seq += 1
        known = self.table.entries.get(pending.destination)
        rreq = RreqPacket(
            origin=self.node_id,
            sender=self.node_id,
            size=RREQ_SIZE,
            rreq_id=self.rreq_id,
            source=self.node_id,
            source_seq=self.seq,
            destination=pending.destination,
            dest_seq_known=known.dest_seq if known is not None else None,
            hop_count=0,
        )
        self.table.rreq_seen.add((self.node_id, rreq.rreq_id))
        pending.rreq_id = rreq.rreq_id
        pending.attempts += 1
        self._count(Counter.RREQ_SENT, now)
        self.sim.broadcast(self.node_id, rreq, now)
        self.sim.schedule(
            now + DISCOVERY_TIMEOUT,
            EventKind.ROUTE_TIMEOUT,
            (self.node_id, pending.destination, rreq.rreq_id),
        )
        return rreq

    def on_discovery_timeout(self, destination: int, rreq_id: int, now: float) -> None:
        pending = self.pending.get(destination)
        if pending is None or pending.rreq_id != rreq_id:
            return
        if self.table.lookup(destination, now) is not None:
            self._flush(destination, now)
            return
        if pending.attempts <= RREQ_RETRIES:
            self._broadcast_rreq(pending, now)
            return
        del self.pending[destination]
        self._stat("data_dropped", len(pending.queue))
        logger.debug("노드 %d: %d 경로 탐색 실패, DATA %d개 폐기", self.node_id, destination, len(pending.queue))

    def handle_rreq(self, rreq: RreqPacket, now: float) -> None:
        self._count(Counter.RREQ_RECV, now)
        key = rreq.flood_key
        if key in self.table.rreq_seen:
            return
        self.table.rreq_seen.add(key)
        self.table.offer(rreq.source, rreq.sender, rreq.hop_count + 1, rreq.source_seq, now)

        if rreq.destination == self.node_id:
            self.seq = max(self.seq, rreq.dest_seq_known or 0)
            reply = RrepPacket(
                origin=self.node_id,
                sender=self.node_id,
                size=RREP_SIZE,
                source=rreq.source,
                destination=self.node_id,
                dest_seq=self.seq,
                hop_count=0,
            )
            self._send_rrep(reply, rreq.sender, now)
            return

        route = self.table.lookup(rreq.destination, now)
        if (
            route is not None
            and route.next_hop != rreq.sender
            and (rreq.dest_seq_known is None or route.dest_seq >= rreq.dest_seq_known)
        ):
            reply = RrepPacket(
                origin=self.node_id,
                sender=self.node_id,
                size=RREP_SIZE,
                source=rreq.source,
                destination=rreq.destination,
                dest_seq=route.dest_seq,
                hop_count=route.hop_count,
            )
            self._send_rrep(reply, rreq.sender, now)
            return

        self._count(Counter.RREQ_SENT, now)
        self.sim.broadcast(self.node_id, replace(rreq, sender=self.node_id, hop_count=rreq.hop_count + 1), now)

    def _send_rrep(self, rrep: RrepPacket, next_hop: int, now: float) -> None:
        self._count(Counter.RREP_SENT, now)
        if not self.sim.unicast(self.node_id, next_hop, rrep, now):
            self._stat("routing_dropped")

    def handle_rrep(self, rrep: RrepPacket, now: float) -> None:
        updated = self.table.offer(rrep.destination, rrep.sender, rrep.hop_count + 1, rrep.dest_seq, now)
        if rrep.source == self.node_id:
            if self.table.lookup(rrep.destination, now) is not None:
                self._flush(rrep.destination, now)
            return
        if not updated:
            return
        reverse = self.table.lookup(rrep.source, now)
        if reverse is None:
            self._stat("routing_dropped")
            return
        self._send_rrep(replace(rrep, sender=self.node_id, hop_count=rrep.hop_count + 1), reverse.next_hop, now)

    # ------------------------------------------------------------------ #
    # 경로 유지
    # ------------------------------------------------------------------ #
    def handle_rerr(self, rerr: RerrPacket, now: float) -> None:
        self._count(Counter.RERR_RECV, now)
        lost = []
        for destination, dest_seq in rerr.unreachable:
            entry = self.table.invalidate(destination, rerr.sender, dest_seq)
            if entry is not None:
                lost.append(entry)
        # 최근 dt 안에 DATA 를 전달한 경로만 상류로 알린다
        window = self.sim.config.sampling_interval
        active = [e for e in lost if now - e.last_forwarded <= window]
        if active:
            self._stat("rerr_propagated")
            self._send_rerr(active, now)

    def _send_rerr(self, entries: List[RouteEntry], now: float) -> None:
        if not entries:
            return
        rerr = RerrPacket(
            origin=self.node_id,
            sender=self.node_id,
            size=rerr_size(len(entries)),
            unreachable=tuple((e.destination, e.dest_seq) for e in entries),
        )
        self._count(Counter.RERR_SENT, now)
        self.sim.broadcast(self.node_id, rerr, now)
