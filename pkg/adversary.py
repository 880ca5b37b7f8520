"""
악성 노드 동작: black hole, RERR forging, RERR dropping, RREQ flooding.

악성 노드는 시나리오 시작 시 시드로 고정되며 공격 유형은 시나리오당 하나다.
주기적 공격(forging, flooding)은 ATTACK_PERIOD 마다 ATTACK_TICK 이벤트로 동작한다.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Type

import numpy as np

from aodv_routing import (
    RERR_BASE_SIZE,
    RERR_PER_DEST,
    RREP_SIZE,
    RREQ_SIZE,
    AodvAgent,
    DataPacket,
    Packet,
    RerrPacket,
    RrepPacket,
    RreqPacket,
)
from sim_engine import TIME_EPS, AttackKind, Counter, EventKind, SimConfig

logger = logging.getLogger(__name__)

ATTACK_PERIOD = 0.1
# 위조 RREQ id 는 정상 id 와 겹치지 않게 큰 값부터 센다
FORGED_RREQ_ID_BASE = 2**20


class FilterVerdict(str, Enum):
    DROP = "drop"
    PASS = "pass"


@dataclass
class AttackAssignment:
    attack_kind: AttackKind
    malicious_ids: FrozenSet[int]
    victims: Dict[int, int] = field(default_factory=dict)

    def is_malicious(self, node: int) -> bool:
        return node in self.malicious_ids


def assign_attackers(config: SimConfig, rng: np.random.Generator) -> AttackAssignment:
    """악성 노드 집합(비복원 추출)과 forging 피해 노드를 정한다."""
    chosen = rng.choice(config.node_count, size=config.malicious_count, replace=False)
    malicious = frozenset(int(i) for i in chosen)
    assignment = AttackAssignment(config.attack_kind, malicious)
    if config.attack_kind is AttackKind.FORGING:
        legit = [i for i in range(config.node_count) if i not in malicious]
        for node in sorted(malicious):
            assignment.victims[node] = legit[int(rng.integers(len(legit)))]
    logger.debug("공격 배치 %s: 악성 노드 %s", config.attack_kind.value, sorted(malicious))
    return assignment


def _schedule_next_tick(agent: "PeriodicAttacker", now: float) -> None:
    agent.ticks += 1
    next_time = round((agent.ticks + 1) * ATTACK_PERIOD, 9)
    if next_time <= agent.sim.config.duration + TIME_EPS:
        agent.sim.schedule(next_time, EventKind.ATTACK_TICK, agent.node_id)


def flooding_tick(agent: "FloodingAgent", now: float) -> RreqPacket:
    """임의 목적지로 위조 RREQ 하나를 브로드캐스트하고 다음 틱을 잡는다."""
    n = agent.sim.config.node_count
    destination = int(agent.sim.attack_rng.integers(n - 1))
    if destination >= agent.node_id:
        destination += 1
    agent.forged += 1
    rreq = RreqPacket(
        origin=agent.node_id,
        sender=agent.node_id,
        size=RREQ_SIZE,
        rreq_id=FORGED_RREQ_ID_BASE + agent.forged,
        source=agent.node_id,
        source_seq=agent.seq,
        destination=destination,
        dest_seq_known=None,
        hop_count=0,
    )
    agent.table.rreq_seen.add((agent.node_id, rreq.rreq_id))
    agent._count(Counter.RREQ_SENT, now)
    agent._stat("injected")
    agent.sim.broadcast(agent.node_id, rreq, now)
    _schedule_next_tick(agent, now)
    return rreq


def forging_tick(agent: "ForgingAgent", victim: int, now: float) -> RerrPacket:
    """피해 노드를 도달 불가로 적은 위조 RERR 을 브로드캐스트한다."""
    known = agent.table.entries.get(victim)
    forged_seq = (known.dest_seq if known is not None else 0) + 1
    rerr = RerrPacket(
        origin=agent.node_id,
        sender=agent.node_id,
        size=RERR_BASE_SIZE + RERR_PER_DEST,
        unreachable=((victim, forged_seq),),
    )
    agent._count(Counter.RERR_SENT, now)
    agent._stat("injected")
    agent.sim.broadcast(agent.node_id, rerr, now)
    _schedule_next_tick(agent, now)
    return rerr


def dropping_filter(agent: AodvAgent, packet: Packet) -> FilterVerdict:
    """RERR 만 걸러낸다 (수신 카운트 후 폐기)."""
    if isinstance(packet, RerrPacket):
        return FilterVerdict.DROP
    return FilterVerdict.PASS


def forged_dest_seq(agent: "BlackHoleAgent", rreq: RreqPacket) -> int:
    """요청된 seq, 엿들은 seq, 자기 경로표의 seq 중 최댓값 + 1."""
    entry = agent.table.entries.get(rreq.destination)
    return 1 + max(
        rreq.dest_seq_known or 0,
        agent.seen_seq.get(rreq.destination, 0),
        entry.dest_seq if entry is not None else 0,
    )


def blackhole_handle(agent: "BlackHoleAgent", packet: Packet, now: float) -> None:
    """
    자신이 목적지가 아닌 RREQ 에 지금까지 본 어떤 seq 보다 큰 seq 로 가짜 RREP 를 보내고
    그렇게 끌어온 DATA 는 버린다. 자신의 트래픽은 정상 처리한다.
    """
    agent.overhear(packet)
    if isinstance(packet, RreqPacket):
        if packet.destination == agent.node_id:
            agent.handle_rreq(packet, now)
            return
        agent._count(Counter.RREQ_RECV, now)
        key = packet.flood_key
        if key in agent.table.rreq_seen:
            return
        agent.table.rreq_seen.add(key)
        agent.table.offer(packet.source, packet.sender, packet.hop_count + 1, packet.source_seq, now)
        reply = RrepPacket(
            origin=agent.node_id,
            sender=agent.node_id,
            size=RREP_SIZE,
            source=packet.source,
            destination=packet.destination,
            dest_seq=forged_dest_seq(agent, packet),
            hop_count=1,
        )
        agent._send_rrep(reply, packet.sender, now)
    elif isinstance(packet, DataPacket):
        if packet.destination == agent.node_id:
            agent.forward_data(packet, now)
        else:
            agent._stat("data_dropped")
    elif isinstance(packet, RrepPacket):
        if packet.source == agent.node_id:
            agent.handle_rrep(packet, now)
        else:
            agent._stat("routing_dropped")
    else:
        agent.handle_rerr(packet, now)


class PeriodicAttacker(AodvAgent):
    malicious = True

    def __init__(self, node_id: int, sim):
        super().__init__(node_id, sim)
        self.ticks = 0

    def on_start(self, now: float) -> None:
        if ATTACK_PERIOD <= self.sim.config.duration + TIME_EPS:
            self.sim.schedule(ATTACK_PERIOD, EventKind.ATTACK_TICK, self.node_id)


class FloodingAgent(PeriodicAttacker):
    def __init__(self, node_id: int, sim):
        super().__init__(node_id, sim)
        self.forged = 0

    def on_attack_tick(self, now: float) -> None:
        flooding_tick(self, now)


class ForgingAgent(PeriodicAttacker):
    def __init__(self, node_id: int, sim, victim: int):
        super().__init__(node_id, sim)
        self.victim = victim

    def on_attack_tick(self, now: float) -> None:
        forging_tick(self, self.victim, now)


class DroppingAgent(AodvAgent):
    malicious = True

    def receive(self, packet: Packet, now: float) -> None:
        if dropping_filter(self, packet) is FilterVerdict.DROP:
            self._count(Counter.RERR_RECV, now)
            return
        super().receive(packet, now)


class BlackHoleAgent(AodvAgent):
    malicious = True

    def __init__(self, node_id: int, sim):
        super().__init__(node_id, sim)
        # 목적지별로 엿들은 가장 큰 sequence number
        self.seen_seq: Dict[int, int] = {}

    def overhear(self, packet: Packet) -> None:
        if isinstance(packet, RreqPacket):
            self._note_seq(packet.source, packet.source_seq)
            if packet.dest_seq_known is not None:
                self._note_seq(packet.destination, packet.dest_seq_known)
        elif isinstance(packet, RrepPacket):
            self._note_seq(packet.destination, packet.dest_seq)

    def _note_seq(self, node: int, seq: int) -> None:
        if seq > self.seen_seq.get(node, 0):
            self.seen_seq[node] = seq

    def receive(self, packet: Packet, now: float) -> None:
        blackhole_handle(self, packet, now)


_AGENT_CLASSES: Dict[AttackKind, Type[AodvAgent]] = {
    AttackKind.BLACKHOLE: BlackHoleAgent,
    AttackKind.DROPPING: DroppingAgent,
    AttackKind.FLOODING: FloodingAgent,
}


def make_agent(node_id: int, sim, assignment: AttackAssignment) -> AodvAgent:
    """노드 id 와 공격 배치에 맞는 에이전트를 만든다."""
    if not assignment.is_malicious(node_id):
        return AodvAgent(node_id, sim)
    if assignment.attack_kind is AttackKind.FORGING:
        return ForgingAgent(node_id, sim, assignment.victims[node_id])
    return _AGENT_CLASSES[assignment.attack_kind](node_id, sim)
