"""
MANET 이산 사건(discrete-event) 시뮬레이션 커널.

구성:
  - SimConfig: 시나리오 전체 설정 (영역, 이동성, 트래픽, 공격, 시드)
  - random waypoint 이동 모델 (위치는 필요할 때만 계산)
  - unit-disk 무선 범위 + 충돌/손실 없는 단순 채널
  - CBR 트래픽, 샘플링 구간 경계 이벤트, 노드별 카운터 로그(CounterLog)

같은 SimConfig(시드 포함)로 실행하면 CounterLog 는 비트 단위로 동일하다.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

# 시간 비교 허용 오차 (이벤트 시각은 k * dt 형태로 계산된다)
TIME_EPS = 1e-9

# DATA 패킷 크기 범위 (bytes)
DATA_SIZE_MIN = 128
DATA_SIZE_MAX = 1024


class ConfigError(ValueError):
    """시나리오 설정이 불변식을 위반했을 때."""


class AttackKind(str, Enum):
    NONE = "none"
    BLACKHOLE = "blackhole"
    FORGING = "forging"
    DROPPING = "dropping"
    FLOODING = "flooding"


class SimConfig(BaseModel):
    """시나리오 설정. 기본값은 50노드 / 850m / 700초 실험 환경과 같다."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    area_side: float = Field(850.0, gt=0, description="정사각형 영역 한 변 (m)")
    node_count: int = Field(50, ge=2, description="전체 노드 수")
    radio_range: float = Field(250.0, gt=0, description="무선 전파 범위 (m)")
    bandwidth: float = Field(2_000_000.0, gt=0, description="채널 용량 (bit/s)")
    speed_min: float = Field(0.0, ge=0, description="최소 이동 속도 (m/s)")
    speed_max: float = Field(20.0, ge=0, description="최대 이동 속도 (m/s)")
    pause_time: float = Field(200.0, ge=0, description="waypoint 도착 후 정지 시간 (s)")
    duration: float = Field(700.0, gt=0, description="시뮬레이션 길이 (s)")
    cbr_rate: float = Field(4.0, ge=0, description="흐름당 초당 DATA 패킷 수 (0 이면 트래픽 없음)")
    cbr_size_min: int = Field(DATA_SIZE_MIN, description="DATA 패킷 최소 크기 (bytes)")
    cbr_size_max: int = Field(DATA_SIZE_MAX, description="DATA 패킷 최대 크기 (bytes)")
    attack_kind: AttackKind = Field(AttackKind.NONE, description="시나리오 공격 유형")
    malicious_count: int = Field(0, ge=0, description="악성 노드 수")
    sampling_interval: float = Field(10.0, gt=0, description="특성 집계 구간 dt (s)")
    rng_seed: int = Field(1, ge=0, lt=2**64, description="난수 시드 (64-bit)")

    @model_validator(mode="after")
    def _validate(self) -> "SimConfig":
        self.check_invariants()
        return self

    def check_invariants(self) -> None:
        """불변식 검사. 위반 시 ConfigError (위반한 불변식을 메시지에 포함)."""
        if self.malicious_count >= self.node_count:
            raise ConfigError(
                f"불변식 위반: malicious_count < node_count "
                f"(malicious_count={self.malicious_count}, node_count={self.node_count})"
            )
        if self.speed_min > self.speed_max:
            raise ConfigError(
                f"불변식 위반: speed_min <= speed_max (speed_min={self.speed_min}, speed_max={self.speed_max})"
            )
        if not 0 < self.sampling_interval <= self.duration:
            raise ConfigError(
                f"불변식 위반: 0 < sampling_interval <= duration "
                f"(sampling_interval={self.sampling_interval}, duration={self.duration})"
            )
        ratio = self.duration / self.sampling_interval
        if abs(ratio - round(ratio)) > TIME_EPS:
            raise ConfigError(
                f"불변식 위반: duration % sampling_interval == 0 "
                f"(duration={self.duration}, sampling_interval={self.sampling_interval})"
            )
        if not DATA_SIZE_MIN <= self.cbr_size_min <= self.cbr_size_max <= DATA_SIZE_MAX:
            raise ConfigError(
                f"불변식 위반: {DATA_SIZE_MIN} <= cbr_size_min <= cbr_size_max <= {DATA_SIZE_MAX} "
                f"(cbr_size_min={self.cbr_size_min}, cbr_size_max={self.cbr_size_max})"
            )
        if self.attack_kind is AttackKind.NONE and self.malicious_count != 0:
            raise ConfigError(
                f"불변식 위반: attack_kind=none 이면 malicious_count == 0 (malicious_count={self.malicious_count})"
            )

    @property
    def interval_count(self) -> int:
        return int(round(self.duration / self.sampling_interval))

    @property
    def attack_active(self) -> bool:
        return self.attack_kind is not AttackKind.NONE and self.malicious_count > 0

    @property
    def scenario_id(self) -> str:
        return (
            f"{self.attack_kind.value}-m{self.malicious_count}-p{self.pause_time:g}"
            f"-dt{self.sampling_interval:g}-s{self.rng_seed}"
        )

    def with_changes(self, **changes: Any) -> "SimConfig":
        """일부 값을 바꾼 새 설정 (검증 포함)."""
        values = self.model_dump()
        values.update(changes)
        return SimConfig(**values)


# ---------------------------------------------------------------------- #
# 이동성 (random waypoint)
# ---------------------------------------------------------------------- #
class Phase(str, Enum):
    PAUSED = "paused"
    MOVING = "moving"


@dataclass(frozen=True)
class WaypointParams:
    area_side: float
    speed_min: float
    speed_max: float
    pause_time: float

    @classmethod
    def from_config(cls, config: SimConfig) -> "WaypointParams":
        return cls(config.area_side, config.speed_min, config.speed_max, config.pause_time)


@dataclass
class NodeKinematics:
    """
    한 노드의 현재 구간(leg) 상태.

    position 은 `since` 시각의 위치이다. MOVING 이면 waypoint 를 향해
    speed 로 직선 이동하고, PAUSED 이면 pause_until 까지 정지한다.
    """

    position: Tuple[float, float]
    waypoint: Tuple[float, float]
    speed: float
    phase: Phase
    pause_until: float = 0.0
    since: float = 0.0

    def leg_end(self) -> float:
        if self.phase is Phase.PAUSED:
            return self.pause_until
        if self.speed <= 0:
            return math.inf
        return self.since + math.dist(self.position, self.waypoint) / self.speed


def _advance_leg(k: NodeKinematics, params: WaypointParams, rng: np.random.Generator) -> float:
    """현재 구간을 끝내고 다음 구간으로 넘긴다. 이번 구간의 이동 거리를 반환."""
    end = k.leg_end()
    if k.phase is Phase.MOVING:
        travelled = math.dist(k.position, k.waypoint)
        k.position = k.waypoint
        k.since = end
        k.phase = Phase.PAUSED
        k.pause_until = end + params.pause_time
        return travelled

    k.since = end
    k.waypoint = (
        float(rng.uniform(0.0, params.area_side)),
        float(rng.uniform(0.0, params.area_side)),
    )
    k.speed = float(rng.uniform(params.speed_min, params.speed_max))
    k.phase = Phase.MOVING
    return 0.0


def waypoint_position(
    k: NodeKinematics,
    now: float,
    params: Optional[WaypointParams] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """
    `now` 시각의 위치.

    params/rng 가 주어지면 waypoint 도착 → 정지 → 새 waypoint/속도 추첨 전이를
    `now` 까지 진행하며 k 를 갱신한다. 주어지지 않으면 현재 구간만 보간한다.
    """
    if params is not None and rng is not None:
        while now >= k.leg_end():
            _advance_leg(k, params, rng)

    if k.phase is Phase.PAUSED or k.speed <= 0:
        return k.position
    dist = math.dist(k.position, k.waypoint)
    if dist == 0:
        return k.position
    frac = min(k.speed * (now - k.since), dist) / dist
    x0, y0 = k.position
    wx, wy = k.waypoint
    return (x0 + (wx - x0) * frac, y0 + (wy - y0) * frac)


class MobilityModel:
    """모든 노드의 kinematics 를 들고, 한 시각의 위치를 벡터로 계산한다."""

    def __init__(
        self,
        params: WaypointParams,
        kinematics: Sequence[NodeKinematics],
        rngs: Sequence[np.random.Generator],
    ):
        self.params = params
        self.nodes: List[NodeKinematics] = list(kinematics)
        self.rngs = list(rngs)
        n = len(self.nodes)
        self._origin = np.zeros((n, 2))
        self._velocity = np.zeros((n, 2))
        self._since = np.zeros(n)
        self._leg_end = np.zeros(n)
        self.odometer = np.zeros(n)
        for i in range(n):
            self._sync(i)
        self._cache_time: Optional[float] = None
        self._cache: Optional[np.ndarray] = None

    @classmethod
    def initial(
        cls,
        params: WaypointParams,
        positions: np.ndarray,
        rngs: Sequence[np.random.Generator],
    ) -> "MobilityModel":
        """시작 시 모든 노드는 pause_time 동안 정지한 뒤 움직인다."""
        nodes = [
            NodeKinematics(
                position=(float(x), float(y)),
                waypoint=(float(x), float(y)),
                speed=0.0,
                phase=Phase.PAUSED,
                pause_until=params.pause_time,
                since=0.0,
            )
            for x, y in positions
        ]
        return cls(params, nodes, rngs)

    def _sync(self, i: int) -> None:
        k = self.nodes[i]
        self._origin[i] = k.position
        self._since[i] = k.since
        self._leg_end[i] = k.leg_end()
        self._velocity[i] = 0.0
        if k.phase is Phase.MOVING and k.speed > 0:
            dist = math.dist(k.position, k.waypoint)
            if dist > 0:
                self._velocity[i, 0] = (k.waypoint[0] - k.position[0]) / dist * k.speed
                self._velocity[i, 1] = (k.waypoint[1] - k.position[1]) / dist * k.speed

    def positions(self, now: float) -> np.ndarray:
        """(n, 2) 위치 배열. 호출 시각은 단조 증가해야 한다."""
        if self._cache_time == now and self._cache is not None:
            return self._cache
        for i in np.flatnonzero(self._leg_end <= now):
            k = self.nodes[i]
            while now >= k.leg_end():
                self.odometer[i] += _advance_leg(k, self.params, self.rngs[i])
            self._sync(i)
        pos = self._origin + self._velocity * (now - self._since)[:, None]
        np.clip(pos, 0.0, self.params.area_side, out=pos)
        self._cache_time = now
        self._cache = pos
        return pos

    def distance_travelled(self, now: float) -> np.ndarray:
        """각 노드가 `now` 까지 이동한 총 거리."""
        pos = self.positions(now)
        partial = np.hypot(pos[:, 0] - self._origin[:, 0], pos[:, 1] - self._origin[:, 1])
        return self.odometer + partial


def in_range(a: Tuple[float, float], b: Tuple[float, float], radio_range: float) -> bool:
    """유클리드 거리 <= radio_range (경계 포함)."""
    return math.hypot(a[0] - b[0], a[1] - b[1]) <= radio_range


def transmission_delay(size: int, bandwidth: float) -> float:
    """size bytes 를 bandwidth bit/s 로 보내는 데 걸리는 시간 (s)."""
    if size <= 0 or bandwidth <= 0:
        raise ValueError(f"size 와 bandwidth 는 양수여야 합니다: size={size}, bandwidth={bandwidth}")
    return size * 8 / bandwidth


# ---------------------------------------------------------------------- #
# 이벤트 큐
# ---------------------------------------------------------------------- #
class EventKind(IntEnum):
    PACKET_ARRIVAL = 0
    CBR_TICK = 1
    ATTACK_TICK = 2
    MOBILITY_UPDATE = 3  # 이동성은 지연 계산이라 스케줄되지 않음
    INTERVAL_BOUNDARY = 4
    ROUTE_TIMEOUT = 5


@dataclass(order=True, frozen=True)
class Event:
    time: float
    sequence: int
    kind: EventKind = field(compare=False)
    payload: Any = field(compare=False, default=None)


class EventQueue:
    """(time, sequence) 순서로 꺼내는 우선순위 큐."""

    def __init__(self):
        # (time, sequence, event) 튜플: 비교는 앞 두 값에서 끝난다
        self._heap: List[Tuple[float, int, Event]] = []
        self._sequence = 0

    def push(self, time: float, kind: EventKind, payload: Any = None) -> Event:
        event = Event(time, self._sequence, kind, payload)
        heapq.heappush(self._heap, (time, self._sequence, event))
        self._sequence += 1
        return event

    def pop(self) -> Event:
        return heapq.heappop(self._heap)[2]

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def __len__(self) -> int:
        return len(self._heap)

    def __iter__(self):
        return (entry[2] for entry in self._heap)


# ---------------------------------------------------------------------- #
# 카운터 로그
# ---------------------------------------------------------------------- #
class Counter(IntEnum):
    RREQ_SENT = 0
    RREQ_RECV = 1
    RREP_SENT = 2
    RERR_SENT = 3
    RERR_RECV = 4


COUNTER_FIELDS: Tuple[str, ...] = tuple(c.name.lower() for c in Counter)

# 노드별 행동 통계 (특성에는 쓰이지 않고 불변식 검사용)
NODE_STAT_FIELDS: Tuple[str, ...] = (
    "data_originated",
    "data_delivered",
    "data_forwarded",
    "data_dropped",
    "routing_dropped",
    "rerr_propagated",
    "injected",
)


@dataclass
class ChannelStats:
    """채널 계층 패킷 보존: sent = delivered + dropped + in_flight."""

    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0


@dataclass
class CounterLog:
    """
    노드 x 샘플링 구간별 카운터, 들은 이웃 집합, 구간 경계의 라우팅 스냅샷.

    route_sets / hop_sums 는 경계 0..interval_count 에서 기록된다.
    """

    config: SimConfig
    malicious_ids: FrozenSet[int]
    counts: np.ndarray
    heard: np.ndarray  # (구간, 수신 노드, 송신 노드) bool
    route_sets: List[List[FrozenSet[int]]]
    hop_sums: np.ndarray
    node_stats: np.ndarray
    channel: ChannelStats = field(default_factory=ChannelStats)
    boundaries_recorded: int = 0
    _interval_time: float = field(default=math.nan, repr=False, compare=False)
    _interval: int = field(default=0, repr=False, compare=False)

    @classmethod
    def empty(cls, config: SimConfig, malicious_ids: FrozenSet[int] = frozenset()) -> "CounterLog":
        n, intervals = config.node_count, config.interval_count
        return cls(
            config=config,
            malicious_ids=frozenset(malicious_ids),
            counts=np.zeros((intervals, n, len(Counter)), dtype=np.int64),
            heard=np.zeros((intervals, n, n), dtype=bool),
            route_sets=[[frozenset() for _ in range(n)] for _ in range(intervals + 1)],
            hop_sums=np.zeros((intervals + 1, n), dtype=np.int64),
            node_stats=np.zeros((n, len(NODE_STAT_FIELDS)), dtype=np.int64),
        )

    def interval_of(self, now: float) -> int:
        """시각 → 구간 번호. 경계 시각의 이벤트는 다음 구간, 종료 시각은 마지막 구간."""
        if now == self._interval_time:
            return self._interval
        k = int(math.floor(now / self.config.sampling_interval + TIME_EPS))
        k = min(max(k, 0), self.config.interval_count - 1)
        self._interval_time, self._interval = now, k
        return k

    def bump(self, node: int, counter: Counter, now: float, amount: int = 1) -> None:
        self.counts[self.interval_of(now), node, counter] += amount

    def hear(self, node: int, sender: int, now: float) -> None:
        self.heard[self.interval_of(now), node, sender] = True

    def hear_all(self, receivers: Sequence[int], sender: int, now: float) -> None:
        self.heard[self.interval_of(now), list(receivers), sender] = True

    def neighbor_count(self, node: int, interval: int) -> int:
        """구간 동안 이 노드가 들은 서로 다른 송신자 수."""
        return int(self.heard[interval, node].sum())

    def stat(self, node: int, name: str, amount: int = 1) -> None:
        self.node_stats[node, NODE_STAT_FIELDS.index(name)] += amount

    def node_stat(self, node: int, name: str) -> int:
        return int(self.node_stats[node, NODE_STAT_FIELDS.index(name)])

    def record_snapshot(self, boundary: int, node: int, destinations: FrozenSet[int], hop_sum: int) -> None:
        self.route_sets[boundary][node] = frozenset(destinations)
        self.hop_sums[boundary, node] = hop_sum

    def counters(self, node: int, interval: int) -> Dict[str, int]:
        return {name: int(self.counts[interval, node, i]) for i, name in enumerate(COUNTER_FIELDS)}

    def to_frame(self) -> pd.DataFrame:
        """노드 x 구간 한 줄씩의 카운터 트레이스."""
        records = []
        for k in range(self.config.interval_count):
            for node in range(self.config.node_count):
                record = {"node": node, "interval": k}
                record.update(self.counters(node, k))
                record["num_neighbors"] = self.neighbor_count(node, k)
                record["route_count"] = len(self.route_sets[k + 1][node])
                record["hop_sum"] = int(self.hop_sums[k + 1, node])
                record["malicious"] = int(node in self.malicious_ids)
                records.append(record)
        columns = ["node", "interval", *COUNTER_FIELDS, "num_neighbors", "route_count", "hop_sum", "malicious"]
        return pd.DataFrame.from_records(records, columns=columns)

    def digest(self) -> str:
        """로그 전체의 SHA-256 (결정성 검사용)."""
        h = hashlib.sha256()
        h.update(self.to_frame().to_csv(index=False).encode("utf-8"))
        for boundary in self.route_sets:
            for dests in boundary:
                h.update((",".join(map(str, sorted(dests))) + ";").encode("utf-8"))
        h.update(self.node_stats.tobytes())
        c = self.channel
        h.update(f"{c.sent}/{c.delivered}/{c.dropped}/{c.in_flight}".encode("utf-8"))
        return h.hexdigest()


# ---------------------------------------------------------------------- #
# 시뮬레이터
# ---------------------------------------------------------------------- #
BoundaryHook = Callable[[int, float], None]


class Simulator:
    """
    단일 스레드 이산 사건 커널.

    Args:
        config: 시나리오 설정
        positions: (n, 2) 초기 위치. None 이면 시드로 균등 배치
    """

    def __init__(self, config: SimConfig, positions: Optional[Sequence[Tuple[float, float]]] = None):
        config.check_invariants()
        self.config = config
        n = config.node_count

        streams = np.random.SeedSequence(config.rng_seed).spawn(3 + n)
        placement_rng = np.random.default_rng(streams[0])
        self.traffic_rng = np.random.default_rng(streams[1])
        self.attack_rng = np.random.default_rng(streams[2])
        mobility_rngs = [np.random.default_rng(s) for s in streams[3:]]

        if positions is None:
            initial = placement_rng.uniform(0.0, config.area_side, size=(n, 2))
        else:
            initial = np.asarray(positions, dtype=float)
            if initial.shape != (n, 2):
                raise ConfigError(f"positions 모양이 (node_count, 2) 가 아닙니다: {initial.shape}")
        self.mobility = MobilityModel.initial(WaypointParams.from_config(config), initial, mobility_rngs)

        self.queue = EventQueue()
        self.now = 0.0
        self._topology_time: Optional[float] = None
        self._neighbor_rows: Dict[int, Tuple[int, ...]] = {}
        self.boundary_hooks: List[BoundaryHook] = []
        self.assignment = None
        self.agents = self._build_agents()
        self.log = CounterLog.empty(config, self.malicious_ids)
        self._started = False

    def _build_agents(self) -> list:
        # 순환 import 방지: 라우팅/공격 모듈은 커널을 참조한다
        from aodv_routing import AodvAgent

        n = self.config.node_count
        if self.config.attack_kind is AttackKind.NONE:
            return [AodvAgent(i, self) for i in range(n)]

        from adversary import assign_attackers, make_agent

        self.assignment = assign_attackers(self.config, self.attack_rng)
        return [make_agent(i, self, self.assignment) for i in range(n)]

    @property
    def malicious_ids(self) -> FrozenSet[int]:
        return self.assignment.malicious_ids if self.assignment is not None else frozenset()

    # ------------------------------------------------------------------ #
    # 스케줄링
    # ------------------------------------------------------------------ #
    def schedule(self, time: float, kind: EventKind, payload: Any = None) -> Event:
        return self.queue.push(time, kind, payload)

    def start(self) -> None:
        """경계/CBR/공격 이벤트 초기 스케줄. 여러 번 불러도 한 번만 수행."""
        if self._started:
            return
        self._started = True
        cfg = self.config

        for node, agent in enumerate(self.agents):
            self._record_snapshot(0, node, agent)
        self.log.boundaries_recorded = 1
        for k in range(1, cfg.interval_count + 1):
            self.schedule(k * cfg.sampling_interval, EventKind.INTERVAL_BOUNDARY, k)

        if cfg.cbr_rate > 0:
            n = cfg.node_count
            self.flows: Dict[int, int] = {}
            for node in range(n):
                dest = int(self.traffic_rng.integers(n - 1))
                if dest >= node:
                    dest += 1
                self.flows[node] = dest
                offset = float(self.traffic_rng.uniform(0.0, 1.0 / cfg.cbr_rate))
                self.schedule(offset, EventKind.CBR_TICK, (node, offset, 0))

        for agent in self.agents:
            agent.on_start(0.0)

    def run_until(self, until: float) -> None:
        self.start()
        while self.queue and self.queue.peek_time() <= until + TIME_EPS:
            event = self.queue.pop()
            self.now = event.time
            self._dispatch(event)

    def run(self) -> CounterLog:
        self.run_until(self.config.duration)
        logger.debug(
            "시뮬레이션 종료 %s: sent=%d delivered=%d dropped=%d in_flight=%d",
            self.config.scenario_id,
            self.log.channel.sent,
            self.log.channel.delivered,
            self.log.channel.dropped,
            self.log.channel.in_flight,
        )
        return self.log

    def _dispatch(self, event: Event) -> None:
        now = event.time
        if event.kind is EventKind.PACKET_ARRIVAL:
            sender, packet, receivers, target = event.payload
            self.log.channel.in_flight -= 1
            self.log.channel.delivered += 1
            self._deliver(sender, packet, receivers, target, now)
        elif event.kind is EventKind.CBR_TICK:
            node, offset, index = event.payload
            cfg = self.config
            size = int(self.traffic_rng.integers(cfg.cbr_size_min, cfg.cbr_size_max + 1))
            self.agents[node].originate_data(self.flows[node], size, now)
            next_time = offset + (index + 1) / cfg.cbr_rate
            self.schedule(next_time, EventKind.CBR_TICK, (node, offset, index + 1))
        elif event.kind is EventKind.ATTACK_TICK:
            self.agents[event.payload].on_attack_tick(now)
        elif event.kind is EventKind.INTERVAL_BOUNDARY:
            k = event.payload
            for node, agent in enumerate(self.agents):
                self._record_snapshot(k, node, agent)
            self.log.boundaries_recorded = k + 1
            for hook in self.boundary_hooks:
                hook(k, now)
        elif event.kind is EventKind.ROUTE_TIMEOUT:
            node, destination, rreq_id = event.payload
            self.agents[node].on_discovery_timeout(destination, rreq_id, now)
        else:
            raise RuntimeError(f"처리할 수 없는 이벤트: {event.kind}")

    def _deliver(self, sender: int, packet, receivers: Tuple[int, ...], target: Optional[int], now: float) -> None:
        """
        범위 안 모든 노드가 송신을 듣고, 처리는 target (브로드캐스트면 전원) 이 한다.

        플러딩 패킷(RREQ)을 이미 본 노드는 처리 없이 rreq_recv 만 오른다.
        """
        self.log.hear_all(receivers, sender, now)
        if target is not None:
            self.agents[target].receive(packet, now)
            return
        key = getattr(packet, "flood_key", None)
        if key is None:
            for r in receivers:
                self.agents[r].receive(packet, now)
            return
        fresh, repeated = [], []
        for r in receivers:
            (repeated if self.agents[r].has_seen(key) else fresh).append(r)
        if repeated:
            self.log.counts[self.log.interval_of(now), repeated, Counter.RREQ_RECV] += 1
        for r in fresh:
            self.agents[r].receive(packet, now)

    def _record_snapshot(self, boundary: int, node: int, agent) -> None:
        from aodv_routing import route_snapshot

        dests, hop_sum = route_snapshot(agent.table, self.now)
        self.log.record_snapshot(boundary, node, dests, hop_sum)

    # ------------------------------------------------------------------ #
    # 채널
    # ------------------------------------------------------------------ #
    def position(self, node: int, now: float) -> Tuple[float, float]:
        x, y = self.mobility.positions(now)[node]
        return (float(x), float(y))

    def neighbors_of(self, sender: int, now: float) -> Tuple[int, ...]:
        """같은 시각 안에서는 송신자별로 한 번만 계산한다."""
        if now != self._topology_time:
            self._topology_time = now
            self._neighbor_rows.clear()
        row = self._neighbor_rows.get(sender)
        if row is None:
            pos = self.mobility.positions(now)
            dist = np.hypot(pos[:, 0] - pos[sender, 0], pos[:, 1] - pos[sender, 1])
            mask = dist <= self.config.radio_range
            mask[sender] = False
            row = tuple(np.flatnonzero(mask).tolist())
            self._neighbor_rows[sender] = row
        return row

    def reachable(self, a: int, b: int, now: float) -> bool:
        return in_range(self.position(a, now), self.position(b, now), self.config.radio_range)

    def broadcast(self, sender: int, packet, now: float) -> Tuple[int, ...]:
        """범위 안 모든 노드에 도착 이벤트를 잡는다. 도착할 노드 목록을 반환."""
        receivers = self.neighbors_of(sender, now)
        self._transmit(sender, packet, receivers, None, now)
        return receivers

    def unicast(self, sender: int, next_hop: int, packet, now: float) -> bool:
        """next_hop 이 범위 밖이면 채널에서 버려지고 False."""
        receivers = self.neighbors_of(sender, now)
        if next_hop not in receivers:
            self.log.channel.sent += 1
            self.log.channel.dropped += 1
            return False
        self._transmit(sender, packet, receivers, next_hop, now)
        return True

    def _transmit(self, sender: int, packet, receivers: Tuple[int, ...], target: Optional[int], now: float) -> None:
        self.log.channel.sent += 1
        if not receivers:
            self.log.channel.dropped += 1
            return
        delay = transmission_delay(packet.size, self.config.bandwidth)
        self.log.channel.in_flight += 1
        self.schedule(now + delay, EventKind.PACKET_ARRIVAL, (sender, packet, receivers, target))


def run_simulation(config: SimConfig) -> CounterLog:
    """설정 하나로 시뮬레이션 전체를 돌려 CounterLog 를 반환."""
    return Simulator(config).run()
