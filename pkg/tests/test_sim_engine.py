import math
import time

import numpy as np
import pytest
from pydantic import ValidationError

from aodv_routing import RreqPacket
from sim_engine import (
    AttackKind,
    ConfigError,
    Counter,
    EventKind,
    EventQueue,
    MobilityModel,
    NodeKinematics,
    Phase,
    SimConfig,
    Simulator,
    WaypointParams,
    in_range,
    run_simulation,
    transmission_delay,
    waypoint_position,
)


# ---------------------------------------------------------------------- #
# 설정
# ---------------------------------------------------------------------- #
def test_default_config_matches_reference_scenario():
    cfg = SimConfig()
    assert (cfg.node_count, cfg.area_side, cfg.radio_range) == (50, 850.0, 250.0)
    assert cfg.bandwidth == 2_000_000.0
    assert cfg.interval_count == 70
    assert cfg.scenario_id == "none-m0-p200-dt10-s1"


def test_duration_not_multiple_of_interval_is_rejected():
    with pytest.raises(ValidationError, match="duration % sampling_interval"):
        SimConfig(duration=700.0, sampling_interval=15.0)


@pytest.mark.parametrize(
    "changes, invariant",
    [
        ({"attack_kind": "flooding", "malicious_count": 50}, "malicious_count < node_count"),
        ({"speed_min": 5.0, "speed_max": 1.0}, "speed_min <= speed_max"),
        ({"malicious_count": 3}, "attack_kind=none"),
        ({"cbr_size_min": 64}, "cbr_size_min"),
    ],
)
def test_invalid_config_names_invariant(changes, invariant):
    with pytest.raises(ValueError, match=invariant):
        SimConfig(**changes)


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)


def test_with_changes_validates():
    cfg = SimConfig()
    assert cfg.with_changes(sampling_interval=5.0).interval_count == 140
    with pytest.raises(ValueError):
        cfg.with_changes(sampling_interval=30.0)


# ---------------------------------------------------------------------- #
# 이동성 / 채널 기초
# ---------------------------------------------------------------------- #
def test_waypoint_interpolation():
    k = NodeKinematics(position=(0.0, 0.0), waypoint=(100.0, 0.0), speed=10.0, phase=Phase.MOVING, since=0.0)
    assert waypoint_position(k, 5.0) == pytest.approx((50.0, 0.0))


def test_zero_speed_stays_put():
    k = NodeKinematics(position=(3.0, 4.0), waypoint=(100.0, 0.0), speed=0.0, phase=Phase.MOVING, since=0.0)
    assert waypoint_position(k, 50.0) == (3.0, 4.0)


def test_arrival_pauses_then_draws_new_leg():
    params = WaypointParams(area_side=850.0, speed_min=1.0, speed_max=2.0, pause_time=5.0)
    k = NodeKinematics(position=(0.0, 0.0), waypoint=(10.0, 0.0), speed=10.0, phase=Phase.MOVING, since=0.0)
    rng = np.random.default_rng(0)

    assert waypoint_position(k, 3.0, params, rng) == (10.0, 0.0)
    assert k.phase is Phase.PAUSED and k.pause_until == pytest.approx(6.0)

    waypoint_position(k, 7.0, params, rng)
    assert k.phase is Phase.MOVING
    assert 1.0 <= k.speed <= 2.0
    assert 0.0 <= k.waypoint[0] <= 850.0 and 0.0 <= k.waypoint[1] <= 850.0


def test_pause_equal_to_duration_keeps_nodes_still():
    cfg = SimConfig(node_count=10, duration=700.0, pause_time=700.0, cbr_rate=0.0)
    sim = Simulator(cfg)
    start = sim.mobility.positions(0.0).copy()
    for t in (100.0, 350.0, 699.9):
        assert np.array_equal(sim.mobility.positions(t), start)
    assert np.all(sim.mobility.distance_travelled(700.0) == 0.0)


def test_positions_stay_inside_area():
    params = WaypointParams(area_side=200.0, speed_min=5.0, speed_max=20.0, pause_time=0.0)
    rngs = [np.random.default_rng(i) for i in range(6)]
    model = MobilityModel.initial(params, np.random.default_rng(9).uniform(0, 200, (6, 2)), rngs)
    for t in np.linspace(0.0, 300.0, 301):
        pos = model.positions(float(t))
        assert pos.min() >= 0.0 and pos.max() <= 200.0


@pytest.mark.parametrize(
    "a, b, expected",
    [((10.0, 10.0), (10.0, 10.0), True), ((0.0, 0.0), (250.0, 0.0), True), ((0.0, 0.0), (251.0, 0.0), False)],
)
def test_in_range_is_boundary_inclusive(a, b, expected):
    assert in_range(a, b, 250.0) is expected


def test_transmission_delay():
    assert transmission_delay(1024, 2_000_000) == pytest.approx(0.004096)
    assert transmission_delay(128, 2_000_000) == pytest.approx(0.000512)
    with pytest.raises(ValueError):
        transmission_delay(0, 2_000_000)


def test_event_queue_orders_by_time_then_insertion():
    q = EventQueue()
    q.push(2.0, EventKind.CBR_TICK, "late")
    q.push(1.0, EventKind.CBR_TICK, "first")
    q.push(1.0, EventKind.ATTACK_TICK, "second")
    assert [q.pop().payload for _ in range(3)] == ["first", "second", "late"]
    assert q.peek_time() == math.inf


# ---------------------------------------------------------------------- #
# 브로드캐스트
# ---------------------------------------------------------------------- #
class _Beacon:
    size = 24


def test_isolated_sender_has_no_receivers(static_sim):
    sim = static_sim([(0.0, 0.0), (600.0, 600.0)])
    assert sim.broadcast(0, _Beacon(), 0.0) == ()


def test_broadcast_excludes_sender_and_out_of_range(static_sim):
    sim = static_sim([(0.0, 0.0), (200.0, 0.0), (300.0, 0.0)])
    assert sim.broadcast(0, _Beacon(), 0.0) == (1,)


def test_broadcast_reaches_everyone_in_range(static_sim):
    positions = [(400.0 + i, 400.0) for i in range(50)]
    sim = static_sim(positions)
    assert len(sim.broadcast(0, _Beacon(), 0.0)) == 49


def test_neighbours_reused_within_one_instant(static_sim):
    sim = static_sim([(0.0, 0.0), (200.0, 0.0), (300.0, 0.0)])
    first = sim.neighbors_of(1, 0.0)
    assert first == (0, 2)
    assert sim.neighbors_of(1, 0.0) is first
    assert sim.neighbors_of(0, 0.0) == (1,)
    assert sim.neighbors_of(1, 1.0) == first
    assert sim.neighbors_of(1, 1.0) is not first


def test_repeated_rreq_only_counts_reception(static_sim):
    # 0, 1, 2 는 서로 이웃, 3 은 고립
    sim = static_sim([(0.0, 0.0), (100.0, 0.0), (0.0, 100.0), (600.0, 600.0)])
    sim.start()
    rreq = RreqPacket(0, 0, 24, 1, 0, 1, 3, None, 0)
    sim.agents[0].table.rreq_seen.add(rreq.flood_key)
    sim.broadcast(0, rreq, 0.0)
    sim.broadcast(0, rreq, 0.0)
    sim.run_until(1.0)

    counts = sim.log.counts[0]
    # 1, 2: 원본 두 번 + 서로의 재방송 한 번, 0: 1 과 2 의 재방송
    assert counts[:, Counter.RREQ_RECV].tolist() == [2, 3, 3, 0]
    assert counts[:, Counter.RREQ_SENT].tolist() == [0, 1, 1, 0]
    assert [sim.log.neighbor_count(n, 0) for n in range(4)] == [2, 2, 2, 0]
    c = sim.log.channel
    assert (c.sent, c.delivered, c.in_flight) == (4, 4, 0)


# ---------------------------------------------------------------------- #
# 전체 실행
# ---------------------------------------------------------------------- #
def test_same_seed_gives_identical_log(small_config):
    assert run_simulation(small_config).digest() == run_simulation(small_config).digest()


def test_different_seed_changes_log(small_config):
    other = small_config.with_changes(rng_seed=8)
    assert run_simulation(small_config).digest() != run_simulation(other).digest()


@pytest.mark.parametrize("attack", [a for a in AttackKind if a is not AttackKind.NONE])
def test_channel_conservation(small_config, attack):
    log = run_simulation(small_config.with_changes(attack_kind=attack, malicious_count=2))
    c = log.channel
    assert c.sent == c.delivered + c.dropped + c.in_flight
    assert c.sent > 0


def test_counter_log_shape_and_signs(small_config):
    log = run_simulation(small_config)
    assert log.counts.shape == (2, 8, 5)
    assert (log.counts >= 0).all()
    assert log.boundaries_recorded == 3
    frame = log.to_frame()
    assert len(frame) == 2 * 8
    assert frame["malicious"].sum() == 0


def test_no_attack_means_no_injection(small_config):
    log = run_simulation(small_config)
    assert log.malicious_ids == frozenset()
    assert sum(log.node_stat(n, "injected") for n in range(8)) == 0


def test_boundary_hooks_fire_at_each_boundary(small_config):
    sim = Simulator(small_config)
    seen = []
    sim.boundary_hooks.append(lambda k, now: seen.append((k, now)))
    sim.run()
    assert seen == [(1, 10.0), (2, 20.0)]


def test_positions_argument_shape_checked():
    with pytest.raises(ConfigError):
        Simulator(SimConfig(node_count=3), positions=[(0.0, 0.0)])


# ---------------------------------------------------------------------- #
# 기본 설정 (50노드 / 700초) 전체 실행
# ---------------------------------------------------------------------- #
FULL_SEEDS = (1, 2, 3)


@pytest.fixture(scope="module")
def full_runs():
    """시드마다 기본 설정을 두 번씩 돌린 CounterLog 쌍."""
    return {seed: (run_simulation(SimConfig(rng_seed=seed)), run_simulation(SimConfig(rng_seed=seed))) for seed in FULL_SEEDS}


@pytest.mark.slow
@pytest.mark.parametrize("seed", FULL_SEEDS)
def test_full_config_is_deterministic(full_runs, seed):
    first, second = full_runs[seed]
    assert first.digest() == second.digest()
    assert np.array_equal(first.counts, second.counts)


@pytest.mark.slow
@pytest.mark.parametrize("seed", FULL_SEEDS)
def test_full_config_conserves_packets(full_runs, seed):
    c = full_runs[seed][0].channel
    assert c.sent > 0
    assert c.sent == c.delivered + c.dropped + c.in_flight


@pytest.mark.slow
def test_full_config_nodes_stay_inside_area():
    cfg = SimConfig(rng_seed=2)
    sim = Simulator(cfg)
    for t in np.arange(0.0, cfg.duration + 1.0, 25.0):
        sim.run_until(float(t))
        pos = sim.mobility.positions(float(t))
        assert pos.min() >= 0.0 and pos.max() <= cfg.area_side
    assert sim.mobility.distance_travelled(cfg.duration).sum() > 0.0


@pytest.mark.slow
def test_full_config_pause_700_is_stationary():
    sim = Simulator(SimConfig(pause_time=700.0))
    start = sim.mobility.positions(0.0).copy()
    log = sim.run()
    assert np.array_equal(sim.mobility.positions(700.0), start)
    assert np.all(sim.mobility.distance_travelled(700.0) == 0.0)
    assert log.channel.sent > 0


@pytest.mark.slow
def test_full_config_runs_within_a_minute():
    start = time.perf_counter()
    run_simulation(SimConfig(rng_seed=4))
    assert time.perf_counter() - start < 60.0
