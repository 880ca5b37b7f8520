"""공용 fixture: 작은 시나리오 설정, 정적 배치 시뮬레이터, 합성 데이터셋."""

import numpy as np
import pytest

from feature_pipeline import Dataset, FeatureVector, Label
from sim_engine import SimConfig, Simulator

# 라벨별 특성 중심값 (카운터 6개, pcr, pch)
LABEL_CENTERS = {
    Label.NORMAL: (5, 20, 3, 0, 1, 6, 0.2, 0.1),
    Label.BLACKHOLE: (5, 20, 15, 0, 1, 6, 0.8, 0.6),
    Label.DROPPING: (5, 20, 3, 8, 0, 6, 0.5, 0.3),
    Label.FLOODING: (60, 200, 3, 0, 1, 6, 1.5, 0.4),
    Label.FORGING: (5, 20, 3, 0, 40, 6, 1.0, -0.5),
}


def build_synthetic(counts, seed=0, sampling_interval=10.0, scenario="synthetic"):
    rng = np.random.default_rng(seed)
    rows = []
    for label, n in counts.items():
        center = LABEL_CENTERS[Label(label)]
        for i in range(n):
            ints = [int(max(0, round(c + rng.normal(0.0, 1.0)))) for c in center[:6]]
            rows.append(
                FeatureVector(
                    rreq_sent=ints[0],
                    rreq_recv=ints[1],
                    rrep_sent=ints[2],
                    rerr_sent=ints[3],
                    rerr_recv=ints[4],
                    num_neighbors=ints[5],
                    pcr=float(center[6] + rng.normal(0.0, 0.05)),
                    pch=float(center[7] + rng.normal(0.0, 0.05)),
                    label=Label(label),
                    node=i,
                    interval=0,
                    scenario=scenario,
                )
            )
    return Dataset(rows, sampling_interval)


@pytest.fixture
def synthetic():
    """build_synthetic(counts, seed=0, ...) 팩토리."""
    return build_synthetic


@pytest.fixture
def five_class_dataset():
    return build_synthetic({label: 30 for label in LABEL_CENTERS}, seed=3)


@pytest.fixture
def small_config():
    """8노드 / 400m / 20초, 빠르게 도는 시나리오."""
    return SimConfig(
        node_count=8,
        area_side=400.0,
        duration=20.0,
        sampling_interval=10.0,
        pause_time=0.0,
        cbr_rate=2.0,
        rng_seed=7,
    )


@pytest.fixture
def static_sim():
    """static_sim(positions, **overrides): 움직이지 않고 트래픽 없는 시뮬레이터."""

    def factory(positions, duration=10.0, **overrides):
        values = dict(
            node_count=len(positions),
            duration=duration,
            sampling_interval=duration,
            pause_time=duration,
            cbr_rate=0.0,
        )
        values.update(overrides)
        return Simulator(SimConfig(**values), positions=positions)

    return factory


def pytest_addoption(parser):
    parser.addoption("--acceptance", action="store_true", default=False, help="전체 스윕 추세 검사까지 실행")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--acceptance"):
        return
    skip = pytest.mark.skip(reason="--acceptance 를 주면 실행")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)
