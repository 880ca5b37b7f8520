"""
기본 50노드 / 700초 시나리오 스윕에서 보이는 추세 (dt=15, 정지 200초, 테스트 시드 3개).

오래 걸리므로 --acceptance 를 줄 때만 돈다.
"""

import pytest

from classifiers import ModelKind, TaskMode
from config_utils import get_jobs
from experiments import ExperimentSpec, ScenarioStore, SweepTemplate, run_experiment
from sim_engine import AttackKind

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


@pytest.fixture(scope="module")
def store():
    return ScenarioStore()


@pytest.fixture(scope="module")
def malicious_sweep(store):
    spec = ExperimentSpec(
        template=SweepTemplate.MALICIOUS,
        attacks=[AttackKind.FLOODING, AttackKind.DROPPING],
        pause_times=[200.0],
        tune=False,
    )
    return run_experiment(spec, jobs=get_jobs(), store=store)


def _reports(result, **cell):
    return [r for r in result.reports if all(r.cell[k] == v for k, v in cell.items())]


def test_flooding_is_easier_than_dropping(malicious_sweep):
    wins = 0
    for kind in ModelKind:
        (flooding,) = _reports(malicious_sweep, malicious_count=15, attack="flooding", model=kind.value, task="multiclass")
        (dropping,) = _reports(malicious_sweep, malicious_count=15, attack="dropping", model=kind.value, task="multiclass")
        wins += flooding.per_attack["flooding"] > dropping.per_attack["dropping"]
    assert wins >= 4


@pytest.mark.parametrize("mode", list(TaskMode))
def test_more_attackers_lower_error(malicious_sweep, mode):
    summary = malicious_sweep.summary().set_index(["malicious_count", "model", "task"])["error_mean"]
    wins = sum(summary[(25, kind.value, mode.value)] < summary[(5, kind.value, mode.value)] for kind in ModelKind)
    assert wins >= 4


def test_tuned_binary_models_catch_flooding(store, malicious_sweep):
    spec = ExperimentSpec(
        template=SweepTemplate.MALICIOUS,
        attacks=[AttackKind.FLOODING],
        malicious_counts=[15],
        pause_times=[200.0],
        modes=[TaskMode.BINARY],
    )
    result = run_experiment(spec, jobs=get_jobs(), store=store)
    assert len(result.reports) == len(ModelKind)
    for report in result.reports:
        assert report.detection_rate > 0.5, report.kind
        assert report.false_alarm < 0.25, report.kind
