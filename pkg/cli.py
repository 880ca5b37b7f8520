"""
MANET 침입 탐지 실험 명령행 도구.

    python cli.py simulate --out data/normal.csv
    python cli.py build-dataset data/a.csv data/b.csv --out data/train.csv
    python cli.py tune --model svm --task binary --dataset data/train.csv --out out/svm_hp.yaml
    python cli.py train --model svm --task binary --dataset data/train.csv --hyperparameters out/svm_hp.yaml --out out/svm.json
    python cli.py evaluate --model-file out/svm.json --dataset data/test.csv --out out/svm_report.json
    python cli.py experiment --template malicious --out-dir out/sweep_b
    python cli.py detect-online --model-file out/svm.json --attack blackhole --malicious 5 --out out/alarms.csv
    python cli.py report out/sweep_b/reports.json --out out/table.csv

종료 코드: 0 성공, 1 사용법/설정 오류, 2 데이터 오류, 3 학습/탐색 실패 및 내부 오류.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import pandas as pd
import yaml
from pydantic import ValidationError

from classifiers import Hyperparameters, LabelTask, ModelKind, TaskMode, TrainingError, default_hyperparameters
from config_utils import (
    DEFAULT_CONFIG_PATH,
    config_digest,
    get_jobs,
    get_log_level,
    load_experiment_spec,
    load_grid_spec,
    load_sim_config,
)
from evaluation import EvalReport, GridSpec, SearchError, evaluate_model, grid_search
from experiments import SweepTemplate, reports_to_table, run_experiment
from feature_pipeline import DatasetError, extract_dataset, merge_datasets, read_dataset, write_counter_trace, write_dataset
from online_detection import run_online_detection, write_alarms
from sim_engine import AttackKind, ConfigError, Simulator
from trained_model import load_model, save_model, train_model

__version__ = "0.1.0"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

MANIFEST_NAME = "manifest.yaml"

logger = logging.getLogger("cli")


class _ArgumentParser(argparse.ArgumentParser):
    """사용법 오류를 종료 코드 1 로."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# ---------------------------------------------------------------------- #
# 공통
# ---------------------------------------------------------------------- #
def _banner(title: str) -> None:
    print(f"\n{'=' * 60}")
    print(title)
    print(f"{'=' * 60}")


def _config_path(args) -> Optional[str]:
    """--config 를 주면 반드시 있어야 하고, 안 주면 기본 파일이 있을 때만 쓴다."""
    if args.config:
        return args.config
    return DEFAULT_CONFIG_PATH if os.path.exists(DEFAULT_CONFIG_PATH) else None


def _sim_overrides(args) -> Dict[str, Any]:
    return {
        "rng_seed": args.seed,
        "attack_kind": args.attack,
        "malicious_count": args.malicious,
        "pause_time": args.pause,
        "sampling_interval": args.dt,
        "duration": args.duration,
        "node_count": args.nodes,
    }


def _jobs(args) -> int:
    return args.jobs if args.jobs else get_jobs()


def write_manifest(
    output_path: str,
    command: str,
    config_path: Optional[str],
    resolved: Dict[str, Any],
    seeds: Dict[str, Any],
) -> str:
    """
    출력 디렉터리의 manifest.yaml 에 출력 파일 항목을 추가/갱신한다.

    시각 정보는 넣지 않는다 (같은 입력이면 같은 파일).
    """
    directory = os.path.dirname(os.path.abspath(output_path))
    os.makedirs(directory, exist_ok=True)
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    manifest: Dict[str, Any] = {"tool_version": __version__, "entries": {}}
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = yaml.safe_load(f) or manifest
        manifest.setdefault("entries", {})
        manifest["tool_version"] = __version__
    manifest["entries"][os.path.basename(output_path)] = {
        "command": command,
        "config_path": config_path,
        "config_digest": config_digest(config_path),
        "resolved": resolved,
        "seeds": seeds,
    }
    with open(manifest_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=True, allow_unicode=True)
    return manifest_path


def _read_hyperparameters(path: str) -> Hyperparameters:
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    try:
        return Hyperparameters(**data.get("hyperparameters", data))
    except ValidationError as e:
        raise ConfigError(f"하이퍼파라미터 파일 오류 ({path}): {e}") from e


# ---------------------------------------------------------------------- #
# 서브커맨드
# ---------------------------------------------------------------------- #
def cmd_simulate(args) -> int:
    config_path = _config_path(args)
    config = load_sim_config(config_path, _sim_overrides(args))
    _banner(f"시뮬레이션 {config.scenario_id}")
    print(f"노드 {config.node_count}개, {config.duration:g}초, dt={config.sampling_interval:g}초")

    log = Simulator(config).run()
    dataset = extract_dataset(log)
    write_dataset(dataset, args.out)
    print(f"\n  데이터셋: {args.out} ({len(dataset):,}행)")
    if args.trace:
        write_counter_trace(log, args.trace)
        print(f"  카운터 트레이스: {args.trace}")
    c = log.channel
    print(f"  채널: sent={c.sent:,} delivered={c.delivered:,} dropped={c.dropped:,} in_flight={c.in_flight}")

    write_manifest(args.out, "simulate", config_path, config.model_dump(mode="json"), {"rng_seed": config.rng_seed})
    return EXIT_OK


def cmd_build_dataset(args) -> int:
    _banner("데이터셋 병합")
    datasets = [read_dataset(path) for path in args.inputs]
    merged = merge_datasets(datasets)
    write_dataset(merged, args.out)
    for label, count in sorted(merged.label_counts().items()):
        print(f"  {label}: {count:,}개")
    print(f"\n  저장: {args.out} ({len(merged):,}행)")
    write_manifest(
        args.out,
        "build-dataset",
        None,
        {"inputs": list(args.inputs), "sampling_interval": merged.sampling_interval},
        {"rng_seeds": sorted({cfg.rng_seed for cfg in merged.provenance})},
    )
    return EXIT_OK


def cmd_tune(args) -> int:
    config_path = _config_path(args)
    grid = load_grid_spec(config_path) if config_path else GridSpec()
    if args.reduced_grid:
        grid = grid.reduced()
    kind, task = ModelKind(args.model), LabelTask.for_mode(args.task)
    dataset = read_dataset(args.dataset)
    seed = args.seed if args.seed is not None else 0

    _banner(f"그리드 탐색 {kind.value}/{task.mode.value}")
    print(f"데이터셋 {args.dataset} ({len(dataset):,}행)")
    result = grid_search(kind, dataset, task, grid, seed, _jobs(args))
    best = result.best.model_dump(exclude_none=True)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as f:
        yaml.safe_dump({"kind": kind.value, "task": task.mode.value, "seed": seed, "hyperparameters": best}, f, sort_keys=True)

    scores_path = os.path.splitext(args.out)[0] + ".scores.csv"
    pd.DataFrame.from_records([s.to_record() for s in result.scores]).to_csv(
        scores_path, index=False, encoding="utf-8", lineterminator="\n"
    )
    print(f"\n  선택: {best}")
    print(f"  후보 점수표: {scores_path} ({len(result.scores)}행)")

    resolved = {"grid": grid.model_dump(), "dataset": args.dataset, "model": kind.value, "task": task.mode.value}
    write_manifest(args.out, "tune", config_path, resolved, {"seed": seed})
    write_manifest(scores_path, "tune", config_path, resolved, {"seed": seed})
    return EXIT_OK


def cmd_train(args) -> int:
    kind, task = ModelKind(args.model), LabelTask.for_mode(args.task)
    hp = _read_hyperparameters(args.hyperparameters) if args.hyperparameters else default_hyperparameters(kind)
    seed = args.seed if args.seed is not None else 0
    dataset = read_dataset(args.dataset)

    _banner(f"학습 {kind.value}/{task.mode.value}")
    print(f"데이터셋 {args.dataset} ({len(dataset):,}행), 하이퍼파라미터 {hp.model_dump(exclude_none=True)}")
    model = train_model(kind, dataset, task, hp, seed)
    save_model(model, args.out)
    print(f"\n  모델 저장: {args.out}")

    resolved = {
        "dataset": args.dataset,
        "model": kind.value,
        "task": task.mode.value,
        "hyperparameters": hp.model_dump(exclude_none=True),
        "hyperparameters_file": args.hyperparameters,
    }
    write_manifest(args.out, "train", None, resolved, {"seed": seed})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model_file)
    dataset = read_dataset(args.dataset)
    _banner(f"평가 {model.kind.value}/{model.task.mode.value}")
    report = evaluate_model(model, dataset)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)

    def fmt(value):
        return "정의 안 됨" if value is None else f"{value:.4f}"

    print(f"  오류율: {report.error:.4f}")
    print(f"  DR: {fmt(report.detection_rate)}  FA: {fmt(report.false_alarm)}")
    for attack, dr in sorted(report.per_attack.items()):
        print(f"    {attack}: DR {dr:.4f} ({report.per_attack_source})")
    print(f"\n  보고서: {args.out}")

    write_manifest(args.out, "evaluate", None, {"model_file": args.model_file, "dataset": args.dataset}, {"seed": model.seed})
    return EXIT_OK


def cmd_experiment(args) -> int:
    config_path = _config_path(args)
    overrides: Dict[str, Any] = {"template": args.template}
    if args.full_grid:
        overrides["reduced_grid"] = False
    spec = load_experiment_spec(config_path, overrides)
    jobs = _jobs(args)

    _banner(f"스윕 실험 ({spec.template.value})")
    print(f"축 값 {spec.axis_values()}, 공격 {[a.value for a in spec.attacks]}, jobs={jobs}")
    result = run_experiment(spec, jobs=jobs)

    os.makedirs(args.out_dir, exist_ok=True)
    reports_path = os.path.join(args.out_dir, "reports.json")
    with open(reports_path, "w", encoding="utf-8") as f:
        json.dump(
            {"reports": [r.to_dict() for r in result.reports], "absent": result.absent},
            f,
            indent=2,
            sort_keys=True,
        )
    summary_path = os.path.join(args.out_dir, "summary.csv")
    result.summary().to_csv(summary_path, index=False, encoding="utf-8", lineterminator="\n")
    table_path = os.path.join(args.out_dir, "table.csv")
    result.table().to_csv(table_path, index=False, encoding="utf-8", lineterminator="\n")

    print(f"\n  보고서 {len(result.reports)}개, 누락 셀 {len(result.absent)}개")
    print(f"  - {reports_path}\n  - {summary_path}\n  - {table_path}")

    resolved = spec.model_dump(mode="json")
    seeds = {"train_seeds": list(spec.train_seeds), "test_seeds": list(spec.test_seeds), "tuning_seed": spec.tuning_seed}
    for path in (reports_path, summary_path, table_path):
        write_manifest(path, "experiment", config_path, resolved, seeds)
    return EXIT_OK


def cmd_detect_online(args) -> int:
    config_path = _config_path(args)
    config = load_sim_config(config_path, _sim_overrides(args))
    model = load_model(args.model_file)

    _banner(f"온라인 탐지 {config.scenario_id}")
    alarms = run_online_detection(config, model)
    write_alarms(alarms, args.out)
    local = sum(1 for a in alarms if a.scope.value == "local")
    print(f"  경보 {len(alarms):,}건 (local {local:,}건)")
    print(f"\n  저장: {args.out}")

    resolved = {"simulation": config.model_dump(mode="json"), "model_file": args.model_file}
    write_manifest(args.out, "detect-online", config_path, resolved, {"rng_seed": config.rng_seed})
    return EXIT_OK


def _load_reports(path: str) -> List[EvalReport]:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if isinstance(data, dict) and "reports" in data:
        return [EvalReport.from_dict(r) for r in data["reports"]]
    if isinstance(data, list):
        return [EvalReport.from_dict(r) for r in data]
    return [EvalReport.from_dict(data)]


def cmd_report(args) -> int:
    _banner("보고서 표 생성")
    reports: List[EvalReport] = []
    for path in args.inputs:
        reports.extend(_load_reports(path))
    inconsistent = [r for r in reports if not r.is_consistent()]
    if inconsistent:
        raise DatasetError(f"행렬과 지표가 맞지 않는 보고서 {len(inconsistent)}개")
    table = reports_to_table(reports)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    table.to_csv(args.out, index=False, encoding="utf-8", lineterminator="\n")
    print(f"  보고서 {len(reports)}개 → {len(table):,}행")
    print(f"\n  저장: {args.out}")
    write_manifest(args.out, "report", None, {"inputs": list(args.inputs)}, {})
    return EXIT_OK


# ---------------------------------------------------------------------- #
# 파서
# ---------------------------------------------------------------------- #
def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help=f"설정 파일 (기본: {DEFAULT_CONFIG_PATH} 이 있으면 사용)")
    common.add_argument("--jobs", type=int, default=None, help="병렬 작업 수 (기본: MANET_IDS_JOBS 또는 1)")
    common.add_argument("--verbose", action="store_true", help="DEBUG 로그 출력")

    scenario = _ArgumentParser(add_help=False)
    scenario.add_argument("--attack", choices=[a.value for a in AttackKind], default=None)
    scenario.add_argument("--malicious", type=int, default=None, help="악성 노드 수")
    scenario.add_argument("--pause", type=float, default=None, help="정지 시간 (s)")
    scenario.add_argument("--dt", type=float, default=None, help="샘플링 구간 (s)")
    scenario.add_argument("--duration", type=float, default=None, help="시뮬레이션 길이 (s)")
    scenario.add_argument("--nodes", type=int, default=None, help="노드 수")
    scenario.add_argument("--seed", type=int, default=None, help="시뮬레이션 난수 시드")

    model_choice = _ArgumentParser(add_help=False)
    model_choice.add_argument("--model", required=True, choices=[k.value for k in ModelKind])
    model_choice.add_argument("--task", required=True, choices=[m.value for m in TaskMode])
    model_choice.add_argument("--dataset", required=True, help="학습 데이터셋 CSV")
    model_choice.add_argument("--seed", type=int, default=None, help="학습 시드 (기본 0)")

    parser = _ArgumentParser(prog="cli.py", description="MANET 침입 탐지 실험 도구")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, scenario], help="시나리오 하나를 시뮬레이션해 데이터셋 생성")
    p.add_argument("--out", required=True, help="데이터셋 CSV 경로")
    p.add_argument("--trace", default=None, help="카운터 트레이스 CSV 경로")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("build-dataset", parents=[common], help="데이터셋 여러 개를 병합")
    p.add_argument("inputs", nargs="+", help="입력 데이터셋 CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_build_dataset)

    p = sub.add_parser("tune", parents=[common, model_choice], help="k-fold 그리드 탐색")
    p.add_argument("--out", required=True, help="선택된 하이퍼파라미터 YAML 경로")
    p.add_argument("--reduced-grid", action="store_true", help="T <= 100, nh/ng ∈ {10, 20, 40}")
    p.set_defaults(handler=cmd_tune)

    p = sub.add_parser("train", parents=[common, model_choice], help="모델 학습")
    p.add_argument("--hyperparameters", default=None, help="tune 이 만든 YAML (없으면 기본값)")
    p.add_argument("--out", required=True, help="모델 JSON 경로")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="테스트 데이터셋으로 평가")
    p.add_argument("--model-file", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="보고서 JSON 경로")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("experiment", parents=[common], help="스윕 실험")
    p.add_argument("--template", choices=[t.value for t in SweepTemplate], default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--full-grid", action="store_true", help="축소하지 않은 그리드 사용")
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("detect-online", parents=[common, scenario], help="시뮬레이션 중 온라인 탐지")
    p.add_argument("--model-file", required=True)
    p.add_argument("--out", required=True, help="경보 CSV 경로")
    p.set_defaults(handler=cmd_detect_online)

    p = sub.add_parser("report", parents=[common], help="보고서를 그림용 표로 변환")
    p.add_argument("inputs", nargs="+", help="보고서 JSON (evaluate 또는 experiment 출력)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_report)
    return parser


def _setup_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, get_log_level(), logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.handler(args)
    except (ConfigError, ValidationError) as e:
        print(f"\n[ERROR] 설정 오류: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetError as e:
        print(f"\n[ERROR] 데이터 오류: {e}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, SearchError) as e:
        print(f"\n[ERROR] 학습 실패: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, OSError) as e:
        print(f"\n[ERROR] 데이터 오류: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:
        logger.exception("내부 오류")
        print(f"\n[ERROR] 내부 오류: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
