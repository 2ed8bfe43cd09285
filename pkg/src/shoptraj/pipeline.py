"""End-to-end dataset synthesis and the invariant validation suite."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import augment_dataset
from .captions import (
    ItemLists,
    generate_action_plan,
    generate_captions,
    generate_item_lists,
)
from .config import PipelineConfig
from .gateway import Gateway
from .geometry import dist
from .planner import (
    AnnotatedTrajectory,
    PlannerParams,
    StepBudgetError,
    UnreachableItemError,
    build_roadmap,
    generate_trajectory,
)
from .planner.generate import EMERGENCY_FLAG
from .storemap import StoreMap, load_map_file
from .translate import (
    DatasetRecord,
    build_record,
    parse_model_input,
    read_dataset,
    read_trajectories,
    write_dataset,
    write_trajectories,
    FormatError,
)

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
KINEMATIC_EPS = 1e-9
FILE_QUANTIZATION_SLACK = 3e-3  # exported positions carry 3 decimals


@dataclass
class SampleStatus:
    sample_id: str
    status: str  # "ok" | "failed"
    reason: str = ""


@dataclass
class SynthResult:
    manifest: dict
    records: list[DatasetRecord]
    trajectories: list[AnnotatedTrajectory]
    failures: int

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Per-sample stream: dataset seed XOR sample index, 64-bit."""
    return np.random.default_rng((seed ^ index) & MASK64)


def synth(config: PipelineConfig) -> SynthResult:
    """Run caption synthesis, planning, translation, split and augmentation.

    Writes dataset.jsonl, trajectories.jsonl and manifest.json under
    config.out_dir. Outputs are a pure function of (config, fixtures, map).
    """
    store = load_map_file(config.map_path)
    gateway = Gateway(config.backend)
    paraphrase_gw = Gateway(config.paraphrase_backend) if config.paraphrase_backend else gateway
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    log.info("[step1] generating %d caption profiles", config.n_samples)
    profiles = generate_captions(gateway, store, config.n_samples, rng_seed=config.seed)

    log.info("[step2+3] building plans and item lists")
    statuses: list[SampleStatus] = []
    lists_by_index: dict[int, ItemLists] = {}

    def plan_sample(index: int) -> tuple[int, ItemLists | None, str]:
        profile = profiles[index]
        try:
            plan = generate_action_plan(gateway, profile, store.categories, seed=config.seed ^ index)
            lists = generate_item_lists(gateway, profile, plan, store, seed=config.seed ^ index)
            return index, lists, ""
        except Exception as exc:  # noqa: BLE001 - per-sample isolation
            return index, None, str(exc)

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        for index, lists, reason in pool.map(plan_sample, range(config.n_samples)):
            if lists is None:
                statuses.append(SampleStatus(_sid(index), "failed", f"steps 2-3: {reason}"))
            else:
                lists_by_index[index] = lists

    log.info("[step4] building the roadmap and %d trajectories", len(lists_by_index))
    roadmap = build_roadmap(store, config.planner, np.random.default_rng([config.seed & MASK64, 0]))

    def plan_trajectory(index: int) -> tuple[int, AnnotatedTrajectory | None, str]:
        try:
            traj = generate_trajectory(
                store,
                lists_by_index[index],
                profiles[index].purchase_consideration,
                config.planner,
                sample_rng(config.seed, index),
                roadmap=roadmap,
                caption_id=_sid(index),
            )
        except (UnreachableItemError, StepBudgetError) as exc:
            return index, None, str(exc)
        if EMERGENCY_FLAG in traj.flags:
            return index, None, "emergency stop during planning"
        return index, traj, ""

    trajectories: dict[int, AnnotatedTrajectory] = {}
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        for index, traj, reason in pool.map(plan_trajectory, sorted(lists_by_index)):
            if traj is None:
                statuses.append(SampleStatus(_sid(index), "failed", f"step 4: {reason}"))
            else:
                trajectories[index] = traj
                statuses.append(SampleStatus(_sid(index), "ok"))
    statuses.sort(key=lambda s: s.sample_id)

    log.info("[translate] rendering %d records", len(trajectories))
    split_of = _assign_splits(config)
    records: list[DatasetRecord] = []
    ordered = sorted(trajectories)
    for index in ordered:
        records.append(
            build_record(
                trajectories[index],
                profiles[index].caption,
                store,
                threshold=config.stop_threshold,
                sample_id=_sid(index),
                split=split_of[index],
            )
        )

    log.info("[augment] %d paraphrases per train record", config.paraphrases)
    records = augment_dataset(paraphrase_gw, records, config.paraphrases)
    records.sort(key=_record_order)

    dataset_path = out_dir / "dataset.jsonl"
    traj_path = out_dir / "trajectories.jsonl"
    write_dataset(records, dataset_path)
    write_trajectories([trajectories[i] for i in ordered], traj_path)

    failures = sum(1 for s in statuses if s.status == "failed")
    manifest = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "map_id": store.map_id,
        "n_samples": config.n_samples,
        "paraphrases": config.paraphrases,
        "counts": {
            "pairs": len(trajectories),
            "train": sum(1 for r in records if r.split == "train"),
            "val": sum(1 for r in records if r.split == "val"),
            "test": sum(1 for r in records if r.split == "test"),
            "records": len(records),
        },
        "samples": [
            {"sample_id": s.sample_id, "status": s.status, "reason": s.reason} for s in statuses
        ],
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return SynthResult(
        manifest=manifest,
        records=records,
        trajectories=[trajectories[i] for i in ordered],
        failures=failures,
    )


def _sid(index: int) -> str:
    return f"s{index:04d}"


def _record_order(record: DatasetRecord) -> tuple:
    split_rank = {"train": 0, "val": 1, "test": 2}.get(record.split, 3)
    lineage_rank = 0 if record.lineage == "original" else int(record.lineage[11:-1])
    return (split_rank, record.sample_id, lineage_rank)


def _assign_splits(config: PipelineConfig) -> dict[int, str]:
    """Seeded shuffle of sample indices, then contiguous train/val/test prefixes."""
    rng = np.random.default_rng([config.seed & MASK64, 1])
    order = list(rng.permutation(config.n_samples))
    split_of: dict[int, str] = {}
    cursor = 0
    for name, count in (
        ("train", config.split.train),
        ("val", config.split.val),
        ("test", config.split.test),
    ):
        for index in order[cursor : cursor + count]:
            split_of[int(index)] = name
        cursor += count
    return split_of


# ---------------------------------------------------------------------------
# Invariant validation suite


@dataclass
class ValidationIssue:
    subject: str
    check: str
    detail: str


@dataclass
class ValidationReport:
    checked: int = 0
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


def validate_records(records: list[DatasetRecord]) -> ValidationReport:
    """String-format grammar checks over dataset records."""
    report = ValidationReport()
    for record in records:
        report.checked += 1
        try:
            parse_model_input(record.input_text)
        except FormatError as exc:
            report.issues.append(ValidationIssue(record.sample_id, "grammar", str(exc)))
        if not record.reference_caption.strip():
            report.issues.append(ValidationIssue(record.sample_id, "caption", "empty caption"))
    return report


def validate_dataset_file(path: str | Path) -> ValidationReport:
    """Lenient file-level pass: corrupted records are reported, never fatal."""
    report = ValidationReport()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            report.checked += 1
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                report.issues.append(ValidationIssue(f"line {lineno}", "json", str(exc)))
                continue
            subject = str(doc.get("sample_id", f"line {lineno}"))
            text = doc.get("input_text", "")
            try:
                parse_model_input(text)
            except FormatError as exc:
                report.issues.append(ValidationIssue(subject, "grammar", str(exc)))
            if not str(doc.get("reference_caption", "")).strip():
                report.issues.append(ValidationIssue(subject, "caption", "empty caption"))
            if doc.get("split") not in ("train", "val", "test"):
                report.issues.append(ValidationIssue(subject, "split", f"bad split {doc.get('split')!r}"))
    return report


def validate_trajectories(
    trajs: list[AnnotatedTrajectory],
    store: StoreMap,
    params: PlannerParams | None = None,
    grid_step: float = 0.5,
    quantized: bool = False,
) -> ValidationReport:
    """Kinematic, endpoint, collision and subset invariants per trajectory.

    Synthesized runs are held to the planner step bound, human runs to the
    UI grid step. `quantized` adds slack for file round-trips that carry
    3-decimal positions.
    """
    params = params or PlannerParams()
    slack = KINEMATIC_EPS + (FILE_QUANTIZATION_SLACK if quantized else 0.0)
    report = ValidationReport()
    for traj in trajs:
        report.checked += 1
        sid = traj.caption_id or "trajectory"
        if len(traj.positions) != len(traj.items_in_contact):
            report.issues.append(ValidationIssue(sid, "alignment", "positions vs items length"))
            continue
        if not set(traj.purchased) <= set(traj.items_in_contact):
            report.issues.append(ValidationIssue(sid, "subset", "purchased not within contacts"))
        start = traj.positions[0]
        if dist(start, store.entrance) > slack + 1e-9:
            report.issues.append(ValidationIssue(sid, "entrance", f"starts at {start}"))
        if not store.cashier.contains(traj.positions[-1]):
            report.issues.append(ValidationIssue(sid, "cashier", "does not end inside the cashier region"))
        bound = (params.v_max * params.dt if traj.provenance == "synthesized" else grid_step) + slack
        for t in range(1, len(traj.positions)):
            step = dist(traj.positions[t], traj.positions[t - 1])
            if step > bound:
                report.issues.append(
                    ValidationIssue(sid, "kinematic", f"step {t} moved {step:.4f} > {bound:.4f}")
                )
                break
        margin = -FILE_QUANTIZATION_SLACK if quantized else 0.0
        for t, p in enumerate(traj.positions):
            if store.clearance(p) - store.agent_radius < margin:
                report.issues.append(
                    ValidationIssue(sid, "collision", f"position {t} at {p} intersects an obstacle")
                )
                break
    return report


def validate_paths(
    dataset_path: str | Path | None = None,
    trajectories_path: str | Path | None = None,
    map_path: str | Path | None = None,
    params: PlannerParams | None = None,
) -> ValidationReport:
    report = ValidationReport()
    if dataset_path:
        sub = validate_dataset_file(dataset_path)
        report.checked += sub.checked
        report.issues.extend(sub.issues)
    if trajectories_path:
        if not map_path:
            raise ValueError("validating trajectories requires the map file")
        store = load_map_file(map_path)
        sub = validate_trajectories(
            read_trajectories(trajectories_path), store, params=params, quantized=True
        )
        report.checked += sub.checked
        report.issues.extend(sub.issues)
    return report
