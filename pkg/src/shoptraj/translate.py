"""Trajectory-to-text input translation and dataset record assembly.

The rendered model-input string format is normative and byte-exact:

    Trajectory is {tok1}</s>{tok2}</s>...\n Customer purchase item list is ['Name1', 'Name2']\n Output:

Each stop token is a category label followed by the literal `</s>`; the
purchase list holds single-quoted item names in purchase order; newlines are
LF with a single space after each one.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .geometry import Point, dist
from .planner.generate import AnnotatedTrajectory
from .storemap import StoreMap

SEPARATOR = "</s>"
INPUT_PATTERN = re.compile(
    r"\ATrajectory is (?P<tokens>[^\n]*)\n"
    r" Customer purchase item list is \[(?P<items>[^\n]*)\]\n"
    r" Output:\Z"
)
POSITION_DECIMALS = 3
DEFAULT_STOP_THRESHOLD = 0.15


class FormatError(ValueError):
    """A rendered model input does not follow the normative grammar."""


@dataclass(frozen=True)
class StopSequence:
    """Timesteps with sub-threshold displacement, collapsed into per-item runs."""

    indices: tuple[int, ...]
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class DatasetRecord:
    input_text: str
    reference_caption: str
    sample_id: str
    split: str  # "train" | "val" | "test"
    lineage: str  # "original" | "paraphrase(k)"
    map_id: str = ""

    def __post_init__(self) -> None:
        if not self.input_text.endswith("Output:"):
            raise ValueError("input_text must end with the literal suffix 'Output:'")
        if not self.reference_caption:
            raise ValueError("reference_caption must be non-empty")


def detect_stops(
    positions: Sequence[Point],
    items_in_contact: Sequence[str],
    categories_by_item: Mapping[str, str],
    threshold: float,
) -> StopSequence:
    """Find stop timesteps (displacement below threshold) and their category tokens.

    Consecutive stop timesteps at the same nearest item collapse into one run;
    each run contributes the contacted item's category as one token.
    """
    if len(positions) < 2:
        raise ValueError("need at least two positions")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if len(positions) != len(items_in_contact):
        raise ValueError("positions and items_in_contact must align")

    indices: list[int] = []
    tokens: list[str] = []
    prev_stop_item: str | None = None
    for t in range(1, len(positions)):
        if dist(positions[t], positions[t - 1]) < threshold:
            item = items_in_contact[t]
            indices.append(t)
            if item != prev_stop_item:
                tokens.append(categories_by_item[item])
            prev_stop_item = item
        else:
            prev_stop_item = None
    return StopSequence(indices=tuple(indices), tokens=tuple(tokens))


def render_model_input(tokens: Sequence[str], purchase_names: Sequence[str]) -> str:
    """Render the normative model-input string; see the module docstring."""
    for tok in tokens:
        if SEPARATOR in tok or "\n" in tok:
            raise FormatError(f"token {tok!r} would break the grammar")
    for name in purchase_names:
        if "'" in name or "\n" in name:
            raise FormatError(f"item name {name!r} would break the grammar")
    token_part = "".join(f"{tok}{SEPARATOR}" for tok in tokens)
    items_part = "[" + ", ".join(f"'{name}'" for name in purchase_names) + "]"
    return f"Trajectory is {token_part}\n Customer purchase item list is {items_part}\n Output:"


def parse_model_input(text: str) -> tuple[list[str], list[str]]:
    """Inverse of render_model_input; recovers (tokens, purchase names)."""
    match = INPUT_PATTERN.match(text)
    if match is None:
        raise FormatError("input does not match the model-input grammar")
    token_part = match.group("tokens")
    if token_part == "":
        tokens: list[str] = []
    else:
        if not token_part.endswith(SEPARATOR):
            raise FormatError("trajectory section must end with the separator")
        tokens = token_part[: -len(SEPARATOR)].split(SEPARATOR)
        if any(tok == "" for tok in tokens):
            raise FormatError("empty stop token")
    items_part = match.group("items")
    if items_part == "":
        names: list[str] = []
    else:
        names = []
        for chunk in items_part.split(", "):
            m = re.fullmatch(r"'([^']*)'", chunk)
            if m is None:
                raise FormatError(f"malformed purchase entry {chunk!r}")
            names.append(m.group(1))
    return tokens, names


def build_record(
    traj: AnnotatedTrajectory,
    caption: str,
    store: StoreMap,
    threshold: float = DEFAULT_STOP_THRESHOLD,
    sample_id: str = "",
    split: str = "train",
) -> DatasetRecord:
    """Compose stop detection and rendering into one original-lineage record."""
    categories = {it.id: it.category for it in store.items}
    stops = detect_stops(traj.positions, traj.items_in_contact, categories, threshold)
    names = []
    for item_id in traj.purchased:
        item = store.items_by_id.get(item_id)
        if item is None:
            raise KeyError(f"purchased item id '{item_id}' not in the catalog")
        names.append(item.name)
    return DatasetRecord(
        input_text=render_model_input(stops.tokens, names),
        reference_caption=caption,
        sample_id=sample_id or traj.caption_id,
        split=split,
        lineage="original",
        map_id=traj.map_id,
    )


# ---------------------------------------------------------------------------
# File formats: newline-delimited JSON, UTF-8, LF, sorted keys.


def record_to_json(record: DatasetRecord) -> str:
    return json.dumps(
        {
            "sample_id": record.sample_id,
            "split": record.split,
            "lineage": record.lineage,
            "input_text": record.input_text,
            "reference_caption": record.reference_caption,
            "map_id": record.map_id,
        },
        sort_keys=True,
        ensure_ascii=False,
    )


def write_dataset(records: Iterable[DatasetRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record_to_json(record) + "\n")


def read_dataset(path: str | Path) -> list[DatasetRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            records.append(
                DatasetRecord(
                    input_text=doc["input_text"],
                    reference_caption=doc["reference_caption"],
                    sample_id=doc["sample_id"],
                    split=doc["split"],
                    lineage=doc["lineage"],
                    map_id=doc.get("map_id", ""),
                )
            )
    return records


def trajectory_to_json(traj: AnnotatedTrajectory) -> str:
    return json.dumps(
        {
            "caption_id": traj.caption_id,
            "map_id": traj.map_id,
            "provenance": traj.provenance,
            "positions": [
                [round(x, POSITION_DECIMALS), round(y, POSITION_DECIMALS)]
                for x, y in traj.positions
            ],
            "items_in_contact": list(traj.items_in_contact),
            "purchased": list(traj.purchased),
            "flags": list(traj.flags),
        },
        sort_keys=True,
        ensure_ascii=False,
    )


def write_trajectories(trajs: Iterable[AnnotatedTrajectory], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for traj in trajs:
            fh.write(trajectory_to_json(traj) + "\n")


def read_trajectories(path: str | Path) -> list[AnnotatedTrajectory]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            out.append(
                AnnotatedTrajectory(
                    positions=[(float(x), float(y)) for x, y in doc["positions"]],
                    items_in_contact=list(doc["items_in_contact"]),
                    purchased=list(doc["purchased"]),
                    provenance=doc["provenance"],
                    map_id=doc["map_id"],
                    caption_id=doc["caption_id"],
                    flags=list(doc.get("flags", [])),
                )
            )
    return out
