"""Caption evaluation: ROUGE-1/2/L, input ablations, and noise perturbation.

Tokenization is lowercase, ASCII punctuation replaced by spaces, whitespace
split, no stemming unless a stemmer callable is supplied. A pluggable
external scorer (subprocess, line protocol) fills the optional semantic
similarity column.
"""

from __future__ import annotations

import math
import string
import subprocess
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .planner.generate import AnnotatedTrajectory
from .storemap import StoreMap
from .translate import DatasetRecord, parse_model_input, render_model_input

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})

ABLATION_LABELS = {
    "drop_traj": "w/o Traj",
    "drop_item": "w/o Item",
    "shuffle_traj": "w/ Shuffle Traj",
    "shuffle_item": "w/ Shuffle Item",
}


class AblationError(Exception):
    """The requested ablation cannot be applied to these inputs."""


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        denom = precision + recall
        f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
        return cls(precision=precision, recall=recall, f1=f1)


ZERO_SCORE = RougeScore(0.0, 0.0, 0.0)


def tokenize(text: str, stemmer: Callable[[str], str] | None = None) -> list[str]:
    tokens = text.lower().translate(_PUNCT_TABLE).split()
    if stemmer is not None:
        tokens = [stemmer(t) for t in tokens]
    return tokens


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(hyp: str, ref: str, n: int, stemmer: Callable[[str], str] | None = None) -> RougeScore:
    """ROUGE-N with clipped multiset n-gram overlap."""
    hyp_grams = _ngrams(tokenize(hyp, stemmer), n)
    ref_grams = _ngrams(tokenize(ref, stemmer), n)
    hyp_total = sum(hyp_grams.values())
    ref_total = sum(ref_grams.values())
    overlap = sum((hyp_grams & ref_grams).values())
    precision = overlap / hyp_total if hyp_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    return RougeScore.from_pr(precision, recall)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(hyp: str, ref: str, stemmer: Callable[[str], str] | None = None) -> RougeScore:
    """ROUGE-L from the longest common subsequence over token sequences."""
    hyp_tokens = tokenize(hyp, stemmer)
    ref_tokens = tokenize(ref, stemmer)
    lcs = _lcs_length(hyp_tokens, ref_tokens)
    precision = lcs / len(hyp_tokens) if hyp_tokens else 0.0
    recall = lcs / len(ref_tokens) if ref_tokens else 0.0
    return RougeScore.from_pr(precision, recall)


# ---------------------------------------------------------------------------
# Ablation protocols


@dataclass(frozen=True)
class AblationMode:
    mode: str  # drop_traj | drop_item | shuffle_traj | shuffle_item | noise
    fraction: float = 0.0
    magnitude: float = 0.1

    def __post_init__(self) -> None:
        known = {"drop_traj", "drop_item", "shuffle_traj", "shuffle_item", "noise"}
        if self.mode not in known:
            raise ValueError(f"unknown ablation mode '{self.mode}'")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("noise fraction must lie in [0, 1]")

    @classmethod
    def parse(cls, spec: str) -> "AblationMode":
        """Parse CLI specs like 'drop_item' or 'noise:0.05:0.1'."""
        parts = spec.split(":")
        if parts[0] == "noise":
            fraction = float(parts[1]) if len(parts) > 1 else 0.05
            magnitude = float(parts[2]) if len(parts) > 2 else 0.1
            return cls(mode="noise", fraction=fraction, magnitude=magnitude)
        if len(parts) > 1:
            raise ValueError(f"mode '{parts[0]}' takes no parameters")
        return cls(mode=parts[0])

    @property
    def label(self) -> str:
        if self.mode == "noise":
            pct = self.fraction * 100
            pct_text = f"{pct:g}"
            return f"w/ {pct_text}% noise"
        return ABLATION_LABELS[self.mode]


def _derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded permutation of range(n) with no fixed points."""
    if n < 2:
        raise AblationError("a derangement needs at least 2 samples")
    while True:
        perm = rng.permutation(n)
        if not np.any(perm == np.arange(n)):
            return perm


def ablate_records(
    records: Sequence[DatasetRecord], mode: AblationMode, rng: np.random.Generator | None = None
) -> list[DatasetRecord]:
    """Apply a drop or shuffle ablation to rendered dataset records."""
    parsed = [parse_model_input(r.input_text) for r in records]
    if mode.mode == "drop_traj":
        return [
            replace(r, input_text=render_model_input([], names))
            for r, (_, names) in zip(records, parsed)
        ]
    if mode.mode == "drop_item":
        return [
            replace(r, input_text=render_model_input(tokens, []))
            for r, (tokens, _) in zip(records, parsed)
        ]
    if mode.mode in ("shuffle_traj", "shuffle_item"):
        if rng is None:
            raise AblationError("shuffle modes need a seeded rng")
        perm = _derangement(len(records), rng)
        out = []
        for i, (record, (tokens, names)) in enumerate(zip(records, parsed)):
            other_tokens, other_names = parsed[int(perm[i])]
            if mode.mode == "shuffle_traj":
                text = render_model_input(other_tokens, names)
            else:
                text = render_model_input(tokens, other_names)
            out.append(replace(record, input_text=text))
        return out
    raise AblationError(f"mode '{mode.mode}' does not apply to rendered records")


def ablate_trajectories(
    trajs: Sequence[AnnotatedTrajectory],
    mode: AblationMode,
    rng: np.random.Generator,
    store: StoreMap,
) -> list[AnnotatedTrajectory]:
    """Noise protocol: jitter exactly ceil(fraction * T) distinct timesteps per trajectory.

    Items in contact are recomputed from the perturbed positions; the
    purchased list is never touched.
    """
    if mode.mode != "noise":
        raise AblationError(f"mode '{mode.mode}' does not apply to trajectories")
    out = []
    for traj in trajs:
        positions = [tuple(p) for p in traj.positions]
        t_total = len(positions)
        count = math.ceil(mode.fraction * t_total)
        if count:
            chosen = rng.choice(t_total, size=count, replace=False)
            for t in chosen:
                angle = rng.uniform(0.0, 2.0 * math.pi)
                radius = mode.magnitude * math.sqrt(rng.uniform(1e-12, 1.0))
                x, y = positions[int(t)]
                positions[int(t)] = (x + radius * math.cos(angle), y + radius * math.sin(angle))
        items = store.nearest_item_ids(np.asarray(positions)) if count else list(traj.items_in_contact)
        out.append(
            AnnotatedTrajectory(
                positions=positions,
                items_in_contact=items,
                purchased=list(traj.purchased),
                provenance=traj.provenance,
                map_id=traj.map_id,
                caption_id=traj.caption_id,
                flags=list(traj.flags),
            )
        )
    return out


def apply_ablation(
    inputs: Sequence[DatasetRecord] | Sequence[AnnotatedTrajectory],
    mode: AblationMode,
    rng: np.random.Generator | None = None,
    store: StoreMap | None = None,
):
    """Dispatch an ablation: noise wants trajectories, the rest want records."""
    if mode.mode == "noise":
        if store is None or rng is None:
            raise AblationError("noise ablation needs a store map and a seeded rng")
        return ablate_trajectories(inputs, mode, rng, store)  # type: ignore[arg-type]
    return ablate_records(inputs, mode, rng)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# Corpus evaluation


@dataclass(frozen=True)
class PairScores:
    rouge1: RougeScore
    rouge2: RougeScore
    rougeL: RougeScore
    semantic: RougeScore | None = None


@dataclass(frozen=True)
class EvaluationReport:
    pairs: tuple[PairScores, ...]
    mean_rouge1: RougeScore
    mean_rouge2: RougeScore
    mean_rougeL: RougeScore
    mean_semantic: RougeScore | None = None


def _mean(scores: Sequence[RougeScore]) -> RougeScore:
    n = len(scores)
    return RougeScore(
        precision=sum(s.precision for s in scores) / n,
        recall=sum(s.recall for s in scores) / n,
        f1=sum(s.f1 for s in scores) / n,
    )


def evaluate(
    hyps: Sequence[str],
    refs: Sequence[str],
    external_scorer: "ExternalScorer | None" = None,
    stemmer: Callable[[str], str] | None = None,
) -> EvaluationReport:
    """Per-pair R-1/R-2/R-L plus corpus means; semantic column when configured."""
    if len(hyps) != len(refs):
        raise ValueError(f"hypothesis/reference length mismatch: {len(hyps)} vs {len(refs)}")
    if not hyps:
        raise ValueError("need at least one pair")
    semantic = external_scorer.score(hyps, refs) if external_scorer else None
    pairs = []
    for i, (hyp, ref) in enumerate(zip(hyps, refs)):
        pairs.append(
            PairScores(
                rouge1=rouge_n(hyp, ref, 1, stemmer),
                rouge2=rouge_n(hyp, ref, 2, stemmer),
                rougeL=rouge_l(hyp, ref, stemmer),
                semantic=semantic[i] if semantic else None,
            )
        )
    return EvaluationReport(
        pairs=tuple(pairs),
        mean_rouge1=_mean([p.rouge1 for p in pairs]),
        mean_rouge2=_mean([p.rouge2 for p in pairs]),
        mean_rougeL=_mean([p.rougeL for p in pairs]),
        mean_semantic=_mean(semantic) if semantic else None,
    )


class ExternalScorer:
    """Semantic-similarity hook: a subprocess speaking a line protocol.

    Input: one tab-separated hyp/ref pair per line on stdin. Output: one
    tab-separated precision/recall/f1 triple per line on stdout.
    """

    def __init__(self, command: Sequence[str], timeout: float = 300.0):
        self.command = list(command)
        self.timeout = timeout

    def score(self, hyps: Sequence[str], refs: Sequence[str]) -> list[RougeScore]:
        payload = "".join(
            _flatten(h) + "\t" + _flatten(r) + "\n" for h, r in zip(hyps, refs)
        )
        proc = subprocess.run(
            self.command,
            input=payload,
            capture_output=True,
            text=True,
            timeout=self.timeout,
            check=True,
        )
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != len(hyps):
            raise RuntimeError(
                f"external scorer returned {len(lines)} lines for {len(hyps)} pairs"
            )
        out = []
        for line in lines:
            p, r, f1 = (float(v) for v in line.split("\t"))
            out.append(RougeScore(precision=p, recall=r, f1=f1))
        return out


def _flatten(text: str) -> str:
    return text.replace("\t", " ").replace("\n", " ")


def report_rows(label: str, report: EvaluationReport) -> dict[str, object]:
    row: dict[str, object] = {
        "label": label,
        "R-1": round(report.mean_rouge1.f1, 6),
        "R-2": round(report.mean_rouge2.f1, 6),
        "R-L": round(report.mean_rougeL.f1, 6),
    }
    if report.mean_semantic is not None:
        row["SS-p"] = round(report.mean_semantic.precision, 6)
        row["SS-r"] = round(report.mean_semantic.recall, 6)
        row["SS-f1"] = round(report.mean_semantic.f1, 6)
    else:
        row["SS-p"] = row["SS-r"] = row["SS-f1"] = None
    return row


def format_table(rows: Sequence[dict[str, object]]) -> str:
    """Aligned plain-text table with one metric column per header."""
    headers = ["Models", "R-1", "R-2", "R-L", "SS-p", "SS-r", "SS-f1"]
    table = [headers]
    for row in rows:
        table.append(
            [str(row.get("label", ""))]
            + [
                ("-" if row.get(h) is None else f"{row[h]:.3f}")
                for h in headers[1:]
            ]
        )
    widths = [max(len(line[i]) for line in table) for i in range(len(headers))]
    out_lines = []
    for line in table:
        out_lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
    return "\n".join(out_lines) + "\n"
