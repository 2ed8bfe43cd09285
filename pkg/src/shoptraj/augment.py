"""Paraphrase-based data augmentation for train-split caption records.

Each train record's caption is expanded into k alternative captions with the
same meaning; the rendered input text is relabeled unchanged. Validation and
test splits are never touched.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from importlib import resources

from .gateway import Gateway, PromptRequest, SchemaDescriptor, complete_structured, retry_request
from .translate import DatasetRecord

log = logging.getLogger(__name__)

PARAPHRASE_TEMPERATURE = 0.9
PARAPHRASE_SCHEMA = SchemaDescriptor.list_of("string")


class ParaphraseError(Exception):
    """Paraphrasing produced no usable rewrites."""


def build_paraphrase_request(caption: str, k: int, seed: int | None = None) -> PromptRequest:
    text = resources.files("shoptraj.data.prompts").joinpath("paraphrase.txt").read_text("utf-8")
    system, _, user = text.partition("\n---\n")
    return PromptRequest(
        system=system.strip(),
        user=user.strip().format(
            k=k, caption=caption, format_instructions=PARAPHRASE_SCHEMA.format_instructions()
        ),
        temperature=PARAPHRASE_TEMPERATURE,
        max_tokens=2048,
        tag="paraphrase",
        seed=seed,
    )


def _violations(original: str, replies: list[str], k: int) -> list[str]:
    problems = []
    if len(replies) < k:
        problems.append(f"only {len(replies)} of {k} rewrites returned")
    lowered = [r.strip().lower() for r in replies[:k]]
    if any(not r for r in lowered):
        problems.append("a rewrite is empty")
    if any(r == original.strip().lower() for r in lowered):
        problems.append("a rewrite equals the original")
    if len(set(lowered)) != len(lowered):
        problems.append("duplicate rewrites")
    return problems


def paraphrase(gw: Gateway, caption: str, k: int, seed: int | None = None) -> list[str]:
    """k alternative phrasings of a caption, each different from the original.

    Duplicate or too-similar replies trigger one re-request, after which
    remaining duplicates are accepted with a warning. Only a reply set where
    every rewrite still equals the original is a hard failure.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    req = build_paraphrase_request(caption, k, seed=seed)
    replies = complete_structured(gw, req, PARAPHRASE_SCHEMA)
    problems = _violations(caption, replies, k)
    if problems:
        note = "; ".join(problems)
        log.warning("[paraphrase] %s; re-requesting once", note)
        replies = complete_structured(gw, retry_request(req, note), PARAPHRASE_SCHEMA)
        problems = _violations(caption, replies, k)
        if problems:
            lowered = [r.strip().lower() for r in replies[:k]]
            if len(replies) < k or all(r == caption.strip().lower() for r in lowered):
                raise ParaphraseError(f"paraphrasing failed after retry: {'; '.join(problems)}")
            log.warning("[paraphrase] accepted with remaining issues: %s", "; ".join(problems))
    return [r.strip() for r in replies[:k]]


def augment_dataset(gw: Gateway, records: list[DatasetRecord], k: int) -> list[DatasetRecord]:
    """Add k paraphrase records per original train record.

    The output preserves input order; each original train record is followed
    by its paraphrases, so |train'| = |train| * (k + 1). Failed samples are
    skipped with a warning and reported in one summary line.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    out: list[DatasetRecord] = []
    failures = 0
    for record in records:
        out.append(record)
        if k == 0 or record.split != "train" or record.lineage != "original":
            continue
        try:
            rewrites = paraphrase(gw, record.reference_caption, k)
        except ParaphraseError as exc:
            failures += 1
            log.warning("[augment] skipping sample %s: %s", record.sample_id, exc)
            continue
        for i, text in enumerate(rewrites, start=1):
            out.append(
                replace(record, reference_caption=text, lineage=f"paraphrase({i})")
            )
    if failures:
        log.warning("[augment] %d sample(s) skipped due to paraphrase failures", failures)
    return out
