"""Deterministic fixture corpus for the mock gateway backend.

Authors plausible canned replies for every request the synthesis pipeline
will issue against a given store map (caption batches, action plans, item
lists, paraphrases) and stores them under the fixture keying scheme the mock
backend replays. The same builder functions that the pipeline uses construct
each request, so fixture keys always match.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import build_paraphrase_request
from .captions import (
    STEP1_BATCH_SIZE,
    CaptionProfile,
    build_step1_request,
    build_step2_request,
    build_step3_request,
)
from .gateway import write_fixture
from .storemap import StoreMap

_HOUSEHOLDS = [
    ("A single professional living alone", (2, 5)),
    ("A couple sharing a small apartment", (4, 8)),
    ("A family of four with two school-age children", (8, 13)),
    ("A family of five stocking up for the week", (10, 14)),
    ("A retired couple on a fixed routine", (4, 7)),
    ("A college student on a tight weekly budget", (2, 4)),
]

_STYLES = {
    "budget": {
        "clause": "hunting for discounts and the lowest prices",
        "price": "They favor affordable products and discounted goods over premium labels.",
        "likes": ["grains", "vegetable", "household", "snacks", "frozen", "bakery"],
    },
    "premium": {
        "clause": "drawn to high-end and luxury products",
        "price": "They gladly pay more for premium quality and refuse to compromise.",
        "likes": ["meat", "fish", "alcohol", "dairy", "beverage", "fruit"],
    },
    "health": {
        "clause": "focused on fresh, organic and unprocessed food",
        "price": "They value quality over price and pick organic options whenever available.",
        "likes": ["fruit", "vegetable", "grains", "dairy", "fish", "beverage"],
    },
    "convenience": {
        "clause": "looking for quick, ready-to-eat meals",
        "price": "They accept mid-range prices as long as preparation stays minimal.",
        "likes": ["frozen", "snacks", "bakery", "beverage", "dairy", "meat"],
    },
    "gourmet": {
        "clause": "planning an ambitious home-cooked dinner",
        "price": "They prioritize ingredient quality and will pay a premium for freshness.",
        "likes": ["meat", "fish", "vegetable", "alcohol", "dairy", "grains"],
    },
}

_DECISIONS = [
    ("They arrive with a predetermined shopping list and stick to it.", (1, 2)),
    ("They have a rough plan but adjust it while walking the aisles.", (3, 3)),
    ("They browse widely and compare many options before deciding.", (4, 5)),
]

_STATES = [
    "They prefer pre-cut and seasoned products to save time.",
    "They prefer whole, unprocessed products they can prepare themselves.",
    "",
]

_DISHES = [
    "a vegetable stir fry",
    "a salmon dinner with rice",
    "a slow-cooked beef stew",
    "homemade pizza night",
    "a fresh garden salad",
    "",
]

_OPENERS = [
    "{h}, {c}.",
    "Here is {hl}, {c}.",
    "This shopper is {hl}, {c}.",
    "The customer is {hl}, {c}.",
    "Picture {hl}, {c}.",
    "Today's visitor: {hl}, {c}.",
    "Meet {hl}, {c}.",
    "We see {hl}, {c}.",
    "In the store today: {hl}, {c}.",
]

_LIKE_VERBS = [
    "They usually buy {cats}",
    "Their basket leans toward {cats}",
    "They gravitate to {cats}",
    "Most purchases come from {cats}",
    "They shop mainly for {cats}",
    "They concentrate on {cats}",
    "The staples for them are {cats}",
    "They reach first for {cats}",
    "Their go-to sections are {cats}",
]

_AVOID_VERBS = [
    "and tend to avoid {cats}.",
    "while steering clear of {cats}.",
    "and rarely touch {cats}.",
    "but skip {cats} almost every trip.",
    "and leave {cats} aside.",
    "yet seldom visit {cats}.",
    "and pass by {cats} without stopping.",
    "while ignoring {cats}.",
    "and hardly ever pick up {cats}.",
]


@dataclass
class ProfileSpec:
    """Ground truth behind one generated caption fixture."""

    profile: CaptionProfile
    liked: list[str]
    allocation: dict[str, int]
    purchase: dict[str, list[str]] = field(default_factory=dict)
    interest: dict[str, list[str]] = field(default_factory=dict)
    render_parts: tuple = ()


@dataclass
class CorpusSummary:
    n: int
    paraphrase_ks: tuple[int, ...]
    specs: list[ProfileSpec]
    files_written: int


def _caption_text(
    household: str,
    style: dict,
    decision: str,
    state: str,
    dish: str,
    liked: list[str],
    avoided: list[str],
    variant: int,
    rng: np.random.Generator,
) -> str:
    opener = _OPENERS[variant % len(_OPENERS)]
    like_verb = _LIKE_VERBS[(variant + int(rng.integers(0, 3))) % len(_LIKE_VERBS)]
    avoid_verb = _AVOID_VERBS[(variant + int(rng.integers(0, 3))) % len(_AVOID_VERBS)]
    liked_text = ", ".join(liked[:-1]) + f" and {liked[-1]}" if len(liked) > 1 else liked[0]
    sentences = [
        opener.format(h=household, hl=household[0].lower() + household[1:], c=style["clause"]),
        like_verb.format(cats=liked_text) + " " + avoid_verb.format(cats=", ".join(avoided)),
        decision,
        style["price"],
    ]
    if state:
        sentences.append(state)
    if dish:
        sentences.append(f"They plan to cook {dish} at home.")
    else:
        sentences.append("They have no particular dish in mind.")
    return " ".join(sentences)


def _fence(value, prose: str, rng: np.random.Generator) -> str:
    """Wrap a JSON value in prose and sometimes a code fence, like real replies."""
    body = json.dumps(value, indent=2)
    roll = rng.uniform()
    if roll < 0.4:
        return f"{prose}\n```json\n{body}\n```\n"
    if roll < 0.7:
        return f"{prose}\n{body}"
    return body


def build_mock_corpus(
    store: StoreMap,
    fixture_dir: str | Path,
    n: int = 80,
    paraphrase_ks: tuple[int, ...] = (2, 4, 8),
    seed: int = 7,
) -> CorpusSummary:
    """Write the complete fixture corpus for an n-sample synthesis run."""
    rng = np.random.default_rng(seed)
    fixture_dir = Path(fixture_dir)
    fixture_dir.mkdir(parents=True, exist_ok=True)
    files = 0

    categories = list(store.categories)
    per_category_names = {
        c: [it.name for it in store.items if it.category == c] for c in categories
    }

    # Step 1: caption profiles, batched exactly like generate_captions
    specs: list[ProfileSpec] = []
    rows_all: list[dict] = []
    batch_index = 0
    while len(specs) < n:
        size = min(STEP1_BATCH_SIZE, n - len(specs))
        rows = []
        for _ in range(size):
            spec = _make_profile_spec(categories, per_category_names, rng)
            specs.append(spec)
            rows.append(
                {
                    "intention": spec.profile.caption,
                    "num_items_to_buy": spec.profile.num_items_to_buy,
                    "purchase_consideration": spec.profile.purchase_consideration,
                }
            )
        rows_all.extend(rows)
        req = build_step1_request(size, batch_index)
        write_fixture(fixture_dir, req, _fence(rows, f"Here are {size} customer intentions.", rng))
        files += 1
        batch_index += 1

    # partial-batch fixtures: any run of n' <= n samples replays a prefix of
    # the same profiles, whatever its final batch size
    for index in range(batch_index):
        for size in range(1, STEP1_BATCH_SIZE):
            start = index * STEP1_BATCH_SIZE
            if start + size > n:
                break
            rows = rows_all[start : start + size]
            req = build_step1_request(size, index)
            write_fixture(
                fixture_dir, req, _fence(rows, f"Here are {size} customer intentions.", rng)
            )
            files += 1

    # Steps 2 and 3 per profile
    for spec in specs:
        req = build_step2_request(spec.profile, categories)
        write_fixture(fixture_dir, req, _fence(spec.allocation, "Here is the shopping plan:", rng))
        files += 1
        for category, qty in spec.allocation.items():
            if qty <= 0:
                continue
            reply = {
                "inclined_to_purchase": spec.purchase[category],
                "show_interest": spec.interest[category],
            }
            req3 = build_step3_request(spec.profile, category, qty, store)
            write_fixture(fixture_dir, req3, _fence(reply, f"Lists for {category}:", rng))
            files += 1

    # Paraphrases for every caption and every requested k
    for spec in specs:
        for k in paraphrase_ks:
            rewrites = [_caption_rewrite(spec, variant, rng) for variant in range(1, k + 1)]
            req = build_paraphrase_request(spec.profile.caption, k)
            write_fixture(fixture_dir, req, _fence(rewrites, "Rewritten descriptions:", rng))
            files += 1

    return CorpusSummary(n=n, paraphrase_ks=tuple(paraphrase_ks), specs=specs, files_written=files)


def _make_profile_spec(
    categories: list[str],
    per_category_names: dict[str, list[str]],
    rng: np.random.Generator,
) -> ProfileSpec:
    household, num_range = _HOUSEHOLDS[int(rng.integers(0, len(_HOUSEHOLDS)))]
    style_name = list(_STYLES)[int(rng.integers(0, len(_STYLES)))]
    style = _STYLES[style_name]
    decision, cons_range = _DECISIONS[int(rng.integers(0, len(_DECISIONS)))]
    consideration = int(rng.integers(cons_range[0], cons_range[1] + 1))
    num_items = int(rng.integers(num_range[0], num_range[1] + 1))

    liked_pool = [c for c in style["likes"] if c in categories]
    if not liked_pool:
        liked_pool = categories[:4]
    want = max(2, -(-num_items // 4))  # ceil(num/4) categories, at least 2
    want = min(want, len(liked_pool))
    liked = list(rng.choice(liked_pool, size=want, replace=False))
    avoided_pool = [c for c in categories if c not in liked]
    avoided = list(rng.choice(avoided_pool, size=min(2, len(avoided_pool)), replace=False))
    state = _STATES[int(rng.integers(0, len(_STATES)))]
    dish = _DISHES[int(rng.integers(0, len(_DISHES)))]

    caption = _caption_text(household, style, decision, state, dish, liked, avoided, 0, rng)
    profile = CaptionProfile(
        caption=caption, num_items_to_buy=num_items, purchase_consideration=consideration
    )

    # Allocate num_items across liked categories, capped by catalog availability
    allocation = {c: 0 for c in liked}
    capacity = {c: len(per_category_names[c]) for c in liked}
    remaining = num_items
    while remaining > 0 and any(allocation[c] < capacity[c] for c in liked):
        order = list(rng.permutation(liked))
        for c in order:
            if remaining == 0:
                break
            if allocation[c] < capacity[c]:
                allocation[c] += 1
                remaining -= 1
    if rng.uniform() < 0.3 and avoided:
        allocation[avoided[0]] = 0  # explicit zero entry, mirrors real plans

    purchase: dict[str, list[str]] = {}
    interest: dict[str, list[str]] = {}
    for category, qty in allocation.items():
        if qty <= 0:
            continue
        names = list(per_category_names[category])
        picked = list(rng.choice(names, size=qty, replace=False))
        rest = [nm for nm in names if nm not in picked]
        n_interest = min(
            max(profile.purchase_consideration - 2, 0) + int(rng.integers(0, 2)),
            len(rest),
            2 * qty,
        )
        purchase[category] = picked
        interest[category] = list(rng.choice(rest, size=n_interest, replace=False)) if n_interest else []

    return ProfileSpec(
        profile=profile,
        liked=liked,
        allocation=allocation,
        purchase=purchase,
        interest=interest,
        render_parts=(household, style, decision, state, dish, liked, avoided),
    )


def _caption_rewrite(spec: ProfileSpec, variant: int, rng: np.random.Generator) -> str:
    household, style, decision, state, dish, liked, avoided = spec.render_parts
    text = _caption_text(household, style, decision, state, dish, liked, avoided, variant, rng)
    if text.strip().lower() == spec.profile.caption.strip().lower():
        text += " Overall the trip follows their usual habits."
    return text
